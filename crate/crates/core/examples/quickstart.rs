use cfmg::generator::{generate, Family, GenSpec};
use cfmg::{BuildOptions, IntervalIndex, SemigroupKind, SemigroupSpec};

fn main() -> cfmg::Result<()> {
    let g = generate(&GenSpec::new(Family::Glued, &[8, 8], 42))?;
    let values = SemigroupKind::Min.payloads(&g, 0);
    let idx = IntervalIndex::build(&g, SemigroupSpec::min(), values, &BuildOptions::default())?;

    let (u, v) = (0, g.n() as u32 - 1);
    println!("{} vertices, {} edges", g.n(), g.edge_count());
    println!("min over I[{u}, {v}] = {}", idx.query(u, v)?);
    println!("d({u}, {v}) = {}", idx.distance(u, v)?);
    println!("median(0, 5, {v}) = {}", idx.median_of_three(0, 5, v)?);
    println!("{:?}", idx.stats());
    Ok(())
}
