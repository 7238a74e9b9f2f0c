//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the criteria execute one after the
//! other and the timing-based series is not disturbed by parallel work.

use std::time::{Duration, Instant};

use cfmg::bench::{self, BenchConfig};
use cfmg::engine::{BuildOptions, IntervalIndex};
use cfmg::generator::{self, Family, GenSpec};
use cfmg::graph::bfs_distances;
use cfmg::oracle::{interval_sum_bruteforce, median_of_three_bruteforce, verify_convex, verify_cube_free, verify_median_graph, Apsp};
use cfmg::staircase::QueryStats;
use cfmg::{Error, Graph, SemigroupKind, SemigroupSpec, VertexSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ALL_PAIRS_LIMIT: usize = 150;
const RANDOM_PAIRS: usize = 10_000;
const MEDIAN_LIMIT: usize = 120;
const DISTANCE_LIMIT: usize = 300;
const AUDIT_LIMIT: usize = 200;
const SUITE_BUDGET: Duration = Duration::from_secs(300);
const FIT_RATIO: f64 = 4.0;
const BUILD_RATIO: f64 = 2.6;
const LOWEST_EXP: u32 = 7;
const HIGHEST_EXP: u32 = 13;
const CONVEX_UNIONS: usize = 100;

struct Outcome {
    ok: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

fn gen(family: Family, size: &[usize], seed: u64) -> (String, Graph) {
    let g = generator::generate(&GenSpec::new(family, size, seed)).expect("generation");
    let dims: Vec<String> = size.iter().map(|s| s.to_string()).collect();
    (format!("{}({})#{seed}", family.name(), dims.join("x")), g)
}

fn interval_instances() -> Vec<(String, Graph)> {
    vec![
        gen(Family::Grid, &[8, 8], 0),
        gen(Family::Grid, &[12, 12], 0),
        gen(Family::Grid, &[20, 20], 0),
        gen(Family::Grid, &[32, 32], 0),
        gen(Family::Tree, &[150], 1),
        gen(Family::Tree, &[1000], 2),
        gen(Family::StaircaseSubgrid, &[14, 12], 3),
        gen(Family::StaircaseSubgrid, &[30, 25], 4),
        gen(Family::Glued, &[6, 6], 5),
        gen(Family::RandomExpansion, &[120], 11),
        gen(Family::RandomExpansion, &[150], 12),
        gen(Family::RandomExpansion, &[250], 13),
        gen(Family::RandomExpansion, &[400], 14),
        gen(Family::RandomExpansion, &[500], 15),
    ]
}

fn small_instances(limit: usize) -> Vec<(String, Graph)> {
    let mut out = vec![
        gen(Family::Path, &[limit.min(40)], 0),
        gen(Family::Grid, &[10, limit / 10], 0),
        gen(Family::Tree, &[limit], 1),
        gen(Family::StaircaseSubgrid, &[12, 12], 2),
        gen(Family::Glued, &[5, 5], 3),
    ];
    for seed in 0..3 {
        out.push(gen(Family::RandomExpansion, &[limit], 20 + seed));
    }
    out.retain(|(_, g)| g.n() <= limit);
    out
}

fn build(g: &Graph, kind: SemigroupKind, leaf: usize) -> Result<IntervalIndex<SemigroupSpec>, Error> {
    let values = kind.payloads(g, 0xc0ffee);
    IntervalIndex::build(g, SemigroupSpec::new(kind), values, &BuildOptions::default().leaf_size(leaf))
}

/// Verifies `g` once, then builds without re-verifying.
fn verified(g: &Graph) -> Result<(), String> {
    for r in [verify_median_graph(g, true).unwrap(), verify_cube_free(g, true).unwrap()] {
        if !r.ok {
            return Err(format!("{}: {}", r.check, r.message));
        }
    }
    Ok(())
}

fn build_trusted(g: &Graph, kind: SemigroupKind, leaf: usize) -> Result<IntervalIndex<SemigroupSpec>, Error> {
    let values = kind.payloads(g, 0xc0ffee);
    IntervalIndex::build(g, SemigroupSpec::new(kind), values, &BuildOptions::default().leaf_size(leaf).trusted())
}

fn criterion_interval() -> Outcome {
    let start = Instant::now();
    let instances = interval_instances();
    let mut checked = 0usize;
    let mut mismatches = 0usize;
    let mut first = None;
    for (name, g) in &instances {
        if let Err(e) = verified(g) {
            return Outcome {
                ok: false,
                detail: format!("{name} is not a cube-free median graph: {e}"),
            };
        }
        for kind in SemigroupKind::ALL {
            for leaf in [BuildOptions::default().leaf_size, 1] {
                let idx = match build_trusted(g, kind, leaf) {
                    Ok(idx) => idx,
                    Err(e) => {
                        return Outcome {
                            ok: false,
                            detail: format!("{name}: build failed: {e}"),
                        }
                    }
                };
                let s = SemigroupSpec::new(kind);
                let values = idx.values().to_vec();
                let n = g.n() as u32;
                let mut check = |u: u32, v: u32, want: u64| {
                    checked += 1;
                    if idx.query(u, v).ok() != Some(want) {
                        mismatches += 1;
                        first.get_or_insert(format!("{name} {kind} leaf {leaf} ({u},{v})"));
                    }
                };
                if g.n() <= ALL_PAIRS_LIMIT {
                    let apsp = Apsp::new(g).unwrap();
                    for u in 0..n {
                        for v in 0..n {
                            check(u, v, apsp.interval_sum(&s, &values, u, v));
                        }
                    }
                } else {
                    let mut rng = ChaCha8Rng::seed_from_u64(g.n() as u64);
                    for _ in 0..RANDOM_PAIRS {
                        let (u, v) = (rng.gen_range(0..n), rng.gen_range(0..n));
                        check(u, v, interval_sum_bruteforce(g, &s, &values, u, v).unwrap());
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    Outcome {
        ok: instances.len() >= 12 && mismatches == 0 && elapsed < SUITE_BUDGET,
        detail: format!(
            "{} instances, 3 semigroups, 2 leaf sizes, {checked} queries, {mismatches} mismatches{}, {:.1}s",
            instances.len(),
            first.map(|f| format!(" (first {f})")).unwrap_or_default(),
            elapsed.as_secs_f64()
        ),
    }
}

fn criterion_median() -> Outcome {
    let mut triples = 0usize;
    let mut mismatches = 0usize;
    let mut names = Vec::new();
    for (name, g) in small_instances(MEDIAN_LIMIT) {
        let idx = build(&g, SemigroupKind::Sum, 1).unwrap();
        let apsp = Apsp::new(&g).unwrap();
        let n = g.n() as u32;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    triples += 1;
                    if idx.median_of_three(a, b, c).ok() != apsp.median(a, b, c) {
                        mismatches += 1;
                    }
                }
            }
        }
        // spot-check the table oracle against the BFS oracle
        for k in 0..50u32 {
            let (a, b, c) = (k * 7 % n, k * 13 % n, k * 29 % n);
            if median_of_three_bruteforce(&g, a, b, c).ok() != apsp.median(a, b, c) {
                mismatches += 1;
            }
        }
        names.push(format!("{name}:{n}"));
    }
    Outcome {
        ok: mismatches == 0,
        detail: format!("{triples} triples on {}, {mismatches} mismatches", names.join(" ")),
    }
}

fn criterion_distance() -> Outcome {
    let mut pairs = 0usize;
    let mut mismatches = 0usize;
    let mut count = 0;
    for (_, g) in small_instances(DISTANCE_LIMIT) {
        count += 1;
        let idx = build(&g, SemigroupKind::Sum, BuildOptions::default().leaf_size).unwrap();
        for u in 0..g.n() as u32 {
            let d = bfs_distances(&g, u).unwrap();
            for v in 0..g.n() as u32 {
                pairs += 1;
                if idx.distance(u, v).ok() != Some(d[v as usize]) {
                    mismatches += 1;
                }
            }
        }
    }
    Outcome {
        ok: mismatches == 0,
        detail: format!("{pairs} pairs on {count} instances (n <= {DISTANCE_LIMIT}), {mismatches} mismatches"),
    }
}

/// Whether `set` (global ids) induces a tree.
fn is_tree(g: &Graph, set: &[u32]) -> bool {
    let sub = g.induced(set).unwrap();
    sub.edge_count() + 1 == set.len() && bfs_distances(&sub, 0).is_ok()
}

fn convex_in(g: &Graph, level: &[u32], set: &[u32]) -> bool {
    // levels are convex, so convexity inside the level graph is convexity in g
    let sub = g.induced(level).unwrap();
    let local: Vec<u32> = set.iter().map(|v| level.binary_search(v).unwrap() as u32).collect();
    verify_convex(&sub, &VertexSet::new(sub.n(), local)).unwrap().ok
}

fn criterion_structure() -> Outcome {
    let mut violations = Vec::new();
    let (mut fibers, mut imprints, mut boundaries, mut imprint_sets, mut queries, mut unions) = (0, 0, 0, 0, 0, 0);
    let mut instances = small_instances(AUDIT_LIMIT);
    instances.extend(interval_instances().into_iter().filter(|(_, g)| g.n() <= 512));
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (name, g) in &instances {
        let idx = build(g, SemigroupKind::Sum, 1).unwrap();
        let log = (g.n() as f64).log2().ceil() as u32;
        for level in idx.levels() {
            let mut verts = level.vertices.clone();
            verts.sort_unstable();
            for f in &level.fibers {
                fibers += 1;
                if 2 * f.members.len() > verts.len() {
                    violations.push(format!("{name}: fiber of {} in level of {}", f.members.len(), verts.len()));
                }
                for (v, w) in &f.imprints {
                    imprints += 1;
                    if w.is_empty() || w.len() > 2 {
                        violations.push(format!("{name}: {v} has {} imprints", w.len()));
                    }
                }
                for (y, b) in &f.boundaries {
                    boundaries += 1;
                    if !is_tree(g, b) || !convex_in(g, &verts, b) {
                        violations.push(format!("{name}: boundary of {} towards {y} is not a convex tree", f.star_vertex));
                    }
                }
                for &(w, _) in &f.tree {
                    let set: Vec<u32> = f.imprints.iter().filter(|(_, i)| i.contains(&w)).map(|e| e.0).collect();
                    imprint_sets += 1;
                    if set.is_empty() || !convex_in(g, &verts, &set) {
                        violations.push(format!("{name}: vertices with imprint {w} are not convex"));
                    }
                }
            }
            // unions of fibers over convex subsets of the star
            if level.star.len() >= 2 && unions < CONVEX_UNIONS * 4 {
                let apsp = Apsp::new(&g.induced(&verts).unwrap()).unwrap();
                let loc = |v: u32| verts.binary_search(&v).unwrap() as u32;
                for _ in 0..8 {
                    let a = level.star[rng.gen_range(0..level.star.len())];
                    let b = level.star[rng.gen_range(0..level.star.len())];
                    let (la, lb) = (loc(a), loc(b));
                    let y: Vec<u32> = level
                        .star
                        .iter()
                        .copied()
                        .filter(|&x| apsp.dist(la, loc(x)) + apsp.dist(loc(x), lb) == apsp.dist(la, lb))
                        .collect();
                    let mut union: Vec<u32> = level
                        .fibers
                        .iter()
                        .filter(|f| y.contains(&f.star_vertex))
                        .flat_map(|f| f.members.iter().copied())
                        .collect();
                    union.sort_unstable();
                    unions += 1;
                    if !convex_in(g, &verts, &union) {
                        violations.push(format!("{name}: union of fibers over I[{a},{b}] is not convex"));
                    }
                }
            }
        }
        let n = g.n() as u32;
        for _ in 0..2000 {
            let (u, v) = (rng.gen_range(0..n), rng.gen_range(0..n));
            let mut st = QueryStats::default();
            idx.query_with_stats(u, v, &mut st).unwrap();
            queries += 1;
            if st.max_fibers > 9 || st.max_depth > log.max(1) {
                violations.push(format!("{name}: query ({u},{v}) met {} fibers at depth {}", st.max_fibers, st.max_depth));
            }
        }
    }
    Outcome {
        ok: violations.is_empty() && unions >= CONVEX_UNIONS,
        detail: format!(
            "{} instances: {fibers} fibers, {imprints} imprint lists, {boundaries} relative boundaries, {imprint_sets} imprint sets, {unions} fiber unions, {queries} queries; {} violations{}",
            instances.len(),
            violations.len(),
            violations.first().map(|v| format!(" (first: {v})")).unwrap_or_default()
        ),
    }
}

fn criterion_partition() -> Outcome {
    let mut audited = 0usize;
    let mut violations = Vec::new();
    for (name, g) in small_instances(AUDIT_LIMIT) {
        let apsp = Apsp::new(&g).unwrap();
        for leaf in [1, 8] {
            let idx = build(&g, SemigroupKind::Sum, leaf).unwrap();
            let n = g.n() as u32;
            let mut seen = vec![u32::MAX; g.n()];
            let mut stamp = 0;
            for u in 0..n {
                for v in 0..n {
                    let d = idx.decompose(u, v).unwrap();
                    if d.fibers == 0 {
                        continue;
                    }
                    audited += 1;
                    stamp += 1;
                    let mut count = 0;
                    let mut ok = true;
                    for p in &d.parts {
                        for w in apsp.interval(p.from, p.to) {
                            ok &= seen[w as usize] != stamp;
                            seen[w as usize] = stamp;
                            count += 1;
                        }
                    }
                    ok &= count == apsp.interval(u, v).count() && apsp.interval(u, v).all(|w| seen[w as usize] == stamp);
                    if !ok {
                        violations.push(format!("{name} leaf {leaf} ({u},{v})"));
                    }
                }
            }
        }
    }
    Outcome {
        ok: violations.is_empty() && audited > 0,
        detail: format!(
            "{audited} cross-fiber queries audited, {} violations{}",
            violations.len(),
            violations.first().map(|v| format!(" (first {v})")).unwrap_or_default()
        ),
    }
}

fn criterion_complexity() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for family in [Family::Grid, Family::RandomExpansion] {
        let mut cfg = BenchConfig::doubling(family, LOWEST_EXP, HIGHEST_EXP);
        cfg.leaf_size = 1;
        cfg.trials = 2000;
        cfg.checked = 100;
        let report = bench::run(&cfg).unwrap();
        let visits = report.visit_fit.clone().unwrap();
        let entries = report.entry_fit.clone().unwrap();
        let build = report.max_build_ratio.unwrap();
        let pass = visits.max_ratio <= FIT_RATIO
            && entries.max_ratio <= FIT_RATIO
            && build <= BUILD_RATIO
            && report.mismatches() == 0;
        ok &= pass;
        detail.push(format!(
            "{}: visits {:.2}·log²n (max/fit {:.2}), entries {:.3}·n·log²n (max/fit {:.2}), build ratio {:.2}, mismatches {}",
            family.name(),
            visits.c,
            visits.max_ratio,
            entries.c,
            entries.max_ratio,
            build,
            report.mismatches()
        ));
        eprint!("{}", report.table());
    }
    Outcome {
        ok,
        detail: detail.join("; "),
    }
}

fn criterion_negative() -> Outcome {
    let mut problems = Vec::new();
    let c6 = generator::cycle(6);
    let r = verify_median_graph(&c6, false).unwrap();
    match &r.witness {
        Some(w) if !r.ok && w.len() == 3 && median_of_three_bruteforce(&c6, w[0], w[1], w[2]).is_err() => {}
        _ => problems.push(format!("C6 not rejected with a median-free triple: {r:?}")),
    }
    let q3 = generator::cube();
    let r = verify_cube_free(&q3, false).unwrap();
    match &r.witness {
        Some(w) if !r.ok && w.len() == 8 && {
            let sub = q3.induced(w).unwrap();
            sub.edge_count() == 12 && (0..8).all(|v| sub.degree(v) == 3) && verify_median_graph(&sub, false).unwrap().ok
        } => {}
        _ => problems.push(format!("Q3 not rejected with a cube witness: {r:?}")),
    }
    for (name, g) in [("C6", &c6), ("Q3", &q3)] {
        match IntervalIndex::build(g, SemigroupSpec::sum(), vec![1; g.n()], &BuildOptions::default()) {
            Err(Error::Rejected(_)) => {}
            other => problems.push(format!("build on {name} without trust: {:?}", other.map(|_| ()))),
        }
    }
    let big = generator::grid(3, 3);
    let opts = BuildOptions {
        verify_limit: 4,
        ..Default::default()
    };
    if !matches!(IntervalIndex::build(&big, SemigroupSpec::sum(), vec![1; 9], &opts), Err(Error::TooLarge { .. })) {
        problems.push("unverifiable input built without trust".into());
    }
    Outcome {
        ok: problems.is_empty(),
        detail: if problems.is_empty() {
            "C6 rejected with a median-free triple, Q3 with its 8 cube vertices; untrusted builds refused".into()
        } else {
            problems.join("; ")
        },
    }
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let criteria: [Criterion; 7] = [
        ("interval oracle equivalence", criterion_interval),
        ("median-of-three oracle equivalence", criterion_median),
        ("distance oracle equivalence", criterion_distance),
        ("structural invariants", criterion_structure),
        ("decomposition partition audit", criterion_partition),
        ("complexity shadow", criterion_complexity),
        ("negative inputs", criterion_negative),
    ];
    // `cargo test --test acceptance -- 3 6` runs a subset
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(i + 1)) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let out = run();
        println!(
            "criterion {} [{name}]: {} ({}; {:.1}s)",
            i + 1,
            if out.ok { "PASS" } else { "FAIL" },
            out.detail,
            start.elapsed().as_secs_f64()
        );
        failed += usize::from(!out.ok);
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
