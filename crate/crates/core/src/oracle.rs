//! Brute-force reference implementations and structural verifiers.
//!
//! Nothing here uses the index; these functions are the ground truth the
//! index is tested against.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{bfs_distances, bfs_order, Graph, VertexSet, NONE};
use crate::semigroup::Semigroup;

/// Verifiers refuse graphs larger than this unless forced.
pub const DEFAULT_VERIFY_LIMIT: usize = 2000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VerificationReport {
    pub check: &'static str,
    pub ok: bool,
    /// Dense vertex ids demonstrating a failure.
    pub witness: Option<Vec<u32>>,
    pub message: String,
}

impl VerificationReport {
    fn pass(check: &'static str, message: impl Into<String>) -> Self {
        Self {
            check,
            ok: true,
            witness: None,
            message: message.into(),
        }
    }

    fn fail(check: &'static str, witness: Vec<u32>, message: impl Into<String>) -> Self {
        Self {
            check,
            ok: false,
            witness: Some(witness),
            message: message.into(),
        }
    }
}

fn guard(g: &Graph, force: bool) -> Result<()> {
    if !force && g.n() > DEFAULT_VERIFY_LIMIT {
        Err(Error::TooLarge {
            n: g.n(),
            limit: DEFAULT_VERIFY_LIMIT,
        })
    } else {
        Ok(())
    }
}

/// `I[u, v]` via two BFS passes.
pub fn interval_bruteforce(g: &Graph, u: u32, v: u32) -> Result<VertexSet> {
    let du = bfs_distances(g, u)?;
    let dv = bfs_distances(g, v)?;
    let d = du[v as usize];
    Ok(VertexSet::new(
        g.n(),
        (0..g.n() as u32).filter(|&w| du[w as usize] + dv[w as usize] == d),
    ))
}

/// `p(I[u, v])` by folding payloads over the brute-force interval.
pub fn interval_sum_bruteforce<S: Semigroup>(
    g: &Graph,
    semigroup: &S,
    values: &[S::Value],
    u: u32,
    v: u32,
) -> Result<S::Value> {
    let iv = interval_bruteforce(g, u, v)?;
    Ok(semigroup
        .fold(iv.iter().map(|w| values[w as usize]))
        .expect("interval contains u"))
}

/// The unique vertex of `I[a,b] ∩ I[b,c] ∩ I[c,a]`.
pub fn median_of_three_bruteforce(g: &Graph, a: u32, b: u32, c: u32) -> Result<u32> {
    let (da, db, dc) = (bfs_distances(g, a)?, bfs_distances(g, b)?, bfs_distances(g, c)?);
    let half = da[b as usize] + db[c as usize] + dc[a as usize];
    let found: Vec<u32> = (0..g.n() as u32)
        .filter(|&x| 2 * (da[x as usize] + db[x as usize] + dc[x as usize]) == half)
        .collect();
    match found.as_slice() {
        [m] => Ok(*m),
        _ => Err(Error::NotMedian(format!(
            "triple ({a}, {b}, {c}) has {} medians",
            found.len()
        ))),
    }
}

/// All-pairs distances, for batch oracle comparisons on small graphs.
pub struct Apsp {
    n: usize,
    dist: Vec<u16>,
}

impl Apsp {
    pub fn new(g: &Graph) -> Result<Self> {
        let n = g.n();
        if n > u16::MAX as usize {
            return Err(Error::TooLarge { n, limit: u16::MAX as usize });
        }
        let mut dist = Vec::with_capacity(n * n);
        for s in 0..n as u32 {
            dist.extend(bfs_distances(g, s)?.into_iter().map(|d| d as u16));
        }
        Ok(Self { n, dist })
    }

    #[inline]
    pub fn dist(&self, u: u32, v: u32) -> u32 {
        self.dist[u as usize * self.n + v as usize] as u32
    }

    #[inline]
    fn row(&self, u: u32) -> &[u16] {
        &self.dist[u as usize * self.n..(u as usize + 1) * self.n]
    }

    pub fn interval(&self, u: u32, v: u32) -> impl Iterator<Item = u32> + '_ {
        let (ru, rv) = (self.row(u), self.row(v));
        let d = ru[v as usize];
        (0..self.n as u32).filter(move |&w| ru[w as usize] + rv[w as usize] == d)
    }

    pub fn interval_sum<S: Semigroup>(&self, s: &S, values: &[S::Value], u: u32, v: u32) -> S::Value {
        s.fold(self.interval(u, v).map(|w| values[w as usize]))
            .expect("interval contains u")
    }

    pub fn median(&self, a: u32, b: u32, c: u32) -> Option<u32> {
        let (ra, rb, rc) = (self.row(a), self.row(b), self.row(c));
        let half = ra[b as usize] as u32 + rb[c as usize] as u32 + rc[a as usize] as u32;
        let mut it = (0..self.n as u32).filter(|&x| {
            2 * (ra[x as usize] as u32 + rb[x as usize] as u32 + rc[x as usize] as u32) == half
        });
        let m = it.next()?;
        it.next().is_none().then_some(m)
    }
}

/// Checks that every triple has exactly one median. `O(n³)` word operations.
pub fn verify_median_graph(g: &Graph, force: bool) -> Result<VerificationReport> {
    const CHECK: &str = "median_graph";
    guard(g, force)?;
    let n = g.n();
    if n == 0 {
        return Ok(VerificationReport::pass(CHECK, "empty graph"));
    }
    let apsp = Apsp::new(g)?;
    let words = n.div_ceil(64);
    let mut row = vec![0u64; n * words];
    for u in 0..n as u32 {
        // row[v] = I[u, v], built in BFS order from u
        let (order, dist) = bfs_order(g, u);
        row.iter_mut().for_each(|w| *w = 0);
        for &v in &order {
            let vi = v as usize;
            row[vi * words + vi / 64] |= 1 << (vi % 64);
            for &p in g.neighbors(v) {
                if dist[p as usize] + 1 == dist[vi] {
                    for k in 0..words {
                        row[vi * words + k] |= row[p as usize * words + k];
                    }
                }
            }
        }
        for v in u + 1..n as u32 {
            let iuv = &row[v as usize * words..(v as usize + 1) * words];
            for w in v + 1..n as u32 {
                let iuw = &row[w as usize * words..(w as usize + 1) * words];
                let dvw = apsp.dist(v, w);
                let mut count = 0;
                for (k, (a, b)) in iuv.iter().zip(iuw).enumerate() {
                    let mut bits = a & b;
                    while bits != 0 {
                        let x = (k * 64 + bits.trailing_zeros() as usize) as u32;
                        bits &= bits - 1;
                        if apsp.dist(v, x) + apsp.dist(x, w) == dvw {
                            count += 1;
                        }
                    }
                }
                if count != 1 {
                    return Ok(VerificationReport::fail(
                        CHECK,
                        vec![u, v, w],
                        format!("triple has {count} medians"),
                    ));
                }
            }
        }
    }
    Ok(VerificationReport::pass(CHECK, format!("all triples of {n} vertices have a unique median")))
}

/// Checks for an induced 3-cube: an interval of diameter 3 on 8 vertices,
/// each with exactly 3 neighbors inside it.
pub fn verify_cube_free(g: &Graph, force: bool) -> Result<VerificationReport> {
    const CHECK: &str = "cube_free";
    guard(g, force)?;
    let apsp = Apsp::new(g)?;
    for u in 0..g.n() as u32 {
        for v in u + 1..g.n() as u32 {
            if apsp.dist(u, v) != 3 {
                continue;
            }
            let iv: Vec<u32> = apsp.interval(u, v).collect();
            if iv.len() == 8
                && iv.iter().all(|&x| {
                    g.neighbors(x).iter().filter(|w| iv.binary_search(w).is_ok()).count() == 3
                })
            {
                return Ok(VerificationReport::fail(CHECK, iv, "induced 3-cube"));
            }
        }
    }
    Ok(VerificationReport::pass(CHECK, "no induced 3-cube"))
}

/// Checks `I[u, v] ⊆ X` for all `u, v ∈ X`.
pub fn verify_convex(g: &Graph, set: &VertexSet) -> Result<VerificationReport> {
    const CHECK: &str = "convex";
    for u in set.iter() {
        let (order, dist) = bfs_order(g, u);
        // reach[x]: x lies on a geodesic from u to some member of the set
        let mut reach = vec![false; g.n()];
        for &x in order.iter().rev() {
            let xi = x as usize;
            reach[xi] = set.contains(x)
                || g
                    .neighbors(x)
                    .iter()
                    .any(|&y| dist[y as usize] == dist[xi] + 1 && reach[y as usize]);
            if reach[xi] && !set.contains(x) {
                // find a member witnessing it
                let mut y = x;
                while !set.contains(y) {
                    y = *g
                        .neighbors(y)
                        .iter()
                        .find(|&&z| dist[z as usize] == dist[y as usize] + 1 && reach[z as usize])
                        .expect("reach propagates from a member");
                }
                return Ok(VerificationReport::fail(
                    CHECK,
                    vec![u, y, x],
                    format!("vertex {x} lies on a geodesic between members {u} and {y}"),
                ));
            }
        }
        if dist.contains(&NONE) {
            return Err(Error::Precondition("graph is disconnected".into()));
        }
    }
    Ok(VerificationReport::pass(CHECK, format!("{} vertices, closed under intervals", set.len())))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EmbeddingOutcome {
    /// Explicit coordinates preserving all pairwise distances.
    Embedded(Vec<(u32, i32, i32)>),
    /// The construction did not apply; no conclusion.
    Skipped(String),
    Failed { witness: Vec<u32>, message: String },
}

/// Tries to embed the interval `I[u, v]` isometrically into the square grid.
///
/// Rejects bipartiteness and `K_{2,3}` violations outright. Otherwise the
/// edges of the interval are grouped into parallel classes from `u`, the
/// classes are split into two directions by 2-coloring the "cross in a
/// square" relation, and each vertex gets the number of classes of each
/// direction crossed on a geodesic from `u`.
pub fn interval_grid_embedding(g: &Graph, apsp: &Apsp, u: u32, v: u32) -> EmbeddingOutcome {
    let verts: Vec<u32> = apsp.interval(u, v).collect();
    let k = verts.len();
    let local = |x: u32| verts.binary_search(&x).ok();
    let adj: Vec<Vec<usize>> = verts
        .iter()
        .map(|&x| g.neighbors(x).iter().filter_map(|&y| local(y)).collect())
        .collect();
    let du: Vec<u32> = verts.iter().map(|&x| apsp.dist(u, x)).collect();
    for a in 0..k {
        for &b in &adj[a] {
            if du[a] == du[b] {
                return EmbeddingOutcome::Failed {
                    witness: vec![verts[a], verts[b]],
                    message: "odd cycle".into(),
                };
            }
        }
    }
    for a in 0..k {
        for b in a + 1..k {
            let common = adj[a].iter().filter(|x| adj[b].contains(x)).count();
            if common >= 3 {
                return EmbeddingOutcome::Failed {
                    witness: vec![verts[a], verts[b]],
                    message: "K_{2,3} subgraph".into(),
                };
            }
        }
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by_key(|&a| (du[a], a));
    let lower = |a: usize| -> Vec<usize> { adj[a].iter().copied().filter(|&b| du[b] + 1 == du[a]).collect() };
    let mut class: std::collections::HashMap<(usize, usize), usize> = Default::default();
    let mut classes = 0;
    let mut crossings = Vec::new();
    for &a in order.iter().skip(1) {
        let low = lower(a);
        if low.len() > 2 {
            return EmbeddingOutcome::Skipped("vertex with three lower neighbors".into());
        }
        for &b in &low {
            let c = match low.iter().find(|&&o| o != b) {
                Some(&other) => {
                    let Some(&z) = adj[b].iter().find(|&&z| du[z] + 2 == du[a] && adj[other].contains(&z)) else {
                        return EmbeddingOutcome::Failed {
                            witness: vec![verts[a], verts[b], verts[other]],
                            message: "two lower neighbors without a common lower neighbor".into(),
                        };
                    };
                    let c = class[&(z, other)];
                    crossings.push((c, class[&(z, b)]));
                    c
                }
                None => {
                    classes += 1;
                    classes - 1
                }
            };
            class.insert((b, a), c);
        }
    }
    let mut color = vec![u8::MAX; classes];
    let mut cross_adj = vec![Vec::new(); classes];
    for &(c1, c2) in &crossings {
        cross_adj[c1].push(c2);
        cross_adj[c2].push(c1);
    }
    for start in 0..classes {
        if color[start] != u8::MAX {
            continue;
        }
        color[start] = 0;
        let mut stack = vec![start];
        while let Some(c) = stack.pop() {
            for &d in &cross_adj[c] {
                if color[d] == u8::MAX {
                    color[d] = 1 - color[c];
                    stack.push(d);
                } else if color[d] == color[c] {
                    return EmbeddingOutcome::Skipped("classes do not split into two directions".into());
                }
            }
        }
    }
    let mut coord = vec![(0i32, 0i32); k];
    for &a in order.iter().skip(1) {
        let p = lower(a)[0];
        let c = class[&(p, a)];
        coord[a] = if color[c] == 0 {
            (coord[p].0 + 1, coord[p].1)
        } else {
            (coord[p].0, coord[p].1 + 1)
        };
    }
    for a in 0..k {
        for b in a + 1..k {
            let manhattan = (coord[a].0 - coord[b].0).abs() + (coord[a].1 - coord[b].1).abs();
            if manhattan as u32 != apsp.dist(verts[a], verts[b]) {
                return EmbeddingOutcome::Failed {
                    witness: vec![verts[a], verts[b]],
                    message: format!(
                        "grid distance {manhattan} differs from graph distance {}",
                        apsp.dist(verts[a], verts[b])
                    ),
                };
            }
        }
    }
    EmbeddingOutcome::Embedded(verts.iter().zip(coord).map(|(&x, (cx, cy))| (x, cx, cy)).collect())
}
