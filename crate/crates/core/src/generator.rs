//! Instance families: paths, trees, grids, staircase-shaped grid regions,
//! grids with pendant trees, and random peripheral expansions.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::oracle::{verify_cube_free, verify_median_graph};

/// Random instances up to this size are checked by the brute-force
/// verifiers before being returned. Larger ones rely on the construction.
pub const VERIFY_LIMIT: usize = 512;

const MAX_ATTEMPTS: u32 = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    Path,
    Tree,
    Grid,
    StaircaseSubgrid,
    Glued,
    RandomExpansion,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Self::Path,
        Self::Tree,
        Self::Grid,
        Self::StaircaseSubgrid,
        Self::Glued,
        Self::RandomExpansion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Path => "path",
            Self::Tree => "tree",
            Self::Grid => "grid",
            Self::StaircaseSubgrid => "staircase_subgrid",
            Self::Glued => "glued",
            Self::RandomExpansion => "random_expansion",
        }
    }

    /// Number of size parameters: `n` or `width x height`.
    pub fn arity(self) -> usize {
        match self {
            Self::Path | Self::Tree | Self::RandomExpansion => 1,
            Self::Grid | Self::StaircaseSubgrid | Self::Glued => 2,
        }
    }

    fn is_random(self) -> bool {
        matches!(self, Self::StaircaseSubgrid | Self::Glued | Self::RandomExpansion)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Precondition(format!("unknown family `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PayloadMode {
    /// No payload section; semigroup defaults apply.
    Default,
    Ones,
    Ids,
    Random(u64),
}

impl FromStr for PayloadMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "default" | "none" => Ok(Self::Default),
            "ones" => Ok(Self::Ones),
            "ids" => Ok(Self::Ids),
            _ => s
                .strip_prefix("random(")
                .and_then(|r| r.strip_suffix(')'))
                .and_then(|r| r.trim().parse().ok())
                .map(Self::Random)
                .ok_or_else(|| Error::Precondition(format!("unknown payload mode `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenSpec {
    pub family: Family,
    pub size: Vec<usize>,
    pub seed: u64,
    pub payload: PayloadMode,
}

impl GenSpec {
    pub fn new(family: Family, size: &[usize], seed: u64) -> Self {
        Self {
            family,
            size: size.to_vec(),
            seed,
            payload: PayloadMode::Default,
        }
    }

    pub fn with_payload(mut self, payload: PayloadMode) -> Self {
        self.payload = payload;
        self
    }
}

/// Parses `"50"` or `"4x6"`.
pub fn parse_size(s: &str) -> Result<Vec<usize>> {
    s.split(['x', 'X', ','])
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| Error::Precondition(format!("bad size `{s}`")))
        })
        .collect()
}

pub fn generate(spec: &GenSpec) -> Result<Graph> {
    let f = spec.family;
    if spec.size.len() != f.arity() || spec.size.contains(&0) {
        return Err(Error::Precondition(format!(
            "family {f} takes {} positive size parameter(s), got {:?}",
            f.arity(),
            spec.size
        )));
    }
    let s = &spec.size;
    let mut failure = String::new();
    let mut graph = None;
    for attempt in 0..MAX_ATTEMPTS {
        let seed = spec.seed.wrapping_add((attempt as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let g = match f {
            Family::Path => path(s[0]),
            Family::Tree => tree(s[0], seed),
            Family::Grid => grid(s[0], s[1]),
            Family::StaircaseSubgrid => staircase_subgrid(s[0], s[1], seed),
            Family::Glued => glued(s[0], s[1], seed),
            Family::RandomExpansion => random_expansion(s[0], seed),
        };
        if f.is_random() && g.n() <= VERIFY_LIMIT {
            let m = verify_median_graph(&g, false)?;
            let c = verify_cube_free(&g, false)?;
            if let Some(bad) = [m, c].into_iter().find(|r| !r.ok) {
                failure = format!("{}: {} (witness {:?})", bad.check, bad.message, bad.witness);
                continue;
            }
        }
        graph = Some(g);
        break;
    }
    let g = graph.ok_or(Error::GenerationFailed {
        attempts: MAX_ATTEMPTS,
        message: failure,
    })?;
    let payloads = match spec.payload {
        PayloadMode::Default => return Ok(g),
        PayloadMode::Ones => vec![1; g.n()],
        PayloadMode::Ids => (0..g.n() as u64).collect(),
        PayloadMode::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..g.n()).map(|_| rng.gen_range(0..1u64 << 32)).collect()
        }
    };
    g.with_payloads(payloads)
}

fn from_edges(n: usize, edges: &[(u32, u32)]) -> Graph {
    Graph::from_edges(n, edges).expect("generator produced a valid graph")
}

pub fn path(n: usize) -> Graph {
    let edges: Vec<_> = (1..n as u32).map(|i| (i - 1, i)).collect();
    from_edges(n, &edges)
}

pub fn cycle(n: usize) -> Graph {
    let edges: Vec<_> = (0..n as u32).map(|i| (i, (i + 1) % n as u32)).collect();
    from_edges(n, &edges)
}

/// The 3-cube `Q3`, vertices numbered by their bit patterns.
pub fn cube() -> Graph {
    let edges: Vec<_> = (0..8u32)
        .flat_map(|v| (0..3).map(move |b| (v, v ^ (1 << b))))
        .filter(|&(u, v)| u < v)
        .collect();
    from_edges(8, &edges)
}

/// Random recursive tree: vertex `i` hangs below a uniform earlier vertex.
pub fn tree(n: usize, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges: Vec<_> = (1..n as u32).map(|i| (rng.gen_range(0..i), i)).collect();
    from_edges(n, &edges)
}

/// `cols x rows` grid; vertex `(x, y)` has id `y * cols + x`.
pub fn grid(cols: usize, rows: usize) -> Graph {
    let id = |x: usize, y: usize| (y * cols + x) as u32;
    let mut edges = Vec::new();
    for y in 0..rows {
        for x in 0..cols {
            if x + 1 < cols {
                edges.push((id(x, y), id(x + 1, y)));
            }
            if y + 1 < rows {
                edges.push((id(x, y), id(x, y + 1)));
            }
        }
    }
    from_edges(cols * rows, &edges)
}

/// Region of a `cols x rows` grid between two monotone staircases: column
/// `i` holds rows `lo[i]..hi[i]`, with `lo` and `hi` non-decreasing and
/// consecutive columns overlapping.
pub fn staircase_subgrid(cols: usize, rows: usize, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spans = Vec::with_capacity(cols);
    let (mut lo, mut hi) = (0, rng.gen_range(1..=rows));
    for _ in 0..cols {
        spans.push((lo, hi));
        lo = rng.gen_range(lo..hi);
        hi = rng.gen_range(hi.max(lo + 1)..=rows);
    }
    let mut ids = HashMap::new();
    for (x, &(lo, hi)) in spans.iter().enumerate() {
        for y in lo..hi {
            let next = ids.len() as u32;
            ids.insert((x, y), next);
        }
    }
    let mut edges = Vec::new();
    for (&(x, y), &v) in &ids {
        for nb in [(x + 1, y), (x, y + 1)] {
            if let Some(&w) = ids.get(&nb) {
                edges.push((v, w));
            }
        }
    }
    edges.sort_unstable();
    from_edges(ids.len(), &edges)
}

/// A `cols x rows` grid with random trees hanging off its boundary
/// vertices, about `cols * rows` tree vertices in total.
pub fn glued(cols: usize, rows: usize, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = grid(cols, rows);
    let mut edges: Vec<_> = base.edges().collect();
    let boundary: Vec<u32> = (0..(cols * rows) as u32)
        .filter(|&v| {
            let (x, y) = (v as usize % cols, v as usize / cols);
            x == 0 || y == 0 || x + 1 == cols || y + 1 == rows
        })
        .collect();
    let extra = cols * rows;
    let mut n = cols * rows;
    while n < cols * rows + extra {
        let anchor = boundary[rng.gen_range(0..boundary.len())];
        let size = rng.gen_range(1..=(cols * rows + extra - n).min(8));
        let first = n as u32;
        edges.push((anchor, first));
        for i in 1..size as u32 {
            edges.push((first + rng.gen_range(0..i), first + i));
        }
        n += size;
    }
    from_edges(n, &edges)
}

/// Grows a graph from a single vertex by peripheral expansions.
///
/// Each step picks a convex path `P` (a single vertex, or an interval
/// `I[a, b]` that happens to be a path), adds a copy `P'` of it and joins
/// `P` to `P'` by a matching. The copy never contains a square, so no
/// 3-cube can appear.
pub fn random_expansion(n: usize, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adj: Vec<Vec<u32>> = vec![Vec::new()];
    let mut edges = Vec::new();
    while adj.len() < n {
        let a = rng.gen_range(0..adj.len()) as u32;
        let mut base = vec![a];
        if rng.gen_bool(0.75) {
            let steps = rng.gen_range(1..=4);
            let mut b = a;
            for _ in 0..steps {
                if adj[b as usize].is_empty() {
                    break;
                }
                b = adj[b as usize][rng.gen_range(0..adj[b as usize].len())];
            }
            if let Some(p) = interval_path(&adj, a, b, steps) {
                base = p;
            }
        }
        base.truncate(n - adj.len());
        let first = adj.len() as u32;
        for (i, &p) in base.iter().enumerate() {
            let c = first + i as u32;
            adj.push(Vec::new());
            link(&mut adj, &mut edges, p, c);
            if i > 0 {
                link(&mut adj, &mut edges, c - 1, c);
            }
        }
    }
    from_edges(adj.len(), &edges)
}

fn link(adj: &mut [Vec<u32>], edges: &mut Vec<(u32, u32)>, u: u32, v: u32) {
    adj[u as usize].push(v);
    adj[v as usize].push(u);
    edges.push((u, v));
}

/// `I[a, b]` ordered from `a` to `b`, if it is a path and `d(a, b) <= radius`.
fn interval_path(adj: &[Vec<u32>], a: u32, b: u32, radius: usize) -> Option<Vec<u32>> {
    let ball = |s: u32| {
        let mut dist = HashMap::from([(s, 0usize)]);
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            let d = dist[&v];
            if d == radius {
                continue;
            }
            for &w in &adj[v as usize] {
                dist.entry(w).or_insert_with(|| {
                    queue.push_back(w);
                    d + 1
                });
            }
        }
        dist
    };
    let (da, db) = (ball(a), ball(b));
    let d = *da.get(&b)?;
    let mut layer = vec![None; d + 1];
    for (&v, &x) in &da {
        if db.get(&v).is_some_and(|&y| x + y == d) {
            if layer[x].is_some() {
                return None;
            }
            layer[x] = Some(v);
        }
    }
    layer.into_iter().collect()
}
