//! The recursive interval index.
//!
//! Each level takes the median `m` of its graph, splits the vertices into
//! the fibers of the star `St(m)` and recurses into every fiber. Per fiber
//! it keeps a maximal tree with gated branches `T'_x` containing the fiber's
//! boundary, the imprints of every fiber vertex on it, precomputed values of
//! the intervals between a vertex and its imprints, and staircase indices
//! along the heavy paths of the tree.
//!
//! A query whose endpoints sit in different fibers is split into at most
//! nine pieces `I[g_u, g_v]`, one per fiber met, where `g_u, g_v` are gates.
//! Each piece has an endpoint on the tree and is answered as a special
//! interval plus at most two staircases.

use serde::{Deserialize, Serialize};

use crate::error::{structure, Error, Result};
use crate::forest::{
    compute_imprints, induced_tree, maximal_gated_tree, total_boundary, GatedTree,
    NearestAncestorIndex, Region,
};
use crate::graph::{compute_median, fiber_partition, star, Graph, NONE};
use crate::oracle::{verify_cube_free, verify_median_graph, DEFAULT_VERIFY_LIMIT};
use crate::semigroup::Semigroup;
use crate::staircase::{PathSegmentIndex, QueryStats};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BuildOptions {
    /// Fibers of at most this many vertices are answered by brute force.
    pub leaf_size: usize,
    /// Skip the median and cube-free verification of the input.
    pub trust: bool,
    /// Largest input verified before building.
    pub verify_limit: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            leaf_size: 32,
            trust: false,
            verify_limit: DEFAULT_VERIFY_LIMIT,
        }
    }
}

impl BuildOptions {
    pub fn leaf_size(mut self, leaf_size: usize) -> Self {
        self.leaf_size = leaf_size.max(1);
        self
    }

    pub fn trusted(mut self) -> Self {
        self.trust = true;
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildStats {
    pub n: usize,
    /// Non-leaf levels.
    pub nodes: usize,
    pub leaves: usize,
    pub depth: u32,
    pub special_entries: usize,
    pub segment_entries: usize,
    pub heavy_paths: usize,
    /// Largest `|F(x)| / |level|` seen, as a fraction.
    pub max_fiber_ratio: f64,
}

impl BuildStats {
    /// Stored `(vertex, value)` entries.
    pub fn entries(&self) -> usize {
        self.special_entries + self.segment_entries
    }
}

/// Which shape an interval with one end on the tree decomposed into.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum OneEndCase {
    /// The tree endpoint is the imprint itself.
    NoStaircase,
    /// One imprint; only the staircase along the imprint's root path.
    SingleImprint,
    /// One imprint; entrance of the second staircase on the first's base.
    SingleImprintD,
    /// One imprint; entrance found from the first staircase's last column.
    SingleImprintE,
    DoubleImprints,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PartKind {
    /// Answered by brute force in a leaf.
    Leaf,
    /// A fiber piece collapsed to one vertex.
    Single,
    /// A precomputed interval between a vertex and an imprint (or the LCA
    /// of its two imprints).
    Special,
    Staircase,
    TreePath,
}

/// One part of a decomposed query: the vertex set `I[from, to]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Part {
    pub kind: PartKind,
    pub from: u32,
    pub to: u32,
    pub depth: u32,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Decomposition {
    pub parts: Vec<Part>,
    pub cases: Vec<OneEndCase>,
    /// Number of fibers met at the level where the endpoints separated.
    pub fibers: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound(serialize = "V: Serialize", deserialize = "V: serde::de::DeserializeOwned"))]
enum Level<V> {
    Leaf(Leaf),
    Node(Box<Node<V>>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Leaf {
    global: Vec<u32>,
    dist: Vec<u16>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Cross {
    na: NearestAncestorIndex,
    /// Neighbor across, aligned with `na.nodes()`.
    to: Vec<u32>,
}

impl Cross {
    fn from_pairs(mut pairs: Vec<(u32, u32)>) -> Result<Self> {
        pairs.sort_unstable();
        pairs.dedup();
        if let Some(w) = pairs.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(structure(format!("boundary node {} has two neighbors across", w[0].0)));
        }
        Ok(Self {
            na: NearestAncestorIndex::new(pairs.iter().map(|p| p.0)),
            to: pairs.iter().map(|p| p.1).collect(),
        })
    }

    /// Across-neighbor of the member node `node`.
    fn across(&self, node: u32) -> u32 {
        self.to[self.na.slot(node).expect("member of the boundary")]
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct SubFrame {
    /// Vertices with imprint `w`, by distance from `w`.
    members: Vec<u32>,
    /// Boundary of the set towards the sets of the tree neighbors of `w`;
    /// node vertices are member positions.
    tree: GatedTree,
    imp: Vec<[u32; 2]>,
    imp_dist: Vec<[u32; 2]>,
    /// Per tree neighbor `w'` of `w`: the relative boundary, crossing into
    /// the set of `w'`.
    nbrs: Vec<(u32, Cross)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound(serialize = "V: Serialize", deserialize = "V: serde::de::DeserializeOwned"))]
struct Fiber<V> {
    child: Level<V>,
    tree: GatedTree,
    /// Per tree node: index into `subframes`, or NONE when the node is the
    /// only vertex with that imprint.
    sub: Vec<u32>,
    subframes: Vec<SubFrame>,
    /// Per adjacent star vertex (sorted by star index).
    gates: Vec<(u32, Cross)>,
    /// Per non-root tree node `t'`: tree nodes in the subtree of its parent
    /// but outside its own, with a neighbor having imprint `t'`.
    entrance: Vec<Option<Cross>>,
    /// Per heavy path: forward and reverse staircase indices.
    paths: Vec<PathPair<V>>,
}

type PathPair<V> = (PathSegmentIndex<V>, PathSegmentIndex<V>);

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound(serialize = "V: Serialize", deserialize = "V: serde::de::DeserializeOwned"))]
struct Node<V> {
    global: Vec<u32>,
    median: u32,
    star: Vec<u32>,
    /// Star vertex as the set of neighbors of `m` it spans, padded with NONE.
    sigs: Vec<[u32; 2]>,
    sig_index: Vec<([u32; 2], u32)>,
    fiber: Vec<u32>,
    child_id: Vec<u32>,
    droot: Vec<u32>,
    tnode: Vec<u32>,
    imp: Vec<[u32; 2]>,
    imp_dist: Vec<[u32; 2]>,
    sub_pos: Vec<[u32; 2]>,
    special_off: Vec<u32>,
    special: Vec<V>,
    fibers: Vec<Fiber<V>>,
}

/// The interval index over a cube-free median graph.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound(
    serialize = "S: Serialize, S::Value: Serialize",
    deserialize = "S: serde::de::DeserializeOwned, S::Value: serde::de::DeserializeOwned"
))]
pub struct IntervalIndex<S: Semigroup> {
    semigroup: S,
    values: Vec<S::Value>,
    root: Level<S::Value>,
    stats: BuildStats,
}

fn sig_len(s: [u32; 2]) -> usize {
    s.iter().filter(|&&x| x != NONE).count()
}

fn sig_items(s: [u32; 2]) -> impl Iterator<Item = u32> {
    s.into_iter().filter(|&x| x != NONE)
}

fn sig_inter(a: [u32; 2], b: [u32; 2]) -> [u32; 2] {
    let mut out = [NONE; 2];
    for (k, x) in sig_items(a).filter(|x| b.contains(x)).enumerate() {
        out[k] = x;
    }
    out
}

fn sig_of(items: &[u32]) -> Option<[u32; 2]> {
    let mut v = items.to_vec();
    v.sort_unstable();
    v.dedup();
    match v[..] {
        [] => Some([NONE, NONE]),
        [a] => Some([a, NONE]),
        [a, b] => Some([a, b]),
        _ => None,
    }
}

fn fold_opt<S: Semigroup>(s: &S, acc: Option<S::Value>, v: S::Value) -> Option<S::Value> {
    Some(match acc {
        Some(a) => s.combine(a, v),
        None => v,
    })
}

struct Builder<'a, S: Semigroup> {
    s: &'a S,
    values: &'a [S::Value],
    leaf_size: usize,
    stats: BuildStats,
}

impl<S: Semigroup> IntervalIndex<S> {
    /// Builds the index over `g` with one payload value per vertex.
    pub fn build(g: &Graph, semigroup: S, values: Vec<S::Value>, opts: &BuildOptions) -> Result<Self> {
        if g.n() == 0 {
            return Err(Error::EmptyGraph);
        }
        if values.len() != g.n() {
            return Err(Error::Precondition(format!("{} values for {} vertices", values.len(), g.n())));
        }
        if !opts.trust {
            if g.n() > opts.verify_limit {
                return Err(Error::TooLarge {
                    n: g.n(),
                    limit: opts.verify_limit,
                });
            }
            for report in [verify_median_graph(g, true)?, verify_cube_free(g, true)?] {
                if !report.ok {
                    return Err(Error::Rejected(format!(
                        "{}: {} (witness {:?})",
                        report.check,
                        report.message,
                        report.witness.unwrap_or_default()
                    )));
                }
            }
        }
        let mut b = Builder {
            s: &semigroup,
            values: &values,
            leaf_size: opts.leaf_size.max(1),
            stats: BuildStats {
                n: g.n(),
                ..Default::default()
            },
        };
        let global: Vec<u32> = (0..g.n() as u32).collect();
        let root = b.level(g, global, 0)?;
        let stats = b.stats;
        Ok(Self {
            semigroup,
            values,
            root,
            stats,
        })
    }

    pub fn semigroup(&self) -> &S {
        &self.semigroup
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[S::Value] {
        &self.values
    }

    pub fn stats(&self) -> &BuildStats {
        &self.stats
    }

    fn check(&self, v: u32) -> Result<()> {
        if (v as usize) < self.n() {
            Ok(())
        } else {
            Err(Error::VertexOutOfRange {
                vertex: v as u64,
                n: self.n(),
            })
        }
    }

    /// `p(I[u, v])`.
    pub fn query(&self, u: u32, v: u32) -> Result<S::Value> {
        self.query_with_stats(u, v, &mut QueryStats::default())
    }

    pub fn query_with_stats(&self, u: u32, v: u32, stats: &mut QueryStats) -> Result<S::Value> {
        self.check(u)?;
        self.check(v)?;
        let q = Query {
            s: &self.semigroup,
            values: &self.values,
        };
        q.level(&self.root, u, v, 0, stats, None)
    }

    /// The parts a query is answered from, in global ids. Their vertex sets
    /// partition `I[u, v]`.
    pub fn decompose(&self, u: u32, v: u32) -> Result<Decomposition> {
        self.check(u)?;
        self.check(v)?;
        let q = Query {
            s: &self.semigroup,
            values: &self.values,
        };
        let mut out = Decomposition::default();
        q.level(&self.root, u, v, 0, &mut QueryStats::default(), Some(&mut out))?;
        Ok(out)
    }

    /// The median of `a`, `b`, `c`.
    pub fn median_of_three(&self, a: u32, b: u32, c: u32) -> Result<u32> {
        for x in [a, b, c] {
            self.check(x)?;
        }
        let mut level = &self.root;
        let (mut a, mut b, mut c) = (a, b, c);
        loop {
            match level {
                Level::Leaf(leaf) => return Ok(leaf.global[leaf.median(a, b, c)? as usize]),
                Level::Node(node) => {
                    let sig = |v: u32| node.sigs[node.fiber[v as usize] as usize];
                    let all: Vec<u32> = [sig(a), sig(b), sig(c)].into_iter().flat_map(sig_items).collect();
                    let majority: Vec<u32> = all
                        .iter()
                        .copied()
                        .filter(|x| all.iter().filter(|y| *y == x).count() >= 2)
                        .collect();
                    let x = sig_of(&majority)
                        .and_then(|s| node.star_of(s))
                        .ok_or_else(|| Error::NotMedian("star vertices have no median".into()))?;
                    let [ga, gb, gc] = [a, b, c].map(|v| node.gate(v, x).0);
                    let f = &node.fibers[x as usize];
                    a = node.child_id[ga as usize];
                    b = node.child_id[gb as usize];
                    c = node.child_id[gc as usize];
                    level = &f.child;
                }
            }
        }
    }

    /// `d(u, v)`.
    pub fn distance(&self, u: u32, v: u32) -> Result<u32> {
        self.check(u)?;
        self.check(v)?;
        let mut level = &self.root;
        let (mut u, mut v) = (u, v);
        let mut acc = 0;
        loop {
            match level {
                Level::Leaf(leaf) => return Ok(acc + leaf.d(u, v)),
                Level::Node(node) => {
                    let fv = node.fiber[v as usize];
                    let (g, dg) = node.gate(u, fv);
                    acc += dg;
                    u = node.child_id[g as usize];
                    v = node.child_id[v as usize];
                    level = &node.fibers[fv as usize].child;
                }
            }
        }
    }

    fn top(&self) -> Result<&Node<S::Value>> {
        match &self.root {
            Level::Node(node) => Ok(node),
            Level::Leaf(_) => Err(Error::Precondition("the index is a single leaf".into())),
        }
    }

    fn top_star(&self, node: &Node<S::Value>, x: u32) -> Result<u32> {
        node.star
            .iter()
            .position(|&s| s == x)
            .map(|i| i as u32)
            .ok_or_else(|| Error::Precondition(format!("{x} is not in the top-level star")))
    }

    /// Gate of `u` in the top-level fiber of star vertex `x`.
    pub fn gate_in_fiber(&self, u: u32, x: u32) -> Result<u32> {
        self.check(u)?;
        let node = self.top()?;
        let xi = self.top_star(node, x)?;
        Ok(node.gate(u, xi).0)
    }

    /// The top-level fibers meeting `I[u, v]`, with the gates of `u` and
    /// `v` in each. `u` and `v` must lie in different fibers.
    pub fn decompose_interval_fibers(&self, u: u32, v: u32) -> Result<Vec<FiberIntersection>> {
        self.check(u)?;
        self.check(v)?;
        let node = self.top()?;
        let (fu, fv) = (node.fiber[u as usize], node.fiber[v as usize]);
        if fu == fv {
            return Err(Error::Precondition(format!("{u} and {v} share a fiber")));
        }
        let (pieces, len) = node.star_interval(fu, fv);
        Ok(pieces[..len]
            .iter()
            .map(|&x| FiberIntersection {
                star_vertex: node.star[x as usize],
                gate_u: node.gate(u, x).0,
                gate_v: node.gate(v, x).0,
            })
            .collect())
    }

    /// Decomposes `I[u, v]` for `u` in the top-level fiber of `x` and `v`
    /// on that fiber's tree.
    pub fn decompose_one_end_on_tree(&self, x: u32, u: u32, v: u32) -> Result<OneEndDecomposition<S::Value>> {
        self.check(u)?;
        self.check(v)?;
        let node = self.top()?;
        let xi = self.top_star(node, x)?;
        if node.fiber[u as usize] != xi {
            return Err(Error::Precondition(format!("{u} is not in the fiber of {x}")));
        }
        let t = node.tnode[v as usize];
        if node.fiber[v as usize] != xi || t == NONE {
            return Err(Error::Precondition(format!("{v} is not on the tree of the fiber of {x}")));
        }
        let q = Query {
            s: &self.semigroup,
            values: &self.values,
        };
        let mut audit = Decomposition::default();
        let value = q.one_end(node, &node.fibers[xi as usize], u, t, 0, &mut QueryStats::default(), Some(&mut audit))?;
        Ok(OneEndDecomposition {
            case: audit.cases[0],
            parts: audit.parts,
            value,
        })
    }

    /// Vertices of the tree of the top-level fiber of `x`, with parents.
    pub fn fiber_tree(&self, x: u32) -> Result<Vec<(u32, u32)>> {
        let node = self.top()?;
        let f = &node.fibers[self.top_star(node, x)? as usize];
        Ok((0..f.tree.len() as u32)
            .map(|t| (f.tree.vert(t), f.tree.parent(t).map_or(NONE, |p| f.tree.vert(p))))
            .collect())
    }

    /// Read-only view of every recursion level, in global ids.
    pub fn levels(&self) -> Vec<LevelView> {
        let mut out = Vec::new();
        collect_views(&self.root, 0, &mut out);
        out
    }
}

/// `I[u, v] ∩ F(x) = I[gate_u, gate_v]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct FiberIntersection {
    pub star_vertex: u32,
    pub gate_u: u32,
    pub gate_v: u32,
}

#[derive(Clone, Debug, Serialize)]
pub struct OneEndDecomposition<V> {
    pub case: OneEndCase,
    /// The special interval first, then the staircases.
    pub parts: Vec<Part>,
    pub value: V,
}

/// Structure of one recursion level, for inspection and tests.
#[derive(Clone, Debug, Serialize)]
pub struct LevelView {
    pub depth: u32,
    pub vertices: Vec<u32>,
    pub median: Option<u32>,
    pub star: Vec<u32>,
    pub fibers: Vec<FiberView>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FiberView {
    pub star_vertex: u32,
    pub members: Vec<u32>,
    /// Tree vertices with their parent (NONE for the root).
    pub tree: Vec<(u32, u32)>,
    /// `(vertex, imprints)` for every member.
    pub imprints: Vec<(u32, Vec<u32>)>,
    /// `(y, T_X(x, y))` for every adjacent star vertex `y`.
    pub boundaries: Vec<(u32, Vec<u32>)>,
}

fn collect_views<V>(level: &Level<V>, depth: u32, out: &mut Vec<LevelView>) {
    match level {
        Level::Leaf(leaf) => out.push(LevelView {
            depth,
            vertices: leaf.global.clone(),
            median: None,
            star: Vec::new(),
            fibers: Vec::new(),
        }),
        Level::Node(node) => {
            let gl = |v: u32| node.global[v as usize];
            let mut fibers = Vec::new();
            let mut members: Vec<Vec<u32>> = vec![Vec::new(); node.star.len()];
            for v in 0..node.global.len() as u32 {
                members[node.fiber[v as usize] as usize].push(v);
            }
            for (x, f) in node.fibers.iter().enumerate() {
                let tree = (0..f.tree.len() as u32)
                    .map(|t| (gl(f.tree.vert(t)), f.tree.parent(t).map_or(NONE, |p| gl(f.tree.vert(p)))))
                    .collect();
                let imprints = members[x]
                    .iter()
                    .map(|&v| {
                        let imps = node.imp[v as usize]
                            .iter()
                            .filter(|&&w| w != NONE)
                            .map(|&w| gl(f.tree.vert(w)))
                            .collect();
                        (gl(v), imps)
                    })
                    .collect();
                let boundaries = f
                    .gates
                    .iter()
                    .map(|(y, c)| (gl(node.star[*y as usize]), c.na.nodes().iter().map(|&t| gl(f.tree.vert(t))).collect()))
                    .collect();
                fibers.push(FiberView {
                    star_vertex: gl(node.star[x]),
                    members: members[x].iter().map(|&v| gl(v)).collect(),
                    tree,
                    imprints,
                    boundaries,
                });
                collect_views(&f.child, depth + 1, out);
            }
            out.push(LevelView {
                depth,
                vertices: node.global.clone(),
                median: Some(gl(node.median)),
                star: node.star.iter().map(|&v| gl(v)).collect(),
                fibers,
            });
        }
    }
}

impl Leaf {
    fn new(g: &Graph, global: Vec<u32>) -> Result<Self> {
        let k = g.n();
        let mut dist = Vec::with_capacity(k * k);
        for s in 0..k as u32 {
            dist.extend(crate::graph::bfs_distances(g, s)?.into_iter().map(|d| d as u16));
        }
        Ok(Self { global, dist })
    }

    fn k(&self) -> usize {
        self.global.len()
    }

    fn d(&self, u: u32, v: u32) -> u32 {
        self.dist[u as usize * self.k() + v as usize] as u32
    }

    fn interval(&self, u: u32, v: u32) -> impl Iterator<Item = u32> + '_ {
        let d = self.d(u, v);
        (0..self.k() as u32).filter(move |&w| self.d(u, w) + self.d(w, v) == d)
    }

    fn median(&self, a: u32, b: u32, c: u32) -> Result<u32> {
        let half = self.d(a, b) + self.d(b, c) + self.d(c, a);
        (0..self.k() as u32)
            .find(|&x| 2 * (self.d(a, x) + self.d(b, x) + self.d(c, x)) == half)
            .ok_or_else(|| Error::NotMedian(format!("no median of ({a}, {b}, {c}) in leaf")))
    }
}

impl<V: Copy> Node<V> {
    fn star_of(&self, sig: [u32; 2]) -> Option<u32> {
        self.sig_index
            .binary_search_by_key(&sig, |e| e.0)
            .ok()
            .map(|i| self.sig_index[i].1)
    }

    /// Star indices in `I[x, y]`: signatures between the intersection and
    /// the union of the two.
    fn star_interval(&self, x: u32, y: u32) -> ([u32; 9], usize) {
        let (sx, sy) = (self.sigs[x as usize], self.sigs[y as usize]);
        let mut union = [NONE; 4];
        let mut k = 0;
        for a in sig_items(sx).chain(sig_items(sy)) {
            if !union[..k].contains(&a) {
                union[k] = a;
                k += 1;
            }
        }
        let inter = sig_inter(sx, sy);
        let mut out = [NONE; 9];
        let mut len = 0;
        for mask in 0u32..1 << k {
            if mask.count_ones() > 2 {
                continue;
            }
            let mut pick = [NONE; 2];
            let mut j = 0;
            for (i, &a) in union[..k].iter().enumerate() {
                if mask >> i & 1 == 1 {
                    pick[j] = a;
                    j += 1;
                }
            }
            pick.sort_unstable();
            if !sig_items(inter).all(|a| pick.contains(&a)) {
                continue;
            }
            if let Some(c) = self.star_of(pick) {
                out[len] = c;
                len += 1;
            }
        }
        (out, len)
    }

    fn imprints(&self, v: u32) -> impl Iterator<Item = (usize, u32, u32)> + '_ {
        let (i, d) = (self.imp[v as usize], self.imp_dist[v as usize]);
        (0..2).filter(move |&k| i[k] != NONE).map(move |k| (k, i[k], d[k]))
    }

    fn slot_of(&self, v: u32, w: u32) -> usize {
        let i = self.imp[v as usize];
        if i[0] == w {
            0
        } else {
            debug_assert_eq!(i[1], w, "vertex {v} has no imprint {w}");
            1
        }
    }

    fn special_value(&self, v: u32, slot: usize) -> V {
        self.special[self.special_off[v as usize] as usize + slot]
    }

    /// Gate of `v` in the fiber of star vertex `x` that `v`'s fiber is
    /// adjacent to, with its distance.
    fn cross_gate(&self, v: u32, x: u32) -> (u32, u32) {
        let f = &self.fibers[self.fiber[v as usize] as usize];
        let cross = &f.gates[f.gates.binary_search_by_key(&x, |g| g.0).expect("adjacent fibers")].1;
        let (node, d) = self
            .imprints(v)
            .filter_map(|(_, w, d)| cross.na.query(&f.tree, w).map(|a| (a, d + f.tree.dist(w, a))))
            .min_by_key(|&(a, d)| (d, a))
            .expect("boundary contains an ancestor of every imprint");
        (cross.across(node), d + 1)
    }

    /// Gate of `v` in the fiber of star index `x`, with its distance.
    fn gate(&self, v: u32, x: u32) -> (u32, u32) {
        let r = self.fiber[v as usize];
        if r == x {
            return (v, 0);
        }
        let (sr, sx) = (self.sigs[r as usize], self.sigs[x as usize]);
        let inter = sig_inter(sr, sx);
        let delta = (sig_len(sr) + sig_len(sx) - 2 * sig_len(inter)) as u32;
        if inter[0] == NONE {
            return (self.star[x as usize], self.droot[v as usize] + delta);
        }
        match delta {
            1 => self.cross_gate(v, x),
            2 => {
                let y = self.star_of([inter[0], NONE]).expect("shared neighbor of the median");
                let (w2, d1) = self.cross_gate(v, y);
                let (g, d2) = self.cross_gate(w2, x);
                (g, d1 + d2)
            }
            _ => unreachable!("star signatures differ by at most two when they meet"),
        }
    }

    fn member(&self, f: &Fiber<V>, w: u32, p: u32) -> u32 {
        match f.sub[w as usize] {
            NONE => f.tree.vert(w),
            i => f.subframes[i as usize].members[p as usize],
        }
    }

    fn col_len(&self, f: &Fiber<V>, w: u32) -> u32 {
        match f.sub[w as usize] {
            NONE => 1,
            i => f.subframes[i as usize].members.len() as u32,
        }
    }

    /// Position of `v` in the column of its imprint `w`.
    fn col_pos(&self, v: u32, w: u32) -> u32 {
        self.sub_pos[v as usize][self.slot_of(v, w)]
    }

    /// `succ_{w,w'}(z)`: the gate of `z` (imprint `w`) among the vertices
    /// with imprint `w'`, for tree neighbors `w, w'`.
    fn succ(&self, f: &Fiber<V>, z: u32, w: u32, w2: u32) -> u32 {
        if self.tnode[z as usize] == w {
            return f.tree.vert(w2);
        }
        let sf = &f.subframes[f.sub[w as usize] as usize];
        let p = self.col_pos(z, w) as usize;
        let cross = &sf.nbrs[sf.nbrs.binary_search_by_key(&w2, |e| e.0).expect("tree neighbor")].1;
        let (i, d) = (sf.imp[p], sf.imp_dist[p]);
        let node = (0..2)
            .filter(|&k| i[k] != NONE)
            .filter_map(|k| cross.na.query(&sf.tree, i[k]).map(|a| (d[k] + sf.tree.dist(i[k], a), a)))
            .min()
            .expect("relative boundary contains the root")
            .1;
        cross.across(node)
    }
}

struct Query<'a, S: Semigroup> {
    s: &'a S,
    values: &'a [S::Value],
}

impl<S: Semigroup> Query<'_, S> {
    fn level(
        &self,
        level: &Level<S::Value>,
        u: u32,
        v: u32,
        depth: u32,
        stats: &mut QueryStats,
        mut audit: Option<&mut Decomposition>,
    ) -> Result<S::Value> {
        stats.max_depth = stats.max_depth.max(depth);
        match level {
            Level::Leaf(leaf) => {
                if let Some(a) = audit {
                    a.parts.push(Part {
                        kind: PartKind::Leaf,
                        from: leaf.global[u as usize],
                        to: leaf.global[v as usize],
                        depth,
                    });
                }
                Ok(self
                    .s
                    .fold(leaf.interval(u, v).map(|w| self.values[leaf.global[w as usize] as usize]))
                    .expect("interval is non-empty"))
            }
            Level::Node(node) => {
                let (fu, fv) = (node.fiber[u as usize], node.fiber[v as usize]);
                if fu == fv {
                    let f = &node.fibers[fu as usize];
                    return self.level(
                        &f.child,
                        node.child_id[u as usize],
                        node.child_id[v as usize],
                        depth + 1,
                        stats,
                        audit,
                    );
                }
                let (pieces, len) = node.star_interval(fu, fv);
                stats.max_fibers = stats.max_fibers.max(len as u32);
                if let Some(a) = audit.as_deref_mut() {
                    a.fibers = len;
                }
                let mut acc = None;
                for &x in &pieces[..len] {
                    let (gu, _) = node.gate(u, x);
                    let (gv, _) = node.gate(v, x);
                    let val = if gu == gv {
                        if let Some(a) = audit.as_deref_mut() {
                            let g = node.global[gu as usize];
                            a.parts.push(Part {
                                kind: PartKind::Single,
                                from: g,
                                to: g,
                                depth,
                            });
                        }
                        self.values[node.global[gu as usize] as usize]
                    } else {
                        let f = &node.fibers[x as usize];
                        let (a, b) = if node.tnode[gv as usize] != NONE { (gu, gv) } else { (gv, gu) };
                        let t = node.tnode[b as usize];
                        if t == NONE {
                            return Err(structure("fiber piece with no endpoint on the tree"));
                        }
                        self.one_end(node, f, a, t, depth, stats, audit.as_deref_mut())?
                    };
                    acc = fold_opt(self.s, acc, val);
                }
                Ok(acc.expect("at least two fibers"))
            }
        }
    }

    /// `p(I[u, v])` for `u` in fiber `f` and `v` a node of its tree.
    #[allow(clippy::too_many_arguments)]
    fn one_end(
        &self,
        node: &Node<S::Value>,
        f: &Fiber<S::Value>,
        u: u32,
        v: u32,
        depth: u32,
        stats: &mut QueryStats,
        mut audit: Option<&mut Decomposition>,
    ) -> Result<S::Value> {
        let tree = &f.tree;
        let gl = |x: u32| node.global[x as usize];
        let push = |audit: &mut Option<&mut Decomposition>, kind, from: u32, to: u32| {
            if let Some(a) = audit.as_deref_mut() {
                a.parts.push(Part {
                    kind,
                    from: gl(from),
                    to: gl(to),
                    depth,
                });
            }
        };
        let best = node
            .imprints(u)
            .map(|(_, w, d)| d + tree.dist(w, v))
            .min()
            .expect("imprint");
        let mut qual = [(0usize, NONE); 2];
        let mut nq = 0;
        for (k, w, d) in node.imprints(u) {
            if d + tree.dist(w, v) == best {
                qual[nq] = (k, w);
                nq += 1;
            }
        }
        let qual = &qual[..nq];
        let mut acc;
        let case;
        if let [(k, w)] = *qual {
            let t = tree.lca(w, v);
            acc = node.special_value(u, k);
            push(&mut audit, PartKind::Special, u, tree.vert(w));
            let mut zt = u;
            if w != t {
                let pw = tree.parent(w).expect("w below t");
                let top = node.succ(f, u, w, pw);
                let (z, val) = self.stair(node, f, top, pw, t, stats);
                push(&mut audit, PartKind::Staircase, top, tree.vert(t));
                acc = self.s.combine(acc, val);
                zt = z;
            }
            if v == t {
                case = if w == t { OneEndCase::NoStaircase } else { OneEndCase::SingleImprint };
            } else {
                let t1 = tree.child_toward(t, v);
                let top = if w == t {
                    case = OneEndCase::SingleImprintE;
                    node.succ(f, u, t, t1)
                } else {
                    let t2 = tree.child_toward(t, w);
                    let ent = f.entrance[t1 as usize].as_ref().expect("entrance for non-root node");
                    match ent.na.contains(t2).then(|| ent.na.query(tree, w)).flatten() {
                        Some(e) => {
                            case = OneEndCase::SingleImprintD;
                            ent.across(e)
                        }
                        None => {
                            case = OneEndCase::SingleImprintE;
                            node.succ(f, zt, t, t1)
                        }
                    }
                };
                let (_, val) = self.stair(node, f, top, t1, v, stats);
                push(&mut audit, PartKind::Staircase, top, tree.vert(v));
                acc = self.s.combine(acc, val);
            }
        } else {
            let [(_, w1), (_, w2)] = *qual else {
                return Err(structure("more than two imprints"));
            };
            case = OneEndCase::DoubleImprints;
            let w = tree.lca(w1, w2);
            let t = tree.lca(w, v);
            acc = node.special_value(u, 2);
            push(&mut audit, PartKind::Special, u, tree.vert(w));
            if w != t {
                let pw = tree.parent(w).expect("w below t");
                let (_, val) = self.stair(node, f, tree.vert(pw), pw, t, stats);
                push(&mut audit, PartKind::TreePath, tree.vert(pw), tree.vert(t));
                acc = self.s.combine(acc, val);
            }
            if v != t {
                let t1 = tree.child_toward(t, v);
                let ent = f.entrance[t1 as usize].as_ref().expect("entrance for non-root node");
                let e = [w1, w2]
                    .into_iter()
                    .filter_map(|x| ent.na.query(tree, x))
                    .max_by_key(|&e| tree.depth(e))
                    .expect("t is a common ancestor in the entrance set");
                let top = ent.across(e);
                let (_, val) = self.stair(node, f, top, t1, v, stats);
                push(&mut audit, PartKind::Staircase, top, tree.vert(v));
                acc = self.s.combine(acc, val);
            }
        }
        if let Some(a) = audit {
            a.cases.push(case);
        }
        Ok(acc)
    }

    /// Staircase with top `x` (imprint `w`) and base the tree path from
    /// `w` to `v`, one of which is an ancestor of the other. Returns the
    /// top of the last column and the sum.
    fn stair(
        &self,
        node: &Node<S::Value>,
        f: &Fiber<S::Value>,
        mut x: u32,
        w: u32,
        v: u32,
        stats: &mut QueryStats,
    ) -> (u32, S::Value) {
        let tree = &f.tree;
        let mut acc = None;
        if tree.is_ancestor(v, w) {
            let mut cur = w;
            loop {
                let p = tree.path_of(cur);
                let end = if tree.path_of(v) == p { v } else { tree.head(cur) };
                let path = tree.heavy_path(p);
                let len = path.len() as u32;
                let rev = &f.paths[p as usize].1;
                let mut succ = |i: u32, q: u32| {
                    let (a, b) = (path[(len - 1 - i) as usize], path[(len - 2 - i) as usize]);
                    node.col_pos(node.succ(f, node.member(f, a, q), a, b), b)
                };
                let (q, val) = rev.query(
                    self.s,
                    len - 1 - tree.path_pos(cur),
                    len - 1 - tree.path_pos(end),
                    node.col_pos(x, cur),
                    &mut succ,
                    stats,
                );
                x = node.member(f, end, q);
                acc = fold_opt(self.s, acc, val);
                if end == v {
                    break;
                }
                let up = tree.parent(end).expect("v above");
                x = node.succ(f, x, end, up);
                cur = up;
            }
        } else {
            let mut segs = Vec::new();
            let mut cur = v;
            while tree.path_of(cur) != tree.path_of(w) {
                segs.push((tree.head(cur), cur));
                cur = tree.parent(tree.head(cur)).expect("w above");
            }
            segs.push((w, cur));
            for (i, &(a, b)) in segs.iter().rev().enumerate() {
                if i > 0 {
                    x = node.succ(f, x, tree.parent(a).expect("light edge"), a);
                }
                let p = tree.path_of(a);
                let path = tree.heavy_path(p);
                let fwd = &f.paths[p as usize].0;
                let mut succ = |i: u32, q: u32| {
                    let (c, d) = (path[i as usize], path[i as usize + 1]);
                    node.col_pos(node.succ(f, node.member(f, c, q), c, d), d)
                };
                let (q, val) = fwd.query(
                    self.s,
                    tree.path_pos(a),
                    tree.path_pos(b),
                    node.col_pos(x, a),
                    &mut succ,
                    stats,
                );
                x = node.member(f, b, q);
                acc = fold_opt(self.s, acc, val);
            }
        }
        (x, acc.expect("non-empty base"))
    }
}

impl<S: Semigroup> Builder<'_, S> {
    fn level(&mut self, g: &Graph, global: Vec<u32>, depth: u32) -> Result<Level<S::Value>> {
        self.stats.depth = self.stats.depth.max(depth);
        if g.n() <= self.leaf_size {
            self.stats.leaves += 1;
            return Ok(Level::Leaf(Leaf::new(g, global)?));
        }
        self.stats.nodes += 1;
        let k = g.n();
        let m = compute_median(g)?;
        let st = star(g, m)?;
        let nbrs = g.neighbors(m);
        let mut star_list = vec![m];
        let mut sigs = vec![[NONE, NONE]];
        for (i, &y) in nbrs.iter().enumerate() {
            star_list.push(y);
            sigs.push([i as u32, NONE]);
        }
        for z in st.iter() {
            if z == m || g.has_edge(z, m) {
                continue;
            }
            let common: Vec<u32> = g
                .neighbors(z)
                .iter()
                .filter_map(|c| nbrs.binary_search(c).ok().map(|i| i as u32))
                .collect();
            let sig = sig_of(&common).ok_or_else(|| structure(format!("vertex {z} closes three squares with the median")))?;
            star_list.push(z);
            sigs.push(sig);
        }
        let mut sig_index: Vec<([u32; 2], u32)> = sigs.iter().enumerate().map(|(i, &s)| (s, i as u32)).collect();
        sig_index.sort_unstable();
        let mut star_idx = vec![NONE; k];
        for (i, &x) in star_list.iter().enumerate() {
            star_idx[x as usize] = i as u32;
        }
        let gate = fiber_partition(g, &st)?;
        let fiber: Vec<u32> = gate.iter().map(|&x| star_idx[x as usize]).collect();
        let mut members: Vec<Vec<u32>> = vec![Vec::new(); star_list.len()];
        let mut child_id = vec![0u32; k];
        for v in 0..k as u32 {
            let list = &mut members[fiber[v as usize] as usize];
            child_id[v as usize] = list.len() as u32;
            list.push(v);
        }
        let mut node = Node {
            global,
            median: m,
            star: star_list,
            sigs,
            sig_index,
            fiber,
            child_id,
            droot: vec![0; k],
            tnode: vec![NONE; k],
            imp: vec![[NONE; 2]; k],
            imp_dist: vec![[NONE; 2]; k],
            sub_pos: vec![[0; 2]; k],
            special_off: Vec::new(),
            special: Vec::new(),
            fibers: Vec::with_capacity(members.len()),
        };
        for (x, list) in members.iter().enumerate() {
            let ratio = list.len() as f64 / k as f64;
            if ratio > self.stats.max_fiber_ratio {
                self.stats.max_fiber_ratio = ratio;
            }
            let fiber = self.fiber(g, &mut node, x as u32, list, depth)?;
            node.fibers.push(fiber);
        }
        // special values, from the children
        node.special_off = Vec::with_capacity(k + 1);
        node.special_off.push(0);
        let mut special = Vec::with_capacity(k * 2);
        for v in 0..k as u32 {
            let f = &node.fibers[node.fiber[v as usize] as usize];
            let imps: Vec<u32> = node.imprints(v).map(|(_, w, _)| w).collect();
            let mut targets: Vec<u32> = imps.iter().map(|&w| f.tree.vert(w)).collect();
            if let [a, b] = imps[..] {
                targets.push(f.tree.vert(f.tree.lca(a, b)));
            }
            for t in targets {
                special.push(self.child_query(&f.child, node.child_id[v as usize], node.child_id[t as usize])?);
            }
            node.special_off.push(special.len() as u32);
        }
        self.stats.special_entries += special.len();
        node.special = special;
        for x in 0..node.fibers.len() {
            let paths = self.path_indices(&node, &node.fibers[x]);
            node.fibers[x].paths = paths;
        }
        Ok(Level::Node(Box::new(node)))
    }

    fn child_query(&self, child: &Level<S::Value>, u: u32, v: u32) -> Result<S::Value> {
        Query {
            s: self.s,
            values: self.values,
        }
        .level(child, u, v, 0, &mut QueryStats::default(), None)
    }

    fn fiber(
        &mut self,
        g: &Graph,
        node: &mut Node<S::Value>,
        x: u32,
        members: &[u32],
        depth: u32,
    ) -> Result<Fiber<S::Value>> {
        let root = node.star[x as usize];
        let child_graph = g.induced(members)?;
        let child_global = members.iter().map(|&v| node.global[v as usize]).collect();
        let child = self.level(&child_graph, child_global, depth + 1)?;
        drop(child_graph);

        let region = Region::new(g, root, members)?;
        let boundary = total_boundary(&region)?;
        let tree_pos = maximal_gated_tree(&region, &boundary)?;
        let imprints = compute_imprints(&region, &tree_pos)?;
        let mut tree = tree_pos;
        tree.map_verts(|p| region.vertex(p));
        for p in 0..region.len() as u32 {
            let v = region.vertex(p) as usize;
            node.droot[v] = region.dist(p);
            node.imp[v] = imprints.imp[p as usize];
            node.imp_dist[v] = imprints.dist[p as usize];
        }
        for t in 0..tree.len() as u32 {
            node.tnode[tree.vert(t) as usize] = t;
        }

        // vertices per imprint
        let mut by_imprint: Vec<Vec<u32>> = vec![Vec::new(); tree.len()];
        for &v in members {
            for (_, w, _) in node.imprints(v) {
                by_imprint[w as usize].push(v);
            }
        }
        let adjacent = |a: u32, b: u32| tree.parent(a) == Some(b) || tree.parent(b) == Some(a);
        let mut sub = vec![NONE; tree.len()];
        let mut subframes = Vec::new();
        for w in 0..tree.len() as u32 {
            let set = &by_imprint[w as usize];
            if set.len() == 1 {
                continue;
            }
            let r = Region::new(g, tree.vert(w), set)?;
            for p in 0..r.len() as u32 {
                let v = r.vertex(p);
                let k = node.slot_of(v, w);
                node.sub_pos[v as usize][k] = p;
            }
            // neighbors across, per tree neighbor of w
            let mut across: Vec<(u32, u32, u32)> = Vec::new();
            for p in 0..r.len() as u32 {
                let v = r.vertex(p);
                for &y in g.neighbors(v) {
                    if node.fiber[y as usize] != x {
                        continue;
                    }
                    for (_, w2, _) in node.imprints(y) {
                        if adjacent(w, w2) {
                            across.push((w2, p, y));
                        }
                    }
                }
            }
            let mut bmembers: Vec<u32> = across.iter().map(|e| e.1).collect();
            bmembers.push(0);
            bmembers.sort_unstable();
            bmembers.dedup();
            let btree = induced_tree(&r, &bmembers)?;
            let bimp = compute_imprints(&r, &btree)?;
            let mut pos_node = vec![NONE; r.len()];
            for t in 0..btree.len() as u32 {
                pos_node[btree.vert(t) as usize] = t;
            }
            across.sort_unstable();
            let mut nbrs = Vec::new();
            for chunk in across.chunk_by(|a, b| a.0 == b.0) {
                let pairs = chunk.iter().map(|&(_, p, y)| (pos_node[p as usize], y)).collect();
                nbrs.push((chunk[0].0, Cross::from_pairs(pairs)?));
            }
            sub[w as usize] = subframes.len() as u32;
            subframes.push(SubFrame {
                members: r.verts().to_vec(),
                imp: bimp.imp,
                imp_dist: bimp.dist,
                tree: btree,
                nbrs,
            });
        }

        // relative boundaries towards adjacent fibers
        let mut gate_pairs: Vec<(u32, u32, u32)> = Vec::new();
        for &v in members {
            for &y in g.neighbors(v) {
                let fy = node.fiber[y as usize];
                if fy != x {
                    let t = node.tnode[v as usize];
                    if t == NONE {
                        return Err(structure(format!("boundary vertex {v} missing from the tree")));
                    }
                    gate_pairs.push((fy, t, y));
                }
            }
        }
        gate_pairs.sort_unstable();
        let mut gates = Vec::new();
        for chunk in gate_pairs.chunk_by(|a, b| a.0 == b.0) {
            let pairs = chunk.iter().map(|&(_, t, y)| (t, y)).collect();
            gates.push((chunk[0].0, Cross::from_pairs(pairs)?));
        }

        // entrance sets A(t, t') for every tree edge
        let mut entrance: Vec<Option<Cross>> = vec![None; tree.len()];
        for t1 in 1..tree.len() as u32 {
            let t = tree.parent(t1).expect("non-root");
            let mut pairs = Vec::new();
            for &y in &by_imprint[t1 as usize] {
                for &q in g.neighbors(y) {
                    let tq = node.tnode[q as usize];
                    if tq != NONE
                        && node.fiber[q as usize] == x
                        && tree.is_ancestor(t, tq)
                        && !tree.is_ancestor(t1, tq)
                    {
                        pairs.push((tq, y));
                    }
                }
            }
            entrance[t1 as usize] = Some(Cross::from_pairs(pairs)?);
        }

        Ok(Fiber {
            child,
            tree,
            sub,
            subframes,
            gates,
            entrance,
            paths: Vec::new(),
        })
    }

    fn path_indices(
        &mut self,
        node: &Node<S::Value>,
        f: &Fiber<S::Value>,
    ) -> Vec<PathPair<S::Value>> {
        let tree = &f.tree;
        let mut out = Vec::with_capacity(tree.heavy_path_count());
        for p in 0..tree.heavy_path_count() as u32 {
            let path = tree.heavy_path(p).to_vec();
            let build = |cols: &[u32]| {
                let lens: Vec<u32> = cols.iter().map(|&w| node.col_len(f, w)).collect();
                PathSegmentIndex::build(
                    self.s,
                    &lens,
                    |i, q| {
                        let w = cols[i as usize];
                        let z = node.member(f, w, q);
                        node.special_value(z, node.slot_of(z, w))
                    },
                    |i, q| {
                        let (a, b) = (cols[i as usize], cols[i as usize + 1]);
                        node.col_pos(node.succ(f, node.member(f, a, q), a, b), b)
                    },
                )
            };
            let fwd = build(&path);
            let rev_cols: Vec<u32> = path.iter().rev().copied().collect();
            let rev = build(&rev_cols);
            self.stats.segment_entries += fwd.entries() + rev.entries();
            self.stats.heavy_paths += 1;
            out.push((fwd, rev));
        }
        out
    }
}
