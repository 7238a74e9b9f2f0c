//! Immutable graphs and the primitives everything else is built on: BFS,
//! the median vertex, stars, squares, gates and fibers.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{structure, Error, Result};

pub const NONE: u32 = u32::MAX;

/// Simple, undirected, connected graph with dense vertex ids `0..n`.
///
/// Adjacency is stored in CSR form with each neighbor list sorted. Every
/// vertex keeps the integer label it had in the input file, plus an optional
/// raw payload.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    offsets: Vec<u32>,
    targets: Vec<u32>,
    labels: Vec<u64>,
    payloads: Option<Vec<u64>>,
}

impl Graph {
    /// Builds a graph on `0..n` with labels equal to ids.
    pub fn from_edges(n: usize, edges: &[(u32, u32)]) -> Result<Self> {
        Self::build(n, edges, (0..n as u64).collect(), None)
    }

    fn build(
        n: usize,
        edges: &[(u32, u32)],
        labels: Vec<u64>,
        payloads: Option<Vec<u64>>,
    ) -> Result<Self> {
        let mut lists: Vec<Vec<u32>> = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u as usize >= n || v as usize >= n {
                return Err(Error::InvalidEdge(u as u64, v as u64, "endpoint out of range"));
            }
            if u == v {
                return Err(Error::InvalidEdge(u as u64, v as u64, "self-loop"));
            }
            lists[u as usize].push(v);
            lists[v as usize].push(u);
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::with_capacity(edges.len() * 2);
        offsets.push(0);
        for (u, list) in lists.iter_mut().enumerate() {
            list.sort_unstable();
            if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::InvalidEdge(
                    labels[u],
                    labels[w[0] as usize],
                    "parallel edge",
                ));
            }
            targets.extend_from_slice(list);
            offsets.push(targets.len() as u32);
        }
        let g = Graph {
            offsets,
            targets,
            labels,
            payloads,
        };
        if n > 0 {
            let dist = bfs_distances(&g, 0)?;
            if let Some(v) = dist.iter().position(|&d| d == NONE) {
                return Err(Error::Disconnected(v as u32));
            }
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    #[inline]
    pub fn neighbors(&self, v: u32) -> &[u32] {
        let v = v as usize;
        &self.targets[self.offsets[v] as usize..self.offsets[v + 1] as usize]
    }

    #[inline]
    pub fn degree(&self, v: u32) -> usize {
        self.neighbors(v).len()
    }

    #[inline]
    pub fn has_edge(&self, u: u32, v: u32) -> bool {
        let (a, b) = if self.degree(u) <= self.degree(v) {
            (u, v)
        } else {
            (v, u)
        };
        self.neighbors(a).binary_search(&b).is_ok()
    }

    /// Edges `(u, v)` with `u < v`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.n() as u32)
            .flat_map(move |u| self.neighbors(u).iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
    }

    pub fn label(&self, v: u32) -> u64 {
        self.labels[v as usize]
    }

    pub fn labels(&self) -> &[u64] {
        &self.labels
    }

    /// Dense id for an input label.
    pub fn id_of(&self, label: u64) -> Option<u32> {
        // labels are kept sorted when read from a file; fall back to a scan otherwise
        match self.labels.binary_search(&label) {
            Ok(i) => Some(i as u32),
            Err(_) => self.labels.iter().position(|&l| l == label).map(|i| i as u32),
        }
    }

    pub fn raw_payload(&self, v: u32) -> Option<u64> {
        self.payloads.as_ref().map(|p| p[v as usize])
    }

    pub fn has_payloads(&self) -> bool {
        self.payloads.is_some()
    }

    pub fn with_payloads(mut self, payloads: Vec<u64>) -> Result<Self> {
        if payloads.len() != self.n() {
            return Err(Error::Precondition(format!(
                "{} payloads for {} vertices",
                payloads.len(),
                self.n()
            )));
        }
        self.payloads = Some(payloads);
        Ok(self)
    }

    /// Induced subgraph on `verts`; vertex `i` of the result is `verts[i]`.
    /// Labels and payloads are carried over.
    pub fn induced(&self, verts: &[u32]) -> Result<Graph> {
        let mut local = HashMap::with_capacity(verts.len());
        for (i, &v) in verts.iter().enumerate() {
            local.insert(v, i as u32);
        }
        let mut edges = Vec::new();
        for (i, &v) in verts.iter().enumerate() {
            for &w in self.neighbors(v) {
                if let Some(&j) = local.get(&w) {
                    if (i as u32) < j {
                        edges.push((i as u32, j));
                    }
                }
            }
        }
        let labels = verts.iter().map(|&v| self.label(v)).collect();
        let payloads = self
            .payloads
            .as_ref()
            .map(|p| verts.iter().map(|&v| p[v as usize]).collect());
        Self::build(verts.len(), &edges, labels, payloads)
    }

    /// Parses the text format: `n m`, then `m` lines `u v`, then an optional
    /// `#payloads` section of `vertex value` lines. Labels are remapped to
    /// dense ids in ascending label order.
    pub fn parse(text: &str) -> Result<Graph> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let perr = |line: usize, message: String| Error::Parse { line, message };
        let (hl, header) = lines.next().ok_or_else(|| perr(1, "missing header".into()))?;
        let nums = parse_u64s(header, hl)?;
        if nums.len() != 2 {
            return Err(perr(hl, "header must be `n m_edges`".into()));
        }
        let (n, m) = (nums[0] as usize, nums[1] as usize);
        let mut raw_edges = Vec::with_capacity(m);
        for _ in 0..m {
            let (ln, l) = lines
                .next()
                .ok_or_else(|| perr(hl, format!("expected {m} edge lines")))?;
            let xs = parse_u64s(l, ln)?;
            if xs.len() != 2 {
                return Err(perr(ln, "edge line must be `u v`".into()));
            }
            raw_edges.push((xs[0], xs[1], ln));
        }
        let mut raw_payloads = Vec::new();
        if let Some((ln, l)) = lines.next() {
            if l != "#payloads" {
                return Err(perr(ln, format!("unexpected line `{l}`")));
            }
            for (ln, l) in lines {
                let xs = parse_u64s(l, ln)?;
                if xs.len() != 2 {
                    return Err(perr(ln, "payload line must be `vertex value`".into()));
                }
                raw_payloads.push((xs[0], xs[1], ln));
            }
        }

        let mut labels: Vec<u64> = raw_edges.iter().flat_map(|&(u, v, _)| [u, v]).collect();
        labels.sort_unstable();
        labels.dedup();
        if labels.is_empty() && n == 1 {
            labels.push(raw_payloads.first().map_or(0, |p| p.0));
        }
        if labels.len() != n {
            return Err(perr(
                hl,
                format!("header declares {n} vertices but edges mention {}", labels.len()),
            ));
        }
        let id = |label: u64, ln: usize| {
            labels
                .binary_search(&label)
                .map(|i| i as u32)
                .map_err(|_| perr(ln, format!("unknown vertex label {label}")))
        };
        let mut edges = Vec::with_capacity(m);
        for &(u, v, ln) in &raw_edges {
            edges.push((id(u, ln)?, id(v, ln)?));
        }
        let payloads = if raw_payloads.is_empty() {
            None
        } else {
            let mut p = vec![None; n];
            for &(v, val, ln) in &raw_payloads {
                let i = id(v, ln)? as usize;
                if p[i].replace(val).is_some() {
                    return Err(perr(ln, format!("duplicate payload for vertex {v}")));
                }
            }
            if let Some(i) = p.iter().position(Option::is_none) {
                return Err(perr(hl, format!("missing payload for vertex {}", labels[i])));
            }
            Some(p.into_iter().map(Option::unwrap).collect())
        };
        Self::build(n, &edges, labels, payloads)
    }

    /// Serializes to the text format; output is byte-identical for equal graphs.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.n(), self.edge_count());
        for (u, v) in self.edges() {
            let _ = writeln!(out, "{} {}", self.label(u), self.label(v));
        }
        if let Some(p) = &self.payloads {
            out.push_str("#payloads\n");
            for (v, val) in p.iter().enumerate() {
                let _ = writeln!(out, "{} {}", self.labels[v], val);
            }
        }
        out
    }
}

fn parse_u64s(line: &str, ln: usize) -> Result<Vec<u64>> {
    line.split_whitespace()
        .map(|t| {
            t.parse::<u64>().map_err(|_| Error::Parse {
                line: ln,
                message: format!("expected a non-negative integer, found `{t}`"),
            })
        })
        .collect()
}

/// A subset of the vertices of some graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VertexSet {
    members: Vec<u32>,
    mask: Vec<bool>,
}

impl VertexSet {
    pub fn new(n: usize, verts: impl IntoIterator<Item = u32>) -> Self {
        let mut mask = vec![false; n];
        let mut members = Vec::new();
        for v in verts {
            if !mask[v as usize] {
                mask[v as usize] = true;
                members.push(v);
            }
        }
        members.sort_unstable();
        Self { members, mask }
    }

    pub fn from_mask(mask: Vec<bool>) -> Self {
        let members = (0..mask.len() as u32).filter(|&v| mask[v as usize]).collect();
        Self { members, mask }
    }

    #[inline]
    pub fn contains(&self, v: u32) -> bool {
        self.mask.get(v as usize).copied().unwrap_or(false)
    }

    pub fn members(&self) -> &[u32] {
        &self.members
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.members.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

fn check_vertex(g: &Graph, v: u32) -> Result<()> {
    if (v as usize) < g.n() {
        Ok(())
    } else {
        Err(Error::VertexOutOfRange {
            vertex: v as u64,
            n: g.n(),
        })
    }
}

/// Hop distances from `source`; unreachable vertices get [`NONE`].
pub fn bfs_distances(g: &Graph, source: u32) -> Result<Vec<u32>> {
    check_vertex(g, source)?;
    let mut dist = vec![NONE; g.n()];
    let mut queue = VecDeque::new();
    dist[source as usize] = 0;
    queue.push_back(source);
    while let Some(u) = queue.pop_front() {
        let du = dist[u as usize];
        for &w in g.neighbors(u) {
            if dist[w as usize] == NONE {
                dist[w as usize] = du + 1;
                queue.push_back(w);
            }
        }
    }
    Ok(dist)
}

/// BFS order (ascending distance, ties by discovery) and distances.
pub(crate) fn bfs_order(g: &Graph, source: u32) -> (Vec<u32>, Vec<u32>) {
    let mut dist = vec![NONE; g.n()];
    let mut order = Vec::with_capacity(g.n());
    dist[source as usize] = 0;
    order.push(source);
    let mut head = 0;
    while head < order.len() {
        let u = order[head];
        head += 1;
        for &w in g.neighbors(u) {
            if dist[w as usize] == NONE {
                dist[w as usize] = dist[u as usize] + 1;
                order.push(w);
            }
        }
    }
    (order, dist)
}

/// A vertex minimizing the total distance to all vertices, ties broken by
/// smallest id.
///
/// Uses the partial-cube structure of median graphs: edges are grouped into
/// parallelism classes by propagating across squares in BFS order, the size
/// of each class's far half-space is summed from BFS-tree subtree sizes, and
/// the distance sum is then carried across every tree edge as
/// `F(v) = F(parent) + n - 2·|far side|`. Runs in `O(m)` on median graphs.
/// [`compute_median_exhaustive`] is the quadratic reference.
pub fn compute_median(g: &Graph) -> Result<u32> {
    let n = g.n();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    if n == 1 {
        return Ok(0);
    }
    let (order, dist) = bfs_order(g, 0);
    // class of the edge from v to each of its lower neighbors, parallel to g.neighbors(v)
    let mut class: Vec<u32> = vec![NONE; g.targets.len()];
    let mut classes = 0u32;
    let edge_slot = |v: u32, w: u32| -> Option<usize> {
        g.neighbors(v)
            .binary_search(&w)
            .ok()
            .map(|i| g.offsets[v as usize] as usize + i)
    };
    let mut parent = vec![NONE; n];
    for &v in order.iter().skip(1) {
        let dv = dist[v as usize];
        let lower: Vec<u32> = g
            .neighbors(v)
            .iter()
            .copied()
            .filter(|&w| dist[w as usize] + 1 == dv)
            .collect();
        parent[v as usize] = lower[0];
        for &u in &lower {
            let slot = edge_slot(v, u).expect("neighbor");
            let mut assigned = NONE;
            if let Some(&u2) = lower.iter().find(|&&x| x != u) {
                // square w-u-v-u2: class(u, v) = class(w, u2)
                let common = g
                    .neighbors(u)
                    .iter()
                    .copied()
                    .find(|&w| dist[w as usize] + 2 == dv && g.has_edge(w, u2));
                if let Some(w) = common {
                    assigned = class[edge_slot(u2, w).expect("neighbor")];
                }
            }
            if assigned == NONE {
                assigned = classes;
                classes += 1;
            }
            class[slot] = assigned;
        }
    }
    let mut subtree = vec![1u64; n];
    for &v in order.iter().skip(1).rev() {
        let p = parent[v as usize];
        subtree[p as usize] += subtree[v as usize];
    }
    let mut far = vec![0u64; classes as usize];
    for &v in order.iter().skip(1) {
        let c = class[edge_slot(v, parent[v as usize]).expect("neighbor")];
        far[c as usize] += subtree[v as usize];
    }
    let mut total = vec![0i64; n];
    total[0] = dist.iter().map(|&d| d as i64).sum();
    for &v in order.iter().skip(1) {
        let p = parent[v as usize];
        let c = class[edge_slot(v, p).expect("neighbor")];
        total[v as usize] = total[p as usize] + n as i64 - 2 * far[c as usize] as i64;
    }
    let best = (0..n).min_by_key(|&v| (total[v], v)).expect("non-empty");
    Ok(best as u32)
}

/// Median by BFS from every vertex, `O(n·m)`.
pub fn compute_median_exhaustive(g: &Graph) -> Result<u32> {
    if g.n() == 0 {
        return Err(Error::EmptyGraph);
    }
    let mut best = (u64::MAX, 0u32);
    for v in 0..g.n() as u32 {
        let s: u64 = bfs_distances(g, v)?.iter().map(|&d| d as u64).sum();
        if s < best.0 {
            best = (s, v);
        }
    }
    Ok(best.1)
}

/// A 4-cycle `x y1 z y2` with `x` farthest from the reference vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Square {
    pub x: u32,
    pub y1: u32,
    pub z: u32,
    pub y2: u32,
}

impl Square {
    pub fn vertices(&self) -> [u32; 4] {
        [self.x, self.y1, self.z, self.y2]
    }
}

/// Neighbors of `v` one step closer to the reference vertex of `dist`.
pub(crate) fn lower_neighbors<'a>(
    g: &'a Graph,
    dist: &'a [u32],
    v: u32,
) -> impl Iterator<Item = u32> + 'a {
    let dv = dist[v as usize];
    g.neighbors(v)
        .iter()
        .copied()
        .filter(move |&w| dv > 0 && dist[w as usize] == dv - 1)
}

/// All squares, each once, normalized so `x` is the far corner and
/// `y1 < y2`; sorted by the diagonal pair `(y1, y2)`.
pub fn enumerate_squares(g: &Graph, dist: &[u32]) -> Result<Vec<Square>> {
    let mut out = Vec::new();
    for x in 0..g.n() as u32 {
        let mut lower = lower_neighbors(g, dist, x);
        let (Some(a), Some(b)) = (lower.next(), lower.next()) else {
            continue;
        };
        if lower.next().is_some() {
            return Err(Error::NotCubeFree(x));
        }
        let (y1, y2) = (a.min(b), a.max(b));
        let z = lower_neighbors(g, dist, y1)
            .find(|&z| g.has_edge(z, y2))
            .ok_or_else(|| structure(format!("lower neighbors {y1}, {y2} of {x} have no common lower neighbor")))?;
        out.push(Square { x, y1, z, y2 });
    }
    out.sort_unstable_by_key(|s| (s.y1, s.y2, s.x));
    Ok(out)
}

/// Looks up the square with diagonal `{a, b}` among the sorted output of
/// [`enumerate_squares`].
pub fn square_by_diagonal(squares: &[Square], a: u32, b: u32) -> Option<Square> {
    let key = (a.min(b), a.max(b));
    squares
        .binary_search_by_key(&key, |s| (s.y1, s.y2))
        .ok()
        .map(|i| squares[i])
}

/// `St(m)`: `m` together with every vertex sharing an edge or a square with it.
pub fn star(g: &Graph, m: u32) -> Result<VertexSet> {
    check_vertex(g, m)?;
    let mut verts = vec![m];
    for &y in g.neighbors(m) {
        verts.push(y);
        for &x in g.neighbors(y) {
            if x != m && !g.has_edge(x, m) {
                // x at distance 2; it closes a square with m iff it has a second common neighbor with m
                let common = g.neighbors(x).iter().filter(|&&c| g.has_edge(c, m)).count();
                if common >= 2 {
                    verts.push(x);
                }
            }
        }
    }
    Ok(VertexSet::new(g.n(), verts))
}

/// The gate of `z` in `set`, if one exists. Brute force, for oracles.
pub fn gate_bruteforce(g: &Graph, z: u32, set: &VertexSet) -> Result<Option<u32>> {
    check_vertex(g, z)?;
    let dz = bfs_distances(g, z)?;
    let Some(x) = set.iter().min_by_key(|&x| (dz[x as usize], x)) else {
        return Ok(None);
    };
    let dx = bfs_distances(g, x)?;
    let is_gate = set
        .iter()
        .all(|w| dz[x as usize] + dx[w as usize] == dz[w as usize]);
    Ok(is_gate.then_some(x))
}

/// Maps every vertex to its gate in the gated set `set`, by multi-source BFS.
///
/// Fails with [`Error::NotGated`] when some vertex reaches two distinct
/// nearest members of `set`.
pub fn fiber_partition(g: &Graph, set: &VertexSet) -> Result<Vec<u32>> {
    let n = g.n();
    let mut gate = vec![NONE; n];
    let mut dist = vec![NONE; n];
    let mut queue = VecDeque::new();
    for x in set.iter() {
        gate[x as usize] = x;
        dist[x as usize] = 0;
        queue.push_back(x);
    }
    while let Some(u) = queue.pop_front() {
        for &w in g.neighbors(u) {
            let wi = w as usize;
            if dist[wi] == NONE {
                dist[wi] = dist[u as usize] + 1;
                gate[wi] = gate[u as usize];
                queue.push_back(w);
            } else if dist[wi] == dist[u as usize] + 1 && gate[wi] != gate[u as usize] {
                return Err(Error::NotGated(w));
            }
        }
    }
    Ok(gate)
}
