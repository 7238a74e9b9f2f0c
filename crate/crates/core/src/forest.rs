//! Rooted trees inside fibers: total boundaries, maximal trees with gated
//! branches, imprints, LCA, heavy paths and nearest-ancestor lookups.

use serde::{Deserialize, Serialize};

use crate::error::{structure, Error, Result};
use crate::graph::{Graph, NONE};

/// A connected vertex subset explored from a root, in BFS order.
///
/// Positions `0..len` index `verts`; position 0 is the root. Distances are
/// measured inside the subset, which equals graph distance when the subset
/// is convex.
#[derive(Clone, Debug)]
pub struct Region<'a> {
    g: &'a Graph,
    verts: Vec<u32>,
    dist: Vec<u32>,
    /// `(vertex, position)` sorted by vertex.
    pos: Vec<(u32, u32)>,
}

impl<'a> Region<'a> {
    pub fn new(g: &'a Graph, root: u32, members: &[u32]) -> Result<Self> {
        let mut pos: Vec<(u32, u32)> = members.iter().map(|&v| (v, NONE)).collect();
        if !pos.is_sorted() {
            pos.sort_unstable();
        }
        let slot = |pos: &[(u32, u32)], v: u32| pos.binary_search_by_key(&v, |e| e.0).ok();
        let r = slot(&pos, root).ok_or_else(|| Error::Precondition(format!("root {root} is not a member")))?;
        let mut verts = Vec::with_capacity(members.len());
        let mut dist = Vec::with_capacity(members.len());
        pos[r].1 = 0;
        verts.push(root);
        dist.push(0);
        let mut head = 0;
        while head < verts.len() {
            let u = verts[head];
            for &w in g.neighbors(u) {
                if let Some(i) = slot(&pos, w) {
                    if pos[i].1 == NONE {
                        pos[i].1 = verts.len() as u32;
                        verts.push(w);
                        dist.push(dist[head] + 1);
                    }
                }
            }
            head += 1;
        }
        if verts.len() != members.len() {
            return Err(structure(format!("region rooted at {root} is disconnected")));
        }
        Ok(Self { g, verts, dist, pos })
    }

    pub fn whole(g: &'a Graph, root: u32) -> Result<Self> {
        let all: Vec<u32> = (0..g.n() as u32).collect();
        Self::new(g, root, &all)
    }

    pub fn graph(&self) -> &'a Graph {
        self.g
    }

    pub fn len(&self) -> usize {
        self.verts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.verts.is_empty()
    }

    pub fn verts(&self) -> &[u32] {
        &self.verts
    }

    pub fn vertex(&self, p: u32) -> u32 {
        self.verts[p as usize]
    }

    pub fn dist(&self, p: u32) -> u32 {
        self.dist[p as usize]
    }

    pub fn position(&self, v: u32) -> Option<u32> {
        self.pos.binary_search_by_key(&v, |e| e.0).ok().map(|i| self.pos[i].1)
    }

    /// Member positions adjacent to position `p`.
    pub fn neighbors(&self, p: u32) -> impl Iterator<Item = u32> + '_ {
        self.g
            .neighbors(self.verts[p as usize])
            .iter()
            .filter_map(|&w| self.position(w))
    }

    fn lower(&self, p: u32) -> impl Iterator<Item = u32> + '_ {
        let d = self.dist[p as usize];
        self.neighbors(p).filter(move |&q| self.dist[q as usize] + 1 == d)
    }

    /// Whether position `p` has a graph neighbor outside the region.
    pub fn touches_outside(&self, p: u32) -> bool {
        self.g
            .neighbors(self.verts[p as usize])
            .iter()
            .any(|&w| self.position(w).is_none())
    }
}

/// A rooted tree with preorder node ids (children in ascending vertex
/// order), Euler-tour LCA and a heavy path decomposition.
///
/// `vert(node)` is whatever id the builder supplied; node 0 is the root.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GatedTree {
    vert: Vec<u32>,
    parent: Vec<u32>,
    depth: Vec<u32>,
    size: Vec<u32>,
    child_off: Vec<u32>,
    children: Vec<u32>,
    euler: Vec<u32>,
    first: Vec<u32>,
    /// Row `l` holds minima over tour windows of length `2^l`.
    sparse: Vec<u32>,
    sparse_off: Vec<u32>,
    head: Vec<u32>,
    path_of: Vec<u32>,
    path_off: Vec<u32>,
    path_nodes: Vec<u32>,
}

impl GatedTree {
    /// Builds from `verts[i]` with `parent[i]` an index into `verts`, or
    /// [`NONE`] for the single root.
    pub fn new(verts: &[u32], parent: &[u32]) -> Result<Self> {
        let k = verts.len();
        if k == 0 || parent.len() != k {
            return Err(Error::Precondition("tree needs matching, non-empty arrays".into()));
        }
        let roots: Vec<usize> = (0..k).filter(|&i| parent[i] == NONE).collect();
        let [root] = roots[..] else {
            return Err(structure(format!("tree has {} roots", roots.len())));
        };
        // children grouped by parent, in ascending vertex order
        let mut by_parent: Vec<(u32, u32, u32)> = (0..k as u32)
            .filter(|&i| parent[i as usize] != NONE)
            .map(|i| (parent[i as usize], verts[i as usize], i))
            .collect();
        by_parent.sort_unstable();
        let mut kid_off = vec![0u32; k + 1];
        for &(p, _, _) in &by_parent {
            kid_off[p as usize + 1] += 1;
        }
        for i in 0..k {
            kid_off[i + 1] += kid_off[i];
        }
        let kids = |i: u32| by_parent[kid_off[i as usize] as usize..kid_off[i as usize + 1] as usize].iter().map(|e| e.2);
        // preorder renumbering
        let mut order = Vec::with_capacity(k);
        let mut stack = vec![root as u32];
        while let Some(i) = stack.pop() {
            order.push(i);
            if order.len() > k {
                break;
            }
            stack.extend(kids(i).rev());
        }
        if order.len() != k {
            return Err(structure("parent array contains a cycle"));
        }
        let mut node_of = vec![NONE; k];
        for (node, &i) in order.iter().enumerate() {
            node_of[i as usize] = node as u32;
        }
        let vert: Vec<u32> = order.iter().map(|&i| verts[i as usize]).collect();
        let par: Vec<u32> = order
            .iter()
            .map(|&i| match parent[i as usize] {
                NONE => NONE,
                p => node_of[p as usize],
            })
            .collect();
        let mut child_off = vec![0u32; k + 1];
        let mut children = Vec::with_capacity(k.saturating_sub(1));
        for (node, &i) in order.iter().enumerate() {
            children.extend(kids(i).map(|c| node_of[c as usize]));
            child_off[node + 1] = children.len() as u32;
        }
        let mut depth = vec![0u32; k];
        for node in 1..k {
            depth[node] = depth[par[node] as usize] + 1;
        }
        let mut size = vec![1u32; k];
        for node in (1..k).rev() {
            size[par[node] as usize] += size[node];
        }
        let mut tree = GatedTree {
            vert,
            parent: par,
            depth,
            size,
            child_off,
            children,
            euler: Vec::new(),
            first: vec![0; k],
            sparse: Vec::new(),
            sparse_off: Vec::new(),
            head: vec![0; k],
            path_of: vec![0; k],
            path_off: Vec::new(),
            path_nodes: Vec::new(),
        };
        tree.build_euler();
        tree.build_heavy_paths();
        Ok(tree)
    }

    fn build_euler(&mut self) {
        let mut walk = Vec::with_capacity(2 * self.len() - 1);
        self.euler_walk(0, &mut walk);
        for (i, &node) in walk.iter().enumerate().rev() {
            self.first[node as usize] = i as u32;
        }
        self.euler = walk;
        // preorder ids make the LCA the smallest node id on the tour range
        let len = self.euler.len();
        let mut sparse = self.euler.clone();
        let mut off = vec![0u32];
        let mut span = 1;
        while 2 * span <= len {
            let prev = *off.last().unwrap() as usize;
            let row_len = sparse.len() - prev - span;
            off.push(sparse.len() as u32);
            for i in 0..row_len {
                let v = sparse[prev + i].min(sparse[prev + i + span]);
                sparse.push(v);
            }
            span *= 2;
        }
        self.sparse = sparse;
        self.sparse_off = off;
    }

    fn euler_walk(&self, root: u32, out: &mut Vec<u32>) {
        let mut stack: Vec<(u32, usize)> = vec![(root, 0)];
        out.push(root);
        while let Some((node, next)) = stack.pop() {
            let kids = self.children(node);
            if next < kids.len() {
                stack.push((node, next + 1));
                stack.push((kids[next], 0));
                out.push(kids[next]);
            } else if let Some(&(p, _)) = stack.last() {
                out.push(p);
            }
        }
    }

    fn build_heavy_paths(&mut self) {
        let k = self.len();
        let heavy_child = |t: &Self, node: u32| -> Option<u32> {
            t.children(node)
                .iter()
                .copied()
                .find(|&c| t.size[node as usize] <= 2 * t.size[c as usize])
        };
        self.path_off = vec![0];
        for node in 0..k as u32 {
            if node != 0 && heavy_child(self, self.parent[node as usize]) == Some(node) {
                continue;
            }
            let id = self.path_off.len() as u32 - 1;
            let mut cur = Some(node);
            while let Some(c) = cur {
                self.head[c as usize] = node;
                self.path_of[c as usize] = id;
                self.path_nodes.push(c);
                cur = heavy_child(self, c);
            }
            self.path_off.push(self.path_nodes.len() as u32);
        }
    }

    pub fn len(&self) -> usize {
        self.vert.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vert.is_empty()
    }

    #[inline]
    pub fn vert(&self, node: u32) -> u32 {
        self.vert[node as usize]
    }

    pub fn verts(&self) -> &[u32] {
        &self.vert
    }

    /// Replaces every stored vertex id by `f(id)`.
    pub fn map_verts(&mut self, f: impl Fn(u32) -> u32) {
        self.vert.iter_mut().for_each(|v| *v = f(*v));
    }

    #[inline]
    pub fn parent(&self, node: u32) -> Option<u32> {
        match self.parent[node as usize] {
            NONE => None,
            p => Some(p),
        }
    }

    #[inline]
    pub fn depth(&self, node: u32) -> u32 {
        self.depth[node as usize]
    }

    #[inline]
    pub fn subtree_size(&self, node: u32) -> u32 {
        self.size[node as usize]
    }

    pub fn children(&self, node: u32) -> &[u32] {
        &self.children[self.child_off[node as usize] as usize..self.child_off[node as usize + 1] as usize]
    }

    pub fn euler_tour(&self) -> &[u32] {
        &self.euler
    }

    #[inline]
    pub fn is_ancestor(&self, a: u32, b: u32) -> bool {
        a <= b && b < a + self.size[a as usize]
    }

    pub fn lca(&self, a: u32, b: u32) -> u32 {
        let (mut i, mut j) = (self.first[a as usize] as usize, self.first[b as usize] as usize);
        if i > j {
            std::mem::swap(&mut i, &mut j);
        }
        let level = (usize::BITS - 1 - (j - i + 1).leading_zeros()) as usize;
        let row = &self.sparse[self.sparse_off[level] as usize..];
        row[i].min(row[j + 1 - (1 << level)])
    }

    pub fn dist(&self, a: u32, b: u32) -> u32 {
        let c = self.lca(a, b);
        self.depth[a as usize] + self.depth[b as usize] - 2 * self.depth[c as usize]
    }

    /// The ancestor of `node` at depth `d` (`d <= depth(node)`).
    pub fn ancestor_at_depth(&self, mut node: u32, d: u32) -> u32 {
        debug_assert!(d <= self.depth(node));
        while self.depth[self.head[node as usize] as usize] > d {
            node = self.parent[self.head[node as usize] as usize];
        }
        let h = self.head[node as usize];
        let p = self.path_of[node as usize] as usize;
        self.path_nodes[self.path_off[p] as usize + (d - self.depth[h as usize]) as usize]
    }

    /// The child of `anc` on the way down to its proper descendant `node`.
    pub fn child_toward(&self, anc: u32, node: u32) -> u32 {
        self.ancestor_at_depth(node, self.depth(anc) + 1)
    }

    pub fn heavy_path_count(&self) -> usize {
        self.path_off.len() - 1
    }

    /// Nodes of heavy path `p`, top to bottom.
    pub fn heavy_path(&self, p: u32) -> &[u32] {
        &self.path_nodes[self.path_off[p as usize] as usize..self.path_off[p as usize + 1] as usize]
    }

    #[inline]
    pub fn path_of(&self, node: u32) -> u32 {
        self.path_of[node as usize]
    }

    #[inline]
    pub fn head(&self, node: u32) -> u32 {
        self.head[node as usize]
    }

    /// Offset of `node` within its heavy path.
    #[inline]
    pub fn path_pos(&self, node: u32) -> u32 {
        self.depth[node as usize] - self.depth[self.head[node as usize] as usize]
    }

    /// Number of light edges on the path from the root to `node`.
    pub fn light_depth(&self, mut node: u32) -> u32 {
        let mut count = 0;
        while let Some(p) = self.parent(self.head[node as usize]) {
            count += 1;
            node = p;
        }
        count
    }
}

/// Deepest ancestor lookups into a connected node subset of a tree.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct NearestAncestorIndex {
    nodes: Vec<u32>,
}

impl NearestAncestorIndex {
    pub fn new(nodes: impl IntoIterator<Item = u32>) -> Self {
        let mut nodes: Vec<u32> = nodes.into_iter().collect();
        nodes.sort_unstable();
        nodes.dedup();
        Self { nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Members in ascending node order.
    pub fn nodes(&self) -> &[u32] {
        &self.nodes
    }

    /// Slot of `node` in [`Self::nodes`].
    pub fn slot(&self, node: u32) -> Option<usize> {
        self.nodes.binary_search(&node).ok()
    }

    pub fn contains(&self, node: u32) -> bool {
        self.slot(node).is_some()
    }

    /// The deepest ancestor of `u` (inclusive) in the subset.
    pub fn query(&self, tree: &GatedTree, u: u32) -> Option<u32> {
        let i = self.nodes.partition_point(|&x| x <= u);
        let a = *self.nodes.get(i.checked_sub(1)?)?;
        let c = if tree.is_ancestor(a, u) { a } else { tree.lca(a, u) };
        self.contains(c).then_some(c)
    }
}

/// Builds the tree induced on `members` (region positions), rooted at the
/// region root, checking that it is a tree whose root paths are geodesics.
pub fn induced_tree(region: &Region, members: &[u32]) -> Result<GatedTree> {
    let mut index = vec![NONE; region.len()];
    for (i, &p) in members.iter().enumerate() {
        index[p as usize] = i as u32;
    }
    if index.first() == Some(&NONE) {
        return Err(structure("tree does not contain the region root"));
    }
    let mut parent = vec![NONE; members.len()];
    let mut edges = 0usize;
    for (i, &p) in members.iter().enumerate() {
        for q in region.neighbors(p) {
            let j = index[q as usize];
            if j != NONE {
                edges += 1;
                if region.dist(q) + 1 == region.dist(p) {
                    if parent[i] != NONE {
                        return Err(structure(format!(
                            "vertex {} has two tree neighbors closer to the root",
                            region.vertex(p)
                        )));
                    }
                    parent[i] = j;
                }
            }
        }
        if p != 0 && parent[i] == NONE {
            return Err(structure(format!(
                "tree vertex {} has no tree neighbor closer to the root",
                region.vertex(p)
            )));
        }
    }
    if edges / 2 + 1 != members.len() {
        return Err(structure("boundary does not induce a tree"));
    }
    GatedTree::new(members, &parent)
}

/// The total boundary of a region: members with a neighbor outside it.
/// Node vertices are region positions.
pub fn total_boundary(region: &Region) -> Result<GatedTree> {
    let members: Vec<u32> = (0..region.len() as u32)
        .filter(|&p| p == 0 || region.touches_outside(p))
        .collect();
    induced_tree(region, &members)
}

/// Greedily extends `tree` (nodes are region positions) to a maximal tree
/// with gated branches, scanning the remaining members by distance from the
/// root.
pub fn maximal_gated_tree(region: &Region, tree: &GatedTree) -> Result<GatedTree> {
    let k = region.len();
    let mut in_tree = vec![false; k];
    let mut parent = vec![NONE; k];
    for node in 0..tree.len() as u32 {
        let p = tree.vert(node);
        in_tree[p as usize] = true;
        if let Some(q) = tree.parent(node) {
            parent[p as usize] = tree.vert(q);
        }
    }
    for p in 1..k as u32 {
        if in_tree[p as usize] {
            continue;
        }
        if let Some(y) = extension_parent(region, &in_tree, &parent, p) {
            in_tree[p as usize] = true;
            parent[p as usize] = y;
        }
    }
    let members: Vec<u32> = (0..k as u32).filter(|&p| in_tree[p as usize]).collect();
    let mut local = vec![NONE; k];
    for (i, &p) in members.iter().enumerate() {
        local[p as usize] = i as u32;
    }
    let par: Vec<u32> = members
        .iter()
        .map(|&p| match parent[p as usize] {
            NONE => NONE,
            q => local[q as usize],
        })
        .collect();
    GatedTree::new(&members, &par)
}

/// The tree vertex `z` could hang from, if `z` can join the tree: a single
/// lower neighbor `y` in the tree such that `y` is the root or `z` and the
/// parent of `y` share no neighbor besides `y`.
pub fn extension_parent(region: &Region, in_tree: &[bool], parent: &[u32], z: u32) -> Option<u32> {
    let lower: Vec<u32> = region.lower(z).collect();
    let mut tree_lower = lower.iter().copied().filter(|&y| in_tree[y as usize]);
    let y = tree_lower.next()?;
    if tree_lower.next().is_some() {
        return None;
    }
    if y == 0 {
        return Some(y);
    }
    let py = region.vertex(parent[y as usize]);
    let g = region.graph();
    let blocked = lower
        .iter()
        .any(|&c| c != y && g.has_edge(region.vertex(c), py));
    (!blocked).then_some(y)
}

/// One or two imprints per region member, as tree nodes, with distances.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Imprints {
    pub imp: Vec<[u32; 2]>,
    pub dist: Vec<[u32; 2]>,
}

impl Imprints {
    pub fn of(&self, p: u32) -> impl Iterator<Item = (u32, u32)> + '_ {
        let (i, d) = (self.imp[p as usize], self.dist[p as usize]);
        (0..2).filter(move |&k| i[k] != NONE).map(move |k| (i[k], d[k]))
    }

    pub fn count(&self, p: u32) -> usize {
        self.imp[p as usize].iter().filter(|&&w| w != NONE).count()
    }

    /// `d(p, node)` for a tree node, through the nearer imprint.
    pub fn dist_to(&self, tree: &GatedTree, p: u32, node: u32) -> u32 {
        self.of(p).map(|(w, d)| d + tree.dist(w, node)).min().expect("at least one imprint")
    }
}

/// Imprints of every region member in `tree` (node vertices are region
/// positions and the tree is rooted at the region root).
///
/// Members are processed by distance from the root. A candidate imprint of
/// `v` is any imprint of a lower neighbor; it is kept unless some lower
/// neighbor `q` lies on a geodesic towards it without having it as an
/// imprint itself.
pub fn compute_imprints(region: &Region, tree: &GatedTree) -> Result<Imprints> {
    let k = region.len();
    let mut node_of = vec![NONE; k];
    for node in 0..tree.len() as u32 {
        node_of[tree.vert(node) as usize] = node;
    }
    let mut out = Imprints {
        imp: vec![[NONE; 2]; k],
        dist: vec![[NONE; 2]; k],
    };
    let mut lower = Vec::new();
    let mut cands = Vec::new();
    for p in 0..k as u32 {
        if node_of[p as usize] != NONE {
            out.imp[p as usize] = [node_of[p as usize], NONE];
            out.dist[p as usize] = [0, NONE];
            continue;
        }
        lower.clear();
        lower.extend(region.lower(p));
        cands.clear();
        for &q in &lower {
            cands.extend(out.of(q).map(|(w, _)| w));
        }
        cands.sort_unstable();
        cands.dedup();
        let dp = region.dist(p);
        let mut found: Vec<(u32, u32)> = Vec::with_capacity(2);
        for &w in &cands {
            let dw = dp - tree.depth(w);
            let valid = lower.iter().all(|&q| {
                out.imp[q as usize].contains(&w) || out.dist_to(tree, q, w) + 1 != dw
            });
            if valid {
                found.push((w, dw));
            }
        }
        if found.is_empty() || found.len() > 2 {
            return Err(structure(format!(
                "vertex {} has {} imprints",
                region.vertex(p),
                found.len()
            )));
        }
        for (i, &(w, d)) in found.iter().enumerate() {
            out.imp[p as usize][i] = w;
            out.dist[p as usize][i] = d;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{grid, path, tree as random_tree};
    use crate::graph::bfs_distances;
    use crate::oracle::{interval_bruteforce, verify_convex};
    use crate::VertexSet;
    use proptest::prelude::*;

    fn tree_from_graph(g: &Graph, root: u32) -> GatedTree {
        let r = Region::whole(g, root).unwrap();
        let all: Vec<u32> = (0..r.len() as u32).collect();
        let mut t = induced_tree(&r, &all).unwrap();
        t.map_verts(|p| r.vertex(p));
        t
    }

    fn node_of(t: &GatedTree, v: u32) -> u32 {
        (0..t.len() as u32).find(|&n| t.vert(n) == v).unwrap()
    }

    fn binary_tree(n: u32) -> Graph {
        let edges: Vec<_> = (1..n).map(|i| ((i - 1) / 2, i)).collect();
        Graph::from_edges(n as usize, &edges).unwrap()
    }

    #[test]
    fn single_vertex() {
        let t = GatedTree::new(&[7], &[NONE]).unwrap();
        assert_eq!(t.euler_tour(), &[0]);
        assert_eq!(t.lca(0, 0), 0);
        assert_eq!(t.heavy_path_count(), 1);
        assert_eq!(t.heavy_path(0), &[0]);
    }

    #[test]
    fn path_tree() {
        let t = tree_from_graph(&path(3), 0);
        assert_eq!(t.lca(node_of(&t, 2), node_of(&t, 1)), node_of(&t, 1));
        assert_eq!(t.heavy_path_count(), 1);
        assert_eq!(t.euler_tour().len(), 5);
    }

    #[test]
    fn lca_matches_ancestor_walk() {
        let g = random_tree(50, 3);
        let t = tree_from_graph(&g, 0);
        let ancestors = |mut a: u32| {
            let mut out = vec![a];
            while let Some(p) = t.parent(a) {
                out.push(p);
                a = p;
            }
            out
        };
        for a in 0..50 {
            let aa = ancestors(a);
            for b in 0..50 {
                let expected = *ancestors(b).iter().find(|x| aa.contains(x)).unwrap();
                assert_eq!(t.lca(a, b), expected);
                assert_eq!(t.ancestor_at_depth(b, t.depth(b) / 2), ancestors(b)[(t.depth(b) - t.depth(b) / 2) as usize]);
            }
        }
    }

    #[test]
    fn balanced_binary_heavy_paths() {
        let t = tree_from_graph(&binary_tree(15), 0);
        for node in 0..15 {
            assert!(t.light_depth(node) <= 3);
        }
        let mut covered: Vec<u32> = (0..t.heavy_path_count() as u32).flat_map(|p| t.heavy_path(p).to_vec()).collect();
        covered.sort_unstable();
        assert_eq!(covered, (0..15).collect::<Vec<_>>());
    }

    #[test]
    fn nearest_ancestor_examples() {
        let t = tree_from_graph(&random_tree(50, 5), 0);
        let whole = NearestAncestorIndex::new(0..50);
        let root = NearestAncestorIndex::new([0]);
        for u in 0..50 {
            assert_eq!(whole.query(&t, u), Some(u));
            assert_eq!(root.query(&t, u), Some(0));
        }
    }

    proptest! {
        #[test]
        fn nearest_ancestor_matches_walk(seed in 0u64..1000, pick in 0u32..50, grow in 1usize..30) {
            let t = tree_from_graph(&random_tree(50, seed), 0);
            // a connected subset grown from `pick` by adding children
            let mut set = vec![pick];
            let mut i = 0;
            while set.len() < grow && i < set.len() {
                let kids: Vec<u32> = t.children(set[i]).to_vec();
                set.extend(kids);
                i += 1;
            }
            set.truncate(grow);
            let na = NearestAncestorIndex::new(set.iter().copied());
            for u in 0..50 {
                let mut a = Some(u);
                while let Some(x) = a {
                    if set.contains(&x) {
                        break;
                    }
                    a = t.parent(x);
                }
                prop_assert_eq!(na.query(&t, u), a);
            }
        }

        #[test]
        fn heavy_light_bounds(seed in 0u64..1000, n in 1usize..200) {
            let t = tree_from_graph(&random_tree(n, seed), 0);
            let bound = (n as f64).log2().ceil() as u32;
            for node in 0..n as u32 {
                prop_assert!(t.light_depth(node) <= bound);
            }
        }
    }

    fn fiber_region<'a>(g: &'a Graph, root: u32, members: &[u32]) -> Region<'a> {
        Region::new(g, root, members).unwrap()
    }

    fn positions(r: &Region, t: &GatedTree) -> Vec<u32> {
        let mut v: Vec<u32> = t.verts().iter().map(|&p| r.vertex(p)).collect();
        v.sort_unstable();
        v
    }

    #[test]
    fn boundary_of_singleton_fiber() {
        let g = grid(3, 3);
        let r = fiber_region(&g, 4, &[4]);
        assert_eq!(positions(&r, &total_boundary(&r).unwrap()), vec![4]);
        let p = path(4);
        let r = fiber_region(&p, 0, &[0]);
        assert_eq!(positions(&r, &total_boundary(&r).unwrap()), vec![0]);
    }

    #[test]
    fn boundary_is_l_shaped_in_grid_corner() {
        // 4x4 grid, star of (1,1) is the 3x3 block; the fiber of (2,2) is the
        // 2x2 corner block, whose boundary is the two lines meeting at (2,2)
        let g = grid(4, 4);
        let id = |x: u32, y: u32| y * 4 + x;
        let fiber = [id(2, 2), id(3, 2), id(2, 3), id(3, 3)];
        let r = fiber_region(&g, id(2, 2), &fiber);
        let t = total_boundary(&r).unwrap();
        assert_eq!(positions(&r, &t), vec![id(2, 2), id(3, 2), id(2, 3)]);
        let m = maximal_gated_tree(&r, &t).unwrap();
        assert_eq!(m.len(), 3);
    }

    #[test]
    fn maximal_tree_absorbs_straight_extension() {
        // fiber = 2x3 block hanging below its top edge; boundary = top row
        let g = grid(2, 4);
        let members: Vec<u32> = (2..8).collect();
        let r = fiber_region(&g, 2, &members);
        let t = total_boundary(&r).unwrap();
        assert_eq!(positions(&r, &t), vec![2, 3]);
        let m = maximal_gated_tree(&r, &t).unwrap();
        let got = positions(&r, &m);
        // the straight continuations below the root join; (1,y) cannot follow
        assert!(got.contains(&4) && got.contains(&6));
        assert_maximal(&r, &m);
    }

    fn assert_maximal(r: &Region, t: &GatedTree) {
        let mut in_tree = vec![false; r.len()];
        let mut parent = vec![NONE; r.len()];
        for node in 0..t.len() as u32 {
            in_tree[t.vert(node) as usize] = true;
            if let Some(p) = t.parent(node) {
                parent[t.vert(node) as usize] = t.vert(p);
            }
        }
        for z in 0..r.len() as u32 {
            if !in_tree[z as usize] {
                assert!(extension_parent(r, &in_tree, &parent, z).is_none());
            }
        }
    }

    fn brute_imprints(g: &Graph, tree_verts: &[u32], u: u32) -> Vec<u32> {
        tree_verts
            .iter()
            .copied()
            .filter(|&w| {
                let iv = interval_bruteforce(g, u, w).unwrap();
                tree_verts.iter().all(|&x| x == w || !iv.contains(x))
            })
            .collect()
    }

    fn imprint_verts(r: &Region, t: &GatedTree, imp: &Imprints, v: u32) -> Vec<u32> {
        let mut out: Vec<u32> = imp.of(r.position(v).unwrap()).map(|(w, _)| r.vertex(t.vert(w))).collect();
        out.sort_unstable();
        out
    }

    #[test]
    fn imprint_examples() {
        let g = grid(3, 3);
        let id = |x: u32, y: u32| y * 3 + x;
        let r = Region::whole(&g, id(0, 0)).unwrap();
        let row: Vec<u32> = [id(0, 0), id(1, 0), id(2, 0)].map(|v| r.position(v).unwrap()).to_vec();
        let t = induced_tree(&r, &row).unwrap();
        let imp = compute_imprints(&r, &t).unwrap();
        assert_eq!(imprint_verts(&r, &t, &imp, id(1, 2)), vec![id(1, 0)]);
        assert_eq!(imp.dist_to(&t, r.position(id(1, 2)).unwrap(), imp.imp[r.position(id(1, 2)).unwrap() as usize][0]), 2);
        assert_eq!(imprint_verts(&r, &t, &imp, id(1, 0)), vec![id(1, 0)]);

        let l: Vec<u32> = [id(0, 0), id(1, 0), id(2, 0), id(0, 1), id(0, 2)]
            .map(|v| r.position(v).unwrap())
            .to_vec();
        let t = induced_tree(&r, &l).unwrap();
        let imp = compute_imprints(&r, &t).unwrap();
        assert_eq!(imprint_verts(&r, &t, &imp, id(2, 2)), vec![id(2, 0), id(0, 2)]);
    }

    #[test]
    fn imprints_match_bruteforce_on_generated_fibers() {
        use crate::generator::{generate, Family, GenSpec};
        for seed in 0..6 {
            for f in [Family::RandomExpansion, Family::StaircaseSubgrid, Family::Glued] {
                let size: Vec<usize> = if f.arity() == 1 { vec![80] } else { vec![7, 6] };
                let g = generate(&GenSpec::new(f, &size, seed)).unwrap();
                let root = crate::graph::compute_median(&g).unwrap();
                let r = Region::whole(&g, root).unwrap();
                // an arbitrary tree with gated branches: a BFS-grown maximal one from the root
                let seed_tree = GatedTree::new(&[0], &[NONE]).unwrap();
                let t = maximal_gated_tree(&r, &seed_tree).unwrap();
                let tv: Vec<u32> = t.verts().iter().map(|&p| r.vertex(p)).collect();
                // root paths are convex
                for node in 0..t.len() as u32 {
                    let mut path = vec![r.vertex(t.vert(node))];
                    let mut a = node;
                    while let Some(p) = t.parent(a) {
                        path.push(r.vertex(t.vert(p)));
                        a = p;
                    }
                    assert!(verify_convex(&g, &VertexSet::new(g.n(), path)).unwrap().ok);
                }
                let imp = compute_imprints(&r, &t).unwrap();
                let d_root = bfs_distances(&g, root).unwrap();
                for u in 0..g.n() as u32 {
                    let mut want = brute_imprints(&g, &tv, u);
                    want.sort_unstable();
                    assert_eq!(imprint_verts(&r, &t, &imp, u), want, "seed {seed} {f} u {u}");
                    let du = bfs_distances(&g, u).unwrap();
                    let p = r.position(u).unwrap();
                    for (w, d) in imp.of(p) {
                        assert_eq!(d, du[r.vertex(t.vert(w)) as usize]);
                        assert_eq!(d + t.depth(w), d_root[u as usize]);
                    }
                    for node in 0..t.len() as u32 {
                        assert_eq!(imp.dist_to(&t, p, node), du[r.vertex(t.vert(node)) as usize]);
                    }
                }
                assert_maximal(&r, &t);
            }
        }
    }
}
