//! Segment trees over convex paths answering staircase sums.
//!
//! A path index is built over columns `0..len`. Column `i` holds the
//! vertices whose gate on the path is its `i`-th vertex; they are addressed
//! by their position inside the column. `succ(i, p)` gives the position in
//! column `i + 1` of the gate of column-`i` vertex `p`, and `base(i, p)` the
//! value of the interval between `p` and the `i`-th path vertex.

use serde::{Deserialize, Serialize};

use crate::graph::NONE;
use crate::semigroup::Semigroup;

/// Instrumentation for staircase queries.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct QueryStats {
    /// Segment tree nodes visited.
    pub node_visits: u64,
    /// Path index queries issued.
    pub path_queries: u64,
    /// Fiber pieces per cross-fiber query, maximum seen.
    pub max_fibers: u32,
    /// Recursion levels descended, maximum seen.
    pub max_depth: u32,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PathSegmentIndex<V> {
    len: u32,
    q: u32,
    /// Entry offset per heap node (root is 1), or NONE when the node
    /// reaches past the last column.
    offsets: Vec<u32>,
    /// `s(z, l, r)`: position in column `r`.
    ends: Vec<u32>,
    /// `S(z, l, r)`.
    sums: Vec<V>,
}

impl<V: Copy> PathSegmentIndex<V> {
    /// Builds the index bottom-up; `col_len[i]` is the size of column `i`.
    pub fn build<S: Semigroup<Value = V>>(
        s: &S,
        col_len: &[u32],
        mut base: impl FnMut(u32, u32) -> V,
        mut succ: impl FnMut(u32, u32) -> u32,
    ) -> Self {
        let len = col_len.len() as u32;
        assert!(len > 0, "path index over an empty path");
        let q = len.next_power_of_two().trailing_zeros();
        let size = 1u32 << q;
        let mut idx = Self {
            len,
            q,
            offsets: vec![NONE; 2 * size as usize],
            ends: Vec::new(),
            sums: Vec::new(),
        };
        // successors are needed once per (column, position); cache them
        let mut succ_off = Vec::with_capacity(len as usize + 1);
        let mut succ_tab = Vec::new();
        succ_off.push(0);
        for i in 0..len {
            if i + 1 < len {
                succ_tab.extend((0..col_len[i as usize]).map(|p| succ(i, p)));
            }
            succ_off.push(succ_tab.len());
        }
        for i in 0..len {
            let node = (size + i) as usize;
            idx.offsets[node] = idx.ends.len() as u32;
            for p in 0..col_len[i as usize] {
                idx.ends.push(p);
                idx.sums.push(base(i, p));
            }
        }
        for level in 1..=q {
            let width = 1u32 << level;
            let first = size >> level;
            for k in 0..size / width {
                let (l, r) = (k * width, k * width + width - 1);
                if r >= len {
                    break;
                }
                let node = (first + k) as usize;
                let (left, right) = (2 * node, 2 * node + 1);
                let mid = l + width / 2 - 1;
                idx.offsets[node] = idx.ends.len() as u32;
                for p in 0..col_len[l as usize] {
                    let e1 = (idx.offsets[left] + p) as usize;
                    let (end1, s1) = (idx.ends[e1], idx.sums[e1]);
                    let next = succ_tab[succ_off[mid as usize] + end1 as usize];
                    let e2 = (idx.offsets[right] + next) as usize;
                    let (end2, s2) = (idx.ends[e2], idx.sums[e2]);
                    idx.ends.push(end2);
                    idx.sums.push(s.combine(s1, s2));
                }
            }
        }
        idx
    }

    pub fn len(&self) -> u32 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Height of the segment tree.
    pub fn height(&self) -> u32 {
        self.q
    }

    /// Stored `(vertex, value)` entries.
    pub fn entries(&self) -> usize {
        self.ends.len()
    }

    /// Stored `(s, S)` for the node covering `[l, r]`, if it was built.
    pub fn node(&self, l: u32, r: u32, p: u32) -> Option<(u32, V)> {
        let width = r - l + 1;
        if !width.is_power_of_two() || !l.is_multiple_of(width) || r >= self.len {
            return None;
        }
        let node = ((1u32 << self.q) / width + l / width) as usize;
        let e = (self.offsets[node] + p) as usize;
        Some((self.ends[e], self.sums[e]))
    }

    /// Staircase with top at position `x` of column `a` and base columns
    /// `a..=b`: returns the top's position in column `b` and the sum.
    pub fn query<S: Semigroup<Value = V>>(
        &self,
        s: &S,
        a: u32,
        b: u32,
        x: u32,
        succ: &mut impl FnMut(u32, u32) -> u32,
        stats: &mut QueryStats,
    ) -> (u32, V) {
        assert!(a <= b && b < self.len, "bad staircase range {a}..={b} of {}", self.len);
        stats.path_queries += 1;
        self.rec(s, 1, 0, (1 << self.q) - 1, a, b, x, succ, stats)
    }

    #[allow(clippy::too_many_arguments)]
    fn rec<S: Semigroup<Value = V>>(
        &self,
        s: &S,
        node: usize,
        l: u32,
        r: u32,
        a: u32,
        b: u32,
        x: u32,
        succ: &mut impl FnMut(u32, u32) -> u32,
        stats: &mut QueryStats,
    ) -> (u32, V) {
        stats.node_visits += 1;
        if a <= l && r <= b {
            let e = (self.offsets[node] + x) as usize;
            return (self.ends[e], self.sums[e]);
        }
        let mid = (l + r) / 2;
        if b <= mid {
            return self.rec(s, 2 * node, l, mid, a, b, x, succ, stats);
        }
        if mid < a {
            return self.rec(s, 2 * node + 1, mid + 1, r, a, b, x, succ, stats);
        }
        let (x1, s1) = self.rec(s, 2 * node, l, mid, a, b, x, succ, stats);
        let x2 = succ(mid, x1);
        let (x3, s2) = self.rec(s, 2 * node + 1, mid + 1, r, a, b, x2, succ, stats);
        (x3, s.combine(s1, s2))
    }
}
