//! Finite graphs, the `K`-random extension property and `(K1, K2)`-bigness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("vertex {vertex} is outside a graph with {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("loop at vertex {0}")]
    Loop(usize),
    #[error("vertex {0} lies in both sets")]
    NotDisjoint(usize),
    #[error("K must be at least 1")]
    ZeroK,
    #[error("edge probability {0} is not in [0, 1]")]
    BadProbability(f64),
    #[error("the set is not big for ({k1}, {k2})")]
    NotBig { k1: usize, k2: usize },
    #[error("the cells do not partition the set: {0}")]
    BadPartition(String),
    #[error("internal inconsistency: every cell produced a counterexample")]
    Inconsistent,
}

/// Vertex subset as a bit vector over `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexSet {
    words: Vec<u64>,
}

impl VertexSet {
    pub fn empty(n: usize) -> Self {
        VertexSet { words: vec![0; n.div_ceil(64)] }
    }

    pub fn full(n: usize) -> Self {
        let mut s = VertexSet::empty(n);
        for v in 0..n {
            s.insert(v);
        }
        s
    }

    pub fn from_vertices(n: usize, vs: impl IntoIterator<Item = usize>) -> Result<Self, GraphError> {
        let mut s = VertexSet::empty(n);
        for v in vs {
            if v >= n {
                return Err(GraphError::VertexOutOfRange { vertex: v, n });
            }
            s.insert(v);
        }
        Ok(s)
    }

    pub fn insert(&mut self, v: usize) {
        self.words[v / 64] |= 1 << (v % 64);
    }

    pub fn remove(&mut self, v: usize) {
        self.words[v / 64] &= !(1 << (v % 64));
    }

    pub fn contains(&self, v: usize) -> bool {
        self.words.get(v / 64).is_some_and(|w| (w >> (v % 64)) & 1 == 1)
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn first(&self) -> Option<usize> {
        self.words
            .iter()
            .enumerate()
            .find(|(_, &w)| w != 0)
            .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &w)| crate::chain::mask_members(w).map(move |b| i * 64 + b))
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }

    pub fn intersect_with(&mut self, other: &VertexSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
    }

    pub fn subtract(&mut self, other: &VertexSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= !b;
        }
    }

    pub fn union_with(&mut self, other: &VertexSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn is_subset(&self, other: &VertexSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }
}

/// A finite simple undirected graph on `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    adj: Vec<VertexSet>,
}

#[derive(Serialize, Deserialize)]
struct RawGraph {
    n: usize,
    edges: Vec<[usize; 2]>,
}

impl Serialize for Graph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        RawGraph { n: self.n, edges: self.edges() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Graph {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawGraph::deserialize(d)?;
        Graph::from_edges(raw.n, raw.edges.iter().map(|e| (e[0], e[1]))).map_err(serde::de::Error::custom)
    }
}

impl Graph {
    pub fn edgeless(n: usize) -> Self {
        Graph { n, adj: vec![VertexSet::empty(n); n] }
    }

    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, GraphError> {
        let mut g = Graph::edgeless(n);
        for (a, b) in edges {
            g.add_edge(a, b)?;
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, a: usize, b: usize) -> Result<(), GraphError> {
        for v in [a, b] {
            if v >= self.n {
                return Err(GraphError::VertexOutOfRange { vertex: v, n: self.n });
            }
        }
        if a == b {
            return Err(GraphError::Loop(a));
        }
        self.adj[a].insert(b);
        self.adj[b].insert(a);
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.adj[a].contains(b)
    }

    pub fn neighbors(&self, v: usize) -> &VertexSet {
        &self.adj[v]
    }

    /// Sorted edge list with `i < j`.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        (0..self.n).flat_map(|i| self.adj[i].iter().filter(move |&j| j > i).map(move |j| [i, j])).collect()
    }

    /// The cycle on `n` vertices.
    pub fn cycle(n: usize) -> Self {
        let mut g = Graph::edgeless(n);
        if n >= 3 {
            for i in 0..n {
                g.add_edge(i, (i + 1) % n).expect("valid cycle edge");
            }
        } else if n == 2 {
            g.add_edge(0, 1).expect("valid edge");
        }
        g
    }

    /// The path on `n` vertices.
    pub fn path(n: usize) -> Self {
        let mut g = Graph::edgeless(n);
        for i in 1..n {
            g.add_edge(i - 1, i).expect("valid path edge");
        }
        g
    }

    /// `i < j` adjacent iff bit `i` of `j` is set.
    pub fn bit_graph(n: usize) -> Self {
        let mut g = Graph::edgeless(n);
        for j in 0..n {
            for i in 0..j.min(usize::BITS as usize) {
                if (j >> i) & 1 == 1 {
                    g.add_edge(i, j).expect("valid edge");
                }
            }
        }
        g
    }

    pub fn vertex_set(&self, vs: impl IntoIterator<Item = usize>) -> Result<VertexSet, GraphError> {
        VertexSet::from_vertices(self.n, vs)
    }

    /// Vertices adjacent to all of `a0` and to none of `a1`, excluding `a0 ∪ a1`.
    fn separators(&self, a0: &VertexSet, a1: &VertexSet) -> VertexSet {
        let mut cand = VertexSet::full(self.n);
        for y in a0.iter() {
            cand.intersect_with(&self.adj[y]);
        }
        for y in a1.iter() {
            cand.subtract(&self.adj[y]);
        }
        cand.subtract(a0);
        cand.subtract(a1);
        cand
    }
}

/// Deterministic pseudorandom graph: each pair is an edge with probability `p`.
pub fn gen_graph(n: usize, p: f64, seed: u64) -> Result<Graph, GraphError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(GraphError::BadProbability(p));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Graph::edgeless(n);
    for j in 0..n {
        for i in 0..j {
            if rng.gen_bool(p) {
                g.add_edge(i, j)?;
            }
        }
    }
    Ok(g)
}

fn check_disjoint(a: &VertexSet, b: &VertexSet) -> Result<(), GraphError> {
    let mut both = a.clone();
    both.intersect_with(b);
    match both.first() {
        Some(v) => Err(GraphError::NotDisjoint(v)),
        None => Ok(()),
    }
}

/// The least vertex adjacent to every member of `a0` and to no member of `a1`.
/// The vertex itself is never in `a0 ∪ a1`.
pub fn separator(g: &Graph, a0: &[usize], a1: &[usize]) -> Result<Option<usize>, GraphError> {
    let s0 = g.vertex_set(a0.iter().copied())?;
    let s1 = g.vertex_set(a1.iter().copied())?;
    check_disjoint(&s0, &s1)?;
    Ok(g.separators(&s0, &s1).first())
}

/// Calls `f` on every subset of `pool` with at most `max` members, smallest
/// first and lexicographically within a size. Stops early when `f` returns true.
fn for_each_subset(pool: &[usize], max: usize, mut f: impl FnMut(&[usize]) -> bool) -> bool {
    fn rec(pool: &[usize], start: usize, size: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize]) -> bool) -> bool {
        if cur.len() == size {
            return f(cur);
        }
        let need = size - cur.len();
        for i in start..pool.len() {
            if pool.len() - i < need {
                break;
            }
            cur.push(pool[i]);
            if rec(pool, i + 1, size, cur, f) {
                return true;
            }
            cur.pop();
        }
        false
    }
    let mut cur = Vec::new();
    for size in 0..=max.min(pool.len()) {
        if rec(pool, 0, size, &mut cur, &mut f) {
            return true;
        }
    }
    false
}

/// Whether every pair of disjoint sets of size `< k` has a separator.
pub fn is_k_random(g: &Graph, k: usize) -> Result<bool, GraphError> {
    Ok(randomness_violation(g, k)?.is_none())
}

/// A pair `(A0, A1)` of disjoint sets of size `< k` with no separator, if any.
pub fn randomness_violation(g: &Graph, k: usize) -> Result<Option<(Vec<usize>, Vec<usize>)>, GraphError> {
    if k == 0 {
        return Err(GraphError::ZeroK);
    }
    let all: Vec<usize> = (0..g.n).collect();
    let mut found = None;
    for_each_subset(&all, k - 1, |a0| {
        let s0 = g.vertex_set(a0.iter().copied()).expect("in range");
        let rest: Vec<usize> = all.iter().copied().filter(|v| !s0.contains(*v)).collect();
        for_each_subset(&rest, k - 1, |a1| {
            let s1 = g.vertex_set(a1.iter().copied()).expect("in range");
            if g.separators(&s0, &s1).is_empty() {
                found = Some((a0.to_vec(), a1.to_vec()));
                true
            } else {
                false
            }
        })
    });
    Ok(found)
}

/// A witness `B` for the bigness of a vertex set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BignessCert {
    pub witness: Vec<usize>,
    pub k1: usize,
    pub k2: usize,
}

/// The first disjoint pair `(A1, A2)` outside `b` with `|A1 ∪ A2| ≤ k2` that no
/// member of `a` separates, searching smallest union first.
pub fn bigness_violation(g: &Graph, a: &VertexSet, b: &VertexSet, k2: usize) -> Option<(Vec<usize>, Vec<usize>)> {
    let pool: Vec<usize> = (0..g.n).filter(|v| !b.contains(*v)).collect();
    let mut found = None;
    for_each_subset(&pool, k2, |s| {
        // every 2-colouring of s, A1 = members whose bit is set
        for bits in 0..(1u64 << s.len()) {
            let mut s1 = VertexSet::empty(g.n);
            let mut s2 = VertexSet::empty(g.n);
            for (i, &v) in s.iter().enumerate() {
                if (bits >> i) & 1 == 1 {
                    s1.insert(v);
                } else {
                    s2.insert(v);
                }
            }
            let mut sep = g.separators(&s1, &s2);
            sep.intersect_with(a);
            if sep.is_empty() {
                found = Some((s1.to_vec(), s2.to_vec()));
                return true;
            }
        }
        false
    });
    found
}

/// Whether `b` witnesses that `a` is big for `(|b|, k2)`.
pub fn witnesses_bigness(g: &Graph, a: &VertexSet, b: &VertexSet, k2: usize) -> bool {
    bigness_violation(g, a, b, k2).is_none()
}

/// Searches for `B` with `|B| ≤ k1` witnessing that `a` is big for `(k1, k2)`.
pub fn is_big(g: &Graph, a: &[usize], k1: usize, k2: usize) -> Result<Option<BignessCert>, GraphError> {
    let aset = g.vertex_set(a.iter().copied())?;
    Ok(is_big_set(g, &aset, k1, k2))
}

pub fn is_big_set(g: &Graph, a: &VertexSet, k1: usize, k2: usize) -> Option<BignessCert> {
    let all: Vec<usize> = (0..g.n).collect();
    let mut cert = None;
    for_each_subset(&all, k1, |bs| {
        let b = g.vertex_set(bs.iter().copied()).expect("in range");
        if witnesses_bigness(g, a, &b, k2) {
            cert = Some(BignessCert { witness: bs.to_vec(), k1, k2 });
            true
        } else {
            false
        }
    });
    cert
}

/// Outcome of [`split_big`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitResult {
    /// Index of the cell that is big.
    pub cell: usize,
    /// `B*`, the union of the original witness and the earlier counterexamples.
    pub witness: Vec<usize>,
    pub k1: usize,
    pub k2: usize,
    /// Counterexamples `(B_i, members mapped to true)` for the cells before `cell`.
    pub counterexamples: Vec<(Vec<usize>, Vec<usize>)>,
}

/// Finds a cell of a partition of a big set that is big for
/// `(k1 + k2, ⌊k2 / m⌋)`, following the additivity argument: cells are tried in
/// order and each one that admits a small counterexample disjoint from the
/// ones collected so far is skipped.
pub fn split_big(g: &Graph, a: &[usize], parts: &[Vec<usize>], k1: usize, k2: usize) -> Result<SplitResult, GraphError> {
    let aset = g.vertex_set(a.iter().copied())?;
    if parts.is_empty() {
        return Err(GraphError::BadPartition("no cells".into()));
    }
    let mut covered = VertexSet::empty(g.n);
    let mut cells = Vec::with_capacity(parts.len());
    for p in parts {
        let c = g.vertex_set(p.iter().copied())?;
        let mut overlap = c.clone();
        overlap.intersect_with(&covered);
        if let Some(v) = overlap.first() {
            return Err(GraphError::BadPartition(format!("vertex {v} is in two cells")));
        }
        covered.union_with(&c);
        cells.push(c);
    }
    if covered != aset {
        return Err(GraphError::BadPartition("the cells do not cover the set exactly".into()));
    }
    let cert = is_big_set(g, &aset, k1, k2).ok_or(GraphError::NotBig { k1, k2 })?;
    let m = parts.len();
    let q = k2 / m;
    let mut used = g.vertex_set(cert.witness.iter().copied())?;
    let mut counterexamples = Vec::new();
    for (i, cell) in cells.iter().enumerate() {
        match bigness_violation(g, cell, &used, q) {
            None => {
                return Ok(SplitResult { cell: i, witness: used.to_vec(), k1: k1 + k2, k2: q, counterexamples });
            }
            Some((on, off)) => {
                for &v in on.iter().chain(&off) {
                    used.insert(v);
                }
                let mut bi: Vec<usize> = on.iter().chain(&off).copied().collect();
                bi.sort_unstable();
                counterexamples.push((bi, on));
            }
        }
    }
    Err(GraphError::Inconsistent)
}
