//! Interpretations of graphs in chains.
//!
//! An interpretation is a triple of formulas `U(X̄, W̄)`, `E(X̄, Ȳ, W̄)`,
//! `R(X̄, Ȳ, W̄)` with a parameter tuple `W̄`. Free variables follow a fixed
//! layout: in `U`, `X̄` occupies indices `0..d` and `W̄` follows; in `E` and `R`,
//! `X̄` is `0..d`, `Ȳ` is `d..2d`, and `W̄` follows.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{Chain, ChainError, Segment, SetTuple};
use crate::formula::{self, EvalError, Evaluator, Formula, ParseError};
use crate::randomgraph::{self, Graph, GraphError};
use crate::theory::{self, TheoryError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InterpError {
    #[error("{tuples} candidate tuples exceed the cap of {cap}")]
    CapExceeded { tuples: u128, cap: u128 },
    #[error("{which} formula uses free variable X{index}, beyond its {slots} slots")]
    Layout { which: &'static str, index: usize, slots: usize },
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("E is not reflexive: {0} is not equivalent to itself")]
    NotReflexive(SetTuple),
    #[error("E is not symmetric: {0} ~ {1} but not conversely")]
    NotSymmetric(SetTuple, SetTuple),
    #[error("E is not transitive: {0} ~ {1} ~ {2} but not {0} ~ {2}")]
    NotTransitive(SetTuple, SetTuple, SetTuple),
    #[error("R does not respect ~: {0} ~ {1} but R({0}, {2}) differs from R({1}, {2})")]
    NotInvariant(SetTuple, SetTuple, SetTuple),
    #[error("R is not symmetric: R({0}, {1}) but not R({1}, {0})")]
    RelationNotSymmetric(SetTuple, SetTuple),
    #[error("R relates the class of {0} to itself")]
    Reflexive(SetTuple),
    #[error("prefix length {0} is too short; need at least 4")]
    PrefixTooShort(usize),
    #[error("{0} is not a representative")]
    NotRepresentative(SetTuple),
    #[error("the built-in formulas disagree with the direct construction: {0}")]
    GroundTruthMismatch(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error(transparent)]
    Chain(#[from] ChainError),
}

/// `(U, E, R)` with parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interpretation {
    pub universe: Formula,
    pub equality: Formula,
    pub relation: Formula,
    #[serde(default)]
    pub params: SetTuple,
    pub dim: usize,
}

impl Interpretation {
    pub fn new(universe: Formula, equality: Formula, relation: Formula, params: SetTuple, dim: usize) -> Result<Self, InterpError> {
        let i = Interpretation { universe, equality, relation, params, dim };
        i.validate_layout()?;
        Ok(i)
    }

    /// Parses the three formulas from text.
    pub fn parse(u: &str, e: &str, r: &str, params: SetTuple, dim: usize) -> Result<Self, InterpError> {
        Interpretation::new(formula::parse(u)?, formula::parse(e)?, formula::parse(r)?, params, dim)
    }

    pub fn validate_layout(&self) -> Result<(), InterpError> {
        if self.dim == 0 {
            return Err(InterpError::ZeroDimension);
        }
        let p = self.params.arity();
        for (which, f, slots) in [
            ("universe", &self.universe, self.dim + p),
            ("equality", &self.equality, 2 * self.dim + p),
            ("relation", &self.relation, 2 * self.dim + p),
        ] {
            let need = f.free_arity();
            if need > slots {
                return Err(InterpError::Layout { which, index: need - 1, slots });
            }
        }
        Ok(())
    }

    /// `max(qdepth(U), qdepth(E), qdepth(R))`.
    pub fn depth(&self) -> usize {
        self.universe.qdepth().max(self.equality.qdepth()).max(self.relation.qdepth())
    }

    /// The same interpretation read on the inverse chain.
    pub fn reversed(&self, chain: &Chain) -> Interpretation {
        Interpretation {
            universe: mirror(&self.universe),
            equality: mirror(&self.equality),
            relation: mirror(&self.relation),
            params: self.params.reverse(chain),
            dim: self.dim,
        }
    }
}

/// Swaps the arguments of every `<` atom.
fn mirror(f: &Formula) -> Formula {
    use Formula as F;
    match f {
        F::Lt(a, b) => F::Lt(*b, *a),
        F::True | F::False | F::Em(_) | F::Sing(_) | F::Sub(..) => f.clone(),
        F::Not(a) => mirror(a).not(),
        F::And(a, b) => mirror(a).and(mirror(b)),
        F::Or(a, b) => mirror(a).or(mirror(b)),
        F::Implies(a, b) => mirror(a).implies(mirror(b)),
        F::Iff(a, b) => mirror(a).iff(mirror(b)),
        F::Exists(a) => F::exists(mirror(a)),
        F::Forall(a) => F::forall(mirror(a)),
    }
}

fn check_cap(chain: &Chain, dim: usize, cap: u128) -> Result<(), InterpError> {
    let bits = chain.len() * dim;
    let tuples = if bits >= 127 { u128::MAX } else { 1u128 << bits };
    if tuples > cap {
        return Err(InterpError::CapExceeded { tuples, cap });
    }
    Ok(())
}

/// All `X̄` with `C ⊨ U(X̄, W̄)`, in lexicographic order (first component most
/// significant, each component compared as a bit mask).
pub fn representatives(chain: &Chain, interp: &Interpretation, cap: u128) -> Result<Vec<SetTuple>, InterpError> {
    interp.validate_layout()?;
    interp.params.check_over(chain)?;
    check_cap(chain, interp.dim, cap)?;
    let d = interp.dim;
    let len = chain.len();
    let u = Evaluator::new(&interp.universe, d + interp.params.arity())?;
    let mut masks = vec![0u64; d];
    masks.extend_from_slice(interp.params.masks());
    let total: u128 = 1u128 << (len * d);
    let comp = crate::chain::full_mask(len) as u128;
    let mut out = Vec::new();
    for code in 0..total {
        for (k, m) in masks.iter_mut().take(d).enumerate() {
            *m = ((code >> (len * (d - 1 - k))) & comp) as u64;
        }
        if u.eval_masks(chain, &masks) {
            out.push(SetTuple::from_masks(masks[..d].to_vec()));
        }
    }
    Ok(out)
}

/// The interpreted graph with its representatives.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Quotient {
    pub graph: Graph,
    /// All representatives, in lexicographic order.
    pub reps: Vec<SetTuple>,
    /// Class id of each representative.
    pub class_of: Vec<usize>,
    /// Index into `reps` of the least representative of each class.
    pub leaders: Vec<usize>,
}

impl Quotient {
    pub fn class_count(&self) -> usize {
        self.leaders.len()
    }

    pub fn leader(&self, class: usize) -> &SetTuple {
        &self.reps[self.leaders[class]]
    }

    pub fn class_of_tuple(&self, t: &SetTuple) -> Option<usize> {
        self.reps.binary_search(t).ok().map(|i| self.class_of[i])
    }
}

fn pair_matrix(chain: &Chain, f: &Formula, reps: &[SetTuple], params: &SetTuple, d: usize) -> Result<Vec<Vec<bool>>, InterpError> {
    let ev = Evaluator::new(f, 2 * d + params.arity())?;
    let mut buf = vec![0u64; 2 * d + params.arity()];
    buf[2 * d..].copy_from_slice(params.masks());
    let mut m = vec![vec![false; reps.len()]; reps.len()];
    for (i, x) in reps.iter().enumerate() {
        buf[..d].copy_from_slice(x.masks());
        for (j, y) in reps.iter().enumerate() {
            buf[d..2 * d].copy_from_slice(y.masks());
            m[i][j] = ev.eval_masks(chain, &buf);
        }
    }
    Ok(m)
}

/// Validates `E` and `R` on `C^U` and builds the quotient graph. Classes are
/// numbered in the order of their least representatives.
pub fn build_graph(chain: &Chain, interp: &Interpretation, cap: u128) -> Result<Quotient, InterpError> {
    let reps = representatives(chain, interp, cap)?;
    let d = interp.dim;
    let eq = pair_matrix(chain, &interp.equality, &reps, &interp.params, d)?;
    let n = reps.len();
    for i in 0..n {
        if !eq[i][i] {
            return Err(InterpError::NotReflexive(reps[i].clone()));
        }
    }
    for i in 0..n {
        for j in 0..n {
            if eq[i][j] && !eq[j][i] {
                return Err(InterpError::NotSymmetric(reps[i].clone(), reps[j].clone()));
            }
        }
    }
    let mut class_of = vec![usize::MAX; n];
    let mut leaders = Vec::new();
    for i in 0..n {
        if class_of[i] != usize::MAX {
            continue;
        }
        let c = leaders.len();
        leaders.push(i);
        for j in i..n {
            if eq[i][j] {
                class_of[j] = c;
            }
        }
    }
    // transitivity: the relation must coincide with "same class"
    for i in 0..n {
        for j in 0..n {
            if eq[i][j] != (class_of[i] == class_of[j]) {
                // i and j sit with leaders a, b; one of the links through a leader breaks
                let a = leaders[class_of[i]];
                let (x, y, z) = if eq[i][j] { (a, i, j) } else { (i, a, j) };
                return Err(InterpError::NotTransitive(reps[x].clone(), reps[y].clone(), reps[z].clone()));
            }
        }
    }
    let rel = pair_matrix(chain, &interp.relation, &reps, &interp.params, d)?;
    for i in 0..n {
        let li = leaders[class_of[i]];
        for j in 0..n {
            if rel[i][j] != rel[li][j] {
                return Err(InterpError::NotInvariant(reps[li].clone(), reps[i].clone(), reps[j].clone()));
            }
            let lj = leaders[class_of[j]];
            if rel[i][j] != rel[i][lj] {
                return Err(InterpError::NotInvariant(reps[lj].clone(), reps[j].clone(), reps[i].clone()));
            }
            if rel[i][j] && !rel[j][i] {
                return Err(InterpError::RelationNotSymmetric(reps[i].clone(), reps[j].clone()));
            }
        }
        if rel[i][i] {
            return Err(InterpError::Reflexive(reps[i].clone()));
        }
    }
    let mut graph = Graph::edgeless(leaders.len());
    for a in 0..leaders.len() {
        for b in a + 1..leaders.len() {
            if rel[leaders[a]][leaders[b]] {
                graph.add_edge(a, b)?;
            }
        }
    }
    Ok(Quotient { graph, reps, class_of, leaders })
}

fn outside_key(t: &SetTuple, d: &Segment) -> Vec<u64> {
    let m = !d.mask();
    t.masks().iter().map(|&a| a & m).collect()
}

/// Class sets of the families of representatives that coincide outside `seg`.
fn families(q: &Quotient, seg: &Segment) -> BTreeMap<Vec<u64>, BTreeSet<usize>> {
    let mut groups: BTreeMap<Vec<u64>, BTreeSet<usize>> = BTreeMap::new();
    for (i, r) in q.reps.iter().enumerate() {
        groups.entry(outside_key(r, seg)).or_default().insert(q.class_of[i]);
    }
    groups
}

/// Bouquet size of `seg` from an already built quotient.
pub fn bouquet_of(q: &Quotient, seg: &Segment) -> usize {
    families(q, seg).values().map(BTreeSet::len).max().unwrap_or(0)
}

/// The largest number of pairwise non-equivalent representatives that
/// coincide outside `seg`.
pub fn bouquet(chain: &Chain, interp: &Interpretation, seg: &Segment, cap: u128) -> Result<usize, InterpError> {
    seg.check_within(chain)?;
    let q = build_graph(chain, interp, cap)?;
    Ok(bouquet_of(&q, seg))
}

/// Whether `seg` is `(k1, k2)`-major: some family of representatives
/// coinciding outside it represents a big vertex set.
pub fn is_major(q: &Quotient, seg: &Segment, k1: usize, k2: usize) -> bool {
    families(q, seg).values().any(|classes| {
        let a = q.graph.vertex_set(classes.iter().copied()).expect("class ids are vertices");
        randomgraph::is_big_set(&q.graph, &a, k1, k2).is_some()
    })
}

/// `M₁(K₁ + K₂) + 1`, the fatness bound in the statement of the cut lemma.
pub fn k3_statement(m1: u128, k1: usize, k2: usize) -> u128 {
    m1 * (k1 + k2) as u128 + 1
}

/// `M₁(K₁ + K₂ + 1)`, the bound used in its proof.
pub fn k3_proof(m1: u128, k1: usize, k2: usize) -> u128 {
    m1 * (k1 + k2 + 1) as u128
}

/// Analysis of one Dedekind cut `([0, p), [p, len))`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutRecord {
    pub position: usize,
    pub bouquet_left: usize,
    pub bouquet_right: usize,
    pub left_major: bool,
    pub right_major: bool,
    pub left_fat: bool,
    pub right_fat: bool,
    /// False when one side is major while the other is `K3`-fat.
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutReport {
    pub k1: usize,
    pub k2: usize,
    pub m1: u128,
    pub k3: u128,
    pub vertices: usize,
    pub cuts: Vec<CutRecord>,
}

impl CutReport {
    pub fn violations(&self) -> impl Iterator<Item = &CutRecord> {
        self.cuts.iter().filter(|c| !c.consistent)
    }
}

/// `M₁ = |T_{n,3d}|` over finite chains, for the depth and dimension of `interp`.
pub fn m1_finite(interp: &Interpretation, cap: usize) -> Result<u128, InterpError> {
    Ok(theory::enumerate_fin(interp.depth(), 3 * interp.dim, cap)?.len() as u128)
}

/// Bouquets, majority and fatness at every cut, with the consistency flag
/// "not (one side major and the other side `M₁(K₁+K₂)+1`-fat)".
pub fn cut_report(chain: &Chain, interp: &Interpretation, k1: usize, k2: usize, m1: u128, cap: u128) -> Result<CutReport, InterpError> {
    let q = build_graph(chain, interp, cap)?;
    let k3 = k3_statement(m1, k1, k2);
    let len = chain.len();
    let mut cuts = Vec::with_capacity(len + 1);
    for p in 0..=len {
        let (l, r) = chain.cut(p)?;
        let bl = bouquet_of(&q, &l);
        let br = bouquet_of(&q, &r);
        let lm = is_major(&q, &l, k1, k2);
        let rm = is_major(&q, &r, k1, k2);
        let lf = bl as u128 >= k3;
        let rf = br as u128 >= k3;
        cuts.push(CutRecord {
            position: p,
            bouquet_left: bl,
            bouquet_right: br,
            left_major: lm,
            right_major: rm,
            left_fat: lf,
            right_fat: rf,
            consistent: !(lm && rf) && !(rm && lf),
        });
    }
    Ok(CutReport { k1, k2, m1, k3, vertices: q.class_count(), cuts })
}

/// Least `p` such that `[0, p)` is `(k1, k2)`-major.
pub fn minimal_major_initial(q: &Quotient, chain: &Chain, k1: usize, k2: usize) -> Result<Option<usize>, InterpError> {
    for p in 0..=chain.len() {
        let (l, _) = chain.cut(p)?;
        if is_major(q, &l, k1, k2) {
            return Ok(Some(p));
        }
    }
    Ok(None)
}

/// Classes of representatives that have an equivalent representative agreeing
/// with `x` outside some proper initial segment of `[0, q)`.
pub fn vicinity_of(qt: &Quotient, chain: &Chain, x: &SetTuple, q: usize) -> Result<BTreeSet<usize>, InterpError> {
    let xc = qt.class_of_tuple(x).ok_or_else(|| InterpError::NotRepresentative(x.clone()))?;
    Segment::new(0, q)?.check_within(chain)?;
    if q == 0 {
        return Ok(BTreeSet::from([xc]));
    }
    // the largest proper initial segment is [0, q-1); smaller ones give subsets
    let inner = Segment::new(0, q - 1)?;
    let key = outside_key(x, &inner);
    Ok(qt
        .reps
        .iter()
        .enumerate()
        .filter(|(_, r)| outside_key(r, &inner) == key)
        .map(|(i, _)| qt.class_of[i])
        .collect())
}

pub fn vicinity(chain: &Chain, interp: &Interpretation, x: &SetTuple, q: usize, cap: u128) -> Result<BTreeSet<usize>, InterpError> {
    let qt = build_graph(chain, interp, cap)?;
    vicinity_of(&qt, chain, x, q)
}

// ---------------------------------------------------------------------------
// The built-in interpretation of a 2-random graph in (ω, <)
// ---------------------------------------------------------------------------

/// `V = {a}` with at least two elements below `a`.
fn big(v: &str) -> String {
    format!("(exists Pb. (SING(Pb) & Pb < {v} & exists Qb. (SING(Qb) & Qb < Pb)))")
}

/// `V = {0}`.
fn zero(v: &str) -> String {
    format!("(SING({v}) & !(exists Pz. (SING(Pz) & Pz < {v})))")
}

/// `V = {1}`.
fn one(v: &str) -> String {
    format!("(SING({v}) & (exists Po. (SING(Po) & Po < {v})) & !{})", big(v))
}

/// `V = {x, a, b}` with `x ∈ {0, 1}` and `a, b > 1`. Nothing forces `a ≠ b`,
/// so two-element sets `{x, a}` qualify as well.
fn triple(v: &str) -> String {
    let (h0, h1) = (has(v, zero), has(v, one));
    format!(
        "(exists Ta. exists Tb. (SING(Ta) & SING(Tb) & Ta <= {v} & Tb <= {v} & {big_a} & {big_b} & \
         ({h0} | {h1}) & !({h0} & {h1}) & \
         forall Tz. (SING(Tz) & Tz <= {v} -> Tz <= Ta | Tz <= Tb | !{big_z})))",
        big_a = big("Ta"),
        big_b = big("Tb"),
        big_z = big("Tz"),
    )
}

fn universe_text(v: &str) -> String {
    format!("((SING({v}) & {}) | {})", big(v), triple(v))
}

/// Some member of `Y` lies above the singleton `X`.
fn above(x: &str, y: &str) -> String {
    format!("(exists Ab. (SING(Ab) & Ab <= {y} & {x} < Ab))")
}

fn has(y: &str, which: fn(&str) -> String) -> String {
    format!("(exists Hz. (Hz <= {y} & {}))", which("Hz"))
}

/// `[X = {a} & Y = {0, a, b} & a < b]`
fn clause_zero(x: &str, y: &str) -> String {
    format!("(SING({x}) & {x} <= {y} & {} & {})", has(y, zero), above(x, y))
}

/// `[X = {b} & Y = {1, a, b} & a > b]`
fn clause_one(x: &str, y: &str) -> String {
    format!("(SING({x}) & {x} <= {y} & {} & {})", has(y, one), above(x, y))
}

/// `[X = {a} & Y = {x, c, d} & a ∉ {c, d}]`
fn clause_outside(x: &str, y: &str) -> String {
    format!("(SING({x}) & !SING({y}) & !({x} <= {y}))")
}

/// Universe, equality and relation texts of the built-in interpretation.
pub fn fact26_texts() -> (String, String, String) {
    let u = universe_text("X0");
    let e = format!("{} & {} & X0 = X1", universe_text("X0"), universe_text("X1"));
    let r = format!(
        "{} & {} & ({} | {} | {} | {} | {} | {})",
        universe_text("X0"),
        universe_text("X1"),
        clause_zero("X0", "X1"),
        clause_zero("X1", "X0"),
        clause_one("X0", "X1"),
        clause_one("X1", "X0"),
        clause_outside("X0", "X1"),
        clause_outside("X1", "X0"),
    );
    (u, e, r)
}

/// The one-dimensional, parameter-free interpretation whose limit on `(ω, <)` is
/// a 2-random graph: vertices are `{a}` with `a > 1` and `{x, a, b}` with
/// `x ∈ {0, 1}`, `1 < a < b`.
pub fn fact26(prefix_len: usize) -> Result<Interpretation, InterpError> {
    if prefix_len < 4 {
        return Err(InterpError::PrefixTooShort(prefix_len));
    }
    let (u, e, r) = fact26_texts();
    Interpretation::parse(&u, &e, &r, SetTuple::empty(0), 1)
}

/// The same graph built directly from the case analysis, with vertices in
/// increasing mask order.
pub fn fact26_ground_truth(prefix_len: usize) -> Result<(Vec<u64>, Graph), InterpError> {
    if prefix_len < 4 {
        return Err(InterpError::PrefixTooShort(prefix_len));
    }
    let bit = |p: usize| 1u64 << p;
    let mut verts = Vec::new();
    for a in 2..prefix_len {
        verts.push(bit(a));
    }
    for x in 0..2 {
        for a in 2..prefix_len {
            for b in a..prefix_len {
                verts.push(bit(x) | bit(a) | bit(b));
            }
        }
    }
    verts.sort_unstable();
    let single = |m: u64| m.count_ones() == 1;
    let adjacent = |s: u64, t: u64| -> bool {
        if !single(s) || single(t) {
            return false;
        }
        let p = s.trailing_zeros() as usize;
        let rest = t & !3;
        let a = rest.trailing_zeros() as usize;
        let b = 63 - rest.leading_zeros() as usize;
        if p != a && p != b {
            return true;
        }
        // {0, a, b} meets {a} for a < b; {1, a, b} meets {b} for a > b, again
        // the smaller one. A pair {x, a} has no a < b.
        a < b && p == a
    };
    let mut g = Graph::edgeless(verts.len());
    for i in 0..verts.len() {
        for j in i + 1..verts.len() {
            if adjacent(verts[i], verts[j]) || adjacent(verts[j], verts[i]) {
                g.add_edge(i, j)?;
            }
        }
    }
    Ok((verts, g))
}

/// For sets `A0`, `A1` of vertices, the least vertex separating them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeparationCase {
    pub a0: Vec<SetTuple>,
    pub a1: Vec<SetTuple>,
    pub separator: Option<SetTuple>,
}

/// Every ordered pair of disjoint sets of size `< k` drawn from the classes of
/// `pool`, with the least separating class in the quotient, if any.
pub fn separation_table(q: &Quotient, pool: &[SetTuple], k: usize) -> Result<Vec<SeparationCase>, InterpError> {
    if k == 0 {
        return Err(GraphError::ZeroK.into());
    }
    let mut ids: Vec<usize> =
        pool.iter().map(|t| q.class_of_tuple(t).ok_or_else(|| InterpError::NotRepresentative(t.clone()))).collect::<Result<_, _>>()?;
    ids.sort_unstable();
    ids.dedup();
    let mut subsets: Vec<Vec<usize>> = vec![vec![]];
    for size in 1..k {
        let mut next = Vec::new();
        for s in subsets.iter().filter(|s| s.len() == size - 1) {
            let start = s.last().map_or(0, |&l| ids.iter().position(|&v| v == l).unwrap() + 1);
            for &v in &ids[start..] {
                let mut t = s.clone();
                t.push(v);
                next.push(t);
            }
        }
        subsets.extend(next);
    }
    let mut out = Vec::new();
    for a0 in &subsets {
        for a1 in &subsets {
            if a0.iter().any(|v| a1.contains(v)) {
                continue;
            }
            let sep = randomgraph::separator(&q.graph, a0, a1)?;
            out.push(SeparationCase {
                a0: a0.iter().map(|&c| q.leader(c).clone()).collect(),
                a1: a1.iter().map(|&c| q.leader(c).clone()).collect(),
                separator: sep.map(|c| q.leader(c).clone()),
            });
        }
    }
    Ok(out)
}
