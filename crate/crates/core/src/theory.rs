//! Partial theories `Th^n(C; Ā)` of finite chains and their calculus.
//!
//! A level-0 theory is the truth assignment of the atomic formulas in the
//! tuple's variables. A level-`k+1` theory of arity `l` is the set of level-`k`
//! theories of arity `l+1` obtained by extending the tuple with every subset of
//! the chain. Bodies are kept sorted and duplicate free, so structural equality
//! is theory equality.
//!
//! Level-0 atoms are indexed so that the atoms of the first `l` variables form
//! a prefix of the atoms of any longer tuple: variable `k` owns the block
//! starting at `2k²`, laid out as `EM_k, SING_k` followed, for each `i < k`,
//! by `SUB_{i,k}, SUB_{k,i}, LT_{i,k}, LT_{k,i}`. Arity `l` uses `2l²` atoms.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

use crate::chain::{Chain, ChainError, Segment, SetTuple};
use crate::formula::{Formula, Var};

/// Default member cap for [`enumerate_fin`].
pub const DEFAULT_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TheoryError {
    #[error("level mismatch: {0} vs {1}")]
    LevelMismatch(usize, usize),
    #[error("arity mismatch: {0} vs {1}")]
    ArityMismatch(usize, usize),
    #[error("theory has arity 0, nothing to drop")]
    ZeroArity,
    #[error("cannot project a level-{level} theory to level {target}")]
    ProjectAbove { target: usize, level: usize },
    #[error("positive-level theory with empty body")]
    EmptyBody,
    #[error("formula needs depth {depth} but the theory has level {level}")]
    DepthExceeded { depth: usize, level: usize },
    #[error("free variable X{index} is outside arity {arity}")]
    FreeVariable { index: usize, arity: usize },
    #[error("enumeration cap {cap} exceeded after {found} theories")]
    CapExceeded { cap: usize, found: usize },
    #[error("malformed theory: {0}")]
    Malformed(String),
    #[error(transparent)]
    Chain(#[from] ChainError),
}

/// Atomic formula over tuple indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Atom {
    Em(usize),
    Sing(usize),
    Sub(usize, usize),
    Lt(usize, usize),
}

impl Atom {
    /// Position in the level-0 bit vector.
    pub fn index(self) -> usize {
        match self {
            Atom::Em(k) => 2 * k * k,
            Atom::Sing(k) => 2 * k * k + 1,
            Atom::Sub(i, j) | Atom::Lt(i, j) => {
                let lt = matches!(self, Atom::Lt(..)) as usize;
                let (lo, hi, flipped) = if i < j { (i, j, 0) } else { (j, i, 1) };
                2 * hi * hi + 2 + 4 * lo + 2 * lt + flipped
            }
        }
    }

    /// Largest variable index mentioned.
    pub fn max_var(self) -> usize {
        match self {
            Atom::Em(k) | Atom::Sing(k) => k,
            Atom::Sub(i, j) | Atom::Lt(i, j) => i.max(j),
        }
    }

    /// All atoms for a tuple of the given arity, in index order.
    pub fn all(arity: usize) -> impl Iterator<Item = Atom> {
        (0..arity).flat_map(|k| {
            [Atom::Em(k), Atom::Sing(k)]
                .into_iter()
                .chain((0..k).flat_map(move |i| [Atom::Sub(i, k), Atom::Sub(k, i), Atom::Lt(i, k), Atom::Lt(k, i)]))
        })
    }

    pub fn count(arity: usize) -> usize {
        2 * arity * arity
    }

    /// Truth of the atom under concrete masks.
    pub fn holds(self, masks: &[u64]) -> bool {
        match self {
            Atom::Em(k) => masks[k] == 0,
            Atom::Sing(k) => masks[k].count_ones() == 1,
            Atom::Sub(i, j) => masks[i] & !masks[j] == 0,
            Atom::Lt(i, j) => {
                let (a, b) = (masks[i], masks[j]);
                a.count_ones() == 1 && b.count_ones() == 1 && a < b
            }
        }
    }

    pub fn name(self) -> String {
        match self {
            Atom::Em(k) => format!("EM_{k}"),
            Atom::Sing(k) => format!("SING_{k}"),
            Atom::Sub(i, j) => format!("SUB_{i}_{j}"),
            Atom::Lt(i, j) => format!("LT_{i}_{j}"),
        }
    }

    pub fn parse(name: &str) -> Option<Atom> {
        let mut parts = name.split('_');
        let head = parts.next()?;
        let nums: Vec<usize> = parts.map(|p| p.parse().ok()).collect::<Option<_>>()?;
        match (head, nums.as_slice()) {
            ("EM", [k]) => Some(Atom::Em(*k)),
            ("SING", [k]) => Some(Atom::Sing(*k)),
            ("SUB", [i, j]) if i != j => Some(Atom::Sub(*i, *j)),
            ("LT", [i, j]) if i != j => Some(Atom::Lt(*i, *j)),
            _ => None,
        }
    }
}

/// Bit vector over [`Atom::index`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AtomSet(SmallVec<[u64; 2]>);

impl AtomSet {
    fn zeros(arity: usize) -> Self {
        AtomSet(SmallVec::from_elem(0, Atom::count(arity).div_ceil(64)))
    }

    pub fn get(&self, a: Atom) -> bool {
        let i = a.index();
        (self.0[i / 64] >> (i % 64)) & 1 == 1
    }

    fn set(&mut self, a: Atom, v: bool) {
        let i = a.index();
        if v {
            self.0[i / 64] |= 1 << (i % 64);
        } else {
            self.0[i / 64] &= !(1 << (i % 64));
        }
    }

    fn from_fn(arity: usize, mut f: impl FnMut(Atom) -> bool) -> Self {
        let mut s = AtomSet::zeros(arity);
        for a in Atom::all(arity) {
            if f(a) {
                s.set(a, true);
            }
        }
        s
    }

    fn of_masks(masks: &[u64]) -> Self {
        AtomSet::from_fn(masks.len(), |a| a.holds(masks))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Body {
    Atoms(AtomSet),
    Members(Arc<[Theory]>),
}

/// A canonical partial theory.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawTheory", into = "RawTheory")]
pub struct Theory {
    level: usize,
    arity: usize,
    body: Body,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTheory {
    level: usize,
    arity: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    atoms: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    members: Option<Vec<Theory>>,
}

impl From<Theory> for RawTheory {
    fn from(t: Theory) -> Self {
        match &t.body {
            Body::Atoms(_) => {
                let mut names: Vec<String> = t.true_atoms().map(Atom::name).collect();
                names.sort();
                RawTheory { level: 0, arity: t.arity, atoms: Some(names), members: None }
            }
            Body::Members(ms) => RawTheory { level: t.level, arity: t.arity, atoms: None, members: Some(ms.to_vec()) },
        }
    }
}

impl TryFrom<RawTheory> for Theory {
    type Error = TheoryError;

    fn try_from(raw: RawTheory) -> Result<Self, TheoryError> {
        let bad = |m: &str| TheoryError::Malformed(m.to_string());
        match (raw.level, raw.atoms, raw.members) {
            (0, Some(names), None) => {
                let mut set = AtomSet::zeros(raw.arity);
                for n in &names {
                    let a = Atom::parse(n).ok_or_else(|| TheoryError::Malformed(format!("unknown atom `{n}`")))?;
                    if a.max_var() >= raw.arity {
                        return Err(TheoryError::Malformed(format!("atom `{n}` exceeds arity {}", raw.arity)));
                    }
                    set.set(a, true);
                }
                for k in 0..raw.arity {
                    if set.get(Atom::Em(k)) && set.get(Atom::Sing(k)) {
                        return Err(TheoryError::Malformed(format!("EM_{k} and SING_{k} both true")));
                    }
                }
                Ok(Theory { level: 0, arity: raw.arity, body: Body::Atoms(set) })
            }
            (level, None, Some(members)) if level > 0 => {
                for m in &members {
                    if m.level + 1 != level {
                        return Err(TheoryError::LevelMismatch(m.level, level - 1));
                    }
                    if m.arity != raw.arity + 1 {
                        return Err(TheoryError::ArityMismatch(m.arity, raw.arity + 1));
                    }
                }
                if members.is_empty() {
                    return Err(TheoryError::EmptyBody);
                }
                let t = Theory::from_members(level, raw.arity, members);
                let shadows: HashSet<Theory> = t.members().iter().map(|m| m.drop_last().expect("arity >= 1")).collect();
                if shadows.len() != 1 {
                    return Err(bad("members disagree on the underlying tuple"));
                }
                Ok(t)
            }
            _ => Err(bad("level 0 needs `atoms`, positive levels need `members`")),
        }
    }
}

impl fmt::Display for Theory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_string(self).map_err(|_| fmt::Error)?;
        f.write_str(&s)
    }
}

impl Theory {
    fn from_members(level: usize, arity: usize, mut members: Vec<Theory>) -> Theory {
        members.sort_unstable();
        members.dedup();
        Theory { level, arity, body: Body::Members(members.into()) }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    /// Members of a positive-level theory; empty at level 0.
    pub fn members(&self) -> &[Theory] {
        match &self.body {
            Body::Members(ms) => ms,
            Body::Atoms(_) => &[],
        }
    }

    /// Truth of an atom in a level-0 theory.
    pub fn atom(&self, a: Atom) -> Option<bool> {
        match &self.body {
            Body::Atoms(s) if a.max_var() < self.arity => Some(s.get(a)),
            _ => None,
        }
    }

    /// True atoms of a level-0 theory in index order.
    pub fn true_atoms(&self) -> impl Iterator<Item = Atom> + '_ {
        let set = match &self.body {
            Body::Atoms(s) => Some(s),
            Body::Members(_) => None,
        };
        Atom::all(self.arity).filter(move |a| set.is_some_and(|s| s.get(*a)))
    }

    /// The neutral theory `e_{n,l}`, the theory of the empty chain.
    pub fn neutral(level: usize, arity: usize) -> Theory {
        if level == 0 {
            Theory { level, arity, body: Body::Atoms(AtomSet::of_masks(&vec![0; arity])) }
        } else {
            Theory { level, arity, body: Body::Members(vec![Theory::neutral(level - 1, arity + 1)].into()) }
        }
    }

    /// Total number of theory nodes, counting shared subterms once per occurrence.
    pub fn node_count(&self) -> usize {
        1 + self.members().iter().map(Theory::node_count).sum::<usize>()
    }

    /// Removes tuple index `i` (all deeper indices shift down by one).
    pub fn remove_index(&self, i: usize) -> Result<Theory, TheoryError> {
        if self.arity == 0 {
            return Err(TheoryError::ZeroArity);
        }
        if i >= self.arity {
            return Err(TheoryError::FreeVariable { index: i, arity: self.arity });
        }
        Ok(self.remove_index_unchecked(i))
    }

    fn remove_index_unchecked(&self, i: usize) -> Theory {
        let arity = self.arity - 1;
        match &self.body {
            Body::Atoms(s) => {
                let up = |k: usize| if k < i { k } else { k + 1 };
                let set = AtomSet::from_fn(arity, |a| {
                    s.get(match a {
                        Atom::Em(k) => Atom::Em(up(k)),
                        Atom::Sing(k) => Atom::Sing(up(k)),
                        Atom::Sub(x, y) => Atom::Sub(up(x), up(y)),
                        Atom::Lt(x, y) => Atom::Lt(up(x), up(y)),
                    })
                });
                Theory { level: 0, arity, body: Body::Atoms(set) }
            }
            Body::Members(ms) => {
                Theory::from_members(self.level, arity, ms.iter().map(|m| m.remove_index_unchecked(i)).collect())
            }
        }
    }

    /// Forgets the last tuple component.
    pub fn drop_last(&self) -> Result<Theory, TheoryError> {
        if self.arity == 0 {
            return Err(TheoryError::ZeroArity);
        }
        Ok(self.remove_index_unchecked(self.arity - 1))
    }

    /// The level-`m` theory determined by this one.
    pub fn project(&self, m: usize) -> Result<Theory, TheoryError> {
        if m > self.level {
            return Err(TheoryError::ProjectAbove { target: m, level: self.level });
        }
        let mut t = self.clone();
        while t.level > m {
            let first = t.members().first().ok_or(TheoryError::EmptyBody)?;
            t = first.drop_last()?;
        }
        Ok(t)
    }
}

/// `Th^n(C; Ā)` by direct recursion on `n`.
pub fn th(n: usize, chain: &Chain, tuple: &SetTuple) -> Result<Theory, TheoryError> {
    tuple.check_over(chain)?;
    let mut masks = tuple.masks().to_vec();
    Ok(th_masks(n, chain.mask(), &mut masks))
}

/// As [`th`] with the tuple given as masks already inside `universe`.
pub(crate) fn th_masks(n: usize, universe: u64, masks: &mut Vec<u64>) -> Theory {
    let arity = masks.len();
    if n == 0 {
        return Theory { level: 0, arity, body: Body::Atoms(AtomSet::of_masks(masks)) };
    }
    let mut members = Vec::new();
    let mut b = 0u64;
    masks.push(0);
    loop {
        *masks.last_mut().unwrap() = b;
        members.push(th_masks(n - 1, universe, masks));
        if b == universe {
            break;
        }
        b = b.wrapping_sub(universe) & universe;
    }
    masks.pop();
    Theory::from_members(n, arity, members)
}

/// Formal addition: the theory of `C + D` from the theories of `C` and `D`.
pub fn add(t1: &Theory, t2: &Theory) -> Result<Theory, TheoryError> {
    if t1.level != t2.level {
        return Err(TheoryError::LevelMismatch(t1.level, t2.level));
    }
    if t1.arity != t2.arity {
        return Err(TheoryError::ArityMismatch(t1.arity, t2.arity));
    }
    Ok(add_unchecked(t1, t2))
}

fn add_unchecked(t1: &Theory, t2: &Theory) -> Theory {
    match (&t1.body, &t2.body) {
        (Body::Atoms(a), Body::Atoms(b)) => {
            let l = t1.arity;
            let sing = |k: usize| {
                (a.get(Atom::Sing(k)) && b.get(Atom::Em(k))) || (a.get(Atom::Em(k)) && b.get(Atom::Sing(k)))
            };
            let set = AtomSet::from_fn(l, |atom| match atom {
                Atom::Em(_) | Atom::Sub(..) => a.get(atom) && b.get(atom),
                Atom::Sing(k) => sing(k),
                Atom::Lt(i, j) => {
                    sing(i)
                        && sing(j)
                        && (a.get(atom) || b.get(atom) || (a.get(Atom::Sing(i)) && b.get(Atom::Sing(j))))
                }
            });
            Theory { level: 0, arity: l, body: Body::Atoms(set) }
        }
        (Body::Members(xs), Body::Members(ys)) => {
            let mut out = Vec::with_capacity(xs.len() * ys.len());
            for x in xs.iter() {
                for y in ys.iter() {
                    out.push(add_unchecked(x, y));
                }
            }
            Theory::from_members(t1.level, t1.arity, out)
        }
        _ => unreachable!("equal levels imply equal body kinds"),
    }
}

/// Left fold of [`add`]; the empty sum is the neutral theory.
pub fn sum<'a>(level: usize, arity: usize, ts: impl IntoIterator<Item = &'a Theory>) -> Result<Theory, TheoryError> {
    let mut acc = Theory::neutral(level, arity);
    for t in ts {
        acc = add(&acc, t)?;
    }
    Ok(acc)
}

/// Decides `φ` from a theory of sufficient level.
pub fn decide(t: &Theory, phi: &Formula) -> Result<bool, TheoryError> {
    let depth = phi.qdepth();
    if depth > t.level {
        return Err(TheoryError::DepthExceeded { depth, level: t.level });
    }
    let need = phi.free_arity();
    if need > t.arity {
        return Err(TheoryError::FreeVariable { index: need - 1, arity: t.arity });
    }
    decide_rec(t, phi, t.arity)
}

fn decide_rec(t: &Theory, phi: &Formula, base: usize) -> Result<bool, TheoryError> {
    use Formula as F;
    let slot = |v: &Var| match v {
        Var::Free(i) => *i,
        Var::Bound(j) => base + j,
    };
    let atom = |a: Atom| -> Result<bool, TheoryError> {
        let t0 = t.project(0)?;
        Ok(t0.atom(a).expect("indices within arity"))
    };
    Ok(match phi {
        F::True => true,
        F::False => false,
        F::Em(v) => atom(Atom::Em(slot(v)))?,
        F::Sing(v) => atom(Atom::Sing(slot(v)))?,
        F::Sub(a, b) => {
            let (i, j) = (slot(a), slot(b));
            i == j || atom(Atom::Sub(i, j))?
        }
        F::Lt(a, b) => {
            let (i, j) = (slot(a), slot(b));
            i != j && atom(Atom::Lt(i, j))?
        }
        F::Not(a) => !decide_rec(t, a, base)?,
        F::And(a, b) => decide_rec(t, a, base)? && decide_rec(t, b, base)?,
        F::Or(a, b) => decide_rec(t, a, base)? || decide_rec(t, b, base)?,
        F::Implies(a, b) => !decide_rec(t, a, base)? || decide_rec(t, b, base)?,
        F::Iff(a, b) => decide_rec(t, a, base)? == decide_rec(t, b, base)?,
        F::Exists(body) | F::Forall(body) => {
            let universal = matches!(phi, F::Forall(_));
            let mut result = universal;
            for m in t.members() {
                if decide_rec(m, body, base)? != universal {
                    result = !universal;
                    break;
                }
            }
            result
        }
    })
}

/// The theories `th(n, 1-point chain, Ā)` for every `Ā`, the generators of
/// the finite-chain theories under addition.
pub fn point_theories(n: usize, arity: usize) -> Vec<Theory> {
    let one = Chain::new(1).expect("length 1");
    let mut out: Vec<Theory> = (0..1u64 << arity)
        .map(|bits| {
            let tuple = SetTuple::from_masks((0..arity).map(|k| (bits >> k) & 1).collect());
            th(n, &one, &tuple).expect("tuple over one point")
        })
        .collect();
    out.sort();
    out.dedup();
    out
}

/// All `(n, l)`-theories realized by finite chains: the closure of the empty
/// chain's theory and the one-point theories under addition, in canonical order.
pub fn enumerate_fin(n: usize, arity: usize, cap: usize) -> Result<Vec<Theory>, TheoryError> {
    let gens = point_theories(n, arity);
    let e = Theory::neutral(n, arity);
    let mut seen: HashSet<Theory> = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(e.clone());
    queue.push_back(e);
    // Every finite chain is the empty chain followed by points, so closing
    // under right addition of generators reaches each realized theory.
    while let Some(t) = queue.pop_front() {
        for g in &gens {
            let s = add_unchecked(&t, g);
            if !seen.contains(&s) {
                // Wide theories make every later addition slow, so the cap
                // also bounds the member count of any single theory.
                if seen.len() >= cap || s.members().len() > cap {
                    return Err(TheoryError::CapExceeded { cap, found: seen.len() });
                }
                seen.insert(s.clone());
                queue.push_back(s);
            }
        }
    }
    let mut out: Vec<Theory> = seen.into_iter().collect();
    out.sort();
    Ok(out)
}

/// One input of [`fv_probe`]: an index chain with a theory at each position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledChain {
    pub labels: Vec<Theory>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum FvReport {
    /// The index theory determined the sum on every instance.
    Function { instances: usize, classes: usize },
    /// Two instances share `Th^m(I; P̄)` but have different sums.
    Collision { first: usize, second: usize, index_theory: Theory },
}

/// Tests whether `Th^m(I; P̄)` determines the sum of the labels, where `P̄`
/// partitions the index chain by label.
pub fn fv_probe(m: usize, n: usize, instances: &[LabeledChain]) -> Result<FvReport, TheoryError> {
    let mut arity = None;
    let mut labels: Vec<&Theory> = Vec::new();
    for inst in instances {
        for t in &inst.labels {
            if t.level != n {
                return Err(TheoryError::LevelMismatch(t.level, n));
            }
            match arity {
                None => arity = Some(t.arity),
                Some(a) if a != t.arity => return Err(TheoryError::ArityMismatch(a, t.arity)),
                _ => {}
            }
            labels.push(t);
        }
    }
    labels.sort();
    labels.dedup();
    let arity = arity.unwrap_or(0);
    let mut table: BTreeMap<Theory, (usize, Theory)> = BTreeMap::new();
    for (idx, inst) in instances.iter().enumerate() {
        let chain = Chain::new(inst.labels.len())?;
        let parts: Vec<u64> = labels
            .iter()
            .map(|lab| inst.labels.iter().enumerate().filter(|(_, t)| t == lab).fold(0u64, |m, (p, _)| m | 1 << p))
            .collect();
        let key = th(m, &chain, &SetTuple::from_masks(parts))?;
        let total = sum(n, arity, &inst.labels)?;
        match table.get(&key) {
            Some((first, prev)) if *prev != total => {
                return Ok(FvReport::Collision { first: *first, second: idx, index_theory: key });
            }
            Some(_) => {}
            None => {
                table.insert(key, (idx, total));
            }
        }
    }
    Ok(FvReport::Function { instances: instances.len(), classes: table.len() })
}

/// Level-`n` theories of the consecutive blocks `[c_i, c_{i+1})` of the tuple.
pub fn segment_labels(n: usize, chain: &Chain, tuple: &SetTuple, cutpoints: &[usize]) -> Result<Vec<Theory>, TheoryError> {
    let mut out = Vec::new();
    for w in cutpoints.windows(2) {
        let seg = Segment::new(w[0], w[1])?;
        seg.check_within(chain)?;
        out.push(th(n, &seg.as_chain(), &tuple.restrict(&seg))?);
    }
    Ok(out)
}
