//! The constant ladder, Ramsey bounds and small exact Ramsey search.
//!
//! # Ramsey upper bounds
//!
//! Write `R₂(k; c)` for the least `N` such that every `c`-colouring of pairs
//! of an `N`-set has a homogeneous `k`-subset, and `R₃(k; c)` for triples.
//!
//! **Pairs: `R₂(k; c) ≤ c^(c·k)` for `c ≥ 2`.** Let `m = c(k−1)+1` and
//! `N = c^m`. Pick `v₁ = min S₀`, `S₀` the whole set. The other `|S₀|−1`
//! points split into `c` classes by the colour of their pair with `v₁`; keep a
//! largest class `S₁` and call its colour `χ₁`. Since `⌈(cʲ−1)/c⌉ = cʲ⁻¹`,
//! `|S_t| ≥ c^(m−t)`, so `m` points `v₁ < … < v_m` are picked, each pair
//! `{v_i, v_j}` (`i < j`) coloured `χ_i`. Among `m` values of `χ` some colour
//! occurs `k` times, and those `v_i` form a homogeneous set. Finally
//! `c^(c(k−1)+1) ≤ c^(ck)`.
//!
//! **Triples: `R₃(k; c) ≤ 2·c^(c^(2ck))` for `c ≥ 2`, `k ≥ 3`.** Let
//! `m = R₂(k−1; c) + 1`. Pick points as above, but after picking `v_t` split
//! the rest by the vector of colours of `{v_i, v_t, s}`, `i < t`: at most
//! `c^(t−1)` classes, so `|S_t| ≥ (|S_{t−1}| − 1)/c^(t−1)`. As long as sizes stay
//! `≥ 2`, `|S_{t−1}| − 1 ≥ |S_{t−1}|/2` and `2 ≤ c` give
//! `|S_{m−1}| ≥ N / c^((m−1) + (m−1)(m−2)/2) = N / c^(m(m−1)/2)`, so
//! `N = 2·c^(m(m−1)/2)` lets us pick `v₁ < … < v_m`, where the colour of
//! `{v_i, v_j, v_l}` depends only on `(i, j)`. A homogeneous `(k−1)`-set for
//! that pair colouring on `v₁ … v_{m−1}` plus `v_m` is homogeneous for triples.
//! With `R₂(k−1; c) ≤ c^(c(k−1))`, `m(m−1)/2 ≤ (2c^(c(k−1)))² ≤ c^(2ck)` because
//! `4 ≤ c^(2c)`.
//!
//! Degenerate cases are exact: one colour gives `k`; targets below the
//! uniformity are vacuous (`k`); a target equal to it needs just one tuple.
//!
//! # Magnitudes
//!
//! Values are exact while their decimal expansion has at most `size_cap`
//! digits. Otherwise they are kept as expression trees, with the invariant
//! that every symbolic value is provably `≥ 10^size_cap`. [`Magnitude::gt`]
//! is sound: `true` is a proof, `false` only means "not proven".

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::theory::{self, Atom, TheoryError};

pub const DEFAULT_SIZE_CAP: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConstantsError {
    #[error("search exceeded the work cap of {0} nodes")]
    WorkCap(u64),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Theory(#[from] TheoryError),
}

#[derive(Debug, PartialEq, Eq)]
enum Expr {
    Add(Magnitude, Magnitude),
    Mul(Magnitude, Magnitude),
    Pow(Magnitude, Magnitude),
    Max(Vec<Magnitude>),
}

/// An exact natural number, or an expression for one too large to expand.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Magnitude {
    Exact(BigUint),
    Symbolic(Arc<ExprNode>),
}

/// Opaque wrapper so the expression type stays private.
#[derive(Debug, PartialEq, Eq)]
pub struct ExprNode(Expr);

/// Arithmetic on magnitudes under a fixed digit cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arith {
    pub size_cap: u64,
}

impl Default for Arith {
    fn default() -> Self {
        Arith { size_cap: DEFAULT_SIZE_CAP }
    }
}

fn digits(n: &BigUint) -> u64 {
    if n.is_zero() {
        1
    } else {
        n.to_string().len() as u64
    }
}

fn log10(n: &BigUint) -> f64 {
    let bits = n.bits();
    if bits <= 1000 {
        n.to_f64().unwrap_or(f64::MAX).log10()
    } else {
        let shift = bits - 900;
        (n >> shift).to_f64().unwrap_or(f64::MAX).log10() + shift as f64 * std::f64::consts::LOG10_2
    }
}

impl Magnitude {
    pub fn from_u64(n: u64) -> Self {
        Magnitude::Exact(BigUint::from(n))
    }

    pub fn exact(&self) -> Option<&BigUint> {
        match self {
            Magnitude::Exact(n) => Some(n),
            Magnitude::Symbolic(_) => None,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Magnitude::Exact(_))
    }

    fn sym(e: Expr) -> Self {
        Magnitude::Symbolic(Arc::new(ExprNode(e)))
    }

    /// Provably `self > other`.
    pub fn gt(&self, other: &Magnitude) -> bool {
        use Magnitude::*;
        match (self, other) {
            (Exact(a), Exact(b)) => a > b,
            // symbolic values exceed every exact one
            (Symbolic(_), Exact(_)) => true,
            (Exact(_), Symbolic(_)) => false,
            (Symbolic(a), Symbolic(_)) => {
                let two = Magnitude::from_u64(2);
                let one = Magnitude::from_u64(1);
                match &a.0 {
                    Expr::Mul(x, y) => (x.ge(&two) && y.ge(other)) || (y.ge(&two) && x.ge(other)),
                    Expr::Add(x, y) => (x.ge(&one) && y.ge(other)) || (y.ge(&one) && x.ge(other)),
                    Expr::Pow(x, y) => {
                        if x.ge(&two) && y.ge(other) {
                            return true;
                        }
                        if let Magnitude::Symbolic(b) = other {
                            if let Expr::Pow(x2, y2) = &b.0 {
                                return x2.ge(&two) && x.ge(x2) && y.gt(y2);
                            }
                        }
                        false
                    }
                    Expr::Max(xs) => xs.iter().any(|x| x.gt(other)),
                }
            }
        }
    }

    /// Provably `self ≥ other`.
    pub fn ge(&self, other: &Magnitude) -> bool {
        if self == other || self.gt(other) {
            return true;
        }
        match self {
            Magnitude::Symbolic(a) => match &a.0 {
                Expr::Max(xs) => xs.iter().any(|x| x.ge(other)),
                Expr::Mul(x, y) => (x.ge(&Magnitude::from_u64(1)) && y.ge(other)) || (y.ge(&Magnitude::from_u64(1)) && x.ge(other)),
                Expr::Add(x, y) => x.ge(other) || y.ge(other),
                Expr::Pow(..) => false,
            },
            Magnitude::Exact(_) => false,
        }
    }

    /// Sound comparison; `None` when neither direction can be proven.
    pub fn compare(&self, other: &Magnitude) -> Option<Ordering> {
        if self == other {
            Some(Ordering::Equal)
        } else if self.gt(other) {
            Some(Ordering::Greater)
        } else if other.gt(self) {
            Some(Ordering::Less)
        } else {
            None
        }
    }

    pub fn mode(&self) -> &'static str {
        if self.is_exact() {
            "exact"
        } else {
            "symbolic"
        }
    }

    fn fmt_operand(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Magnitude::Symbolic(e) if !matches!(e.0, Expr::Max(_)) => write!(f, "({self})"),
            _ => write!(f, "{self}"),
        }
    }
}

impl fmt::Display for Magnitude {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Magnitude::Exact(n) => write!(f, "{n}"),
            Magnitude::Symbolic(e) => match &e.0 {
                Expr::Add(a, b) => {
                    a.fmt_operand(f)?;
                    f.write_str(" + ")?;
                    b.fmt_operand(f)
                }
                Expr::Mul(a, b) => {
                    a.fmt_operand(f)?;
                    f.write_str(" * ")?;
                    b.fmt_operand(f)
                }
                Expr::Pow(a, b) => {
                    a.fmt_operand(f)?;
                    f.write_str("^")?;
                    b.fmt_operand(f)
                }
                Expr::Max(xs) => {
                    f.write_str("max(")?;
                    for (i, x) in xs.iter().enumerate() {
                        if i > 0 {
                            f.write_str(", ")?;
                        }
                        write!(f, "{x}")?;
                    }
                    f.write_str(")")
                }
            },
        }
    }
}

impl From<u64> for Magnitude {
    fn from(n: u64) -> Self {
        Magnitude::from_u64(n)
    }
}

impl From<BigUint> for Magnitude {
    fn from(n: BigUint) -> Self {
        Magnitude::Exact(n)
    }
}

/// JSON form: `{"mode": "exact" | "symbolic", "value": "<decimal or expression>"}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MagnitudeJson {
    pub mode: String,
    pub value: String,
}

impl Serialize for Magnitude {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        MagnitudeJson { mode: self.mode().into(), value: self.to_string() }.serialize(s)
    }
}

impl Arith {
    pub fn new(size_cap: u64) -> Self {
        Arith { size_cap }
    }

    fn fits(&self, n: &BigUint) -> bool {
        digits(n) <= self.size_cap
    }

    fn wrap(&self, n: BigUint, e: impl FnOnce() -> Expr) -> Magnitude {
        if self.fits(&n) {
            Magnitude::Exact(n)
        } else {
            Magnitude::sym(e())
        }
    }

    pub fn add(&self, a: &Magnitude, b: &Magnitude) -> Magnitude {
        match (a, b) {
            (Magnitude::Exact(x), Magnitude::Exact(y)) => self.wrap(x + y, || Expr::Add(a.clone(), b.clone())),
            (Magnitude::Exact(x), _) if x.is_zero() => b.clone(),
            (_, Magnitude::Exact(y)) if y.is_zero() => a.clone(),
            _ => Magnitude::sym(Expr::Add(a.clone(), b.clone())),
        }
    }

    pub fn mul(&self, a: &Magnitude, b: &Magnitude) -> Magnitude {
        match (a, b) {
            (Magnitude::Exact(x), Magnitude::Exact(y)) => {
                if log10(x) + log10(y) > self.size_cap as f64 + 2.0 {
                    return Magnitude::sym(Expr::Mul(a.clone(), b.clone()));
                }
                self.wrap(x * y, || Expr::Mul(a.clone(), b.clone()))
            }
            (Magnitude::Exact(x), _) | (_, Magnitude::Exact(x)) if x.is_zero() => Magnitude::from_u64(0),
            (Magnitude::Exact(x), _) if x.is_one() => b.clone(),
            (_, Magnitude::Exact(y)) if y.is_one() => a.clone(),
            _ => Magnitude::sym(Expr::Mul(a.clone(), b.clone())),
        }
    }

    pub fn pow(&self, a: &Magnitude, b: &Magnitude) -> Magnitude {
        match (a, b) {
            (Magnitude::Exact(x), _) if x.is_zero() || x.is_one() => {
                if x.is_zero() && b.exact().is_some_and(Zero::is_zero) {
                    Magnitude::from_u64(1)
                } else {
                    a.clone()
                }
            }
            (_, Magnitude::Exact(y)) if y.is_zero() => Magnitude::from_u64(1),
            (_, Magnitude::Exact(y)) if y.is_one() => a.clone(),
            (Magnitude::Exact(x), Magnitude::Exact(y)) => {
                let est = log10(x) * y.to_f64().unwrap_or(f64::MAX);
                if est > self.size_cap as f64 + 2.0 {
                    return Magnitude::sym(Expr::Pow(a.clone(), b.clone()));
                }
                let e = y.to_u32().expect("exponent bounded by the digit estimate");
                self.wrap(x.pow(e), || Expr::Pow(a.clone(), b.clone()))
            }
            _ => Magnitude::sym(Expr::Pow(a.clone(), b.clone())),
        }
    }

    /// Maximum, resolved when the comparator can prove an order.
    pub fn max(&self, xs: &[Magnitude]) -> Magnitude {
        let mut best: Vec<Magnitude> = Vec::new();
        for x in xs {
            if best.iter().any(|b| b.ge(x)) {
                continue;
            }
            best.retain(|b| !x.ge(b));
            best.push(x.clone());
        }
        match best.len() {
            0 => Magnitude::from_u64(0),
            1 => best.pop().unwrap(),
            _ => Magnitude::sym(Expr::Max(best)),
        }
    }

    /// Upper bound for `R_u(target; colors)` with `u ∈ {2, 3}`; see the module
    /// docs for the proofs.
    pub fn ramsey_upper(&self, uniformity: u8, colors: &Magnitude, target: &Magnitude) -> Result<Magnitude, ConstantsError> {
        if uniformity != 2 && uniformity != 3 {
            return Err(ConstantsError::Invalid(format!("uniformity {uniformity} is not 2 or 3")));
        }
        let one = Magnitude::from_u64(1);
        let u = Magnitude::from_u64(uniformity as u64);
        if colors.exact().is_some_and(Zero::is_zero) || target.exact().is_some_and(Zero::is_zero) {
            return Err(ConstantsError::Invalid("colors and target must be at least 1".into()));
        }
        if colors == &one || !target.gt(&u) {
            // one colour, or at most one tuple to colour
            return Ok(target.clone());
        }
        let ck = self.mul(colors, target);
        Ok(match uniformity {
            2 => self.pow(colors, &ck),
            _ => {
                let e = self.pow(colors, &self.mul(&Magnitude::from_u64(2), &ck));
                self.mul(&Magnitude::from_u64(2), &self.pow(colors, &e))
            }
        })
    }

    /// `2^(#atoms(l))` at depth 0, `2^(|T_{k,l+1}|)` above.
    pub fn theory_count_bound(&self, depth: usize, arity: usize) -> Magnitude {
        let base = Magnitude::from_u64(Atom::count(arity + depth) as u64);
        let two = Magnitude::from_u64(2);
        (0..=depth).fold(base, |acc, _| self.pow(&two, &acc))
    }
}

/// Exact Ramsey search, convenience wrapper with [`Arith::ramsey_upper`] on
/// machine integers.
pub fn ramsey_upper(uniformity: u8, colors: u64, target: u64) -> Result<Magnitude, ConstantsError> {
    Arith::default().ramsey_upper(uniformity, &colors.into(), &target.into())
}

/// Least `n ≤ max_n` such that every `colors`-colouring of the pairs of an
/// `n`-set has a monochromatic `target`-clique, by backtracking over edge
/// colourings with the first edge's colour fixed.
pub fn ramsey_exact(colors: u64, target: usize, max_n: usize, work_cap: u64) -> Result<Option<usize>, ConstantsError> {
    if colors == 0 || target == 0 {
        return Err(ConstantsError::Invalid("colors and target must be at least 1".into()));
    }
    let mut work = 0u64;
    for n in target..=max_n {
        if !good_coloring_exists(n, colors as u8, target, work_cap, &mut work)? {
            return Ok(Some(n));
        }
    }
    Ok(None)
}

fn good_coloring_exists(n: usize, colors: u8, target: usize, cap: u64, work: &mut u64) -> Result<bool, ConstantsError> {
    if target <= 1 {
        return Ok(n == 0);
    }
    let edges: Vec<(usize, usize)> = (1..n).flat_map(|j| (0..j).map(move |i| (i, j))).collect();
    let mut color = vec![vec![u8::MAX; n]; n];
    fn mono_clique(color: &[Vec<u8>], (i, j): (usize, usize), c: u8, target: usize) -> bool {
        // grow a clique of colour c containing i and j among vertices < j
        let cand: Vec<usize> = (0..j).filter(|&v| v != i && color[v][i] == c && color[v][j] == c).collect();
        fn extend(color: &[Vec<u8>], c: u8, clique: &mut Vec<usize>, cand: &[usize], need: usize) -> bool {
            if need == 0 {
                return true;
            }
            for (k, &v) in cand.iter().enumerate() {
                if clique.iter().all(|&u| color[u][v] == c) {
                    clique.push(v);
                    if extend(color, c, clique, &cand[k + 1..], need - 1) {
                        return true;
                    }
                    clique.pop();
                }
            }
            false
        }
        extend(color, c, &mut vec![i, j], &cand, target - 2)
    }
    fn go(edges: &[(usize, usize)], k: usize, color: &mut Vec<Vec<u8>>, colors: u8, target: usize, cap: u64, work: &mut u64) -> Result<bool, ConstantsError> {
        if k == edges.len() {
            return Ok(true);
        }
        *work += 1;
        if *work > cap {
            return Err(ConstantsError::WorkCap(cap));
        }
        let (i, j) = edges[k];
        // colour permutations: the first edge takes colour 0
        let palette = if k == 0 { 1 } else { colors };
        for c in 0..palette {
            color[i][j] = c;
            color[j][i] = c;
            if !mono_clique(color, (i, j), c, target) && go(edges, k + 1, color, colors, target, cap, work)? {
                return Ok(true);
            }
        }
        color[i][j] = u8::MAX;
        color[j][i] = u8::MAX;
        Ok(false)
    }
    go(&edges, 0, &mut color, colors, target, cap, work)
}

/// `K₁ = K + K/M₂²` and `K₂ = K/(M₂²·M₄)` with their floors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BignessConstants<T: Clone + Integer> {
    pub k1: Ratio<T>,
    pub k2: Ratio<T>,
    pub k1_floor: T,
    pub k2_floor: T,
}

pub fn bigness_constants<T: Integer + Clone>(k: T, m2: T, m4: T) -> Result<BignessConstants<T>, ConstantsError> {
    if k.is_zero() || m2.is_zero() || m4.is_zero() {
        return Err(ConstantsError::Invalid("K, M2 and M4 must be at least 1".into()));
    }
    let sq = m2.clone() * m2;
    let k1 = Ratio::from_integer(k.clone()) + Ratio::new(k.clone(), sq.clone());
    let k2 = Ratio::new(k, sq * m4);
    Ok(BignessConstants { k1_floor: k1.floor().to_integer(), k2_floor: k2.floor().to_integer(), k1, k2 })
}

/// The two readings of `K₃`: `M₁(K₁+K₂)+1` and `M₁(K₁+K₂+1)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct K3Variants<T: Clone + Integer> {
    pub statement: Ratio<T>,
    pub proof: Ratio<T>,
}

impl<T: Clone + Integer> K3Variants<T> {
    /// The larger of the two.
    pub fn default_value(&self) -> &Ratio<T> {
        if self.proof >= self.statement {
            &self.proof
        } else {
            &self.statement
        }
    }
}

pub fn k3_variants<T: Integer + Clone>(m1: T, c: &BignessConstants<T>) -> K3Variants<T> {
    let m1 = Ratio::from_integer(m1);
    let s = c.k1.clone() + c.k2.clone();
    K3Variants { statement: m1.clone() * s.clone() + Ratio::one(), proof: m1 * (s + Ratio::one()) }
}

/// Least `K₀` such that `K₁ + K₂ < 2^(2(K−1))` for every `K ≥ K₀`, together
/// with the least `K₀'` for the stronger `2^(2(K−1)) − K₁ > K`. Both sides
/// are at most `3K` once `M₂, M₄ ≥ 1`, and `3K < 4^(K−1)` for `K ≥ 3`, so only
/// `K < 3` needs checking.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thresholds {
    pub sum_below_power: u64,
    pub power_minus_k1_above_k: u64,
}

pub fn bigness_thresholds(m2: &BigUint, m4: &BigUint) -> Result<Thresholds, ConstantsError> {
    let holds = |k: u64, strong: bool| -> Result<bool, ConstantsError> {
        let c = bigness_constants(BigUint::from(k), m2.clone(), m4.clone())?;
        let p = Ratio::from_integer(BigUint::one() << (2 * (k - 1)));
        Ok(if strong {
            p > c.k1 + Ratio::from_integer(BigUint::from(k))
        } else {
            c.k1 + c.k2 < p
        })
    };
    let least = |strong: bool| -> Result<u64, ConstantsError> {
        let mut t = 3;
        while t > 1 && holds(t - 1, strong)? {
            t -= 1;
        }
        Ok(t)
    };
    Ok(Thresholds { sum_below_power: least(false)?, power_minus_k1_above_k: least(true)? })
}

/// Whether the measured bouquets satisfy `M/(m+1)² > l·K²`.
pub fn conclusion_holds(big: &BigUint, small: &BigUint, l: &BigUint, k: &BigUint) -> bool {
    let m1 = small + 1u32;
    *big > l * k * k * &m1 * &m1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LadderConfig {
    pub n: usize,
    pub d: usize,
    /// Stand-in for the preservation-theorem depth; `n + d` when absent.
    pub m_star: Option<usize>,
    /// Digits allowed in an exact value.
    pub size_cap: u64,
    /// Cap for the finite-chain enumeration behind the exact prefix.
    pub enum_cap: usize,
}

impl LadderConfig {
    pub fn new(n: usize, d: usize) -> Self {
        LadderConfig { n, d, m_star: None, size_cap: DEFAULT_SIZE_CAP, enum_cap: theory::DEFAULT_CAP }
    }
}

/// A rational with its floor, in JSON as strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalJson {
    pub mode: String,
    pub value: String,
    pub floor: String,
}

/// `M₁ … M₃` from the finite-chain counts `|T_{n,3d}|` and `|T_{n,2d}|`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExactPrefix {
    #[serde(rename = "M1")]
    pub m1: Magnitude,
    #[serde(rename = "M2")]
    pub m2: Magnitude,
    #[serde(rename = "M3")]
    pub m3: Magnitude,
    #[serde(rename = "M4")]
    pub m4: Magnitude,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KStar {
    pub mode: String,
    pub value: String,
    /// `N₀² + 1`, a lower bound in every case.
    pub lower_bound: Magnitude,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[allow(non_snake_case)]
pub struct LadderReport {
    pub n: usize,
    pub d: usize,
    pub m_star: usize,
    pub M1: Magnitude,
    pub M2: Magnitude,
    pub M3: Magnitude,
    pub M4: Magnitude,
    pub n1: Magnitude,
    pub n2: Magnitude,
    pub n3: Magnitude,
    pub N0: Magnitude,
    pub N1: Magnitude,
    pub N2: Magnitude,
    pub N3: Magnitude,
    pub N4: Magnitude,
    pub N5: Magnitude,
    pub N6: Magnitude,
    pub l: Magnitude,
    pub Kstar: KStar,
    /// `None` when the finite-chain counts exceed the enumeration cap.
    pub exact_prefix: Option<ExactPrefix>,
    /// Whether `N₀ > N₁ > … > N₆` was proven.
    pub ordering_proven: bool,
    /// Bigness constants and `K₃` at `K = ⌊K*⌋` when `K*`, `M₁`, `M₂`, `M₄` are exact.
    pub at_kstar: Option<AtK>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[allow(non_snake_case)]
pub struct AtK {
    pub K: String,
    pub K1: RationalJson,
    pub K2: RationalJson,
    pub K3_statement: RationalJson,
    pub K3_proof: RationalJson,
    pub K3_default: String,
}

fn rational_json(r: &Ratio<BigUint>) -> RationalJson {
    RationalJson { mode: "exact".into(), value: r.to_string(), floor: r.floor().to_integer().to_string() }
}

impl LadderReport {
    pub fn ns(&self) -> [&Magnitude; 7] {
        [&self.N0, &self.N1, &self.N2, &self.N3, &self.N4, &self.N5, &self.N6]
    }
}

/// Least `K > N₀²` such that every `K' ≥ K` has
/// `2^⌊K'/(M₂²M₄)⌋ > l·K'²·(2M₁K'+1)²`, the lower bound `(*)` on
/// `M/(m+1)²` beating `l·K'²`. Within a block of constant floor the right side
/// grows, so only block ends matter; past block 6 the right side at most
/// doubles from one block end to the next, so one good block settles the rest.
fn kstar_exact(n0: &BigUint, m1: &BigUint, m2: &BigUint, m4: &BigUint, l: &BigUint, step_cap: u64) -> Option<BigUint> {
    let d = m2 * m2 * m4;
    let lower = n0 * n0 + 1u32;
    let block_ok = |j: u64| -> bool {
        let end = &d * BigUint::from(j + 1) - 1u32;
        let rhs = {
            let t = m1 * 2u32 * &end + 1u32;
            l * &end * &end * &t * &t
        };
        (BigUint::one() << j) > rhs
    };
    let j_low = (&lower / &d).to_u64()?;
    let start = j_low.max(6);
    // exponential then binary search over monotone blocks
    let mut hi = start;
    let mut steps = 0;
    while !block_ok(hi) {
        hi = hi.checked_mul(2)?.max(1);
        steps += 1;
        if steps > step_cap {
            return None;
        }
    }
    let mut lo = start;
    if !block_ok(lo) {
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if block_ok(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    } else {
        hi = lo;
    }
    // blocks below 6 are not covered by monotonicity; walk down
    let mut first = hi;
    while first > j_low && block_ok(first - 1) {
        first -= 1;
    }
    Some((d * BigUint::from(first)).max(lower))
}

/// Evaluates the constant ladder in order.
pub fn ladder(cfg: &LadderConfig) -> Result<LadderReport, ConstantsError> {
    if cfg.n == 0 || cfg.d == 0 {
        return Err(ConstantsError::Invalid("n and d must be at least 1".into()));
    }
    let ar = Arith::new(cfg.size_cap);
    let (n, d) = (cfg.n, cfg.d);
    let m_star = cfg.m_star.unwrap_or(n + d);
    let one = Magnitude::from_u64(1);
    let two = Magnitude::from_u64(2);

    let m1 = ar.theory_count_bound(n, 3 * d);
    let m2 = ar.theory_count_bound(n, 2 * d);
    let m3 = ar.add(&m1, &one);
    let m4 = ar.ramsey_upper(3, &7u64.into(), &m3)?;

    let n1 = ar.theory_count_bound(m_star, 2 * d + 1);
    let n2 = ar.theory_count_bound(m_star, 3 * d + 1);
    let n3 = ar.theory_count_bound(m_star, 4 * d + 1);
    let big_n6 = ar.add(&ar.max(&[two.clone(), n1.clone(), n2.clone(), n3.clone()]), &one);
    let big_n5 = ar.ramsey_upper(3, &32u64.into(), &big_n6)?;
    let big_n4 = ar.mul(&n1, &big_n5);
    let big_n3 = ar.mul(&two, &big_n4);
    let big_n2 = ar.ramsey_upper(2, &n3, &big_n3)?;
    let big_n1 = ar.ramsey_upper(3, &32u64.into(), &big_n2)?;
    let big_n0 = ar.mul(&n1, &big_n1);

    let twice = ar.add(&ar.mul(&two, &m1), &one);
    let l = ar.mul(&ar.mul(&ar.mul(&n2, &n2), &big_n0), &ar.mul(&twice, &twice));

    let lower = ar.add(&ar.mul(&big_n0, &big_n0), &one);
    let kstar_value = match (big_n0.exact(), m1.exact(), m2.exact(), m4.exact(), l.exact()) {
        (Some(a), Some(b), Some(c), Some(e), Some(f)) => kstar_exact(a, b, c, e, f, 4096),
        _ => None,
    };
    let kstar = match &kstar_value {
        Some(k) => KStar { mode: "exact".into(), value: k.to_string(), lower_bound: lower },
        None => KStar {
            mode: "symbolic".into(),
            value: format!(
                "least K > ({big_n0})^2 with 2^floor(K / (({m2})^2 * ({m4}))) > ({l}) * K^2 * (2 * ({m1}) * K + 1)^2 for all larger K"
            ),
            lower_bound: lower,
        },
    };

    let exact_prefix = match (
        theory::enumerate_fin(n, 3 * d, cfg.enum_cap),
        theory::enumerate_fin(n, 2 * d, cfg.enum_cap),
    ) {
        (Ok(a), Ok(b)) => {
            let pm1 = Magnitude::from_u64(a.len() as u64);
            let pm3 = ar.add(&pm1, &one);
            Some(ExactPrefix {
                m4: ar.ramsey_upper(3, &7u64.into(), &pm3)?,
                m2: Magnitude::from_u64(b.len() as u64),
                m1: pm1,
                m3: pm3,
            })
        }
        (Err(TheoryError::CapExceeded { .. }), _) | (_, Err(TheoryError::CapExceeded { .. })) => None,
        (Err(e), _) | (_, Err(e)) => return Err(e.into()),
    };

    let at_kstar = match (&kstar_value, m1.exact(), m2.exact(), m4.exact()) {
        (Some(k), Some(a), Some(b), Some(c)) => {
            let bc = bigness_constants(k.clone(), b.clone(), c.clone())?;
            let k3 = k3_variants(a.clone(), &bc);
            Some(AtK {
                K: k.to_string(),
                K1: rational_json(&bc.k1),
                K2: rational_json(&bc.k2),
                K3_statement: rational_json(&k3.statement),
                K3_proof: rational_json(&k3.proof),
                K3_default: k3.default_value().to_string(),
            })
        }
        _ => None,
    };

    let ns = [&big_n0, &big_n1, &big_n2, &big_n3, &big_n4, &big_n5, &big_n6];
    let ordering_proven = ns.windows(2).all(|w| w[0].gt(w[1]));
    Ok(LadderReport {
        n,
        d,
        m_star,
        M1: m1,
        M2: m2,
        M3: m3,
        M4: m4,
        n1,
        n2,
        n3,
        N0: big_n0,
        N1: big_n1,
        N2: big_n2,
        N3: big_n3,
        N4: big_n4,
        N5: big_n5,
        N6: big_n6,
        l,
        Kstar: kstar,
        exact_prefix,
        ordering_proven,
        at_kstar,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(m: &Magnitude) -> u64 {
        m.exact().unwrap().to_u64().unwrap()
    }

    #[test]
    fn ramsey_degenerate() {
        assert_eq!(ex(&ramsey_upper(2, 1, 7).unwrap()), 7);
        assert_eq!(ex(&ramsey_upper(3, 1, 7).unwrap()), 7);
        assert_eq!(ex(&ramsey_upper(2, 5, 1).unwrap()), 1);
        assert_eq!(ex(&ramsey_upper(2, 5, 2).unwrap()), 2);
        assert_eq!(ex(&ramsey_upper(3, 5, 3).unwrap()), 3);
        assert!(ramsey_upper(4, 2, 3).is_err());
        assert!(ramsey_upper(2, 0, 3).is_err());
    }

    #[test]
    fn ramsey_pair_bound_values() {
        assert_eq!(ex(&ramsey_upper(2, 2, 3).unwrap()), 64);
        assert!(ex(&ramsey_upper(2, 2, 3).unwrap()) >= 6);
        assert_eq!(ex(&ramsey_upper(2, 3, 3).unwrap()), 3u64.pow(9));
    }

    #[test]
    fn ramsey_triple_bound_is_symbolic_when_huge() {
        assert_eq!(ex(&ramsey_upper(3, 2, 3).unwrap()), 3);
        // 2 * 2^(2^16)
        let ar = Arith::new(30_000);
        let r = ar.ramsey_upper(3, &2u64.into(), &4u64.into()).unwrap();
        assert_eq!(r.exact().unwrap(), &(BigUint::from(2u32) << 65536));
        let r = ramsey_upper(3, 2, 4).unwrap();
        assert_eq!(r.to_string(), "2 * (2^65536)");
        let r = ramsey_upper(3, 7, 100).unwrap();
        assert!(!r.is_exact());
        assert!(r.gt(&Magnitude::from_u64(u64::MAX)));
    }

    #[test]
    fn exact_search_small() {
        assert_eq!(ramsey_exact(2, 3, 8, 1_000_000).unwrap(), Some(6));
        assert_eq!(ramsey_exact(1, 4, 8, 1_000).unwrap(), Some(4));
        assert_eq!(ramsey_exact(3, 2, 8, 1_000).unwrap(), Some(2));
        assert_eq!(ramsey_exact(2, 1, 8, 1_000).unwrap(), Some(1));
        assert_eq!(ramsey_exact(2, 3, 5, 1_000_000).unwrap(), None);
        assert_eq!(ramsey_exact(3, 3, 17, 1000), Err(ConstantsError::WorkCap(1000)));
    }

    #[test]
    fn bigness_unit_denominators() {
        let c = bigness_constants(5u64, 1, 1).unwrap();
        assert_eq!(c.k1, Ratio::from_integer(10));
        assert_eq!(c.k2, Ratio::from_integer(5));
        let c = bigness_constants(7u64, 2, 3).unwrap();
        assert_eq!(c.k1, Ratio::new(35, 4));
        assert_eq!(c.k1_floor, 8);
        assert_eq!(c.k2, Ratio::new(7, 12));
        assert_eq!(c.k2_floor, 0);
        let k3 = k3_variants(3u64, &c);
        assert!(k3.proof > k3.statement);
        assert_eq!(k3.default_value(), &k3.proof);
        let k3 = k3_variants(1u64, &c);
        assert_eq!(k3.proof, k3.statement);
    }

    #[test]
    fn thresholds() {
        let one = BigUint::one();
        let t = bigness_thresholds(&one, &one).unwrap();
        assert_eq!(t.sum_below_power, 3);
        let t = bigness_thresholds(&BigUint::from(2u32), &one).unwrap();
        assert_eq!(t.sum_below_power, 2);
    }

    #[test]
    fn theory_bounds_dominate_enumeration() {
        let ar = Arith::default();
        for n in 0..=1 {
            for l in 0..=3 {
                let count = theory::enumerate_fin(n, l, theory::DEFAULT_CAP).unwrap().len() as u64;
                assert!(ar.theory_count_bound(n, l).ge(&Magnitude::from_u64(count)), "{n} {l}");
            }
        }
        assert_eq!(ex(&ar.theory_count_bound(0, 3)), 1 << 18);
    }

    #[test]
    fn comparator_is_sound_on_towers() {
        let ar = Arith::new(20);
        let two = Magnitude::from_u64(2);
        let a = ar.pow(&two, &Magnitude::from_u64(1000));
        let b = ar.pow(&two, &a);
        assert!(!a.is_exact());
        assert!(b.gt(&a));
        assert!(!a.gt(&b));
        assert!(ar.mul(&two, &b).gt(&b));
        assert_eq!(a.compare(&a), Some(Ordering::Equal));
        let c = ar.pow(&Magnitude::from_u64(3), &Magnitude::from_u64(1000));
        assert_eq!(a.compare(&c), None);
        assert_eq!(ar.max(&[a.clone(), b.clone()]), b);
    }

    #[test]
    fn ladder_relations() {
        let r = ladder(&LadderConfig::new(1, 1)).unwrap();
        assert_eq!(r.M3, Arith::default().add(&r.M1, &Magnitude::from_u64(1)));
        assert_eq!(r.N3, Arith::default().mul(&Magnitude::from_u64(2), &r.N4));
        assert!(r.ordering_proven);
        let p = r.exact_prefix.as_ref().unwrap();
        assert_eq!(ex(&p.m1), 11727);
        assert_eq!(ex(&p.m3), 11728);
        assert_eq!(ex(&p.m2), 180);
        assert!(r.M1.ge(&p.m1));
        assert_eq!(r.Kstar.mode, "symbolic");
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["N6"]["mode"], "symbolic");
        assert_eq!(json["exact_prefix"]["M1"]["value"], "11727");
    }

    #[test]
    fn kstar_search_agrees_with_scan() {
        let (n0, m1, m2, m4, l) = (BigUint::from(3u32), BigUint::from(2u32), BigUint::from(1u32), BigUint::from(2u32), BigUint::from(5u32));
        let k = kstar_exact(&n0, &m1, &m2, &m4, &l, 64).unwrap();
        let d = 2u64;
        let ok = |k: u64| (BigUint::one() << (k / d)) > &l * BigUint::from(k * k) * BigUint::from((4 * k + 1) * (4 * k + 1));
        let k = k.to_u64().unwrap();
        assert!(k > 9);
        assert!((k..k + 2000).all(ok));
        assert!(k == 10 || !ok(k - 1));
    }
}
