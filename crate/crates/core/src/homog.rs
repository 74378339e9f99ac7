//! Semi-homogeneous sets for pair colourings, their greedy extraction, and the
//! search for block sequences along which partial theories are constant.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{BlockPartition, Chain, ChainError, SetTuple};
use crate::theory::{self, Theory, TheoryError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HomogError {
    #[error("index {index} is outside a domain of size {size}")]
    OutOfDomain { index: usize, size: usize },
    #[error("colour {color} exceeds the maximum {c}")]
    BadColor { color: usize, c: usize },
    #[error("missing colour for pair ({0}, {1})")]
    MissingPair(usize, usize),
    #[error("malformed pair key `{0}`")]
    BadKey(String),
    #[error("domain of size {size} is too small: need more than {needed}")]
    TooSmall { size: usize, needed: usize },
    #[error("greedy extraction ran out of candidates after {found} of {wanted} elements")]
    GreedyFailed { found: usize, wanted: usize },
    #[error("need at least 2 blocks, got {0}")]
    TooFewBlocks(usize),
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error(transparent)]
    Chain(#[from] ChainError),
}

/// A colouring `f: [0..size]² → {0, …, c}` of increasing pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairColoring {
    size: usize,
    c: usize,
    colors: Vec<usize>,
}

fn tri(i: usize, j: usize) -> usize {
    j * (j - 1) / 2 + i
}

impl PairColoring {
    pub fn from_fn(size: usize, c: usize, mut f: impl FnMut(usize, usize) -> usize) -> Result<Self, HomogError> {
        let mut colors = Vec::with_capacity(size * size.saturating_sub(1) / 2);
        for j in 0..size {
            for i in 0..j {
                let color = f(i, j);
                if color > c {
                    return Err(HomogError::BadColor { color, c });
                }
                colors.push(color);
            }
        }
        Ok(PairColoring { size, c, colors })
    }

    pub fn constant(size: usize, c: usize, color: usize) -> Result<Self, HomogError> {
        PairColoring::from_fn(size, c, |_, _| color)
    }

    /// Uniformly random colours from a seeded generator.
    pub fn random(size: usize, c: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PairColoring::from_fn(size, c, |_, _| rng.gen_range(0..=c)).expect("colours in range")
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn c(&self) -> usize {
        self.c
    }

    /// Colour of `{i, j}`, `i ≠ j`.
    pub fn get(&self, i: usize, j: usize) -> usize {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.colors[tri(a, b)]
    }

    fn check(&self, t: &[usize]) -> Result<(), HomogError> {
        match t.iter().find(|&&i| i >= self.size) {
            Some(&index) => Err(HomogError::OutOfDomain { index, size: self.size }),
            None => Ok(()),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RawColoring {
    size: usize,
    c: usize,
    colors: BTreeMap<String, usize>,
}

impl Serialize for PairColoring {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut colors = BTreeMap::new();
        for j in 0..self.size {
            for i in 0..j {
                colors.insert(format!("{i},{j}"), self.get(i, j));
            }
        }
        RawColoring { size: self.size, c: self.c, colors }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for PairColoring {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawColoring::deserialize(d)?;
        from_raw(raw).map_err(serde::de::Error::custom)
    }
}

fn from_raw(raw: RawColoring) -> Result<PairColoring, HomogError> {
    let mut table = BTreeMap::new();
    for (key, color) in &raw.colors {
        let (a, b) = key.split_once(',').ok_or_else(|| HomogError::BadKey(key.clone()))?;
        let parse = |s: &str| s.trim().parse::<usize>().map_err(|_| HomogError::BadKey(key.clone()));
        let (i, j) = (parse(a)?, parse(b)?);
        if i >= j {
            return Err(HomogError::BadKey(key.clone()));
        }
        if j >= raw.size {
            return Err(HomogError::OutOfDomain { index: j, size: raw.size });
        }
        table.insert((i, j), *color);
    }
    let mut missing = None;
    let f = PairColoring::from_fn(raw.size, raw.c, |i, j| match table.get(&(i, j)) {
        Some(&c) => c,
        None => {
            missing.get_or_insert((i, j));
            0
        }
    })?;
    match missing {
        Some((i, j)) => Err(HomogError::MissingPair(i, j)),
        None => Ok(f),
    }
}

/// Right semi-homogeneity of `t` inside `ambient`: for `i < i*` in `t`, the
/// colour `f(i, i*)` appears at least `k` times among `f(i, j)`, `j > i` in `ambient`.
pub fn is_right_sh_in(f: &PairColoring, ambient: &[usize], t: &[usize], k: usize) -> Result<bool, HomogError> {
    f.check(ambient)?;
    f.check(t)?;
    let mut t = t.to_vec();
    t.sort_unstable();
    t.dedup();
    for (a, &i) in t.iter().enumerate() {
        for &istar in &t[a + 1..] {
            let color = f.get(i, istar);
            let count = ambient.iter().filter(|&&j| j > i && f.get(i, j) == color).count();
            if count < k {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Left semi-homogeneity of `t` inside `ambient`: for `i < i*` in `t`, the
/// colour `f(i, i*)` appears at least `k` times among `f(j, i*)`, `j < i*` in `ambient`.
pub fn is_left_sh_in(f: &PairColoring, ambient: &[usize], t: &[usize], k: usize) -> Result<bool, HomogError> {
    f.check(ambient)?;
    f.check(t)?;
    let mut t = t.to_vec();
    t.sort_unstable();
    t.dedup();
    for (a, &i) in t.iter().enumerate() {
        for &istar in &t[a + 1..] {
            let color = f.get(i, istar);
            let count = ambient.iter().filter(|&&j| j < istar && f.get(j, istar) == color).count();
            if count < k {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn domain(f: &PairColoring) -> Vec<usize> {
    (0..f.size).collect()
}

pub fn is_right_sh(f: &PairColoring, t: &[usize], k: usize) -> Result<bool, HomogError> {
    is_right_sh_in(f, &domain(f), t, k)
}

pub fn is_left_sh(f: &PairColoring, t: &[usize], k: usize) -> Result<bool, HomogError> {
    is_left_sh_in(f, &domain(f), t, k)
}

/// Both right and left semi-homogeneous in the whole domain.
pub fn is_sh(f: &PairColoring, t: &[usize], k: usize) -> Result<bool, HomogError> {
    Ok(is_right_sh(f, t, k)? && is_left_sh(f, t, k)?)
}

/// Greedy from one end of `pool` (sorted ascending). With `from_left`, pick the
/// minimum and keep the later survivors whose colour with it recurs at least
/// `k` times among later survivors; otherwise the mirror image.
fn greedy(f: &PairColoring, pool: &[usize], k: usize, n: usize, from_left: bool) -> Result<Vec<usize>, HomogError> {
    let mut cur: Vec<usize> = pool.to_vec();
    if !from_left {
        cur.reverse();
    }
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let Some((&i0, rest)) = cur.split_first() else {
            return Err(HomogError::GreedyFailed { found: out.len(), wanted: n });
        };
        out.push(i0);
        let mut counts = vec![0usize; f.c + 1];
        for &j in rest {
            counts[f.get(i0, j)] += 1;
        }
        cur = rest.iter().copied().filter(|&j| counts[f.get(i0, j)] >= k).collect();
    }
    out.sort_unstable();
    Ok(out)
}

/// A right semi-homogeneous subset of size `n`, requiring `size > (c+1)·n·k`.
pub fn extract_right(f: &PairColoring, k: usize, n: usize) -> Result<Vec<usize>, HomogError> {
    let needed = (f.c + 1) * n * k;
    if f.size <= needed {
        return Err(HomogError::TooSmall { size: f.size, needed });
    }
    greedy(f, &domain(f), k, n, true)
}

/// A left semi-homogeneous subset of size `n` (mirror of [`extract_right`]).
pub fn extract_left(f: &PairColoring, k: usize, n: usize) -> Result<Vec<usize>, HomogError> {
    let needed = (f.c + 1) * n * k;
    if f.size <= needed {
        return Err(HomogError::TooSmall { size: f.size, needed });
    }
    greedy(f, &domain(f), k, n, false)
}

/// A semi-homogeneous subset of size `n`, requiring `size > (c+1)²·n·k²`:
/// first a right semi-homogeneous set of size `(c+1)·n·k`, then a left
/// semi-homogeneous subset of it.
pub fn extract_two_sided(f: &PairColoring, k: usize, n: usize) -> Result<Vec<usize>, HomogError> {
    let needed = (f.c + 1) * (f.c + 1) * n * k * k;
    if f.size <= needed {
        return Err(HomogError::TooSmall { size: f.size, needed });
    }
    let stage = (f.c + 1) * n * k;
    let right = greedy(f, &domain(f), k, stage.max(n), true)?;
    greedy(f, &right, k, n, false)
}

/// A block sequence along which the partial theories are constant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuitableBlocks {
    pub partition: BlockPartition,
    /// Theory of every proper prefix `[0, α_i)`, `i ≥ 1`.
    pub prefix: Theory,
    /// Theory of every union of consecutive blocks `[α_i, α_j)`, `1 ≤ i < j`.
    pub block: Theory,
}

/// Searches cutpoints `0 = α_0 < α_1 < … < α_m = len` with `m ≥ k` such that
/// `Th^r` of `[0, α_i)` is the same for all `1 ≤ i < m` and `Th^r` of `[α_i, α_j)`
/// is the same for all `1 ≤ i < j ≤ m`. Prefers the most blocks, then the
/// lexicographically least cutpoints.
pub fn find_suitable_blocks(chain: &Chain, tuple: &SetTuple, r: usize, k: usize) -> Result<Option<SuitableBlocks>, HomogError> {
    if k < 2 {
        return Err(HomogError::TooFewBlocks(k));
    }
    tuple.check_over(chain)?;
    let len = chain.len();
    if k > len {
        return Ok(None);
    }
    // seg[a][b] = Th^r of [a, b), built by adding one point at a time
    let points: Vec<Theory> = (0..len)
        .map(|p| {
            let seg = crate::chain::Segment::new(p, p + 1).expect("nonempty");
            theory::th(r, &seg.as_chain(), &tuple.restrict(&seg))
        })
        .collect::<Result<_, _>>()?;
    let arity = tuple.arity();
    let mut seg: Vec<Vec<Theory>> = Vec::with_capacity(len + 1);
    for a in 0..=len {
        let mut row = Vec::with_capacity(len + 1 - a);
        let mut acc = Theory::neutral(r, arity);
        row.push(acc.clone());
        for p in points.iter().take(len).skip(a) {
            acc = theory::add(&acc, p)?;
            row.push(acc.clone());
        }
        seg.push(row);
    }
    let th_seg = |a: usize, b: usize| &seg[a][b - a];
    // colour of a pair a < b of cutpoints: (prefix theory at a, theory of [a, b))
    let color = |a: usize, b: usize| (th_seg(0, a), th_seg(a, b));

    fn search<'a>(
        cand: &[usize],
        start: usize,
        want: usize,
        chosen: &mut Vec<usize>,
        len: usize,
        color: &dyn Fn(usize, usize) -> (&'a Theory, &'a Theory),
        target: &mut Option<(&'a Theory, &'a Theory)>,
    ) -> bool {
        if chosen.len() == want {
            return true;
        }
        for idx in start..cand.len() {
            if cand.len() - idx < want - chosen.len() {
                break;
            }
            let p = cand[idx];
            let saved = *target;
            let mut ok = true;
            for &q in chosen.iter().chain(std::iter::once(&len)) {
                let (a, b) = if q < p { (q, p) } else { (p, q) };
                let col = color(a, b);
                match target {
                    None => *target = Some(col),
                    Some(t) if *t == col => {}
                    _ => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                chosen.push(p);
                if search(cand, idx + 1, want, chosen, len, color, target) {
                    return true;
                }
                chosen.pop();
            }
            *target = saved;
        }
        false
    }

    let cand: Vec<usize> = (1..len).collect();
    for blocks in (k..=len).rev() {
        let mut chosen = Vec::new();
        let mut target = None;
        if search(&cand, 0, blocks - 1, &mut chosen, len, &color, &mut target) {
            let (prefix, block) = target.expect("at least one pair when blocks >= 2");
            let mut cutpoints = vec![0];
            cutpoints.extend(&chosen);
            cutpoints.push(len);
            return Ok(Some(SuitableBlocks {
                partition: BlockPartition::new(cutpoints)?,
                prefix: prefix.clone(),
                block: block.clone(),
            }));
        }
    }
    Ok(None)
}
