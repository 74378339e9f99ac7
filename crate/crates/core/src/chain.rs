//! Finite chains and the set-level operations used throughout the crate.
//!
//! A chain of length `n` has carrier `0..n` ordered by `<`. Subsets are stored
//! as `u64` bit masks, so chains are limited to [`MAX_CHAIN_LEN`] positions.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest chain length representable with `u64` position masks.
pub const MAX_CHAIN_LEN: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChainError {
    #[error("chain length {0} exceeds the supported maximum of {MAX_CHAIN_LEN}")]
    TooLong(usize),
    #[error("position {pos} is outside a chain of length {len}")]
    PositionOutOfRange { pos: usize, len: usize },
    #[error("segment [{lo}, {hi}) is not within a chain of length {len}")]
    SegmentOutOfRange { lo: usize, hi: usize, len: usize },
    #[error("arity mismatch: {0} vs {1}")]
    ArityMismatch(usize, usize),
    #[error("invalid block partition: {0}")]
    BadPartition(String),
}

/// Mask with the lowest `len` bits set.
#[inline]
pub fn full_mask(len: usize) -> u64 {
    if len >= 64 {
        u64::MAX
    } else {
        (1u64 << len) - 1
    }
}

/// Mask of the half-open interval `[lo, hi)`.
#[inline]
pub fn range_mask(lo: usize, hi: usize) -> u64 {
    if hi <= lo {
        0
    } else {
        full_mask(hi) & !full_mask(lo)
    }
}

/// Iterates the members of a mask in increasing order.
pub fn mask_members(mask: u64) -> impl Iterator<Item = usize> {
    let mut rest = mask;
    std::iter::from_fn(move || {
        if rest == 0 {
            None
        } else {
            let i = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            Some(i)
        }
    })
}

/// A finite linear order with carrier `0..length`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Chain {
    pub length: usize,
}

impl Chain {
    pub fn new(length: usize) -> Result<Self, ChainError> {
        if length > MAX_CHAIN_LEN {
            return Err(ChainError::TooLong(length));
        }
        Ok(Chain { length })
    }

    pub fn len(&self) -> usize {
        self.length
    }

    pub fn is_empty(&self) -> bool {
        self.length == 0
    }

    pub fn mask(&self) -> u64 {
        full_mask(self.length)
    }

    pub fn whole(&self) -> Segment {
        Segment { lo: 0, hi: self.length }
    }

    /// `C + D`: a copy of `other` placed after `self`.
    pub fn concat(&self, other: &Chain) -> Result<Chain, ChainError> {
        Chain::new(self.length + other.length)
    }

    /// The Dedekind cut `([0,p), [p,len))`.
    pub fn cut(&self, p: usize) -> Result<(Segment, Segment), ChainError> {
        if p > self.length {
            return Err(ChainError::PositionOutOfRange { pos: p, len: self.length });
        }
        Ok((Segment { lo: 0, hi: p }, Segment { lo: p, hi: self.length }))
    }

    /// All Dedekind cuts, from `p = 0` to `p = len`.
    pub fn cuts(&self) -> impl Iterator<Item = (Segment, Segment)> + '_ {
        (0..=self.length).map(move |p| (Segment { lo: 0, hi: p }, Segment { lo: p, hi: self.length }))
    }

    /// Number of subsets of the carrier, `2^len`.
    pub fn subset_count(&self) -> u128 {
        1u128 << self.length
    }
}

/// A half-open convex segment `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Segment {
    pub lo: usize,
    pub hi: usize,
}

impl Segment {
    pub fn new(lo: usize, hi: usize) -> Result<Self, ChainError> {
        if lo > hi {
            return Err(ChainError::SegmentOutOfRange { lo, hi, len: hi });
        }
        Ok(Segment { lo, hi })
    }

    pub fn len(&self) -> usize {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi == self.lo
    }

    pub fn mask(&self) -> u64 {
        range_mask(self.lo, self.hi)
    }

    pub fn check_within(&self, chain: &Chain) -> Result<(), ChainError> {
        if self.lo > self.hi || self.hi > chain.length {
            return Err(ChainError::SegmentOutOfRange { lo: self.lo, hi: self.hi, len: chain.length });
        }
        Ok(())
    }

    pub fn contains_segment(&self, other: &Segment) -> bool {
        other.is_empty() || (self.lo <= other.lo && other.hi <= self.hi)
    }

    /// The segment viewed as a chain of its own.
    pub fn as_chain(&self) -> Chain {
        Chain { length: self.len() }
    }
}

impl Serialize for Segment {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.lo, self.hi].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Segment {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [lo, hi] = <[usize; 2]>::deserialize(d)?;
        Segment::new(lo, hi).map_err(serde::de::Error::custom)
    }
}

/// A tuple of subsets of a chain, one mask per component.
///
/// The ambient chain is not stored; [`SetTuple::check_over`] validates a tuple
/// against a particular chain.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct SetTuple {
    sets: Vec<u64>,
}

impl SetTuple {
    pub fn from_masks(sets: Vec<u64>) -> Self {
        SetTuple { sets }
    }

    /// The all-empty tuple of the given arity.
    pub fn empty(arity: usize) -> Self {
        SetTuple { sets: vec![0; arity] }
    }

    pub fn from_lists<I, J>(lists: I) -> Result<Self, ChainError>
    where
        I: IntoIterator<Item = J>,
        J: IntoIterator<Item = usize>,
    {
        let mut sets = Vec::new();
        for list in lists {
            let mut m = 0u64;
            for p in list {
                if p >= MAX_CHAIN_LEN {
                    return Err(ChainError::PositionOutOfRange { pos: p, len: MAX_CHAIN_LEN });
                }
                m |= 1 << p;
            }
            sets.push(m);
        }
        Ok(SetTuple { sets })
    }

    pub fn arity(&self) -> usize {
        self.sets.len()
    }

    pub fn masks(&self) -> &[u64] {
        &self.sets
    }

    pub fn into_masks(self) -> Vec<u64> {
        self.sets
    }

    pub fn get(&self, i: usize) -> u64 {
        self.sets[i]
    }

    pub fn to_lists(&self) -> Vec<Vec<usize>> {
        self.sets.iter().map(|&m| mask_members(m).collect()).collect()
    }

    pub fn check_over(&self, chain: &Chain) -> Result<(), ChainError> {
        let outside = !chain.mask();
        for &m in &self.sets {
            if m & outside != 0 {
                let pos = (m & outside).trailing_zeros() as usize;
                return Err(ChainError::PositionOutOfRange { pos, len: chain.length });
            }
        }
        Ok(())
    }

    /// `Ā⌢B`: the tuple extended by one more set.
    pub fn extended(&self, extra: u64) -> SetTuple {
        let mut sets = Vec::with_capacity(self.sets.len() + 1);
        sets.extend_from_slice(&self.sets);
        sets.push(extra);
        SetTuple { sets }
    }

    /// Componentwise concatenation of tuples, `(Ā, B̄)`.
    pub fn join(&self, other: &SetTuple) -> SetTuple {
        let mut sets = self.sets.clone();
        sets.extend_from_slice(&other.sets);
        SetTuple { sets }
    }

    /// Drops the trailing components so that `arity` remain.
    pub fn truncated(&self, arity: usize) -> SetTuple {
        SetTuple { sets: self.sets[..arity.min(self.sets.len())].to_vec() }
    }

    /// `Ā ∪ B̄` where `B̄` lives on a chain placed after the `left_len` positions of `Ā`'s chain.
    pub fn concat(&self, left_len: usize, other: &SetTuple) -> Result<SetTuple, ChainError> {
        if self.arity() != other.arity() {
            return Err(ChainError::ArityMismatch(self.arity(), other.arity()));
        }
        let mut sets = Vec::with_capacity(self.arity());
        for (&a, &b) in self.sets.iter().zip(&other.sets) {
            if b != 0 && (64 - b.leading_zeros() as usize) + left_len > MAX_CHAIN_LEN {
                return Err(ChainError::TooLong(left_len + 64 - b.leading_zeros() as usize));
            }
            let shifted = if left_len >= 64 { 0 } else { b << left_len };
            sets.push(a | shifted);
        }
        Ok(SetTuple { sets })
    }

    /// Componentwise intersection with `seg`, re-indexed to local coordinates.
    pub fn restrict(&self, seg: &Segment) -> SetTuple {
        let m = seg.mask();
        SetTuple { sets: self.sets.iter().map(|&a| (a & m) >> seg.lo).collect() }
    }

    /// Componentwise intersection with `seg`, keeping global coordinates.
    pub fn mask_to(&self, seg: &Segment) -> SetTuple {
        let m = seg.mask();
        SetTuple { sets: self.sets.iter().map(|&a| a & m).collect() }
    }

    /// Whether the two tuples agree componentwise on the positions in `mask`.
    pub fn coincide_on(&self, other: &SetTuple, mask: u64) -> bool {
        self.sets.len() == other.sets.len()
            && self.sets.iter().zip(&other.sets).all(|(&a, &b)| (a ^ b) & mask == 0)
    }

    /// Maps position `i` to `len - 1 - i` in every component (the inverse chain).
    pub fn reverse(&self, chain: &Chain) -> SetTuple {
        let len = chain.length;
        SetTuple {
            sets: self
                .sets
                .iter()
                .map(|&a| {
                    if len == 0 {
                        0
                    } else {
                        a.reverse_bits() >> (64 - len)
                    }
                })
                .collect(),
        }
    }
}

impl fmt::Display for SetTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, list) in self.to_lists().iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{{")?;
            for (j, p) in list.iter().enumerate() {
                if j > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{p}")?;
            }
            write!(f, "}}")?;
        }
        write!(f, ")")
    }
}

impl Serialize for SetTuple {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_lists().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SetTuple {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let lists = Vec::<Vec<usize>>::deserialize(d)?;
        SetTuple::from_lists(lists).map_err(serde::de::Error::custom)
    }
}

/// Cut points `0 = α₀ < α₁ < … < α_k = len` splitting a chain into nonempty blocks.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockPartition {
    cutpoints: Vec<usize>,
}

impl BlockPartition {
    pub fn new(cutpoints: Vec<usize>) -> Result<Self, ChainError> {
        if cutpoints.len() < 2 {
            return Err(ChainError::BadPartition("need at least the points 0 and len".into()));
        }
        if cutpoints[0] != 0 {
            return Err(ChainError::BadPartition("first cut point must be 0".into()));
        }
        if cutpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ChainError::BadPartition("cut points must be strictly increasing".into()));
        }
        if *cutpoints.last().unwrap() > MAX_CHAIN_LEN {
            return Err(ChainError::TooLong(*cutpoints.last().unwrap()));
        }
        Ok(BlockPartition { cutpoints })
    }

    /// The single-block partition of `chain`. Fails on the empty chain, which has no blocks.
    pub fn trivial(chain: &Chain) -> Result<Self, ChainError> {
        BlockPartition::new(vec![0, chain.length])
    }

    pub fn cutpoints(&self) -> &[usize] {
        &self.cutpoints
    }

    pub fn chain_len(&self) -> usize {
        *self.cutpoints.last().unwrap()
    }

    pub fn block_count(&self) -> usize {
        self.cutpoints.len() - 1
    }

    pub fn block(&self, k: usize) -> Segment {
        Segment { lo: self.cutpoints[k], hi: self.cutpoints[k + 1] }
    }

    pub fn blocks(&self) -> impl Iterator<Item = Segment> + '_ {
        self.cutpoints.windows(2).map(|w| Segment { lo: w[0], hi: w[1] })
    }

    pub fn check_over(&self, chain: &Chain) -> Result<(), ChainError> {
        if self.chain_len() != chain.length {
            return Err(ChainError::BadPartition(format!(
                "partition covers {} positions but the chain has {}",
                self.chain_len(),
                chain.length
            )));
        }
        Ok(())
    }
}

impl Serialize for BlockPartition {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.cutpoints.serialize(s)
    }
}

impl<'de> Deserialize<'de> for BlockPartition {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        BlockPartition::new(Vec::<usize>::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

/// Blockwise shuffle: blocks whose index is in `chosen` come from `x`, the rest from `y`.
pub fn shuffle(
    chain: &Chain,
    x: &SetTuple,
    y: &SetTuple,
    partition: &BlockPartition,
    chosen: &[usize],
) -> Result<SetTuple, ChainError> {
    if x.arity() != y.arity() {
        return Err(ChainError::ArityMismatch(x.arity(), y.arity()));
    }
    partition.check_over(chain)?;
    x.check_over(chain)?;
    y.check_over(chain)?;
    let mut from_x = 0u64;
    for &k in chosen {
        if k < partition.block_count() {
            from_x |= partition.block(k).mask();
        }
    }
    let from_y = chain.mask() & !from_x;
    Ok(SetTuple::from_masks(
        x.masks().iter().zip(y.masks()).map(|(&a, &b)| (a & from_x) | (b & from_y)).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tuple(lists: &[&[usize]]) -> SetTuple {
        SetTuple::from_lists(lists.iter().map(|l| l.iter().copied())).unwrap()
    }

    #[test]
    fn concat_lengths() {
        let c = Chain::new(2).unwrap();
        assert_eq!(c.concat(&Chain::new(3).unwrap()).unwrap().len(), 5);
        assert_eq!(Chain::new(0).unwrap().concat(&Chain::new(4).unwrap()).unwrap().len(), 4);
        assert!(Chain::new(40).unwrap().concat(&Chain::new(40).unwrap()).is_err());
    }

    #[test]
    fn concat_shifts_right_tuple() {
        let a = tuple(&[&[0], &[]]);
        let b = tuple(&[&[], &[0]]);
        assert_eq!(a.concat(1, &b).unwrap(), tuple(&[&[0], &[1]]));
    }

    #[test]
    fn restrict_examples() {
        let t = tuple(&[&[0, 3], &[1]]);
        assert_eq!(t.restrict(&Segment::new(0, 2).unwrap()), tuple(&[&[0], &[1]]));
        assert_eq!(t.restrict(&Segment::new(0, 4).unwrap()), t);
        assert_eq!(t.restrict(&Segment::new(2, 4).unwrap()), tuple(&[&[1], &[]]));
    }

    #[test]
    fn cut_examples() {
        let c = Chain::new(4).unwrap();
        let seg = |lo, hi| Segment { lo, hi };
        assert_eq!(c.cut(0).unwrap(), (seg(0, 0), seg(0, 4)));
        assert_eq!(c.cut(4).unwrap(), (seg(0, 4), seg(4, 4)));
        assert_eq!(c.cut(2).unwrap(), (seg(0, 2), seg(2, 4)));
        assert!(matches!(c.cut(5), Err(ChainError::PositionOutOfRange { .. })));
    }

    #[test]
    fn shuffle_examples() {
        let c = Chain::new(4).unwrap();
        let e = BlockPartition::new(vec![0, 2, 4]).unwrap();
        let x = tuple(&[&[0, 1]]);
        let y = tuple(&[&[2, 3]]);
        assert_eq!(shuffle(&c, &x, &y, &e, &[0, 1]).unwrap(), x);
        assert_eq!(shuffle(&c, &x, &y, &e, &[]).unwrap(), y);
        assert_eq!(shuffle(&c, &x, &y, &e, &[0]).unwrap(), tuple(&[&[0, 1, 2, 3]]));
    }

    #[test]
    fn shuffle_errors() {
        let c = Chain::new(4).unwrap();
        let e = BlockPartition::new(vec![0, 2, 4]).unwrap();
        let x = tuple(&[&[0]]);
        let y = tuple(&[&[0], &[1]]);
        assert!(matches!(shuffle(&c, &x, &y, &e, &[0]), Err(ChainError::ArityMismatch(1, 2))));
        let short = BlockPartition::new(vec![0, 3]).unwrap();
        assert!(matches!(shuffle(&c, &x, &x, &short, &[0]), Err(ChainError::BadPartition(_))));
    }

    #[test]
    fn partition_validation() {
        assert!(BlockPartition::new(vec![1, 3]).is_err());
        assert!(BlockPartition::new(vec![0, 2, 2]).is_err());
        assert!(BlockPartition::new(vec![0]).is_err());
        assert_eq!(BlockPartition::new(vec![0, 5]).unwrap().block_count(), 1);
    }

    #[test]
    fn reverse_is_an_involution() {
        let c = Chain::new(5).unwrap();
        let t = tuple(&[&[0, 1], &[4]]);
        assert_eq!(t.reverse(&c), tuple(&[&[3, 4], &[0]]));
        assert_eq!(t.reverse(&c).reverse(&c), t);
    }

    #[test]
    fn json_shapes() {
        let t = tuple(&[&[3, 0], &[]]);
        assert_eq!(serde_json::to_string(&t).unwrap(), "[[0,3],[]]");
        assert_eq!(serde_json::to_string(&Chain::new(3).unwrap()).unwrap(), r#"{"length":3}"#);
        assert_eq!(serde_json::to_string(&Segment { lo: 1, hi: 3 }).unwrap(), "[1,3]");
        let p: BlockPartition = serde_json::from_str("[0,2,5]").unwrap();
        assert_eq!(p.block_count(), 2);
        assert!(serde_json::from_str::<BlockPartition>("[1,2]").is_err());
    }
}
