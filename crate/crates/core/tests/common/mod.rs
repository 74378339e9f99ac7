#![allow(dead_code)]

use chaincalc::chain::{Chain, SetTuple};
use chaincalc::formula::{Formula, Var};
use rand::Rng;

/// Every tuple of the given arity over a chain, in mask order.
pub fn all_tuples(chain: &Chain, arity: usize) -> Vec<SetTuple> {
    let len = chain.len();
    let total = 1u64 << (len * arity);
    let comp = (1u64 << len) - 1;
    (0..total)
        .map(|code| SetTuple::from_masks((0..arity).map(|k| (code >> (k * len)) & comp).collect()))
        .collect()
}

fn random_var<R: Rng>(rng: &mut R, free: usize, bound: usize) -> Option<Var> {
    let total = free + bound;
    if total == 0 {
        return None;
    }
    let i = rng.gen_range(0..total);
    Some(if i < free { Var::Free(i) } else { Var::Bound(i - free) })
}

fn atom<R: Rng>(rng: &mut R, free: usize, bound: usize) -> Formula {
    let (Some(a), Some(b)) = (random_var(rng, free, bound), random_var(rng, free, bound)) else {
        return if rng.gen_bool(0.5) { Formula::True } else { Formula::False };
    };
    match rng.gen_range(0..4) {
        0 => Formula::Em(a),
        1 => Formula::Sing(a),
        2 => Formula::Sub(a, b),
        _ => Formula::Lt(a, b),
    }
}

/// A random formula over `free` free variables whose quantifier depth is at
/// most `depth`.
pub fn random_formula<R: Rng>(rng: &mut R, free: usize, depth: usize, size: usize) -> Formula {
    gen(rng, free, 0, depth, size)
}

fn gen<R: Rng>(rng: &mut R, free: usize, bound: usize, depth: usize, size: usize) -> Formula {
    if size <= 1 {
        return atom(rng, free, bound);
    }
    let choice = rng.gen_range(0..if depth > 0 { 8 } else { 6 });
    let half = size / 2;
    match choice {
        0 => gen(rng, free, bound, depth, size - 1).not(),
        1 => gen(rng, free, bound, depth, half).and(gen(rng, free, bound, depth, size - half)),
        2 => gen(rng, free, bound, depth, half).or(gen(rng, free, bound, depth, size - half)),
        3 => gen(rng, free, bound, depth, half).implies(gen(rng, free, bound, depth, size - half)),
        4 => gen(rng, free, bound, depth, half).iff(gen(rng, free, bound, depth, size - half)),
        5 => atom(rng, free, bound),
        6 => Formula::exists(gen(rng, free, bound + 1, depth - 1, size - 1)),
        _ => Formula::forall(gen(rng, free, bound + 1, depth - 1, size - 1)),
    }
}
