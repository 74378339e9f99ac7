//! Partial theories of monadic second-order logic over finite chains, and the
//! graph-interpretation toolkit built on them.

pub mod chain;
pub mod formula;
pub mod theory;
pub mod randomgraph;
pub mod homog;
pub mod interp;
pub mod constants;

use thiserror::Error;

/// Exact natural numbers used by the constant ladder.
pub type ExactInt = num_bigint::BigUint;
/// Exact non-negative rationals, such as the bigness constants.
pub type ExactRatio = num_rational::Ratio<num_bigint::BigUint>;

/// Any error raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Chain(#[from] chain::ChainError),
    #[error(transparent)]
    Parse(#[from] formula::ParseError),
    #[error(transparent)]
    Eval(#[from] formula::EvalError),
    #[error(transparent)]
    Theory(#[from] theory::TheoryError),
    #[error(transparent)]
    Graph(#[from] randomgraph::GraphError),
    #[error(transparent)]
    Homog(#[from] homog::HomogError),
    #[error(transparent)]
    Interp(#[from] interp::InterpError),
    #[error(transparent)]
    Constants(#[from] constants::ConstantsError),
}
