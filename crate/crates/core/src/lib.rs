//! Exact arithmetic for traces of singular moduli.
//!
//! The crate computes the weighted trace
//! `t_f(d) = sum 2 f(j(E)) / #Aut(E)` over isomorphism classes of complex
//! elliptic curves whose endomorphism ring contains the imaginary quadratic
//! order of discriminant `-d`, and checks the divisibility
//! `alpha(d) * t_f(p^{2n} d) == 0 (mod p^n)` for primes `p` split in
//! `Q(sqrt(-d))`.
//!
//! Modules:
//! - [`qforms`]: reduced binary quadratic forms, sub-order decomposition,
//!   Kronecker symbol and the split-prime test
//! - [`qseries`]: exact integer q-expansions (eta, E4, E6, j) and Faber
//!   polynomials of the j-function
//! - [`fixed`]: fixed-point big-integer real/complex arithmetic with the
//!   transcendental kernels needed at CM points
//! - [`cmnum`]: high-precision evaluation of j at CM points and Hilbert class
//!   polynomials with checked integer rounding
//! - [`mod@trace`]: the trace engine (numeric and Newton-identity strategies)
//!   and the congruence verifier
//! - [`lemma`]: the roots-of-unity divisibility kernel
//!   `sum_{x^{p^n}=1} (x-1)^k ∈ p^n Z`

pub mod cmnum;
pub mod fixed;
pub mod lemma;
pub mod qforms;
pub mod qseries;
pub mod trace;

pub use cmnum::{hilbert_class_poly, required_bits, IntPolynomial, PrecisionContext};
pub use qforms::{
    alpha, fundamental_discriminant, is_split, reduced_forms, Discriminant, QuadForm,
};
pub use qseries::{faber_poly, JPolynomial, LaurentSeries};
pub use trace::{
    trace, verify_congruence, verify_grid, CongruenceReport, GridSpec, Strategy, TraceEngine,
    TraceResult,
};

use thiserror::Error;

/// Errors shared across the crate.
///
/// `InvalidArgument` variants indicate bad user input; the remaining variants
/// signal an internal cross-check failure (a bug in one of the pipelines, or a
/// precision model that could not be satisfied).
#[derive(Debug, Error)]
pub enum Error {
    #[error("{0} is not a valid discriminant: d must be positive and congruent to 0 or 3 mod 4")]
    InvalidDiscriminant(u64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("prime {p} divides d = {d}; the congruence hypotheses require p not dividing d")]
    PrimeDividesD { p: u64, d: u64 },
    #[error(
        "series evaluation would need {terms} terms (cap {cap}); requested precision is infeasible"
    )]
    PrecisionInfeasible { terms: usize, cap: usize },
    #[error("value failed integer rounding: distance to nearest integer is about 2^{dist_log2} (margin 2^-{margin_log2})")]
    RoundingFailure { dist_log2: i64, margin_log2: u32 },
    #[error("q-expansion self-check failed: E4^3/Delta and E6^2/Delta + 1728 disagree at exponent {exponent}")]
    SeriesSelfCheck { exponent: i64 },
    #[error("trace strategies disagree for d = {d}: numeric {numeric} vs exact {exact}")]
    StrategyDisagreement { d: u64, numeric: String, exact: String },
    #[error("internal check failed: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
