use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension {found} is not supported: {reason}")]
    Dimension { found: usize, reason: &'static str },

    #[error("exponent p = {0} is outside the admissible range")]
    Exponent(f64),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("{0} must be nonzero")]
    ZeroInput(&'static str),

    #[error("tensor violates the {constraint} constraint (defect {defect:e})")]
    Constraint { constraint: &'static str, defect: f64 },

    #[error("grid n = {n}, d = {d} rejected: {reason}")]
    Grid { n: usize, d: usize, reason: &'static str },

    #[error("field mean {0:e} is not negligible")]
    NonZeroMean(f64),

    #[error("denominator norm vanishes")]
    DegenerateDenominator,

    #[error("quadrature stopped at estimated error {achieved:e} (requested {requested:e})")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("{what} did not converge: {detail}")]
    NoConvergence { what: &'static str, detail: String },

    #[error("increment {node} violates |dg| = |df| (df = {df}, dg = {dg})")]
    Subordination { node: usize, df: f64, dg: f64 },

    #[error("tree depth {0} exceeds the cap of 20")]
    Depth(usize),

    #[error("no sign change of {what} found on [{lo}, {hi}]")]
    RootBracket { what: &'static str, lo: f64, hi: f64 },

    #[error("bump is not normalized: ||g||_p = {0}")]
    NotNormalized(f64),

    #[error("invalid Young function: {0}")]
    YoungFunction(String),

    #[error("Korn-Orlicz inequality fails for indices ({lower}, {upper})")]
    IndicesDegenerate { lower: f64, upper: f64 },

    #[error("value iteration increased a node by {0:e}")]
    NonMonotone(f64),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if p.is_finite() && p > 1.0 {
        Ok(())
    } else {
        Err(Error::Exponent(p))
    }
}
