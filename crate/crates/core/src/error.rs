use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("effective-range function diverges at k = {k} fm^-1 (delta = 0 mod pi)")]
    KPole { k: f64 },

    #[error("model evaluates to a non-finite value at k = {k} fm^-1")]
    NonFinite { k: f64 },

    #[error("phase unwrap is ambiguous between k = {k0} and k = {k1} fm^-1; refine the grid")]
    UnwrapAmbiguity { k0: f64, k1: f64 },

    #[error("S-matrix pole on the real axis at k = {k} fm^-1")]
    RealAxisPole { k: f64 },

    #[error("infinite scattering length: constant term of the effective-range function is zero")]
    InfiniteScatteringLength,

    #[error("Taylor expansion of order {0} is too short, three terms are required")]
    InsufficientOrder(usize),

    #[error("ill-defined effective-range function: sum rule alpha = {alpha} has residual {residual:e}")]
    SumRuleViolation { alpha: u32, residual: f64 },

    #[error("degenerate pole set: {0}")]
    DegeneratePole(String),

    #[error("pole polynomial leading coefficient vanishes: expected degree {expected}, reduced degree {reduced}")]
    DegenerateDegree { expected: usize, reduced: usize },

    #[error("root finder did not converge for polynomial {coeffs:?}")]
    RootFinder { coeffs: Vec<f64> },

    #[error("ill-conditioned fit: {0}")]
    IllConditioned(String),

    #[error("unsupported pole: {0}")]
    UnsupportedPole(String),

    #[error("Wronskian vanishes at r = {r} fm: inadmissible pole configuration")]
    WronskianNode { r: f64 },

    #[error("unsupported singularity strength nu = {nu} (requires nu >= 0)")]
    UnsupportedSingularity { nu: i64 },

    #[error("inadmissible shift: |{num} / {den}| >= 1")]
    InadmissibleShift { num: f64, den: f64 },

    #[error("potential changes sign or is not decreasing in the window [{r0}, {r1}] fm")]
    NonMonotoneTail { r0: f64, r1: f64 },

    #[error("phase-shift matching failed at k = {k} fm^-1: {reason}")]
    Matching { k: f64, reason: String },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}
