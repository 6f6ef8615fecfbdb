use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised anywhere in the translation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("overshoot must be a fraction in (0,1), got {0}")]
    InvalidOvershoot(f64),
    #[error("damping ratio must lie in (0,1), got {0}")]
    InvalidDamping(f64),
    #[error("natural frequency must be positive, got {0}")]
    InvalidNaturalFrequency(f64),
    #[error("tolerance band must be a fraction in (0,1), got {0}")]
    InvalidBand(f64),
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("invalid transfer function: {0}")]
    InvalidTransferFunction(String),
    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),
    #[error("denominator vanishes at omega = {0} rad/s")]
    PoleOnGrid(f64),
    #[error("no roots: polynomial has degree 0")]
    NoRoots,
    #[error("pole at origin")]
    PoleAtOrigin,
    #[error("not bracketed: target {target} outside sample range [{lo}, {hi}]")]
    NotBracketed { target: f64, lo: f64, hi: f64 },
    #[error("samples are not strictly monotone")]
    NotMonotone,
    #[error("inverse interpolation diverged")]
    Diverged,
    #[error("cannot form 1/T': data value is zero at omega = {0} rad/s")]
    ZeroData(f64),
    #[error("degenerate fit - reduce orders (condition number {0:e})")]
    DegenerateFit(f64),
    #[error("all poles removed")]
    AllPolesRemoved,
    #[error("cannot simulate to steady state: {0}")]
    Unstable(String),
    #[error("step size violates accuracy contract: {step} > {limit}")]
    StepTooLarge { step: f64, limit: f64 },
    #[error("no rise: trace never reaches 90% of its final value")]
    NoRise,
    #[error("degenerate final value {0}")]
    DegenerateFinalValue(f64),
    #[error("unsettled trace")]
    UnsettledTrace,
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("empty wd table")]
    EmptyTable,
}

impl Error {
    /// True for errors caused by invalid user input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidOvershoot(_)
                | Error::InvalidDamping(_)
                | Error::InvalidNaturalFrequency(_)
                | Error::InvalidBand(_)
                | Error::InvalidParameter { .. }
                | Error::InvalidTransferFunction(_)
                | Error::InvalidGrid(_)
                | Error::Parse { .. }
                | Error::EmptyTable
        )
    }
}
