use thiserror::Error;

/// Errors raised by distribution construction, parameter validation, bound
/// computation, estimation and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no (value, weight) pairs were supplied")]
    EmptyInput,
    #[error("weight at position {index} is negative ({weight})")]
    NegativeWeight { index: usize, weight: f64 },
    #[error("total weight is zero")]
    ZeroTotalWeight,
    #[error("non-finite value or weight at position {index}")]
    NonFinite { index: usize },
    #[error("quantile level {0} is outside (0, 1)")]
    GammaOutOfRange(f64),
    #[error("invalid treatment sensitivity pair ({lower}, {upper}): need 0 <= lower <= 1 <= upper < inf")]
    InvalidLambda { lower: f64, upper: f64 },
    #[error("invalid outcome sensitivity pair ({lower}, {upper}): need 0 <= lower <= 1 <= upper")]
    InvalidGamma { lower: f64, upper: f64 },
    #[error("unbounded upper outcome parameter requires lower parameter 0, got {0}")]
    UnboundedGammaWithNonzeroGamma1(f64),
    #[error("this operation needs a bounded upper outcome parameter")]
    UnboundedGamma,
    #[error("control-arm bounds need a strictly positive lower treatment parameter")]
    ZeroLowerLambda,
    #[error("quantile level tau = {0} is below 1/2")]
    TauBelowHalf(f64),
    #[error("delta = {0} is outside [0, 1]")]
    DeltaOutOfRange(f64),
    #[error("density-ratio box [{lower}, {upper}] cannot be normalized")]
    InfeasibleBox { lower: f64, upper: f64 },
    #[error("grid resolution {0} is outside (0, 0.1]")]
    ResolutionOutOfRange(f64),
    #[error("witness construction produced negative mass {mass} at y = {value}")]
    NegativeImpliedDensity { value: f64, mass: f64 },
    #[error("stratum '{stratum}' has no {arm} outcome distribution but a bound requires it")]
    MissingStratumDistribution { stratum: String, arm: Arm },
    #[error("invalid observed law: {0}")]
    InvalidLaw(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("grid is empty")]
    EmptyGrid,
    #[error("sample has no rows")]
    EmptySample,
    #[error("stratum '{stratum}' has no {arm} observations")]
    EmptyArmInStratum { stratum: String, arm: Arm },
    #[error("could not draw a bootstrap resample containing every required arm after {attempts} attempts")]
    DegenerateResample { attempts: usize },
    #[error("invalid data: {0}")]
    Data(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by the input data rather than by the requested
    /// parameters.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::EmptyInput
                | Error::NegativeWeight { .. }
                | Error::ZeroTotalWeight
                | Error::NonFinite { .. }
                | Error::MissingStratumDistribution { .. }
                | Error::InvalidLaw(_)
                | Error::EmptySample
                | Error::EmptyArmInStratum { .. }
                | Error::DegenerateResample { .. }
                | Error::Data(_)
                | Error::Io(_)
                | Error::Csv(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Treatment arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Treated,
    Control,
}

impl std::fmt::Display for Arm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Arm::Treated => f.write_str("treated"),
            Arm::Control => f.write_str("control"),
        }
    }
}
