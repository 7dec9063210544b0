use thiserror::Error;

use crate::solver::SolveOutcome;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("covariate column {column} is constant")]
    ConstantCovariate { column: usize },

    #[error("non-positive time {value} at row {row}")]
    NonpositiveTime { row: usize, value: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("generalized F shape parameters must be finite and positive (m1={m1}, m2={m2})")]
    BadShape { m1: f64, m2: f64 },

    #[error("winsorizing level must lie in (0, 1/2], got {0}")]
    BadAlpha(f64),

    #[error("unrecognised score specification `{0}`")]
    BadScoreSpec(String),

    #[error("coordinate {coord}: no sign change found within the expansion bound (signs {signs:?})")]
    NoBracket { coord: usize, signs: Vec<i8> },

    #[error("solver did not converge after {} sweeps", .0.sweeps_used)]
    NotConverged(Box<SolveOutcome>),

    #[error("sigma matrix is singular or ill-conditioned (condition number {condition:e})")]
    SingularSigma { condition: f64 },

    #[error("slope matrix is singular or ill-conditioned (condition number {condition:e}, min R^2 {r_squared})")]
    SingularXi { condition: f64, r_squared: f64 },

    #[error("omega matrix is singular or has non-positive diagonal")]
    SingularOmega,

    #[error("Huang procedure: neither offset equation could be solved for column {0}")]
    NoSolutionEitherSide(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// Short machine-readable identifier used in CLI error reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidSample(_) => "invalid_sample",
            Error::ConstantCovariate { .. } => "constant_covariate",
            Error::NonpositiveTime { .. } => "nonpositive_time",
            Error::NonFinite(_) => "non_finite",
            Error::DegenerateSample(_) => "degenerate_sample",
            Error::BadShape { .. } => "bad_shape",
            Error::BadAlpha(_) => "bad_alpha",
            Error::BadScoreSpec(_) => "bad_score_spec",
            Error::NoBracket { .. } => "no_bracket",
            Error::NotConverged(_) => "not_converged",
            Error::SingularSigma { .. } => "singular_sigma",
            Error::SingularXi { .. } => "singular_xi",
            Error::SingularOmega => "singular_omega",
            Error::NoSolutionEitherSide(_) => "no_solution_either_side",
            Error::InvalidConfig(_) => "invalid_config",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
            Error::Toml(_) => "toml",
        }
    }
}
