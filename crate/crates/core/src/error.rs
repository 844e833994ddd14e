use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("unknown covariate `{0}`")]
    MissingCovariate(String),

    #[error("treatment arm T={0} is empty")]
    EmptyArm(u8),

    #[error("positivity violated: P*(T=1|C) = {value} is outside (0, 1){context}")]
    Positivity { value: f64, context: String },

    #[error("sampler discarded every row (n_in = {n_in}, mean acceptance probability {mean_acceptance:.3e})")]
    EmptySample { n_in: usize, mean_acceptance: f64 },

    #[error("empty cell T={treatment}, {covariate}={level}: overlap violated")]
    EmptyCell {
        treatment: u8,
        covariate: String,
        level: u8,
    },

    #[error("design matrix is rank deficient ({0})")]
    RankDeficient(String),

    #[error("fold {fold} training complement has no rows with T={arm}; use fewer folds")]
    FoldMissingArm { fold: usize, arm: u8 },

    #[error("propensity {value} at row {row} is not inside (0, 1); clip before estimating")]
    UnclippedPropensity { row: usize, value: f64 },

    #[error("treatment residuals have zero variance")]
    DegenerateResiduals,

    #[error("bootstrap gave up after {attempts} attempts ({failed} resamples failed)")]
    BootstrapExhausted { attempts: usize, failed: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
