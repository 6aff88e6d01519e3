use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("column `{name}` contains NaN at row {index}")]
    NanValue { name: String, index: usize },

    #[error("need at least {needed} values, got {got}")]
    TooFewValues { needed: usize, got: usize },

    #[error("probability {0} is outside [0, 1]")]
    ProbabilityOutOfRange(f64),

    #[error("column is constant; correlation is undefined")]
    ConstantColumn,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),

    #[error("invalid interval [{lo}, {hi}]: lower bound exceeds upper bound")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("invalid check `{id}`: {reason}")]
    InvalidCheck { id: String, reason: String },

    #[error("unknown check `{0}`")]
    UnknownCheck(String),

    #[error("replicate {index}: {source}")]
    Replicate {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("leaf references check {index} but rows have width {width}")]
    LeafOutOfRange { index: usize, width: usize },

    #[error("invalid fit configuration: {0}")]
    InvalidFitConfig(String),

    #[error(
        "labels contain a single class ({class}); inverse-frequency weights are undefined, \
         supply explicit class weights"
    )]
    SingleClass { class: bool },

    #[error("exhaustive search limited to {max_leaves} leaves over {max_checks} checks")]
    ExhaustiveBounds { max_leaves: usize, max_checks: usize },

    #[error("{family}: value {value} outside the support")]
    Support { family: &'static str, value: f64 },

    #[error("{family}: fit failed: {reason}")]
    FitFailed { family: &'static str, reason: String },

    #[error("no candidate family could be fitted: {}", format_failures(.0))]
    NoCandidate(Vec<(String, String)>),

    #[error("invalid distribution parameters: {0}")]
    InvalidParameters(String),

    #[error("correlation matrix is not valid: {0}")]
    InvalidCorrelation(String),

    #[error("correlation grid is empty after filtering ({rejected} matrices rejected)")]
    EmptyGrid { rejected: usize },

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("response must be a nonnegative integer count, got {value} at row {index}")]
    NotACount { index: usize, value: f64 },

    #[error("GLM did not converge in {iterations} iterations")]
    NotConverged { iterations: usize },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("csv row {row}, column `{column}`: cannot parse `{cell}` as a number")]
    CsvCell {
        row: usize,
        column: String,
        cell: String,
    },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

fn format_failures(failures: &[(String, String)]) -> String {
    failures
        .iter()
        .map(|(family, why)| format!("{family} ({why})"))
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub(crate) fn at_replicate(self, index: usize) -> Self {
        Error::Replicate {
            index,
            source: Box::new(self),
        }
    }
}
