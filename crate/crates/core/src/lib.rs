//! Analysis validation checks.
//!
//! Simulate replicate datasets, evaluate a bank of data checks on each,
//! label each replicate by whether the analysis outcome falls outside its
//! expected interval, then fit a logic-regression tree over the check
//! failures and score it by precision, recall and independence.

pub mod checks;
pub mod error;
pub mod glm;
pub mod logreg;
pub mod metrics;
pub mod simgen;
pub mod stats;
pub mod table;

pub use checks::{CheckDef, CheckMatrix, Comparator, ExpectationDef, Replicate, Statistic};
pub use error::{Error, Result};
pub use logreg::{BoolTree, ClassWeights, FitConfig, FittedModel, Operator};
pub use metrics::{MeanKind, ScoreReport};
pub use stats::NumericColumn;
pub use table::DataTable;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/checks.md")]
    struct Checks;
    #[doc = include_str!("../../../book/src/simulation.md")]
    struct Simulation;
    #[doc = include_str!("../../../book/src/logic-regression.md")]
    struct LogicRegression;
    #[doc = include_str!("../../../book/src/metrics.md")]
    struct Metrics;
    #[doc = include_str!("../../../book/src/glm.md")]
    struct Glm;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
}
