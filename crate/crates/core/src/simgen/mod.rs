//! Replicate generators: the step-count mixture and the Gaussian copula
//! scenario with fitted marginals.

mod copula;
mod marginal;
mod outlier;
mod pm10;
mod step;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use copula::{
    correlation_grid, latent_normals, simulate_copula_table, CopulaDraw, CopulaScenario, CopulaVariable,
    CorrelationGrid, CorrelationMatrix, PairValues,
};
pub use marginal::{
    fit_marginal, fit_marginal_rescaled, qq_pairs, select_marginal, Candidate, Distribution, Family,
    FittedMarginal, Marginal, QuantileSampler, Rescale,
};
pub use outlier::{inject_outlier, OutlierInjection, OutlierRule};
pub use pm10::{
    pm10_check_bank, pm10_expectation, pm10_fit_config, pm10_grid_pairs, pm10_scenario, pm10_variables, MORTALITY, PM10,
    PM10_FENCE, TEMPERATURE,
};
pub use step::{simulate_step_table, simulate_step_table_with_counts, DayKind, NormalSpec, StepDraw, StepScenario};

/// Independent generator for replicate `index` under `master` seed.
pub fn replicate_rng(master: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}
