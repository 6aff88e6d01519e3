//! Default air-pollution scenario: daily mortality, PM10 and temperature
//! with the check bank over their correlations and outliers.

use super::copula::{correlation_grid, CopulaScenario, CopulaVariable, PairValues};
use super::marginal::{Distribution, Marginal, Rescale};
use super::outlier::{OutlierInjection, OutlierRule};
use crate::checks::{CheckDef, Comparator, ExpectationDef};
use crate::error::Result;
use crate::logreg::{ClassWeights, FitConfig};

pub const MORTALITY: &str = "mortality";
pub const PM10: &str = "PM10";
pub const TEMPERATURE: &str = "temperature";

/// Tukey multiplier for the outlier checks and injection. With several
/// thousand rows the 1.5 fence flags some point in nearly every sample.
pub const PM10_FENCE: f64 = 3.0;

/// Outcome bounds for the PM10 coefficient.
pub fn pm10_expectation() -> ExpectationDef {
    ExpectationDef::new("pm10_coefficient", 0.0, 0.005).expect("valid interval")
}

pub fn pm10_variables(outlier_probability: f64) -> Vec<CopulaVariable> {
    let outlier = Some(OutlierInjection {
        rule: OutlierRule {
            fence_k: PM10_FENCE,
            ..OutlierRule::default()
        },
        probability: outlier_probability,
    });
    vec![
        CopulaVariable {
            name: MORTALITY.into(),
            marginal: Marginal::new(Distribution::NegativeBinomial {
                mean: 170.0,
                dispersion: 125.0,
            }),
            outlier,
        },
        CopulaVariable {
            name: PM10.into(),
            marginal: Marginal {
                distribution: Distribution::Beta { alpha: 2.5, beta: 6.0 },
                rescale: Some(Rescale {
                    divisor: 100.0,
                    multiplier: 100.0,
                }),
            },
            outlier,
        },
        CopulaVariable {
            name: TEMPERATURE.into(),
            marginal: Marginal::new(Distribution::Weibull { shape: 3.5, scale: 62.0 }),
            outlier: None,
        },
    ]
}

pub fn pm10_grid_pairs() -> Vec<PairValues> {
    let pair = |a: &str, b: &str, values: &[f64]| PairValues {
        a: a.into(),
        b: b.into(),
        values: values.to_vec(),
    };
    vec![
        pair(MORTALITY, PM10, &[-0.1, -0.08, -0.06, -0.04, -0.02, 0.0, 0.02, 0.04]),
        pair(MORTALITY, TEMPERATURE, &[-0.45, -0.4, -0.35, -0.3, -0.25, -0.2]),
        pair(PM10, TEMPERATURE, &[0.3]),
    ]
}

/// Nine years of daily observations with the default grid.
pub fn pm10_scenario() -> Result<CopulaScenario> {
    let variables = pm10_variables(0.75);
    let names: Vec<&str> = variables.iter().map(|v| v.name.as_str()).collect();
    let grid = correlation_grid(&names, &pm10_grid_pairs())?;
    CopulaScenario::new(3288, variables, grid.matrices)
}

/// The ten checks: four mortality-PM10 correlation cutoffs, four
/// mortality-temperature cutoffs and one outlier check per pollutant and
/// mortality.
pub fn pm10_check_bank() -> Vec<CheckDef> {
    use Comparator::{Gt, Lt};
    let mut bank = Vec::new();
    for (id, cmp, t) in [
        ("cor_m_pm10_lt_-0.05", Lt, -0.05),
        ("cor_m_pm10_lt_-0.03", Lt, -0.03),
        ("cor_m_pm10_gt_0.03", Gt, 0.03),
        ("cor_m_pm10_gt_0.05", Gt, 0.05),
    ] {
        bank.push(CheckDef::correlation(id, MORTALITY, PM10, cmp, t));
    }
    for (id, t) in [
        ("cor_m_tmp_gt_-0.3", -0.3),
        ("cor_m_tmp_gt_-0.35", -0.35),
        ("cor_m_tmp_gt_-0.4", -0.4),
        ("cor_m_tmp_gt_-0.45", -0.45),
    ] {
        bank.push(CheckDef::correlation(id, MORTALITY, TEMPERATURE, Gt, t));
    }
    bank.push(CheckDef::has_outlier("pm10_outlier", PM10, PM10_FENCE));
    bank.push(CheckDef::has_outlier("mortality_outlier", MORTALITY, PM10_FENCE));
    bank
}

/// Inverse class weights with at most three leaves.
pub fn pm10_fit_config(seed: u64) -> FitConfig {
    FitConfig {
        max_leaves: 3,
        class_weights: ClassWeights::InverseFrequency,
        seed,
        ..FitConfig::default()
    }
}
