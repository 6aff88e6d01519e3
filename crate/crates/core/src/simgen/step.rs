use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::DataTable;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalSpec {
    pub mean: f64,
    pub sd: f64,
}

/// Daily step counts: a mixture of typical, low and high days where the
/// numbers of low and high days are Poisson.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepScenario {
    pub n_days: usize,
    pub typical: NormalSpec,
    pub low: NormalSpec,
    pub high: NormalSpec,
    pub lambda_low: f64,
    pub lambda_high: f64,
}

impl Default for StepScenario {
    fn default() -> Self {
        Self {
            n_days: 30,
            typical: NormalSpec { mean: 9000.0, sd: 300.0 },
            low: NormalSpec { mean: 6000.0, sd: 200.0 },
            high: NormalSpec { mean: 12000.0, sd: 200.0 },
            lambda_low: 8.0,
            lambda_high: 8.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DayKind {
    Typical,
    Low,
    High,
}

#[derive(Debug, Clone)]
pub struct StepDraw {
    /// Single column `step`.
    pub table: DataTable,
    pub n_low: usize,
    pub n_high: usize,
    /// Component of each day, aligned with the table rows.
    pub kinds: Vec<DayKind>,
}

impl StepScenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameters(format!("step scenario: {m}")));
        if self.n_days == 0 {
            return bad("n_days must be positive");
        }
        for (name, c) in [("typical", self.typical), ("low", self.low), ("high", self.high)] {
            if !(c.sd > 0.0) || !c.mean.is_finite() {
                return bad(&format!("{name} component needs finite mean and positive sd"));
            }
        }
        if !(self.lambda_low >= 0.0 && self.lambda_high >= 0.0) {
            return bad("Poisson rates must be nonnegative");
        }
        Ok(())
    }
}

fn poisson_count(lambda: f64, rng: &mut impl Rng) -> usize {
    if lambda == 0.0 {
        return 0;
    }
    let d = Poisson::new(lambda).expect("validated rate");
    let v: f64 = d.sample(rng);
    v as usize
}

/// Draws a table; low/high counts are redrawn together until they fit in
/// `n_days`.
pub fn simulate_step_table(scenario: &StepScenario, rng: &mut impl Rng) -> Result<StepDraw> {
    scenario.validate()?;
    let (n_low, n_high) = loop {
        let l = poisson_count(scenario.lambda_low, rng);
        let h = poisson_count(scenario.lambda_high, rng);
        if l + h <= scenario.n_days {
            break (l, h);
        }
    };
    simulate_step_table_with_counts(scenario, n_low, n_high, rng)
}

/// Draws a table with fixed component counts.
pub fn simulate_step_table_with_counts(
    scenario: &StepScenario,
    n_low: usize,
    n_high: usize,
    rng: &mut impl Rng,
) -> Result<StepDraw> {
    scenario.validate()?;
    if n_low + n_high > scenario.n_days {
        return Err(Error::InvalidParameters(format!(
            "{n_low} low + {n_high} high days exceed {} days",
            scenario.n_days
        )));
    }
    let mut kinds = Vec::with_capacity(scenario.n_days);
    kinds.extend(std::iter::repeat(DayKind::Low).take(n_low));
    kinds.extend(std::iter::repeat(DayKind::High).take(n_high));
    kinds.extend(std::iter::repeat(DayKind::Typical).take(scenario.n_days - n_low - n_high));
    kinds.shuffle(rng);
    let dist = |c: NormalSpec| Normal::new(c.mean, c.sd).expect("validated");
    let (typical, low, high) = (dist(scenario.typical), dist(scenario.low), dist(scenario.high));
    let steps = kinds
        .iter()
        .map(|k| {
            let v: f64 = match k {
                DayKind::Typical => typical.sample(rng),
                DayKind::Low => low.sample(rng),
                DayKind::High => high.sample(rng),
            };
            v.max(0.0)
        })
        .collect();
    Ok(StepDraw {
        table: DataTable::single("step", steps)?,
        n_low,
        n_high,
        kinds,
    })
}
