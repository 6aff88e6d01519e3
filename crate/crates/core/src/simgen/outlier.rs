use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::checks::DEFAULT_FENCE;
use crate::error::{Error, Result};
use crate::stats::{tukey_fences, tukey_outliers};

/// Replaces one uniformly chosen entry with `factor * max` of the column.
///
/// If that value would not be flagged by Tukey fences with multiplier
/// `fence_k` on the injected column, it is pushed further above the upper
/// fence until it is.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutlierRule {
    pub factor: f64,
    pub fence_k: f64,
}

impl Default for OutlierRule {
    fn default() -> Self {
        Self {
            factor: 1.5,
            fence_k: DEFAULT_FENCE,
        }
    }
}

impl OutlierRule {
    pub fn validate(&self) -> Result<()> {
        if !(self.factor.is_finite() && self.factor > 0.0) || !(self.fence_k.is_finite() && self.fence_k >= 0.0) {
            return Err(Error::InvalidParameters(format!(
                "outlier rule needs positive factor and nonnegative fence, got {} and {}",
                self.factor, self.fence_k
            )));
        }
        Ok(())
    }
}

/// Outlier injection for one copula variable; the outlier is added with
/// the given probability per replicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutlierInjection {
    #[serde(default)]
    pub rule: OutlierRule,
    #[serde(default = "one")]
    pub probability: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for OutlierInjection {
    fn default() -> Self {
        Self {
            rule: OutlierRule::default(),
            probability: 1.0,
        }
    }
}

impl OutlierInjection {
    pub fn validate(&self) -> Result<()> {
        self.rule.validate()?;
        if !(0.0..=1.0).contains(&self.probability) {
            return Err(Error::ProbabilityOutOfRange(self.probability));
        }
        Ok(())
    }
}

/// Injects one outlier in place and returns its index.
pub fn inject_outlier(values: &mut [f64], rule: &OutlierRule, rng: &mut impl Rng) -> Result<usize> {
    rule.validate()?;
    if values.is_empty() {
        return Err(Error::TooFewValues { needed: 1, got: 0 });
    }
    let index = rng.random_range(0..values.len());
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut value = rule.factor * max;
    if values.len() < 4 {
        values[index] = value;
        return Ok(index);
    }
    let (_, hi) = tukey_fences(values, rule.fence_k)?;
    let mut step = (hi.abs() + max.abs()).max(1.0) * 0.5;
    if value <= hi {
        value = hi + step;
    }
    loop {
        values[index] = value;
        if tukey_outliers(values, rule.fence_k)?.contains(&index) {
            return Ok(index);
        }
        value += step;
        step *= 2.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_column_factor_three() {
        let mut v = vec![5.0; 20];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rule = OutlierRule { factor: 3.0, fence_k: 1.5 };
        let i = inject_outlier(&mut v, &rule, &mut rng).unwrap();
        assert_eq!(v[i], 15.0);
        assert_eq!(tukey_outliers(&v, 1.5).unwrap(), vec![i]);
    }

    #[test]
    fn negative_column_still_flagged() {
        let mut v: Vec<f64> = (0..50).map(|i| -100.0 - i as f64).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let i = inject_outlier(&mut v, &OutlierRule::default(), &mut rng).unwrap();
        assert!(tukey_outliers(&v, 1.5).unwrap().contains(&i));
    }

    #[test]
    fn rejects_bad_probability() {
        let inj = OutlierInjection {
            probability: 1.5,
            ..Default::default()
        };
        assert!(inj.validate().is_err());
    }
}
