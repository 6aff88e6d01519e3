//! Poisson regression with log link, fitted by iteratively reweighted
//! least squares.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simgen::{MORTALITY, PM10, TEMPERATURE};
use crate::table::DataTable;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GlmOptions {
    /// Relative deviance change that ends the IRLS loop.
    pub tol: f64,
    /// Largest absolute score component accepted as converged.
    pub score_tol: f64,
    pub max_iter: usize,
}

impl Default for GlmOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            score_tol: 1e-6,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmFit {
    /// Intercept first, then one coefficient per covariate.
    pub coefficients: Vec<f64>,
    /// From the inverse Fisher information at the estimate.
    pub std_errors: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub deviance: f64,
    /// Largest absolute component of the log-likelihood gradient.
    pub score_max: f64,
}

impl GlmFit {
    pub fn fitted(&self, covariates: &[&[f64]], row: usize) -> f64 {
        let eta = self.coefficients[0]
            + covariates
                .iter()
                .zip(&self.coefficients[1..])
                .map(|(c, b)| c[row] * b)
                .sum::<f64>();
        eta.exp()
    }
}

fn design(n: usize, covariates: &[&[f64]]) -> DMatrix<f64> {
    DMatrix::from_fn(n, covariates.len() + 1, |i, j| if j == 0 { 1.0 } else { covariates[j - 1][i] })
}

fn deviance(y: &[f64], mu: &DVector<f64>) -> f64 {
    2.0 * y
        .iter()
        .zip(mu.iter())
        .map(|(&y, &m)| if y > 0.0 { y * (y / m).ln() - (y - m) } else { m })
        .sum::<f64>()
}

/// Gradient of the Poisson log-likelihood, `X^T (y - mu)`.
pub fn poisson_score(y: &[f64], covariates: &[&[f64]], coefficients: &[f64]) -> Vec<f64> {
    let x = design(y.len(), covariates);
    let mu = (&x * DVector::from_column_slice(coefficients)).map(f64::exp);
    let resid = DVector::from_iterator(y.len(), y.iter().zip(mu.iter()).map(|(y, m)| y - m));
    (x.transpose() * resid).iter().copied().collect()
}

/// Poisson log-likelihood without the `ln y!` constant.
pub fn poisson_log_likelihood(y: &[f64], covariates: &[&[f64]], coefficients: &[f64]) -> f64 {
    let x = design(y.len(), covariates);
    let eta = &x * DVector::from_column_slice(coefficients);
    y.iter().zip(eta.iter()).map(|(y, e)| y * e - e.exp()).sum()
}

fn check_rank(x: &DMatrix<f64>) -> Result<()> {
    let norms: Vec<f64> = x.column_iter().map(|c| c.norm()).collect();
    if norms.iter().any(|&v| v == 0.0) {
        return Err(Error::RankDeficient);
    }
    let scaled = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] / norms[j]);
    let eig = SymmetricEigen::new(scaled.transpose() * &scaled).eigenvalues;
    let max = eig.max();
    if eig.min() <= 1e-12 * max {
        return Err(Error::RankDeficient);
    }
    Ok(())
}

/// Weighted least-squares step: solves `X^T W X b = X^T W z` for the
/// working response at `beta`.
fn irls_step(x: &DMatrix<f64>, y: &[f64], beta: &DVector<f64>) -> Result<DVector<f64>> {
    let eta = x * beta;
    let mu = eta.map(f64::exp);
    let p = x.ncols();
    let mut xtwx = DMatrix::zeros(p, p);
    let mut xtwz = DVector::zeros(p);
    for i in 0..x.nrows() {
        let w = mu[i];
        let z = eta[i] + (y[i] - mu[i]) / mu[i];
        let row = x.row(i);
        for a in 0..p {
            xtwz[a] += w * row[a] * z;
            for b in 0..=a {
                xtwx[(a, b)] += w * row[a] * row[b];
            }
        }
    }
    xtwx.fill_upper_triangle_with_lower_triangle();
    xtwx.cholesky().map(|c| c.solve(&xtwz)).ok_or(Error::RankDeficient)
}

fn information_inverse(x: &DMatrix<f64>, beta: &DVector<f64>) -> Option<DMatrix<f64>> {
    let mu = (x * beta).map(f64::exp);
    let xw = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] * mu[i]);
    (x.transpose() * xw).cholesky().map(|c| c.inverse())
}

/// Fits `log E[y] = b0 + sum_j b_j x_j`.
///
/// Starts from the intercept-only solution `ln(mean y)`; a step that raises
/// the deviance is halved up to ten times.
pub fn fit_poisson_glm(y: &[f64], covariates: &[&[f64]], options: &GlmOptions) -> Result<GlmFit> {
    let n = y.len();
    for c in covariates {
        if c.len() != n {
            return Err(Error::LengthMismatch { left: n, right: c.len() });
        }
    }
    for (index, &v) in y.iter().enumerate() {
        if !(v >= 0.0 && v.fract() == 0.0 && v.is_finite()) {
            return Err(Error::NotACount { index, value: v });
        }
    }
    let p = covariates.len() + 1;
    if n < p {
        return Err(Error::TooFewValues { needed: p, got: n });
    }
    let mean_y = y.iter().sum::<f64>() / n as f64;
    if mean_y == 0.0 {
        return Err(Error::InvalidParameters("all counts are zero; the log-link fit has no finite solution".into()));
    }
    let x = design(n, covariates);
    check_rank(&x)?;

    let mut beta = DVector::zeros(p);
    beta[0] = mean_y.ln();
    let mut dev = deviance(y, &(&x * &beta).map(f64::exp));
    let mut iterations = 0;
    let mut dev_converged = false;
    while iterations < options.max_iter {
        iterations += 1;
        let mut next = irls_step(&x, y, &beta)?;
        let mut next_dev = deviance(y, &(&x * &next).map(f64::exp));
        let mut halvings = 0;
        while !(next_dev <= dev) && halvings < 10 {
            next = (&next + &beta) * 0.5;
            next_dev = deviance(y, &(&x * &next).map(f64::exp));
            halvings += 1;
        }
        if !next_dev.is_finite() {
            break;
        }
        let change = (dev - next_dev).abs() / (next_dev.abs() + 0.1);
        beta = next;
        dev = next_dev;
        if change < options.tol {
            dev_converged = true;
            break;
        }
    }
    if dev_converged {
        // full Newton steps near the optimum take the score to rounding
        // level; the deviance no longer resolves these changes
        let norm = |b: &DVector<f64>| {
            poisson_score(y, covariates, b.as_slice())
                .iter()
                .fold(0.0f64, |m, s| m.max(s.abs()))
        };
        let mut current = norm(&beta);
        for _ in 0..5 {
            if current < options.score_tol * 1e-3 {
                break;
            }
            let next = irls_step(&x, y, &beta)?;
            let next_norm = norm(&next);
            if !(next_norm < current) {
                break;
            }
            beta = next;
            current = next_norm;
            iterations += 1;
        }
        dev = deviance(y, &(&x * &beta).map(f64::exp));
    }
    let score = poisson_score(y, covariates, beta.as_slice());
    let score_max = score.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let std_errors = information_inverse(&x, &beta)
        .map(|inv| (0..p).map(|j| inv[(j, j)].sqrt()).collect())
        .unwrap_or_else(|| vec![f64::NAN; p]);
    Ok(GlmFit {
        coefficients: beta.iter().copied().collect(),
        std_errors,
        converged: dev_converged && score_max < options.score_tol,
        iterations,
        deviance: dev,
        score_max,
    })
}

/// PM10 coefficient of `mortality ~ PM10 + temperature`.
pub fn pm10_outcome(table: &DataTable) -> Result<f64> {
    let y = table.values(MORTALITY)?;
    let pm = table.values(PM10)?;
    let temp = table.values(TEMPERATURE)?;
    let fit = fit_poisson_glm(y, &[pm, temp], &GlmOptions::default())?;
    if !fit.converged {
        return Err(Error::NotConverged {
            iterations: fit.iterations,
        });
    }
    Ok(fit.coefficients[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intercept_only_constant() {
        let y = vec![7.0; 25];
        let fit = fit_poisson_glm(&y, &[], &GlmOptions::default()).unwrap();
        assert!((fit.coefficients[0] - 7f64.ln()).abs() < 1e-14);
        assert!(fit.converged);
        assert!(fit.deviance.abs() < 1e-12);
    }

    #[test]
    fn rank_deficiency_detected() {
        let y = [1.0, 2.0, 3.0, 4.0];
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [2.0, 4.0, 6.0, 8.0];
        assert!(matches!(
            fit_poisson_glm(&y, &[&a, &b], &GlmOptions::default()),
            Err(Error::RankDeficient)
        ));
        let c = [3.0; 4];
        assert!(matches!(
            fit_poisson_glm(&y, &[&c], &GlmOptions::default()),
            Err(Error::RankDeficient)
        ));
    }

    #[test]
    fn rejects_non_counts() {
        assert!(matches!(
            fit_poisson_glm(&[1.0, 2.5], &[], &GlmOptions::default()),
            Err(Error::NotACount { index: 1, .. })
        ));
    }

    #[test]
    fn simple_slope_matches_saturated_two_groups() {
        // two groups: the MLE reproduces the group means exactly
        let x = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let y = [2.0, 3.0, 4.0, 8.0, 9.0, 10.0];
        let fit = fit_poisson_glm(&y, &[&x], &GlmOptions::default()).unwrap();
        assert!((fit.coefficients[0] - 3f64.ln()).abs() < 1e-12);
        assert!((fit.coefficients[1] - 3f64.ln()).abs() < 1e-12);
        assert!(fit.score_max < 1e-9);
    }
}
