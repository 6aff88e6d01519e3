//! Univariate families used as copula marginals, with maximum-likelihood
//! fitting and AIC selection.
//!
//! Negative binomial is parameterized by mean `m` and dispersion `r` with
//! variance `m + m^2 / r`; its MLE profiles `r` with `m` fixed at the sample
//! mean. Beta is fitted on data divided by a [`Rescale`] divisor and its
//! log-likelihood is reported on the original scale so AIC stays comparable
//! with the other families.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, inv_beta_reg, ln_beta};
use statrs::function::erf::{erfc, erfc_inv};
use statrs::function::gamma::{digamma, gamma_lr, gamma_ur, ln_gamma};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Poisson,
    NegativeBinomial,
    Gamma,
    LogNormal,
    Exponential,
    Weibull,
    Normal,
    Beta,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Poisson => "poisson",
            Family::NegativeBinomial => "negative_binomial",
            Family::Gamma => "gamma",
            Family::LogNormal => "log_normal",
            Family::Exponential => "exponential",
            Family::Weibull => "weibull",
            Family::Normal => "normal",
            Family::Beta => "beta",
        }
    }

    pub fn n_params(self) -> usize {
        match self {
            Family::Poisson | Family::Exponential => 1,
            _ => 2,
        }
    }

    pub fn is_discrete(self) -> bool {
        matches!(self, Family::Poisson | Family::NegativeBinomial)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Distribution {
    Poisson { lambda: f64 },
    NegativeBinomial { mean: f64, dispersion: f64 },
    Gamma { shape: f64, rate: f64 },
    LogNormal { meanlog: f64, sdlog: f64 },
    Exponential { rate: f64 },
    Weibull { shape: f64, scale: f64 },
    Normal { mean: f64, sd: f64 },
    Beta { alpha: f64, beta: f64 },
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameters(format!("{name} must be positive and finite, got {v}")))
    }
}

pub(crate) fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

pub(crate) fn std_normal_quantile(u: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
}

impl Distribution {
    pub fn family(&self) -> Family {
        match self {
            Distribution::Poisson { .. } => Family::Poisson,
            Distribution::NegativeBinomial { .. } => Family::NegativeBinomial,
            Distribution::Gamma { .. } => Family::Gamma,
            Distribution::LogNormal { .. } => Family::LogNormal,
            Distribution::Exponential { .. } => Family::Exponential,
            Distribution::Weibull { .. } => Family::Weibull,
            Distribution::Normal { .. } => Family::Normal,
            Distribution::Beta { .. } => Family::Beta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Distribution::Poisson { lambda } => positive("lambda", lambda),
            Distribution::NegativeBinomial { mean, dispersion } => {
                positive("mean", mean)?;
                positive("dispersion", dispersion)
            }
            Distribution::Gamma { shape, rate } => {
                positive("shape", shape)?;
                positive("rate", rate)
            }
            Distribution::LogNormal { meanlog, sdlog } => {
                if !meanlog.is_finite() {
                    return Err(Error::InvalidParameters("meanlog must be finite".into()));
                }
                positive("sdlog", sdlog)
            }
            Distribution::Exponential { rate } => positive("rate", rate),
            Distribution::Weibull { shape, scale } => {
                positive("shape", shape)?;
                positive("scale", scale)
            }
            Distribution::Normal { mean, sd } => {
                if !mean.is_finite() {
                    return Err(Error::InvalidParameters("mean must be finite".into()));
                }
                positive("sd", sd)
            }
            Distribution::Beta { alpha, beta } => {
                positive("alpha", alpha)?;
                positive("beta", beta)
            }
        }
    }

    /// Log density (continuous) or log mass (discrete); `-inf` off support.
    pub fn ln_density(&self, x: f64) -> f64 {
        let neg_inf = f64::NEG_INFINITY;
        match *self {
            Distribution::Poisson { lambda } => {
                if x < 0.0 || x.fract() != 0.0 {
                    return neg_inf;
                }
                x * lambda.ln() - lambda - ln_gamma(x + 1.0)
            }
            Distribution::NegativeBinomial { mean, dispersion: r } => {
                if x < 0.0 || x.fract() != 0.0 {
                    return neg_inf;
                }
                ln_gamma(x + r) - ln_gamma(r) - ln_gamma(x + 1.0) + r * (r / (r + mean)).ln()
                    + x * (mean / (r + mean)).ln()
            }
            Distribution::Gamma { shape, rate } => {
                if x <= 0.0 {
                    return neg_inf;
                }
                shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
            }
            Distribution::LogNormal { meanlog, sdlog } => {
                if x <= 0.0 {
                    return neg_inf;
                }
                let z = (x.ln() - meanlog) / sdlog;
                -0.5 * z * z - x.ln() - sdlog.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
            }
            Distribution::Exponential { rate } => {
                if x < 0.0 {
                    return neg_inf;
                }
                rate.ln() - rate * x
            }
            Distribution::Weibull { shape, scale } => {
                if x < 0.0 {
                    return neg_inf;
                }
                let y = x / scale;
                shape.ln() - scale.ln() + (shape - 1.0) * y.ln() - y.powf(shape)
            }
            Distribution::Normal { mean, sd } => {
                let z = (x - mean) / sd;
                -0.5 * z * z - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
            }
            Distribution::Beta { alpha, beta } => {
                if x <= 0.0 || x >= 1.0 {
                    return neg_inf;
                }
                (alpha - 1.0) * x.ln() + (beta - 1.0) * (1.0 - x).ln() - ln_beta(alpha, beta)
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Distribution::Poisson { lambda } => {
                if x < 0.0 {
                    0.0
                } else {
                    gamma_ur(x.floor() + 1.0, lambda)
                }
            }
            Distribution::NegativeBinomial { mean, dispersion: r } => {
                if x < 0.0 {
                    0.0
                } else {
                    beta_reg(r, x.floor() + 1.0, r / (r + mean))
                }
            }
            Distribution::Gamma { shape, rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    gamma_lr(shape, rate * x)
                }
            }
            Distribution::LogNormal { meanlog, sdlog } => {
                if x <= 0.0 {
                    0.0
                } else {
                    std_normal_cdf((x.ln() - meanlog) / sdlog)
                }
            }
            Distribution::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            Distribution::Weibull { shape, scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-(x / scale).powf(shape)).exp_m1()
                }
            }
            Distribution::Normal { mean, sd } => std_normal_cdf((x - mean) / sd),
            Distribution::Beta { alpha, beta } => {
                if x <= 0.0 {
                    0.0
                } else if x >= 1.0 {
                    1.0
                } else {
                    beta_reg(alpha, beta, x)
                }
            }
        }
    }

    /// Inverse CDF for `u` in `(0, 1)`; discrete families return the
    /// smallest `k` with `cdf(k) >= u`.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
        match *self {
            Distribution::Normal { mean, sd } => mean + sd * std_normal_quantile(u),
            Distribution::LogNormal { meanlog, sdlog } => (meanlog + sdlog * std_normal_quantile(u)).exp(),
            Distribution::Exponential { rate } => -(-u).ln_1p() / rate,
            Distribution::Weibull { shape, scale } => scale * (-(-u).ln_1p()).powf(1.0 / shape),
            Distribution::Beta { alpha, beta } => inv_beta_reg(alpha, beta, u),
            Distribution::Gamma { shape, rate } => gamma_quantile(shape, u) / rate,
            Distribution::Poisson { lambda } => discrete_quantile(self, u, lambda, lambda.sqrt()),
            Distribution::NegativeBinomial { mean, dispersion } => {
                discrete_quantile(self, u, mean, (mean + mean * mean / dispersion).sqrt())
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Distribution::Poisson { lambda } => lambda,
            Distribution::NegativeBinomial { mean, .. } => mean,
            Distribution::Gamma { shape, rate } => shape / rate,
            Distribution::LogNormal { meanlog, sdlog } => (meanlog + 0.5 * sdlog * sdlog).exp(),
            Distribution::Exponential { rate } => 1.0 / rate,
            Distribution::Weibull { shape, scale } => scale * ln_gamma(1.0 + 1.0 / shape).exp(),
            Distribution::Normal { mean, .. } => mean,
            Distribution::Beta { alpha, beta } => alpha / (alpha + beta),
        }
    }
}

fn discrete_quantile(d: &Distribution, u: f64, centre: f64, spread: f64) -> f64 {
    let z = std_normal_quantile(u);
    let mut k = (centre + z * spread).floor().max(0.0);
    if d.cdf(k) >= u {
        while k > 0.0 && d.cdf(k - 1.0) >= u {
            k -= 1.0;
        }
    } else {
        while d.cdf(k) < u {
            k += 1.0;
        }
    }
    k
}

/// Quantile of Gamma(shape, 1) by safeguarded Newton iteration.
fn gamma_quantile(shape: f64, u: f64) -> f64 {
    // Wilson-Hilferty start
    let z = std_normal_quantile(u);
    let c = 1.0 / (9.0 * shape);
    let mut x = (shape * (1.0 - c + z * c.sqrt()).powi(3)).max(1e-8);
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    for _ in 0..200 {
        let f = gamma_lr(shape, x) - u;
        if f > 0.0 {
            hi = hi.min(x);
        } else {
            lo = lo.max(x);
        }
        let ln_pdf = (shape - 1.0) * x.ln() - x - ln_gamma(shape);
        let mut next = x - f / ln_pdf.exp();
        if !(next > lo && next < hi) || !next.is_finite() {
            next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * x.max(lo) + 1.0 };
        }
        if (next - x).abs() <= 1e-14 * x.max(1e-300) {
            return next;
        }
        x = next;
    }
    x
}

/// Maps values to the unit interval for fitting and back for sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rescale {
    pub divisor: f64,
    pub multiplier: f64,
}

/// A distribution plus an optional output rescale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    #[serde(flatten)]
    pub distribution: Distribution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rescale: Option<Rescale>,
}

impl Marginal {
    pub fn new(distribution: Distribution) -> Self {
        Self {
            distribution,
            rescale: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.distribution.validate()?;
        if let Some(r) = self.rescale {
            positive("rescale divisor", r.divisor)?;
            positive("rescale multiplier", r.multiplier)?;
        }
        Ok(())
    }

    fn multiplier(&self) -> f64 {
        self.rescale.map_or(1.0, |r| r.multiplier)
    }

    pub fn quantile(&self, u: f64) -> f64 {
        self.distribution.quantile(u) * self.multiplier()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.distribution.cdf(x / self.multiplier())
    }

    /// Prepared inverse CDF for repeated sampling.
    pub fn sampler(&self) -> QuantileSampler {
        QuantileSampler::new(*self)
    }
}

/// Inverse CDF with a lookup table for the discrete families.
#[derive(Debug, Clone)]
pub struct QuantileSampler {
    marginal: Marginal,
    table: Vec<f64>,
}

impl QuantileSampler {
    fn new(marginal: Marginal) -> Self {
        let mut table = Vec::new();
        if marginal.distribution.family().is_discrete() {
            let d = marginal.distribution;
            let mut k = 0.0;
            loop {
                let c = d.cdf(k);
                table.push(c);
                if c >= 1.0 - 1e-12 || table.len() >= 1_000_000 {
                    break;
                }
                k += 1.0;
            }
        }
        Self { marginal, table }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        // the table holds cdf(0), cdf(1), ... so the first entry >= u is the
        // discrete quantile; beyond the table fall back to the search
        if let Some(&last) = self.table.last() {
            if u <= last {
                let k = self.table.partition_point(|&c| c < u);
                return k as f64 * self.marginal.multiplier();
            }
        }
        self.marginal.quantile(u)
    }
}

/// A fitted marginal with its likelihood summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittedMarginal {
    #[serde(flatten)]
    pub marginal: Marginal,
    pub log_likelihood: f64,
    pub aic: f64,
    pub n: usize,
}

impl FittedMarginal {
    pub fn family(&self) -> Family {
        self.marginal.distribution.family()
    }
}

fn support(family: Family, value: f64) -> Error {
    Error::Support {
        family: family.name(),
        value,
    }
}

fn failed(family: Family, reason: impl Into<String>) -> Error {
    Error::FitFailed {
        family: family.name(),
        reason: reason.into(),
    }
}

fn check_support(family: Family, data: &[f64]) -> Result<()> {
    if data.is_empty() {
        return Err(Error::TooFewValues { needed: 1, got: 0 });
    }
    for &x in data {
        let ok = match family {
            Family::Poisson | Family::NegativeBinomial => x >= 0.0 && x.fract() == 0.0,
            Family::Gamma | Family::LogNormal | Family::Weibull => x > 0.0,
            Family::Exponential => x >= 0.0,
            Family::Normal => x.is_finite(),
            Family::Beta => x > 0.0 && x < 1.0,
        };
        if !ok || !x.is_finite() {
            return Err(support(family, x));
        }
    }
    Ok(())
}

fn mean(data: &[f64]) -> f64 {
    data.iter().sum::<f64>() / data.len() as f64
}

/// Trigamma by recurrence up to 12 then the asymptotic series.
pub(crate) fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 12.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let x2 = 1.0 / (x * x);
    acc + 1.0 / x + x2 / 2.0 + x2 / x * (1.0 / 6.0 - x2 * (1.0 / 30.0 - x2 * (1.0 / 42.0 - x2 * (1.0 / 30.0 - x2 * 5.0 / 66.0))))
}

/// Maximizes a unimodal function of one variable on `[lo, hi]`.
fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > tol {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        }
    }
    0.5 * (lo + hi)
}

fn fit_nb(data: &[f64]) -> Result<Distribution> {
    let family = Family::NegativeBinomial;
    let m = mean(data);
    if m <= 0.0 {
        return Err(failed(family, "sample mean is zero"));
    }
    let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
    for &y in data {
        *counts.entry(y as u64).or_default() += 1;
    }
    let n = data.len() as f64;
    let profile = |log_r: f64| {
        let r = log_r.exp();
        let s: f64 = counts
            .iter()
            .map(|(&y, &c)| c as f64 * (ln_gamma(y as f64 + r) - ln_gamma(r)))
            .sum();
        s + n * r * (r / (r + m)).ln() + n * m * (m / (r + m)).ln()
    };
    // coarse scan, then golden section around the best grid point
    let (lo, hi) = (-7.0f64, 18.5f64);
    let steps = 100;
    let h = (hi - lo) / steps as f64;
    let best = (0..=steps)
        .map(|i| lo + i as f64 * h)
        .max_by(|a, b| profile(*a).total_cmp(&profile(*b)))
        .expect("nonempty grid");
    let log_r = golden_max(profile, (best - h).max(lo), (best + h).min(hi), 1e-10);
    Ok(Distribution::NegativeBinomial {
        mean: m,
        dispersion: log_r.exp(),
    })
}

fn fit_gamma(data: &[f64]) -> Result<Distribution> {
    let m = mean(data);
    let s = m.ln() - data.iter().map(|x| x.ln()).sum::<f64>() / data.len() as f64;
    if !(s > 1e-12) {
        return Err(failed(Family::Gamma, "data are constant"));
    }
    let mut a = (3.0 - s + ((s - 3.0).powi(2) + 24.0 * s).sqrt()) / (12.0 * s);
    for _ in 0..100 {
        let f = a.ln() - digamma(a) - s;
        let df = 1.0 / a - trigamma(a);
        let next = (a - f / df).max(a / 10.0);
        if (next - a).abs() < 1e-13 * a {
            a = next;
            break;
        }
        a = next;
    }
    Ok(Distribution::Gamma { shape: a, rate: a / m })
}

fn fit_weibull(data: &[f64]) -> Result<Distribution> {
    let max = data.iter().cloned().fold(f64::MIN, f64::max);
    let ys: Vec<f64> = data.iter().map(|x| x / max).collect();
    let ln_ys: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mean_ln = mean(&ln_ys);
    if ln_ys.iter().all(|&l| (l - mean_ln).abs() < 1e-15) {
        return Err(failed(Family::Weibull, "data are constant"));
    }
    // increasing in k; root gives the shape MLE
    let g = |k: f64| {
        let (mut num, mut den) = (0.0, 0.0);
        for (y, l) in ys.iter().zip(&ln_ys) {
            let p = y.powf(k);
            num += p * l;
            den += p;
        }
        num / den - 1.0 / k - mean_ln
    };
    let (mut lo, mut hi) = (1e-3, 1.0);
    while g(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(failed(Family::Weibull, "shape diverges"));
        }
    }
    while g(lo) > 0.0 {
        lo /= 2.0;
        if lo < 1e-12 {
            return Err(failed(Family::Weibull, "shape collapses"));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 * hi {
            break;
        }
    }
    let k = 0.5 * (lo + hi);
    let scale = max * (ys.iter().map(|y| y.powf(k)).sum::<f64>() / ys.len() as f64).powf(1.0 / k);
    Ok(Distribution::Weibull { shape: k, scale })
}

fn fit_beta(data: &[f64]) -> Result<Distribution> {
    let n = data.len() as f64;
    let m = mean(data);
    let v = data.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    if !(v > 0.0) {
        return Err(failed(Family::Beta, "data are constant"));
    }
    let ln_x = data.iter().map(|x| x.ln()).sum::<f64>() / n;
    let ln_1mx = data.iter().map(|x| (-x).ln_1p()).sum::<f64>() / n;
    let common = (m * (1.0 - m) / v - 1.0).max(1e-3);
    let (mut a, mut b) = (m * common, (1.0 - m) * common);
    let ll = |a: f64, b: f64| (a - 1.0) * ln_x + (b - 1.0) * ln_1mx - ln_beta(a, b);
    for _ in 0..200 {
        let dab = digamma(a + b);
        let (ga, gb) = (dab - digamma(a) + ln_x, dab - digamma(b) + ln_1mx);
        let tab = trigamma(a + b);
        let (haa, hbb, hab) = (tab - trigamma(a), tab - trigamma(b), tab);
        let det = haa * hbb - hab * hab;
        let (da, db) = ((hbb * ga - hab * gb) / det, (haa * gb - hab * ga) / det);
        // Newton step is x - H^{-1} g; halve until parameters stay positive and ll improves
        let mut t = 1.0;
        let base = ll(a, b);
        let (mut na, mut nb) = (a - da, b - db);
        while (na <= 0.0 || nb <= 0.0 || ll(na, nb) < base - 1e-14) && t > 1e-10 {
            t /= 2.0;
            na = a - t * da;
            nb = b - t * db;
        }
        if na <= 0.0 || nb <= 0.0 {
            return Err(failed(Family::Beta, "Newton iteration left the parameter space"));
        }
        let done = (na - a).abs() < 1e-12 * a && (nb - b).abs() < 1e-12 * b;
        a = na;
        b = nb;
        if done {
            break;
        }
    }
    Ok(Distribution::Beta { alpha: a, beta: b })
}

fn mle(data: &[f64], family: Family) -> Result<Distribution> {
    check_support(family, data)?;
    let n = data.len() as f64;
    let d = match family {
        Family::Poisson => {
            let m = mean(data);
            if m <= 0.0 {
                return Err(failed(family, "sample mean is zero"));
            }
            Distribution::Poisson { lambda: m }
        }
        Family::NegativeBinomial => fit_nb(data)?,
        Family::Gamma => fit_gamma(data)?,
        Family::LogNormal => {
            let logs: Vec<f64> = data.iter().map(|x| x.ln()).collect();
            let ml = mean(&logs);
            let sl = (logs.iter().map(|l| (l - ml).powi(2)).sum::<f64>() / n).sqrt();
            if !(sl > 0.0) {
                return Err(failed(family, "data are constant"));
            }
            Distribution::LogNormal { meanlog: ml, sdlog: sl }
        }
        Family::Exponential => {
            let m = mean(data);
            if m <= 0.0 {
                return Err(failed(family, "sample mean is zero"));
            }
            Distribution::Exponential { rate: 1.0 / m }
        }
        Family::Weibull => fit_weibull(data)?,
        Family::Normal => {
            let m = mean(data);
            let sd = (data.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt();
            if !(sd > 0.0) {
                return Err(failed(family, "data are constant"));
            }
            Distribution::Normal { mean: m, sd }
        }
        Family::Beta => fit_beta(data)?,
    };
    d.validate().map_err(|e| failed(family, e.to_string()))?;
    Ok(d)
}

fn summarize(data: &[f64], marginal: Marginal, jacobian: f64) -> FittedMarginal {
    let d = marginal.distribution;
    let ll = data.iter().map(|&x| d.ln_density(x)).sum::<f64>() - jacobian;
    let k = d.family().n_params() as f64;
    FittedMarginal {
        marginal,
        log_likelihood: ll,
        aic: 2.0 * k - 2.0 * ll,
        n: data.len(),
    }
}

/// Maximum-likelihood fit of one family.
pub fn fit_marginal(data: &[f64], family: Family) -> Result<FittedMarginal> {
    let d = mle(data, family)?;
    Ok(summarize(data, Marginal::new(d), 0.0))
}

/// Fits on `data / divisor`; samples are multiplied back by `divisor`.
/// The log-likelihood includes the change-of-scale term so it refers to
/// the original data.
pub fn fit_marginal_rescaled(data: &[f64], family: Family, divisor: f64) -> Result<FittedMarginal> {
    positive("rescale divisor", divisor)?;
    if family.is_discrete() {
        return Err(failed(family, "rescaling applies to continuous families only"));
    }
    let scaled: Vec<f64> = data.iter().map(|x| x / divisor).collect();
    let d = mle(&scaled, family)?;
    let marginal = Marginal {
        distribution: d,
        rescale: Some(Rescale {
            divisor,
            multiplier: divisor,
        }),
    };
    Ok(summarize(&scaled, marginal, data.len() as f64 * divisor.ln()))
}

/// A family to try in [`select_marginal`], optionally on rescaled data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub divisor: Option<f64>,
}

impl From<Family> for Candidate {
    fn from(family: Family) -> Self {
        Self { family, divisor: None }
    }
}

/// Minimum-AIC fit among `candidates`; ties go to fewer parameters, then
/// to the earlier candidate.
pub fn select_marginal(data: &[f64], candidates: &[Candidate]) -> Result<FittedMarginal> {
    let mut best: Option<FittedMarginal> = None;
    let mut failures = Vec::new();
    for c in candidates {
        let fit = match c.divisor {
            Some(d) => fit_marginal_rescaled(data, c.family, d),
            None => fit_marginal(data, c.family),
        };
        match fit {
            Ok(f) => {
                let better = match &best {
                    None => true,
                    Some(b) => {
                        let tie = (f.aic - b.aic).abs() <= 1e-9 * b.aic.abs().max(1.0);
                        if tie {
                            f.family().n_params() < b.family().n_params()
                        } else {
                            f.aic < b.aic
                        }
                    }
                };
                if better {
                    best = Some(f);
                }
            }
            Err(e) => failures.push((c.family.name().to_string(), e.to_string())),
        }
    }
    best.ok_or(Error::NoCandidate(failures))
}

/// `(theoretical, empirical)` quantile pairs at plotting positions
/// `(i - 0.5) / n`.
pub fn qq_pairs(data: &[f64], marginal: &Marginal) -> Vec<(f64, f64)> {
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let sampler = marginal.sampler();
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| (sampler.quantile((i as f64 + 0.5) / n), x))
        .collect()
}
