//! Scoring: precision and recall against the unexpected label, an
//! independence score from plug-in total correlation, and their means.
//!
//! Total correlation of binary columns `X1..Xn` is
//! `sum_i H(Xi) - H(X1, ..., Xn)` with empirical frequencies, which equals
//! the Kullback-Leibler divergence between the joint distribution and the
//! product of its marginals. The independence score is one minus that value.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::checks::CheckMatrix;
use crate::error::{Error, Result};
use crate::logreg::FittedModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn from_predictions(pred: &[bool], label: &[bool]) -> Result<Self> {
        if pred.len() != label.len() {
            return Err(Error::LengthMismatch {
                left: pred.len(),
                right: label.len(),
            });
        }
        let mut c = Confusion::default();
        for (&p, &l) in pred.iter().zip(label) {
            match (p, l) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }

    /// `None` when nothing was predicted positive.
    pub fn precision(&self) -> Option<f64> {
        let d = self.tp + self.fp;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    /// `None` when there are no positive labels.
    pub fn recall(&self) -> Option<f64> {
        let d = self.tp + self.fn_;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionRecall {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

pub fn precision_recall(pred: &[bool], label: &[bool]) -> Result<PrecisionRecall> {
    let c = Confusion::from_predictions(pred, label)?;
    Ok(PrecisionRecall {
        precision: c.precision(),
        recall: c.recall(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    #[default]
    Nats,
    Bits,
}

impl LogBase {
    fn scale(self) -> f64 {
        match self {
            LogBase::Nats => 1.0,
            LogBase::Bits => std::f64::consts::LN_2,
        }
    }
}

/// `ln R - (1/R) sum c ln c` over the counts of each observed pattern.
fn entropy_from_counts<'a>(counts: impl Iterator<Item = &'a u64>, total: u64) -> f64 {
    let r = total as f64;
    let s: f64 = counts.filter(|&&c| c > 0).map(|&c| c as f64 * (c as f64).ln()).sum();
    r.ln() - s / r
}

fn entropy_of_patterns<K: std::hash::Hash + Eq>(patterns: impl Iterator<Item = K>, total: u64) -> f64 {
    let mut counts: HashMap<K, u64> = HashMap::new();
    for p in patterns {
        *counts.entry(p).or_default() += 1;
    }
    // fixed summation order so results are bit-for-bit reproducible
    let mut counts: Vec<u64> = counts.into_values().collect();
    counts.sort_unstable();
    entropy_from_counts(counts.iter(), total)
}

/// Plug-in total correlation in nats. Zero for fewer than two columns.
pub fn total_correlation(columns: &[Vec<bool>]) -> f64 {
    total_correlation_in(columns, LogBase::Nats)
}

pub fn total_correlation_in(columns: &[Vec<bool>], base: LogBase) -> f64 {
    if columns.len() < 2 {
        return 0.0;
    }
    let r = columns[0].len();
    if r == 0 {
        return 0.0;
    }
    debug_assert!(columns.iter().all(|c| c.len() == r));
    let marginal: f64 = columns
        .iter()
        .map(|c| {
            let ones = c.iter().filter(|&&b| b).count() as u64;
            entropy_from_counts([ones, r as u64 - ones].iter(), r as u64)
        })
        .sum();
    let joint = if columns.len() <= 128 {
        entropy_of_patterns(
            (0..r).map(|i| columns.iter().enumerate().fold(0u128, |acc, (j, c)| acc | (c[i] as u128) << j)),
            r as u64,
        )
    } else {
        entropy_of_patterns((0..r).map(|i| columns.iter().map(|c| c[i]).collect::<Vec<_>>()), r as u64)
    };
    ((marginal - joint) / base.scale()).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Independence {
    /// `1 - total correlation`, may be negative.
    pub raw: f64,
    /// `raw` clamped below at zero, used for reporting and means.
    pub clamped: f64,
}

pub fn independence_score(columns: &[Vec<bool>]) -> Independence {
    independence_score_in(columns, LogBase::Nats)
}

pub fn independence_score_in(columns: &[Vec<bool>], base: LogBase) -> Independence {
    let raw = 1.0 - total_correlation_in(columns, base);
    Independence {
        raw,
        clamped: raw.max(0.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeanKind {
    Harmonic,
    Arithmetic,
    Quadratic,
}

/// Mean of precision, recall and independence. `None` for a harmonic mean
/// with a zero input or any negative input.
pub fn combine(precision: f64, recall: f64, independence: f64, kind: MeanKind) -> Option<f64> {
    let v = [precision, recall, independence];
    if v.iter().any(|x| !(*x >= 0.0)) {
        return None;
    }
    match kind {
        MeanKind::Arithmetic => Some(v.iter().sum::<f64>() / 3.0),
        MeanKind::Quadratic => Some((v.iter().map(|x| x * x).sum::<f64>() / 3.0).sqrt()),
        MeanKind::Harmonic => {
            if v.iter().any(|&x| x == 0.0) {
                None
            } else {
                Some(3.0 / v.iter().map(|x| 1.0 / x).sum::<f64>())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub subject: String,
    pub label: String,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub independence: f64,
    pub independence_raw: f64,
    pub harmonic_mean: Option<f64>,
    pub arithmetic_mean: Option<f64>,
    pub quadratic_mean: Option<f64>,
    pub checks_in_scope: Vec<String>,
    pub log_base: LogBase,
    pub confusion: Confusion,
}

pub enum Subject<'a> {
    Check(&'a str),
    Model { id: &'a str, model: &'a FittedModel },
}

/// Scores a single check (as its own predictor) or a fitted model.
///
/// `labels` maps check ids to display text; ids missing from it are shown
/// as-is.
pub fn score_subject(matrix: &CheckMatrix, subject: Subject<'_>, labels: &HashMap<String, String>) -> Result<ScoreReport> {
    let (id, label, pred, scope) = match subject {
        Subject::Check(id) => {
            let k = matrix.check_index(id)?;
            let label = labels.get(id).cloned().unwrap_or_else(|| id.to_string());
            (id.to_string(), label, matrix.column(k), vec![k])
        }
        Subject::Model { id, model } => {
            let scope = model
                .leaf_checks()
                .iter()
                .map(|c| matrix.check_index(c))
                .collect::<Result<Vec<_>>>()?;
            // remap leaf indices from the model's check list to this matrix
            let mapping = model
                .checks
                .iter()
                .map(|c| matrix.check_index(c).ok())
                .collect::<Vec<_>>();
            let pred = matrix
                .rows()
                .iter()
                .map(|row| {
                    let local: Vec<bool> = mapping.iter().map(|m| m.is_some_and(|j| row[j])).collect();
                    model.tree.eval(&local)
                })
                .collect::<Result<Vec<_>>>()?;
            let names: Vec<String> = model.checks.iter().map(|c| labels.get(c).cloned().unwrap_or_else(|| c.clone())).collect();
            (id.to_string(), model.tree.render(&names), pred, scope)
        }
    };
    let confusion = Confusion::from_predictions(&pred, matrix.unexpected())?;
    let columns: Vec<Vec<bool>> = scope.iter().map(|&k| matrix.column(k)).collect();
    let ind = independence_score(&columns);
    let (precision, recall) = (confusion.precision(), confusion.recall());
    let mean = |kind| match (precision, recall) {
        (Some(p), Some(r)) => combine(p, r, ind.clamped, kind),
        _ => None,
    };
    Ok(ScoreReport {
        subject: id,
        label,
        precision,
        recall,
        independence: ind.clamped,
        independence_raw: ind.raw,
        harmonic_mean: mean(MeanKind::Harmonic),
        arithmetic_mean: mean(MeanKind::Arithmetic),
        quadratic_mean: mean(MeanKind::Quadratic),
        checks_in_scope: scope.iter().map(|&k| matrix.checks()[k].clone()).collect(),
        log_base: LogBase::Nats,
        confusion,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

/// Writes the score table: Checks, Precision, Recall, Independence,
/// Harmonic, Arithmetic. Undefined values render as `NA`.
pub fn write_scores_csv<W: Write>(reports: &[ScoreReport], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["Checks", "Precision", "Recall", "Independence", "Harmonic", "Arithmetic"])?;
    for r in reports {
        w.write_record([
            format!("{}: {}", r.subject, r.label),
            cell(r.precision),
            cell(r.recall),
            format!("{:.6}", r.independence),
            cell(r.harmonic_mean),
            cell(r.arithmetic_mean),
        ])?;
    }
    w.flush()?;
    Ok(())
}
