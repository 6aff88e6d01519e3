//! Analysis validation checks and outcome expectations.
//!
//! A check is a statistic over named columns compared to a threshold. It
//! *fails* (encoded `true`, written as `1`) when the comparison holds. An
//! expectation is a closed interval; an outcome outside it is *unexpected*.
//!
//! Checks serialize as flat objects so a bank can live in a config file:
//!
//! ```json
//! {"id": "check1", "statistic": "quantile", "columns": ["step"], "p": 0.6,
//!  "comparator": ">", "threshold": 10000.0}
//! ```

use std::fmt;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;
use crate::table::DataTable;

/// Default Tukey fence multiplier for outlier-count checks.
pub const DEFAULT_FENCE: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Quantile,
    Mean,
    Sd,
    Correlation,
    OutlierCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
}

impl Comparator {
    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Comparator::Lt => value < threshold,
            Comparator::Gt => value > threshold,
            Comparator::Le => value <= threshold,
            Comparator::Ge => value >= threshold,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Comparator::Lt => "<",
            Comparator::Gt => ">",
            Comparator::Le => "<=",
            Comparator::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckDef {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub statistic: Statistic,
    pub columns: Vec<String>,
    /// Probability for `quantile`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// Fence multiplier for `outlier_count`; defaults to [`DEFAULT_FENCE`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    pub comparator: Comparator,
    pub threshold: f64,
}

impl CheckDef {
    fn base(id: &str, statistic: Statistic, columns: &[&str], cmp: Comparator, threshold: f64) -> Self {
        Self {
            id: id.to_string(),
            description: None,
            statistic,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            p: None,
            k: None,
            comparator: cmp,
            threshold,
        }
    }

    pub fn quantile(id: &str, column: &str, p: f64, cmp: Comparator, threshold: f64) -> Self {
        Self {
            p: Some(p),
            ..Self::base(id, Statistic::Quantile, &[column], cmp, threshold)
        }
    }

    pub fn mean(id: &str, column: &str, cmp: Comparator, threshold: f64) -> Self {
        Self::base(id, Statistic::Mean, &[column], cmp, threshold)
    }

    pub fn sd(id: &str, column: &str, cmp: Comparator, threshold: f64) -> Self {
        Self::base(id, Statistic::Sd, &[column], cmp, threshold)
    }

    pub fn correlation(id: &str, a: &str, b: &str, cmp: Comparator, threshold: f64) -> Self {
        Self::base(id, Statistic::Correlation, &[a, b], cmp, threshold)
    }

    /// Fails when the column has at least one Tukey outlier.
    pub fn has_outlier(id: &str, column: &str, k: f64) -> Self {
        Self {
            k: Some(k),
            ..Self::base(id, Statistic::OutlierCount, &[column], Comparator::Gt, 0.0)
        }
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.description = Some(description.into());
        self
    }

    /// Checks arity and parameters.
    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: &str| Error::InvalidCheck {
            id: self.id.clone(),
            reason: reason.to_string(),
        };
        let arity = match self.statistic {
            Statistic::Correlation => 2,
            _ => 1,
        };
        if self.columns.len() != arity {
            return Err(invalid(&format!("expected {arity} column(s)")));
        }
        if self.threshold.is_nan() {
            return Err(invalid("threshold is NaN"));
        }
        match self.statistic {
            Statistic::Quantile => match self.p {
                Some(p) if (0.0..=1.0).contains(&p) => {}
                Some(_) => return Err(invalid("p must lie in [0, 1]")),
                None => return Err(invalid("quantile requires `p`")),
            },
            Statistic::OutlierCount => {
                if matches!(self.k, Some(k) if !(k >= 0.0)) {
                    return Err(invalid("k must be nonnegative"));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// The statistic the check thresholds.
    pub fn statistic_value(&self, data: &DataTable) -> Result<f64> {
        self.validate()?;
        let col = |i: usize| data.values(&self.columns[i]);
        match self.statistic {
            Statistic::Quantile => stats::quantile(col(0)?, self.p.unwrap_or(0.5)),
            Statistic::Mean => stats::mean(col(0)?),
            Statistic::Sd => stats::std_dev(col(0)?),
            Statistic::Correlation => stats::pearson_corr(col(0)?, col(1)?),
            Statistic::OutlierCount => {
                stats::tukey_outliers(col(0)?, self.k.unwrap_or(DEFAULT_FENCE)).map(|v| v.len() as f64)
            }
        }
    }

    /// `true` when the check fails on `data`.
    pub fn evaluate(&self, data: &DataTable) -> Result<bool> {
        Ok(self.comparator.holds(self.statistic_value(data)?, self.threshold))
    }

    /// Human-readable predicate, e.g. `q(step, 0.6) > 10000`.
    pub fn label(&self) -> String {
        self.description.clone().unwrap_or_else(|| self.to_string())
    }
}

impl fmt::Display for CheckDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cols = self.columns.join(", ");
        let cmp = self.comparator.symbol();
        match self.statistic {
            Statistic::Quantile => write!(f, "q({cols}, {}) {cmp} {}", self.p.unwrap_or(0.5), self.threshold),
            Statistic::Mean => write!(f, "mean({cols}) {cmp} {}", self.threshold),
            Statistic::Sd => write!(f, "sd({cols}) {cmp} {}", self.threshold),
            Statistic::Correlation => write!(f, "cor({cols}) {cmp} {}", self.threshold),
            Statistic::OutlierCount => write!(f, "outliers({cols}) {cmp} {}", self.threshold),
        }
    }
}

/// Evaluates a single check. Free-function form of [`CheckDef::evaluate`].
pub fn evaluate_check(check: &CheckDef, data: &DataTable) -> Result<bool> {
    check.evaluate(data)
}

/// Closed interval of expected outcome values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawExpectation")]
pub struct ExpectationDef {
    pub outcome: String,
    lo: f64,
    hi: f64,
}

#[derive(Deserialize)]
struct RawExpectation {
    outcome: String,
    lo: f64,
    hi: f64,
}

impl TryFrom<RawExpectation> for ExpectationDef {
    type Error = Error;

    fn try_from(raw: RawExpectation) -> Result<Self> {
        Self::new(raw.outcome, raw.lo, raw.hi)
    }
}

impl ExpectationDef {
    pub fn new(outcome: impl Into<String>, lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) {
            return Err(Error::InvalidInterval { lo, hi });
        }
        Ok(Self {
            outcome: outcome.into(),
            lo,
            hi,
        })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// `true` when `value` is unexpected. Endpoints are expected; NaN is not.
    pub fn is_unexpected(&self, value: f64) -> bool {
        !(self.lo <= value && value <= self.hi)
    }
}

pub fn evaluate_expectation(exp: &ExpectationDef, outcome_value: f64) -> bool {
    exp.is_unexpected(outcome_value)
}

/// Replicates x checks failure matrix plus the unexpected-outcome label.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckMatrix {
    checks: Vec<String>,
    rows: Vec<Vec<bool>>,
    unexpected: Vec<bool>,
}

impl CheckMatrix {
    pub fn new(checks: Vec<String>, rows: Vec<Vec<bool>>, unexpected: Vec<bool>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::TooFewValues { needed: 1, got: 0 });
        }
        if rows.len() != unexpected.len() {
            return Err(Error::LengthMismatch {
                left: rows.len(),
                right: unexpected.len(),
            });
        }
        if let Some(r) = rows.iter().find(|r| r.len() != checks.len()) {
            return Err(Error::LengthMismatch {
                left: r.len(),
                right: checks.len(),
            });
        }
        Ok(Self {
            checks,
            rows,
            unexpected,
        })
    }

    pub fn checks(&self) -> &[String] {
        &self.checks
    }

    pub fn rows(&self) -> &[Vec<bool>] {
        &self.rows
    }

    pub fn unexpected(&self) -> &[bool] {
        &self.unexpected
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_checks(&self) -> usize {
        self.checks.len()
    }

    pub fn check_index(&self, id: &str) -> Result<usize> {
        self.checks
            .iter()
            .position(|c| c == id)
            .ok_or_else(|| Error::UnknownCheck(id.to_string()))
    }

    pub fn column(&self, k: usize) -> Vec<bool> {
        self.rows.iter().map(|r| r[k]).collect()
    }

    /// Header is the check ids followed by `unexpected`; cells are `0`/`1`.
    pub fn to_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.checks.iter().map(String::as_str).chain(["unexpected"]))?;
        let bit = |b: bool| if b { "1" } else { "0" };
        for (row, &u) in self.rows.iter().zip(&self.unexpected) {
            w.write_record(row.iter().map(|&b| bit(b)).chain([bit(u)]))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if headers.last().map(String::as_str) != Some("unexpected") {
            return Err(Error::MissingColumn("unexpected".into()));
        }
        headers.pop();
        let mut rows = Vec::new();
        let mut unexpected = Vec::new();
        for (r, record) in rdr.records().enumerate() {
            let record = record?;
            let mut bits = record
                .iter()
                .enumerate()
                .map(|(j, cell)| match cell.trim() {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    other => Err(Error::CsvCell {
                        row: r + 1,
                        column: headers.get(j).cloned().unwrap_or_else(|| "unexpected".into()),
                        cell: other.to_string(),
                    }),
                })
                .collect::<Result<Vec<_>>>()?;
            unexpected.push(bits.pop().unwrap_or(false));
            rows.push(bits);
        }
        Self::new(headers, rows, unexpected)
    }
}

/// One analysed replicate: the data and the analysis outcome.
#[derive(Debug, Clone)]
pub struct Replicate {
    pub table: DataTable,
    pub outcome: f64,
}

/// Like [`build_check_matrix`] but generates replicate `i` on demand with
/// `generate(i)` so only the check bits and outcomes are kept in memory.
/// Returns the matrix and the outcome values in replicate order.
pub fn simulate_check_matrix<F>(
    checks: &[CheckDef],
    exp: &ExpectationDef,
    n_replicates: usize,
    generate: F,
) -> Result<(CheckMatrix, Vec<f64>)>
where
    F: Fn(usize) -> Result<Replicate> + Sync,
{
    if checks.is_empty() || n_replicates == 0 {
        return Err(Error::TooFewValues { needed: 1, got: 0 });
    }
    for c in checks {
        c.validate()?;
    }
    let rows = (0..n_replicates)
        .into_par_iter()
        .map(|i| {
            let rep = generate(i).map_err(|e| e.at_replicate(i))?;
            let bits = checks
                .iter()
                .map(|c| c.evaluate(&rep.table))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| e.at_replicate(i))?;
            Ok((bits, rep.outcome))
        })
        .collect::<Result<Vec<_>>>()?;
    let (rows, outcomes): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    let unexpected = outcomes.iter().map(|&o| exp.is_unexpected(o)).collect();
    let matrix = CheckMatrix::new(checks.iter().map(|c| c.id.clone()).collect(), rows, unexpected)?;
    Ok((matrix, outcomes))
}

/// Evaluates every check on every replicate. Row order follows `replicates`.
pub fn build_check_matrix(
    checks: &[CheckDef],
    exp: &ExpectationDef,
    replicates: &[Replicate],
) -> Result<CheckMatrix> {
    if checks.is_empty() || replicates.is_empty() {
        return Err(Error::TooFewValues { needed: 1, got: 0 });
    }
    for c in checks {
        c.validate()?;
    }
    let rows = replicates
        .par_iter()
        .enumerate()
        .map(|(i, rep)| {
            checks
                .iter()
                .map(|c| c.evaluate(&rep.table))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| e.at_replicate(i))
        })
        .collect::<Result<Vec<_>>>()?;
    let unexpected = replicates.iter().map(|r| exp.is_unexpected(r.outcome)).collect();
    CheckMatrix::new(checks.iter().map(|c| c.id.clone()).collect(), rows, unexpected)
}
