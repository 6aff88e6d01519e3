use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use avcheck::checks::Statistic;
use avcheck::metrics::Confusion;
use avcheck::{CheckDef, ExpectationDef, FittedModel};

use crate::config::Analysis;
use crate::error::{CliError, Result};
use crate::pipeline::{compute_outcome, create, io_err, read_table};

pub const PREDICTIONS: &str = "predictions.csv";
pub const CONFUSION: &str = "confusion.csv";

/// One reported column of the prediction table: a statistic on a set of
/// columns, shown through one representative check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckFamily {
    pub header: String,
    pub check: CheckDef,
}

fn same_family(a: &CheckDef, b: &CheckDef) -> bool {
    a.statistic == b.statistic && a.columns == b.columns && a.p == b.p && a.k == b.k
}

fn family_header(c: &CheckDef) -> String {
    let cols = c.columns.join("-");
    match c.statistic {
        Statistic::Correlation => format!("Correlation: {cols}"),
        Statistic::OutlierCount => format!("{cols} Outlier"),
        Statistic::Quantile => format!("Quantile {}: {cols}", c.p.unwrap_or(f64::NAN)),
        Statistic::Sd => format!("SD: {cols}"),
        Statistic::Mean => format!("Mean: {cols}"),
    }
}

/// Groups the bank into families. Each family is represented by the first
/// model leaf that belongs to it, or else by its first bank entry. `order`
/// lists check ids whose families come first.
pub fn check_families(model: &FittedModel, bank: &[CheckDef], order: &[String]) -> Vec<CheckFamily> {
    let leaves: Vec<&CheckDef> = model
        .leaf_checks()
        .iter()
        .filter_map(|id| bank.iter().find(|c| &c.id == id))
        .collect();
    let mut heads: Vec<&CheckDef> = order.iter().filter_map(|id| bank.iter().find(|c| &c.id == id)).collect();
    heads.extend(bank.iter());
    let mut families: Vec<CheckFamily> = Vec::new();
    for head in heads {
        if families.iter().any(|f| same_family(&f.check, head)) {
            continue;
        }
        let rep = leaves.iter().find(|l| same_family(l, head)).copied().unwrap_or_else(|| {
            bank.iter().find(|c| same_family(c, head)).expect("head comes from the bank")
        });
        families.push(CheckFamily {
            header: family_header(rep),
            check: rep.clone(),
        });
    }
    families
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckCell {
    pub id: String,
    pub value: f64,
    pub failed: bool,
    pub statistic: Statistic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetPrediction {
    pub dataset: String,
    /// `None` when the analysis could not be computed.
    pub outcome: Option<f64>,
    pub observed_unexpected: Option<bool>,
    pub predicted_unexpected: bool,
    /// One cell per check family, in family order.
    pub checks: Vec<CheckCell>,
}

#[derive(Debug)]
pub struct ApplyResult {
    pub families: Vec<CheckFamily>,
    pub predictions: Vec<DatasetPrediction>,
    /// Files that could not be processed, with the reason.
    pub failures: Vec<(PathBuf, String)>,
    /// Over datasets with a computable outcome.
    pub confusion: Confusion,
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn evaluate(def: &CheckDef, table: &avcheck::DataTable) -> std::result::Result<CheckCell, String> {
    let value = def.statistic_value(table).map_err(|e| format!("check `{}`: {e}", def.id))?;
    Ok(CheckCell {
        id: def.id.clone(),
        value,
        failed: def.comparator.holds(value, def.threshold),
        statistic: def.statistic,
    })
}

/// Evaluates the model's checks, the reported check families and the
/// analysis on each dataset. A file that fails is recorded and the rest
/// are still processed.
pub fn apply_model(
    model: &FittedModel,
    bank: &[CheckDef],
    column_order: &[String],
    analysis: &Analysis,
    expectation: &ExpectationDef,
    datasets: &[PathBuf],
) -> Result<ApplyResult> {
    // position in model.checks -> definition, for the checks the tree uses
    let mut defs: Vec<Option<&CheckDef>> = vec![None; model.checks.len()];
    for k in model.tree.checks() {
        let id = &model.checks[k];
        let def = bank
            .iter()
            .find(|c| &c.id == id)
            .ok_or_else(|| CliError::UnknownModelCheck(id.clone()))?;
        defs[k] = Some(def);
    }
    let families = check_families(model, bank, column_order);

    let mut predictions = Vec::new();
    let mut failures = Vec::new();
    'files: for path in datasets {
        let table = match read_table(path) {
            Ok(t) => t,
            Err(e) => {
                failures.push((path.clone(), e.to_string()));
                continue;
            }
        };
        let mut cells: HashMap<&str, CheckCell> = HashMap::new();
        let needed = defs.iter().flatten().copied().chain(families.iter().map(|f| &f.check));
        for def in needed {
            if cells.contains_key(def.id.as_str()) {
                continue;
            }
            match evaluate(def, &table) {
                Ok(cell) => {
                    cells.insert(def.id.as_str(), cell);
                }
                Err(reason) => {
                    failures.push((path.clone(), reason));
                    continue 'files;
                }
            }
        }
        let row: Vec<bool> = defs
            .iter()
            .map(|d| d.is_some_and(|d| cells[d.id.as_str()].failed))
            .collect();
        let predicted = model.tree.eval(&row)?;
        let outcome = compute_outcome(analysis, &table).ok();
        predictions.push(DatasetPrediction {
            dataset: dataset_name(path),
            outcome,
            observed_unexpected: outcome.map(|o| expectation.is_unexpected(o)),
            predicted_unexpected: predicted,
            checks: families.iter().map(|f| cells[f.check.id.as_str()].clone()).collect(),
        });
    }

    let (pred, obs): (Vec<bool>, Vec<bool>) = predictions
        .iter()
        .filter_map(|p| p.observed_unexpected.map(|o| (p.predicted_unexpected, o)))
        .unzip();
    let confusion = Confusion::from_predictions(&pred, &obs)?;
    Ok(ApplyResult {
        families,
        predictions,
        failures,
        confusion,
    })
}

fn tf(b: bool) -> &'static str {
    if b {
        "T"
    } else {
        "F"
    }
}

fn check_cell(c: &CheckCell) -> String {
    match c.statistic {
        Statistic::OutlierCount => tf(c.failed).to_string(),
        _ => format!("{:.2} ({})", c.value, tf(c.failed)),
    }
}

/// `predictions.csv`: dataset, outcome, observed, predicted, then one
/// column per check family holding the statistic and its T/F result
/// (outlier checks show T/F only). Also writes `confusion.csv`.
pub fn write_predictions(result: &ApplyResult, expectation: &ExpectationDef, out: &Path) -> Result<Vec<PathBuf>> {
    let path = out.join(PREDICTIONS);
    let mut w = csv::Writer::from_writer(create(&path)?);
    let mut header = vec![
        "dataset".to_string(),
        expectation.outcome.clone(),
        "observed_unexpected".to_string(),
        "predicted_unexpected".to_string(),
    ];
    header.extend(result.families.iter().map(|f| f.header.clone()));
    w.write_record(&header).map_err(avcheck::Error::from)?;
    for p in &result.predictions {
        let mut rec = vec![
            p.dataset.clone(),
            p.outcome.map_or_else(String::new, |o| format!("{o:.4}")),
            p.observed_unexpected.map_or("", tf).to_string(),
            tf(p.predicted_unexpected).to_string(),
        ];
        rec.extend(p.checks.iter().map(check_cell));
        w.write_record(&rec).map_err(avcheck::Error::from)?;
    }
    w.flush().map_err(io_err(&path))?;

    let cpath = out.join(CONFUSION);
    let mut w = create(&cpath)?;
    let c = &result.confusion;
    write!(
        w,
        "Observed,Predicted FALSE,Predicted TRUE\nFALSE,{},{}\nTRUE,{},{}\n",
        c.tn, c.fp, c.fn_, c.tp
    )
    .map_err(io_err(&cpath))?;
    w.flush().map_err(io_err(&cpath))?;
    Ok(vec![path, cpath])
}
