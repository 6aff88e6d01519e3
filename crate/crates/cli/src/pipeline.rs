use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use avcheck::glm::pm10_outcome;
use avcheck::logreg::fit;
use avcheck::metrics::{score_subject, write_scores_csv, ScoreReport, Subject};
use avcheck::simgen::{
    qq_pairs, replicate_rng, select_marginal, simulate_copula_table, simulate_step_table, CopulaScenario,
    FittedMarginal, StepScenario,
};
use avcheck::stats;
use avcheck::{CheckMatrix, DataTable, FittedModel};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{build_copula, Analysis, CopulaConfig, ScenarioConfig, Scenario};
use crate::error::{CliError, Result};

pub const CHECK_MATRIX: &str = "checkmatrix.csv";
pub const OUTCOMES: &str = "outcomes.csv";
pub const MODEL_JSON: &str = "model.json";
pub const MODEL_DOT: &str = "model.dot";
pub const SCORES_CSV: &str = "scores.csv";
pub const SCORES_JSON: &str = "scores.json";
pub const REPORT_MD: &str = "report.md";
pub const MARGINALS_JSON: &str = "marginals.json";

/// Subject name of the fitted model in score tables.
pub const MODEL_SUBJECT: &str = "Logic regression";

/// Per-replicate diagnostics written to `outcomes.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateLog {
    pub replicate: usize,
    pub outcome: f64,
    pub unexpected: bool,
    /// Copula grid matrix used, or low/high day counts for the step model.
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct FittedVariable {
    pub name: String,
    pub fit: FittedMarginal,
    #[serde(skip)]
    pub qq: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub matrix: CheckMatrix,
    pub log: Vec<ReplicateLog>,
    pub fitted: Vec<FittedVariable>,
}

/// Evaluates the configured analysis on one dataset.
pub fn compute_outcome(analysis: &Analysis, table: &DataTable) -> avcheck::Result<f64> {
    match analysis {
        Analysis::Mean { column } => stats::mean(table.values(column)?),
        Analysis::Quantile { column, p } => stats::quantile(table.values(column)?, *p),
        Analysis::Sd { column } => stats::std_dev(table.values(column)?),
        Analysis::Pm10Glm => pm10_outcome(table),
    }
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

pub(crate) fn read_table(path: &Path) -> Result<DataTable> {
    let file = File::open(path).map_err(io_err(path))?;
    DataTable::from_csv(file).map_err(|source| CliError::Data {
        path: path.to_path_buf(),
        source,
    })
}

fn fit_marginals(config: &ScenarioConfig, copula: &CopulaConfig) -> Result<Vec<FittedVariable>> {
    let Some(seed_csv) = &copula.seed_csv else {
        return Ok(Vec::new());
    };
    let path = config.resolve(seed_csv);
    let table = read_table(&path)?;
    let mut out = Vec::new();
    for v in &copula.variables {
        let Some(cands) = &v.candidates else { continue };
        let column = v.column.as_deref().unwrap_or(&v.name);
        let data = table.values(column).map_err(|source| CliError::Data {
            path: path.clone(),
            source,
        })?;
        let fit = select_marginal(data, cands)?;
        let qq = qq_pairs(data, &fit.marginal);
        out.push(FittedVariable {
            name: v.name.clone(),
            fit,
            qq,
        });
    }
    Ok(out)
}

fn evaluate(config: &ScenarioConfig, index: usize, table: &DataTable, detail: String) -> avcheck::Result<(Vec<bool>, ReplicateLog)> {
    let bits = config
        .checks
        .iter()
        .map(|c| c.evaluate(table))
        .collect::<avcheck::Result<Vec<_>>>()?;
    let outcome = compute_outcome(&config.analysis, table)?;
    let log = ReplicateLog {
        replicate: index,
        outcome,
        unexpected: config.expectation.is_unexpected(outcome),
        detail,
    };
    Ok((bits, log))
}

fn at(index: usize) -> impl FnOnce(avcheck::Error) -> avcheck::Error {
    move |e| avcheck::Error::Replicate {
        index,
        source: Box::new(e),
    }
}

/// Replicate source prepared from a config. Replicate `i` uses its own
/// random stream, so results do not depend on the thread count.
#[derive(Debug, Clone)]
pub enum Generator {
    Step { scenario: StepScenario, seed: u64 },
    Copula { scenario: CopulaScenario, seed: u64 },
    Replay { files: Vec<PathBuf> },
}

impl Generator {
    /// Fits any requested marginals and builds the scenario.
    pub fn new(config: &ScenarioConfig) -> Result<(Self, Vec<FittedVariable>)> {
        let seed = config.seed;
        Ok(match &config.scenario {
            Scenario::Step(s) => (
                Generator::Step {
                    scenario: s.clone(),
                    seed,
                },
                Vec::new(),
            ),
            Scenario::Copula(copula) => {
                let fitted = fit_marginals(config, copula)?;
                let scenario = build_copula(copula, |i| {
                    let name = &copula.variables[i].name;
                    fitted.iter().find(|f| &f.name == name).map(|f| f.fit.marginal)
                })?;
                (Generator::Copula { scenario, seed }, fitted)
            }
            Scenario::CsvReplay(r) => (
                Generator::Replay {
                    files: r.files.iter().map(|f| config.resolve(f)).collect(),
                },
                Vec::new(),
            ),
        })
    }

    pub fn len(&self, replicates: usize) -> usize {
        match self {
            Generator::Replay { files } => files.len(),
            _ => replicates,
        }
    }

    /// Table for replicate `i` with a short diagnostic string.
    pub fn table(&self, i: usize) -> Result<(DataTable, String)> {
        match self {
            Generator::Step { scenario, seed } => {
                let mut rng = replicate_rng(*seed, i as u64);
                let draw = simulate_step_table(scenario, &mut rng).map_err(at(i))?;
                Ok((draw.table, format!("low={} high={}", draw.n_low, draw.n_high)))
            }
            Generator::Copula { scenario, seed } => {
                let mut rng = replicate_rng(*seed, i as u64);
                let draw = simulate_copula_table(scenario, &mut rng).map_err(at(i))?;
                Ok((draw.table, format!("grid={}", draw.grid_index)))
            }
            Generator::Replay { files } => {
                let path = &files[i];
                Ok((read_table(path)?, path.display().to_string()))
            }
        }
    }
}

/// Generates every replicate, evaluates the checks and the analysis.
pub fn simulate(config: &ScenarioConfig) -> Result<Simulation> {
    let (generator, fitted) = Generator::new(config)?;
    let rows: Vec<(Vec<bool>, ReplicateLog)> = (0..generator.len(config.replicates))
        .into_par_iter()
        .map(|i| {
            let (table, detail) = generator.table(i)?;
            Ok(evaluate(config, i, &table, detail).map_err(at(i))?)
        })
        .collect::<Result<_>>()?;
    let (bits, log): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    let unexpected = log.iter().map(|l| l.unexpected).collect();
    let matrix = CheckMatrix::new(config.checks.iter().map(|c| c.id.clone()).collect(), bits, unexpected)?;
    Ok(Simulation { matrix, log, fitted })
}

/// Writes replicates `first..first + count` as CSV files under `dir`.
pub fn write_replicate_tables(config: &ScenarioConfig, first: usize, count: usize, dir: &Path) -> Result<Vec<PathBuf>> {
    let (generator, _) = Generator::new(config)?;
    let mut written = Vec::with_capacity(count);
    for i in first..first + count {
        let (table, _) = generator.table(i)?;
        let path = dir.join(format!("replicate_{i:05}.csv"));
        let mut w = create(&path)?;
        table.to_csv(&mut w)?;
        w.flush().map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}

pub fn write_simulation(sim: &Simulation, out: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let path = out.join(CHECK_MATRIX);
    let mut w = create(&path)?;
    sim.matrix.to_csv(&mut w)?;
    w.flush().map_err(io_err(&path))?;
    written.push(path);

    let path = out.join(OUTCOMES);
    let mut w = csv_writer(&path)?;
    w.write_record(["replicate", "outcome", "unexpected", "detail"])
        .map_err(avcheck::Error::from)?;
    for l in &sim.log {
        w.write_record([
            l.replicate.to_string(),
            format!("{}", l.outcome),
            u8::from(l.unexpected).to_string(),
            l.detail.clone(),
        ])
        .map_err(avcheck::Error::from)?;
    }
    w.flush().map_err(io_err(&path))?;
    written.push(path);

    if !sim.fitted.is_empty() {
        let path = out.join(MARGINALS_JSON);
        write_json(&path, &sim.fitted)?;
        written.push(path);
        for f in &sim.fitted {
            let path = out.join(format!("qq_{}.csv", f.name));
            let mut w = csv_writer(&path)?;
            w.write_record(["theoretical", "empirical"]).map_err(avcheck::Error::from)?;
            for (t, e) in &f.qq {
                w.write_record([t.to_string(), e.to_string()]).map_err(avcheck::Error::from)?;
            }
            w.flush().map_err(io_err(&path))?;
            written.push(path);
        }
    }
    Ok(written)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(create(path)?))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    w.write_all(b"\n").map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn read_matrix(out: &Path) -> Result<CheckMatrix> {
    let path = out.join(CHECK_MATRIX);
    let file = File::open(&path).map_err(io_err(&path))?;
    CheckMatrix::from_csv(file).map_err(|source| CliError::Data { path, source })
}

pub fn read_model(path: &Path) -> Result<FittedModel> {
    let file = File::open(path).map_err(io_err(path))?;
    serde_json::from_reader(std::io::BufReader::new(file)).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Display labels by check id.
pub fn check_labels(config: &ScenarioConfig) -> HashMap<String, String> {
    config.checks.iter().map(|c| (c.id.clone(), c.label())).collect()
}

pub fn fit_model(config: &ScenarioConfig, matrix: &CheckMatrix) -> Result<FittedModel> {
    Ok(fit(matrix, &config.fit.to_fit_config(config.seed))?)
}

pub fn write_model(config: &ScenarioConfig, model: &FittedModel, out: &Path) -> Result<Vec<PathBuf>> {
    let json = out.join(MODEL_JSON);
    write_json(&json, model)?;
    let labels = check_labels(config);
    let names: Vec<String> = model
        .checks
        .iter()
        .map(|c| labels.get(c).cloned().unwrap_or_else(|| c.clone()))
        .collect();
    let dot = out.join(MODEL_DOT);
    let mut w = create(&dot)?;
    w.write_all(model.tree.to_dot(&names).as_bytes()).map_err(io_err(&dot))?;
    w.flush().map_err(io_err(&dot))?;
    Ok(vec![json, dot])
}

/// One row per check in the matrix, then the model when given. Every
/// value is computed from the matrix alone.
pub fn score(config: &ScenarioConfig, matrix: &CheckMatrix, model: Option<&FittedModel>) -> Result<Vec<ScoreReport>> {
    let labels = check_labels(config);
    let mut reports = matrix
        .checks()
        .iter()
        .map(|c| score_subject(matrix, Subject::Check(c), &labels))
        .collect::<avcheck::Result<Vec<_>>>()?;
    if let Some(model) = model {
        reports.push(score_subject(
            matrix,
            Subject::Model {
                id: MODEL_SUBJECT,
                model,
            },
            &HashMap::new(),
        )?);
    }
    Ok(reports)
}

pub fn write_scores(reports: &[ScoreReport], out: &Path) -> Result<Vec<PathBuf>> {
    let csv_path = out.join(SCORES_CSV);
    let mut w = create(&csv_path)?;
    write_scores_csv(reports, &mut w)?;
    w.flush().map_err(io_err(&csv_path))?;
    let json_path = out.join(SCORES_JSON);
    write_json(&json_path, &reports)?;
    Ok(vec![csv_path, json_path])
}

fn md(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.3}"))
}

/// Markdown rendering of the score table.
pub fn render_report(reports: &[ScoreReport], matrix: &CheckMatrix) -> String {
    let n = matrix.n_rows();
    let n_unexpected = matrix.unexpected().iter().filter(|u| **u).count();
    let mut s = format!(
        "Replicates: {n}; unexpected: {n_unexpected} ({:.1}%)\n\n",
        100.0 * n_unexpected as f64 / n.max(1) as f64
    );
    s.push_str("| Checks | Precision | Recall | Independence | Harmonic | Arithmetic |\n");
    s.push_str("|---|---:|---:|---:|---:|---:|\n");
    for r in reports {
        s.push_str(&format!(
            "| {}: {} | {} | {} | {:.3} | {} | {} |\n",
            r.subject,
            r.label,
            md(r.precision),
            md(r.recall),
            r.independence,
            md(r.harmonic_mean),
            md(r.arithmetic_mean)
        ));
    }
    s
}

pub fn write_report(text: &str, out: &Path) -> Result<PathBuf> {
    let path = out.join(REPORT_MD);
    let mut w = create(&path)?;
    w.write_all(text.as_bytes()).map_err(io_err(&path))?;
    w.flush().map_err(io_err(&path))?;
    Ok(path)
}

#[derive(Debug)]
pub struct PipelineRun {
    pub simulation: Simulation,
    pub model: FittedModel,
    pub scores: Vec<ScoreReport>,
    pub written: Vec<PathBuf>,
}

/// Simulate, fit, score and write every artifact under `out`.
pub fn run_pipeline(config: &ScenarioConfig, out: &Path) -> Result<PipelineRun> {
    let simulation = simulate(config)?;
    let mut written = write_simulation(&simulation, out)?;
    let model = fit_model(config, &simulation.matrix)?;
    written.extend(write_model(config, &model, out)?);
    let scores = score(config, &simulation.matrix, Some(&model))?;
    written.extend(write_scores(&scores, out)?);
    written.push(write_report(&render_report(&scores, &simulation.matrix), out)?);
    Ok(PipelineRun {
        simulation,
        model,
        scores,
        written,
    })
}
