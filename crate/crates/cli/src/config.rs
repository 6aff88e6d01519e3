use std::collections::HashSet;
use std::path::{Path, PathBuf};

use avcheck::logreg::cooling_for;
use avcheck::simgen::{
    correlation_grid, Candidate, CopulaScenario, CopulaVariable, Marginal, OutlierInjection, PairValues, StepScenario,
    MORTALITY, PM10, TEMPERATURE,
};
use avcheck::{CheckDef, ClassWeights, ExpectationDef, FitConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// A complete run description, usually read from TOML.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    pub scenario: Scenario,
    pub analysis: Analysis,
    pub expectation: ExpectationDef,
    pub checks: Vec<CheckDef>,
    #[serde(default)]
    pub fit: FitSection,
    /// Check ids fixing the order of the check-family columns in
    /// `predictions.csv`; families not listed follow in bank order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub prediction_columns: Vec<String>,
    /// Directory against which relative paths in the config are resolved.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Scenario {
    Step(StepScenario),
    Copula(CopulaConfig),
    CsvReplay(CsvReplayConfig),
}

impl Scenario {
    pub fn kind(&self) -> &'static str {
        match self {
            Scenario::Step(_) => "step",
            Scenario::Copula(_) => "copula",
            Scenario::CsvReplay(_) => "csv-replay",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CopulaConfig {
    pub n_obs: usize,
    /// CSV whose columns are used to fit marginals listed by `candidates`.
    #[serde(default)]
    pub seed_csv: Option<PathBuf>,
    pub variables: Vec<VariableConfig>,
    pub grid: Vec<PairValues>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableConfig {
    pub name: String,
    /// Column in `seed_csv`, when it differs from `name`.
    #[serde(default)]
    pub column: Option<String>,
    #[serde(default)]
    pub marginal: Option<Marginal>,
    #[serde(default)]
    pub candidates: Option<Vec<Candidate>>,
    #[serde(default)]
    pub outlier: Option<OutlierInjection>,
}

/// Each listed CSV file is one replicate.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvReplayConfig {
    pub files: Vec<PathBuf>,
}

/// The analysis whose result is compared against the expectation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Analysis {
    Mean { column: String },
    Quantile { column: String, p: f64 },
    Sd { column: String },
    /// PM10 coefficient of a Poisson regression of mortality on PM10 and
    /// temperature.
    Pm10Glm,
}

impl Analysis {
    pub fn columns(&self) -> Vec<&str> {
        match self {
            Analysis::Mean { column } | Analysis::Quantile { column, .. } | Analysis::Sd { column } => {
                vec![column.as_str()]
            }
            Analysis::Pm10Glm => vec![MORTALITY, PM10, TEMPERATURE],
        }
    }
}

/// Fit settings; `cooling_rate` defaults to the rate that takes the
/// initial temperature to `1e-4` over `iterations`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    #[serde(default = "default_leaves")]
    pub max_leaves: usize,
    #[serde(default = "default_t0")]
    pub initial_temperature: f64,
    #[serde(default)]
    pub cooling_rate: Option<f64>,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_weights")]
    pub class_weights: ClassWeights,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
}

fn default_leaves() -> usize {
    FitConfig::default().max_leaves
}
fn default_t0() -> f64 {
    FitConfig::default().initial_temperature
}
fn default_iterations() -> usize {
    FitConfig::default().iterations
}
fn default_weights() -> ClassWeights {
    FitConfig::default().class_weights
}
fn default_restarts() -> usize {
    FitConfig::default().restarts
}

impl Default for FitSection {
    fn default() -> Self {
        let d = FitConfig::default();
        Self {
            max_leaves: d.max_leaves,
            initial_temperature: d.initial_temperature,
            cooling_rate: None,
            iterations: d.iterations,
            class_weights: d.class_weights,
            seed: None,
            restarts: d.restarts,
        }
    }
}

impl FitSection {
    /// Resolved config; the fit seed falls back to the master seed.
    pub fn to_fit_config(&self, master_seed: u64) -> FitConfig {
        FitConfig {
            max_leaves: self.max_leaves,
            initial_temperature: self.initial_temperature,
            cooling_rate: self
                .cooling_rate
                .unwrap_or_else(|| cooling_for(self.initial_temperature, self.iterations)),
            iterations: self.iterations,
            class_weights: self.class_weights,
            seed: self.seed.unwrap_or(master_seed),
            restarts: self.restarts,
        }
    }
}

fn invalid(field: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        field: field.to_string(),
        message: message.into(),
    }
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::from_toml(&text).map_err(|e| match e {
            CliError::Parse(message) => CliError::Parse(format!("{}: {message}", path.display())),
            other => other,
        })?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(config)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    /// Column names every replicate table will carry, when known up front.
    pub fn scenario_columns(&self) -> Option<Vec<String>> {
        match &self.scenario {
            Scenario::Step(_) => Some(vec!["step".to_string()]),
            Scenario::Copula(c) => Some(c.variables.iter().map(|v| v.name.clone()).collect()),
            Scenario::CsvReplay(_) => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 && !matches!(self.scenario, Scenario::CsvReplay(_)) {
            return Err(invalid("replicates", "must be at least 1"));
        }
        if self.checks.is_empty() {
            return Err(invalid("checks", "at least one check is required"));
        }
        let mut seen = HashSet::new();
        for (i, c) in self.checks.iter().enumerate() {
            c.validate().map_err(|e| invalid(&format!("checks[{i}]"), e.to_string()))?;
            if !seen.insert(c.id.as_str()) {
                return Err(invalid(&format!("checks[{i}].id"), format!("duplicate check id `{}`", c.id)));
            }
        }
        for (i, id) in self.prediction_columns.iter().enumerate() {
            if !self.checks.iter().any(|c| &c.id == id) {
                return Err(invalid(&format!("prediction_columns[{i}]"), format!("unknown check id `{id}`")));
            }
        }
        if let Some(columns) = self.scenario_columns() {
            for (i, c) in self.checks.iter().enumerate() {
                if let Some(missing) = c.columns.iter().find(|col| !columns.contains(col)) {
                    return Err(invalid(
                        &format!("checks[{i}].columns"),
                        format!("column `{missing}` is not produced by the {} scenario", self.scenario.kind()),
                    ));
                }
            }
            if let Some(missing) = self.analysis.columns().into_iter().find(|c| !columns.iter().any(|v| v == c)) {
                return Err(invalid(
                    "analysis",
                    format!("column `{missing}` is not produced by the {} scenario", self.scenario.kind()),
                ));
            }
        }
        self.fit
            .to_fit_config(self.seed)
            .validate()
            .map_err(|e| invalid("fit", e.to_string()))?;
        match &self.scenario {
            Scenario::Step(s) => s.validate().map_err(|e| invalid("scenario", e.to_string()))?,
            Scenario::Copula(c) => {
                for (i, v) in c.variables.iter().enumerate() {
                    match (&v.marginal, &v.candidates) {
                        (Some(m), None) => m
                            .validate()
                            .map_err(|e| invalid(&format!("scenario.variables[{i}].marginal"), e.to_string()))?,
                        (None, Some(cands)) => {
                            if c.seed_csv.is_none() {
                                return Err(invalid(
                                    &format!("scenario.variables[{i}].candidates"),
                                    "candidates need `seed_csv` to fit against",
                                ));
                            }
                            if cands.is_empty() {
                                return Err(invalid(&format!("scenario.variables[{i}].candidates"), "list is empty"));
                            }
                        }
                        _ => {
                            return Err(invalid(
                                &format!("scenario.variables[{i}]"),
                                "give exactly one of `marginal` or `candidates`",
                            ))
                        }
                    }
                    if let Some(o) = &v.outlier {
                        o.validate()
                            .map_err(|e| invalid(&format!("scenario.variables[{i}].outlier"), e.to_string()))?;
                    }
                }
                let names: Vec<&str> = c.variables.iter().map(|v| v.name.as_str()).collect();
                correlation_grid(&names, &c.grid).map_err(|e| invalid("scenario.grid", e.to_string()))?;
            }
            Scenario::CsvReplay(r) => {
                if r.files.is_empty() {
                    return Err(invalid("scenario.files", "at least one file is required"));
                }
            }
        }
        Ok(())
    }
}

/// Copula scenario with every marginal resolved.
pub(crate) fn build_copula(
    config: &CopulaConfig,
    fitted: impl Fn(usize) -> Option<Marginal>,
) -> Result<CopulaScenario> {
    let names: Vec<&str> = config.variables.iter().map(|v| v.name.as_str()).collect();
    let grid = correlation_grid(&names, &config.grid)?;
    let variables = config
        .variables
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let marginal = v
                .marginal
                .or_else(|| fitted(i))
                .ok_or_else(|| invalid(&format!("scenario.variables[{i}]"), "marginal was not fitted"))?;
            Ok(CopulaVariable {
                name: v.name.clone(),
                marginal,
                outlier: v.outlier,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CopulaScenario::new(config.n_obs, variables, grid.matrices)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const STEP: &str = r#"
replicates = 10
seed = 3

[scenario]
kind = "step"

[analysis]
kind = "mean"
column = "step"

[expectation]
outcome = "mean_step"
lo = 8500
hi = 9500

[[checks]]
id = "check1"
statistic = "quantile"
columns = ["step"]
p = 0.6
comparator = ">"
threshold = 10000
"#;

    #[test]
    fn parses_step_config() {
        let c = ScenarioConfig::from_toml(STEP).unwrap();
        assert_eq!(c.replicates, 10);
        assert!(matches!(c.scenario, Scenario::Step(ref s) if s.n_days == 30));
        assert_eq!(c.fit.to_fit_config(c.seed).seed, 3);
        assert_eq!(c.checks[0].p, Some(0.6));
    }

    #[test]
    fn unknown_column_is_reported_with_field() {
        let bad = STEP.replace(r#"columns = ["step"]"#, r#"columns = ["steps"]"#);
        let err = ScenarioConfig::from_toml(&bad).unwrap_err();
        assert!(err.to_string().contains("checks[0].columns"), "{err}");
    }

    #[test]
    fn parse_error_has_line() {
        let bad = STEP.replace("replicates = 10", "replicates = \"ten\"");
        let err = ScenarioConfig::from_toml(&bad).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}
