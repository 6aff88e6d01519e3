use std::path::{Path, PathBuf};
use std::process::Command;

use avcheck::simgen::{pm10_check_bank, MORTALITY, PM10, TEMPERATURE};
use avcheck::{BoolTree, DataTable, FitConfig, FittedModel, NumericColumn, ScoreReport};
use avcheck_cli::pipeline::{self, CHECK_MATRIX, MODEL_DOT, MODEL_JSON, SCORES_CSV, SCORES_JSON};
use avcheck_cli::{apply_model, run_pipeline, write_predictions, CliError, ScenarioConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

const STEP: &str = r#"
replicates = 400
seed = 5

[scenario]
kind = "step"

[analysis]
kind = "mean"
column = "step"

[expectation]
outcome = "mean_step"
lo = 8500.0
hi = 9500.0

[[checks]]
id = "check1"
statistic = "quantile"
columns = ["step"]
p = 0.6
comparator = ">"
threshold = 10000.0

[[checks]]
id = "check2"
statistic = "quantile"
columns = ["step"]
p = 0.4
comparator = "<"
threshold = 8000.0

[[checks]]
id = "check3"
statistic = "sd"
columns = ["step"]
comparator = ">"
threshold = 2500.0

[fit]
iterations = 5000
restarts = 2
"#;

fn step_config() -> ScenarioConfig {
    ScenarioConfig::from_toml(STEP).unwrap()
}

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn avcheck(args: &[&str]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_avcheck"))
        .args(args)
        .env("AVCHECK_THREADS", "1")
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "avcheck {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write_csv(path: &Path, table: &DataTable) {
    let mut f = std::fs::File::create(path).unwrap();
    table.to_csv(&mut f).unwrap();
}

#[test]
fn binary_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("step.toml");
    std::fs::write(&config, STEP).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        avcheck(&["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "9"]);
    }
    for f in [CHECK_MATRIX, MODEL_JSON, MODEL_DOT, SCORES_CSV] {
        let (x, y) = (std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
        assert!(!x.is_empty());
        assert_eq!(x, y, "{f} differs");
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let cfg = step_config();
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let a = one.install(|| pipeline::simulate(&cfg)).unwrap();
    let b = three.install(|| pipeline::simulate(&cfg)).unwrap();
    assert_eq!(a.matrix, b.matrix);
}

#[test]
fn staged_commands_write_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("step.toml");
    std::fs::write(&config, STEP).unwrap();
    let cfg = config.to_str().unwrap();
    let out = dir.path().join("out");
    let o = out.to_str().unwrap();
    avcheck(&["simulate", "--config", cfg, "--out", o, "--tables", "3"]);
    avcheck(&["fit", "--config", cfg, "--out", o]);
    avcheck(&["score", "--config", cfg, "--out", o]);
    let report = avcheck(&["report", "--config", cfg, "--out", o]);
    let text = String::from_utf8(report.stdout).unwrap();
    assert!(text.contains("| Checks | Precision | Recall |"), "{text}");

    let tables: Vec<String> = (0..3)
        .map(|i| out.join("tables").join(format!("replicate_{i:05}.csv")).display().to_string())
        .collect();
    let mut args = vec!["apply", "--config", cfg, "--out", o];
    args.extend(tables.iter().map(String::as_str));
    avcheck(&args);

    for f in [CHECK_MATRIX, "outcomes.csv", MODEL_JSON, MODEL_DOT, SCORES_CSV, SCORES_JSON, "report.md", "predictions.csv", "confusion.csv"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let scores = std::fs::read_to_string(out.join(SCORES_CSV)).unwrap();
    let lines: Vec<&str> = scores.lines().collect();
    assert_eq!(lines[0], "Checks,Precision,Recall,Independence,Harmonic,Arithmetic");
    assert_eq!(lines.len(), 5, "three checks and the model");
    let matrix = std::fs::read_to_string(out.join(CHECK_MATRIX)).unwrap();
    assert_eq!(matrix.lines().next().unwrap(), "check1,check2,check3,unexpected");
    assert_eq!(matrix.lines().count(), 401);
    assert!(std::fs::read_to_string(out.join(MODEL_DOT)).unwrap().starts_with("digraph"));
}

#[test]
fn scores_are_recomputable_from_written_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = step_config();
    run_pipeline(&cfg, dir.path()).unwrap();
    let matrix = pipeline::read_matrix(dir.path()).unwrap();
    let model = pipeline::read_model(&dir.path().join(MODEL_JSON)).unwrap();
    let again = pipeline::score(&cfg, &matrix, Some(&model)).unwrap();
    let written: Vec<ScoreReport> = serde_json::from_slice(&std::fs::read(dir.path().join(SCORES_JSON)).unwrap()).unwrap();
    for (a, b) in again.iter().zip(&written) {
        assert_eq!(a, b);
    }
    assert_eq!(again.len(), written.len());
}

#[test]
fn single_replicate_refused_under_inverse_weights() {
    let text = STEP.replace("replicates = 400", "replicates = 1").replace("restarts = 2", "restarts = 2\nclass_weights = { kind = \"inverse_frequency\" }");
    let cfg = ScenarioConfig::from_toml(&text).unwrap();
    let sim = pipeline::simulate(&cfg).unwrap();
    assert_eq!(sim.matrix.n_rows(), 1);
    let dir = tempfile::tempdir().unwrap();
    let err = run_pipeline(&cfg, dir.path()).unwrap_err();
    assert!(err.to_string().contains("single class"), "{err}");
}

#[test]
fn config_errors_name_the_problem() {
    let err = ScenarioConfig::from_toml(&STEP.replace("seed = 5", "seed = 5\nbogus = 1")).unwrap_err();
    assert!(matches!(err, CliError::Parse(_)));
    assert!(err.to_string().contains("bogus"), "{err}");
    assert!(err.to_string().contains("line"), "{err}");

    let err = ScenarioConfig::from_toml(&STEP.replace("columns = [\"step\"]\np = 0.4", "columns = [\"steps\"]\np = 0.4")).unwrap_err();
    assert!(err.to_string().contains("checks[1].columns"), "{err}");

    let err = ScenarioConfig::from_toml(&STEP.replace("p = 0.6", "p = 1.6")).unwrap_err();
    assert!(err.to_string().contains("checks[0]"), "{err}");

    let err = ScenarioConfig::from_toml(&STEP.replace("seed = 5", "seed = 5\nprediction_columns = [\"nope\"]")).unwrap_err();
    assert!(err.to_string().contains("prediction_columns[0]"), "{err}");

    let err = ScenarioConfig::from_toml(&STEP.replace("iterations = 5000", "iterations = 0")).unwrap_err();
    assert!(err.to_string().contains("fit"), "{err}");

    for name in ["step.toml", "pm10.toml"] {
        ScenarioConfig::load(&repo_config(name)).unwrap();
    }
}

fn toy_model() -> FittedModel {
    FittedModel {
        checks: vec!["check1".into(), "check2".into(), "check3".into()],
        tree: BoolTree::and(BoolTree::or(BoolTree::leaf(0), BoolTree::leaf(1)), BoolTree::not_leaf(2)),
        train_loss: 0.0,
        predictions: vec![],
        config: FitConfig::default(),
    }
}

#[test]
fn apply_reports_failures_and_continues() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = step_config();
    let calm = dir.path().join("calm.csv");
    write_csv(&calm, &DataTable::single("step", vec![9000.0; 30]).unwrap());
    let mut low = vec![6000.0; 20];
    low.extend([9000.0; 10]);
    let lazy = dir.path().join("lazy.csv");
    write_csv(&lazy, &DataTable::single("step", low).unwrap());
    let broken = dir.path().join("broken.csv");
    std::fs::write(&broken, "step\n9000\nabc\n").unwrap();
    let wrong = dir.path().join("wrong.csv");
    write_csv(&wrong, &DataTable::single("steps", vec![1.0, 2.0]).unwrap());
    let missing = dir.path().join("missing.csv");

    let files = vec![calm, broken.clone(), lazy, wrong.clone(), missing.clone()];
    let model = toy_model();
    let result = apply_model(&model, &cfg.checks, &[], &cfg.analysis, &cfg.expectation, &files).unwrap();
    assert_eq!(result.predictions.len(), 2);
    let failed: Vec<&PathBuf> = result.failures.iter().map(|(p, _)| p).collect();
    assert_eq!(failed, vec![&broken, &wrong, &missing]);

    let calm = &result.predictions[0];
    assert_eq!(calm.dataset, "calm");
    assert!(!calm.predicted_unexpected, "every check passes");
    assert_eq!(calm.observed_unexpected, Some(false));
    let lazy = &result.predictions[1];
    assert!(lazy.predicted_unexpected);
    assert_eq!(lazy.observed_unexpected, Some(true));
    assert_eq!(result.confusion.total(), 2);

    write_predictions(&result, &cfg.expectation, dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("predictions.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "dataset,mean_step,observed_unexpected,predicted_unexpected,Quantile 0.6: step,Quantile 0.4: step,SD: step");
    assert_eq!(lines[1], "calm,9000.0000,F,F,9000.00 (F),9000.00 (F),0.00 (F)");
    let confusion = std::fs::read_to_string(dir.path().join("confusion.csv")).unwrap();
    assert_eq!(confusion, "Observed,Predicted FALSE,Predicted TRUE\nFALSE,1,0\nTRUE,0,1\n");
}

#[test]
fn model_check_missing_from_bank_is_an_error() {
    let cfg = step_config();
    let mut model = toy_model();
    model.checks[2] = "elsewhere".into();
    let err = apply_model(&model, &cfg.checks, &[], &cfg.analysis, &cfg.expectation, &[]).unwrap_err();
    assert!(matches!(err, CliError::UnknownModelCheck(id) if id == "elsewhere"));
}

#[test]
fn negative_effect_city_is_flagged() {
    // strong negative PM10 effect, weak temperature effect
    let n = 3288;
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let pm_d = Normal::new(40.0f64, 15.0).unwrap();
    let t_d = Normal::new(60.0, 15.0).unwrap();
    let pm: Vec<f64> = (0..n).map(|_| pm_d.sample(&mut rng).max(1.0)).collect();
    let temp: Vec<f64> = (0..n).map(|_| t_d.sample(&mut rng)).collect();
    let y: Vec<f64> = pm
        .iter()
        .zip(&temp)
        .map(|(p, t)| Poisson::new((5.5 - 0.003 * p - 0.001 * t).exp()).unwrap().sample(&mut rng))
        .collect();
    let table = DataTable::new(vec![
        NumericColumn::new(MORTALITY, y.clone()).unwrap(),
        NumericColumn::new(PM10, pm.clone()).unwrap(),
        NumericColumn::new(TEMPERATURE, temp).unwrap(),
    ])
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("city.csv");
    write_csv(&path, &table);

    let cfg = ScenarioConfig::load(&repo_config("pm10.toml")).unwrap();
    let bank = pm10_check_bank();
    let ids: Vec<String> = bank.iter().map(|c| c.id.clone()).collect();
    let k = |id: &str| ids.iter().position(|c| c == id).unwrap();
    let model = FittedModel {
        checks: ids.clone(),
        tree: BoolTree::and(BoolTree::leaf(k("cor_m_pm10_lt_-0.05")), BoolTree::leaf(k("cor_m_tmp_gt_-0.35"))),
        train_loss: 0.0,
        predictions: vec![],
        config: FitConfig::default(),
    };
    let result = apply_model(&model, &cfg.checks, &cfg.prediction_columns, &cfg.analysis, &cfg.expectation, &[path]).unwrap();
    let p = &result.predictions[0];
    assert!(p.predicted_unexpected);
    assert_eq!(p.observed_unexpected, Some(true));
    assert!(p.outcome.unwrap() < 0.0);
    let cell = p.checks.iter().find(|c| c.id == "cor_m_pm10_lt_-0.05").unwrap();
    let r = avcheck::stats::pearson_corr(&y, &pm).unwrap();
    assert!((cell.value - r).abs() < 1e-12 && r < -0.03 && cell.failed);
}

#[test]
fn copula_marginals_fitted_from_seed_csv() {
    let dir = tempfile::tempdir().unwrap();
    let mut pm10 = ScenarioConfig::load(&repo_config("pm10.toml")).unwrap();
    pm10.seed = 3;
    let seed = pipeline::write_replicate_tables(&pm10, 0, 1, dir.path()).unwrap().remove(0);
    std::fs::rename(&seed, dir.path().join("seed.csv")).unwrap();

    let text = std::fs::read_to_string(repo_config("pm10.toml")).unwrap();
    let text = text
        .replace("replicates = 2000", "replicates = 30")
        .replace("n_obs = 3288", "n_obs = 3288\nseed_csv = \"seed.csv\"")
        .replace(
            r#"marginal = { family = "negative_binomial", mean = 170.0, dispersion = 125.0 }"#,
            r#"candidates = [{ family = "poisson" }, { family = "negative_binomial" }]"#,
        );
    let config = dir.path().join("fitted.toml");
    std::fs::write(&config, text).unwrap();
    let cfg = ScenarioConfig::load(&config).unwrap();
    let sim = pipeline::simulate(&cfg).unwrap();
    assert_eq!(sim.fitted.len(), 1);
    let m = &sim.fitted[0];
    assert_eq!(m.name, "mortality");
    assert_eq!(m.fit.family(), avcheck::simgen::Family::NegativeBinomial, "overdispersed counts");
    assert_eq!(m.qq.len(), 3288);
    let written = pipeline::write_simulation(&sim, dir.path()).unwrap();
    assert!(written.iter().any(|p| p.ends_with("marginals.json")));
    assert!(written.iter().any(|p| p.ends_with("qq_mortality.csv")));
}

#[test]
fn csv_replay_uses_each_file_once() {
    let dir = tempfile::tempdir().unwrap();
    for (i, v) in [9000.0, 7000.0, 9400.0].iter().enumerate() {
        write_csv(&dir.path().join(format!("d{i}.csv")), &DataTable::single("step", vec![*v; 30]).unwrap());
    }
    let mut text = STEP.replace("[scenario]\nkind = \"step\"", "[scenario]\nkind = \"csv-replay\"\nfiles = [\"d0.csv\", \"d1.csv\", \"d2.csv\"]");
    text = text.replace("replicates = 400", "replicates = 0");
    let config = dir.path().join("replay.toml");
    std::fs::write(&config, text).unwrap();
    let cfg = ScenarioConfig::load(&config).unwrap();
    let sim = pipeline::simulate(&cfg).unwrap();
    assert_eq!(sim.matrix.n_rows(), 3);
    assert_eq!(sim.matrix.unexpected(), &[false, true, false]);
    assert_eq!(sim.log[1].outcome, 7000.0);
}
