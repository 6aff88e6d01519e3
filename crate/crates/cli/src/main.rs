use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use avcheck_cli::pipeline::{self, MODEL_JSON};
use avcheck_cli::{apply_model, write_predictions, ScenarioConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "avcheck", version, about = "Simulate, fit and score analysis validation checks")]
struct Cli {
    /// Worker threads for replicate generation and restarts.
    #[arg(long, env = "AVCHECK_THREADS", global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the master seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory in the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate replicates and write checkmatrix.csv and outcomes.csv.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Also write the first N replicate datasets to `<out>/tables/`.
        #[arg(long, value_name = "N")]
        tables: Option<usize>,
        /// Index of the first replicate written by `--tables`.
        #[arg(long, default_value_t = 0)]
        first: usize,
    },
    /// Fit a logic-regression model to checkmatrix.csv.
    Fit(Common),
    /// Score every check and the model; writes scores.csv and scores.json.
    Score(Common),
    /// Print the score table and write report.md.
    Report(Common),
    /// Simulate, fit, score and report in one go.
    Run(Common),
    /// Apply a fitted model to datasets; writes predictions.csv.
    Apply {
        #[command(flatten)]
        common: Common,
        /// Model file; defaults to model.json in the output directory.
        #[arg(long)]
        model: Option<PathBuf>,
        /// CSV datasets, one per row of the prediction table.
        #[arg(required = true)]
        datasets: Vec<PathBuf>,
    },
}

fn load(common: &Common) -> anyhow::Result<(ScenarioConfig, PathBuf)> {
    let mut config = ScenarioConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    let out = match &common.out {
        Some(o) => o.clone(),
        None => config.resolve(&config.out.clone()),
    };
    Ok((config, out))
}

fn report_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn load_model(out: &Path) -> anyhow::Result<avcheck::FittedModel> {
    let path = out.join(MODEL_JSON);
    pipeline::read_model(&path).with_context(|| "run `avcheck fit` first")
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("thread count must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Simulate { common, tables, first } => {
            let (config, out) = load(&common)?;
            let sim = pipeline::simulate(&config)?;
            report_written(&pipeline::write_simulation(&sim, &out)?);
            if let Some(n) = tables {
                let written = pipeline::write_replicate_tables(&config, first, n, &out.join("tables"))?;
                println!("wrote {} tables under {}", written.len(), out.join("tables").display());
            }
        }
        Command::Fit(common) => {
            let (mut config, out) = load(&common)?;
            if let Some(seed) = common.seed {
                config.fit.seed = Some(seed);
            }
            let matrix = pipeline::read_matrix(&out)?;
            let model = pipeline::fit_model(&config, &matrix)?;
            println!("rule: {}", model.rule());
            report_written(&pipeline::write_model(&config, &model, &out)?);
        }
        Command::Score(common) => {
            let (config, out) = load(&common)?;
            let matrix = pipeline::read_matrix(&out)?;
            let model = load_model(&out)?;
            let scores = pipeline::score(&config, &matrix, Some(&model))?;
            report_written(&pipeline::write_scores(&scores, &out)?);
        }
        Command::Report(common) => {
            let (config, out) = load(&common)?;
            let matrix = pipeline::read_matrix(&out)?;
            let model = load_model(&out)?;
            let scores = pipeline::score(&config, &matrix, Some(&model))?;
            let text = pipeline::render_report(&scores, &matrix);
            print!("{text}");
            report_written(&[pipeline::write_report(&text, &out)?]);
        }
        Command::Run(common) => {
            let (config, out) = load(&common)?;
            let run = pipeline::run_pipeline(&config, &out)?;
            print!("{}", pipeline::render_report(&run.scores, &run.simulation.matrix));
            report_written(&run.written);
        }
        Command::Apply {
            common,
            model,
            datasets,
        } => {
            let (config, out) = load(&common)?;
            let model = match model {
                Some(p) => pipeline::read_model(&p)?,
                None => load_model(&out)?,
            };
            let result = apply_model(&model, &config.checks, &config.prediction_columns, &config.analysis, &config.expectation, &datasets)?;
            for (path, reason) in &result.failures {
                eprintln!("skipped {}: {reason}", path.display());
            }
            let c = &result.confusion;
            println!(
                "{} datasets scored: TP={} FP={} FN={} TN={}",
                c.total(),
                c.tp,
                c.fp,
                c.fn_,
                c.tn
            );
            report_written(&write_predictions(&result, &config.expectation, &out)?);
        }
    }
    Ok(())
}
