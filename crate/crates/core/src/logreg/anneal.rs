use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bits::Bits;
use super::moves::propose_move;
use super::tree::BoolTree;
use crate::checks::CheckMatrix;
use crate::error::{Error, Result};

/// Temperature reached at the end of the default schedule.
const FINAL_TEMPERATURE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ClassWeights {
    /// Raw misclassification count.
    Unit,
    /// `w0 = 1 / n0`, `w1 = 1 / n1`.
    InverseFrequency,
    Explicit { w0: f64, w1: f64 },
}

impl ClassWeights {
    /// Resolves to `(w0, w1)` for the given labels.
    pub fn resolve(&self, labels: &[bool]) -> Result<(f64, f64)> {
        match *self {
            ClassWeights::Unit => Ok((1.0, 1.0)),
            ClassWeights::Explicit { w0, w1 } => {
                if !(w0 >= 0.0 && w1 >= 0.0) || w0 + w1 == 0.0 || !w0.is_finite() || !w1.is_finite() {
                    return Err(Error::InvalidFitConfig(format!(
                        "class weights ({w0}, {w1}) must be finite, nonnegative, not both zero"
                    )));
                }
                Ok((w0, w1))
            }
            ClassWeights::InverseFrequency => {
                let n1 = labels.iter().filter(|&&l| l).count();
                let n0 = labels.len() - n1;
                if n1 == 0 || n0 == 0 {
                    return Err(Error::SingleClass { class: n1 > 0 });
                }
                Ok((1.0 / n0 as f64, 1.0 / n1 as f64))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub max_leaves: usize,
    pub initial_temperature: f64,
    /// Geometric factor applied to the temperature after every iteration.
    pub cooling_rate: f64,
    pub iterations: usize,
    pub class_weights: ClassWeights,
    pub seed: u64,
    pub restarts: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self::with_budget(50_000)
    }
}

impl FitConfig {
    /// Default settings with the cooling rate chosen so the temperature
    /// falls from 1 to `1e-4` over `iterations` steps.
    pub fn with_budget(iterations: usize) -> Self {
        Self {
            max_leaves: 8,
            initial_temperature: 1.0,
            cooling_rate: cooling_for(1.0, iterations),
            iterations,
            class_weights: ClassWeights::Unit,
            seed: 0,
            restarts: 5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidFitConfig(m.to_string()));
        if self.iterations == 0 {
            return bad("iterations must be at least 1");
        }
        if self.restarts == 0 {
            return bad("restarts must be at least 1");
        }
        if self.max_leaves == 0 {
            return bad("max_leaves must be at least 1");
        }
        if !(self.initial_temperature > 0.0) || !self.initial_temperature.is_finite() {
            return bad("initial_temperature must be positive");
        }
        if !(self.cooling_rate > 0.0 && self.cooling_rate < 1.0) {
            return bad("cooling_rate must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Cooling factor taking `t0` to `1e-4` in `iterations` steps.
pub fn cooling_for(t0: f64, iterations: usize) -> f64 {
    (FINAL_TEMPERATURE / t0).powf(1.0 / iterations.max(1) as f64)
}

mod bitstring {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bits: &[bool], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&bits.iter().map(|&b| if b { '1' } else { '0' }).collect::<String>())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<bool>, D::Error> {
        let s = String::deserialize(d)?;
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(serde::de::Error::custom(format!("invalid bit `{other}`"))),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    /// Check ids in training-matrix column order; leaves index into this.
    pub checks: Vec<String>,
    pub tree: BoolTree,
    /// Weighted misclassification of `predictions` on the training labels.
    pub train_loss: f64,
    #[serde(with = "bitstring")]
    pub predictions: Vec<bool>,
    pub config: FitConfig,
}

impl FittedModel {
    pub fn predict(&self, row: &[bool]) -> Result<bool> {
        self.tree.eval(row)
    }

    pub fn rule(&self) -> String {
        self.tree.render(&self.checks)
    }

    /// Ids of the distinct checks the tree uses, in matrix order.
    pub fn leaf_checks(&self) -> Vec<String> {
        self.tree.checks().into_iter().map(|c| self.checks[c].clone()).collect()
    }
}

pub fn predict(model: &FittedModel, row: &[bool]) -> Result<bool> {
    model.predict(row)
}

pub fn weighted_misclassification(pred: &[bool], label: &[bool], weights: (f64, f64)) -> Result<f64> {
    if pred.len() != label.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: label.len(),
        });
    }
    let (mut fp, mut fneg) = (0u64, 0u64);
    for (&p, &l) in pred.iter().zip(label) {
        match (p, l) {
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            _ => {}
        }
    }
    Ok(weights.0 * fp as f64 + weights.1 * fneg as f64)
}

/// Matrix columns packed for evaluation, with the loss weights resolved.
pub(crate) struct Problem {
    pub columns: Vec<Bits>,
    pub negated: Vec<Bits>,
    pub labels: Bits,
    pub weights: (f64, f64),
    pub total_weight: f64,
}

impl Problem {
    pub fn new(matrix: &CheckMatrix, weights: &ClassWeights) -> Result<Self> {
        let labels = matrix.unexpected();
        let weights = weights.resolve(labels)?;
        let columns: Vec<Bits> = (0..matrix.n_checks()).map(|k| Bits::from_bools(matrix.column(k))).collect();
        let negated = columns.iter().map(Bits::not).collect();
        let n1 = labels.iter().filter(|&&l| l).count() as f64;
        let n0 = labels.len() as f64 - n1;
        Ok(Self {
            columns,
            negated,
            labels: Bits::from_bools(labels.iter().copied()),
            weights,
            total_weight: weights.0 * n0 + weights.1 * n1,
        })
    }

    pub fn loss_of_bits(&self, pred: &Bits) -> f64 {
        let (fp, fneg) = pred.mismatches(&self.labels);
        self.weights.0 * fp as f64 + self.weights.1 * fneg as f64
    }

    pub fn loss(&self, tree: &BoolTree) -> f64 {
        self.loss_of_bits(&tree.eval_bits(&self.columns, &self.negated))
    }

    pub fn n_checks(&self) -> usize {
        self.columns.len()
    }
}

fn same_loss(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Ordering used for "best": lower loss, then fewer leaves, then encoding.
pub(crate) fn compare(a: (f64, &BoolTree), b: (f64, &BoolTree)) -> Ordering {
    if !same_loss(a.0, b.0) {
        return a.0.total_cmp(&b.0);
    }
    a.1.leaf_count()
        .cmp(&b.1.leaf_count())
        .then_with(|| a.1.encode().cmp(&b.1.encode()))
}

pub(crate) fn finish(matrix: &CheckMatrix, problem: &Problem, tree: BoolTree, config: FitConfig) -> FittedModel {
    let predictions = tree.eval_bits(&problem.columns, &problem.negated).to_bools();
    FittedModel {
        checks: matrix.checks().to_vec(),
        train_loss: problem.loss(&tree),
        tree,
        predictions,
        config,
    }
}

/// Per-iteration trace of one annealing chain.
#[derive(Debug, Clone, Default)]
pub struct AnnealTrace {
    pub current_loss: Vec<f64>,
    pub best_loss: Vec<f64>,
    pub temperature: Vec<f64>,
}

fn anneal_chain(problem: &Problem, config: &FitConfig, restart: usize, mut trace: Option<&mut AnnealTrace>) -> (f64, BoolTree) {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(restart as u64);
    let k = problem.n_checks();
    let start = rng.random_range(0..2 * k);
    let mut current = BoolTree::literal(start / 2, start % 2 == 1);
    let mut current_loss = problem.loss(&current);
    let mut best = (current_loss, current.clone());
    let mut temperature = config.initial_temperature;
    for _ in 0..config.iterations {
        if let Some((_, next)) = propose_move(&current, k, config.max_leaves, &mut rng) {
            let next_loss = problem.loss(&next);
            let delta = (next_loss - current_loss) / problem.total_weight;
            let accept = delta <= 0.0 || rng.random::<f64>() < (-delta / temperature).exp();
            if accept {
                current = next;
                current_loss = next_loss;
                if compare((current_loss, &current), (best.0, &best.1)) == Ordering::Less {
                    best = (current_loss, current.clone());
                }
            }
        }
        if let Some(t) = trace.as_deref_mut() {
            t.current_loss.push(current_loss);
            t.best_loss.push(best.0);
            t.temperature.push(temperature);
        }
        temperature *= config.cooling_rate;
    }
    best
}

/// Fits a single logic tree by simulated annealing.
///
/// The energy is the weighted misclassification divided by the total class
/// weight, so the temperature scale does not depend on the number of rows.
/// Restarts run in parallel on independent streams of `config.seed`; the
/// result is the best tree seen across all restarts and all single-literal
/// trees.
pub fn fit(matrix: &CheckMatrix, config: &FitConfig) -> Result<FittedModel> {
    config.validate()?;
    // weights first: a one-row matrix is also single-class, the clearer error
    let problem = Problem::new(matrix, &config.class_weights)?;
    if matrix.n_rows() < 2 {
        return Err(Error::TooFewValues {
            needed: 2,
            got: matrix.n_rows(),
        });
    }
    let k = problem.n_checks();
    let mut best: Option<(f64, BoolTree)> = None;
    let mut offer = |cand: (f64, BoolTree)| match &best {
        Some(b) if compare((cand.0, &cand.1), (b.0, &b.1)) != Ordering::Less => {}
        _ => best = Some(cand),
    };
    for l in 0..2 * k {
        let t = BoolTree::literal(l / 2, l % 2 == 1);
        offer((problem.loss(&t), t));
    }
    let chains: Vec<(f64, BoolTree)> = (0..config.restarts)
        .into_par_iter()
        .map(|r| anneal_chain(&problem, config, r, None))
        .collect();
    for c in chains {
        offer(c);
    }
    let (_, tree) = best.expect("at least one literal");
    Ok(finish(matrix, &problem, tree, *config))
}

/// Runs one annealing chain and records its trajectory.
pub fn anneal_trace(matrix: &CheckMatrix, config: &FitConfig, restart: usize) -> Result<(BoolTree, AnnealTrace)> {
    config.validate()?;
    let problem = Problem::new(matrix, &config.class_weights)?;
    let mut trace = AnnealTrace::default();
    let (_, tree) = anneal_chain(&problem, config, restart, Some(&mut trace));
    Ok((tree, trace))
}
