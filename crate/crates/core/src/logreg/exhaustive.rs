use std::cmp::Ordering;

use super::anneal::{compare, finish, ClassWeights, FitConfig, FittedModel, Problem};
use super::bits::Bits;
use super::tree::{BoolTree, Operator};
use crate::checks::CheckMatrix;
use crate::error::{Error, Result};

pub const MAX_EXHAUSTIVE_LEAVES: usize = 4;
pub const MAX_EXHAUSTIVE_CHECKS: usize = 4;

/// Globally optimal tree with at most `max_leaves` leaves, by enumeration.
///
/// Ties are broken by fewer leaves, then by [`BoolTree::encode`] order.
pub fn exhaustive_fit(matrix: &CheckMatrix, max_leaves: usize, weights: ClassWeights) -> Result<FittedModel> {
    if max_leaves == 0 || max_leaves > MAX_EXHAUSTIVE_LEAVES || matrix.n_checks() > MAX_EXHAUSTIVE_CHECKS {
        return Err(Error::ExhaustiveBounds {
            max_leaves: MAX_EXHAUSTIVE_LEAVES,
            max_checks: MAX_EXHAUSTIVE_CHECKS,
        });
    }
    let problem = Problem::new(matrix, &weights)?;
    let k = problem.n_checks();

    // by_size[n] holds every tree with n leaves and its predictions; the
    // largest size is streamed instead of stored.
    let mut by_size: Vec<Vec<(BoolTree, Bits)>> = vec![Vec::new()];
    let mut best: Option<(f64, BoolTree)> = None;
    let consider = |loss: f64, build: &dyn Fn() -> BoolTree, best: &mut Option<(f64, BoolTree)>| {
        let replace = match best {
            None => true,
            Some((b, bt)) => {
                if (loss - *b).abs() > 1e-12 * loss.abs().max(b.abs()).max(1.0) {
                    loss < *b
                } else {
                    let cand = build();
                    compare((loss, &cand), (*b, bt)) == Ordering::Less
                }
            }
        };
        if replace {
            *best = Some((loss, build()));
        }
    };

    let literals: Vec<(BoolTree, Bits)> = (0..2 * k)
        .map(|l| {
            let t = BoolTree::literal(l / 2, l % 2 == 1);
            let b = t.eval_bits(&problem.columns, &problem.negated);
            (t, b)
        })
        .collect();
    for (t, b) in &literals {
        consider(problem.loss_of_bits(b), &|| t.clone(), &mut best);
    }
    by_size.push(literals);

    for n in 2..=max_leaves {
        let store = n < max_leaves;
        let mut level = Vec::new();
        for split in 1..n {
            for (lt, lb) in &by_size[split] {
                for (rt, rb) in &by_size[n - split] {
                    for op in [Operator::And, Operator::Or] {
                        let bits = match op {
                            Operator::And => lb.and(rb),
                            Operator::Or => lb.or(rb),
                        };
                        let build = || BoolTree::op(op, lt.clone(), rt.clone());
                        consider(problem.loss_of_bits(&bits), &build, &mut best);
                        if store {
                            level.push((build(), bits));
                        }
                    }
                }
            }
        }
        by_size.push(level);
    }

    let (_, tree) = best.expect("at least one literal");
    let config = FitConfig {
        max_leaves,
        class_weights: weights,
        ..FitConfig::default()
    };
    Ok(finish(matrix, &problem, tree, config))
}
