//! Logic regression: a single Boolean tree over check failures, fitted by
//! simulated annealing over six structural moves.

mod anneal;
mod bits;
mod exhaustive;
mod moves;
mod tree;

pub use anneal::{
    anneal_trace, cooling_for, fit, predict, weighted_misclassification, AnnealTrace, ClassWeights, FitConfig,
    FittedModel,
};
pub use exhaustive::{exhaustive_fit, MAX_EXHAUSTIVE_CHECKS, MAX_EXHAUSTIVE_LEAVES};
pub use moves::{applicable_moves, propose_move, Move, MoveKind};
pub use tree::{BoolTree, Operator};

/// Evaluates `tree` on one row of check bits.
pub fn eval_tree(tree: &BoolTree, row: &[bool]) -> crate::Result<bool> {
    tree.eval(row)
}
