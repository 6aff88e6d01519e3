//! The six structural proposals used by the annealer.
//!
//! Positions are preorder indices into the tree.
//!
//! * replace leaf: swap a leaf for a different literal
//! * replace operator: flip AND/OR at an operator node
//! * grow branch: operator subtree `S` becomes `S op literal`
//! * prune branch: an operator with one leaf child and one operator child
//!   is replaced by the operator child (inverse of grow)
//! * split leaf: leaf `L` becomes `L op literal`
//! * delete leaf: an operator with two leaf children is replaced by one of
//!   them (inverse of split)

use rand::Rng;

use super::tree::{BoolTree, Operator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MoveKind {
    ReplaceLeaf,
    ReplaceOperator,
    GrowBranch,
    PruneBranch,
    SplitLeaf,
    DeleteLeaf,
}

impl MoveKind {
    pub const ALL: [MoveKind; 6] = [
        MoveKind::ReplaceLeaf,
        MoveKind::ReplaceOperator,
        MoveKind::GrowBranch,
        MoveKind::PruneBranch,
        MoveKind::SplitLeaf,
        MoveKind::DeleteLeaf,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    ReplaceLeaf { at: usize, check: usize, negated: bool },
    ReplaceOperator { at: usize },
    GrowBranch { at: usize, op: Operator, check: usize, negated: bool },
    PruneBranch { at: usize },
    SplitLeaf { at: usize, op: Operator, check: usize, negated: bool },
    DeleteLeaf { at: usize, keep_left: bool },
}

impl Move {
    pub fn kind(&self) -> MoveKind {
        match self {
            Move::ReplaceLeaf { .. } => MoveKind::ReplaceLeaf,
            Move::ReplaceOperator { .. } => MoveKind::ReplaceOperator,
            Move::GrowBranch { .. } => MoveKind::GrowBranch,
            Move::PruneBranch { .. } => MoveKind::PruneBranch,
            Move::SplitLeaf { .. } => MoveKind::SplitLeaf,
            Move::DeleteLeaf { .. } => MoveKind::DeleteLeaf,
        }
    }

    pub fn apply(&self, tree: &BoolTree) -> BoolTree {
        match *self {
            Move::ReplaceLeaf { at, check, negated } => tree.replace(at, |_| BoolTree::literal(check, negated)),
            Move::ReplaceOperator { at } => tree.replace(at, |t| match t {
                BoolTree::Op { op, left, right } => BoolTree::Op {
                    op: op.flipped(),
                    left: left.clone(),
                    right: right.clone(),
                },
                leaf => leaf.clone(),
            }),
            Move::GrowBranch { at, op, check, negated } | Move::SplitLeaf { at, op, check, negated } => {
                tree.replace(at, |t| BoolTree::op(op, t.clone(), BoolTree::literal(check, negated)))
            }
            Move::PruneBranch { at } => tree.replace(at, |t| match t {
                BoolTree::Op { left, right, .. } if left.is_leaf() => (**right).clone(),
                BoolTree::Op { left, .. } => (**left).clone(),
                leaf => leaf.clone(),
            }),
            Move::DeleteLeaf { at, keep_left } => tree.replace(at, |t| match t {
                BoolTree::Op { left, right, .. } => {
                    if keep_left {
                        (**left).clone()
                    } else {
                        (**right).clone()
                    }
                }
                leaf => leaf.clone(),
            }),
        }
    }
}

/// Positions grouped by the move kinds they admit.
struct Sites {
    leaves: Vec<(usize, usize, bool)>,
    ops: Vec<usize>,
    prunable: Vec<usize>,
    deletable: Vec<usize>,
    leaf_count: usize,
}

impl Sites {
    fn of(tree: &BoolTree) -> Self {
        let mut s = Sites {
            leaves: Vec::new(),
            ops: Vec::new(),
            prunable: Vec::new(),
            deletable: Vec::new(),
            leaf_count: 0,
        };
        for (at, node) in tree.positions() {
            match node {
                BoolTree::Leaf { check, negated } => {
                    s.leaves.push((at, *check, *negated));
                    s.leaf_count += 1;
                }
                BoolTree::Op { left, right, .. } => {
                    s.ops.push(at);
                    match (left.is_leaf(), right.is_leaf()) {
                        (true, true) => s.deletable.push(at),
                        (true, false) | (false, true) => s.prunable.push(at),
                        (false, false) => {}
                    }
                }
            }
        }
        s
    }

    fn applicable(&self, n_checks: usize, max_leaves: usize) -> Vec<MoveKind> {
        let can_grow = self.leaf_count < max_leaves;
        MoveKind::ALL
            .into_iter()
            .filter(|k| match k {
                MoveKind::ReplaceLeaf => 2 * n_checks > 1,
                MoveKind::ReplaceOperator => !self.ops.is_empty(),
                MoveKind::GrowBranch => can_grow && !self.ops.is_empty(),
                MoveKind::PruneBranch => !self.prunable.is_empty(),
                MoveKind::SplitLeaf => can_grow,
                MoveKind::DeleteLeaf => !self.deletable.is_empty(),
            })
            .collect()
    }
}

/// Move kinds applicable to `tree`.
pub fn applicable_moves(tree: &BoolTree, n_checks: usize, max_leaves: usize) -> Vec<MoveKind> {
    Sites::of(tree).applicable(n_checks, max_leaves)
}

fn pick<T: Copy>(rng: &mut impl Rng, items: &[T]) -> T {
    items[rng.random_range(0..items.len())]
}

fn random_op(rng: &mut impl Rng) -> Operator {
    if rng.random::<bool>() {
        Operator::And
    } else {
        Operator::Or
    }
}

fn random_literal(rng: &mut impl Rng, n_checks: usize) -> (usize, bool) {
    let l = rng.random_range(0..2 * n_checks);
    (l / 2, l % 2 == 1)
}

/// Draws one move: the kind uniformly among those applicable, then the site
/// and any new literal or operator uniformly.
///
/// Returns `None` only when nothing applies (a single leaf over one check at
/// `max_leaves == 1`).
pub fn propose_move(tree: &BoolTree, n_checks: usize, max_leaves: usize, rng: &mut impl Rng) -> Option<(Move, BoolTree)> {
    let sites = Sites::of(tree);
    let kinds = sites.applicable(n_checks, max_leaves);
    if kinds.is_empty() {
        return None;
    }
    let mv = match pick(rng, &kinds) {
        MoveKind::ReplaceLeaf => {
            let (at, check, negated) = pick(rng, &sites.leaves);
            // uniform over the 2K - 1 other literals
            let current = 2 * check + negated as usize;
            let mut l = rng.random_range(0..2 * n_checks - 1);
            if l >= current {
                l += 1;
            }
            Move::ReplaceLeaf {
                at,
                check: l / 2,
                negated: l % 2 == 1,
            }
        }
        MoveKind::ReplaceOperator => Move::ReplaceOperator { at: pick(rng, &sites.ops) },
        MoveKind::GrowBranch => {
            let at = pick(rng, &sites.ops);
            let (check, negated) = random_literal(rng, n_checks);
            Move::GrowBranch {
                at,
                op: random_op(rng),
                check,
                negated,
            }
        }
        MoveKind::PruneBranch => Move::PruneBranch {
            at: pick(rng, &sites.prunable),
        },
        MoveKind::SplitLeaf => {
            let (at, _, _) = pick(rng, &sites.leaves);
            let (check, negated) = random_literal(rng, n_checks);
            Move::SplitLeaf {
                at,
                op: random_op(rng),
                check,
                negated,
            }
        }
        MoveKind::DeleteLeaf => Move::DeleteLeaf {
            at: pick(rng, &sites.deletable),
            keep_left: rng.random(),
        },
    };
    let next = mv.apply(tree);
    Some((mv, next))
}
