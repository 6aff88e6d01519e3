use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::bits::Bits;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Operator {
    And,
    Or,
}

impl Operator {
    pub fn flipped(self) -> Self {
        match self {
            Operator::And => Operator::Or,
            Operator::Or => Operator::And,
        }
    }

    fn word(self) -> &'static str {
        match self {
            Operator::And => "AND",
            Operator::Or => "OR",
        }
    }
}

/// Boolean expression over check-failure indicators. Negation lives on
/// leaves only.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum BoolTree {
    Leaf {
        check: usize,
        negated: bool,
    },
    Op {
        op: Operator,
        left: Box<BoolTree>,
        right: Box<BoolTree>,
    },
}

impl BoolTree {
    pub fn leaf(check: usize) -> Self {
        BoolTree::Leaf { check, negated: false }
    }

    pub fn not_leaf(check: usize) -> Self {
        BoolTree::Leaf { check, negated: true }
    }

    pub fn literal(check: usize, negated: bool) -> Self {
        BoolTree::Leaf { check, negated }
    }

    pub fn op(op: Operator, left: BoolTree, right: BoolTree) -> Self {
        BoolTree::Op {
            op,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn and(left: BoolTree, right: BoolTree) -> Self {
        Self::op(Operator::And, left, right)
    }

    pub fn or(left: BoolTree, right: BoolTree) -> Self {
        Self::op(Operator::Or, left, right)
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, BoolTree::Leaf { .. })
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            BoolTree::Leaf { .. } => 1,
            BoolTree::Op { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    pub fn node_count(&self) -> usize {
        2 * self.leaf_count() - 1
    }

    /// Leaf literals in left-to-right order.
    pub fn leaves(&self) -> Vec<(usize, bool)> {
        let mut out = Vec::new();
        self.visit_leaves(&mut |c, n| out.push((c, n)));
        out
    }

    fn visit_leaves(&self, f: &mut impl FnMut(usize, bool)) {
        match self {
            BoolTree::Leaf { check, negated } => f(*check, *negated),
            BoolTree::Op { left, right, .. } => {
                left.visit_leaves(f);
                right.visit_leaves(f);
            }
        }
    }

    /// Distinct check indices referenced by leaves.
    pub fn checks(&self) -> BTreeSet<usize> {
        self.leaves().into_iter().map(|(c, _)| c).collect()
    }

    pub fn eval(&self, row: &[bool]) -> Result<bool> {
        if let Some(&index) = self.checks().iter().find(|&&c| c >= row.len()) {
            return Err(Error::LeafOutOfRange {
                index,
                width: row.len(),
            });
        }
        Ok(self.eval_unchecked(row))
    }

    pub(crate) fn eval_unchecked(&self, row: &[bool]) -> bool {
        match self {
            BoolTree::Leaf { check, negated } => row[*check] != *negated,
            BoolTree::Op { op, left, right } => match op {
                Operator::And => left.eval_unchecked(row) && right.eval_unchecked(row),
                Operator::Or => left.eval_unchecked(row) || right.eval_unchecked(row),
            },
        }
    }

    pub(crate) fn eval_bits(&self, columns: &[Bits], negated: &[Bits]) -> Bits {
        match self {
            BoolTree::Leaf { check, negated: false } => columns[*check].clone(),
            BoolTree::Leaf { check, negated: true } => negated[*check].clone(),
            BoolTree::Op { op, left, right } => {
                let l = left.eval_bits(columns, negated);
                let r = right.eval_bits(columns, negated);
                match op {
                    Operator::And => l.and(&r),
                    Operator::Or => l.or(&r),
                }
            }
        }
    }

    /// Predictions on all `2^k` input rows; row `r` sets check `j` to bit `j` of `r`.
    pub fn truth_table(&self, n_checks: usize) -> Vec<bool> {
        (0..1usize << n_checks)
            .map(|r| {
                let row: Vec<bool> = (0..n_checks).map(|j| r >> j & 1 == 1).collect();
                self.eval_unchecked(&row)
            })
            .collect()
    }

    /// Compact structural encoding, e.g. `and(or(x0,x1),!x2)`. Used for
    /// deterministic tie-breaking.
    pub fn encode(&self) -> String {
        let mut s = String::new();
        self.encode_into(&mut s);
        s
    }

    fn encode_into(&self, s: &mut String) {
        match self {
            BoolTree::Leaf { check, negated } => {
                if *negated {
                    s.push('!');
                }
                let _ = write!(s, "x{check}");
            }
            BoolTree::Op { op, left, right } => {
                s.push_str(match op {
                    Operator::And => "and(",
                    Operator::Or => "or(",
                });
                left.encode_into(s);
                s.push(',');
                right.encode_into(s);
                s.push(')');
            }
        }
    }

    /// Infix rendering with the given check names,
    /// e.g. `(check1 OR check2) AND NOT check3`.
    pub fn render(&self, names: &[String]) -> String {
        let name = |c: usize| names.get(c).cloned().unwrap_or_else(|| format!("x{c}"));
        match self {
            BoolTree::Leaf { check, negated } => {
                if *negated {
                    format!("NOT {}", name(*check))
                } else {
                    name(*check)
                }
            }
            BoolTree::Op { op, left, right } => {
                let side = |t: &BoolTree| {
                    if t.is_leaf() {
                        t.render(names)
                    } else {
                        format!("({})", t.render(names))
                    }
                };
                format!("{} {} {}", side(left), op.word(), side(right))
            }
        }
    }

    /// Graphviz rendering. Negated leaves are drawn white-on-black.
    pub fn to_dot(&self, labels: &[String]) -> String {
        let mut out = String::from("digraph logic_regression {\n");
        out.push_str("  node [fontname=\"Helvetica\"];\n");
        let mut next = 0;
        self.dot_node(labels, &mut out, &mut next);
        out.push_str("}\n");
        out
    }

    fn dot_node(&self, labels: &[String], out: &mut String, next: &mut usize) -> usize {
        let id = *next;
        *next += 1;
        match self {
            BoolTree::Leaf { check, negated } => {
                let label = labels.get(*check).cloned().unwrap_or_else(|| format!("x{check}"));
                let label = label.replace('"', "\\\"");
                if *negated {
                    let _ = writeln!(
                        out,
                        "  n{id} [label=\"NOT {label}\", shape=box, style=filled, fillcolor=black, fontcolor=white];"
                    );
                } else {
                    let _ = writeln!(out, "  n{id} [label=\"{label}\", shape=box];");
                }
            }
            BoolTree::Op { op, left, right } => {
                let _ = writeln!(out, "  n{id} [label=\"{}\", shape=ellipse];", op.word());
                let l = left.dot_node(labels, out, next);
                let r = right.dot_node(labels, out, next);
                let _ = writeln!(out, "  n{id} -> n{l};");
                let _ = writeln!(out, "  n{id} -> n{r};");
            }
        }
        id
    }

    /// Subtree at preorder position `at`.
    pub fn get(&self, at: usize) -> Option<&BoolTree> {
        fn walk<'a>(t: &'a BoolTree, at: usize, pos: &mut usize) -> Option<&'a BoolTree> {
            if *pos == at {
                return Some(t);
            }
            *pos += 1;
            match t {
                BoolTree::Leaf { .. } => None,
                BoolTree::Op { left, right, .. } => walk(left, at, pos).or_else(|| walk(right, at, pos)),
            }
        }
        walk(self, at, &mut 0)
    }

    /// Copy of the tree with the subtree at preorder position `at` replaced.
    pub fn replace(&self, at: usize, f: impl FnOnce(&BoolTree) -> BoolTree) -> BoolTree {
        fn walk(t: &BoolTree, at: usize, pos: &mut usize, f: &mut Option<impl FnOnce(&BoolTree) -> BoolTree>) -> BoolTree {
            if *pos == at {
                *pos += t.node_count();
                return (f.take().expect("replaced twice"))(t);
            }
            *pos += 1;
            match t {
                BoolTree::Leaf { .. } => t.clone(),
                BoolTree::Op { op, left, right } => {
                    let l = walk(left, at, pos, f);
                    let r = walk(right, at, pos, f);
                    BoolTree::op(*op, l, r)
                }
            }
        }
        walk(self, at, &mut 0, &mut Some(f))
    }

    /// Preorder positions and nodes.
    pub fn positions(&self) -> Vec<(usize, &BoolTree)> {
        fn walk<'a>(t: &'a BoolTree, out: &mut Vec<(usize, &'a BoolTree)>) {
            out.push((out.len(), t));
            if let BoolTree::Op { left, right, .. } = t {
                walk(left, out);
                walk(right, out);
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }
}
