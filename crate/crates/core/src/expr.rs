//! Expression trees for PDE residuals.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

/// Axis label used for the time variable.
pub const TIME_AXIS: &str = "t";

/// Relative tolerance used when comparing numeric literals.
pub const COEFF_TOL: f64 = 1e-9;

/// Names that parse as named constants rather than variables.
pub const NAMED_CONSTANTS: &[&str] = &["pi", "e"];

/// Function names accepted by both grammars.
pub const KNOWN_FUNCTIONS: &[&str] = &["sin", "cos", "exp", "log", "tanh", "sqrt"];

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// `∂ᵏ/∂tᵏ` of the single child.
    TimeDeriv { order: u32 },
    /// `∂ᵏ/∂axisᵏ` of the single child.
    SpaceDeriv { axis: String, order: u32 },
    Var(String),
    Const(String),
    Num(f64),
    Sum,
    Product,
    /// Ordered: `[base, exponent]`.
    Power,
    Func(String),
}

impl Node {
    fn rank(&self) -> u8 {
        match self {
            Node::Num(_) => 0,
            Node::Const(_) => 1,
            Node::Var(_) => 2,
            Node::TimeDeriv { .. } => 3,
            Node::SpaceDeriv { .. } => 4,
            Node::Func(_) => 5,
            Node::Power => 6,
            Node::Product => 7,
            Node::Sum => 8,
        }
    }

    pub fn is_commutative(&self) -> bool {
        matches!(self, Node::Sum | Node::Product)
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Node::Var(_) | Node::Const(_) | Node::Num(_))
    }

    /// Kind-and-label agreement, with numeric literals compared under [`COEFF_TOL`].
    pub fn label_matches(&self, other: &Node) -> bool {
        match (self, other) {
            (Node::Num(a), Node::Num(b)) => nums_match(*a, *b),
            _ => self == other,
        }
    }

    /// Fixed total order on a single node: kind, then symbol name, then order/value.
    pub fn cmp_label(&self, other: &Node) -> Ordering {
        self.rank().cmp(&other.rank()).then_with(|| match (self, other) {
            (Node::Num(a), Node::Num(b)) => a.total_cmp(b),
            (Node::Var(a), Node::Var(b))
            | (Node::Const(a), Node::Const(b))
            | (Node::Func(a), Node::Func(b)) => a.cmp(b),
            (Node::TimeDeriv { order: a }, Node::TimeDeriv { order: b }) => a.cmp(b),
            (
                Node::SpaceDeriv { axis: a, order: oa },
                Node::SpaceDeriv { axis: b, order: ob },
            ) => a.cmp(b).then(oa.cmp(ob)),
            _ => Ordering::Equal,
        })
    }
}

pub fn nums_match(a: f64, b: f64) -> bool {
    let scale = 1f64.max(libm::fabs(a)).max(libm::fabs(b));
    libm::fabs(a - b) <= COEFF_TOL * scale
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TreeError {
    #[error("{kind} node needs at least 2 children, got {got}")]
    TooFewChildren { kind: &'static str, got: usize },
    #[error("{kind} node needs exactly {want} children, got {got}")]
    Arity {
        kind: &'static str,
        want: usize,
        got: usize,
    },
    #[error("derivative order must be at least 1")]
    ZeroOrder,
    #[error("numeric literal is not finite")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExprTree {
    pub node: Node,
    pub children: Vec<ExprTree>,
}

impl ExprTree {
    pub fn leaf(node: Node) -> Self {
        ExprTree {
            node,
            children: Vec::new(),
        }
    }

    pub fn num(v: f64) -> Self {
        Self::leaf(Node::Num(v))
    }

    pub fn var(name: &str) -> Self {
        Self::leaf(Node::Var(name.into()))
    }

    pub fn constant(name: &str) -> Self {
        Self::leaf(Node::Const(name.into()))
    }

    pub fn sum(children: Vec<ExprTree>) -> Self {
        ExprTree {
            node: Node::Sum,
            children,
        }
    }

    pub fn product(children: Vec<ExprTree>) -> Self {
        ExprTree {
            node: Node::Product,
            children,
        }
    }

    pub fn power(base: ExprTree, exponent: ExprTree) -> Self {
        ExprTree {
            node: Node::Power,
            children: vec![base, exponent],
        }
    }

    pub fn func(name: &str, arg: ExprTree) -> Self {
        ExprTree {
            node: Node::Func(name.into()),
            children: vec![arg],
        }
    }

    pub fn dt(order: u32, child: ExprTree) -> Self {
        ExprTree {
            node: Node::TimeDeriv { order },
            children: vec![child],
        }
    }

    pub fn dx(axis: &str, order: u32, child: ExprTree) -> Self {
        ExprTree {
            node: Node::SpaceDeriv {
                axis: axis.into(),
                order,
            },
            children: vec![child],
        }
    }

    pub fn as_num(&self) -> Option<f64> {
        match self.node {
            Node::Num(v) => Some(v),
            _ => None,
        }
    }

    /// Checks the structural invariants on every node.
    pub fn validate(&self) -> Result<(), TreeError> {
        let n = self.children.len();
        match &self.node {
            Node::Sum if n < 2 => return Err(TreeError::TooFewChildren { kind: "sum", got: n }),
            Node::Product if n < 2 => {
                return Err(TreeError::TooFewChildren {
                    kind: "product",
                    got: n,
                })
            }
            Node::Power if n != 2 => {
                return Err(TreeError::Arity {
                    kind: "power",
                    want: 2,
                    got: n,
                })
            }
            Node::TimeDeriv { order } | Node::SpaceDeriv { order, .. } => {
                if *order == 0 {
                    return Err(TreeError::ZeroOrder);
                }
                if n != 1 {
                    return Err(TreeError::Arity {
                        kind: "derivative",
                        want: 1,
                        got: n,
                    });
                }
            }
            Node::Func(_) if n != 1 => {
                return Err(TreeError::Arity {
                    kind: "function",
                    want: 1,
                    got: n,
                })
            }
            Node::Num(v) if !v.is_finite() => return Err(TreeError::NonFinite),
            Node::Var(_) | Node::Const(_) | Node::Num(_) if n != 0 => {
                return Err(TreeError::Arity {
                    kind: "leaf",
                    want: 0,
                    got: n,
                })
            }
            _ => {}
        }
        self.children.iter().try_for_each(ExprTree::validate)
    }

    /// Total node count, leaves included.
    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(ExprTree::node_count).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(ExprTree::depth).max().unwrap_or(0)
    }

    /// Fixed total order: node label, then children lexicographically, then child count.
    pub fn total_cmp(&self, other: &ExprTree) -> Ordering {
        self.node.cmp_label(&other.node).then_with(|| {
            for (a, b) in self.children.iter().zip(&other.children) {
                let c = a.total_cmp(b);
                if c != Ordering::Equal {
                    return c;
                }
            }
            self.children.len().cmp(&other.children.len())
        })
    }

    /// Structural equality with tolerant numeric literals.
    pub fn approx_eq(&self, other: &ExprTree) -> bool {
        self.node.label_matches(&other.node)
            && self.children.len() == other.children.len()
            && self
                .children
                .iter()
                .zip(&other.children)
                .all(|(a, b)| a.approx_eq(b))
    }

    /// Pre-order traversal.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a ExprTree)) {
        f(self);
        for c in &self.children {
            c.walk(f);
        }
    }

    pub fn contains(&self, pred: &dyn Fn(&ExprTree) -> bool) -> bool {
        pred(self) || self.children.iter().any(|c| c.contains(pred))
    }

    /// Rename variables, leaving everything else untouched.
    pub fn rename_vars(&self, f: &dyn Fn(&str) -> Option<String>) -> ExprTree {
        let node = match &self.node {
            Node::Var(v) => Node::Var(f(v).unwrap_or_else(|| v.clone())),
            Node::SpaceDeriv { axis, order } => Node::SpaceDeriv {
                axis: f(axis).unwrap_or_else(|| axis.clone()),
                order: *order,
            },
            other => other.clone(),
        };
        ExprTree {
            node,
            children: self.children.iter().map(|c| c.rename_vars(f)).collect(),
        }
    }

    pub fn into_boxed(self) -> Box<ExprTree> {
        Box::new(self)
    }
}

/// Infix rendering, parseable by [`crate::parse::parse`].
impl fmt::Display for ExprTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn needs_parens(t: &ExprTree) -> bool {
            matches!(t.node, Node::Sum | Node::Product | Node::Power)
                || matches!(t.node, Node::Num(v) if v < 0.0)
        }
        fn wrap(t: &ExprTree, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            if needs_parens(t) {
                write!(f, "({t})")
            } else {
                write!(f, "{t}")
            }
        }
        match &self.node {
            Node::Num(v) => write!(f, "{v:?}"),
            Node::Var(s) | Node::Const(s) => f.write_str(s),
            Node::Func(name) => write!(f, "{name}({})", self.children[0]),
            Node::TimeDeriv { order } => {
                write!(f, "diff({}, {TIME_AXIS}, {order})", self.children[0])
            }
            Node::SpaceDeriv { axis, order } => {
                write!(f, "diff({}, {axis}, {order})", self.children[0])
            }
            Node::Sum => {
                for (i, c) in self.children.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" + ")?;
                    }
                    if matches!(c.node, Node::Sum) {
                        write!(f, "({c})")?;
                    } else {
                        write!(f, "{c}")?;
                    }
                }
                Ok(())
            }
            Node::Product => {
                for (i, c) in self.children.iter().enumerate() {
                    if i > 0 {
                        f.write_str("*")?;
                    }
                    if matches!(c.node, Node::Sum | Node::Product)
                        || matches!(c.node, Node::Num(v) if v < 0.0 && i > 0)
                    {
                        write!(f, "({c})")?;
                    } else {
                        write!(f, "{c}")?;
                    }
                }
                Ok(())
            }
            Node::Power => {
                wrap(&self.children[0], f)?;
                f.write_str("^")?;
                wrap(&self.children[1], f)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_counts() {
        assert_eq!(ExprTree::var("u").node_count(), 1);
        let s = ExprTree::sum(vec![ExprTree::var("u"), ExprTree::num(1.0)]);
        assert_eq!(s.node_count(), 3);
    }

    #[test]
    fn validate_rejects_bad_arity() {
        let bad = ExprTree::sum(vec![ExprTree::var("u")]);
        assert!(matches!(
            bad.validate(),
            Err(TreeError::TooFewChildren { .. })
        ));
        let zero = ExprTree::dt(0, ExprTree::var("u"));
        assert_eq!(zero.validate(), Err(TreeError::ZeroOrder));
        assert_eq!(ExprTree::num(f64::NAN).validate(), Err(TreeError::NonFinite));
    }

    #[test]
    fn numeric_labels_use_relative_tolerance() {
        assert!(nums_match(0.1, 0.1 + 1e-12));
        assert!(nums_match(1e6, 1e6 + 1e-4));
        assert!(!nums_match(0.1, 0.1001));
    }

    #[test]
    fn order_is_total_on_kinds() {
        let a = ExprTree::num(3.0);
        let b = ExprTree::var("u");
        assert_eq!(a.total_cmp(&b), Ordering::Less);
        assert_eq!(b.total_cmp(&b.clone()), Ordering::Equal);
    }
}
