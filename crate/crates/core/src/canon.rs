//! Canonical form for expression trees.
//!
//! The canonical form is the fixpoint of a bottom-up normalization pass:
//! nested sums/products flattened, numeric literals folded, like terms and
//! repeated factors merged, derivative chains merged per axis and ordered
//! (time outermost, then axis name), commutative children sorted by
//! [`ExprTree::total_cmp`], zero terms and unit coefficients dropped.

use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::expr::{ExprTree, Node, TIME_AXIS};

const MAX_PASSES: usize = 64;

pub fn canonicalize(tree: &ExprTree) -> ExprTree {
    let mut cur = pass(tree);
    for _ in 0..MAX_PASSES {
        let next = pass(&cur);
        if next == cur {
            break;
        }
        cur = next;
    }
    cur
}

pub fn is_canonical(tree: &ExprTree) -> bool {
    pass(tree) == *tree
}

fn pass(tree: &ExprTree) -> ExprTree {
    let children: Vec<ExprTree> = tree.children.iter().map(pass).collect();
    match &tree.node {
        Node::Num(v) => ExprTree::num(if *v == 0.0 { 0.0 } else { *v }),
        Node::Var(_) | Node::Const(_) => tree.clone(),
        Node::Func(name) => fold_func(name, children),
        Node::TimeDeriv { .. } | Node::SpaceDeriv { .. } => {
            let mut chain = Vec::new();
            push_axis(&mut chain, &tree.node);
            let mut base = children.into_iter().next().expect("derivative child");
            while let Node::TimeDeriv { .. } | Node::SpaceDeriv { .. } = base.node {
                push_axis(&mut chain, &base.node);
                base = base.children.into_iter().next().expect("derivative child");
            }
            if matches!(base.node, Node::Num(_) | Node::Const(_)) {
                return ExprTree::num(0.0);
            }
            rebuild_chain(chain, base)
        }
        Node::Power => {
            let mut it = children.into_iter();
            let base = it.next().expect("power base");
            let exp = it.next().expect("power exponent");
            fold_power(base, exp)
        }
        Node::Product => fold_product(children),
        Node::Sum => fold_sum(children),
    }
}

fn push_axis(chain: &mut Vec<(alloc::string::String, u32)>, node: &Node) {
    let (axis, order) = match node {
        Node::TimeDeriv { order } => (TIME_AXIS.into(), *order),
        Node::SpaceDeriv { axis, order } => (axis.clone(), *order),
        _ => return,
    };
    match chain.iter_mut().find(|(a, _)| *a == axis) {
        Some((_, k)) => *k += order,
        None => chain.push((axis, order)),
    }
}

fn rebuild_chain(mut chain: Vec<(alloc::string::String, u32)>, base: ExprTree) -> ExprTree {
    // outermost first: time, then axes by name
    chain.sort_by(|(a, _), (b, _)| match (a == TIME_AXIS, b == TIME_AXIS) {
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        _ => a.cmp(b),
    });
    let mut tree = base;
    for (axis, k) in chain.into_iter().rev() {
        tree = if axis == TIME_AXIS {
            ExprTree::dt(k, tree)
        } else {
            ExprTree::dx(&axis, k, tree)
        };
    }
    tree
}

fn fold_func(name: &str, children: Vec<ExprTree>) -> ExprTree {
    let arg = children.into_iter().next().expect("function argument");
    if let Some(v) = arg.as_num() {
        let r = match name {
            "sin" => libm::sin(v),
            "cos" => libm::cos(v),
            "exp" => libm::exp(v),
            "log" => libm::log(v),
            "tanh" => libm::tanh(v),
            "sqrt" => libm::sqrt(v),
            _ => f64::NAN,
        };
        if r.is_finite() {
            return ExprTree::num(r);
        }
    }
    ExprTree::func(name, arg)
}

fn fold_power(base: ExprTree, exp: ExprTree) -> ExprTree {
    if let Some(e) = exp.as_num() {
        if e == 1.0 {
            return base;
        }
        if e == 0.0 {
            return ExprTree::num(1.0);
        }
        if let Some(b) = base.as_num() {
            let r = libm::pow(b, e);
            if r.is_finite() {
                return ExprTree::num(r);
            }
        }
        if base.node == Node::Power {
            if let Some(inner) = base.children[1].as_num() {
                // (a^p)^q = a^(pq) only for integer q, which is safe for any sign of a
                if libm::trunc(e) == e {
                    let mut it = base.children.into_iter();
                    let a = it.next().unwrap();
                    return ExprTree::power(a, ExprTree::num(inner * e));
                }
            }
        }
    }
    ExprTree::power(base, exp)
}

/// A factor as `base^exponent` with a numeric exponent.
fn split_power(f: ExprTree) -> (ExprTree, f64) {
    if f.node == Node::Power {
        if let Some(e) = f.children[1].as_num() {
            let base = f.children.into_iter().next().unwrap();
            return (base, e);
        }
    }
    (f, 1.0)
}

fn fold_product(children: Vec<ExprTree>) -> ExprTree {
    let mut coeff = 1.0;
    let mut factors: Vec<(ExprTree, f64)> = Vec::new();
    let mut flat = Vec::with_capacity(children.len());
    for c in children {
        if c.node == Node::Product {
            flat.extend(c.children);
        } else {
            flat.push(c);
        }
    }
    for c in flat {
        if let Some(v) = c.as_num() {
            coeff *= v;
            continue;
        }
        let (base, e) = split_power(c);
        match factors
            .iter_mut()
            .find(|(b, _)| b.total_cmp(&base) == Ordering::Equal)
        {
            Some((_, k)) => *k += e,
            None => factors.push((base, e)),
        }
    }
    if coeff == 0.0 || !coeff.is_finite() {
        return ExprTree::num(if coeff.is_finite() { 0.0 } else { coeff });
    }
    let mut out: Vec<ExprTree> = factors
        .into_iter()
        .filter(|(_, e)| *e != 0.0)
        .map(|(b, e)| {
            if e == 1.0 {
                b
            } else {
                ExprTree::power(b, ExprTree::num(e))
            }
        })
        .collect();
    // numeric coefficient over a single sum distributes: c*(a+b) = c*a + c*b
    if out.len() == 1 && out[0].node == Node::Sum && coeff != 1.0 {
        let sum = out.pop().unwrap();
        return ExprTree::sum(
            sum.children
                .into_iter()
                .map(|t| ExprTree::product(alloc::vec![ExprTree::num(coeff), t]))
                .collect(),
        );
    }
    if coeff != 1.0 {
        out.push(ExprTree::num(coeff));
    }
    match out.len() {
        0 => ExprTree::num(coeff),
        1 => out.pop().unwrap(),
        _ => {
            out.sort_by(ExprTree::total_cmp);
            ExprTree::product(out)
        }
    }
}

/// A term as `coefficient * rest`.
fn split_coeff(t: ExprTree) -> (f64, ExprTree) {
    if t.node == Node::Product {
        if let Some(c) = t.children[0].as_num() {
            let mut rest: Vec<ExprTree> = t.children.into_iter().skip(1).collect();
            let rest = if rest.len() == 1 {
                rest.pop().unwrap()
            } else {
                ExprTree::product(rest)
            };
            return (c, rest);
        }
    }
    (1.0, t)
}

fn fold_sum(children: Vec<ExprTree>) -> ExprTree {
    let mut constant = 0.0;
    let mut flat = Vec::with_capacity(children.len());
    for c in children {
        if c.node == Node::Sum {
            flat.extend(c.children);
        } else {
            flat.push(c);
        }
    }
    // (rest, coefficient sum, largest |coefficient| seen)
    let mut groups: Vec<(ExprTree, f64, f64)> = Vec::new();
    for t in flat {
        if let Some(v) = t.as_num() {
            constant += v;
            continue;
        }
        let (c, rest) = split_coeff(t);
        match groups
            .iter_mut()
            .find(|(r, _, _)| r.total_cmp(&rest) == Ordering::Equal)
        {
            Some((_, k, m)) => {
                *k += c;
                *m = m.max(libm::fabs(c));
            }
            None => groups.push((rest, c, libm::fabs(c))),
        }
    }
    let mut out: Vec<ExprTree> = Vec::with_capacity(groups.len() + 1);
    for (rest, c, m) in groups {
        if libm::fabs(c) <= 1e-12 * m {
            continue;
        }
        if c == 1.0 {
            out.push(rest);
        } else if rest.node == Node::Product {
            let mut kids = rest.children;
            kids.insert(0, ExprTree::num(c));
            out.push(ExprTree::product(kids));
        } else {
            out.push(ExprTree::product(alloc::vec![ExprTree::num(c), rest]));
        }
    }
    if constant != 0.0 {
        out.push(ExprTree::num(constant));
    }
    match out.len() {
        0 => ExprTree::num(0.0),
        1 => out.pop().unwrap(),
        _ => {
            out.sort_by(ExprTree::total_cmp);
            ExprTree::sum(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse;

    fn canon(s: &str) -> ExprTree {
        canonicalize(&parse(s).unwrap())
    }

    #[test]
    fn commutativity() {
        assert_eq!(canon("u_xx + u_t"), canon("u_t + u_xx"));
        assert_eq!(canon("u*u_x"), canon("u_x*u"));
    }

    #[test]
    fn like_terms() {
        assert_eq!(canon("2*u_x + 3*u_x"), canon("5*u_x"));
        assert_eq!(canon("u - u"), ExprTree::num(0.0));
        assert_eq!(canon("u_t + 0*u_xx"), canon("u_t"));
    }

    #[test]
    fn notation_unification() {
        assert_eq!(canon("d2u/dx2"), canon("u_xx"));
        assert_eq!(canon("du/dt"), canon("u_t"));
        assert_eq!(canon("d2u/dxdt"), canon("u_tx"));
        assert_eq!(canon("u_xy"), canon("u_yx"));
        assert_eq!(canon("diff(diff(u, x), x)"), canon("u_xx"));
    }

    #[test]
    fn constant_folding() {
        assert_eq!(canon("u_t - 0.05*u_xx - 0.05*u_xx"), canon("u_t - 0.1*u_xx"));
        assert_eq!(canon("2*3*u"), canon("6*u"));
        assert_eq!(canon("u*u"), canon("u^2"));
        assert_eq!(canon("u_xx/2"), canon("0.5*u_xx"));
        assert_eq!(canon("2*(u + v)"), canon("2*u + 2*v"));
    }

    #[test]
    fn canonical_heat_shape() {
        let t = canon("u_t - 0.1*u_xx");
        // sum(product(-0.1, dx(u)), dt(u)) with 7 nodes
        assert_eq!(t.node_count(), 7);
        assert!(is_canonical(&t));
        assert_eq!(t.node, Node::Sum);
        assert_eq!(t.children.len(), 2);
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        assert_eq!(canon("u_t + diff(3, x)"), canon("u_t"));
    }
}
