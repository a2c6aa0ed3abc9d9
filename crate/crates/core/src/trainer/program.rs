//! Expression trees compiled to a postfix program over coordinate and
//! derivative-quantity slots, evaluated with forward-mode duals so the
//! residual comes with its partials in every quantity.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::ops::{Add, Mul};

use crate::expr::{ExprTree, Node};

/// Maximum number of distinct derivative quantities (u included).
pub const MAX_QUANTITIES: usize = 6;

#[derive(Debug, Clone, Copy)]
pub struct Dual {
    pub v: f64,
    pub d: [f64; MAX_QUANTITIES],
}

impl Dual {
    pub fn constant(v: f64) -> Self {
        Dual {
            v,
            d: [0.0; MAX_QUANTITIES],
        }
    }

    pub fn seed(v: f64, slot: usize) -> Self {
        let mut d = [0.0; MAX_QUANTITIES];
        d[slot] = 1.0;
        Dual { v, d }
    }

    fn chain(self, v: f64, dv: f64) -> Self {
        let mut d = self.d;
        for x in &mut d {
            *x *= dv;
        }
        Dual { v, d }
    }

    fn powf(self, e: Dual) -> Dual {
        let v = libm::pow(self.v, e.v);
        let is_const_exp = e.d.iter().all(|x| *x == 0.0);
        if is_const_exp {
            let dv = if e.v == 0.0 { 0.0 } else { e.v * libm::pow(self.v, e.v - 1.0) };
            return self.chain(v, dv);
        }
        // d(a^b) = a^b (b' ln a + b a'/a)
        let ln = libm::log(self.v);
        let mut d = [0.0; MAX_QUANTITIES];
        for (i, x) in d.iter_mut().enumerate() {
            *x = v * (e.d[i] * ln + e.v * self.d[i] / self.v);
        }
        Dual { v, d }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(mut self, o: Dual) -> Dual {
        self.v += o.v;
        for i in 0..MAX_QUANTITIES {
            self.d[i] += o.d[i];
        }
        self
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        let mut d = [0.0; MAX_QUANTITIES];
        for (i, x) in d.iter_mut().enumerate() {
            *x = self.d[i] * o.v + self.v * o.d[i];
        }
        Dual { v: self.v * o.v, d }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Tanh,
    Sqrt,
}

#[derive(Debug, Clone, PartialEq)]
enum Op {
    Coord(usize),
    Quantity(usize),
    Const(f64),
    Sum(usize),
    Product(usize),
    Pow,
    Func(Func),
}

/// A derivative of the unknown: `(coordinate index, order)` pairs, sorted.
pub type Signature = Vec<(usize, u32)>;

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    ops: Vec<Op>,
}

/// How identifiers in a tree resolve to slots.
pub struct Symbols<'a> {
    pub field: Option<&'a str>,
    /// Coordinate names in input order (spatial axes, then `t` if present).
    pub coords: &'a [String],
    /// Derivative signatures discovered so far; index + 1 is the quantity slot.
    pub signatures: &'a mut Vec<Signature>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CompileError {
    #[error("free symbol `{0}` has no numeric value")]
    FreeSymbol(String),
    #[error("derivative of a non-field expression")]
    ComplexDerivative,
    #[error("derivative along unknown axis `{0}`")]
    UnknownAxis(String),
    #[error("too many distinct derivative terms")]
    TooManyQuantities,
}

impl Program {
    pub fn compile(tree: &ExprTree, sym: &mut Symbols<'_>) -> Result<Program, CompileError> {
        let mut ops = Vec::new();
        emit(tree, sym, &mut ops)?;
        Ok(Program { ops })
    }

    pub fn eval(&self, coords: &[f64], quantities: &[f64], stack: &mut Vec<Dual>) -> Dual {
        stack.clear();
        for op in &self.ops {
            match op {
                Op::Coord(i) => stack.push(Dual::constant(coords[*i])),
                Op::Quantity(i) => stack.push(Dual::seed(quantities[*i], *i)),
                Op::Const(v) => stack.push(Dual::constant(*v)),
                Op::Sum(n) => {
                    let at = stack.len() - n;
                    let s = stack[at..].iter().fold(Dual::constant(0.0), |a, b| a + *b);
                    stack.truncate(at);
                    stack.push(s);
                }
                Op::Product(n) => {
                    let at = stack.len() - n;
                    let s = stack[at..].iter().fold(Dual::constant(1.0), |a, b| a * *b);
                    stack.truncate(at);
                    stack.push(s);
                }
                Op::Pow => {
                    let e = stack.pop().unwrap();
                    let b = stack.pop().unwrap();
                    stack.push(b.powf(e));
                }
                Op::Func(f) => {
                    let a = stack.pop().unwrap();
                    let x = a.v;
                    let r = match f {
                        Func::Sin => a.chain(libm::sin(x), libm::cos(x)),
                        Func::Cos => a.chain(libm::cos(x), -libm::sin(x)),
                        Func::Exp => {
                            let e = libm::exp(x);
                            a.chain(e, e)
                        }
                        Func::Log => a.chain(libm::log(x), 1.0 / x),
                        Func::Tanh => {
                            let t = libm::tanh(x);
                            a.chain(t, 1.0 - t * t)
                        }
                        Func::Sqrt => {
                            let s = libm::sqrt(x);
                            a.chain(s, 0.5 / s)
                        }
                    };
                    stack.push(r);
                }
            }
        }
        stack.pop().unwrap_or(Dual::constant(0.0))
    }

    /// Plain value at a point with no quantities.
    pub fn value(&self, coords: &[f64]) -> f64 {
        let mut stack = Vec::new();
        self.eval(coords, &[0.0; MAX_QUANTITIES], &mut stack).v
    }
}

fn emit(t: &ExprTree, sym: &mut Symbols<'_>, ops: &mut Vec<Op>) -> Result<(), CompileError> {
    match &t.node {
        Node::Num(v) => ops.push(Op::Const(*v)),
        Node::Const(c) => ops.push(Op::Const(match c.as_str() {
            "pi" => core::f64::consts::PI,
            "e" => core::f64::consts::E,
            other => return Err(CompileError::FreeSymbol(other.to_string())),
        })),
        Node::Var(v) => {
            if Some(v.as_str()) == sym.field {
                ops.push(Op::Quantity(0));
            } else if let Some(i) = sym.coords.iter().position(|c| c == v) {
                ops.push(Op::Coord(i));
            } else {
                return Err(CompileError::FreeSymbol(v.clone()));
            }
        }
        Node::TimeDeriv { .. } | Node::SpaceDeriv { .. } => {
            let mut sig: Signature = Vec::new();
            let mut cur = t;
            loop {
                let (axis, order) = match &cur.node {
                    Node::TimeDeriv { order } => (crate::expr::TIME_AXIS, *order),
                    Node::SpaceDeriv { axis, order } => (axis.as_str(), *order),
                    _ => break,
                };
                let i = sym
                    .coords
                    .iter()
                    .position(|c| c == axis)
                    .ok_or_else(|| CompileError::UnknownAxis(axis.to_string()))?;
                match sig.iter_mut().find(|(a, _)| *a == i) {
                    Some((_, k)) => *k += order,
                    None => sig.push((i, order)),
                }
                cur = &cur.children[0];
            }
            match &cur.node {
                Node::Var(v) if Some(v.as_str()) == sym.field => {}
                _ => return Err(CompileError::ComplexDerivative),
            }
            sig.sort_unstable();
            let slot = match sym.signatures.iter().position(|s| *s == sig) {
                Some(i) => i + 1,
                None => {
                    if sym.signatures.len() + 1 >= MAX_QUANTITIES {
                        return Err(CompileError::TooManyQuantities);
                    }
                    sym.signatures.push(sig);
                    sym.signatures.len()
                }
            };
            ops.push(Op::Quantity(slot));
        }
        Node::Sum | Node::Product => {
            for c in &t.children {
                emit(c, sym, ops)?;
            }
            let n = t.children.len();
            ops.push(if t.node == Node::Sum { Op::Sum(n) } else { Op::Product(n) });
        }
        Node::Power => {
            emit(&t.children[0], sym, ops)?;
            emit(&t.children[1], sym, ops)?;
            ops.push(Op::Pow);
        }
        Node::Func(name) => {
            emit(&t.children[0], sym, ops)?;
            let f = match name.as_str() {
                "sin" => Func::Sin,
                "cos" => Func::Cos,
                "exp" => Func::Exp,
                "log" => Func::Log,
                "tanh" => Func::Tanh,
                "sqrt" => Func::Sqrt,
                other => return Err(CompileError::FreeSymbol(other.to_string())),
            };
            ops.push(Op::Func(f));
        }
    }
    Ok(())
}
