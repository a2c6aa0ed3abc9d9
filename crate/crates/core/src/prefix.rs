//! Prefix (s-expression) notation used in the JSON interchange format.
//!
//! ```text
//! (+ (D t 1 u) (* -0.01 (D x 2 u)))
//! ```
//!
//! `(+ ...)` sum, `(* ...)` product, `(^ base exp)` power,
//! `(D axis order child)` derivative (axis `t` is time), `(name arg)` function.
//! Numbers are written in shortest round-trip form.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::expr::{ExprTree, Node, KNOWN_FUNCTIONS, NAMED_CONSTANTS, TIME_AXIS};
use crate::parse::ParseError;

pub fn to_prefix(tree: &ExprTree) -> String {
    let mut out = String::new();
    write_prefix(tree, &mut out);
    out
}

fn write_prefix(tree: &ExprTree, out: &mut String) {
    match &tree.node {
        Node::Num(v) => {
            let _ = write!(out, "{v:?}");
        }
        Node::Var(s) | Node::Const(s) => out.push_str(s),
        Node::TimeDeriv { order } => {
            let _ = write!(out, "(D {TIME_AXIS} {order} ");
            write_prefix(&tree.children[0], out);
            out.push(')');
        }
        Node::SpaceDeriv { axis, order } => {
            let _ = write!(out, "(D {axis} {order} ");
            write_prefix(&tree.children[0], out);
            out.push(')');
        }
        other => {
            out.push('(');
            match other {
                Node::Sum => out.push('+'),
                Node::Product => out.push('*'),
                Node::Power => out.push('^'),
                Node::Func(name) => out.push_str(name),
                _ => unreachable!(),
            }
            for c in &tree.children {
                out.push(' ');
                write_prefix(c, out);
            }
            out.push(')');
        }
    }
}

pub fn from_prefix(text: &str) -> Result<ExprTree, ParseError> {
    let tokens = tokenize(text)?;
    if tokens.is_empty() {
        return Err(ParseError::syntax(0, "empty expression"));
    }
    let mut pos = 0;
    let tree = parse_tokens(&tokens, &mut pos)?;
    if pos != tokens.len() {
        return Err(ParseError::syntax(tokens[pos].0, "trailing input"));
    }
    tree.validate()
        .map_err(|e| ParseError::syntax(0, alloc::format!("{e}")))?;
    Ok(tree)
}

#[derive(Debug, PartialEq)]
enum Tok<'a> {
    Open,
    Close,
    Atom(&'a str),
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok<'_>)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            c if c.is_ascii_whitespace() => i += 1,
            b'(' => {
                out.push((i, Tok::Open));
                i += 1;
            }
            b')' => {
                out.push((i, Tok::Close));
                i += 1;
            }
            _ => {
                let start = i;
                while i < bytes.len() && !bytes[i].is_ascii_whitespace() && !matches!(bytes[i], b'(' | b')') {
                    i += 1;
                }
                out.push((start, Tok::Atom(&text[start..i])));
            }
        }
    }
    Ok(out)
}

fn parse_tokens(tokens: &[(usize, Tok<'_>)], pos: &mut usize) -> Result<ExprTree, ParseError> {
    let Some((at, tok)) = tokens.get(*pos) else {
        let end = tokens.last().map(|t| t.0 + 1).unwrap_or(0);
        return Err(ParseError::syntax(end, "unexpected end of input"));
    };
    let at = *at;
    *pos += 1;
    match tok {
        Tok::Close => Err(ParseError::syntax(at, "unexpected `)`")),
        Tok::Atom(a) => atom(at, a),
        Tok::Open => {
            let Some((op_at, Tok::Atom(op))) = tokens.get(*pos) else {
                return Err(ParseError::syntax(at + 1, "expected operator"));
            };
            let op_at = *op_at;
            *pos += 1;
            let tree = if *op == "D" {
                let axis = expect_atom(tokens, pos)?;
                let (k_at, k) = expect_atom_at(tokens, pos)?;
                let order: u32 = k
                    .parse()
                    .ok()
                    .filter(|k| *k > 0)
                    .ok_or_else(|| ParseError::syntax(k_at, "bad derivative order"))?;
                let child = parse_tokens(tokens, pos)?;
                if axis == TIME_AXIS {
                    ExprTree::dt(order, child)
                } else {
                    ExprTree::dx(axis, order, child)
                }
            } else {
                let node = match *op {
                    "+" => Node::Sum,
                    "*" => Node::Product,
                    "^" => Node::Power,
                    f if KNOWN_FUNCTIONS.contains(&f) => Node::Func(f.into()),
                    other => {
                        return Err(ParseError::UnknownSymbol {
                            offset: op_at,
                            name: other.into(),
                        })
                    }
                };
                let mut children = Vec::new();
                while !matches!(tokens.get(*pos), Some((_, Tok::Close)) | None) {
                    children.push(parse_tokens(tokens, pos)?);
                }
                ExprTree { node, children }
            };
            match tokens.get(*pos) {
                Some((_, Tok::Close)) => {
                    *pos += 1;
                    Ok(tree)
                }
                Some((p, _)) => Err(ParseError::syntax(*p, "expected `)`")),
                None => Err(ParseError::syntax(
                    tokens.last().map(|t| t.0 + 1).unwrap_or(0),
                    "unclosed `(`",
                )),
            }
        }
    }
}

fn expect_atom<'a>(tokens: &[(usize, Tok<'a>)], pos: &mut usize) -> Result<&'a str, ParseError> {
    expect_atom_at(tokens, pos).map(|(_, a)| a)
}

fn expect_atom_at<'a>(
    tokens: &[(usize, Tok<'a>)],
    pos: &mut usize,
) -> Result<(usize, &'a str), ParseError> {
    match tokens.get(*pos) {
        Some((at, Tok::Atom(a))) => {
            *pos += 1;
            Ok((*at, a))
        }
        Some((at, _)) => Err(ParseError::syntax(*at, "expected atom")),
        None => Err(ParseError::syntax(0, "unexpected end of input")),
    }
}

fn atom(at: usize, a: &str) -> Result<ExprTree, ParseError> {
    let first = a.as_bytes()[0];
    if first.is_ascii_digit() || first == b'-' || first == b'+' || first == b'.' {
        return match a.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(ExprTree::num(v)),
            _ => Err(ParseError::syntax(at, "malformed number")),
        };
    }
    if !a.bytes().all(|c| c.is_ascii_alphanumeric() || c == b'_') {
        return Err(ParseError::syntax(at, "malformed symbol"));
    }
    if NAMED_CONSTANTS.contains(&a) {
        Ok(ExprTree::constant(a))
    } else {
        Ok(ExprTree::var(a))
    }
}
