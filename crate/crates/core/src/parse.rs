//! Infix grammar for PDE expressions.
//!
//! Accepts subscript derivatives (`u_xx`, `u_t`), operator derivatives
//! (`du/dt`, `d2u/dx2`, `d^2u/dx^2`, `d2u/dxdy`), the explicit form
//! `diff(expr, axis, order)`, infix `+ - * / ^`, parentheses and the
//! functions in [`KNOWN_FUNCTIONS`].

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::expr::{ExprTree, Node, KNOWN_FUNCTIONS, NAMED_CONSTANTS, TIME_AXIS};

/// Axis letters recognized in subscript notation.
const SUBSCRIPT_AXES: &[char] = &['t', 'x', 'y', 'z'];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown function `{name}` at offset {offset}")]
    UnknownSymbol { offset: usize, name: String },
}

impl ParseError {
    pub(crate) fn syntax(offset: usize, message: impl Into<String>) -> Self {
        ParseError::Syntax {
            offset,
            message: message.into(),
        }
    }
}

pub fn parse(text: &str) -> Result<ExprTree, ParseError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
    };
    p.skip_ws();
    if p.at_end() {
        return Err(ParseError::syntax(0, "empty expression"));
    }
    let tree = p.expr()?;
    p.skip_ws();
    if !p.at_end() {
        return Err(ParseError::syntax(
            p.pos,
            alloc::format!("unexpected `{}`", p.src[p.pos] as char),
        ));
    }
    Ok(tree)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek_at(&self, i: usize) -> Option<u8> {
        self.src.get(i).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(ParseError::syntax(
                self.pos,
                alloc::format!("expected `{}`", c as char),
            ))
        }
    }

    fn expr(&mut self) -> Result<ExprTree, ParseError> {
        let mut terms = vec![self.term()?];
        loop {
            if self.eat(b'+') {
                terms.push(self.term()?);
            } else if self.eat(b'-') {
                terms.push(negate(self.term()?));
            } else {
                break;
            }
        }
        Ok(collapse(Node::Sum, terms))
    }

    fn term(&mut self) -> Result<ExprTree, ParseError> {
        let mut factors = Vec::new();
        push_factor(&mut factors, self.unary()?);
        loop {
            if self.eat(b'*') {
                push_factor(&mut factors, self.unary()?);
            } else if self.eat(b'/') {
                let d = self.unary()?;
                let recip = match d.as_num() {
                    Some(v) if v != 0.0 => ExprTree::num(1.0 / v),
                    _ => ExprTree::power(d, ExprTree::num(-1.0)),
                };
                push_factor(&mut factors, recip);
            } else {
                break;
            }
        }
        Ok(collapse(Node::Product, factors))
    }

    fn unary(&mut self) -> Result<ExprTree, ParseError> {
        if self.eat(b'-') {
            return Ok(negate(self.unary()?));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<ExprTree, ParseError> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let exp = self.unary()?;
            return Ok(ExprTree::power(base, exp));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<ExprTree, ParseError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            None => Err(ParseError::syntax(start, "unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(b'd') => {
                if let Some(t) = self.operator_derivative()? {
                    Ok(t)
                } else {
                    self.identifier_atom()
                }
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier_atom(),
            Some(c) => Err(ParseError::syntax(
                start,
                alloc::format!("unexpected `{}`", c as char),
            )),
        }
    }

    fn number(&mut self) -> Result<ExprTree, ParseError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit() || c == b'.') {
            self.pos += 1;
        }
        if matches!(self.peek(), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    self.pos += 1;
                }
            } else {
                self.pos = save;
            }
        }
        let text = core::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(ExprTree::num(v)),
            _ => Err(ParseError::syntax(start, "malformed number")),
        }
    }

    fn ident(&mut self) -> String {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()
    }

    fn identifier_atom(&mut self) -> Result<ExprTree, ParseError> {
        let start = self.pos;
        let name = self.ident();
        self.skip_ws();
        if self.peek() == Some(b'(') {
            self.pos += 1;
            if name == "diff" {
                return self.diff_call();
            }
            if !KNOWN_FUNCTIONS.contains(&name.as_str()) {
                return Err(ParseError::UnknownSymbol {
                    offset: start,
                    name,
                });
            }
            let arg = self.expr()?;
            self.expect(b')')?;
            return Ok(ExprTree::func(&name, arg));
        }
        Ok(symbol(&name))
    }

    /// `diff(expr, axis[, order])`; the opening paren is already consumed.
    fn diff_call(&mut self) -> Result<ExprTree, ParseError> {
        let inner = self.expr()?;
        self.expect(b',')?;
        self.skip_ws();
        let axis_at = self.pos;
        let axis = self.ident();
        if axis.is_empty() {
            return Err(ParseError::syntax(axis_at, "expected axis name"));
        }
        let order = if self.eat(b',') {
            self.skip_ws();
            self.integer()
                .ok_or_else(|| ParseError::syntax(self.pos, "expected derivative order"))?
        } else {
            1
        };
        if order == 0 {
            return Err(ParseError::syntax(axis_at, "derivative order must be >= 1"));
        }
        self.expect(b')')?;
        Ok(derivative(&axis, order, inner))
    }

    fn integer(&mut self) -> Option<u32> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        core::str::from_utf8(&self.src[start..self.pos])
            .ok()?
            .parse()
            .ok()
    }

    /// Operator notation `d[^]k?VAR/dAXIS[^]k?...`. Returns `None` (without
    /// consuming) when the text at the cursor is an ordinary identifier.
    fn operator_derivative(&mut self) -> Result<Option<ExprTree>, ParseError> {
        let start = self.pos;
        let mut i = start + 1;
        if self.peek_at(i) == Some(b'^') {
            i += 1;
        }
        let order_start = i;
        while matches!(self.peek_at(i), Some(c) if c.is_ascii_digit()) {
            i += 1;
        }
        let total: Option<u32> = if i > order_start {
            core::str::from_utf8(&self.src[order_start..i])
                .ok()
                .and_then(|s| s.parse().ok())
        } else {
            None
        };
        let var_start = i;
        if !matches!(self.peek_at(i), Some(c) if c.is_ascii_alphabetic()) {
            return Ok(None);
        }
        while matches!(self.peek_at(i), Some(c) if c.is_ascii_alphanumeric()) {
            i += 1;
        }
        if self.peek_at(i) != Some(b'/') || self.peek_at(i + 1) != Some(b'd') {
            return Ok(None);
        }
        let var = String::from_utf8_lossy(&self.src[var_start..i]).into_owned();
        i += 2;
        // one or more `AXIS[^]k?` groups, each but the first introduced by `d`
        let mut axes: Vec<(char, u32)> = Vec::new();
        loop {
            match self.peek_at(i) {
                Some(c) if c.is_ascii_alphabetic() => {
                    i += 1;
                    if self.peek_at(i) == Some(b'^') {
                        i += 1;
                    }
                    let k_start = i;
                    while matches!(self.peek_at(i), Some(c) if c.is_ascii_digit()) {
                        i += 1;
                    }
                    let k = if i > k_start {
                        core::str::from_utf8(&self.src[k_start..i])
                            .ok()
                            .and_then(|s| s.parse::<u32>().ok())
                            .filter(|k| *k > 0)
                            .ok_or_else(|| ParseError::syntax(k_start, "bad derivative order"))?
                    } else {
                        1
                    };
                    axes.push((c as char, k));
                }
                _ => return Err(ParseError::syntax(i, "expected axis after `d`")),
            }
            if self.peek_at(i) == Some(b'd')
                && matches!(self.peek_at(i + 1), Some(c) if c.is_ascii_alphabetic())
                && !matches!(self.peek_at(i + 2), Some(c) if c.is_ascii_alphabetic())
            {
                i += 1;
                continue;
            }
            break;
        }
        let sum: u32 = axes.iter().map(|(_, k)| k).sum();
        let want = total.unwrap_or(1);
        if sum != want {
            return Err(ParseError::syntax(
                start,
                alloc::format!("numerator order {want} does not match denominator order {sum}"),
            ));
        }
        self.pos = i;
        let mut tree = ExprTree::var(&var);
        for (axis, k) in axes.into_iter().rev() {
            let mut name = String::new();
            name.push(axis);
            tree = derivative(&name, k, tree);
        }
        Ok(Some(tree))
    }
}

fn derivative(axis: &str, order: u32, inner: ExprTree) -> ExprTree {
    if axis == TIME_AXIS {
        ExprTree::dt(order, inner)
    } else {
        ExprTree::dx(axis, order, inner)
    }
}

/// Identifier leaf: a subscript derivative, a named constant, or a variable.
fn symbol(name: &str) -> ExprTree {
    if let Some((base, sub)) = name.split_once('_') {
        if !base.is_empty()
            && !sub.is_empty()
            && sub.chars().all(|c| SUBSCRIPT_AXES.contains(&c))
        {
            // group consecutive repeats: u_xxy -> x^2 then y
            let mut groups: Vec<(char, u32)> = Vec::new();
            for c in sub.chars() {
                match groups.last_mut() {
                    Some((g, k)) if *g == c => *k += 1,
                    _ => groups.push((c, 1)),
                }
            }
            let mut tree = ExprTree::var(base);
            for (axis, k) in groups.into_iter().rev() {
                tree = derivative(&axis.to_string(), k, tree);
            }
            return tree;
        }
    }
    if NAMED_CONSTANTS.contains(&name) {
        ExprTree::constant(name)
    } else {
        ExprTree::var(name)
    }
}

fn collapse(node: Node, mut items: Vec<ExprTree>) -> ExprTree {
    if items.len() == 1 {
        return items.pop().unwrap();
    }
    let mut flat = Vec::with_capacity(items.len());
    for it in items {
        if it.node == node {
            flat.extend(it.children);
        } else {
            flat.push(it);
        }
    }
    ExprTree {
        node,
        children: flat,
    }
}

fn push_factor(factors: &mut Vec<ExprTree>, f: ExprTree) {
    if f.node == Node::Product {
        factors.extend(f.children);
    } else {
        factors.push(f);
    }
}

/// Negation as a numeric coefficient.
pub(crate) fn negate(t: ExprTree) -> ExprTree {
    match t.node {
        Node::Num(v) => ExprTree::num(-v),
        Node::Product => {
            let mut children = t.children;
            if let Some(v) = children[0].as_num() {
                children[0] = ExprTree::num(-v);
            } else {
                children.insert(0, ExprTree::num(-1.0));
            }
            ExprTree::product(children)
        }
        _ => ExprTree::product(vec![ExprTree::num(-1.0), t]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u() -> ExprTree {
        ExprTree::var("u")
    }

    #[test]
    fn operator_notation_heat() {
        let t = parse("du/dt - 0.01*d2u/dx2").unwrap();
        let want = ExprTree::sum(vec![
            ExprTree::dt(1, u()),
            ExprTree::product(vec![ExprTree::num(-0.01), ExprTree::dx("x", 2, u())]),
        ]);
        assert_eq!(t, want);
    }

    #[test]
    fn subscript_burgers() {
        let t = parse("u_t + u*u_x").unwrap();
        let want = ExprTree::sum(vec![
            ExprTree::dt(1, u()),
            ExprTree::product(vec![u(), ExprTree::dx("x", 1, u())]),
        ]);
        assert_eq!(t, want);
    }

    #[test]
    fn truncated_operator_is_syntax_error_at_4() {
        match parse("du/d") {
            Err(ParseError::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_function() {
        assert!(matches!(
            parse("foo(x) + u"),
            Err(ParseError::UnknownSymbol { offset: 0, .. })
        ));
    }

    #[test]
    fn caret_and_mixed_forms() {
        assert_eq!(
            parse("d^2u/dx^2").unwrap(),
            ExprTree::dx("x", 2, u())
        );
        assert_eq!(
            parse("d2u/dxdy").unwrap(),
            ExprTree::dx("x", 1, ExprTree::dx("y", 1, u()))
        );
        assert_eq!(parse("diff(u, x1, 2)").unwrap(), ExprTree::dx("x1", 2, u()));
        assert_eq!(parse("diff(u, t)").unwrap(), ExprTree::dt(1, u()));
    }

    #[test]
    fn constants_functions_and_division() {
        let t = parse("sin(pi*x)/2").unwrap();
        assert_eq!(
            t,
            ExprTree::product(vec![
                ExprTree::func(
                    "sin",
                    ExprTree::product(vec![ExprTree::constant("pi"), ExprTree::var("x")])
                ),
                ExprTree::num(0.5),
            ])
        );
        assert!(matches!(parse("u^-1").unwrap().node, Node::Power));
        assert!(matches!(parse("1e-3*u").unwrap().children[0].node, Node::Num(v) if v == 1e-3));
    }

    #[test]
    fn plain_identifiers_stay_variables() {
        assert_eq!(parse("nu").unwrap(), ExprTree::var("nu"));
        assert_eq!(parse("u_0").unwrap(), ExprTree::var("u_0"));
        assert_eq!(parse("dx").unwrap(), ExprTree::var("dx"));
    }

    #[test]
    fn errors_on_garbage() {
        assert!(parse("").is_err());
        assert!(parse("u +").is_err());
        assert!(parse("(u").is_err());
        assert!(parse("u $ v").is_err());
        assert!(parse("d2u/dx").is_err());
    }

    #[test]
    fn display_round_trips() {
        for src in ["du/dt - 0.01*d2u/dx2", "u_t + u*u_x - 0.1*u_xx", "sin(pi*x)^2 - u/(1+x)"] {
            let t = parse(src).unwrap();
            let again = parse(&alloc::format!("{t}")).unwrap();
            assert_eq!(t, again, "{src} -> {t}");
        }
    }
}
