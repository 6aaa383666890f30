//! Arithmetic expressions over named coordinates.
//!
//! Grammar (precedence low to high):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | ident | ident '(' args ')' | '(' expr ')'
//! cond   := expr ('<' | '<=' | '>' | '>=') expr     (first argument of piecewise)
//! ```
//!
//! Functions: `sin cos tan sinh cosh tanh exp ln log sqrt abs atan` and
//! `piecewise(cond, a, b)`. Constants `pi` and `e` are predefined; document
//! parameters are substituted at parse time.

use std::collections::BTreeMap;
use std::fmt;

use crate::jet::Jet;

#[derive(Debug, Clone, PartialEq)]
pub struct ExprError {
    /// 1-based character column inside the expression source.
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ExprError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "column {}: {}", self.column, self.message)
    }
}

impl std::error::Error for ExprError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Tanh,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Atan,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "tanh" => Func::Tanh,
            "exp" => Func::Exp,
            "ln" | "log" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "atan" => Func::Atan,
            _ => return None,
        })
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Sinh => x.sinh(),
            Func::Cosh => x.cosh(),
            Func::Tanh => x.tanh(),
            Func::Exp => x.exp(),
            Func::Ln => x.ln(),
            Func::Sqrt => x.sqrt(),
            Func::Abs => x.abs(),
            Func::Atan => x.atan(),
        }
    }

    fn apply_jet(self, x: &Jet) -> Jet {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Sinh => x.sinh(),
            Func::Cosh => x.cosh(),
            Func::Tanh => x.tanh(),
            Func::Exp => x.exp(),
            Func::Ln => x.ln(),
            Func::Sqrt => x.sqrt(),
            Func::Abs => x.abs(),
            Func::Atan => x.atan(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Lt,
    Le,
    Gt,
    Ge,
}

impl Cmp {
    fn holds(self, a: f64, b: f64) -> bool {
        match self {
            Cmp::Lt => a < b,
            Cmp::Le => a <= b,
            Cmp::Gt => a > b,
            Cmp::Ge => a >= b,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
    Piecewise {
        lhs: Box<Node>,
        cmp: Cmp,
        rhs: Box<Node>,
        then: Box<Node>,
        otherwise: Box<Node>,
    },
}

impl Node {
    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Node::Num(v) => *v,
            Node::Var(i) => x[*i],
            Node::Neg(a) => -a.eval(x),
            Node::Add(a, b) => a.eval(x) + b.eval(x),
            Node::Sub(a, b) => a.eval(x) - b.eval(x),
            Node::Mul(a, b) => a.eval(x) * b.eval(x),
            Node::Div(a, b) => a.eval(x) / b.eval(x),
            Node::Pow(a, b) => {
                let base = a.eval(x);
                match **b {
                    Node::Num(p) if p.fract() == 0.0 && p.abs() <= 16.0 => base.powi(p as i32),
                    _ => base.powf(b.eval(x)),
                }
            }
            Node::Call(f, a) => f.apply(a.eval(x)),
            Node::Piecewise {
                lhs,
                cmp,
                rhs,
                then,
                otherwise,
            } => {
                if cmp.holds(lhs.eval(x), rhs.eval(x)) {
                    then.eval(x)
                } else {
                    otherwise.eval(x)
                }
            }
        }
    }

    fn eval_jet(&self, x: &[Jet]) -> Jet {
        match self {
            Node::Num(v) => Jet::constant(*v),
            Node::Var(i) => x[*i],
            Node::Neg(a) => -a.eval_jet(x),
            Node::Add(a, b) => a.eval_jet(x) + b.eval_jet(x),
            Node::Sub(a, b) => a.eval_jet(x) - b.eval_jet(x),
            Node::Mul(a, b) => a.eval_jet(x) * b.eval_jet(x),
            Node::Div(a, b) => a.eval_jet(x) / b.eval_jet(x),
            Node::Pow(a, b) => {
                let base = a.eval_jet(x);
                match **b {
                    Node::Num(p) => base.powf(p),
                    _ => base.pow(&b.eval_jet(x)),
                }
            }
            Node::Call(f, a) => f.apply_jet(&a.eval_jet(x)),
            Node::Piecewise {
                lhs,
                cmp,
                rhs,
                then,
                otherwise,
            } => {
                let values: Vec<f64> = x.iter().map(|j| j.v).collect();
                if cmp.holds(lhs.eval(&values), rhs.eval(&values)) {
                    then.eval_jet(x)
                } else {
                    otherwise.eval_jet(x)
                }
            }
        }
    }

    fn is_constant(&self) -> bool {
        match self {
            Node::Num(_) => true,
            Node::Var(_) => false,
            Node::Neg(a) | Node::Call(_, a) => a.is_constant(),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
                a.is_constant() && b.is_constant()
            }
            Node::Piecewise {
                lhs,
                rhs,
                then,
                otherwise,
                ..
            } => lhs.is_constant() && rhs.is_constant() && then.is_constant() && otherwise.is_constant(),
        }
    }
}

/// A parsed expression with variables resolved to positional indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    source: String,
}

impl Expr {
    /// Parse `src`, resolving identifiers against `vars` (positional) and
    /// `params` (substituted constants).
    pub fn parse(src: &str, vars: &[String], params: &BTreeMap<String, f64>) -> Result<Expr, ExprError> {
        let tokens = tokenize(src)?;
        let mut parser = Parser {
            tokens,
            pos: 0,
            vars,
            params,
            len: src.chars().count(),
        };
        let root = parser.expr()?;
        if let Some(tok) = parser.peek() {
            return Err(ExprError {
                column: tok.column,
                message: format!("unexpected token `{}`", tok.kind),
            });
        }
        Ok(Expr {
            root,
            source: src.to_string(),
        })
    }

    /// Shorthand for tests and builtins: variables only, no parameters.
    pub fn parse_vars(src: &str, vars: &[&str]) -> Result<Expr, ExprError> {
        let vars: Vec<String> = vars.iter().map(|s| s.to_string()).collect();
        Expr::parse(src, &vars, &BTreeMap::new())
    }

    pub fn constant(v: f64) -> Expr {
        Expr {
            root: Node::Num(v),
            source: format!("{v}"),
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.root.eval(x)
    }

    pub fn eval_jet(&self, x: &[Jet]) -> Jet {
        self.root.eval_jet(x)
    }

    pub fn is_constant(&self) -> bool {
        self.root.is_constant()
    }

    /// Structural equality of the parse trees, ignoring whitespace.
    pub fn same_tree(&self, other: &Expr) -> bool {
        self.root == other.root
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokKind {
    Num(f64),
    Ident(String),
    Op(&'static str),
    LParen,
    RParen,
    Comma,
}

impl fmt::Display for TokKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokKind::Num(v) => write!(f, "{v}"),
            TokKind::Ident(s) => write!(f, "{s}"),
            TokKind::Op(s) => write!(f, "{s}"),
            TokKind::LParen => write!(f, "("),
            TokKind::RParen => write!(f, ")"),
            TokKind::Comma => write!(f, ","),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokKind,
    column: usize,
}

fn tokenize(src: &str) -> Result<Vec<Token>, ExprError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text.parse::<f64>().map_err(|_| ExprError {
                column,
                message: format!("malformed number `{text}`"),
            })?;
            out.push(Token {
                kind: TokKind::Num(v),
                column,
            });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token {
                kind: TokKind::Ident(chars[start..i].iter().collect()),
                column,
            });
            continue;
        }
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let kind = match two.as_str() {
            "<=" => Some(TokKind::Op("<=")),
            ">=" => Some(TokKind::Op(">=")),
            "**" => Some(TokKind::Op("^")),
            _ => None,
        };
        if let Some(kind) = kind {
            out.push(Token { kind, column });
            i += 2;
            continue;
        }
        let kind = match c {
            '+' => TokKind::Op("+"),
            '-' | '−' => TokKind::Op("-"),
            '*' => TokKind::Op("*"),
            '/' => TokKind::Op("/"),
            '^' => TokKind::Op("^"),
            '<' => TokKind::Op("<"),
            '>' => TokKind::Op(">"),
            '(' => TokKind::LParen,
            ')' => TokKind::RParen,
            ',' => TokKind::Comma,
            other => {
                return Err(ExprError {
                    column,
                    message: format!("unexpected character `{other}`"),
                })
            }
        };
        out.push(Token { kind, column });
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    vars: &'a [String],
    params: &'a BTreeMap<String, f64>,
    len: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn end_column(&self) -> usize {
        self.len + 1
    }

    fn err<T>(&self, column: usize, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError {
            column,
            message: message.into(),
        })
    }

    fn eat_op(&mut self, ops: &[&'static str]) -> Option<&'static str> {
        if let Some(Token {
            kind: TokKind::Op(op), ..
        }) = self.peek()
        {
            if let Some(found) = ops.iter().find(|o| *o == op) {
                self.pos += 1;
                return Some(found);
            }
        }
        None
    }

    fn expect(&mut self, kind: TokKind) -> Result<(), ExprError> {
        match self.next() {
            Some(t) if t.kind == kind => Ok(()),
            Some(t) => self.err(t.column, format!("expected `{kind}`, found `{}`", t.kind)),
            None => self.err(self.end_column(), format!("expected `{kind}`, found end of input")),
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        while let Some(op) = self.eat_op(&["+", "-"]) {
            let rhs = self.term()?;
            lhs = match op {
                "+" => Node::Add(Box::new(lhs), Box::new(rhs)),
                _ => Node::Sub(Box::new(lhs), Box::new(rhs)),
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.eat_op(&["*", "/"]) {
            let rhs = self.unary()?;
            lhs = match op {
                "*" => Node::Mul(Box::new(lhs), Box::new(rhs)),
                _ => Node::Div(Box::new(lhs), Box::new(rhs)),
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if self.eat_op(&["-"]).is_some() {
            let inner = self.unary()?;
            return Ok(match inner {
                Node::Num(v) => Node::Num(-v),
                other => Node::Neg(Box::new(other)),
            });
        }
        if self.eat_op(&["+"]).is_some() {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.atom()?;
        if self.eat_op(&["^"]).is_some() {
            let exponent = self.unary()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        let Some(tok) = self.next() else {
            return self.err(self.end_column(), "unexpected end of input");
        };
        match tok.kind {
            TokKind::Num(v) => Ok(Node::Num(v)),
            TokKind::LParen => {
                let inner = self.expr()?;
                self.expect(TokKind::RParen)?;
                Ok(inner)
            }
            TokKind::Ident(name) => {
                if matches!(
                    self.peek(),
                    Some(Token {
                        kind: TokKind::LParen,
                        ..
                    })
                ) {
                    self.pos += 1;
                    return self.call(&name, tok.column);
                }
                if let Some(i) = self.vars.iter().position(|v| *v == name) {
                    return Ok(Node::Var(i));
                }
                if let Some(v) = self.params.get(&name) {
                    return Ok(Node::Num(*v));
                }
                match name.as_str() {
                    "pi" => Ok(Node::Num(std::f64::consts::PI)),
                    "e" => Ok(Node::Num(std::f64::consts::E)),
                    _ => self.err(tok.column, format!("unknown identifier `{name}`")),
                }
            }
            other => self.err(tok.column, format!("unexpected token `{other}`")),
        }
    }

    fn call(&mut self, name: &str, column: usize) -> Result<Node, ExprError> {
        if name == "piecewise" {
            let lhs = self.expr()?;
            let cmp = match self.next() {
                Some(Token {
                    kind: TokKind::Op(op), ..
                }) if matches!(op, "<" | "<=" | ">" | ">=") => match op {
                    "<" => Cmp::Lt,
                    "<=" => Cmp::Le,
                    ">" => Cmp::Gt,
                    _ => Cmp::Ge,
                },
                Some(t) => return self.err(t.column, "piecewise condition needs a comparison"),
                None => return self.err(self.end_column(), "unexpected end of input"),
            };
            let rhs = self.expr()?;
            self.expect(TokKind::Comma)?;
            let then = self.expr()?;
            self.expect(TokKind::Comma)?;
            let otherwise = self.expr()?;
            self.expect(TokKind::RParen)?;
            return Ok(Node::Piecewise {
                lhs: Box::new(lhs),
                cmp,
                rhs: Box::new(rhs),
                then: Box::new(then),
                otherwise: Box::new(otherwise),
            });
        }
        let Some(func) = Func::from_name(name) else {
            return self.err(column, format!("unknown function `{name}`"));
        };
        let arg = self.expr()?;
        self.expect(TokKind::RParen)?;
        Ok(Node::Call(func, Box::new(arg)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(src: &str, vars: &[&str], x: &[f64]) -> f64 {
        Expr::parse_vars(src, vars).unwrap().eval(x)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval("1 + 2 * 3", &[], &[]), 7.0);
        assert_eq!(eval("-2^2", &[], &[]), -4.0);
        assert_eq!(eval("2^-1", &[], &[]), 0.5);
        assert_eq!(eval("8 / 4 / 2", &[], &[]), 1.0);
        assert_eq!(eval("2^3^2", &[], &[]), 512.0);
        assert!((eval("-1-x^2*y^2*z^2", &["x", "y", "z"], &[1.0, 1.0, 1.0]) + 2.0).abs() < 1e-15);
    }

    #[test]
    fn functions_and_piecewise() {
        let v = eval("piecewise(t < 0.5, cos(t), sin(t))", &["t"], &[0.2]);
        assert_eq!(v, 0.2f64.cos());
        let v = eval("piecewise(t < 0.5, cos(t), sin(t))", &["t"], &[0.7]);
        assert_eq!(v, 0.7f64.sin());
        assert!((eval("sqrt(abs(-4)) + exp(0) + pi", &[], &[]) - (3.0 + std::f64::consts::PI)).abs() < 1e-15);
    }

    #[test]
    fn params_are_substituted() {
        let mut params = BTreeMap::new();
        params.insert("eps".to_string(), 1.0);
        let e = Expr::parse("-1 - eps*x", &["x".to_string()], &params).unwrap();
        assert_eq!(e.eval(&[2.0]), -3.0);
    }

    #[test]
    fn errors_carry_columns() {
        let err = Expr::parse_vars("1 + * 2", &[]).unwrap_err();
        assert_eq!(err.column, 5);
        let err = Expr::parse_vars("sin(x", &["x"]).unwrap_err();
        assert_eq!(err.column, 6);
        let err = Expr::parse_vars("foo + 1", &["x"]).unwrap_err();
        assert_eq!(err.column, 1);
        let err = Expr::parse_vars("x $ 1", &["x"]).unwrap_err();
        assert_eq!(err.column, 3);
    }

    #[test]
    fn jet_matches_closed_form_derivatives() {
        let e = Expr::parse_vars("sin(th)^2", &["th", "ph"]).unwrap();
        let j = e.eval_jet(&Jet::vars(&[0.3, 1.0]));
        assert!((j.d[0] - 2.0 * 0.3f64.sin() * 0.3f64.cos()).abs() < 1e-15);
        assert!((j.h[0][0] - 2.0 * (0.6f64).cos()).abs() < 1e-14);
        assert_eq!(j.d[1], 0.0);
    }
}
