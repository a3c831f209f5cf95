//! A small real-valued expression language.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?          // right associative
//! atom    := number | ident | ident '(' args ')' | '(' sum ')'
//! ```
//!
//! `-2^2` therefore evaluates to `-4`, and `2^3^2` to `512`.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Abs,
    Sqrt,
    Pow,
    Sin,
    Cos,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            "pow" => Func::Pow,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            _ => return None,
        })
    }

    fn arity(self) -> usize {
        match self {
            Func::Pow => 2,
            _ => 1,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Pow => "pow",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }
}

/// Expression tree. Variables are positional; their names live in [`Expr`].
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(usize),
    Unary(UnaryOp, Box<Node>),
    Binary(BinaryOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// A parsed expression together with the names of its variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    vars: Vec<String>,
}

/// Parse an expression in the single variable `u`.
pub fn parse_expr(text: &str) -> Result<Expr> {
    Expr::parse(text, &["u"])
}

/// Evaluate a single-variable expression at `u`.
pub fn eval_expr(e: &Expr, u: f64) -> Result<f64> {
    e.eval(&[u])
}

impl Expr {
    pub fn parse(text: &str, vars: &[&str]) -> Result<Expr> {
        if text.trim().is_empty() {
            return Err(Error::Syntax {
                position: 0,
                message: "empty expression".into(),
            });
        }
        let tokens = lex(text)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            end: text.len(),
            vars,
        };
        let root = p.sum()?;
        if let Some(tok) = p.peek() {
            return Err(Error::Syntax {
                position: tok.pos,
                message: format!("unexpected {}", tok.kind),
            });
        }
        Ok(Expr {
            root,
            vars: vars.iter().map(|s| s.to_string()).collect(),
        })
    }

    pub fn from_node(root: Node, vars: &[&str]) -> Expr {
        Expr {
            root,
            vars: vars.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn constant(c: f64) -> Expr {
        Expr::from_node(Node::Const(c), &["u"])
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        eval_node(&self.root, point, &self.vars)
    }

    /// True when the tree contains no variables.
    pub fn is_constant(&self) -> bool {
        fn walk(n: &Node) -> bool {
            match n {
                Node::Const(_) => true,
                Node::Var(_) => false,
                Node::Unary(_, a) => walk(a),
                Node::Binary(_, a, b) => walk(a) && walk(b),
                Node::Call(_, args) => args.iter().all(walk),
            }
        }
        walk(&self.root)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(f, &self.root, &self.vars)
    }
}

fn write_node(f: &mut fmt::Formatter<'_>, n: &Node, vars: &[String]) -> fmt::Result {
    match n {
        Node::Const(c) => {
            if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) {
                write!(f, "(-{})", -c)
            } else {
                write!(f, "{c:?}")
            }
        }
        Node::Var(i) => f.write_str(&vars[*i]),
        Node::Unary(UnaryOp::Neg, a) => {
            f.write_str("(-")?;
            write_node(f, a, vars)?;
            f.write_str(")")
        }
        Node::Binary(op, a, b) => {
            let sym = match op {
                BinaryOp::Add => "+",
                BinaryOp::Sub => "-",
                BinaryOp::Mul => "*",
                BinaryOp::Div => "/",
                BinaryOp::Pow => "^",
            };
            f.write_str("(")?;
            write_node(f, a, vars)?;
            f.write_str(sym)?;
            write_node(f, b, vars)?;
            f.write_str(")")
        }
        Node::Call(func, args) => {
            write!(f, "{}(", func.name())?;
            for (k, a) in args.iter().enumerate() {
                if k > 0 {
                    f.write_str(",")?;
                }
                write_node(f, a, vars)?;
            }
            f.write_str(")")
        }
    }
}

fn domain(n: &Node, vars: &[String], reason: &str) -> Error {
    Error::Domain {
        node: Expr {
            root: n.clone(),
            vars: vars.to_vec(),
        }
        .to_string(),
        reason: reason.to_string(),
    }
}

fn eval_node(n: &Node, point: &[f64], vars: &[String]) -> Result<f64> {
    let v = match n {
        Node::Const(c) => *c,
        Node::Var(i) => *point
            .get(*i)
            .ok_or_else(|| domain(n, vars, "variable not bound"))?,
        Node::Unary(UnaryOp::Neg, a) => -eval_node(a, point, vars)?,
        Node::Binary(op, a, b) => {
            let x = eval_node(a, point, vars)?;
            let y = eval_node(b, point, vars)?;
            match op {
                BinaryOp::Add => x + y,
                BinaryOp::Sub => x - y,
                BinaryOp::Mul => x * y,
                BinaryOp::Div => {
                    if y == 0.0 {
                        return Err(domain(n, vars, "division by zero"));
                    }
                    x / y
                }
                BinaryOp::Pow => power(x, y).map_err(|r| domain(n, vars, r))?,
            }
        }
        Node::Call(func, args) => {
            let x = eval_node(&args[0], point, vars)?;
            match func {
                Func::Exp => x.exp(),
                Func::Log => {
                    if x <= 0.0 {
                        return Err(domain(n, vars, "logarithm of a non-positive number"));
                    }
                    x.ln()
                }
                Func::Abs => x.abs(),
                Func::Sqrt => {
                    if x < 0.0 {
                        return Err(domain(n, vars, "square root of a negative number"));
                    }
                    x.sqrt()
                }
                Func::Pow => {
                    let y = eval_node(&args[1], point, vars)?;
                    power(x, y).map_err(|r| domain(n, vars, r))?
                }
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
            }
        }
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(domain(n, vars, "non-finite result"))
    }
}

fn power(x: f64, y: f64) -> std::result::Result<f64, &'static str> {
    if x == 0.0 && y < 0.0 {
        return Err("zero raised to a negative power");
    }
    if x < 0.0 && y.fract() != 0.0 {
        return Err("negative base with non-integer exponent");
    }
    if y.fract() == 0.0 && y.abs() <= i32::MAX as f64 {
        return Ok(x.powi(y as i32));
    }
    Ok(x.powf(y))
}

// ---------------------------------------------------------------------------
// lexer

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Num(v) => write!(f, "number {v}"),
            TokenKind::Ident(s) => write!(f, "identifier `{s}`"),
            TokenKind::Op(c) => write!(f, "`{c}`"),
            TokenKind::LParen => f.write_str("`(`"),
            TokenKind::RParen => f.write_str("`)`"),
            TokenKind::Comma => f.write_str("`,`"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    pos: usize,
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let kind = match c {
            '+' | '-' | '*' | '/' | '^' => {
                i += 1;
                TokenKind::Op(c)
            }
            '(' => {
                i += 1;
                TokenKind::LParen
            }
            ')' => {
                i += 1;
                TokenKind::RParen
            }
            ',' => {
                i += 1;
                TokenKind::Comma
            }
            '0'..='9' | '.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let s = &text[start..i];
                let v: f64 = s.parse().map_err(|_| Error::Syntax {
                    position: start,
                    message: format!("malformed number `{s}`"),
                })?;
                TokenKind::Num(v)
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                TokenKind::Ident(text[start..i].to_string())
            }
            other => {
                return Err(Error::Syntax {
                    position: start,
                    message: format!("unexpected character `{other}`"),
                })
            }
        };
        out.push(Token { kind, pos: start });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// parser

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    end: usize,
    vars: &'a [&'a str],
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn end_pos(&self) -> usize {
        self.end
    }

    fn eat_op(&mut self, ops: &[char]) -> Option<char> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::Op(c),
                ..
            }) if ops.contains(c) => {
                let c = *c;
                self.pos += 1;
                Some(c)
            }
            _ => None,
        }
    }

    fn expect(&mut self, kind: TokenKind) -> Result<()> {
        match self.peek() {
            Some(t) if t.kind == kind => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(Error::Syntax {
                position: t.pos,
                message: format!("expected {kind}, found {}", t.kind),
            }),
            None => Err(Error::Syntax {
                position: self.end_pos(),
                message: format!("expected {kind}, found end of input"),
            }),
        }
    }

    fn sum(&mut self) -> Result<Node> {
        let mut lhs = self.product()?;
        while let Some(op) = self.eat_op(&['+', '-']) {
            let rhs = self.product()?;
            let op = if op == '+' {
                BinaryOp::Add
            } else {
                BinaryOp::Sub
            };
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.eat_op(&['*', '/']) {
            let rhs = self.unary()?;
            let op = if op == '*' {
                BinaryOp::Mul
            } else {
                BinaryOp::Div
            };
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat_op(&['-']).is_some() {
            let inner = self.unary()?;
            return Ok(Node::Unary(UnaryOp::Neg, Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat_op(&['^']).is_some() {
            let exponent = self.unary()?;
            return Ok(Node::Binary(
                BinaryOp::Pow,
                Box::new(base),
                Box::new(exponent),
            ));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let Some(tok) = self.peek().cloned() else {
            return Err(Error::Syntax {
                position: self.end_pos(),
                message: "unexpected end of input".into(),
            });
        };
        self.pos += 1;
        match tok.kind {
            TokenKind::Num(v) => Ok(Node::Const(v)),
            TokenKind::LParen => {
                let inner = self.sum()?;
                self.expect(TokenKind::RParen)?;
                Ok(inner)
            }
            TokenKind::Ident(name) => {
                let is_call = matches!(self.peek(), Some(t) if t.kind == TokenKind::LParen);
                if is_call {
                    let func = Func::lookup(&name).ok_or(Error::UnknownIdentifier {
                        name: name.clone(),
                        position: tok.pos,
                    })?;
                    self.pos += 1;
                    let mut args = vec![self.sum()?];
                    while matches!(self.peek(), Some(t) if t.kind == TokenKind::Comma) {
                        self.pos += 1;
                        args.push(self.sum()?);
                    }
                    self.expect(TokenKind::RParen)?;
                    if args.len() != func.arity() {
                        return Err(Error::Arity {
                            name,
                            expected: func.arity(),
                            found: args.len(),
                        });
                    }
                    Ok(Node::Call(func, args))
                } else if let Some(i) = self.vars.iter().position(|v| *v == name) {
                    Ok(Node::Var(i))
                } else {
                    Err(Error::UnknownIdentifier {
                        name,
                        position: tok.pos,
                    })
                }
            }
            other => Err(Error::Syntax {
                position: tok.pos,
                message: format!("unexpected {other}"),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(text: &str, u: f64) -> f64 {
        eval_expr(&parse_expr(text).unwrap(), u).unwrap()
    }

    #[test]
    fn reciprocal_shape() {
        let e = parse_expr("1/u").unwrap();
        assert_eq!(
            *e.root(),
            Node::Binary(
                BinaryOp::Div,
                Box::new(Node::Const(1.0)),
                Box::new(Node::Var(0))
            )
        );
    }

    #[test]
    fn cesaro_half_kernel() {
        // (0.75)^(-0.5) / 0.25 by hand: 1/sqrt(0.75) = 1.1547005383792517
        let expected = 1.0 / 0.75f64.sqrt() / 0.25;
        let got = ev("(1-u)^(0.5-1)/u", 0.25);
        assert!((got - expected).abs() < 1e-14);
        assert!((got - 4.6188).abs() < 1e-4);
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("2^3^2", 0.0), 512.0);
        assert_eq!(ev("-2^2", 0.0), -4.0);
        assert_eq!(ev("2^-1", 0.0), 0.5);
        assert_eq!(ev("8/4/2", 0.0), 1.0);
        assert_eq!(ev("8-4-2", 0.0), 2.0);
        assert_eq!(ev("1+2*3", 0.0), 7.0);
        assert_eq!(ev("u^2", 3.0), 9.0);
        assert_eq!(ev("sqrt(abs(u))", -4.0), 2.0);
        assert_eq!(ev("pow(u, 3)", 2.0), 8.0);
        assert_eq!(ev("(-0.25)^u", 3.0), -0.015625);
        assert_eq!(ev("1.5e1 + 2E-1", 0.0), 15.2);
    }

    #[test]
    fn domain_errors() {
        let e = parse_expr("log(u)").unwrap();
        assert!(matches!(eval_expr(&e, -1.0), Err(Error::Domain { .. })));
        assert!(matches!(eval_expr(&e, 0.0), Err(Error::Domain { .. })));
        let e = parse_expr("0^(-1)").unwrap();
        assert!(matches!(eval_expr(&e, 0.0), Err(Error::Domain { .. })));
        let e = parse_expr("1/(u-1)").unwrap();
        match eval_expr(&e, 1.0) {
            Err(Error::Domain { node, .. }) => assert_eq!(node, "(1.0/(u-1.0))"),
            other => panic!("unexpected {other:?}"),
        }
        let e = parse_expr("(-2)^0.5").unwrap();
        assert!(matches!(eval_expr(&e, 0.0), Err(Error::Domain { .. })));
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(parse_expr(""), Err(Error::Syntax { .. })));
        assert!(matches!(
            parse_expr("1 + "),
            Err(Error::Syntax { position: 4, .. })
        ));
        assert!(matches!(
            parse_expr("foo(u)"),
            Err(Error::UnknownIdentifier { .. })
        ));
        assert!(matches!(
            parse_expr("v + 1"),
            Err(Error::UnknownIdentifier { position: 0, .. })
        ));
        assert!(matches!(parse_expr("pow(u)"), Err(Error::Arity { .. })));
        assert!(matches!(parse_expr("exp(u, 2)"), Err(Error::Arity { .. })));
        assert!(matches!(parse_expr("(u"), Err(Error::Syntax { .. })));
        assert!(matches!(parse_expr("u u"), Err(Error::Syntax { .. })));
        assert!(matches!(parse_expr("u # 2"), Err(Error::Syntax { .. })));
    }

    #[test]
    fn multivariate() {
        let e = Expr::parse("x_1 * x_2 + 1", &["x_1", "x_2"]).unwrap();
        assert_eq!(e.eval(&[2.0, 3.0]).unwrap(), 7.0);
    }

    fn arb_expr() -> impl Strategy<Value = String> {
        let leaf = prop_oneof![
            (0.1f64..10.0).prop_map(|c| format!("{c}")),
            Just("u".to_string()),
        ];
        leaf.prop_recursive(4, 32, 3, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a}+{b}")),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a}-{b}")),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a}*{b}")),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})/(1+abs({b}))")),
                inner.clone().prop_map(|a| format!("-{a}")),
                inner.clone().prop_map(|a| format!("sin({a})")),
                inner.clone().prop_map(|a| format!("sqrt(abs({a}))")),
                inner.clone().prop_map(|a| format!("abs({a})^1.5")),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(text in arb_expr(), seed in 0u64..1000) {
            let e = parse_expr(&text).unwrap();
            let reparsed = parse_expr(&e.to_string()).unwrap();
            for k in 0..100 {
                let u = -3.0 + 6.0 * (((seed * 131 + k * 7919) % 1000) as f64 / 1000.0);
                match (eval_expr(&e, u), eval_expr(&reparsed, u)) {
                    (Ok(a), Ok(b)) => {
                        let scale = a.abs().max(1e-300);
                        prop_assert!((a - b).abs() / scale <= 1e-14 || a == b);
                    }
                    (Err(_), Err(_)) => {}
                    (a, b) => prop_assert!(false, "mismatch {a:?} vs {b:?}"),
                }
            }
        }
    }
}
