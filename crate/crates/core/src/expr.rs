//! A small arithmetic expression language for map bounds, objectives and
//! bifunctions.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' INTEGER)?
//! atom   := NUMBER | VAR | '(' expr ')'
//!         | abs(expr) | min(expr, ...) | max(expr, ...)
//!         | piecewise(cond, expr, expr)
//! cond   := conj ('||' conj)*
//! conj   := cmp ('&&' cmp)*
//! cmp    := expr ('<=' | '<' | '>=' | '>') expr
//! ```
//!
//! Variables are `x_1..x_n` and, for bifunctions, `y_1..y_n`. Divisors must be
//! nonzero constants, which keeps every expression total. Literals are kept
//! as exact rationals so the same tree evaluates either in floating point or
//! exactly.

use std::cell::Cell;
use std::cmp::Ordering;
use std::fmt;

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::geometry::{parse_decimal, rational_to_f64, to_small, Rational, SmallRational};

const MAX_EXPONENT: u32 = 64;

/// Which variables an expression may reference.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VarScope {
    pub dim: usize,
    pub allow_y: bool,
}

impl VarScope {
    pub fn x(dim: usize) -> Self {
        VarScope { dim, allow_y: false }
    }

    pub fn xy(dim: usize) -> Self {
        VarScope { dim, allow_y: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Var {
    X(usize),
    Y(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum CmpOp {
    Le,
    Lt,
    Ge,
    Gt,
}

#[derive(Clone, Debug, PartialEq)]
struct Literal {
    exact: Rational,
    float: f64,
    small: Option<SmallRational>,
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Const(Literal),
    Var(Var),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Rational, f64),
    Pow(Box<Node>, u32),
    Abs(Box<Node>),
    Min(Vec<Node>),
    Max(Vec<Node>),
    Piecewise(Box<Cond>, Box<Node>, Box<Node>),
}

#[derive(Clone, Debug, PartialEq)]
#[allow(clippy::large_enum_variant)]
enum Cond {
    Cmp(CmpOp, Node, Node),
    And(Box<Cond>, Box<Cond>),
    Or(Box<Cond>, Box<Cond>),
}

/// Arithmetic the evaluator needs; implemented for `f64` and exact rationals.
trait Value: Clone + PartialOrd {
    fn lit(l: &Literal) -> Self;
    fn add(self, o: Self) -> Self;
    fn sub(self, o: Self) -> Self;
    fn mul(self, o: Self) -> Self;
    fn neg(self) -> Self;
    fn div_const(self, q: &Rational, f: f64) -> Self;
    fn powi(self, e: u32) -> Self;
    fn abs(self) -> Self;
}

impl Value for f64 {
    fn lit(l: &Literal) -> Self {
        l.float
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn mul(self, o: Self) -> Self {
        self * o
    }
    fn neg(self) -> Self {
        -self
    }
    fn div_const(self, _: &Rational, f: f64) -> Self {
        self / f
    }
    fn powi(self, e: u32) -> Self {
        f64::powi(self, e as i32)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
}

impl Value for Rational {
    fn lit(l: &Literal) -> Self {
        l.exact.clone()
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn mul(self, o: Self) -> Self {
        self * o
    }
    fn neg(self) -> Self {
        -self
    }
    fn div_const(self, q: &Rational, _: f64) -> Self {
        self / q
    }
    fn powi(self, e: u32) -> Self {
        num_traits::pow(self, e as usize)
    }
    fn abs(self) -> Self {
        Signed::abs(&self)
    }
}

/// Checked `i128` rationals. An overflow anywhere, including inside a
/// comparison, poisons the evaluation and the caller redoes it with big
/// rationals.
#[derive(Clone)]
struct Small(Option<Ratio<i128>>);

thread_local! {
    static POISONED: Cell<bool> = const { Cell::new(false) };
}

fn poisoned() -> Small {
    POISONED.with(|p| p.set(true));
    Small(None)
}

impl Small {
    fn from_big(q: &Rational) -> Small {
        match (q.numer().to_i128(), q.denom().to_i128()) {
            (Some(n), Some(d)) => Small(Some(Ratio::new_raw(n, d))),
            _ => poisoned(),
        }
    }

    fn lift(self, o: Small, op: impl FnOnce(&Ratio<i128>, &Ratio<i128>) -> Option<Ratio<i128>>) -> Small {
        match (self.0, o.0) {
            (Some(a), Some(b)) => op(&a, &b).map_or_else(poisoned, |r| Small(Some(r))),
            _ => Small(None),
        }
    }

    fn to_big(&self) -> Rational {
        let r = self.0.as_ref().expect("checked before conversion");
        Rational::new_raw((*r.numer()).into(), (*r.denom()).into())
    }
}

impl PartialEq for Small {
    fn eq(&self, o: &Self) -> bool {
        self.partial_cmp(o) == Some(Ordering::Equal)
    }
}

impl PartialOrd for Small {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        match (&self.0, &o.0) {
            (Some(a), Some(b)) => Some(a.cmp(b)),
            _ => {
                poisoned();
                None
            }
        }
    }
}

impl Value for Small {
    fn lit(l: &Literal) -> Self {
        match l.small {
            Some(v) => Small(Some(v)),
            None => poisoned(),
        }
    }
    fn add(self, o: Self) -> Self {
        self.lift(o, |a, b| a.checked_add(b))
    }
    fn sub(self, o: Self) -> Self {
        self.lift(o, |a, b| a.checked_sub(b))
    }
    fn mul(self, o: Self) -> Self {
        self.lift(o, |a, b| a.checked_mul(b))
    }
    fn neg(self) -> Self {
        match self.0 {
            Some(r) => r
                .numer()
                .checked_neg()
                .map_or_else(poisoned, |n| Small(Some(Ratio::new_raw(n, *r.denom())))),
            None => self,
        }
    }
    fn div_const(self, q: &Rational, _: f64) -> Self {
        self.lift(Small::from_big(q), |a, b| a.checked_div(b))
    }
    fn powi(self, e: u32) -> Self {
        let mut acc = Small::from_big(&Rational::from_integer(1.into()));
        for _ in 0..e {
            acc = acc.mul(self.clone());
        }
        acc
    }
    fn abs(self) -> Self {
        match &self.0 {
            Some(r) if *r.numer() < 0 => self.neg(),
            _ => self,
        }
    }
}

/// Runs `f` in checked `i128` arithmetic; `None` when anything overflowed.
fn try_small<T>(x: &[Rational], y: &[Rational], f: impl FnOnce(&[Small], &[Small]) -> T) -> Option<T> {
    POISONED.with(|p| p.set(false));
    let xs: Vec<Small> = x.iter().map(Small::from_big).collect();
    let ys: Vec<Small> = y.iter().map(Small::from_big).collect();
    let out = f(&xs, &ys);
    (!POISONED.with(|p| p.get())).then_some(out)
}

fn run_small<T>(x: &[SmallRational], f: impl FnOnce(&[Small]) -> T) -> Option<T> {
    POISONED.with(|p| p.set(false));
    let xs: Vec<Small> = x.iter().map(|v| Small(Some(*v))).collect();
    let out = f(&xs);
    (!POISONED.with(|p| p.get())).then_some(out)
}

impl Node {
    fn eval<V: Value>(&self, x: &[V], y: &[V]) -> V {
        match self {
            Node::Const(l) => V::lit(l),
            Node::Var(Var::X(i)) => x[*i].clone(),
            Node::Var(Var::Y(i)) => y[*i].clone(),
            Node::Neg(a) => a.eval(x, y).neg(),
            Node::Add(a, b) => a.eval(x, y).add(b.eval(x, y)),
            Node::Sub(a, b) => a.eval(x, y).sub(b.eval(x, y)),
            Node::Mul(a, b) => a.eval(x, y).mul(b.eval(x, y)),
            Node::Div(a, q, f) => a.eval(x, y).div_const(q, *f),
            Node::Pow(a, e) => a.eval(x, y).powi(*e),
            Node::Abs(a) => a.eval(x, y).abs(),
            Node::Min(args) => args
                .iter()
                .map(|a| a.eval(x, y))
                .reduce(|m, v| if v < m { v } else { m })
                .expect("min has arguments"),
            Node::Max(args) => args
                .iter()
                .map(|a| a.eval(x, y))
                .reduce(|m, v| if v > m { v } else { m })
                .expect("max has arguments"),
            Node::Piecewise(c, then, other) => {
                if c.eval(x, y) {
                    then.eval(x, y)
                } else {
                    other.eval(x, y)
                }
            }
        }
    }

    fn uses(&self, pred: &dyn Fn(Var) -> bool) -> bool {
        match self {
            Node::Const(..) => false,
            Node::Var(v) => pred(*v),
            Node::Neg(a) | Node::Div(a, ..) | Node::Pow(a, _) | Node::Abs(a) => a.uses(pred),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) => a.uses(pred) || b.uses(pred),
            Node::Min(args) | Node::Max(args) => args.iter().any(|a| a.uses(pred)),
            Node::Piecewise(c, a, b) => c.uses(pred) || a.uses(pred) || b.uses(pred),
        }
    }
}

impl Cond {
    fn eval<V: Value>(&self, x: &[V], y: &[V]) -> bool {
        match self {
            Cond::Cmp(op, a, b) => {
                let (a, b) = (a.eval(x, y), b.eval(x, y));
                match op {
                    CmpOp::Le => a <= b,
                    CmpOp::Lt => a < b,
                    CmpOp::Ge => a >= b,
                    CmpOp::Gt => a > b,
                }
            }
            Cond::And(a, b) => a.eval(x, y) && b.eval(x, y),
            Cond::Or(a, b) => a.eval(x, y) || b.eval(x, y),
        }
    }

    fn uses(&self, pred: &dyn Fn(Var) -> bool) -> bool {
        match self {
            Cond::Cmp(_, a, b) => a.uses(pred) || b.uses(pred),
            Cond::And(a, b) | Cond::Or(a, b) => a.uses(pred) || b.uses(pred),
        }
    }
}

/// A parsed arithmetic expression together with its source text.
#[derive(Clone, Debug)]
pub struct Expression {
    source: String,
    scope: VarScope,
    root: Node,
}

impl PartialEq for Expression {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source && self.scope == other.scope
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Expression {
    pub fn parse(text: &str, scope: VarScope) -> Result<Self> {
        let mut parser = Parser::new(text, scope)?;
        let root = parser.expr()?;
        parser.expect_end()?;
        Ok(Expression {
            source: text.to_string(),
            scope,
            root,
        })
    }

    /// A constant expression rendering `value` exactly as a decimal or fraction.
    pub fn constant(value: &Rational, scope: VarScope) -> Self {
        let text = format_rational(value);
        Expression::parse(&text, scope).expect("rendered constants parse")
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn scope(&self) -> VarScope {
        self.scope
    }

    pub fn is_constant(&self) -> bool {
        !self.root.uses(&|_| true)
    }

    pub fn uses_y(&self) -> bool {
        self.root.uses(&|v| matches!(v, Var::Y(_)))
    }

    pub fn eval_f64(&self, x: &[f64], y: &[f64]) -> f64 {
        self.root.eval(x, y)
    }

    pub fn eval_exact(&self, x: &[Rational], y: &[Rational]) -> Rational {
        match try_small(x, y, |xs, ys| self.root.eval(xs, ys)) {
            Some(v) => v.to_big(),
            None => self.root.eval(x, y),
        }
    }

    /// Exact value at `x` in `i128` arithmetic, `None` on overflow. The
    /// expression must not use `y`.
    pub(crate) fn eval_small(&self, x: &[SmallRational]) -> Option<SmallRational> {
        run_small(x, |xs| self.root.eval(xs, &[])).and_then(|v| v.0)
    }
}

/// A branch condition, e.g. `x_1 <= 1`.
#[derive(Clone, Debug)]
pub struct Condition {
    source: String,
    scope: VarScope,
    root: Cond,
}

impl PartialEq for Condition {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source && self.scope == other.scope
    }
}

impl Condition {
    pub fn parse(text: &str, scope: VarScope) -> Result<Self> {
        let mut parser = Parser::new(text, scope)?;
        let root = parser.cond()?;
        parser.expect_end()?;
        Ok(Condition {
            source: text.to_string(),
            scope,
            root,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval_f64(&self, x: &[f64], y: &[f64]) -> bool {
        self.root.eval(x, y)
    }

    pub fn eval_exact(&self, x: &[Rational], y: &[Rational]) -> bool {
        try_small(x, y, |xs, ys| self.root.eval(xs, ys)).unwrap_or_else(|| self.root.eval(x, y))
    }

    pub(crate) fn eval_small(&self, x: &[SmallRational]) -> Option<bool> {
        run_small(x, |xs| self.root.eval(xs, &[]))
    }
}

/// Renders a rational as a finite decimal when possible, else as `(p/q)`.
pub fn format_rational(q: &Rational) -> String {
    let mut denom = q.denom().clone();
    let two = num_bigint::BigInt::from(2);
    let five = num_bigint::BigInt::from(5);
    let (mut twos, mut fives) = (0usize, 0usize);
    while (&denom % &two).is_zero() {
        denom /= &two;
        twos += 1;
    }
    while (&denom % &five).is_zero() {
        denom /= &five;
        fives += 1;
    }
    if denom != num_bigint::BigInt::from(1) {
        return format!("({}/{})", q.numer(), q.denom());
    }
    let digits = twos.max(fives);
    let scaled = q * Rational::from_integer(num_traits::pow(num_bigint::BigInt::from(10), digits));
    let n = scaled.to_integer();
    let negative = n.is_negative();
    let mut s = n.abs().to_string();
    if digits > 0 {
        if s.len() <= digits {
            s = format!("{}{}", "0".repeat(digits + 1 - s.len()), s);
        }
        s.insert(s.len() - digits, '.');
    }
    if negative {
        s.insert(0, '-');
    }
    s
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(String),
    Ident(String),
    Sym(&'static str),
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(s) | Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Sym(s) => write!(f, "`{s}`"),
            Tok::End => f.write_str("end of input"),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>> {
    const SYMS: [&str; 13] = ["<=", ">=", "&&", "||", "<", ">", "+", "-", "*", "/", "^", "(", ")"];
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let pos = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
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
            out.push((Tok::Num(chars[start..i].iter().collect()), pos));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), pos));
        } else if c == ',' {
            out.push((Tok::Sym(","), pos));
            i += 1;
        } else {
            let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
            match SYMS.iter().find(|s| rest.starts_with(*s)) {
                Some(s) => {
                    out.push((Tok::Sym(s), pos));
                    i += s.len();
                }
                None => return Err(Error::parse(pos, format!("unexpected character `{c}`"))),
            }
        }
    }
    out.push((Tok::End, chars.len() + 1));
    Ok(out)
}

struct Parser {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
    scope: VarScope,
}

impl Parser {
    fn new(text: &str, scope: VarScope) -> Result<Self> {
        Ok(Parser {
            tokens: tokenize(text)?,
            pos: 0,
            scope,
        })
    }

    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].0
    }

    fn position(&self) -> usize {
        self.tokens[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.pos].0.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, sym: &str) -> bool {
        if matches!(self.peek(), Tok::Sym(s) if *s == sym) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, sym: &str) -> Result<()> {
        if self.eat(sym) {
            Ok(())
        } else {
            Err(Error::parse(
                self.position(),
                format!("expected `{sym}`, found {}", self.peek()),
            ))
        }
    }

    fn expect_end(&self) -> Result<()> {
        match self.peek() {
            Tok::End => Ok(()),
            t => Err(Error::parse(
                self.position(),
                format!("expected end of input, found {t}"),
            )),
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            if self.eat("+") {
                lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat("-") {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat("*") {
                lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if matches!(self.peek(), Tok::Sym("/")) {
                self.bump();
                let at = self.position();
                let divisor = self.unary()?;
                if divisor.uses(&|_| true) {
                    return Err(Error::parse(at, "divisor must be a constant"));
                }
                let q: Rational = divisor.eval::<Rational>(&[], &[]);
                if q.is_zero() {
                    return Err(Error::parse(at, "division by zero"));
                }
                let f = rational_to_f64(&q);
                lhs = Node::Div(Box::new(lhs), q, f);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat("-") {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if !self.eat("^") {
            return Ok(base);
        }
        let at = self.position();
        match self.bump() {
            Tok::Num(s) => match s.parse::<u32>() {
                Ok(e) if e <= MAX_EXPONENT => Ok(Node::Pow(Box::new(base), e)),
                _ => Err(Error::parse(
                    at,
                    format!("exponent must be an integer in 0..={MAX_EXPONENT}, found `{s}`"),
                )),
            },
            t => Err(Error::parse(at, format!("expected integer exponent, found {t}"))),
        }
    }

    fn atom(&mut self) -> Result<Node> {
        let at = self.position();
        match self.bump() {
            Tok::Num(s) => {
                let q = parse_decimal(&s).ok_or_else(|| Error::parse(at, format!("malformed number `{s}`")))?;
                let f: f64 = s
                    .parse()
                    .map_err(|_| Error::parse(at, format!("malformed number `{s}`")))?;
                Ok(Node::Const(Literal {
                    small: to_small(&q),
                    exact: q,
                    float: f,
                }))
            }
            Tok::Sym("(") => {
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            Tok::Ident(name) => self.ident(&name, at),
            t => Err(Error::parse(at, format!("expected expression, found {t}"))),
        }
    }

    fn ident(&mut self, name: &str, at: usize) -> Result<Node> {
        match name {
            "abs" => {
                self.expect("(")?;
                let a = self.expr()?;
                self.expect(")")?;
                Ok(Node::Abs(Box::new(a)))
            }
            "min" | "max" => {
                self.expect("(")?;
                let mut args = vec![self.expr()?];
                while self.eat(",") {
                    args.push(self.expr()?);
                }
                self.expect(")")?;
                Ok(if name == "min" {
                    Node::Min(args)
                } else {
                    Node::Max(args)
                })
            }
            "piecewise" => {
                self.expect("(")?;
                let c = self.cond()?;
                self.expect(",")?;
                let a = self.expr()?;
                self.expect(",")?;
                let b = self.expr()?;
                self.expect(")")?;
                Ok(Node::Piecewise(Box::new(c), Box::new(a), Box::new(b)))
            }
            _ => self
                .variable(name)
                .map(Node::Var)
                .ok_or_else(|| Error::parse(at, format!("unknown identifier `{name}`"))),
        }
    }

    fn variable(&self, name: &str) -> Option<Var> {
        let (kind, index) = name.split_once('_')?;
        let i: usize = index.parse().ok()?;
        if i == 0 || i > self.scope.dim || index.starts_with('0') {
            return None;
        }
        match kind {
            "x" => Some(Var::X(i - 1)),
            "y" if self.scope.allow_y => Some(Var::Y(i - 1)),
            _ => None,
        }
    }

    fn cond(&mut self) -> Result<Cond> {
        let mut lhs = self.conj()?;
        while self.eat("||") {
            lhs = Cond::Or(Box::new(lhs), Box::new(self.conj()?));
        }
        Ok(lhs)
    }

    fn conj(&mut self) -> Result<Cond> {
        let mut lhs = self.cmp()?;
        while self.eat("&&") {
            lhs = Cond::And(Box::new(lhs), Box::new(self.cmp()?));
        }
        Ok(lhs)
    }

    fn cmp(&mut self) -> Result<Cond> {
        let a = self.expr()?;
        let at = self.position();
        let op = match self.bump() {
            Tok::Sym("<=") => CmpOp::Le,
            Tok::Sym("<") => CmpOp::Lt,
            Tok::Sym(">=") => CmpOp::Ge,
            Tok::Sym(">") => CmpOp::Gt,
            t => return Err(Error::parse(at, format!("expected comparison operator, found {t}"))),
        };
        let b = self.expr()?;
        Ok(Cond::Cmp(op, a, b))
    }
}
