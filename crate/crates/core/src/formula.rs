//! The monadic language over chains: syntax, parser, quantifier depth and a
//! brute-force evaluator.
//!
//! Variables are either free (an index into the evaluation tuple) or bound.
//! Bound variables are numbered by nesting level, outermost quantifier first,
//! so a bound variable `Bound(j)` evaluated against a tuple of arity `l` lives
//! at position `l + j` of the environment.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{mask_members, Chain, ChainError, SetTuple};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    Free(usize),
    Bound(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    /// `EM(X)`: X is empty.
    Em(Var),
    /// `SING(X)`: X is a singleton.
    Sing(Var),
    /// `X ⊆ Y`.
    Sub(Var, Var),
    /// `X <* Y`: both singletons and the element of X precedes the element of Y.
    Lt(Var, Var),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
    Exists(Box<Formula>),
    Forall(Box<Formula>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unbound variable `{name}` at byte {pos}")]
    Unbound { name: String, pos: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("free variable X{index} is not covered by a tuple of arity {arity}")]
    UnboundFree { index: usize, arity: usize },
    #[error(transparent)]
    Chain(#[from] ChainError),
}

impl Formula {
    pub fn not(self) -> Formula {
        Formula::Not(Box::new(self))
    }

    pub fn and(self, other: Formula) -> Formula {
        Formula::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: Formula) -> Formula {
        Formula::Or(Box::new(self), Box::new(other))
    }

    pub fn implies(self, other: Formula) -> Formula {
        Formula::Implies(Box::new(self), Box::new(other))
    }

    pub fn iff(self, other: Formula) -> Formula {
        Formula::Iff(Box::new(self), Box::new(other))
    }

    pub fn exists(body: Formula) -> Formula {
        Formula::Exists(Box::new(body))
    }

    pub fn forall(body: Formula) -> Formula {
        Formula::Forall(Box::new(body))
    }

    /// Quantifier depth: the syntactic nesting of set quantifiers.
    pub fn qdepth(&self) -> usize {
        use Formula::*;
        match self {
            True | False | Em(_) | Sing(_) | Sub(..) | Lt(..) => 0,
            Not(a) => a.qdepth(),
            And(a, b) | Or(a, b) | Implies(a, b) | Iff(a, b) => a.qdepth().max(b.qdepth()),
            Exists(a) | Forall(a) => 1 + a.qdepth(),
        }
    }

    /// One more than the largest free-variable index, or 0 for sentences.
    pub fn free_arity(&self) -> usize {
        let mut n = 0;
        self.visit_vars(&mut |v| {
            if let Var::Free(i) = v {
                n = n.max(i + 1);
            }
        });
        n
    }

    pub fn is_quantifier_free(&self) -> bool {
        self.qdepth() == 0
    }

    fn visit_vars(&self, f: &mut impl FnMut(Var)) {
        use Formula::*;
        match self {
            True | False => {}
            Em(v) | Sing(v) => f(*v),
            Sub(a, b) | Lt(a, b) => {
                f(*a);
                f(*b);
            }
            Not(a) | Exists(a) | Forall(a) => a.visit_vars(f),
            And(a, b) | Or(a, b) | Implies(a, b) | Iff(a, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
        }
    }

    /// Renames free variables through `map` (index `i` becomes `map[i]`).
    pub fn remap_free(&self, map: &[usize]) -> Formula {
        use Formula::*;
        let rv = |v: &Var| match v {
            Var::Free(i) => Var::Free(map[*i]),
            b => *b,
        };
        match self {
            True => True,
            False => False,
            Em(v) => Em(rv(v)),
            Sing(v) => Sing(rv(v)),
            Sub(a, b) => Sub(rv(a), rv(b)),
            Lt(a, b) => Lt(rv(a), rv(b)),
            Not(a) => Not(Box::new(a.remap_free(map))),
            And(a, b) => And(Box::new(a.remap_free(map)), Box::new(b.remap_free(map))),
            Or(a, b) => Or(Box::new(a.remap_free(map)), Box::new(b.remap_free(map))),
            Implies(a, b) => Implies(Box::new(a.remap_free(map)), Box::new(b.remap_free(map))),
            Iff(a, b) => Iff(Box::new(a.remap_free(map)), Box::new(b.remap_free(map))),
            Exists(a) => Exists(Box::new(a.remap_free(map))),
            Forall(a) => Forall(Box::new(a.remap_free(map))),
        }
    }
}

impl std::str::FromStr for Formula {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

impl Serialize for Formula {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Formula {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        parse(&text).map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

struct VarName(Var);

impl fmt::Display for VarName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Var::Free(i) => write!(f, "X{i}"),
            Var::Bound(j) => write!(f, "V{j}"),
        }
    }
}

impl Formula {
    fn is_atomic(&self) -> bool {
        use Formula::*;
        matches!(self, True | False | Em(_) | Sing(_) | Sub(..) | Lt(..) | Not(_))
    }

    fn fmt_with_depth(&self, f: &mut fmt::Formatter<'_>, depth: usize) -> fmt::Result {
        use Formula::*;
        let bin = |f: &mut fmt::Formatter<'_>, a: &Formula, op: &str, b: &Formula| -> fmt::Result {
            a.fmt_operand_depth(f, depth)?;
            write!(f, " {op} ")?;
            b.fmt_operand_depth(f, depth)
        };
        match self {
            True => write!(f, "true"),
            False => write!(f, "false"),
            Em(v) => write!(f, "EM({})", VarName(*v)),
            Sing(v) => write!(f, "SING({})", VarName(*v)),
            Sub(a, b) => write!(f, "{} <= {}", VarName(*a), VarName(*b)),
            Lt(a, b) => write!(f, "{} < {}", VarName(*a), VarName(*b)),
            Not(a) => {
                write!(f, "!")?;
                a.fmt_operand_depth(f, depth)
            }
            And(a, b) => bin(f, a, "&", b),
            Or(a, b) => bin(f, a, "|", b),
            Implies(a, b) => bin(f, a, "->", b),
            Iff(a, b) => bin(f, a, "<->", b),
            Exists(a) => {
                write!(f, "exists V{depth}. ")?;
                a.fmt_with_depth(f, depth + 1)
            }
            Forall(a) => {
                write!(f, "forall V{depth}. ")?;
                a.fmt_with_depth(f, depth + 1)
            }
        }
    }

    fn fmt_operand_depth(&self, f: &mut fmt::Formatter<'_>, depth: usize) -> fmt::Result {
        if self.is_atomic() {
            self.fmt_with_depth(f, depth)
        } else {
            write!(f, "(")?;
            self.fmt_with_depth(f, depth)?;
            write!(f, ")")
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_with_depth(f, 0)
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    LParen,
    RParen,
    Dot,
    Bang,
    Amp,
    Pipe,
    Arrow,
    DoubleArrow,
    Le,
    Lt,
    Eq,
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), start));
            continue;
        } else if text[i..].starts_with("<->") {
            i += 3;
            Tok::DoubleArrow
        } else if text[i..].starts_with("->") {
            i += 2;
            Tok::Arrow
        } else if text[i..].starts_with("<=") {
            i += 2;
            Tok::Le
        } else {
            i += 1;
            match c {
                b'(' => Tok::LParen,
                b')' => Tok::RParen,
                b'.' => Tok::Dot,
                b'!' => Tok::Bang,
                b'&' => Tok::Amp,
                b'|' => Tok::Pipe,
                b'<' => Tok::Lt,
                b'=' => Tok::Eq,
                _ => {
                    return Err(ParseError::Syntax {
                        pos: start,
                        msg: format!("unexpected character `{}`", c as char),
                    })
                }
            }
        };
        out.push((tok, start));
    }
    Ok(out)
}

/// Surface syntax with named variables, shared by the set-only and the
/// individual-variable front ends.
#[derive(Debug, Clone, PartialEq)]
enum Surface {
    Const(bool),
    Em(Name),
    Sing(Name),
    Sub(Name, Name),
    Lt(Name, Name),
    Eq(Name, Name),
    In(Name, Name),
    Not(Box<Surface>),
    And(Box<Surface>, Box<Surface>),
    Or(Box<Surface>, Box<Surface>),
    Implies(Box<Surface>, Box<Surface>),
    Iff(Box<Surface>, Box<Surface>),
    Quant { universal: bool, var: Name, body: Box<Surface> },
}

#[derive(Debug, Clone, PartialEq)]
struct Name {
    text: String,
    pos: usize,
}

impl Name {
    fn is_individual(&self) -> bool {
        self.text.starts_with(|c: char| c.is_ascii_lowercase())
    }

    /// `X<i>` or `x<i>` names free variable `i`.
    fn free_index(&self) -> Option<usize> {
        let rest = self.text.strip_prefix('X').or_else(|| self.text.strip_prefix('x'))?;
        if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        if rest.len() > 1 && rest.starts_with('0') {
            return None;
        }
        rest.parse().ok()
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
    end: usize,
    individuals: bool,
}

const KEYWORDS: &[&str] = &["exists", "forall", "true", "false", "in", "EM", "SING"];

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(t, _)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map(|(_, p)| *p).unwrap_or(self.end)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax { pos: self.pos(), msg: msg.into() })
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &Tok, what: &str) -> Result<(), ParseError> {
        if self.eat(t) {
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn name(&mut self) -> Result<Name, ParseError> {
        let pos = self.pos();
        match self.peek().cloned() {
            Some(Tok::Ident(s)) if !KEYWORDS.contains(&s.as_str()) => {
                self.at += 1;
                Ok(Name { text: s, pos })
            }
            _ => self.err("expected a variable"),
        }
    }

    fn formula(&mut self) -> Result<Surface, ParseError> {
        let mut lhs = self.implication()?;
        while self.eat(&Tok::DoubleArrow) {
            let rhs = self.implication()?;
            lhs = Surface::Iff(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn implication(&mut self) -> Result<Surface, ParseError> {
        let lhs = self.disjunction()?;
        if self.eat(&Tok::Arrow) {
            let rhs = self.implication()?;
            return Ok(Surface::Implies(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<Surface, ParseError> {
        let mut lhs = self.conjunction()?;
        while self.eat(&Tok::Pipe) {
            let rhs = self.conjunction()?;
            lhs = Surface::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Surface, ParseError> {
        let mut lhs = self.unary()?;
        while self.eat(&Tok::Amp) {
            let rhs = self.unary()?;
            lhs = Surface::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Surface, ParseError> {
        if self.eat(&Tok::Bang) {
            return Ok(Surface::Not(Box::new(self.unary()?)));
        }
        if self.is_keyword("exists") || self.is_keyword("forall") {
            let universal = self.is_keyword("forall");
            self.at += 1;
            let var = self.name()?;
            self.expect(&Tok::Dot, "`.` after the quantified variable")?;
            let body = self.formula()?;
            return Ok(Surface::Quant { universal, var, body: Box::new(body) });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Surface, ParseError> {
        if self.eat(&Tok::LParen) {
            let inner = self.formula()?;
            self.expect(&Tok::RParen, "`)`")?;
            return Ok(inner);
        }
        if self.is_keyword("true") {
            self.at += 1;
            return Ok(Surface::Const(true));
        }
        if self.is_keyword("false") {
            self.at += 1;
            return Ok(Surface::Const(false));
        }
        if self.is_keyword("EM") || self.is_keyword("SING") {
            let em = self.is_keyword("EM");
            self.at += 1;
            self.expect(&Tok::LParen, "`(`")?;
            let v = self.name()?;
            self.expect(&Tok::RParen, "`)`")?;
            return Ok(if em { Surface::Em(v) } else { Surface::Sing(v) });
        }
        let lhs = self.name()?;
        let op_pos = self.pos();
        let op = self.peek().cloned();
        match op {
            Some(Tok::Le) => {
                self.at += 1;
                Ok(Surface::Sub(lhs, self.name()?))
            }
            Some(Tok::Lt) => {
                self.at += 1;
                Ok(Surface::Lt(lhs, self.name()?))
            }
            Some(Tok::Eq) => {
                self.at += 1;
                Ok(Surface::Eq(lhs, self.name()?))
            }
            Some(Tok::Ident(ref s)) if s == "in" && self.individuals => {
                self.at += 1;
                Ok(Surface::In(lhs, self.name()?))
            }
            _ => Err(ParseError::Syntax { pos: op_pos, msg: "expected `<=`, `<` or `=` after a variable".into() }),
        }
    }
}

fn parse_surface(text: &str, individuals: bool) -> Result<Surface, ParseError> {
    let toks = tokenize(text)?;
    let mut p = Parser { toks, at: 0, end: text.len(), individuals };
    let s = p.formula()?;
    if p.at != p.toks.len() {
        return p.err("trailing input");
    }
    Ok(s)
}

/// Scope of named bound variables during lowering.
struct Scope {
    names: Vec<String>,
}

impl Scope {
    fn resolve(&self, n: &Name) -> Result<Var, ParseError> {
        if let Some(j) = self.names.iter().rposition(|s| *s == n.text) {
            return Ok(Var::Bound(j));
        }
        n.free_index().map(Var::Free).ok_or_else(|| ParseError::Unbound { name: n.text.clone(), pos: n.pos })
    }
}

fn sort_error<T>(n: &Name, msg: &str) -> Result<T, ParseError> {
    Err(ParseError::Syntax { pos: n.pos, msg: format!("`{}`: {msg}", n.text) })
}

/// Lowers surface syntax to [`Formula`]. With `individuals` set, lowercase
/// variables denote elements and are rewritten to singleton sets.
fn lower(s: &Surface, scope: &mut Scope, individuals: bool) -> Result<Formula, ParseError> {
    use Formula as F;
    let set_var = |n: &Name, scope: &Scope| -> Result<Var, ParseError> {
        if individuals && n.is_individual() {
            return sort_error(n, "an element variable cannot be used as a set here");
        }
        scope.resolve(n)
    };
    Ok(match s {
        Surface::Const(b) => {
            if *b {
                F::True
            } else {
                F::False
            }
        }
        Surface::Em(n) => F::Em(set_var(n, scope)?),
        Surface::Sing(n) => F::Sing(set_var(n, scope)?),
        Surface::Sub(a, b) => F::Sub(set_var(a, scope)?, set_var(b, scope)?),
        Surface::Eq(a, b) => {
            if individuals && (a.is_individual() || b.is_individual()) {
                return sort_error(a, "equality is only available between set variables");
            }
            let (x, y) = (set_var(a, scope)?, set_var(b, scope)?);
            F::Sub(x, y).and(F::Sub(y, x))
        }
        Surface::Lt(a, b) => {
            if individuals && a.is_individual() != b.is_individual() {
                return sort_error(a, "`<` needs two element variables or two set variables");
            }
            F::Lt(scope.resolve(a)?, scope.resolve(b)?)
        }
        Surface::In(a, b) => {
            if !a.is_individual() || b.is_individual() {
                return sort_error(a, "`in` needs an element variable on the left and a set on the right");
            }
            let x = scope.resolve(a)?;
            F::Sing(x).and(F::Sub(x, scope.resolve(b)?))
        }
        Surface::Not(a) => lower(a, scope, individuals)?.not(),
        Surface::And(a, b) => lower(a, scope, individuals)?.and(lower(b, scope, individuals)?),
        Surface::Or(a, b) => lower(a, scope, individuals)?.or(lower(b, scope, individuals)?),
        Surface::Implies(a, b) => lower(a, scope, individuals)?.implies(lower(b, scope, individuals)?),
        Surface::Iff(a, b) => lower(a, scope, individuals)?.iff(lower(b, scope, individuals)?),
        Surface::Quant { universal, var, body } => {
            let element = individuals && var.is_individual();
            scope.names.push(var.text.clone());
            let inner = lower(body, scope, individuals);
            let j = scope.names.len() - 1;
            scope.names.pop();
            let inner = inner?;
            let x = Var::Bound(j);
            match (element, universal) {
                (false, false) => F::exists(inner),
                (false, true) => F::forall(inner),
                (true, false) => F::exists(F::Sing(x).and(inner)),
                (true, true) => F::forall(F::Sing(x).implies(inner)),
            }
        }
    })
}

/// Parses the set-variable language. Free variables are `X0`, `X1`, …;
/// any other identifier must be bound by an enclosing quantifier.
pub fn parse(text: &str) -> Result<Formula, ParseError> {
    let s = parse_surface(text, false)?;
    lower(&s, &mut Scope { names: Vec::new() }, false)
}

/// Parses a formula that may use element variables (lowercase identifiers,
/// free ones written `x0`, `x1`, …) and translates it into the set language:
/// element quantifiers become quantifiers over singletons, `x in Y` becomes
/// `SING(X) & X <= Y`, and `x < y` becomes `X < Y`.
pub fn translate_individual(text: &str) -> Result<Formula, ParseError> {
    let s = parse_surface(text, true)?;
    lower(&s, &mut Scope { names: Vec::new() }, true)
}

/// Quantifier depth of the element-level source text, counting element and set
/// quantifiers alike.
pub fn individual_qdepth(text: &str) -> Result<usize, ParseError> {
    fn depth(s: &Surface) -> usize {
        match s {
            Surface::Const(_)
            | Surface::Em(_)
            | Surface::Sing(_)
            | Surface::Sub(..)
            | Surface::Lt(..)
            | Surface::Eq(..)
            | Surface::In(..) => 0,
            Surface::Not(a) => depth(a),
            Surface::And(a, b) | Surface::Or(a, b) | Surface::Implies(a, b) | Surface::Iff(a, b) => {
                depth(a).max(depth(b))
            }
            Surface::Quant { body, .. } => 1 + depth(body),
        }
    }
    Ok(depth(&parse_surface(text, true)?))
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// Restriction on the candidates a quantifier must range over, read off
/// conjuncts of the body (or of the antecedent, for `forall`).
#[derive(Debug, Clone, Default)]
struct Guard {
    singleton: bool,
    empty: bool,
    within: Vec<usize>,
}

#[derive(Debug, Clone)]
enum Node {
    Const(bool),
    Em(usize),
    Sing(usize),
    Sub(usize, usize),
    Lt(usize, usize),
    Not(Box<Node>),
    And(Box<Node>, Box<Node>),
    Or(Box<Node>, Box<Node>),
    Implies(Box<Node>, Box<Node>),
    Iff(Box<Node>, Box<Node>),
    Exists(Guard, Box<Node>),
    Forall(Guard, Box<Node>),
}

fn slot(v: Var, base: usize) -> usize {
    match v {
        Var::Free(i) => i,
        Var::Bound(j) => base + j,
    }
}

fn conjuncts<'a>(f: &'a Formula, out: &mut Vec<&'a Formula>) {
    if let Formula::And(a, b) = f {
        conjuncts(a, out);
        conjuncts(b, out);
    } else {
        out.push(f);
    }
}

fn guard_for(parts: &[&Formula], me: usize, base: usize) -> Guard {
    let mut g = Guard::default();
    let is_me = |v: &Var| slot(*v, base) == me;
    for p in parts {
        match p {
            Formula::Sing(v) if is_me(v) => g.singleton = true,
            Formula::Em(v) if is_me(v) => g.empty = true,
            Formula::Lt(a, b) if is_me(a) || is_me(b) => g.singleton = true,
            Formula::Sub(a, b) if is_me(a) && !is_me(b) => {
                let s = slot(*b, base);
                if s < me {
                    g.within.push(s);
                }
            }
            _ => {}
        }
    }
    g
}

fn compile(f: &Formula, base: usize, depth: usize) -> Node {
    use Formula as F;
    let s = |v: &Var| slot(*v, base);
    match f {
        F::True => Node::Const(true),
        F::False => Node::Const(false),
        F::Em(v) => Node::Em(s(v)),
        F::Sing(v) => Node::Sing(s(v)),
        F::Sub(a, b) => Node::Sub(s(a), s(b)),
        F::Lt(a, b) => Node::Lt(s(a), s(b)),
        F::Not(a) => Node::Not(Box::new(compile(a, base, depth))),
        F::And(a, b) => Node::And(Box::new(compile(a, base, depth)), Box::new(compile(b, base, depth))),
        F::Or(a, b) => Node::Or(Box::new(compile(a, base, depth)), Box::new(compile(b, base, depth))),
        F::Implies(a, b) => Node::Implies(Box::new(compile(a, base, depth)), Box::new(compile(b, base, depth))),
        F::Iff(a, b) => Node::Iff(Box::new(compile(a, base, depth)), Box::new(compile(b, base, depth))),
        F::Exists(body) => {
            let mut parts = Vec::new();
            conjuncts(body, &mut parts);
            let g = guard_for(&parts, base + depth, base);
            Node::Exists(g, Box::new(compile(body, base, depth + 1)))
        }
        F::Forall(body) => {
            let mut parts = Vec::new();
            if let F::Implies(ante, _) = body.as_ref() {
                conjuncts(ante, &mut parts);
            }
            let g = guard_for(&parts, base + depth, base);
            Node::Forall(g, Box::new(compile(body, base, depth + 1)))
        }
    }
}

/// Candidate values for a quantified variable, in increasing mask order.
fn for_each_candidate(universe: u64, guard: &Guard, env: &[u64], mut f: impl FnMut(u64) -> bool) -> bool {
    if guard.empty {
        return f(0);
    }
    let mut within = universe;
    for &s in &guard.within {
        within &= env[s];
    }
    if guard.singleton {
        for p in mask_members(within) {
            if f(1u64 << p) {
                return true;
            }
        }
        return false;
    }
    let mut sub = 0u64;
    loop {
        if f(sub) {
            return true;
        }
        if sub == within {
            return false;
        }
        sub = sub.wrapping_sub(within) & within;
    }
}

fn run(node: &Node, universe: u64, env: &mut Vec<u64>) -> bool {
    match node {
        Node::Const(b) => *b,
        Node::Em(a) => env[*a] == 0,
        Node::Sing(a) => env[*a].count_ones() == 1,
        Node::Sub(a, b) => env[*a] & !env[*b] == 0,
        Node::Lt(a, b) => {
            let (x, y) = (env[*a], env[*b]);
            x.count_ones() == 1 && y.count_ones() == 1 && x < y
        }
        Node::Not(a) => !run(a, universe, env),
        Node::And(a, b) => run(a, universe, env) && run(b, universe, env),
        Node::Or(a, b) => run(a, universe, env) || run(b, universe, env),
        Node::Implies(a, b) => !run(a, universe, env) || run(b, universe, env),
        Node::Iff(a, b) => run(a, universe, env) == run(b, universe, env),
        Node::Exists(g, body) => {
            let snapshot = env.clone();
            let slot = env.len();
            env.push(0);
            let found = for_each_candidate(universe, g, &snapshot, |x| {
                env[slot] = x;
                run(body, universe, env)
            });
            env.pop();
            found
        }
        Node::Forall(g, body) => {
            let snapshot = env.clone();
            let slot = env.len();
            env.push(0);
            let refuted = for_each_candidate(universe, g, &snapshot, |x| {
                env[slot] = x;
                !run(body, universe, env)
            });
            env.pop();
            !refuted
        }
    }
}

/// A formula prepared for repeated evaluation against tuples of one arity.
#[derive(Debug, Clone)]
pub struct Evaluator {
    node: Node,
    arity: usize,
}

impl Evaluator {
    pub fn new(formula: &Formula, arity: usize) -> Result<Self, EvalError> {
        let need = formula.free_arity();
        if need > arity {
            return Err(EvalError::UnboundFree { index: need - 1, arity });
        }
        Ok(Evaluator { node: compile(formula, arity, 0), arity })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    /// Truth of the formula in the monadic structure of `chain` under `masks`.
    /// The caller guarantees that the masks lie inside the chain.
    pub fn eval_masks(&self, chain: &Chain, masks: &[u64]) -> bool {
        debug_assert_eq!(masks.len(), self.arity);
        let mut env = Vec::with_capacity(masks.len() + 8);
        env.extend_from_slice(masks);
        run(&self.node, chain.mask(), &mut env)
    }

    pub fn eval(&self, chain: &Chain, tuple: &SetTuple) -> Result<bool, EvalError> {
        if tuple.arity() != self.arity {
            return Err(EvalError::UnboundFree { index: self.arity.saturating_sub(1), arity: tuple.arity() });
        }
        tuple.check_over(chain)?;
        Ok(self.eval_masks(chain, tuple.masks()))
    }
}

/// Truth of `formula` in `(P(C); ⊆, <*, EM, SING)` with the free variables
/// assigned from `tuple`. Quantifiers range over all subsets of the chain.
pub fn eval(chain: &Chain, tuple: &SetTuple, formula: &Formula) -> Result<bool, EvalError> {
    Evaluator::new(formula, tuple.arity())?.eval(chain, tuple)
}

/// Plain reference evaluator without quantifier guards; every quantifier
/// scans all `2^len` subsets. Used to cross-check the guarded evaluator.
pub fn eval_unguarded(chain: &Chain, tuple: &SetTuple, formula: &Formula) -> Result<bool, EvalError> {
    fn go(f: &Formula, universe: u64, base: usize, env: &mut Vec<u64>) -> bool {
        use Formula as F;
        let v = |x: &Var, env: &Vec<u64>| env[slot(*x, base)];
        match f {
            F::True => true,
            F::False => false,
            F::Em(a) => v(a, env) == 0,
            F::Sing(a) => v(a, env).count_ones() == 1,
            F::Sub(a, b) => v(a, env) & !v(b, env) == 0,
            F::Lt(a, b) => {
                let (x, y) = (v(a, env), v(b, env));
                x.count_ones() == 1 && y.count_ones() == 1 && x < y
            }
            F::Not(a) => !go(a, universe, base, env),
            F::And(a, b) => go(a, universe, base, env) && go(b, universe, base, env),
            F::Or(a, b) => go(a, universe, base, env) || go(b, universe, base, env),
            F::Implies(a, b) => !go(a, universe, base, env) || go(b, universe, base, env),
            F::Iff(a, b) => go(a, universe, base, env) == go(b, universe, base, env),
            F::Exists(body) | F::Forall(body) => {
                let universal = matches!(f, F::Forall(_));
                env.push(0);
                let mut result = universal;
                let mut x = 0u64;
                loop {
                    *env.last_mut().unwrap() = x;
                    let r = go(body, universe, base, env);
                    if r != universal {
                        result = !universal;
                        break;
                    }
                    if x == universe {
                        break;
                    }
                    x = x.wrapping_sub(universe) & universe;
                }
                env.pop();
                result
            }
        }
    }
    let need = formula.free_arity();
    if need > tuple.arity() {
        return Err(EvalError::UnboundFree { index: need - 1, arity: tuple.arity() });
    }
    tuple.check_over(chain)?;
    let mut env = tuple.masks().to_vec();
    Ok(go(formula, chain.mask(), tuple.arity(), &mut env))
}
