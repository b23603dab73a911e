//! Kernel call-by-value terms with algebraic operations.
//!
//! Application is restricted to a value in function position. General
//! application `t u` is accepted by the parser and desugared to
//! `(\%fN. %fN u) t`, where `%fN` is a reserved fresh name.

use std::collections::BTreeSet;
use std::fmt;

use num_traits::{One, Zero};

use crate::rational::{self, Weight};

/// Prefix reserved for binders introduced by desugaring.
pub const RESERVED_PREFIX: char = '%';

/// Operation symbol as written in source. Validity against a monad is
/// checked at evaluation/typing time.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OpSym {
    /// `name(t1, ..., tn)`, e.g. `tick(t)` or `amb(t, u)`.
    Named(String),
    /// `out[w](t)`.
    Out(String),
    /// `t (+)[p] u`.
    Choice(Weight),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(String),
    Lam(String, Box<Term>),
    /// Kernel application: the function is always a value.
    App(Box<Term>, Box<Term>),
    Op(OpSym, Vec<Term>),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Term {
        Term::Var(name.into())
    }

    pub fn lam(binder: impl Into<String>, body: Term) -> Term {
        Term::Lam(binder.into(), Box::new(body))
    }

    /// Builds a kernel application. Panics if `fun` is not a value.
    pub fn app(fun: Term, arg: Term) -> Term {
        assert!(fun.is_value(), "kernel application needs a value in function position");
        Term::App(Box::new(fun), Box::new(arg))
    }

    pub fn op(sym: OpSym, args: Vec<Term>) -> Term {
        Term::Op(sym, args)
    }

    pub fn is_value(&self) -> bool {
        matches!(self, Term::Var(_) | Term::Lam(..))
    }

    /// `\x. x`
    pub fn identity() -> Term {
        Term::lam("x", Term::var("x"))
    }

    /// `(\x. x x)(\x. x x)`
    pub fn omega() -> Term {
        let delta = Term::lam("x", Term::app(Term::var("x"), Term::var("x")));
        Term::app(delta.clone(), delta)
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match self {
            Term::Var(x) => {
                if !bound.contains(x) {
                    out.insert(x.clone());
                }
            }
            Term::Lam(x, body) => {
                bound.push(x.clone());
                body.collect_free(bound, out);
                bound.pop();
            }
            Term::App(f, a) => {
                f.collect_free(bound, out);
                a.collect_free(bound, out);
            }
            Term::Op(_, args) => {
                for a in args {
                    a.collect_free(bound, out);
                }
            }
        }
    }

    pub fn is_closed(&self) -> bool {
        self.free_vars().is_empty()
    }

    fn has_free(&self, x: &str) -> bool {
        match self {
            Term::Var(y) => y == x,
            Term::Lam(y, body) => y != x && body.has_free(x),
            Term::App(f, a) => f.has_free(x) || a.has_free(x),
            Term::Op(_, args) => args.iter().any(|a| a.has_free(x)),
        }
    }

    fn all_names(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::Var(x) => {
                out.insert(x.clone());
            }
            Term::Lam(x, body) => {
                out.insert(x.clone());
                body.all_names(out);
            }
            Term::App(f, a) => {
                f.all_names(out);
                a.all_names(out);
            }
            Term::Op(_, args) => args.iter().for_each(|a| a.all_names(out)),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Term::Var(_) => 1,
            Term::Lam(_, b) => 1 + b.size(),
            Term::App(f, a) => 1 + f.size() + a.size(),
            Term::Op(_, args) => 1 + args.iter().map(Term::size).sum::<usize>(),
        }
    }
}

/// Capture-avoiding substitution `t{x := v}`.
pub fn substitute(t: &Term, x: &str, v: &Term) -> Term {
    debug_assert!(v.is_value(), "only values are substituted");
    let fv = v.free_vars();
    subst_inner(t, x, v, &fv)
}

fn subst_inner(t: &Term, x: &str, v: &Term, fv: &BTreeSet<String>) -> Term {
    match t {
        Term::Var(y) if y == x => v.clone(),
        Term::Var(_) => t.clone(),
        Term::Lam(y, _) if y == x => t.clone(),
        Term::Lam(y, body) => {
            if !body.has_free(x) {
                return t.clone();
            }
            if fv.contains(y) {
                let mut avoid = fv.clone();
                body.all_names(&mut avoid);
                avoid.insert(x.to_string());
                let fresh = prime_until_fresh(y, &avoid);
                let renamed = subst_inner(body, y, &Term::Var(fresh.clone()), &BTreeSet::from([fresh.clone()]));
                Term::Lam(fresh, Box::new(subst_inner(&renamed, x, v, fv)))
            } else {
                Term::Lam(y.clone(), Box::new(subst_inner(body, x, v, fv)))
            }
        }
        Term::App(f, a) => Term::App(Box::new(subst_inner(f, x, v, fv)), Box::new(subst_inner(a, x, v, fv))),
        Term::Op(sym, args) => Term::Op(sym.clone(), args.iter().map(|a| subst_inner(a, x, v, fv)).collect()),
    }
}

fn prime_until_fresh(base: &str, avoid: &BTreeSet<String>) -> String {
    let mut name = format!("{base}'");
    while avoid.contains(&name) {
        name.push('\'');
    }
    name
}

/// α-equivalence.
pub fn alpha_eq(t: &Term, u: &Term) -> bool {
    fn go<'a>(t: &'a Term, u: &'a Term, env: &mut Vec<(&'a str, &'a str)>) -> bool {
        match (t, u) {
            (Term::Var(x), Term::Var(y)) => {
                for (l, r) in env.iter().rev() {
                    if *l == x || *r == y {
                        return *l == x && *r == y;
                    }
                }
                x == y
            }
            (Term::Lam(x, b), Term::Lam(y, c)) => {
                env.push((x, y));
                let ok = go(b, c, env);
                env.pop();
                ok
            }
            (Term::App(f, a), Term::App(g, b)) => go(f, g, env) && go(a, b, env),
            (Term::Op(s, xs), Term::Op(r, ys)) => {
                s == r && xs.len() == ys.len() && xs.iter().zip(ys).all(|(a, b)| go(a, b, env))
            }
            _ => false,
        }
    }
    go(t, u, &mut Vec::new())
}

/// Unique decomposition `t = E[focus]` with `E ::= <.> | v E`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalSplit {
    /// Value frames, outermost first.
    pub context: Vec<Term>,
    /// A β-redex, an operation node, or a value.
    pub focus: Term,
}

impl EvalSplit {
    pub fn plug(&self, t: Term) -> Term {
        plug(&self.context, t)
    }
}

pub fn plug(context: &[Term], t: Term) -> Term {
    context
        .iter()
        .rev()
        .fold(t, |acc, v| Term::App(Box::new(v.clone()), Box::new(acc)))
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("term has free variables: {}", .0.iter().cloned().collect::<Vec<_>>().join(", "))]
pub struct OpenTermError(pub BTreeSet<String>);

pub fn decompose(t: &Term) -> Result<EvalSplit, OpenTermError> {
    let fv = t.free_vars();
    if !fv.is_empty() {
        return Err(OpenTermError(fv));
    }
    Ok(decompose_closed(t))
}

/// Decomposition without the closedness check.
pub(crate) fn decompose_closed(t: &Term) -> EvalSplit {
    let mut context = Vec::new();
    let mut cur = t;
    loop {
        match cur {
            Term::App(f, a) if !a.is_value() => {
                context.push((**f).clone());
                cur = a;
            }
            _ => {
                return EvalSplit {
                    context,
                    focus: cur.clone(),
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Pretty printing

impl fmt::Display for OpSym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OpSym::Named(n) => write!(f, "{n}"),
            OpSym::Out(w) => write!(f, "out[{w}]"),
            OpSym::Choice(p) => write!(f, "(+)[{}]", rational::format(p)),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_term(self, f)
    }
}

// Printing levels: a term printed by `write_term` may be a λ or a choice and
// extends maximally to the right; `write_operand` parenthesizes anything that
// is not an atom.
fn write_term(t: &Term, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match t {
        Term::Lam(x, body) => {
            write!(f, "\\{x}. ")?;
            write_term(body, f)
        }
        Term::Op(OpSym::Choice(p), args) if args.len() == 2 => {
            write_choice_left(&args[0], f)?;
            write!(f, " (+)[{}] ", rational::format(p))?;
            write_app_level(&args[1], f)
        }
        _ => write_app_level(t, f),
    }
}

fn write_choice_left(t: &Term, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match t {
        Term::Op(OpSym::Choice(_), args) if args.len() == 2 => write_term(t, f),
        _ => write_app_level(t, f),
    }
}

fn write_app_level(t: &Term, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match t {
        Term::App(fun, arg) => {
            write_operand(fun, f)?;
            write!(f, " ")?;
            write_operand(arg, f)
        }
        _ => write_operand(t, f),
    }
}

fn write_operand(t: &Term, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match t {
        Term::Var(x) => write!(f, "{x}"),
        Term::Op(OpSym::Named(n), args) => {
            write!(f, "{n}(")?;
            write_args(args, f)?;
            write!(f, ")")
        }
        Term::Op(OpSym::Out(w), args) => {
            write!(f, "out[{w}](")?;
            write_args(args, f)?;
            write!(f, ")")
        }
        _ => {
            write!(f, "(")?;
            write_term(t, f)?;
            write!(f, ")")
        }
    }
}

fn write_args(args: &[Term], f: &mut fmt::Formatter<'_>) -> fmt::Result {
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            write!(f, ", ")?;
        }
        write_term(a, f)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("{line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Open(#[from] OpenTermError),
}

#[derive(Clone, Copy, Debug)]
pub struct ParseOptions {
    /// Reject terms with free variables.
    pub closed: bool,
    /// Accept identifiers starting with the reserved prefix, and treat `I`
    /// and `omega` as plain identifiers. Used to read back printed terms.
    pub allow_reserved: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            closed: true,
            allow_reserved: false,
        }
    }
}

/// Parses a closed term.
pub fn parse(text: &str) -> Result<Term, ParseError> {
    parse_with(text, ParseOptions::default())
}

/// Parses printed output (reserved names allowed, free variables allowed).
pub fn parse_printed(text: &str) -> Result<Term, ParseError> {
    parse_with(
        text,
        ParseOptions {
            closed: false,
            allow_reserved: true,
        },
    )
}

pub fn parse_with(text: &str, opts: ParseOptions) -> Result<Term, ParseError> {
    let mut p = Parser {
        chars: text.chars().collect(),
        pos: 0,
        opts,
        bound: Vec::new(),
        fresh: 0,
        reserved_seen: reserved_counter_floor(text),
    };
    p.skip_ws();
    let t = p.expr()?;
    p.skip_ws();
    if p.pos < p.chars.len() {
        return Err(p.error(format!("unexpected '{}'", p.chars[p.pos])));
    }
    if opts.closed {
        let fv = t.free_vars();
        if !fv.is_empty() {
            return Err(ParseError::Open(OpenTermError(fv)));
        }
    }
    Ok(t)
}

// When re-reading printed terms that already contain `%fN` binders, new fresh
// names must start above the largest N present.
fn reserved_counter_floor(text: &str) -> usize {
    let mut max = 0;
    let bytes: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == RESERVED_PREFIX && bytes.get(i + 1) == Some(&'f') {
            let mut j = i + 2;
            let mut n = 0usize;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                n = n.saturating_mul(10).saturating_add(bytes[j] as usize - '0' as usize);
                j += 1;
            }
            max = max.max(n);
            i = j;
        } else {
            i += 1;
        }
    }
    max
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
    opts: ParseOptions,
    bound: Vec<String>,
    fresh: usize,
    reserved_seen: usize,
}

impl Parser {
    fn error(&self, message: impl Into<String>) -> ParseError {
        let (mut line, mut column) = (1, 1);
        for c in &self.chars[..self.pos.min(self.chars.len())] {
            if *c == '\n' {
                line += 1;
                column = 1;
            } else {
                column += 1;
            }
        }
        ParseError::Syntax {
            line,
            column,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += 1;
            } else if c == '#' {
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn looking_at(&self, s: &str) -> bool {
        s.chars()
            .enumerate()
            .all(|(k, c)| self.chars.get(self.pos + k) == Some(&c))
    }

    fn expect(&mut self, s: &str) -> Result<(), ParseError> {
        self.skip_ws();
        if self.looking_at(s) {
            self.pos += s.chars().count();
            Ok(())
        } else {
            Err(self.error(format!("expected '{s}'")))
        }
    }

    fn fresh_name(&mut self) -> String {
        self.fresh += 1;
        format!("{RESERVED_PREFIX}f{}", self.reserved_seen + self.fresh)
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_alphabetic() || c == '_' => {}
            Some(RESERVED_PREFIX) if self.opts.allow_reserved => {}
            Some(RESERVED_PREFIX) => {
                return Err(self.error(format!(
                    "identifiers may not start with the reserved prefix '{RESERVED_PREFIX}'"
                )))
            }
            _ => return Err(self.error("expected identifier")),
        }
        self.pos += 1;
        while let Some(c) = self.peek() {
            if c.is_alphanumeric() || c == '_' || c == '\'' {
                self.pos += 1;
            } else {
                break;
            }
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn at_choice(&self) -> bool {
        self.looking_at("(+)")
    }

    fn starts_atom(&self) -> bool {
        match self.peek() {
            Some('(') => !self.at_choice(),
            Some('\\') | Some('λ') => true,
            Some(c) => c.is_alphabetic() || c == '_' || (c == RESERVED_PREFIX && self.opts.allow_reserved),
            None => false,
        }
    }

    // expr := app ("(+)" "[" rational "]" app)*
    fn expr(&mut self) -> Result<Term, ParseError> {
        let mut left = self.app()?;
        loop {
            self.skip_ws();
            if !self.at_choice() {
                return Ok(left);
            }
            self.pos += 3;
            self.expect("[")?;
            let p = self.rational()?;
            self.expect("]")?;
            let right = self.app()?;
            left = Term::Op(OpSym::Choice(p), vec![left, right]);
        }
    }

    fn rational(&mut self) -> Result<Weight, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || c == '/' || c == '.' {
                self.pos += 1;
            } else {
                break;
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        let p = rational::parse(&text).map_err(|e| self.error(e))?;
        if p < Weight::zero() || p > Weight::one() {
            return Err(self.error(format!("choice weight {text} outside [0, 1]")));
        }
        Ok(p)
    }

    // app := atom+, left-associative with desugaring of non-kernel heads.
    fn app(&mut self) -> Result<Term, ParseError> {
        self.skip_ws();
        if !self.starts_atom() {
            return Err(self.error("expected a term"));
        }
        let mut acc = self.atom()?;
        loop {
            self.skip_ws();
            if !self.starts_atom() {
                return Ok(acc);
            }
            let arg = self.atom()?;
            acc = self.mk_app(acc, arg);
        }
    }

    fn mk_app(&mut self, fun: Term, arg: Term) -> Term {
        if fun.is_value() {
            Term::App(Box::new(fun), Box::new(arg))
        } else {
            let f = self.fresh_name();
            let body = Term::App(Box::new(Term::Var(f.clone())), Box::new(arg));
            Term::App(Box::new(Term::Lam(f, Box::new(body))), Box::new(fun))
        }
    }

    fn atom(&mut self) -> Result<Term, ParseError> {
        self.skip_ws();
        match self.peek() {
            Some('\\') | Some('λ') => {
                self.pos += 1;
                let mut binders = vec![self.ident()?];
                loop {
                    self.skip_ws();
                    if self.peek() == Some('.') {
                        self.pos += 1;
                        break;
                    }
                    binders.push(self.ident()?);
                }
                let depth = self.bound.len();
                self.bound.extend(binders.iter().cloned());
                let body = self.expr();
                self.bound.truncate(depth);
                let body = body?;
                Ok(binders
                    .into_iter()
                    .rev()
                    .fold(body, |acc, x| Term::Lam(x, Box::new(acc))))
            }
            Some('(') => {
                self.pos += 1;
                let t = self.expr()?;
                self.expect(")")?;
                Ok(t)
            }
            _ => {
                let name = self.ident()?;
                if name == "out" && self.peek() == Some('[') {
                    self.pos += 1;
                    let word = self.word()?;
                    self.expect("]")?;
                    self.expect("(")?;
                    let arg = self.expr()?;
                    self.expect(")")?;
                    return Ok(Term::Op(OpSym::Out(word), vec![arg]));
                }
                if self.peek() == Some('(') && !self.at_choice() {
                    self.pos += 1;
                    let mut args = vec![self.expr()?];
                    loop {
                        self.skip_ws();
                        match self.peek() {
                            Some(',') => {
                                self.pos += 1;
                                args.push(self.expr()?);
                            }
                            Some(')') => {
                                self.pos += 1;
                                break;
                            }
                            _ => return Err(self.error("expected ',' or ')'")),
                        }
                    }
                    return Ok(Term::Op(OpSym::Named(name), args));
                }
                if !self.opts.allow_reserved && !self.bound.contains(&name) {
                    match name.as_str() {
                        "I" => return Ok(Term::identity()),
                        "omega" | "Ω" => return Ok(Term::omega()),
                        _ => {}
                    }
                }
                Ok(Term::Var(name))
            }
        }
    }

    fn word(&mut self) -> Result<String, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_alphanumeric() || c == '_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        if start == self.pos {
            return Err(self.error("expected a non-empty output word"));
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }
}
