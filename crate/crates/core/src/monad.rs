//! Canonical finite representation of `T(X)` for the bundled monads.
//!
//! Every bundled monad is presented by the same normal form: a finite
//! multiset of branches, each carrying an exact rational weight, a grade from
//! a monoid (trivial, words, or costs), and a payload. The monads differ only
//! in the *discipline* restricting which multisets are legal and in the
//! operations they provide:
//!
//! | selector            | discipline    | grades | operations          |
//! |---------------------|---------------|--------|---------------------|
//! | `pure`              | single        | trivial| none                |
//! | `writer:<alphabet>` | single        | words  | `out[w]`            |
//! | `cost`              | single        | cost   | `tick`              |
//! | `multidist`         | probabilistic | trivial| `(+)[p]`            |
//! | `multiset`          | counting      | trivial| `amb`               |
//! | `cost*multidist`    | probabilistic | cost   | `tick`, `(+)[p]`    |
//! | `writer:<a>*multidist` | probabilistic | words | `out[w]`, `(+)[p]` |
//!
//! The empty element is the bottom of every monad. Branches with equal
//! grade and payload are never merged: the monads here are the
//! non-idempotent ones (multisets, multidistributions).
//!
//! The order [`MonadSpec::leq`] is sub-multiset inclusion of branches. It
//! makes the empty element least and the finite approximation chains of the
//! semantics increasing.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Zero};
use serde_json::{json, Value};

use crate::rational::{self, Weight};
use crate::syntax::OpSym;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Grade {
    Trivial,
    Word(String),
    Cost(u64),
}

impl Grade {
    /// Monoid multiplication: word concatenation or cost addition.
    pub fn mul(&self, other: &Grade) -> Grade {
        match (self, other) {
            (Grade::Trivial, g) | (g, Grade::Trivial) => g.clone(),
            (Grade::Word(a), Grade::Word(b)) => Grade::Word(format!("{a}{b}")),
            (Grade::Cost(a), Grade::Cost(b)) => Grade::Cost(a + b),
            (a, b) => panic!("grade kinds do not match: {a:?} * {b:?}"),
        }
    }

    pub fn is_unit(&self) -> bool {
        match self {
            Grade::Trivial => true,
            Grade::Word(w) => w.is_empty(),
            Grade::Cost(c) => *c == 0,
        }
    }
}

impl fmt::Display for Grade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Grade::Trivial => write!(f, "unit"),
            Grade::Word(w) if w.is_empty() => write!(f, "eps"),
            Grade::Word(w) => write!(f, "{w}"),
            Grade::Cost(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Branch<X> {
    pub weight: Weight,
    pub grade: Grade,
    pub payload: X,
}

impl<X: Ord> PartialOrd for Branch<X> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl<X: Ord> Ord for Branch<X> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (&self.grade, &self.payload, &self.weight).cmp(&(&other.grade, &other.payload, &other.weight))
    }
}

/// A finite formal sum of weighted, graded branches in canonical order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MonadicElement<X> {
    branches: Vec<Branch<X>>,
}

impl<X> Default for MonadicElement<X> {
    fn default() -> Self {
        MonadicElement { branches: Vec::new() }
    }
}

impl<X: Ord> PartialOrd for MonadicElement<X> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl<X: Ord> Ord for MonadicElement<X> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.branches.cmp(&other.branches)
    }
}

impl<X: Ord + Clone> MonadicElement<X> {
    /// The bottom element.
    pub fn empty() -> Self {
        MonadicElement { branches: Vec::new() }
    }

    pub fn from_branches(mut branches: Vec<Branch<X>>) -> Self {
        branches.retain(|b| !b.weight.is_zero());
        branches.sort();
        MonadicElement { branches }
    }

    pub fn branches(&self) -> &[Branch<X>] {
        &self.branches
    }

    pub fn into_branches(self) -> Vec<Branch<X>> {
        self.branches
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    /// Distinct payloads.
    pub fn support(&self) -> BTreeSet<X> {
        self.branches.iter().map(|b| b.payload.clone()).collect()
    }

    pub fn total_weight(&self) -> Weight {
        self.branches.iter().fold(Weight::zero(), |acc, b| acc + &b.weight)
    }

    pub fn map<Y: Ord + Clone>(&self, mut f: impl FnMut(&X) -> Y) -> MonadicElement<Y> {
        MonadicElement::from_branches(
            self.branches
                .iter()
                .map(|b| Branch {
                    weight: b.weight.clone(),
                    grade: b.grade.clone(),
                    payload: f(&b.payload),
                })
                .collect(),
        )
    }

    /// Kleisli extension: each branch `(p, w, x)` is replaced by the
    /// branches `(p*q, w*u, y)` of `f(x)`.
    pub fn bind<Y: Ord + Clone>(&self, mut f: impl FnMut(&X) -> MonadicElement<Y>) -> MonadicElement<Y> {
        match self.try_bind(|x| Ok::<_, std::convert::Infallible>(f(x))) {
            Ok(m) => m,
            Err(e) => match e {},
        }
    }

    pub fn try_bind<Y: Ord + Clone, E>(
        &self,
        mut f: impl FnMut(&X) -> Result<MonadicElement<Y>, E>,
    ) -> Result<MonadicElement<Y>, E> {
        let mut out = Vec::new();
        for b in &self.branches {
            for c in f(&b.payload)?.branches {
                out.push(Branch {
                    weight: &b.weight * &c.weight,
                    grade: b.grade.mul(&c.grade),
                    payload: c.payload,
                });
            }
        }
        Ok(MonadicElement::from_branches(out))
    }

    /// Collapses every payload to `()`, keeping branches separate.
    pub fn collapse(&self) -> MonadicElement<()> {
        MonadicElement::from_branches(
            self.branches
                .iter()
                .map(|b| Branch {
                    weight: b.weight.clone(),
                    grade: b.grade.clone(),
                    payload: (),
                })
                .collect(),
        )
    }

    fn scaled(&self, p: &Weight) -> Vec<Branch<X>> {
        self.branches
            .iter()
            .map(|b| Branch {
                weight: &b.weight * p,
                grade: b.grade.clone(),
                payload: b.payload.clone(),
            })
            .collect()
    }

    fn prefixed(&self, g: &Grade) -> MonadicElement<X> {
        MonadicElement::from_branches(
            self.branches
                .iter()
                .map(|b| Branch {
                    weight: b.weight.clone(),
                    grade: g.mul(&b.grade),
                    payload: b.payload.clone(),
                })
                .collect(),
        )
    }

    /// Sub-multiset inclusion.
    pub fn is_submultiset_of(&self, other: &Self) -> bool {
        let mut counts: BTreeMap<&Branch<X>, usize> = BTreeMap::new();
        for b in &other.branches {
            *counts.entry(b).or_default() += 1;
        }
        for b in &self.branches {
            match counts.get_mut(b) {
                Some(n) if *n > 0 => *n -= 1,
                _ => return false,
            }
        }
        true
    }

    /// JSON array of `{"p", "grade", "payload"}` objects.
    pub fn to_json(&self, mut payload: impl FnMut(&X) -> Value) -> Value {
        Value::Array(
            self.branches
                .iter()
                .map(|b| {
                    json!({
                        "p": rational::format(&b.weight),
                        "grade": grade_to_json(&b.grade),
                        "payload": payload(&b.payload),
                    })
                })
                .collect(),
        )
    }
}

fn grade_to_json(g: &Grade) -> Value {
    match g {
        Grade::Trivial => Value::Null,
        Grade::Word(w) => Value::String(w.clone()),
        Grade::Cost(c) => json!(c),
    }
}

/// An observation: an element of `T(1)`.
pub type Observation = MonadicElement<()>;

/// Prints an observation as `p*(grade) + ...`, with `p` alone for trivial
/// grades and `bot` for the empty observation.
pub fn format_observation(o: &Observation) -> String {
    if o.is_empty() {
        return "bot".to_string();
    }
    o.branches()
        .iter()
        .map(|b| match b.grade {
            Grade::Trivial => rational::format(&b.weight),
            _ => format!("{}*({})", rational::format(&b.weight), b.grade),
        })
        .collect::<Vec<_>>()
        .join(" + ")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Discipline {
    /// At most one branch, of weight one.
    Single,
    /// Total weight at most one.
    Probabilistic,
    /// Every weight exactly one.
    Counting,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GradeKind {
    Trivial,
    /// Words over an alphabet; `None` accepts any alphanumeric letter.
    Words(Option<BTreeSet<char>>),
    Cost,
}

/// Generic-effect semantics of an operation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpKind {
    /// `out[w]`, unary: prefixes `w` to the grade.
    Out,
    /// `tick`, unary: adds one to the cost.
    Tick,
    /// `(+)[p]`, binary probabilistic choice.
    Choice,
    /// `amb`, binary multiset union.
    Amb,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpDecl {
    pub arity: usize,
    pub kind: OpKind,
}

/// A resolved operation occurrence, with its parameter.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Effect {
    Out(String),
    Tick,
    Choice(Weight),
    Amb,
}

impl Effect {
    pub fn arity(&self) -> usize {
        match self {
            Effect::Out(_) | Effect::Tick => 1,
            Effect::Choice(_) | Effect::Amb => 2,
        }
    }

    /// Whether some argument never reaches the result (`(+)[0]`, `(+)[1]`).
    pub fn is_erasing(&self) -> bool {
        matches!(self, Effect::Choice(p) if p.is_zero() || p.is_one())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum MonadError {
    #[error("unknown operation '{op}' for monad {monad}")]
    UnknownOp { op: String, monad: String },
    #[error("operation '{op}' expects {expected} argument(s), got {found}")]
    Arity { op: String, expected: usize, found: usize },
    #[error("operation '{op}' erases an argument; monad {monad} does not allow erasing operations")]
    Erasing { op: String, monad: String },
    #[error("word '{word}' is not over the alphabet of {monad}")]
    Alphabet { word: String, monad: String },
    #[error("discipline violated in {monad}: {detail}")]
    Discipline { monad: String, detail: String },
    #[error("unknown monad selector '{0}'")]
    UnknownMonad(String),
    #[error("bad grade '{grade}' for monad {monad}")]
    BadGrade { grade: String, monad: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MonadSpec {
    pub name: String,
    pub discipline: Discipline,
    pub grade_kind: GradeKind,
    pub ops: BTreeMap<String, OpDecl>,
    /// Permits `(+)[0]` and `(+)[1]`. Only meaningful for infinitary typing.
    pub allow_erasing: bool,
}

impl MonadSpec {
    fn new(name: &str, discipline: Discipline, grade_kind: GradeKind, ops: &[(&str, OpKind)]) -> Self {
        MonadSpec {
            name: name.to_string(),
            discipline,
            grade_kind,
            ops: ops
                .iter()
                .map(|(n, k)| {
                    let arity = match k {
                        OpKind::Out | OpKind::Tick => 1,
                        OpKind::Choice | OpKind::Amb => 2,
                    };
                    (n.to_string(), OpDecl { arity, kind: *k })
                })
                .collect(),
            allow_erasing: false,
        }
    }

    pub fn pure() -> Self {
        Self::new("pure", Discipline::Single, GradeKind::Trivial, &[])
    }

    pub fn writer(alphabet: &str) -> Self {
        let name = format!("writer:{alphabet}");
        Self::new(&name, Discipline::Single, words(alphabet), &[("out", OpKind::Out)])
    }

    pub fn cost() -> Self {
        Self::new("cost", Discipline::Single, GradeKind::Cost, &[("tick", OpKind::Tick)])
    }

    pub fn multidist() -> Self {
        Self::new(
            "multidist",
            Discipline::Probabilistic,
            GradeKind::Trivial,
            &[("choice", OpKind::Choice)],
        )
    }

    pub fn multiset() -> Self {
        Self::new(
            "multiset",
            Discipline::Counting,
            GradeKind::Trivial,
            &[("amb", OpKind::Amb)],
        )
    }

    pub fn cost_multidist() -> Self {
        Self::new(
            "cost*multidist",
            Discipline::Probabilistic,
            GradeKind::Cost,
            &[("tick", OpKind::Tick), ("choice", OpKind::Choice)],
        )
    }

    pub fn writer_multidist(alphabet: &str) -> Self {
        let name = format!("writer:{alphabet}*multidist");
        Self::new(
            &name,
            Discipline::Probabilistic,
            words(alphabet),
            &[("out", OpKind::Out), ("choice", OpKind::Choice)],
        )
    }

    /// Every bundled instance, with `ab` as the writer alphabet.
    pub fn bundled() -> Vec<MonadSpec> {
        vec![
            Self::pure(),
            Self::writer("ab"),
            Self::cost(),
            Self::multidist(),
            Self::multiset(),
            Self::cost_multidist(),
            Self::writer_multidist("ab"),
        ]
    }

    pub fn with_erasing(mut self) -> Self {
        self.allow_erasing = true;
        self.name.push_str("+erasing");
        self
    }

    /// Parses a selector such as `cost*multidist` or `writer:ab`. A
    /// `+erasing` suffix enables erasing choices.
    pub fn parse(selector: &str) -> Result<Self, MonadError> {
        let selector = selector.trim();
        let (base, erasing) = match selector.strip_suffix("+erasing") {
            Some(b) => (b, true),
            None => (selector, false),
        };
        let spec = match base {
            "pure" => Self::pure(),
            "cost" => Self::cost(),
            "multidist" => Self::multidist(),
            "multiset" => Self::multiset(),
            "cost*multidist" => Self::cost_multidist(),
            _ => {
                let (head, prob) = match base.strip_suffix("*multidist") {
                    Some(h) => (h, true),
                    None => (base, false),
                };
                let alphabet = match head.strip_prefix("writer") {
                    Some("") => "",
                    Some(rest) => rest
                        .strip_prefix(':')
                        .filter(|a| a.chars().all(char::is_alphanumeric))
                        .ok_or_else(|| MonadError::UnknownMonad(selector.to_string()))?,
                    None => return Err(MonadError::UnknownMonad(selector.to_string())),
                };
                match (alphabet.is_empty(), prob) {
                    (true, false) => Self::new(
                        "writer",
                        Discipline::Single,
                        GradeKind::Words(None),
                        &[("out", OpKind::Out)],
                    ),
                    (true, true) => Self::new(
                        "writer*multidist",
                        Discipline::Probabilistic,
                        GradeKind::Words(None),
                        &[("out", OpKind::Out), ("choice", OpKind::Choice)],
                    ),
                    (false, false) => Self::writer(alphabet),
                    (false, true) => Self::writer_multidist(alphabet),
                }
            }
        };
        Ok(if erasing { spec.with_erasing() } else { spec })
    }

    pub fn unit_grade(&self) -> Grade {
        match self.grade_kind {
            GradeKind::Trivial => Grade::Trivial,
            GradeKind::Words(_) => Grade::Word(String::new()),
            GradeKind::Cost => Grade::Cost(0),
        }
    }

    pub fn eta<X: Ord + Clone>(&self, x: X) -> MonadicElement<X> {
        MonadicElement {
            branches: vec![Branch {
                weight: Weight::one(),
                grade: self.unit_grade(),
                payload: x,
            }],
        }
    }

    pub fn bind<X: Ord + Clone, Y: Ord + Clone>(
        &self,
        m: &MonadicElement<X>,
        f: impl FnMut(&X) -> MonadicElement<Y>,
    ) -> MonadicElement<Y> {
        let out = m.bind(f);
        debug_assert!(self.validate(&out).is_ok(), "{:?}", self.validate(&out));
        out
    }

    /// Resolves a syntactic operation symbol against this monad.
    pub fn resolve(&self, sym: &OpSym) -> Result<Effect, MonadError> {
        let unknown = || MonadError::UnknownOp {
            op: sym.to_string(),
            monad: self.name.clone(),
        };
        let effect = match sym {
            OpSym::Out(w) => Effect::Out(w.clone()),
            OpSym::Choice(p) => Effect::Choice(p.clone()),
            OpSym::Named(n) if n == "tick" => Effect::Tick,
            OpSym::Named(n) if n == "amb" => Effect::Amb,
            OpSym::Named(n) => match n.strip_prefix("out_") {
                Some(w) if !w.is_empty() => Effect::Out(w.to_string()),
                _ => return Err(unknown()),
            },
        };
        let key = match effect {
            Effect::Out(_) => "out",
            Effect::Tick => "tick",
            Effect::Choice(_) => "choice",
            Effect::Amb => "amb",
        };
        if !self.ops.contains_key(key) {
            return Err(unknown());
        }
        if let Effect::Out(w) = &effect {
            if !self.word_ok(w) {
                return Err(MonadError::Alphabet {
                    word: w.clone(),
                    monad: self.name.clone(),
                });
            }
        }
        if let Effect::Choice(p) = &effect {
            if !rational::is_probability(p) {
                return Err(unknown());
            }
        }
        if effect.is_erasing() && !self.allow_erasing {
            return Err(MonadError::Erasing {
                op: sym.to_string(),
                monad: self.name.clone(),
            });
        }
        Ok(effect)
    }

    fn word_ok(&self, w: &str) -> bool {
        match &self.grade_kind {
            GradeKind::Words(Some(alpha)) => w.chars().all(|c| alpha.contains(&c)),
            GradeKind::Words(None) => w.chars().all(char::is_alphanumeric),
            _ => false,
        }
    }

    /// Applies an algebraic operation to monadic arguments.
    pub fn apply_op<X: Ord + Clone>(
        &self,
        sym: &OpSym,
        args: Vec<MonadicElement<X>>,
    ) -> Result<MonadicElement<X>, MonadError> {
        let effect = self.resolve(sym)?;
        if args.len() != effect.arity() {
            return Err(MonadError::Arity {
                op: sym.to_string(),
                expected: effect.arity(),
                found: args.len(),
            });
        }
        Ok(apply_effect(&effect, args))
    }

    pub fn validate<X: Ord + Clone>(&self, m: &MonadicElement<X>) -> Result<(), MonadError> {
        let fail = |detail: String| {
            Err(MonadError::Discipline {
                monad: self.name.clone(),
                detail,
            })
        };
        for b in m.branches() {
            if b.weight <= Weight::zero() {
                return fail(format!("non-positive weight {}", rational::format(&b.weight)));
            }
            if !self.grade_ok(&b.grade) {
                return fail(format!("grade {} not in the grade monoid", b.grade));
            }
        }
        match self.discipline {
            Discipline::Single => {
                if m.len() > 1 || m.branches().iter().any(|b| !b.weight.is_one()) {
                    return fail("expected at most one branch of weight 1".into());
                }
            }
            Discipline::Probabilistic => {
                if m.total_weight() > Weight::one() {
                    return fail(format!(
                        "total weight {} exceeds 1",
                        rational::format(&m.total_weight())
                    ));
                }
            }
            Discipline::Counting => {
                if m.branches().iter().any(|b| !b.weight.is_one()) {
                    return fail("every weight must be 1".into());
                }
            }
        }
        Ok(())
    }

    pub fn grade_ok(&self, g: &Grade) -> bool {
        match (&self.grade_kind, g) {
            (GradeKind::Trivial, Grade::Trivial) | (GradeKind::Cost, Grade::Cost(_)) => true,
            (GradeKind::Words(_), Grade::Word(w)) => w.is_empty() || self.word_ok(w),
            _ => false,
        }
    }

    /// Parses a grade written in type syntax (`unit`, a word, `eps`, or a
    /// natural number).
    pub fn parse_grade(&self, text: &str) -> Result<Grade, MonadError> {
        let bad = || MonadError::BadGrade {
            grade: text.to_string(),
            monad: self.name.clone(),
        };
        let g = match &self.grade_kind {
            GradeKind::Trivial if text == "unit" || text.is_empty() => Grade::Trivial,
            GradeKind::Trivial => return Err(bad()),
            GradeKind::Cost => Grade::Cost(text.parse().map_err(|_| bad())?),
            GradeKind::Words(_) if text == "eps" || text == "ε" || text == "unit" => Grade::Word(String::new()),
            GradeKind::Words(_) => Grade::Word(text.to_string()),
        };
        if self.grade_ok(&g) {
            Ok(g)
        } else {
            Err(bad())
        }
    }

    pub fn grade_from_json(&self, v: &Value) -> Result<Grade, MonadError> {
        match v {
            Value::Null => self.parse_grade("unit"),
            Value::String(s) if s.is_empty() => self.parse_grade("unit"),
            Value::String(s) => self.parse_grade(s),
            Value::Number(n) => self.parse_grade(&n.to_string()),
            other => Err(MonadError::BadGrade {
                grade: other.to_string(),
                monad: self.name.clone(),
            }),
        }
    }

    /// Partial order on elements: sub-multiset inclusion.
    pub fn leq<X: Ord + Clone>(&self, m1: &MonadicElement<X>, m2: &MonadicElement<X>) -> bool {
        m1.is_submultiset_of(m2)
    }
}

fn words(alphabet: &str) -> GradeKind {
    GradeKind::Words(Some(alphabet.chars().collect()))
}

/// Generic-effect semantics. Arity must already be checked.
pub fn apply_effect<X: Ord + Clone>(effect: &Effect, mut args: Vec<MonadicElement<X>>) -> MonadicElement<X> {
    match effect {
        Effect::Out(w) => args.pop().unwrap().prefixed(&Grade::Word(w.clone())),
        Effect::Tick => args.pop().unwrap().prefixed(&Grade::Cost(1)),
        Effect::Choice(p) => {
            let right = args.pop().unwrap();
            let left = args.pop().unwrap();
            let q = Weight::one() - p;
            let mut branches = left.scaled(p);
            branches.extend(right.scaled(&q));
            MonadicElement::from_branches(branches)
        }
        Effect::Amb => {
            let mut branches = Vec::new();
            for a in args {
                branches.extend(a.branches);
            }
            MonadicElement::from_branches(branches)
        }
    }
}

/// Support of an element.
pub fn support<X: Ord + Clone>(m: &MonadicElement<X>) -> BTreeSet<X> {
    m.support()
}

/// Observation: collapse every payload to the unit.
pub fn obs_collapse<X: Ord + Clone>(m: &MonadicElement<X>) -> Observation {
    m.collapse()
}
