//! Monadic intersection types.
//!
//! Three layers, mutually recursive:
//!
//! ```text
//! A ::= I -> M            value types
//! I ::= {A1, ..., An}     intersections (sets, possibly empty: 0)
//! M ::= T(I)              monadic types
//! ```
//!
//! Intersections are kept as ordered sets, so every type is canonical by
//! construction and structural equality is type equality.
//!
//! Text syntax: `0`, `{A, B}`, `I -> M`, `eta(I)`, `bot`, and weighted sums
//! `p*(grade, I) + ...` (`p*I` when the monad has trivial grades).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::One;

use crate::monad::{Branch, Grade, MonadError, MonadSpec, MonadicElement, Observation};
use crate::rational::{self, Weight};
use crate::syntax::OpSym;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ValueType {
    pub domain: Intersection,
    pub codomain: MonadicType,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Intersection {
    members: BTreeSet<ValueType>,
}

pub type MonadicType = MonadicElement<Intersection>;

impl ValueType {
    pub fn arrow(domain: Intersection, codomain: MonadicType) -> Self {
        ValueType { domain, codomain }
    }
}

impl Intersection {
    /// The empty intersection `0`.
    pub fn empty() -> Self {
        Intersection::default()
    }

    pub fn singleton(a: ValueType) -> Self {
        Intersection {
            members: BTreeSet::from([a]),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn members(&self) -> impl Iterator<Item = &ValueType> {
        self.members.iter()
    }

    pub fn contains(&self, a: &ValueType) -> bool {
        self.members.contains(a)
    }

    pub fn insert(&mut self, a: ValueType) {
        self.members.insert(a);
    }

    pub fn union(&self, other: &Intersection) -> Intersection {
        Intersection {
            members: self.members.union(&other.members).cloned().collect(),
        }
    }

    pub fn is_subset(&self, other: &Intersection) -> bool {
        self.members.is_subset(&other.members)
    }
}

impl FromIterator<ValueType> for Intersection {
    fn from_iter<T: IntoIterator<Item = ValueType>>(iter: T) -> Self {
        Intersection {
            members: iter.into_iter().collect(),
        }
    }
}

/// Total map from variables to intersections; absent means `0`.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TypeEnv {
    bindings: BTreeMap<String, Intersection>,
}

impl TypeEnv {
    pub fn new() -> Self {
        TypeEnv::default()
    }

    pub fn get(&self, x: &str) -> Intersection {
        self.bindings.get(x).cloned().unwrap_or_default()
    }

    /// Rebinds `x`, dropping the binding when `i` is empty.
    pub fn with(&self, x: &str, i: Intersection) -> TypeEnv {
        let mut out = self.clone();
        if i.is_empty() {
            out.bindings.remove(x);
        } else {
            out.bindings.insert(x.to_string(), i);
        }
        out
    }

    pub fn bindings(&self) -> impl Iterator<Item = (&String, &Intersection)> {
        self.bindings.iter()
    }

    /// Pointwise inclusion: every binding of `self` is included in `other`.
    pub fn is_sub_env(&self, other: &TypeEnv) -> bool {
        self.bindings.iter().all(|(x, i)| i.is_subset(&other.get(x)))
    }

    /// Pointwise union.
    pub fn union(&self, other: &TypeEnv) -> TypeEnv {
        let mut out = self.clone();
        for (x, i) in &other.bindings {
            let merged = out.get(x).union(i);
            out = out.with(x, merged);
        }
        out
    }
}

impl FromIterator<(String, Intersection)> for TypeEnv {
    fn from_iter<T: IntoIterator<Item = (String, Intersection)>>(iter: T) -> Self {
        iter.into_iter().fold(TypeEnv::new(), |env, (x, i)| env.with(&x, i))
    }
}

/// Equality of canonical forms. Types are canonical by construction, so
/// this is structural equality.
pub fn type_eq<T: PartialEq>(a: &T, b: &T) -> bool {
    a == b
}

pub fn eta_type(spec: &MonadSpec, i: Intersection) -> MonadicType {
    spec.eta(i)
}

/// The bottom monadic type.
pub fn bottom() -> MonadicType {
    MonadicElement::empty()
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum TypeError {
    #[error("intersection {0} in the support is not covered by the table")]
    Uncovered(String),
    #[error(transparent)]
    Monad(#[from] MonadError),
    #[error("type syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
}

/// Type-level bind `N >>= {I1 => M1, ..., In => Mn}`.
pub fn type_bind(n: &MonadicType, table: &BTreeMap<Intersection, MonadicType>) -> Result<MonadicType, TypeError> {
    n.try_bind(|i| table.get(i).cloned().ok_or_else(|| TypeError::Uncovered(i.to_string())))
}

/// Type-level algebraic operation.
pub fn type_op(spec: &MonadSpec, sym: &OpSym, args: Vec<MonadicType>) -> Result<MonadicType, TypeError> {
    Ok(spec.apply_op(sym, args)?)
}

pub fn obs_type(m: &MonadicType) -> Observation {
    m.collapse()
}

// ---------------------------------------------------------------------------
// Printing

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.domain, DisplayMonadic(&self.codomain))
    }
}

impl fmt::Display for Intersection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.members.is_empty() {
            return write!(f, "0");
        }
        write!(f, "{{")?;
        for (k, a) in self.members.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, "}}")
    }
}

impl fmt::Display for TypeEnv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, (x, i)) in self.bindings.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{x}: {i}")?;
        }
        Ok(())
    }
}

/// Display adapter for monadic types.
pub struct DisplayMonadic<'a>(pub &'a MonadicType);

impl fmt::Display for DisplayMonadic<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = self.0;
        if m.is_empty() {
            return write!(f, "bot");
        }
        if m.len() == 1 {
            let b = &m.branches()[0];
            if b.weight.is_one() && b.grade.is_unit() {
                return write!(f, "eta({})", b.payload);
            }
        }
        for (k, b) in m.branches().iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            match b.grade {
                Grade::Trivial => write!(f, "{}*{}", rational::format(&b.weight), b.payload)?,
                _ => write!(f, "{}*({}, {})", rational::format(&b.weight), b.grade, b.payload)?,
            }
        }
        Ok(())
    }
}

pub fn format_monadic(m: &MonadicType) -> String {
    DisplayMonadic(m).to_string()
}

// ---------------------------------------------------------------------------
// Parsing

pub fn parse_monadic(spec: &MonadSpec, text: &str) -> Result<MonadicType, TypeError> {
    let mut p = TypeParser::new(spec, text);
    let m = p.monadic()?;
    p.finish()?;
    Ok(m)
}

pub fn parse_intersection(spec: &MonadSpec, text: &str) -> Result<Intersection, TypeError> {
    let mut p = TypeParser::new(spec, text);
    let i = p.intersection()?;
    p.finish()?;
    Ok(i)
}

pub fn parse_value_type(spec: &MonadSpec, text: &str) -> Result<ValueType, TypeError> {
    let mut p = TypeParser::new(spec, text);
    let a = p.value_type()?;
    p.finish()?;
    Ok(a)
}

struct TypeParser<'a> {
    spec: &'a MonadSpec,
    src: Vec<char>,
    pos: usize,
}

impl<'a> TypeParser<'a> {
    fn new(spec: &'a MonadSpec, text: &str) -> Self {
        TypeParser {
            spec,
            src: text.chars().collect(),
            pos: 0,
        }
    }

    fn err(&self, message: impl Into<String>) -> TypeError {
        TypeError::Syntax {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn ws(&mut self) {
        while self.src.get(self.pos).is_some_and(|c| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, s: &str) -> bool {
        self.ws();
        let n = s.chars().count();
        if self.src.len() >= self.pos + n && self.src[self.pos..self.pos + n].iter().copied().eq(s.chars()) {
            self.pos += n;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> Result<(), TypeError> {
        if self.eat(s) {
            Ok(())
        } else {
            Err(self.err(format!("expected '{s}'")))
        }
    }

    fn finish(&mut self) -> Result<(), TypeError> {
        self.ws();
        if self.pos == self.src.len() {
            Ok(())
        } else {
            Err(self.err("trailing input"))
        }
    }

    fn intersection(&mut self) -> Result<Intersection, TypeError> {
        match self.peek() {
            Some('0') => {
                self.pos += 1;
                Ok(Intersection::empty())
            }
            Some('{') => {
                self.pos += 1;
                let mut out = Intersection::empty();
                if self.eat("}") {
                    return Ok(out);
                }
                loop {
                    out.insert(self.value_type()?);
                    if self.eat("}") {
                        return Ok(out);
                    }
                    self.expect(",")?;
                }
            }
            _ => Err(self.err("expected an intersection ('0' or '{...}')")),
        }
    }

    fn value_type(&mut self) -> Result<ValueType, TypeError> {
        let domain = self.intersection()?;
        self.expect("->")?;
        let codomain = self.monadic()?;
        Ok(ValueType { domain, codomain })
    }

    fn monadic(&mut self) -> Result<MonadicType, TypeError> {
        let mut branches = Vec::new();
        loop {
            branches.extend(self.summand()?);
            if !self.eat("+") {
                break;
            }
        }
        let m = MonadicElement::from_branches(branches);
        self.spec.validate(&m)?;
        Ok(m)
    }

    fn summand(&mut self) -> Result<Vec<Branch<Intersection>>, TypeError> {
        if self.eat("bot") || self.eat("⊥") {
            return Ok(Vec::new());
        }
        if self.eat("eta") {
            self.expect("(")?;
            let i = self.intersection()?;
            self.expect(")")?;
            return Ok(vec![Branch {
                weight: Weight::one(),
                grade: self.spec.unit_grade(),
                payload: i,
            }]);
        }
        let weight = self.weight()?;
        self.expect("*")?;
        if self.peek() == Some('(') {
            self.pos += 1;
            let grade_text = self.grade_token();
            let grade = self.spec.parse_grade(&grade_text)?;
            self.expect(",")?;
            let i = self.intersection()?;
            self.expect(")")?;
            Ok(vec![Branch {
                weight,
                grade,
                payload: i,
            }])
        } else {
            let i = self.intersection()?;
            let grade = self.spec.parse_grade("unit")?;
            Ok(vec![Branch {
                weight,
                grade,
                payload: i,
            }])
        }
    }

    fn weight(&mut self) -> Result<Weight, TypeError> {
        self.ws();
        let start = self.pos;
        while self
            .src
            .get(self.pos)
            .is_some_and(|c| c.is_ascii_digit() || *c == '/' || *c == '.')
        {
            self.pos += 1;
        }
        let text: String = self.src[start..self.pos].iter().collect();
        rational::parse(&text).map_err(|e| self.err(e))
    }

    fn grade_token(&mut self) -> String {
        self.ws();
        let start = self.pos;
        while self.src.get(self.pos).is_some_and(|c| c.is_alphanumeric() || *c == '_') {
            self.pos += 1;
        }
        self.src[start..self.pos].iter().collect()
    }
}
