//! Explicit typing derivations, a rule-by-rule checker, and their JSON form.
//!
//! Environments propagate exactly: every premise carries its conclusion's
//! environment, except under `abs`, which rebinds the abstracted variable.
//! `var` only asks for membership, so larger environments are harmless.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde_json::{json, Map, Value};

use crate::monad::{MonadSpec, MonadicElement};
use crate::syntax::{parse_printed, OpSym, Term};
use crate::types::{
    format_monadic, parse_intersection, parse_monadic, parse_value_type, type_bind, type_op, Intersection, MonadicType,
    TypeEnv, ValueType,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mode {
    Finitary,
    Infinitary,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Finitary => "finitary",
            Mode::Infinitary => "infinitary",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "finitary" => Ok(Mode::Finitary),
            "infinitary" => Ok(Mode::Infinitary),
            other => Err(format!("unknown mode '{other}' (expected finitary or infinitary)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rule {
    Var,
    Int,
    Abs,
    App,
    Unit,
    Op,
    Bot,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::Var => "var",
            Rule::Int => "int",
            Rule::Abs => "abs",
            Rule::App => "app",
            Rule::Unit => "unit",
            Rule::Op => "op",
            Rule::Bot => "bot",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Rule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "var" => Rule::Var,
            "int" => Rule::Int,
            "abs" => Rule::Abs,
            "app" => Rule::App,
            "unit" => Rule::Unit,
            "op" => Rule::Op,
            "bot" => Rule::Bot,
            other => return Err(format!("unknown rule '{other}'")),
        })
    }
}

/// The type in a judgement's conclusion.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Assigned {
    Value(ValueType),
    Intersection(Intersection),
    Monadic(MonadicType),
}

impl fmt::Display for Assigned {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Assigned::Value(a) => write!(f, "{a}"),
            Assigned::Intersection(i) => write!(f, "{i}"),
            Assigned::Monadic(m) => f.write_str(&format_monadic(m)),
        }
    }
}

/// A derivation of `env |- subject : assigned`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Derivation {
    pub rule: Rule,
    pub env: TypeEnv,
    pub subject: Term,
    pub assigned: Assigned,
    /// `app` only: the map `I_i => M_i`, in premise order.
    pub table: Vec<(Intersection, MonadicType)>,
    pub premises: Vec<Derivation>,
}

impl Derivation {
    fn node(rule: Rule, env: TypeEnv, subject: Term, assigned: Assigned, premises: Vec<Derivation>) -> Self {
        Derivation {
            rule,
            env,
            subject,
            assigned,
            table: Vec::new(),
            premises,
        }
    }

    pub fn var(env: TypeEnv, x: &str, a: ValueType) -> Self {
        Self::node(Rule::Var, env, Term::var(x), Assigned::Value(a), Vec::new())
    }

    /// `int` over the given value-type premises (possibly none).
    pub fn int(env: TypeEnv, subject: Term, premises: Vec<Derivation>) -> Self {
        let members = premises
            .iter()
            .filter_map(|p| match &p.assigned {
                Assigned::Value(a) => Some(a.clone()),
                _ => None,
            })
            .collect();
        Self::node(Rule::Int, env, subject, Assigned::Intersection(members), premises)
    }

    /// `abs` for `\binder. body`, with the premise typed under `binder: domain`.
    pub fn abs(env: TypeEnv, binder: &str, domain: Intersection, premise: Derivation) -> Self {
        let codomain = premise.monadic().cloned().unwrap_or_default();
        let subject = Term::lam(binder, premise.subject.clone());
        Self::node(
            Rule::Abs,
            env,
            subject,
            Assigned::Value(ValueType::arrow(domain, codomain)),
            vec![premise],
        )
    }

    pub fn unit(spec: &MonadSpec, premise: Derivation) -> Self {
        let i = match &premise.assigned {
            Assigned::Intersection(i) => i.clone(),
            _ => Intersection::empty(),
        };
        Self::node(
            Rule::Unit,
            premise.env.clone(),
            premise.subject.clone(),
            Assigned::Monadic(spec.eta(i)),
            vec![premise],
        )
    }

    pub fn op(spec: &MonadSpec, env: TypeEnv, sym: OpSym, premises: Vec<Derivation>) -> Result<Self, String> {
        let args = premises
            .iter()
            .map(|p| p.monadic().cloned().unwrap_or_default())
            .collect();
        let ty = type_op(spec, &sym, args).map_err(|e| e.to_string())?;
        let subject = Term::op(sym, premises.iter().map(|p| p.subject.clone()).collect());
        Ok(Self::node(Rule::Op, env, subject, Assigned::Monadic(ty), premises))
    }

    /// `app` from value premises (one per table entry, in order) and the
    /// computation premise.
    pub fn app(env: TypeEnv, value_premises: Vec<Derivation>, computation: Derivation) -> Result<Self, String> {
        let mut table = Vec::new();
        for p in &value_premises {
            match &p.assigned {
                Assigned::Value(a) => table.push((a.domain.clone(), a.codomain.clone())),
                other => return Err(format!("value premise has non-arrow type {other}")),
            }
        }
        let head = value_premises
            .first()
            .map(|p| p.subject.clone())
            .ok_or_else(|| "app needs at least one value premise".to_string())?;
        let n = computation.monadic().cloned().unwrap_or_default();
        let lookup = table.iter().cloned().collect();
        let ty = type_bind(&n, &lookup).map_err(|e| e.to_string())?;
        let subject = Term::App(Box::new(head), Box::new(computation.subject.clone()));
        let mut premises = value_premises;
        premises.push(computation);
        let mut d = Self::node(Rule::App, env, subject, Assigned::Monadic(ty), premises);
        d.table = table;
        Ok(d)
    }

    pub fn bot(env: TypeEnv, subject: Term) -> Self {
        Self::node(
            Rule::Bot,
            env,
            subject,
            Assigned::Monadic(MonadicElement::empty()),
            Vec::new(),
        )
    }

    pub fn monadic(&self) -> Option<&MonadicType> {
        match &self.assigned {
            Assigned::Monadic(m) => Some(m),
            _ => None,
        }
    }

    pub fn size(&self) -> usize {
        1 + self.premises.iter().map(Derivation::size).sum::<usize>()
    }

    pub fn contains_bot(&self) -> bool {
        self.rule == Rule::Bot || self.premises.iter().any(Derivation::contains_bot)
    }

    /// Rebuilds every environment top-down from `env`, following the
    /// checker's propagation discipline.
    pub fn with_env(&self, env: &TypeEnv) -> Derivation {
        let premises = match (&self.subject, self.rule, &self.assigned) {
            (Term::Lam(x, _), Rule::Abs, Assigned::Value(a)) => {
                let inner = env.with(x, a.domain.clone());
                self.premises.iter().map(|p| p.with_env(&inner)).collect()
            }
            _ => self.premises.iter().map(|p| p.with_env(env)).collect(),
        };
        Derivation {
            rule: self.rule,
            env: env.clone(),
            subject: self.subject.clone(),
            assigned: self.assigned.clone(),
            table: self.table.clone(),
            premises,
        }
    }

    /// Indented one-judgement-per-line rendering.
    pub fn pretty(&self) -> String {
        let mut out = String::new();
        self.pretty_into(0, &mut out);
        out
    }

    fn pretty_into(&self, depth: usize, out: &mut String) {
        use std::fmt::Write;
        let _ = writeln!(
            out,
            "{}[{}] {} |- {} : {}",
            "  ".repeat(depth),
            self.rule,
            self.env,
            self.subject,
            self.assigned
        );
        for p in &self.premises {
            p.pretty_into(depth + 1, out);
        }
    }
}

// ---------------------------------------------------------------------------
// Checking

/// A rule violation, located by a JSON-pointer-style path from the root.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("at {path} ({rule}): {message}")]
pub struct CheckError {
    pub path: String,
    pub rule: Rule,
    pub message: String,
}

struct Checker<'a> {
    spec: &'a MonadSpec,
    mode: Mode,
}

/// Checks every node of `d` in the given mode.
pub fn check(spec: &MonadSpec, d: &Derivation, mode: Mode) -> Result<(), CheckError> {
    Checker { spec, mode }.node(d, "")
}

impl Checker<'_> {
    fn node(&self, d: &Derivation, path: &str) -> Result<(), CheckError> {
        let here = if path.is_empty() { "/" } else { path };
        let fail = |message: String| CheckError {
            path: here.to_string(),
            rule: d.rule,
            message,
        };
        if let Assigned::Monadic(m) = &d.assigned {
            self.spec.validate(m).map_err(|e| fail(e.to_string()))?;
        }
        self.rule(d).map_err(fail)?;
        for (k, p) in d.premises.iter().enumerate() {
            self.node(p, &format!("{path}/premises/{k}"))?;
        }
        Ok(())
    }

    fn premise_count(d: &Derivation, n: usize) -> Result<(), String> {
        if d.premises.len() != n {
            return Err(format!("expected {n} premise(s), found {}", d.premises.len()));
        }
        Ok(())
    }

    fn same_env(d: &Derivation, p: &Derivation, k: usize) -> Result<(), String> {
        if p.env != d.env {
            return Err(format!("premise {k} has environment [{}], expected [{}]", p.env, d.env));
        }
        Ok(())
    }

    fn same_subject(p: &Derivation, subject: &Term, k: usize) -> Result<(), String> {
        if &p.subject != subject {
            return Err(format!("premise {k} types {}, expected {}", p.subject, subject));
        }
        Ok(())
    }

    fn rule(&self, d: &Derivation) -> Result<(), String> {
        if d.rule != Rule::App && !d.table.is_empty() {
            return Err("only app nodes carry a table".into());
        }
        match d.rule {
            Rule::Var => {
                Self::premise_count(d, 0)?;
                let Term::Var(x) = &d.subject else {
                    return Err(format!("var types a non-variable {}", d.subject));
                };
                let Assigned::Value(a) = &d.assigned else {
                    return Err("var must assign a value type".into());
                };
                if !d.env.get(x).contains(a) {
                    return Err(format!("{a} is not in the environment's {x}: {}", d.env.get(x)));
                }
                Ok(())
            }
            Rule::Int => {
                if !d.subject.is_value() {
                    return Err(format!("int types a non-value {}", d.subject));
                }
                let Assigned::Intersection(i) = &d.assigned else {
                    return Err("int must assign an intersection".into());
                };
                let mut covered = BTreeSet::new();
                for (k, p) in d.premises.iter().enumerate() {
                    Self::same_env(d, p, k)?;
                    Self::same_subject(p, &d.subject, k)?;
                    match &p.assigned {
                        Assigned::Value(a) => {
                            covered.insert(a.clone());
                        }
                        _ => return Err(format!("premise {k} does not assign a value type")),
                    }
                }
                let assigned: BTreeSet<ValueType> = i.members().cloned().collect();
                if covered != assigned {
                    let shown: Intersection = covered.into_iter().collect();
                    return Err(format!("premises cover {shown}, but {i} is assigned"));
                }
                Ok(())
            }
            Rule::Abs => {
                Self::premise_count(d, 1)?;
                let Term::Lam(x, body) = &d.subject else {
                    return Err(format!("abs types a non-abstraction {}", d.subject));
                };
                let Assigned::Value(a) = &d.assigned else {
                    return Err("abs must assign a value type".into());
                };
                let p = &d.premises[0];
                Self::same_subject(p, body, 0)?;
                let expected = d.env.with(x, a.domain.clone());
                if p.env != expected {
                    return Err(format!("premise has environment [{}], expected [{expected}]", p.env));
                }
                match p.monadic() {
                    Some(m) if *m == a.codomain => Ok(()),
                    Some(m) => Err(format!(
                        "body has type {}, but the arrow's codomain is {}",
                        format_monadic(m),
                        format_monadic(&a.codomain)
                    )),
                    None => Err("premise does not assign a monadic type".into()),
                }
            }
            Rule::Unit => {
                Self::premise_count(d, 1)?;
                if !d.subject.is_value() {
                    return Err(format!("unit types a non-value {}", d.subject));
                }
                let p = &d.premises[0];
                Self::same_env(d, p, 0)?;
                Self::same_subject(p, &d.subject, 0)?;
                let Assigned::Intersection(i) = &p.assigned else {
                    return Err("premise does not assign an intersection".into());
                };
                let expected = self.spec.eta(i.clone());
                match d.monadic() {
                    Some(m) if *m == expected => Ok(()),
                    Some(m) => Err(format!(
                        "assigned {}, expected {}",
                        format_monadic(m),
                        format_monadic(&expected)
                    )),
                    None => Err("unit must assign a monadic type".into()),
                }
            }
            Rule::Op => {
                let Term::Op(sym, args) = &d.subject else {
                    return Err(format!("op types a non-operation {}", d.subject));
                };
                let effect = self.spec.resolve(sym).map_err(|e| e.to_string())?;
                if self.mode == Mode::Finitary && effect.is_erasing() {
                    return Err(format!("erasing operation {sym} is not allowed in finitary mode"));
                }
                Self::premise_count(d, args.len())?;
                let mut tys = Vec::new();
                for (k, (p, a)) in d.premises.iter().zip(args).enumerate() {
                    Self::same_env(d, p, k)?;
                    Self::same_subject(p, a, k)?;
                    tys.push(
                        p.monadic()
                            .cloned()
                            .ok_or(format!("premise {k} does not assign a monadic type"))?,
                    );
                }
                let expected = type_op(self.spec, sym, tys).map_err(|e| e.to_string())?;
                match d.monadic() {
                    Some(m) if *m == expected => Ok(()),
                    Some(m) => Err(format!(
                        "assigned {}, but the operation yields {}",
                        format_monadic(m),
                        format_monadic(&expected)
                    )),
                    None => Err("op must assign a monadic type".into()),
                }
            }
            Rule::App => self.app(d),
            Rule::Bot => {
                if self.mode == Mode::Finitary {
                    return Err("rule bot is only available in infinitary mode".into());
                }
                Self::premise_count(d, 0)?;
                match d.monadic() {
                    Some(m) if m.is_empty() => Ok(()),
                    _ => Err("bot must assign the empty monadic type".into()),
                }
            }
        }
    }

    fn app(&self, d: &Derivation) -> Result<(), String> {
        let Term::App(v, t) = &d.subject else {
            return Err(format!("app types a non-application {}", d.subject));
        };
        let n = d.table.len();
        Self::premise_count(d, n + 1)?;
        let keys: BTreeSet<&Intersection> = d.table.iter().map(|(i, _)| i).collect();
        if keys.len() != n {
            return Err("table keys are not distinct".into());
        }
        for (k, (p, (i, m))) in d.premises.iter().zip(&d.table).enumerate() {
            Self::same_env(d, p, k)?;
            Self::same_subject(p, v, k)?;
            let expected = ValueType::arrow(i.clone(), m.clone());
            match &p.assigned {
                Assigned::Value(a) if *a == expected => {}
                other => {
                    return Err(format!(
                        "premise {k} assigns {other}, but the table requires {expected}"
                    ))
                }
            }
        }
        let c = &d.premises[n];
        Self::same_env(d, c, n)?;
        Self::same_subject(c, t, n)?;
        let big_n = c
            .monadic()
            .ok_or(format!("premise {n} does not assign a monadic type"))?;
        let lookup = d.table.iter().cloned().collect();
        let expected = type_bind(big_n, &lookup).map_err(|e| e.to_string())?;
        match d.monadic() {
            Some(m) if *m == expected => Ok(()),
            Some(m) => Err(format!(
                "assigned {}, but binding the argument type yields {}",
                format_monadic(m),
                format_monadic(&expected)
            )),
            None => Err("app must assign a monadic type".into()),
        }
    }
}

// ---------------------------------------------------------------------------
// Monadic derivations

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MonadicRule {
    ExtUnit,
    ExtG,
}

/// A derivation of a monadic computation: one term derivation per branch of
/// the subject, in canonical branch order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MonadicDerivation {
    pub rule: MonadicRule,
    pub subject: MonadicElement<Term>,
    pub premises: Vec<Derivation>,
}

impl MonadicDerivation {
    /// Builds the derivation, picking `ext-unit` for `eta(t)` subjects.
    pub fn new(spec: &MonadSpec, subject: MonadicElement<Term>, premises: Vec<Derivation>) -> Self {
        let rule = match subject.branches() {
            [b] if b.weight == crate::rational::one() && b.grade == spec.unit_grade() => MonadicRule::ExtUnit,
            _ => MonadicRule::ExtG,
        };
        MonadicDerivation {
            rule,
            subject,
            premises,
        }
    }

    /// The type obtained by weighting each premise's type with its branch.
    pub fn assemble(&self) -> Result<MonadicType, String> {
        let branches = self.subject.branches();
        if branches.len() != self.premises.len() {
            return Err(format!(
                "{} branch(es) but {} premise(s)",
                branches.len(),
                self.premises.len()
            ));
        }
        let indexed = MonadicElement::from_branches(
            branches
                .iter()
                .enumerate()
                .map(|(k, b)| crate::monad::Branch {
                    weight: b.weight.clone(),
                    grade: b.grade.clone(),
                    payload: k,
                })
                .collect(),
        );
        indexed.try_bind(|k| {
            self.premises[*k]
                .monadic()
                .cloned()
                .ok_or_else(|| format!("premise {k} does not assign a monadic type"))
        })
    }
}

/// Checks a monadic derivation against `target`: equality in finitary
/// mode, `target` below the assembled type in infinitary mode.
pub fn check_monadic(
    spec: &MonadSpec,
    md: &MonadicDerivation,
    target: &MonadicType,
    mode: Mode,
) -> Result<(), CheckError> {
    let rule_name = |k: usize| md.premises.get(k).map(|p| p.rule).unwrap_or(Rule::Bot);
    let fail = |path: String, rule: Rule, message: String| CheckError { path, rule, message };
    if md.rule == MonadicRule::ExtUnit && md.subject.len() != 1 {
        return Err(fail("/".into(), rule_name(0), "ext-unit needs a single branch".into()));
    }
    let branches = md.subject.branches();
    if branches.len() != md.premises.len() {
        return Err(fail(
            "/".into(),
            rule_name(0),
            format!("{} branch(es) but {} premise(s)", branches.len(), md.premises.len()),
        ));
    }
    for (k, (b, p)) in branches.iter().zip(&md.premises).enumerate() {
        let path = format!("/premises/{k}");
        if p.subject != b.payload {
            return Err(fail(
                path,
                p.rule,
                format!("premise types {}, but branch {k} holds {}", p.subject, b.payload),
            ));
        }
        check(spec, p, mode).map_err(|e| CheckError {
            path: format!("{path}{}", if e.path == "/" { "" } else { &e.path }),
            ..e
        })?;
    }
    let assembled = md.assemble().map_err(|m| fail("/".into(), rule_name(0), m))?;
    let ok = match mode {
        Mode::Finitary => assembled == *target,
        Mode::Infinitary => spec.leq(target, &assembled),
    };
    if ok {
        Ok(())
    } else {
        Err(fail(
            "/".into(),
            rule_name(0),
            format!(
                "assembled type {} does not match target {} in {mode} mode",
                format_monadic(&assembled),
                format_monadic(target)
            ),
        ))
    }
}

// ---------------------------------------------------------------------------
// JSON

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("schema error at {pointer}: {message}")]
pub struct SchemaError {
    pub pointer: String,
    pub message: String,
}

fn schema(pointer: &str, message: impl Into<String>) -> SchemaError {
    SchemaError {
        pointer: if pointer.is_empty() { "/".into() } else { pointer.into() },
        message: message.into(),
    }
}

impl Derivation {
    pub fn to_json(&self) -> Value {
        let env: Map<String, Value> = self
            .env
            .bindings()
            .map(|(x, i)| (x.clone(), Value::String(i.to_string())))
            .collect();
        let mut obj = Map::new();
        obj.insert("rule".into(), json!(self.rule.name()));
        obj.insert("env".into(), Value::Object(env));
        obj.insert("subject".into(), json!(self.subject.to_string()));
        obj.insert("type".into(), json!(self.assigned.to_string()));
        if self.rule == Rule::App {
            let table = self
                .table
                .iter()
                .map(|(i, m)| json!({"from": i.to_string(), "to": format_monadic(m)}))
                .collect();
            obj.insert("table".into(), Value::Array(table));
        }
        obj.insert(
            "premises".into(),
            Value::Array(self.premises.iter().map(Derivation::to_json).collect()),
        );
        Value::Object(obj)
    }

    pub fn from_json(spec: &MonadSpec, v: &Value) -> Result<Derivation, SchemaError> {
        from_json_at(spec, v, "")
    }
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str, ptr: &str) -> Result<&'a Value, SchemaError> {
    obj.get(key)
        .ok_or_else(|| schema(ptr, format!("missing field '{key}'")))
}

fn string_at<'a>(v: &'a Value, ptr: &str) -> Result<&'a str, SchemaError> {
    v.as_str().ok_or_else(|| schema(ptr, "expected a string"))
}

fn from_json_at(spec: &MonadSpec, v: &Value, ptr: &str) -> Result<Derivation, SchemaError> {
    let obj = v.as_object().ok_or_else(|| schema(ptr, "expected an object"))?;
    for key in obj.keys() {
        if !matches!(key.as_str(), "rule" | "env" | "subject" | "type" | "table" | "premises") {
            return Err(schema(ptr, format!("unexpected field '{key}'")));
        }
    }
    let rule_ptr = format!("{ptr}/rule");
    let rule: Rule = string_at(field(obj, "rule", ptr)?, &rule_ptr)?
        .parse()
        .map_err(|e: String| schema(&rule_ptr, e))?;

    let mut env = TypeEnv::new();
    if let Some(e) = obj.get("env") {
        let env_ptr = format!("{ptr}/env");
        let map = e.as_object().ok_or_else(|| schema(&env_ptr, "expected an object"))?;
        for (x, i) in map {
            let p = format!("{env_ptr}/{x}");
            let i = parse_intersection(spec, string_at(i, &p)?).map_err(|e| schema(&p, e.to_string()))?;
            env = env.with(x, i);
        }
    }

    let subj_ptr = format!("{ptr}/subject");
    let subject = parse_printed(string_at(field(obj, "subject", ptr)?, &subj_ptr)?)
        .map_err(|e| schema(&subj_ptr, e.to_string()))?;

    let ty_ptr = format!("{ptr}/type");
    let ty_text = string_at(field(obj, "type", ptr)?, &ty_ptr)?;
    let assigned = match rule {
        Rule::Var | Rule::Abs => parse_value_type(spec, ty_text).map(Assigned::Value),
        Rule::Int => parse_intersection(spec, ty_text).map(Assigned::Intersection),
        Rule::App | Rule::Unit | Rule::Op | Rule::Bot => parse_monadic(spec, ty_text).map(Assigned::Monadic),
    }
    .map_err(|e| schema(&ty_ptr, e.to_string()))?;

    let mut table = Vec::new();
    if let Some(t) = obj.get("table") {
        let t_ptr = format!("{ptr}/table");
        if rule != Rule::App {
            return Err(schema(&t_ptr, "only app nodes carry a table"));
        }
        let arr = t.as_array().ok_or_else(|| schema(&t_ptr, "expected an array"))?;
        for (k, entry) in arr.iter().enumerate() {
            let e_ptr = format!("{t_ptr}/{k}");
            let e = entry.as_object().ok_or_else(|| schema(&e_ptr, "expected an object"))?;
            let from_ptr = format!("{e_ptr}/from");
            let to_ptr = format!("{e_ptr}/to");
            let from = parse_intersection(spec, string_at(field(e, "from", &e_ptr)?, &from_ptr)?)
                .map_err(|e| schema(&from_ptr, e.to_string()))?;
            let to = parse_monadic(spec, string_at(field(e, "to", &e_ptr)?, &to_ptr)?)
                .map_err(|e| schema(&to_ptr, e.to_string()))?;
            table.push((from, to));
        }
    } else if rule == Rule::App {
        return Err(schema(ptr, "app node without a table"));
    }

    let mut premises = Vec::new();
    if let Some(ps) = obj.get("premises") {
        let ps_ptr = format!("{ptr}/premises");
        let arr = ps.as_array().ok_or_else(|| schema(&ps_ptr, "expected an array"))?;
        for (k, p) in arr.iter().enumerate() {
            premises.push(from_json_at(spec, p, &format!("{ps_ptr}/{k}"))?);
        }
    }

    Ok(Derivation {
        rule,
        env,
        subject,
        assigned,
        table,
        premises,
    })
}

/// A self-describing derivation file: monad, mode, and the tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fixture {
    pub spec: MonadSpec,
    pub mode: Mode,
    pub derivation: Derivation,
}

impl Fixture {
    pub fn from_json(v: &Value) -> Result<Fixture, SchemaError> {
        let obj = v.as_object().ok_or_else(|| schema("", "expected an object"))?;
        let monad = string_at(field(obj, "monad", "")?, "/monad")?;
        let spec = MonadSpec::parse(monad).map_err(|e| schema("/monad", e.to_string()))?;
        let mode = match obj.get("mode") {
            Some(m) => string_at(m, "/mode")?.parse().map_err(|e: String| schema("/mode", e))?,
            None => Mode::Finitary,
        };
        let derivation = from_json_at(&spec, field(obj, "derivation", "")?, "/derivation")?;
        Ok(Fixture { spec, mode, derivation })
    }

    pub fn to_json(&self) -> Value {
        json!({
            "monad": self.spec.name,
            "mode": self.mode.to_string(),
            "derivation": self.derivation.to_json(),
        })
    }

    pub fn check(&self) -> Result<(), CheckError> {
        check(&self.spec, &self.derivation, self.mode)
    }
}

impl FromStr for Fixture {
    type Err = SchemaError;

    fn from_str(text: &str) -> Result<Fixture, SchemaError> {
        let v: Value = serde_json::from_str(text).map_err(|e| schema("", format!("invalid JSON: {e}")))?;
        Fixture::from_json(&v)
    }
}
