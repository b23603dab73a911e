//! Evaluation-guided type inference.
//!
//! The term is run first; the recorded trace is then replayed backwards.
//! Values in the last state are typed `eta(0)` (non-values get `bot` in
//! infinitary mode), and each earlier support element gets a derivation
//! rebuilt from the derivations of its reducts:
//!
//! * a value keeps its reduct's derivation;
//! * a beta-redex `(\x.b) w` is typed by anti-substitution: the body is
//!   walked in parallel with the derivation of `b{x:=w}`, and the types the
//!   copies of `w` received are collected into the intersection for `x`;
//! * `op(t1..tn)` reuses the derivations of the `ti`;
//! * `v s` with `s` a computation merges the `app` nodes of the reducts
//!   `v u` into one table and recurses on `s`.
//!
//! In infinitary mode two reducts may ask for the same intersection with
//! different result types (the same subterm seen at different depths). The
//! replay is then repeated with every beta step adding a distinct tag type
//! `J -> bot` to its intersection, which keeps table keys apart.

use std::collections::BTreeMap;

use serde_json::{json, Value};

use crate::derivation::{check, CheckError, Derivation, Mode, MonadicDerivation, Rule};
use crate::monad::{format_observation, MonadSpec, MonadicElement, Observation};
use crate::semantics::{run, run_from, step, values_only, SemanticsError, Trace};
use crate::syntax::{substitute, Term};
use crate::types::{format_monadic, Intersection, MonadicType, TypeEnv, ValueType};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum InferError {
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error("not finitely convergent within fuel {fuel}")]
    NotConvergent { fuel: usize },
    #[error("erasing operation {0} cannot be typed in finitary mode")]
    Erasing(String),
    #[error("conflicting table entries for {key}: {first} and {second}")]
    Conflict { key: String, first: String, second: String },
    #[error("environment [{target}] does not extend [{original}]")]
    NotAnExtension { original: String, target: String },
    #[error("inferred derivation fails its own check: {0}")]
    SelfCheck(CheckError),
    #[error("internal inference error: {0}")]
    Internal(String),
}

/// The result of [`infer`].
#[derive(Clone, Debug)]
pub struct Inference {
    pub derivation: Derivation,
    pub ty: MonadicType,
    pub obs: Observation,
    /// Number of reduction steps replayed.
    pub fuel_used: usize,
    pub mode: Mode,
    /// Whether the run reached a state supported by values only.
    pub stabilized: bool,
    /// Whether tag types were needed to separate table keys.
    pub tagged: bool,
}

impl Inference {
    pub fn to_json(&self) -> Value {
        json!({
            "type": format_monadic(&self.ty),
            "obs": format_observation(&self.obs),
            "derivation": self.derivation.to_json(),
            "fuel_used": self.fuel_used,
            "mode": self.mode.to_string(),
            "stabilized": self.stabilized,
        })
    }
}

/// Derivations for every support element of one state of a trace.
#[derive(Clone, Debug)]
pub struct DerivationFamily {
    pub state: MonadicElement<Term>,
    pub derivations: BTreeMap<Term, Derivation>,
}

impl DerivationFamily {
    pub fn get(&self, t: &Term) -> Option<&Derivation> {
        self.derivations.get(t)
    }

    /// The state's type: each branch weighted by its element's type.
    pub fn assemble(&self) -> MonadicType {
        self.state.bind(|t| {
            self.derivations
                .get(t)
                .and_then(Derivation::monadic)
                .cloned()
                .unwrap_or_default()
        })
    }

    /// One premise per branch, in canonical order.
    pub fn monadic_derivation(&self, spec: &MonadSpec) -> MonadicDerivation {
        let premises = self
            .state
            .branches()
            .iter()
            .map(|b| self.derivations[&b.payload].clone())
            .collect();
        MonadicDerivation::new(spec, self.state.clone(), premises)
    }
}

/// Infers `|- t : M` with `obs M` equal to the observation after `fuel`
/// steps (infinitary) or to the final observation (finitary).
pub fn infer(spec: &MonadSpec, t: &Term, fuel: usize, mode: Mode) -> Result<Inference, InferError> {
    if mode == Mode::Finitary {
        reject_erasing(spec, t)?;
    }
    let trace = run(spec, t, fuel)?;
    let stabilized = trace.converged_at.is_some();
    if mode == Mode::Infinitary && fuel == 0 {
        let derivation = Derivation::bot(TypeEnv::new(), t.clone());
        return finish(spec, derivation, MonadicElement::empty(), 0, mode, stabilized, false);
    }
    let (family, tagged) = replay(spec, &trace, mode)?;
    let derivation = family.derivations[t].clone();
    let expected = match mode {
        Mode::Finitary => trace.final_state().collapse(),
        Mode::Infinitary => values_only(trace.final_state()).collapse(),
    };
    finish(spec, derivation, expected, trace.last_index(), mode, stabilized, tagged)
}

fn finish(
    spec: &MonadSpec,
    derivation: Derivation,
    expected: Observation,
    fuel_used: usize,
    mode: Mode,
    stabilized: bool,
    tagged: bool,
) -> Result<Inference, InferError> {
    check(spec, &derivation, mode).map_err(InferError::SelfCheck)?;
    let ty = derivation.monadic().cloned().unwrap_or_default();
    let obs = ty.collapse();
    if obs != expected {
        return Err(InferError::Internal(format!(
            "observation {} differs from the run's {}",
            format_observation(&obs),
            format_observation(&expected)
        )));
    }
    Ok(Inference {
        derivation,
        ty,
        obs,
        fuel_used,
        mode,
        stabilized,
        tagged,
    })
}

/// Infers a derivation for every branch of a monadic computation.
pub fn infer_monadic(
    spec: &MonadSpec,
    e: &MonadicElement<Term>,
    fuel: usize,
    mode: Mode,
) -> Result<MonadicDerivation, InferError> {
    if mode == Mode::Finitary {
        for t in e.support() {
            reject_erasing(spec, &t)?;
        }
    }
    let trace = run_from(spec, e.clone(), fuel)?;
    if mode == Mode::Infinitary && fuel == 0 {
        let premises = e
            .branches()
            .iter()
            .map(|b| Derivation::bot(TypeEnv::new(), b.payload.clone()))
            .collect();
        return Ok(MonadicDerivation::new(spec, e.clone(), premises));
    }
    let (family, _) = replay(spec, &trace, mode)?;
    for d in family.derivations.values() {
        check(spec, d, mode).map_err(InferError::SelfCheck)?;
    }
    Ok(family.monadic_derivation(spec))
}

/// Infers the derivation family of the state one step after `t`.
pub fn infer_successor(spec: &MonadSpec, t: &Term, fuel: usize, mode: Mode) -> Result<MonadicDerivation, InferError> {
    let e = step(spec, t)?;
    infer_monadic(spec, &e, fuel, mode)
}

/// Re-types `d` under a larger environment.
pub fn weaken(d: &Derivation, env: &TypeEnv) -> Result<Derivation, InferError> {
    if !d.env.is_sub_env(env) {
        return Err(InferError::NotAnExtension {
            original: d.env.to_string(),
            target: env.to_string(),
        });
    }
    Ok(d.with_env(env))
}

fn reject_erasing(spec: &MonadSpec, t: &Term) -> Result<(), InferError> {
    match t {
        Term::Var(_) => Ok(()),
        Term::Lam(_, b) => reject_erasing(spec, b),
        Term::App(f, a) => {
            reject_erasing(spec, f)?;
            reject_erasing(spec, a)
        }
        Term::Op(sym, args) => {
            let effect = spec.resolve(sym).map_err(SemanticsError::from)?;
            if effect.is_erasing() {
                return Err(InferError::Erasing(sym.to_string()));
            }
            args.iter().try_for_each(|a| reject_erasing(spec, a))
        }
    }
}

/// Replays the whole trace, retrying with tags on a table conflict in
/// infinitary mode.
fn replay(spec: &MonadSpec, trace: &Trace, mode: Mode) -> Result<(DerivationFamily, bool), InferError> {
    match Replay::new(spec, mode, false).run(trace) {
        Err(InferError::Conflict { .. }) if mode == Mode::Infinitary => {
            Ok((Replay::new(spec, mode, true).run(trace)?, true))
        }
        other => Ok((other?, false)),
    }
}

struct Replay<'a> {
    spec: &'a MonadSpec,
    mode: Mode,
    tagging: bool,
    next_tag: usize,
    /// `bits[k]` is a distinct value type used to build tags.
    bits: Vec<ValueType>,
}

impl<'a> Replay<'a> {
    fn new(spec: &'a MonadSpec, mode: Mode, tagging: bool) -> Self {
        Replay {
            spec,
            mode,
            tagging,
            next_tag: 0,
            bits: Vec::new(),
        }
    }

    fn run(&mut self, trace: &Trace) -> Result<DerivationFamily, InferError> {
        let last = trace.last_index();
        let final_state = trace.final_state();
        let mut derivations = BTreeMap::new();
        for t in final_state.support() {
            let d = if t.is_value() {
                value_seed(self.spec, &t)
            } else if self.mode == Mode::Infinitary {
                Derivation::bot(TypeEnv::new(), t.clone())
            } else {
                return Err(InferError::NotConvergent { fuel: last });
            };
            derivations.insert(t, d);
        }
        for i in (0..last).rev() {
            let mut earlier = BTreeMap::new();
            for s in trace.layers[i].entries.keys() {
                let d = self.expand(s, &derivations)?;
                earlier.insert(s.clone(), d);
            }
            derivations = earlier;
        }
        Ok(DerivationFamily {
            state: trace.initial().clone(),
            derivations,
        })
    }

    fn bot_or_missing(&self, t: &Term) -> Result<Derivation, InferError> {
        match self.mode {
            Mode::Infinitary => Ok(Derivation::bot(TypeEnv::new(), t.clone())),
            Mode::Finitary => Err(InferError::Internal(format!("no derivation for reduct {t}"))),
        }
    }

    fn lookup(&self, fam: &BTreeMap<Term, Derivation>, t: &Term) -> Result<Derivation, InferError> {
        match fam.get(t) {
            Some(d) => Ok(d.clone()),
            None => self.bot_or_missing(t),
        }
    }

    /// Derivation for the closed term `s`, given derivations for the
    /// support of its one-step reduct.
    fn expand(&mut self, s: &Term, fam: &BTreeMap<Term, Derivation>) -> Result<Derivation, InferError> {
        if s.is_value() {
            return self.lookup(fam, s);
        }
        match s {
            Term::App(f, a) if a.is_value() => {
                let Term::Lam(x, body) = &**f else {
                    return Err(SemanticsError::Stuck(s.to_string()).into());
                };
                let reduct = substitute(body, x, a);
                let d = self.lookup(fam, &reduct)?;
                if d.rule == Rule::Bot {
                    return Ok(Derivation::bot(TypeEnv::new(), s.clone()));
                }
                self.expand_beta(x, body, a, &d)
            }
            Term::App(v, a) => self.expand_context(s, v, a, fam),
            Term::Op(sym, args) => {
                let mut premises = Vec::new();
                for t in args {
                    premises.push(self.lookup(fam, t)?);
                }
                if premises.iter().all(|p| p.rule == Rule::Bot) {
                    return Ok(Derivation::bot(TypeEnv::new(), s.clone()));
                }
                Derivation::op(self.spec, TypeEnv::new(), sym.clone(), premises).map_err(InferError::Internal)
            }
            _ => Err(SemanticsError::Stuck(s.to_string()).into()),
        }
    }

    /// `v a` with `a` a computation: merge the tables of the reducts
    /// `v u` and rebuild the argument's derivation from the `u`s.
    fn expand_context(
        &mut self,
        s: &Term,
        v: &Term,
        a: &Term,
        fam: &BTreeMap<Term, Derivation>,
    ) -> Result<Derivation, InferError> {
        let inner_reducts = step(self.spec, a)?.support();
        let mut inner = BTreeMap::new();
        let mut table: BTreeMap<Intersection, (MonadicType, Derivation)> = BTreeMap::new();
        for u in inner_reducts {
            let whole = Term::App(Box::new(v.clone()), Box::new(u.clone()));
            let d = self.lookup(fam, &whole)?;
            match d.rule {
                Rule::Bot => {
                    inner.insert(u.clone(), Derivation::bot(TypeEnv::new(), u));
                }
                Rule::App => {
                    let n = d.table.len();
                    for ((key, m), p) in d.table.iter().zip(&d.premises[..n]) {
                        match table.get(key) {
                            Some((m0, _)) if m0 != m => {
                                return Err(InferError::Conflict {
                                    key: key.to_string(),
                                    first: format_monadic(m0),
                                    second: format_monadic(m),
                                })
                            }
                            Some(_) => {}
                            None => {
                                table.insert(key.clone(), (m.clone(), p.clone()));
                            }
                        }
                    }
                    inner.insert(u, d.premises[n].clone());
                }
                other => return Err(InferError::Internal(format!("reduct {whole} typed by {other}"))),
            }
        }
        if table.is_empty() {
            return Ok(Derivation::bot(TypeEnv::new(), s.clone()));
        }
        let computation = self.expand(a, &inner)?;
        let value_premises = table.into_values().map(|(_, p)| p).collect();
        Derivation::app(TypeEnv::new(), value_premises, computation).map_err(InferError::Internal)
    }

    /// Types `(\x.body) w` from a derivation `d` of `body{x:=w}`.
    fn expand_beta(&mut self, x: &str, body: &Term, w: &Term, d: &Derivation) -> Result<Derivation, InferError> {
        let mut harvest = BTreeMap::new();
        let walked = anti_substitute(body, x, d, &mut harvest)?;
        if self.tagging {
            let (tag, tag_derivation) = self.tag(w)?;
            harvest.entry(tag).or_insert(tag_derivation);
        }
        let domain: Intersection = harvest.keys().cloned().collect();
        let empty = TypeEnv::new();
        let body_derivation = walked.with_env(&empty.with(x, domain.clone()));
        let abs = Derivation::abs(empty.clone(), x, domain, body_derivation);
        let members = harvest.into_values().map(|p| p.with_env(&empty)).collect();
        let argument = Derivation::unit(self.spec, Derivation::int(empty.clone(), w.clone(), members));
        Derivation::app(empty, vec![abs], argument).map_err(InferError::Internal)
    }

    /// A fresh tag type `J_n -> bot` for the abstraction `w`, where `J_n`
    /// spells `n` in binary over a family of distinct types.
    fn tag(&mut self, w: &Term) -> Result<(ValueType, Derivation), InferError> {
        let Term::Lam(y, c) = w else {
            return Err(InferError::Internal(format!("cannot tag the non-abstraction {w}")));
        };
        let n = self.next_tag;
        self.next_tag += 1;
        let mut domain = Intersection::empty();
        let mut k = 0;
        while n >> k != 0 {
            while self.bits.len() <= k {
                let prev = match self.bits.last() {
                    Some(b) => Intersection::singleton(b.clone()),
                    None => Intersection::empty(),
                };
                self.bits.push(ValueType::arrow(prev, MonadicElement::empty()));
            }
            if (n >> k) & 1 == 1 {
                domain.insert(self.bits[k].clone());
            }
            k += 1;
        }
        let empty = TypeEnv::new();
        let premise = Derivation::bot(empty.with(y, domain.clone()), (**c).clone());
        let d = Derivation::abs(empty, y, domain, premise);
        let Some(ty) = value_type_of(&d) else {
            unreachable!("abs assigns a value type")
        };
        Ok((ty, d))
    }
}

fn value_type_of(d: &Derivation) -> Option<ValueType> {
    match &d.assigned {
        crate::derivation::Assigned::Value(a) => Some(a.clone()),
        _ => None,
    }
}

/// `|- v : eta(0)`.
pub fn value_seed(spec: &MonadSpec, v: &Term) -> Derivation {
    Derivation::unit(spec, Derivation::int(TypeEnv::new(), v.clone(), Vec::new()))
}

/// Walks `body` in parallel with `d`, a derivation of `body{x:=w}` for a
/// closed abstraction `w`. Returns a derivation of `body` (environments to
/// be rebuilt by the caller) and collects the arrow types given to the
/// substituted copies of `w`.
fn anti_substitute(
    body: &Term,
    x: &str,
    d: &Derivation,
    harvest: &mut BTreeMap<ValueType, Derivation>,
) -> Result<Derivation, InferError> {
    let mismatch = || InferError::Internal(format!("derivation of {} does not follow {body}", d.subject));
    if d.rule == Rule::Bot {
        return Ok(Derivation::bot(TypeEnv::new(), body.clone()));
    }
    if !body.free_vars().contains(x) {
        let mut out = d.clone();
        out.subject = body.clone();
        return Ok(out);
    }
    let sub_bodies: Vec<&Term> = match (body, d.rule) {
        (Term::Var(_), Rule::Abs) => {
            let a = value_type_of(d).ok_or_else(mismatch)?;
            harvest.entry(a.clone()).or_insert_with(|| d.clone());
            return Ok(Derivation::var(TypeEnv::new(), x, a));
        }
        (_, Rule::Int) | (_, Rule::Unit) => vec![body; d.premises.len()],
        (Term::Lam(_, b), Rule::Abs) => vec![b],
        (Term::App(f, a), Rule::App) => {
            let mut v = vec![&**f; d.table.len()];
            v.push(a);
            v
        }
        (Term::Op(_, args), Rule::Op) => args.iter().collect(),
        _ => return Err(mismatch()),
    };
    if sub_bodies.len() != d.premises.len() {
        return Err(mismatch());
    }
    let premises = sub_bodies
        .into_iter()
        .zip(&d.premises)
        .map(|(b, p)| anti_substitute(b, x, p, harvest))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Derivation {
        rule: d.rule,
        env: TypeEnv::new(),
        subject: body.clone(),
        assigned: d.assigned.clone(),
        table: d.table.clone(),
        premises,
    })
}
