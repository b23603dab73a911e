//! Monadic small-step semantics.
//!
//! A closed computation reduces in one step to a monadic computation:
//! `E[(\x.t) v] |-> eta(E[t{x:=v}])`, `E[op(t1..tn)] |-> g_op(eta(E[t1])..)`
//! and `v |-> eta(v)`. Multi-step reduction is the Kleisli iteration of the
//! one-step function. [`run`] records every iteration with provenance, which
//! is what type inference replays backwards.

use std::collections::BTreeMap;

use serde_json::{json, Value};

use crate::monad::{obs_collapse, Grade, MonadError, MonadSpec, MonadicElement, Observation};
use crate::rational::{self, Weight};
use crate::syntax::{decompose, decompose_closed, substitute, OpenTermError, Term};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SemanticsError {
    #[error(transparent)]
    Open(#[from] OpenTermError),
    #[error(transparent)]
    Monad(#[from] MonadError),
    #[error("stuck term: {0}")]
    Stuck(String),
}

/// Root reduction `focus >-> e` on a redex or a value.
pub fn step_root(spec: &MonadSpec, focus: &Term) -> Result<MonadicElement<Term>, SemanticsError> {
    match focus {
        Term::App(f, arg) if arg.is_value() => match &**f {
            Term::Lam(x, body) => Ok(spec.eta(substitute(body, x, arg))),
            _ => Err(SemanticsError::Stuck(focus.to_string())),
        },
        Term::Op(sym, args) => {
            let args = args.iter().map(|a| spec.eta(a.clone())).collect();
            Ok(spec.apply_op(sym, args)?)
        }
        v if v.is_value() => Ok(spec.eta(v.clone())),
        _ => Err(SemanticsError::Stuck(focus.to_string())),
    }
}

/// One step of a closed computation.
pub fn step(spec: &MonadSpec, t: &Term) -> Result<MonadicElement<Term>, SemanticsError> {
    let split = decompose(t)?;
    let e = step_root(spec, &split.focus)?;
    Ok(e.map(|u| split.plug(u.clone())))
}

fn step_closed(spec: &MonadSpec, t: &Term) -> Result<MonadicElement<Term>, SemanticsError> {
    let split = decompose_closed(t);
    let e = step_root(spec, &split.focus)?;
    Ok(e.map(|u| split.plug(u.clone())))
}

/// Kleisli extension of [`step`].
pub fn kleisli_step(spec: &MonadSpec, m: &MonadicElement<Term>) -> Result<MonadicElement<Term>, SemanticsError> {
    m.try_bind(|t| step(spec, t))
}

/// The one-step result of a single support element of a state, together
/// with the branch data it sits under in that state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerEntry {
    pub branches: Vec<(Weight, Grade)>,
    pub result: MonadicElement<Term>,
}

/// One Kleisli step, kept un-flattened: every distinct support element of
/// the source state maps to its own one-step result.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Layer {
    pub entries: BTreeMap<Term, LayerEntry>,
}

/// A provenance-tracked reduction sequence `e_0, e_1, ..., e_j`.
#[derive(Clone, Debug)]
pub struct Trace {
    pub spec: MonadSpec,
    /// `states[i]` is `e_i`; `states[0]` is the initial element.
    pub states: Vec<MonadicElement<Term>>,
    /// `layers[i]` takes `states[i]` to `states[i + 1]`.
    pub layers: Vec<Layer>,
    /// Index of the first state supported by values only, if reached.
    pub converged_at: Option<usize>,
}

impl Trace {
    pub fn initial(&self) -> &MonadicElement<Term> {
        &self.states[0]
    }

    pub fn last_index(&self) -> usize {
        self.states.len() - 1
    }

    pub fn final_state(&self) -> &MonadicElement<Term> {
        self.states.last().expect("a trace has at least one state")
    }

    /// `e_n`. Beyond the last recorded state the element is stable only if
    /// the run converged; otherwise `None`.
    pub fn state(&self, n: usize) -> Option<&MonadicElement<Term>> {
        match self.states.get(n) {
            Some(s) => Some(s),
            None if self.converged_at.is_some() => Some(self.final_state()),
            None => None,
        }
    }

    /// Bounded approximant `[[t]]^n`: value branches of `e_n`, with
    /// `[[t]]^0` the empty element.
    pub fn approx(&self, n: usize) -> Option<MonadicElement<Term>> {
        if n == 0 {
            return Some(MonadicElement::empty());
        }
        self.state(n).map(values_only)
    }

    /// Re-flattens every layer and compares with the next state.
    pub fn check_flatten(&self) -> Result<(), String> {
        for (i, layer) in self.layers.iter().enumerate() {
            let src = &self.states[i];
            for s in src.support() {
                if !layer.entries.contains_key(&s) {
                    return Err(format!("layer {i}: support element {s} has no entry"));
                }
            }
            if layer.entries.len() != src.support().len() {
                return Err(format!("layer {i}: entries do not match the support"));
            }
            let flat = src.bind(|s| layer.entries[s].result.clone());
            if flat != self.states[i + 1] {
                return Err(format!("layer {i}: flattening does not reproduce state {}", i + 1));
            }
        }
        Ok(())
    }

    /// JSON dump: one array per layer, one object per branch of the source
    /// state.
    pub fn to_json(&self) -> Value {
        Value::Array(
            self.layers
                .iter()
                .enumerate()
                .map(|(i, layer)| {
                    Value::Array(
                        self.states[i]
                            .branches()
                            .iter()
                            .map(|b| {
                                let entry = &layer.entries[&b.payload];
                                json!({
                                    "source": b.payload.to_string(),
                                    "weight": rational::format(&b.weight),
                                    "grade": grade_json(&b.grade),
                                    "result": term_element_json(&entry.result),
                                })
                            })
                            .collect(),
                    )
                })
                .collect(),
        )
    }
}

fn grade_json(g: &Grade) -> Value {
    match g {
        Grade::Trivial => Value::Null,
        Grade::Word(w) => Value::String(w.clone()),
        Grade::Cost(c) => json!(c),
    }
}

pub fn term_element_json(m: &MonadicElement<Term>) -> Value {
    m.to_json(|t| Value::String(t.to_string()))
}

/// Prints `p*(grade, t) + ...`, or `p*t` for trivial grades.
pub fn format_element(m: &MonadicElement<Term>) -> String {
    if m.is_empty() {
        return "bot".to_string();
    }
    m.branches()
        .iter()
        .map(|b| match b.grade {
            Grade::Trivial => format!("{}*({})", rational::format(&b.weight), b.payload),
            _ => format!("{}*({}, {})", rational::format(&b.weight), b.grade, b.payload),
        })
        .collect::<Vec<_>>()
        .join(" + ")
}

fn all_values(m: &MonadicElement<Term>) -> bool {
    m.branches().iter().all(|b| b.payload.is_value())
}

/// `e >>= phi` where `phi` keeps values and sends other terms to bottom.
pub fn values_only(m: &MonadicElement<Term>) -> MonadicElement<Term> {
    MonadicElement::from_branches(m.branches().iter().filter(|b| b.payload.is_value()).cloned().collect())
}

/// Runs `t` for at most `fuel` Kleisli steps, stopping early once every
/// support element is a value.
pub fn run(spec: &MonadSpec, t: &Term, fuel: usize) -> Result<Trace, SemanticsError> {
    run_from(spec, spec.eta(t.clone()), fuel)
}

/// Like [`run`], starting from a monadic computation.
pub fn run_from(spec: &MonadSpec, initial: MonadicElement<Term>, fuel: usize) -> Result<Trace, SemanticsError> {
    for s in initial.support() {
        let fv = s.free_vars();
        if !fv.is_empty() {
            return Err(OpenTermError(fv).into());
        }
    }
    let mut states = vec![initial];
    let mut layers = Vec::new();
    let mut converged_at = None;
    for i in 0..=fuel {
        let cur = &states[i];
        if all_values(cur) {
            converged_at = Some(i);
            break;
        }
        if i == fuel {
            break;
        }
        let mut layer = Layer::default();
        for b in cur.branches() {
            if let Some(entry) = layer.entries.get_mut(&b.payload) {
                entry.branches.push((b.weight.clone(), b.grade.clone()));
                continue;
            }
            let result = step_closed(spec, &b.payload)?;
            layer.entries.insert(
                b.payload.clone(),
                LayerEntry {
                    branches: vec![(b.weight.clone(), b.grade.clone())],
                    result,
                },
            );
        }
        let next = spec.bind(cur, |s| layer.entries[s].result.clone());
        layers.push(layer);
        states.push(next);
    }
    let trace = Trace {
        spec: spec.clone(),
        states,
        layers,
        converged_at,
    };
    debug_assert!(trace.check_flatten().is_ok(), "{:?}", trace.check_flatten());
    Ok(trace)
}

/// Finitary convergence within `fuel` steps.
pub fn converges(spec: &MonadSpec, t: &Term, fuel: usize) -> Result<Option<MonadicElement<Term>>, SemanticsError> {
    let trace = run(spec, t, fuel)?;
    Ok(trace.converged_at.map(|_| trace.final_state().clone()))
}

/// Approximate semantics `[[t]]^n`.
pub fn approx_sem(spec: &MonadSpec, t: &Term, n: usize) -> Result<MonadicElement<Term>, SemanticsError> {
    let trace = run(spec, t, n)?;
    Ok(trace.approx(n).expect("the run covers n steps"))
}

/// Bounded observation `obs<t>^n`.
pub fn obs_n(spec: &MonadSpec, t: &Term, n: usize) -> Result<Observation, SemanticsError> {
    Ok(obs_collapse(&approx_sem(spec, t, n)?))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ChainStatus {
    /// Every branch reached a value; the chain is constant from `at` on and
    /// its last entry is the exact observation.
    Stabilized { at: usize },
    /// Some branch was still running when fuel ran out; the last entry is
    /// only an approximation.
    FuelExhausted,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObservedChain {
    /// `obs<t>^0, ..., obs<t>^fuel`.
    pub observations: Vec<Observation>,
    pub status: ChainStatus,
}

pub fn observed_chain(spec: &MonadSpec, t: &Term, fuel: usize) -> Result<ObservedChain, SemanticsError> {
    let trace = run(spec, t, fuel)?;
    let observations = (0..=fuel)
        .map(|n| obs_collapse(&trace.approx(n).expect("the run covers every index up to fuel")))
        .collect();
    let status = match trace.converged_at {
        Some(j) => ChainStatus::Stabilized { at: j.max(1) },
        None => ChainStatus::FuelExhausted,
    };
    Ok(ObservedChain { observations, status })
}
