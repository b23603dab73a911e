#![allow(dead_code)]

pub mod laws;
pub mod oracle;

use moncbv::rational::from_ratio;
use moncbv::syntax::{OpSym, Term};
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

/// Untyped shapes; variables are indices resolved against the binders in
/// scope when the shape is closed up.
#[derive(Clone, Debug)]
pub enum Shape {
    Var(usize),
    /// The closed value `\x. x x`.
    Delta,
    Lam(Box<Shape>),
    App(Box<Shape>, Box<Shape>),
    Tick(Box<Shape>),
    Choice(u8, Box<Shape>, Box<Shape>),
}

pub fn shape() -> impl Strategy<Value = Shape> {
    let leaf = prop_oneof![4 => (0usize..4).prop_map(Shape::Var), 1 => Just(Shape::Delta)];
    leaf.prop_recursive(5, 48, 2, |inner| {
        prop_oneof![
            3 => inner.clone().prop_map(|b| Shape::Lam(Box::new(b))),
            4 => (inner.clone(), inner.clone()).prop_map(|(f, a)| Shape::App(Box::new(f), Box::new(a))),
            2 => inner.clone().prop_map(|b| Shape::Tick(Box::new(b))),
            2 => (0u8..3, inner.clone(), inner).prop_map(|(p, l, r)| Shape::Choice(p, Box::new(l), Box::new(r))),
        ]
    })
}

/// Term depth: leaves are 0, every constructor adds one.
pub fn depth(t: &Term) -> usize {
    match t {
        Term::Var(_) => 0,
        Term::Lam(_, b) => 1 + depth(b),
        Term::App(f, a) => 1 + depth(f).max(depth(a)),
        Term::Op(_, args) => 1 + args.iter().map(depth).max().unwrap_or(0),
    }
}

struct Closer {
    scope: Vec<String>,
    fresh: usize,
}

impl Closer {
    fn name(&mut self) -> String {
        self.fresh += 1;
        format!("x{}", self.fresh)
    }

    fn close(&mut self, s: &Shape) -> Term {
        match s {
            Shape::Var(i) => match self.scope.len() {
                0 => {
                    let z = self.name();
                    Term::lam(z.clone(), Term::var(z))
                }
                n => Term::var(self.scope[n - 1 - i % n].clone()),
            },
            Shape::Delta => {
                let x = self.name();
                Term::lam(x.clone(), Term::app(Term::var(x.clone()), Term::var(x)))
            }
            Shape::Lam(b) => {
                let x = self.name();
                self.scope.push(x.clone());
                let body = self.close(b);
                self.scope.pop();
                Term::lam(x, body)
            }
            Shape::App(f, a) => {
                let f = self.close(f);
                let a = self.close(a);
                if f.is_value() {
                    Term::app(f, a)
                } else {
                    // Kernel application needs a value head: evaluate the
                    // head first, then apply it.
                    let g = self.name();
                    Term::app(Term::lam(g.clone(), Term::app(Term::var(g), a)), f)
                }
            }
            Shape::Tick(b) => Term::op(OpSym::Named("tick".into()), vec![self.close(b)]),
            Shape::Choice(p, l, r) => {
                let w = from_ratio(i64::from(*p) + 1, 4);
                Term::op(OpSym::Choice(w), vec![self.close(l), self.close(r)])
            }
        }
    }
}

pub fn close(s: &Shape) -> Term {
    Closer {
        scope: Vec::new(),
        fresh: 0,
    }
    .close(s)
}

/// Closed terms over tick and choice (weights 1/4, 1/2, 3/4), depth <= 6.
pub fn closed_term() -> impl Strategy<Value = Term> {
    shape()
        .prop_map(|s| close(&s))
        .prop_filter("depth <= 6", |t| depth(t) <= 6)
}

/// A deterministic corpus of `n` distinct non-value terms.
pub fn corpus(n: usize, seed: u8) -> Vec<Term> {
    let mut runner = TestRunner::new_with_rng(
        Config {
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::from_seed(RngAlgorithm::ChaCha, &[seed; 32]),
    );
    let strategy = closed_term();
    let mut out = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    while out.len() < n {
        let t = strategy.new_tree(&mut runner).expect("generator").current();
        if !t.is_value() && seen.insert(t.clone()) {
            out.push(t);
        }
    }
    out
}

/// Contents of a bundled fixture file.
pub fn fixture_text(name: &str) -> String {
    let path = format!("{}/../../fixtures/{name}.json", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

pub const FIGURES: [&str; 4] = ["fig1", "fig3", "fig4", "fig5"];

/// Mutation fixtures with the node path each must be rejected at.
pub const MUTATIONS: [(&str, &str); 4] = [
    ("mutation_root_type", "/"),
    ("mutation_bot_finitary", "/premises/1/premises/1"),
    ("mutation_missing_key", "/"),
    ("mutation_int_collapse", "/premises/0"),
];
