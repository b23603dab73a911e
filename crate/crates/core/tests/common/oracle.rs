//! A reference evaluator written independently of the library: paths are
//! enumerated one by one, substitution is naive (only closed values are ever
//! substituted), and observations are plain sorted lists.

use moncbv::monad::{Grade, Observation};
use moncbv::rational::{one, Weight};
use moncbv::syntax::{OpSym, Term};

/// A sorted multiset of `(weight, grade)` pairs.
pub type Obs = Vec<(Weight, Grade)>;

fn mul(a: &Grade, b: &Grade) -> Grade {
    match (a, b) {
        (Grade::Cost(x), Grade::Cost(y)) => Grade::Cost(x + y),
        (Grade::Word(x), Grade::Word(y)) => Grade::Word(format!("{x}{y}")),
        _ => Grade::Trivial,
    }
}

fn subst(t: &Term, x: &str, v: &Term) -> Term {
    match t {
        Term::Var(y) if y == x => v.clone(),
        Term::Var(_) => t.clone(),
        Term::Lam(y, _) if y == x => t.clone(),
        Term::Lam(y, b) => Term::Lam(y.clone(), Box::new(subst(b, x, v))),
        Term::App(f, a) => Term::App(Box::new(subst(f, x, v)), Box::new(subst(a, x, v))),
        Term::Op(s, args) => Term::Op(s.clone(), args.iter().map(|a| subst(a, x, v)).collect()),
    }
}

fn is_value(t: &Term) -> bool {
    matches!(t, Term::Var(_) | Term::Lam(..))
}

fn step(t: &Term, unit: &Grade) -> Vec<(Weight, Grade, Term)> {
    match t {
        Term::App(f, a) if is_value(a) => match &**f {
            Term::Lam(x, b) => vec![(one(), unit.clone(), subst(b, x, a))],
            _ => panic!("stuck: {t}"),
        },
        Term::App(f, a) => step(a, unit)
            .into_iter()
            .map(|(w, g, u)| (w, g, Term::App(f.clone(), Box::new(u))))
            .collect(),
        Term::Op(OpSym::Choice(p), args) => vec![
            (p.clone(), unit.clone(), args[0].clone()),
            (one() - p, unit.clone(), args[1].clone()),
        ],
        Term::Op(OpSym::Out(w), args) => vec![(one(), Grade::Word(w.clone()), args[0].clone())],
        Term::Op(OpSym::Named(n), args) => match n.as_str() {
            "tick" => vec![(one(), Grade::Cost(1), args[0].clone())],
            "amb" => vec![
                (one(), unit.clone(), args[0].clone()),
                (one(), unit.clone(), args[1].clone()),
            ],
            other => match other.strip_prefix("out_") {
                Some(w) => vec![(one(), Grade::Word(w.to_string()), args[0].clone())],
                None => panic!("unknown op {other}"),
            },
        },
        _ => panic!("values do not step"),
    }
}

/// Observation of the value-supported part after `n` steps (empty at 0).
pub fn obs_n(unit: &Grade, t: &Term, n: usize) -> Obs {
    if n == 0 {
        return Vec::new();
    }
    let mut paths = vec![(one(), unit.clone(), t.clone())];
    for _ in 0..n {
        let mut next = Vec::new();
        for (w, g, u) in paths {
            if is_value(&u) {
                next.push((w, g, u));
            } else {
                for (w2, g2, u2) in step(&u, unit) {
                    if w2 != Weight::from_integer(0.into()) {
                        next.push((&w * &w2, mul(&g, &g2), u2));
                    }
                }
            }
        }
        paths = next;
    }
    let mut out: Obs = paths
        .into_iter()
        .filter(|(_, _, u)| is_value(u))
        .map(|(w, g, _)| (w, g))
        .collect();
    out.sort_by(|a, b| (&a.1, &a.0).cmp(&(&b.1, &b.0)));
    out
}

/// The library's observation as a sorted list.
pub fn flatten(o: &Observation) -> Obs {
    let mut out: Obs = o
        .branches()
        .iter()
        .map(|b| (b.weight.clone(), b.grade.clone()))
        .collect();
    out.sort_by(|a, b| (&a.1, &a.0).cmp(&(&b.1, &b.0)));
    out
}

/// Multiset inclusion by counting.
pub fn sub_multiset(a: &Obs, b: &Obs) -> bool {
    a.iter()
        .all(|x| a.iter().filter(|y| *y == x).count() <= b.iter().filter(|y| *y == x).count())
}

pub fn total(o: &Obs) -> Weight {
    o.iter().fold(Weight::from_integer(0.into()), |acc, (w, _)| acc + w)
}
