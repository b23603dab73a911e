//! Monad laws and algebraicity, at the level of elements (payloads are
//! small integers) and at the level of monadic types.

use std::collections::BTreeMap;

use moncbv::monad::{Branch, Discipline, Grade, GradeKind, MonadSpec, MonadicElement};
use moncbv::rational::from_ratio;
use moncbv::syntax::OpSym;
use moncbv::types::{type_bind, type_op, Intersection, MonadicType, ValueType};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

pub fn grade(spec: &MonadSpec) -> BoxedStrategy<Grade> {
    match &spec.grade_kind {
        GradeKind::Trivial => Just(Grade::Trivial).boxed(),
        GradeKind::Cost => (0u64..4).prop_map(Grade::Cost).boxed(),
        GradeKind::Words(alpha) => {
            let letters: Vec<char> = match alpha {
                Some(a) => a.iter().copied().collect(),
                None => vec!['a', 'b'],
            };
            proptest::collection::vec(proptest::sample::select(letters), 0..3)
                .prop_map(|cs| Grade::Word(cs.into_iter().collect()))
                .boxed()
        }
    }
}

/// Elements respecting the monad's discipline.
pub fn element<X: Ord + Clone + std::fmt::Debug + 'static>(
    spec: &MonadSpec,
    payload: BoxedStrategy<X>,
) -> BoxedStrategy<MonadicElement<X>> {
    let g = grade(spec);
    match spec.discipline {
        Discipline::Single => proptest::option::of((g, payload))
            .prop_map(|o| {
                MonadicElement::from_branches(
                    o.into_iter()
                        .map(|(grade, payload)| Branch {
                            weight: from_ratio(1, 1),
                            grade,
                            payload,
                        })
                        .collect(),
                )
            })
            .boxed(),
        Discipline::Counting => proptest::collection::vec((g, payload), 0..4)
            .prop_map(|v| {
                MonadicElement::from_branches(
                    v.into_iter()
                        .map(|(grade, payload)| Branch {
                            weight: from_ratio(1, 1),
                            grade,
                            payload,
                        })
                        .collect(),
                )
            })
            .boxed(),
        Discipline::Probabilistic => (proptest::collection::vec((1i64..4, g, payload), 0..4), 0i64..3)
            .prop_map(|(v, extra)| {
                let den: i64 = v.iter().map(|(n, _, _)| n).sum::<i64>() + extra;
                MonadicElement::from_branches(
                    v.into_iter()
                        .map(|(n, grade, payload)| Branch {
                            weight: from_ratio(n, den),
                            grade,
                            payload,
                        })
                        .collect(),
                )
            })
            .boxed(),
    }
}

/// Operation symbols available in the monad.
pub fn op(spec: &MonadSpec) -> Option<BoxedStrategy<(OpSym, usize)>> {
    let mut options: Vec<BoxedStrategy<(OpSym, usize)>> = Vec::new();
    for name in spec.ops.keys() {
        match name.as_str() {
            "tick" => options.push(Just((OpSym::Named("tick".into()), 1)).boxed()),
            "amb" => options.push(Just((OpSym::Named("amb".into()), 2)).boxed()),
            "choice" => options.push(
                proptest::sample::select(vec![1i64, 2, 3])
                    .prop_map(|n| (OpSym::Choice(from_ratio(n, 4)), 2))
                    .boxed(),
            ),
            "out" => options.push(
                proptest::sample::select(vec!["a", "b", "ab"])
                    .prop_map(|w| (OpSym::Out(w.into()), 1))
                    .boxed(),
            ),
            _ => {}
        }
    }
    if options.is_empty() {
        None
    } else {
        Some(proptest::strategy::Union::new(options).boxed())
    }
}

/// A law checked over `cases` random instances for one monad.
pub type Law = fn(&MonadSpec, u32) -> Result<(), String>;

pub fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

fn finish(r: Result<(), proptest::test_runner::TestError<impl std::fmt::Debug>>) -> Result<(), String> {
    r.map_err(|e| e.to_string())
}

fn ensure(ok: bool, what: &str) -> Result<(), TestCaseError> {
    if ok {
        Ok(())
    } else {
        Err(TestCaseError::fail(what.to_string()))
    }
}

const K: u8 = 4;

fn table(spec: &MonadSpec) -> BoxedStrategy<Vec<MonadicElement<u8>>> {
    proptest::collection::vec(element(spec, (0..K).boxed()), K as usize).boxed()
}

pub fn element_left_unit(spec: &MonadSpec, cases: u32) -> Result<(), String> {
    finish(runner(cases).run(&((0..K), table(spec)), |(x, f)| {
        ensure(
            spec.bind(&spec.eta(x), |y| f[*y as usize].clone()) == f[x as usize],
            "left unit",
        )
    }))
}

pub fn element_right_unit(spec: &MonadSpec, cases: u32) -> Result<(), String> {
    finish(runner(cases).run(&element(spec, (0..K).boxed()), |m| {
        ensure(spec.bind(&m, |y| spec.eta(*y)) == m, "right unit")
    }))
}

pub fn element_assoc(spec: &MonadSpec, cases: u32) -> Result<(), String> {
    finish(runner(cases).run(
        &(element(spec, (0..K).boxed()), table(spec), table(spec)),
        |(m, f, g)| {
            let lhs = spec.bind(&spec.bind(&m, |x| f[*x as usize].clone()), |y| g[*y as usize].clone());
            let rhs = spec.bind(&m, |x| spec.bind(&f[*x as usize], |y| g[*y as usize].clone()));
            ensure(lhs == rhs, "associativity")
        },
    ))
}

pub fn element_algebraic(spec: &MonadSpec, cases: u32) -> Result<(), String> {
    let Some(ops) = op(spec) else { return Ok(()) };
    let args = proptest::collection::vec(element(spec, (0..K).boxed()), 2);
    finish(runner(cases).run(&(ops, args, table(spec)), |((sym, arity), args, f)| {
        let args: Vec<_> = args.into_iter().take(arity).collect();
        let lhs = spec.bind(&spec.apply_op(&sym, args.clone()).unwrap(), |x| f[*x as usize].clone());
        let rhs = spec
            .apply_op(
                &sym,
                args.iter().map(|m| spec.bind(m, |x| f[*x as usize].clone())).collect(),
            )
            .unwrap();
        ensure(lhs == rhs, "algebraicity")
    }))
}

/// Four distinct intersections used as type-level payloads.
pub fn intersections(spec: &MonadSpec) -> Vec<Intersection> {
    let a1 = ValueType::arrow(Intersection::empty(), spec.eta(Intersection::empty()));
    let a2 = ValueType::arrow(Intersection::empty(), MonadicElement::empty());
    let a3 = ValueType::arrow(
        Intersection::singleton(a1.clone()),
        spec.eta(Intersection::singleton(a1.clone())),
    );
    vec![
        Intersection::empty(),
        Intersection::singleton(a1.clone()),
        Intersection::singleton(a2),
        [a1, a3].into_iter().collect(),
    ]
}

fn monadic_type(spec: &MonadSpec) -> BoxedStrategy<MonadicType> {
    let pool = intersections(spec);
    element(spec, proptest::sample::select(pool).boxed())
}

fn type_table(spec: &MonadSpec) -> BoxedStrategy<BTreeMap<Intersection, MonadicType>> {
    let keys = intersections(spec);
    proptest::collection::vec(monadic_type(spec), keys.len())
        .prop_map(move |ms| keys.iter().cloned().zip(ms).collect())
        .boxed()
}

pub fn type_left_unit(spec: &MonadSpec, cases: u32) -> Result<(), String> {
    let pool = intersections(spec);
    finish(
        runner(cases).run(&(proptest::sample::select(pool), monadic_type(spec)), |(i, m)| {
            let t = BTreeMap::from([(i.clone(), m.clone())]);
            ensure(type_bind(&spec.eta(i), &t).unwrap() == m, "type-level left unit")
        }),
    )
}

pub fn type_right_unit(spec: &MonadSpec, cases: u32) -> Result<(), String> {
    let t: BTreeMap<_, _> = intersections(spec)
        .into_iter()
        .map(|i| (i.clone(), spec.eta(i)))
        .collect();
    finish(runner(cases).run(&monadic_type(spec), |m| {
        ensure(type_bind(&m, &t).unwrap() == m, "type-level right unit")
    }))
}

pub fn type_assoc(spec: &MonadSpec, cases: u32) -> Result<(), String> {
    finish(runner(cases).run(
        &(monadic_type(spec), type_table(spec), type_table(spec)),
        |(m, t1, t2)| {
            let lhs = type_bind(&type_bind(&m, &t1).unwrap(), &t2).unwrap();
            let composed = t1
                .iter()
                .map(|(i, n)| (i.clone(), type_bind(n, &t2).unwrap()))
                .collect();
            ensure(lhs == type_bind(&m, &composed).unwrap(), "type-level associativity")
        },
    ))
}

pub fn type_algebraic(spec: &MonadSpec, cases: u32) -> Result<(), String> {
    let Some(ops) = op(spec) else { return Ok(()) };
    let args = proptest::collection::vec(monadic_type(spec), 2);
    finish(
        runner(cases).run(&(ops, args, type_table(spec)), |((sym, arity), args, t)| {
            let args: Vec<_> = args.into_iter().take(arity).collect();
            let lhs = type_bind(&type_op(spec, &sym, args.clone()).unwrap(), &t).unwrap();
            let rhs = type_op(spec, &sym, args.iter().map(|m| type_bind(m, &t).unwrap()).collect()).unwrap();
            ensure(lhs == rhs, "type-level algebraicity")
        }),
    )
}

/// Every law at both levels; the error names the failing law.
pub fn all_laws(spec: &MonadSpec, cases: u32) -> Result<(), String> {
    let laws: [(&str, Law); 8] = [
        ("element left unit", element_left_unit),
        ("element right unit", element_right_unit),
        ("element associativity", element_assoc),
        ("element algebraicity", element_algebraic),
        ("type left unit", type_left_unit),
        ("type right unit", type_right_unit),
        ("type associativity", type_assoc),
        ("type algebraicity", type_algebraic),
    ];
    for (name, law) in laws {
        law(spec, cases).map_err(|e| format!("{}: {name}: {e}", spec.name))?;
    }
    Ok(())
}
