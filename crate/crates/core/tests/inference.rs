mod common;

use common::{closed_term, oracle};
use moncbv::derivation::{check, check_monadic, Derivation, Mode, MonadicDerivation};
use moncbv::inference::{infer, infer_successor, weaken, InferError};
use moncbv::monad::{obs_collapse, Branch, Grade, MonadSpec, MonadicElement};
use moncbv::rational::from_ratio;
use moncbv::semantics::converges;
use moncbv::syntax::{parse, Term};
use moncbv::types::{Intersection, TypeEnv, ValueType};
use proptest::prelude::*;

const K: usize = 15;

fn spec() -> MonadSpec {
    MonadSpec::cost_multidist()
}

fn convergent_term() -> impl Strategy<Value = Term> {
    closed_term().prop_filter("converges within fuel 20", |t| {
        converges(&spec(), t, 20).unwrap().is_some()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn approximate_completeness(t in closed_term()) {
        let spec = spec();
        for k in 0..=K {
            let inf = infer(&spec, &t, k, Mode::Infinitary).unwrap();
            prop_assert_eq!(oracle::flatten(&inf.obs), oracle::obs_n(&Grade::Cost(0), &t, k), "k = {}", k);
            prop_assert_eq!(check(&spec, &inf.derivation, Mode::Infinitary), Ok(()));
        }
    }

    #[test]
    fn inferred_observations_grow_with_fuel(t in closed_term()) {
        let spec = spec();
        let mut prev = infer(&spec, &t, 0, Mode::Infinitary).unwrap().obs;
        for k in 1..=K {
            let next = infer(&spec, &t, k, Mode::Infinitary).unwrap().obs;
            prop_assert!(spec.leq(&prev, &next));
            prev = next;
        }
    }

    #[test]
    fn soundness_round_trip(t in convergent_term()) {
        let spec = spec();
        let inf = infer(&spec, &t, 20, Mode::Finitary).unwrap();
        let result = converges(&spec, &t, 20).unwrap().unwrap();
        prop_assert_eq!(&inf.obs, &obs_collapse(&result));
        prop_assert_eq!(oracle::flatten(&inf.obs), oracle::obs_n(&Grade::Cost(0), &t, 20));
        prop_assert!(!inf.derivation.contains_bot());
    }

    #[test]
    fn subject_reduction(t in convergent_term()) {
        let spec = spec();
        let inf = infer(&spec, &t, 20, Mode::Finitary).unwrap();
        let md = infer_successor(&spec, &t, 20, Mode::Finitary).unwrap();
        prop_assert_eq!(check_monadic(&spec, &md, &inf.ty, Mode::Finitary), Ok(()));
    }

    #[test]
    fn inferred_derivations_round_trip_through_json(t in closed_term()) {
        let spec = spec();
        let d = infer(&spec, &t, 8, Mode::Infinitary).unwrap().derivation;
        prop_assert_eq!(Derivation::from_json(&spec, &d.to_json()).unwrap(), d);
    }
}

#[test]
fn pure_self_application() {
    let spec = MonadSpec::pure();
    let inf = infer(&spec, &parse("(\\x. x x) (I I)").unwrap(), 10, Mode::Finitary).unwrap();
    assert_eq!(inf.obs, spec.eta(()));
    assert_eq!(inf.ty, spec.eta(Intersection::empty()));
}

#[test]
fn cost_and_choice() {
    let spec = spec();
    let t = parse("tick((\\x. tick(x x)) (tick(I I) (+)[1/2] I))").unwrap();
    let inf = infer(&spec, &t, 10, Mode::Finitary).unwrap();
    let half = |c| Branch {
        weight: from_ratio(1, 2),
        grade: Grade::Cost(c),
        payload: (),
    };
    assert_eq!(inf.obs, MonadicElement::from_branches(vec![half(3), half(2)]));
}

#[test]
fn partial_convergence_needs_infinitary_mode() {
    let spec = MonadSpec::multidist();
    let t = parse("(\\x. x x) (I I (+)[1/2] omega)").unwrap();
    let inf = infer(&spec, &t, 20, Mode::Infinitary).unwrap();
    let half = Branch {
        weight: from_ratio(1, 2),
        grade: Grade::Trivial,
        payload: (),
    };
    assert_eq!(inf.obs, MonadicElement::from_branches(vec![half]));
    assert!(inf.derivation.contains_bot());
    assert!(matches!(
        infer(&spec, &t, 20, Mode::Finitary),
        Err(InferError::NotConvergent { .. })
    ));
}

#[test]
fn erasing_ops_are_refused_in_finitary_mode() {
    let spec = MonadSpec::multidist().with_erasing();
    let t = parse("I (+)[0] I").unwrap();
    assert!(matches!(
        infer(&spec, &t, 5, Mode::Finitary),
        Err(InferError::Erasing(_))
    ));
}

#[test]
fn beta_expansion_cases_check() {
    // Identity body, self-application body, and a body without the binder.
    let spec = MonadSpec::pure();
    for src in ["(\\x. x) I", "(\\x. x x) (\\z. z)", "(\\x. I) I"] {
        let inf = infer(&spec, &parse(src).unwrap(), 10, Mode::Finitary).unwrap();
        assert_eq!(check(&spec, &inf.derivation, Mode::Finitary), Ok(()), "{src}");
        let abs = &inf.derivation.premises[0];
        assert_eq!(check(&spec, abs, Mode::Finitary), Ok(()), "{src}");
    }
}

#[test]
fn unused_binder_gets_the_empty_intersection() {
    let spec = MonadSpec::pure();
    let inf = infer(&spec, &parse("(\\x. I) I").unwrap(), 10, Mode::Finitary).unwrap();
    let keys: Vec<_> = inf.derivation.table.iter().map(|(i, _)| i.clone()).collect();
    assert_eq!(keys, vec![Intersection::empty()]);
}

#[test]
fn self_application_harvests_the_identity_arrow() {
    let spec = MonadSpec::pure();
    let inf = infer(&spec, &parse("(\\x. x x) (\\z. z)").unwrap(), 10, Mode::Finitary).unwrap();
    let id = ValueType::arrow(Intersection::empty(), spec.eta(Intersection::empty()));
    let (key, _) = &inf.derivation.table[0];
    assert!(key.contains(&id), "{key}");
}

fn arrows(spec: &MonadSpec) -> (ValueType, ValueType) {
    let a = ValueType::arrow(Intersection::empty(), spec.eta(Intersection::empty()));
    let b = ValueType::arrow(Intersection::singleton(a.clone()), spec.eta(Intersection::empty()));
    (a, b)
}

#[test]
fn weakening_identity_and_enlargement() {
    let spec = MonadSpec::pure();
    let (a, _) = arrows(&spec);
    let d = infer(&spec, &parse("I I").unwrap(), 5, Mode::Finitary)
        .unwrap()
        .derivation;
    assert_eq!(weaken(&d, &d.env).unwrap(), d);
    let env = TypeEnv::new().with("x", Intersection::singleton(a));
    let w = weaken(&d, &env).unwrap();
    assert_eq!(w.env, env);
    assert_eq!(w.assigned, d.assigned);
    assert_eq!(check(&spec, &w, Mode::Finitary), Ok(()));
}

#[test]
fn weakening_merges_branch_environments() {
    let spec = MonadSpec::pure();
    let (a, b) = arrows(&spec);
    let left = Derivation::var(
        TypeEnv::new().with("x", Intersection::singleton(a.clone())),
        "x",
        a.clone(),
    );
    let right = Derivation::var(
        TypeEnv::new().with("x", Intersection::singleton(b.clone())),
        "x",
        b.clone(),
    );
    let both: Intersection = [a, b].into_iter().collect();
    let env = TypeEnv::new().with("x", both);

    let unmerged = Derivation::int(env.clone(), Term::var("x"), vec![left.clone(), right.clone()]);
    assert!(check(&spec, &Derivation::unit(&spec, unmerged), Mode::Finitary).is_err());

    let merged = vec![weaken(&left, &env).unwrap(), weaken(&right, &env).unwrap()];
    let d = Derivation::unit(&spec, Derivation::int(env.clone(), Term::var("x"), merged));
    assert_eq!(check(&spec, &d, Mode::Finitary), Ok(()));

    let narrow = TypeEnv::new();
    assert!(matches!(weaken(&left, &narrow), Err(InferError::NotAnExtension { .. })));
}

#[test]
fn infinitary_ext_g_accepts_a_smaller_target() {
    let spec = MonadSpec::multidist();
    let t = parse("I I (+)[1/2] I I").unwrap();
    let md: MonadicDerivation = infer_successor(&spec, &t, 5, Mode::Infinitary).unwrap();
    let assembled = md.assemble().unwrap();
    let half = |payload: Intersection| Branch {
        weight: from_ratio(1, 2),
        grade: Grade::Trivial,
        payload,
    };
    let target = MonadicElement::from_branches(vec![half(Intersection::empty())]);
    let flat = |m: &MonadicElement<Intersection>| -> oracle::Obs {
        m.branches()
            .iter()
            .map(|b| (b.weight.clone(), b.grade.clone()))
            .collect()
    };
    assert!(oracle::sub_multiset(&flat(&target), &flat(&assembled)));
    assert_eq!(check_monadic(&spec, &md, &target, Mode::Infinitary), Ok(()));
    assert!(check_monadic(&spec, &md, &target, Mode::Finitary).is_err());
    assert!(check_monadic(&spec, &md, &assembled, Mode::Finitary).is_ok());
}

#[test]
fn fuel_zero_is_bottom_in_infinitary_mode() {
    let inf = infer(&spec(), &parse("I I").unwrap(), 0, Mode::Infinitary).unwrap();
    assert!(inf.ty.is_empty());
    assert!(inf.obs.is_empty());
}
