mod common;

use common::{fixture_text, FIGURES, MUTATIONS};
use moncbv::derivation::{check, Derivation, Fixture, Mode, Rule};
use moncbv::monad::{format_observation, MonadSpec};
use serde_json::Value;

fn load(name: &str) -> Fixture {
    fixture_text(name)
        .parse::<Fixture>()
        .unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn bots(d: &Derivation) -> usize {
    usize::from(d.rule == Rule::Bot) + d.premises.iter().map(bots).sum::<usize>()
}

#[test]
fn bundled_figures_check() {
    for name in FIGURES {
        let f = load(name);
        assert_eq!(f.check(), Ok(()), "{name}");
    }
}

#[test]
fn bundled_figures_round_trip() {
    for name in FIGURES.iter().chain(MUTATIONS.iter().map(|(n, _)| n)) {
        let raw: Value = serde_json::from_str(&fixture_text(name)).unwrap();
        assert_eq!(load(name).to_json(), raw, "{name}");
    }
}

#[test]
fn mutations_are_rejected_with_a_path() {
    for (name, path) in MUTATIONS {
        let err = load(name).check().expect_err(name);
        assert_eq!(err.path, path, "{name}: {err}");
        assert!(err.to_string().starts_with(&format!("at {path} ")), "{err}");
    }
}

#[test]
fn root_type_mutation_is_blamed_on_the_root_op() {
    let err = load("mutation_root_type").check().unwrap_err();
    assert_eq!(err.rule, Rule::Op);
}

#[test]
fn infinitary_figure_is_rejected_in_finitary_mode() {
    let f = load("fig5");
    assert_eq!(f.mode, Mode::Infinitary);
    let err = check(&f.spec, &f.derivation, Mode::Finitary).unwrap_err();
    assert_eq!(err.rule, Rule::Bot);
}

#[test]
fn finitary_figures_contain_no_bot() {
    for name in FIGURES {
        let f = load(name);
        if f.mode == Mode::Finitary {
            assert_eq!(bots(&f.derivation), 0, "{name}");
        } else {
            assert!(bots(&f.derivation) > 0, "{name}");
        }
    }
}

#[test]
fn figure_types_observe_the_expected_outcomes() {
    let expected = [
        ("fig1", "1"),
        ("fig3", "1*(ab)"),
        ("fig4", "1/2*(2) + 1/2*(3)"),
        ("fig5", "1/2"),
    ];
    for (name, obs) in expected {
        let f = load(name);
        let m = f.derivation.monadic().expect("root is a computation");
        assert_eq!(format_observation(&m.collapse()), obs, "{name}");
    }
}

#[test]
fn malformed_rule_name_is_a_schema_error() {
    let mut raw: Value = serde_json::from_str(&fixture_text("fig1")).unwrap();
    raw["derivation"]["premises"][0]["rule"] = Value::from("lam");
    let err = Fixture::from_json(&raw).unwrap_err();
    assert_eq!(err.pointer, "/derivation/premises/0/rule");
}

#[test]
fn unknown_monad_is_a_schema_error() {
    let mut raw: Value = serde_json::from_str(&fixture_text("fig1")).unwrap();
    raw["monad"] = Value::from("state");
    assert_eq!(Fixture::from_json(&raw).unwrap_err().pointer, "/monad");
}

#[test]
fn derivation_json_round_trips_under_its_monad() {
    let f = load("fig4");
    let back = Derivation::from_json(&MonadSpec::cost_multidist(), &f.derivation.to_json()).unwrap();
    assert_eq!(back, f.derivation);
}
