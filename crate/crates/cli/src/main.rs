//! `moncbv`: evaluate, observe, trace and type effectful λ-terms.
//!
//! Exit codes: 0 on success, 1 on domain failures (rejected derivations,
//! untypable terms), 2 on usage or parse errors.

use std::fs;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use moncbv::derivation::{check, Fixture, Mode};
use moncbv::inference::{infer, InferError};
use moncbv::monad::{format_observation, MonadSpec};
use moncbv::semantics::{format_element, observed_chain, run, term_element_json, ChainStatus};
use moncbv::syntax::{parse, Term};
use moncbv::types::format_monadic;

const FIXTURES: [(&str, &str); 4] = [
    ("fig1", include_str!("../../../fixtures/fig1.json")),
    ("fig3", include_str!("../../../fixtures/fig3.json")),
    ("fig4", include_str!("../../../fixtures/fig4.json")),
    ("fig5", include_str!("../../../fixtures/fig5.json")),
];

#[derive(Parser)]
#[command(
    name = "moncbv",
    version,
    about = "Monadic intersection types for effectful call-by-value"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a term to a value-supported result, if it gets there within fuel.
    Eval(TermArgs),
    /// Print the chain of bounded observations obs<t>^0 .. obs<t>^fuel.
    Observe(TermArgs),
    /// Dump the reduction trace with provenance.
    Trace(TermArgs),
    /// Infer a typing derivation whose type observes the run.
    Infer(TermArgs),
    /// Check a derivation file.
    Check(CheckArgs),
    /// Check and re-infer the bundled example derivations.
    Examples(FormatArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
struct FormatArgs {
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct TermArgs {
    /// Monad selector, e.g. pure, writer:ab, cost*multidist, multidist+erasing.
    #[arg(long, default_value = "pure")]
    monad: String,
    #[arg(long, default_value_t = 50)]
    fuel: usize,
    #[arg(long, default_value = "finitary")]
    mode: Mode,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// The term, or @path to read it from a file.
    term: String,
}

#[derive(Args)]
struct CheckArgs {
    /// Overrides the file's monad.
    #[arg(long)]
    monad: Option<String>,
    /// Overrides the file's mode.
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Derivation file (a leading @ is accepted).
    file: String,
}

struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn domain(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Eval(a) => eval(&a),
        Command::Observe(a) => observe(&a),
        Command::Trace(a) => trace(&a),
        Command::Infer(a) => infer_cmd(&a),
        Command::Check(a) => check_cmd(&a),
        Command::Examples(a) => examples(a.format),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn read_source(arg: &str) -> Result<String, Failure> {
    match arg.strip_prefix('@') {
        Some(path) => fs::read_to_string(path).map_err(|e| usage(format!("cannot read {path}: {e}"))),
        None => Ok(arg.to_string()),
    }
}

fn setup(a: &TermArgs) -> Result<(MonadSpec, Term), Failure> {
    let spec = MonadSpec::parse(&a.monad).map_err(|e| usage(e.to_string()))?;
    let term = parse(&read_source(&a.term)?).map_err(|e| usage(format!("parse error: {e}")))?;
    Ok((spec, term))
}

fn emit(format: Format, text: String, value: Value) {
    match format {
        Format::Text => print!("{text}"),
        Format::Json => println!("{}", serde_json::to_string_pretty(&value).expect("serializable")),
    }
}

fn eval(a: &TermArgs) -> Result<(), Failure> {
    let (spec, t) = setup(a)?;
    let trace = run(&spec, &t, a.fuel).map_err(|e| domain(e.to_string()))?;
    let result = trace.final_state();
    let text = match trace.converged_at {
        Some(j) => format!("converged after {j} step(s)\n{}\n", format_element(result)),
        None => format!(
            "not convergent within fuel {}\nlast state: {}\n",
            a.fuel,
            format_element(result)
        ),
    };
    let value = json!({
        "converged": trace.converged_at.is_some(),
        "steps": trace.last_index(),
        "result": term_element_json(result),
        "obs": format_observation(&result.collapse()),
    });
    emit(a.format, text, value);
    Ok(())
}

fn observe(a: &TermArgs) -> Result<(), Failure> {
    let (spec, t) = setup(a)?;
    let chain = observed_chain(&spec, &t, a.fuel).map_err(|e| domain(e.to_string()))?;
    let mut text = String::new();
    for (k, o) in chain.observations.iter().enumerate() {
        text.push_str(&format!("{k}: {}\n", format_observation(o)));
    }
    let (stabilized, at) = match chain.status {
        ChainStatus::Stabilized { at } => {
            text.push_str(&format!("stabilized at {at}\n"));
            (true, Some(at))
        }
        ChainStatus::FuelExhausted => {
            text.push_str(&format!("not stabilized within fuel {}\n", a.fuel));
            (false, None)
        }
    };
    let value = json!({
        "chain": chain.observations.iter().map(format_observation).collect::<Vec<_>>(),
        "stabilized": stabilized,
        "at": at,
    });
    emit(a.format, text, value);
    Ok(())
}

fn trace(a: &TermArgs) -> Result<(), Failure> {
    let (spec, t) = setup(a)?;
    let trace = run(&spec, &t, a.fuel).map_err(|e| domain(e.to_string()))?;
    let mut text = String::new();
    for (i, s) in trace.states.iter().enumerate() {
        text.push_str(&format!("e{i} = {}\n", format_element(s)));
    }
    let value = json!({
        "states": trace.states.iter().map(term_element_json).collect::<Vec<_>>(),
        "layers": trace.to_json(),
        "converged": trace.converged_at.is_some(),
    });
    emit(a.format, text, value);
    Ok(())
}

fn infer_cmd(a: &TermArgs) -> Result<(), Failure> {
    let (spec, t) = setup(a)?;
    let inf = infer(&spec, &t, a.fuel, a.mode).map_err(|e| match e {
        InferError::Semantics(_) => usage(e.to_string()),
        other => domain(other.to_string()),
    })?;
    let text = format!(
        "type: {}\nobs: {}\nfuel used: {}\nmode: {}\nstabilized: {}\nderivation:\n{}",
        format_monadic(&inf.ty),
        format_observation(&inf.obs),
        inf.fuel_used,
        inf.mode,
        inf.stabilized,
        inf.derivation.pretty()
    );
    emit(a.format, text, inf.to_json());
    Ok(())
}

fn check_cmd(a: &CheckArgs) -> Result<(), Failure> {
    let path = a.file.strip_prefix('@').unwrap_or(&a.file);
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {path}: {e}")))?;
    let raw: Value = serde_json::from_str(&text).map_err(|e| usage(format!("invalid JSON: {e}")))?;
    let mut fixture = match &a.monad {
        Some(m) => {
            let mut raw = raw.clone();
            raw["monad"] = json!(m);
            Fixture::from_json(&raw)
        }
        None => Fixture::from_json(&raw),
    }
    .map_err(|e| usage(e.to_string()))?;
    if let Some(mode) = a.mode {
        fixture.mode = mode;
    }
    let verdict = check(&fixture.spec, &fixture.derivation, fixture.mode);
    let value = json!({
        "ok": verdict.is_ok(),
        "mode": fixture.mode.to_string(),
        "monad": fixture.spec.name,
        "error": verdict.as_ref().err().map(|e| json!({"path": e.path, "rule": e.rule.name(), "message": e.message})),
    });
    match &verdict {
        Ok(()) => emit(a.format, format!("ok ({} mode)\n", fixture.mode), value),
        Err(e) => emit(a.format, format!("rejected ({} mode): {e}\n", fixture.mode), value),
    }
    verdict.map_err(|e| domain(format!("derivation rejected at {}", e.path)))
}

struct ExampleRow {
    name: &'static str,
    monad: String,
    mode: Mode,
    checked: bool,
    inferred: Option<String>,
    expected: String,
    infer_ok: bool,
}

fn run_example(name: &'static str, text: &str) -> Result<ExampleRow, String> {
    let fixture = text.parse::<Fixture>().map_err(|e| e.to_string())?;
    let checked = fixture.check().is_ok()
        && (fixture.mode == Mode::Finitary || check(&fixture.spec, &fixture.derivation, Mode::Finitary).is_err());
    let expected = fixture.derivation.monadic().map(|m| m.collapse()).unwrap_or_default();
    let inferred = infer(&fixture.spec, &fixture.derivation.subject, 50, fixture.mode).ok();
    let infer_ok = inferred.as_ref().is_some_and(|i| i.obs == expected);
    Ok(ExampleRow {
        name,
        monad: fixture.spec.name.clone(),
        mode: fixture.mode,
        checked,
        inferred: inferred.map(|i| format_observation(&i.obs)),
        expected: format_observation(&expected),
        infer_ok,
    })
}

fn examples(format: Format) -> Result<(), Failure> {
    let mut rows = Vec::new();
    for (name, text) in FIXTURES {
        rows.push(run_example(name, text).map_err(|e| domain(format!("{name}: {e}")))?);
    }
    let mark = |b: bool| if b { "pass" } else { "FAIL" };
    let mut text = format!(
        "{:<6} {:<16} {:<11} {:<6} {:<6} {}\n",
        "name", "monad", "mode", "check", "infer", "obs"
    );
    for r in &rows {
        text.push_str(&format!(
            "{:<6} {:<16} {:<11} {:<6} {:<6} {}\n",
            r.name,
            r.monad,
            r.mode.to_string(),
            mark(r.checked),
            mark(r.infer_ok),
            r.inferred.as_deref().unwrap_or("-")
        ));
    }
    let value = Value::Array(
        rows.iter()
            .map(|r| {
                json!({
                    "name": r.name,
                    "monad": r.monad,
                    "mode": r.mode.to_string(),
                    "check": r.checked,
                    "infer": r.infer_ok,
                    "obs": r.inferred,
                    "expected": r.expected,
                })
            })
            .collect(),
    );
    emit(format, text, value);
    if rows.iter().all(|r| r.checked && r.infer_ok) {
        Ok(())
    } else {
        Err(domain("some examples failed"))
    }
}
