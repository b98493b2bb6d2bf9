//! CSV and JSON report writers.
//!
//! Numbers print in their shortest round-trip form with a trailing `.0` on
//! integral values; infinities print as `inf` and missing values as `NA`.

use std::io::Write;

use serde_json::{json, Map, Value};

use stopbound_core::{Error, Result};

use crate::run::{BoundRow, Command, Report, SimulationRecord, ValidatorRow};

pub const BOUND_COLUMNS: [&str; 10] = [
    "scenario",
    "theorem",
    "direction",
    "value",
    "applicable",
    "mc_mean",
    "mc_stderr",
    "verdict",
    "config_hash",
    "seed",
];

pub const VALIDATOR_COLUMNS: [&str; 12] = [
    "scenario",
    "validator",
    "check",
    "pass",
    "lhs",
    "rhs",
    "margin",
    "stderr",
    "trials",
    "witness",
    "config_hash",
    "seed",
];

pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        return "NA".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf" } else { "-inf" }.into();
    }
    let a = v.abs();
    let s = if a != 0.0 && !(1e-5..1e16).contains(&a) { format!("{v:e}") } else { format!("{v}") };
    if s.contains(['.', 'e']) {
        s
    } else {
        format!("{s}.0")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), fmt_num)
}

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::Config(format!("cannot write report: {e}"))
}

fn bound_record(r: &BoundRow) -> Vec<String> {
    vec![
        r.scenario.clone(),
        r.report.theorem.to_string(),
        r.report.direction.as_str().into(),
        fmt_opt(r.report.value),
        if r.applicable() { "applicable" } else { "inapplicable" }.into(),
        fmt_opt(r.mc.map(|e| e.mean)),
        fmt_opt(r.mc.map(|e| e.stderr)),
        r.verdict.as_str().into(),
        r.config_hash.clone(),
        r.seed.to_string(),
    ]
}

fn validator_record(r: &ValidatorRow) -> Vec<String> {
    let o = &r.outcome;
    vec![
        r.scenario.clone(),
        r.validator.to_string(),
        o.name.clone(),
        if o.pass { "pass" } else { "fail" }.into(),
        fmt_num(o.lhs),
        fmt_num(o.rhs),
        fmt_num(o.margin),
        fmt_num(o.stderr),
        o.trials.to_string(),
        o.witness.clone().unwrap_or_default(),
        r.config_hash.clone(),
        r.seed.to_string(),
    ]
}

pub fn write_csv<W: Write>(report: &Report, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if report.command == Command::Validate {
        w.write_record(VALIDATOR_COLUMNS).map_err(io_err)?;
        for r in &report.validators {
            w.write_record(validator_record(r)).map_err(io_err)?;
        }
    } else {
        w.write_record(BOUND_COLUMNS).map_err(io_err)?;
        for r in &report.bounds {
            w.write_record(bound_record(r)).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

/// JSON has no infinities, so non-finite values become strings.
fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::String(fmt_num(v))
    }
}

fn opt(v: Option<f64>) -> Value {
    v.map_or(Value::Null, num)
}

fn bound_json(r: &BoundRow) -> Value {
    let diagnostics: Map<String, Value> = r.report.diagnostics.iter().map(|(k, v)| (k.clone(), num(*v))).collect();
    let assumptions: Vec<Value> =
        r.report.assumptions.iter().map(|a| json!({ "id": a.id, "status": a.status, "note": a.note })).collect();
    json!({
        "scenario": r.scenario,
        "theorem": r.report.theorem.as_str(),
        "direction": r.report.direction.as_str(),
        "value": opt(r.report.value),
        "applicable": r.applicable(),
        "mc_mean": opt(r.mc.map(|e| e.mean)),
        "mc_stderr": opt(r.mc.map(|e| e.stderr)),
        "verdict": r.verdict.as_str(),
        "config_hash": r.config_hash,
        "seed": r.seed,
        "diagnostics": diagnostics,
        "assumptions": assumptions,
        "notes": r.report.notes,
    })
}

fn validator_json(r: &ValidatorRow) -> Value {
    let o = &r.outcome;
    json!({
        "scenario": r.scenario,
        "validator": r.validator.as_str(),
        "check": o.name,
        "pass": o.pass,
        "lhs": num(o.lhs),
        "rhs": num(o.rhs),
        "margin": num(o.margin),
        "stderr": num(o.stderr),
        "trials": o.trials,
        "witness": o.witness,
        "config_hash": r.config_hash,
        "seed": r.seed,
    })
}

fn simulation_json(s: &SimulationRecord) -> Value {
    let m = &s.summary;
    let extras: Map<String, Value> =
        m.extras.iter().map(|(k, e)| (k.clone(), json!({ "mean": num(e.mean), "stderr": num(e.stderr) }))).collect();
    json!({
        "scenario": s.scenario,
        "process": format!("{:?}", s.process).to_lowercase(),
        "mean": num(m.mean),
        "stderr": num(m.stderr),
        "n_runs": m.n_runs,
        "truncated": m.truncated,
        "horizon": num(m.horizon),
        "seed": m.seed,
        "initial_violations": m.initial_violations,
        "discretization": opt(s.discretization),
        "extras": extras,
        "config_hash": s.config_hash,
    })
}

pub fn to_json(report: &Report) -> Value {
    let command = match report.command {
        Command::Bound => "bound",
        Command::Certify => "certify",
        Command::Validate => "validate",
    };
    let rows: Vec<Value> = if report.command == Command::Validate {
        report.validators.iter().map(validator_json).collect()
    } else {
        report.bounds.iter().map(bound_json).collect()
    };
    json!({
        "command": command,
        "rows": rows,
        "simulations": report.simulations.iter().map(simulation_json).collect::<Vec<_>>(),
    })
}

pub fn write_json<W: Write>(report: &Report, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, &to_json(report)).map_err(io_err)?;
    writeln!(out).map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_formatting() {
        assert_eq!(fmt_num(6.0), "6.0");
        assert_eq!(fmt_num(0.125), "0.125");
        assert_eq!(fmt_num(f64::INFINITY), "inf");
        assert_eq!(fmt_num(f64::NAN), "NA");
        assert_eq!(fmt_num(1e300), "1e300");
        assert_eq!(fmt_opt(None), "NA");
    }
}
