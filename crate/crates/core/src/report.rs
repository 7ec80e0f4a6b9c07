//! CSV and JSON emission. Every float is written with 6 significant digits.

use serde::Serialize;
use serde_json::Value;

use crate::error::{MbrError, Result};
use crate::eval::{FalsePruneReport, SummaryTable, SweepReport, SweepRow, TraceRow};

/// `%.6g`-style formatting: 6 significant digits, trailing zeros dropped,
/// scientific notation outside [1e-4, 1e6).
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.5e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let s = format!("{:.*}", decimals, x);
        trim_zeros(&s)
    } else {
        let m = trim_zeros(mantissa);
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// `x` rounded to 6 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.5e}", x).parse().expect("round trip")
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().unwrap());
            *v = serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null);
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Pretty JSON with floats rounded to 6 significant digits.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value).map_err(|e| MbrError::Internal(e.to_string()))?;
    round_value(&mut v);
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| MbrError::Internal(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

fn write_csv(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

pub const SWEEP_COLUMNS: [&str; 10] = [
    "config",
    "method",
    "alpha",
    "beta",
    "trial",
    "mean_calls",
    "mean_pseudo_refs",
    "score",
    "accuracy",
    "rr",
];

fn sweep_row(r: &SweepRow) -> Vec<String> {
    vec![
        r.config.clone(),
        r.method.clone(),
        opt(r.alpha),
        opt(r.beta),
        r.trial.map(|t| t.to_string()).unwrap_or_else(|| "all".into()),
        fmt_num(r.mean_calls),
        fmt_num(r.mean_pseudo_refs),
        opt(r.score),
        fmt_num(r.accuracy),
        fmt_num(r.rr),
    ]
}

/// Per-(config, trial) rows.
pub fn sweep_trials_csv(report: &SweepReport) -> String {
    write_csv(&SWEEP_COLUMNS, report.rows.iter().map(sweep_row))
}

/// One row per config, averaged over trials (`trial` = `all`).
pub fn sweep_aggregate_csv(report: &SweepReport) -> String {
    write_csv(&SWEEP_COLUMNS, report.aggregate.iter().map(sweep_row))
}

pub fn false_prune_csv(cells: &[crate::eval::FalsePruneCell]) -> String {
    write_csv(
        &["alpha", "size", "trial", "rate"],
        cells.iter().map(|c| {
            vec![
                fmt_num(c.alpha),
                c.size.to_string(),
                c.trial.map(|t| t.to_string()).unwrap_or_else(|| "all".into()),
                fmt_num(c.rate),
            ]
        }),
    )
}

pub fn false_prune_trials_csv(report: &FalsePruneReport) -> String {
    false_prune_csv(&report.rows)
}

pub fn false_prune_aggregate_csv(report: &FalsePruneReport) -> String {
    false_prune_csv(&report.aggregate)
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    write_csv(
        &["t", "refs", "mean", "q25", "median", "q75", "runs"],
        rows.iter().map(|r| {
            vec![
                r.t.to_string(),
                r.refs.to_string(),
                fmt_num(r.mean),
                fmt_num(r.q25),
                fmt_num(r.median),
                fmt_num(r.q75),
                r.runs.to_string(),
            ]
        }),
    )
}

/// One row per statistic, one column per configuration.
pub fn summary_csv(table: &SummaryTable) -> String {
    let mut header = vec!["metric"];
    header.extend(table.configs.iter().map(String::as_str));
    write_csv(
        &header,
        table.rows().into_iter().map(|(name, vals)| {
            let mut row = vec![name.to_string()];
            match vals {
                Some(v) => row.extend(v.iter().map(|&x| fmt_num(x))),
                None => row.extend(table.configs.iter().map(|_| String::new())),
            }
            row
        }),
    )
}

/// Fixed-width text rendering of a summary table.
pub fn summary_text(table: &SummaryTable) -> String {
    let mut out = format!("{:<16}", "");
    for c in &table.configs {
        out.push_str(&format!("{c:>18}"));
    }
    out.push('\n');
    for (name, vals) in table.rows() {
        out.push_str(&format!("{name:<16}"));
        for k in 0..table.configs.len() {
            let cell = vals.map(|v| fmt_num(v[k])).unwrap_or_else(|| "-".into());
            out.push_str(&format!("{cell:>18}"));
        }
        out.push('\n');
    }
    out
}
