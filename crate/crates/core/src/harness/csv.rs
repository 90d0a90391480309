use std::fs;
use std::path::Path;

use super::experiment::{AggregateRow, AggregateTrace};
use super::HarnessError;

pub const CSV_HEADER: &str = "k,mean_gap,std_gap,mean_dist_sq,bound";

/// Positional notation with 17 significant digits, enough to round-trip
/// any `f64`. Zero prints as `0`; non-finite values as `inf`, `-inf`, `NaN`.
pub fn format_sig17(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    // exponent after rounding to 17 significant digits
    let sci = format!("{x:.16e}");
    let exp: i32 = sci[sci.find('e').expect("scientific form") + 1..].parse().expect("exponent");
    let decimals = (16 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}

pub fn write_csv(trace: &AggregateTrace, path: &Path) -> Result<(), HarnessError> {
    fs::write(path, csv_string(trace)).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })
}

pub(crate) fn csv_string(trace: &AggregateTrace) -> String {
    let mut out = String::with_capacity(64 * (trace.rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &trace.rows {
        out.push_str(&r.k.to_string());
        for v in [r.mean_gap, r.std_gap, r.mean_dist_sq, r.bound] {
            out.push(',');
            out.push_str(&format_sig17(v));
        }
        out.push('\n');
    }
    out
}

pub fn parse_csv(text: &str) -> Result<AggregateTrace, HarnessError> {
    let mut lines = text.split('\n');
    match lines.next() {
        Some(CSV_HEADER) => {}
        other => return Err(HarnessError::Parse(format!("bad header {other:?}"))),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(HarnessError::Parse(format!("line {}: expected 5 fields", i + 2)));
        }
        let num = |s: &str| -> Result<f64, HarnessError> {
            s.parse().map_err(|_| HarnessError::Parse(format!("line {}: bad number `{s}`", i + 2)))
        };
        rows.push(AggregateRow {
            k: fields[0].parse().map_err(|_| HarnessError::Parse(format!("line {}: bad index", i + 2)))?,
            mean_gap: num(fields[1])?,
            std_gap: num(fields[2])?,
            mean_dist_sq: num(fields[3])?,
            bound: num(fields[4])?,
        });
    }
    Ok(AggregateTrace { rows })
}

pub fn read_csv(path: &Path) -> Result<AggregateTrace, HarnessError> {
    let text = fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })?;
    parse_csv(&text)
}
