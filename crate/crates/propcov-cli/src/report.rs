//! Report construction and formatting.
//!
//! Machine output is JSON with every float rounded to 12 significant
//! digits, which makes emission idempotent: parsing and re-emitting a
//! report reproduces it byte for byte. Human output uses 6 significant
//! digits.

use serde_json::Value;

/// Rounds a float to 12 significant digits (machine mode policy).
pub fn round12(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap()
}

/// Applies [`round12`] to every number in a JSON tree.
pub fn round_json(value: &mut Value) {
    match value {
        Value::Number(n) => {
            if let Some(x) = n.as_f64() {
                if n.is_f64() {
                    if let Some(rounded) = serde_json::Number::from_f64(round12(x)) {
                        *value = Value::Number(rounded);
                    }
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_json),
        Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

/// Serializes a report as pretty JSON under the rounding policy.
pub fn emit_json(mut value: Value) -> String {
    round_json(&mut value);
    serde_json::to_string_pretty(&value).expect("report serializes")
}

/// Formats a float with 6 significant digits (human mode policy).
pub fn fmt6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&magnitude) {
        return format!("{x:.5e}");
    }
    let decimals = (5 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // trim trailing zeros but keep at least one digit after the point
    if s.contains('.') {
        let t = s.trim_end_matches('0');
        let t = t.strip_suffix('.').unwrap_or(t);
        t.to_string()
    } else {
        s
    }
}

/// Renders a matrix with aligned 6-digit entries.
pub fn fmt_matrix(rows: &[Vec<f64>], indent: &str) -> String {
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| r.iter().map(|&x| fmt6(x)).collect())
        .collect();
    let width = cells
        .iter()
        .flatten()
        .map(|c| c.len())
        .max()
        .unwrap_or(1);
    cells
        .iter()
        .map(|r| {
            let row = r
                .iter()
                .map(|c| format!("{c:>width$}"))
                .collect::<Vec<_>>()
                .join("  ");
            format!("{indent}{row}")
        })
        .collect::<Vec<_>>()
        .join("\n")
}
