//! Text and JSON helpers shared by the subcommands.

use std::fmt::Write;

use iihs_core::channel::{FeedbackChannel, History, Row, RowFamily};
use serde_json::{json, Value};

pub fn f4(x: f64) -> String {
    format!("{x:.4}")
}

pub fn history_names(ch: &FeedbackChannel, h: &History) -> (Vec<String>, Vec<String>) {
    (
        h.secrets.iter().map(|&a| ch.secret_name(a).to_string()).collect(),
        h.observables.iter().map(|&b| ch.observable_name(b).to_string()).collect(),
    )
}

fn seq(v: &[String]) -> String {
    if v.is_empty() {
        "ε".into()
    } else {
        v.join(",")
    }
}

/// `(α^t | β^s)` with ε for empty sequences.
pub fn history_text(ch: &FeedbackChannel, h: &History) -> String {
    let (a, b) = history_names(ch, h);
    format!("({} | {})", seq(&a), seq(&b))
}

fn row_json(names: &[String], row: &Row) -> Value {
    Value::Object(
        names
            .iter()
            .zip(row)
            .map(|(n, p)| (n.clone(), json!(p)))
            .collect(),
    )
}

/// A row family as a JSON list of `{t, secrets, observables, row}`.
pub fn family_json(ch: &FeedbackChannel, fam: &RowFamily, over_secrets: bool) -> Value {
    let names = if over_secrets { &ch.secrets } else { &ch.observables };
    let mut out = Vec::new();
    for (i, level) in fam.iter().enumerate() {
        for (h, row) in level {
            let (a, b) = history_names(ch, h);
            out.push(json!({
                "t": i + 1,
                "secrets": a,
                "observables": b,
                "row": row_json(names, row),
            }));
        }
    }
    Value::Array(out)
}

pub fn family_text(out: &mut String, ch: &FeedbackChannel, fam: &RowFamily, over_secrets: bool) {
    let names = if over_secrets { &ch.secrets } else { &ch.observables };
    for (i, level) in fam.iter().enumerate() {
        for (h, row) in level {
            let cells: Vec<String> = names
                .iter()
                .zip(row)
                .map(|(n, p)| format!("{n}={}", f4(*p)))
                .collect();
            let _ = writeln!(out, "t={} {:32} {}", i + 1, history_text(ch, h), cells.join(" "));
        }
    }
}

pub fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_decimal_text() {
        assert_eq!(f4(0.16084), "0.1608");
        assert_eq!(f4(1.0), "1.0000");
    }

    #[test]
    fn pretty_ends_with_newline() {
        assert_eq!(pretty(&json!({"a": 1})), "{\n  \"a\": 1\n}\n");
    }
}
