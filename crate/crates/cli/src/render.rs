//! JSON and plain-text rendering of reports.

use clap::ValueEnum;
use infomech::mechanisms::fmt_sig;
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

/// Renders `value` as pretty JSON, or as a headline followed by one
/// `path = value` line per scalar with numbers at 12 significant digits.
pub fn emit_report<T: Serialize>(value: &T, format: Format, headline: Option<&str>) -> String {
    let v = serde_json::to_value(value).expect("reports serialize to JSON");
    match format {
        Format::Json => serde_json::to_string_pretty(&v).expect("JSON value prints"),
        Format::Text => {
            let mut lines = Vec::new();
            if let Some(h) = headline {
                lines.push(h.to_string());
            }
            flatten("", &v, &mut lines);
            lines.join("\n")
        }
    }
}

fn flatten(path: &str, v: &Value, out: &mut Vec<String>) {
    let join = |key: &str| {
        if path.is_empty() {
            key.to_string()
        } else {
            format!("{path}.{key}")
        }
    };
    match v {
        Value::Object(map) => {
            if map.is_empty() && !path.is_empty() {
                out.push(format!("{path} = {{}}"));
            }
            for (k, x) in map {
                flatten(&join(k), x, out);
            }
        }
        Value::Array(items) => {
            if items.is_empty() {
                out.push(format!("{path} = []"));
            }
            for (i, x) in items.iter().enumerate() {
                flatten(&join(&i.to_string()), x, out);
            }
        }
        Value::Number(n) => {
            let x = n.as_f64().unwrap_or(f64::NAN);
            let s = if n.is_f64() {
                fmt_sig(x)
            } else {
                n.to_string()
            };
            out.push(format!("{path} = {s}"));
        }
        Value::String(s) => out.push(format!("{path} = {s}")),
        Value::Bool(b) => out.push(format!("{path} = {b}")),
        Value::Null => out.push(format!("{path} = null")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use infomech::fixtures;
    use infomech::{revenue_report, EvaluationResult};
    use std::collections::BTreeMap;

    fn numbers(path: &str, v: &Value, out: &mut BTreeMap<String, f64>) {
        match v {
            Value::Object(m) => m.iter().for_each(|(k, x)| {
                numbers(
                    &if path.is_empty() {
                        k.clone()
                    } else {
                        format!("{path}.{k}")
                    },
                    x,
                    out,
                )
            }),
            Value::Array(a) => a
                .iter()
                .enumerate()
                .for_each(|(i, x)| numbers(&format!("{path}.{i}"), x, out)),
            Value::Number(n) => {
                out.insert(path.to_string(), n.as_f64().unwrap());
            }
            _ => {}
        }
    }

    #[test]
    fn separation_headline() {
        let rep = revenue_report(&fixtures::separation()).unwrap();
        let text = emit_report(&rep, Format::Text, Some(&rep.summary_line()));
        assert_eq!(text.lines().next(), Some("Re=0.4 Rc=0.4 Rp=0.5 R=0.5"));
    }

    #[test]
    fn empty_evaluation_is_a_json_object() {
        let text = emit_report(&EvaluationResult::default(), Format::Json, None);
        let v: Value = serde_json::from_str(&text).unwrap();
        assert!(v.is_object());
        assert_eq!(v["types"], Value::Array(vec![]));
    }

    #[test]
    fn text_keeps_every_number_to_twelve_digits() {
        let rep = revenue_report(&fixtures::lockbox()).unwrap();
        let json: Value = serde_json::from_str(&emit_report(&rep, Format::Json, None)).unwrap();
        let mut expected = BTreeMap::new();
        numbers("", &json, &mut expected);
        let text = emit_report(&rep, Format::Text, None);
        let parsed: BTreeMap<String, f64> = text
            .lines()
            .filter_map(|l| l.split_once(" = "))
            .filter_map(|(k, v)| v.parse().ok().map(|x| (k.to_string(), x)))
            .collect();
        assert!(!expected.is_empty());
        for (k, x) in &expected {
            let y = parsed
                .get(k)
                .unwrap_or_else(|| panic!("{k} missing from text"));
            assert!(
                (x - y).abs() <= 1e-11 * x.abs().max(1e-300),
                "{k}: {x} vs {y}"
            );
        }
    }

    #[test]
    fn json_is_deterministic() {
        let rep = revenue_report(&fixtures::separation()).unwrap();
        let a = emit_report(&rep, Format::Json, None);
        let b = emit_report(
            &revenue_report(&fixtures::separation()).unwrap(),
            Format::Json,
            None,
        );
        assert_eq!(a, b);
    }
}
