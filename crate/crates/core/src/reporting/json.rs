//! Canonical JSON: sorted keys, two-space indentation, LF line endings and
//! reals printed with 17 significant digits so every `f64` round-trips.

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use super::ReportingError;
use crate::model::{RankingReport, StabilityReport};

pub const REPORT_SCHEMA: &str = "sepidx-report/1";

/// A report type that can be written as a `sepidx-report/1` document.
pub trait ReportDocument: Serialize + DeserializeOwned {
    const KIND: &'static str;
}

impl ReportDocument for RankingReport {
    const KIND: &'static str = "ranking";
}

impl ReportDocument for StabilityReport {
    const KIND: &'static str = "stability";
}

impl ReportDocument for super::CorrelationSummary {
    const KIND: &'static str = "correlation";
}

/// Serializes any value canonically.
pub fn to_canonical_json<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>, ReportingError> {
    let value = serde_json::to_value(value).map_err(|e| ReportingError::Json(e.to_string()))?;
    Ok(canonical_bytes(&value))
}

/// Writes a report with its schema and kind tags.
pub fn emit_json<T: ReportDocument>(report: &T) -> Vec<u8> {
    let mut value = serde_json::to_value(report).expect("report types serialize to JSON objects");
    let obj = value
        .as_object_mut()
        .expect("report types serialize to JSON objects");
    obj.insert("schema".into(), Value::String(REPORT_SCHEMA.into()));
    obj.insert("kind".into(), Value::String(T::KIND.into()));
    canonical_bytes(&value)
}

/// Parses a document written by [`emit_json`].
pub fn parse_report<T: ReportDocument>(bytes: &[u8]) -> Result<T, ReportingError> {
    let mut value: Value =
        serde_json::from_slice(bytes).map_err(|e| ReportingError::Json(e.to_string()))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| ReportingError::Schema("top level is not an object".into()))?;
    match obj.remove("schema") {
        Some(Value::String(s)) if s == REPORT_SCHEMA => {}
        other => {
            return Err(ReportingError::Schema(format!(
                "expected schema {REPORT_SCHEMA:?}, found {}",
                other.map_or("nothing".to_string(), |v| v.to_string())
            )))
        }
    }
    match obj.remove("kind") {
        Some(Value::String(s)) if s == T::KIND => {}
        other => {
            return Err(ReportingError::Schema(format!(
                "expected kind {:?}, found {}",
                T::KIND,
                other.map_or("nothing".to_string(), |v| v.to_string())
            )))
        }
    }
    serde_json::from_value(value).map_err(|e| ReportingError::Json(e.to_string()))
}

pub fn canonical_bytes(value: &Value) -> Vec<u8> {
    let mut out = String::new();
    write_value(&mut out, value, 0);
    out.push('\n');
    out.into_bytes()
}

fn indent(out: &mut String, level: usize) {
    out.push('\n');
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn write_value(out: &mut String, value: &Value, level: usize) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else {
                out.push_str(&format_real(n.as_f64().unwrap_or(0.0)));
            }
        }
        Value::String(s) => write_string(out, s),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                indent(out, level + 1);
                write_value(out, item, level + 1);
            }
            indent(out, level);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                indent(out, level + 1);
                write_string(out, key);
                out.push_str(": ");
                write_value(out, &map[key], level + 1);
            }
            indent(out, level);
            out.push('}');
        }
    }
}

fn write_string(out: &mut String, s: &str) {
    out.push_str(&serde_json::to_string(s).expect("strings always serialize"));
}

/// Formats a finite real with exactly 17 significant digits, positional
/// for decimal exponents in `-5..17`, scientific otherwise.
pub fn format_real(v: f64) -> String {
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("LowerExp output has an exponent");
    let exp: i32 = exp.parse().expect("LowerExp exponent is an integer");
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    if v == 0.0 {
        return format!("{sign}0.{}", &digits[1..]);
    }
    match exp {
        0..=16 => {
            let split = exp as usize + 1;
            let frac = &digits[split..];
            let frac = if frac.is_empty() { "0" } else { frac };
            format!("{sign}{}.{frac}", &digits[..split])
        }
        -5..=-1 => {
            let zeros = "0".repeat((-exp - 1) as usize);
            format!("{sign}0.{zeros}{digits}")
        }
        _ => format!("{sign}{mantissa}e{exp}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_formatting() {
        assert_eq!(format_real(0.8), "0.80000000000000004");
        assert_eq!(format_real(1.0), "1.0000000000000000");
        assert_eq!(format_real(0.0), "0.0000000000000000");
        assert_eq!(format_real(-2.5), "-2.5000000000000000");
        assert_eq!(format_real(12345.0), "12345.000000000000");
        assert_eq!(format_real(1e-3), "0.0010000000000000000");
        assert_eq!(format_real(1e20), "1.0000000000000000e20");
        assert_eq!(format_real(1e16), "10000000000000000.0");
        assert_eq!(format_real(-3e-9), "-3.0000000000000000e-9");
    }

    #[test]
    fn formatted_reals_round_trip() {
        for v in [0.1, 1.0 / 3.0, 0.335, 5e-324, f64::MAX, -1e-7, 123456.789, 0.94] {
            let s = format_real(v);
            let back: f64 = serde_json::from_str(&s).unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{s}");
        }
    }

    #[test]
    fn keys_are_sorted_and_layout_fixed() {
        let v: Value = serde_json::json!({"b": [], "a": {"z": 1, "y": [0.5]}, "c": "x"});
        let text = String::from_utf8(canonical_bytes(&v)).unwrap();
        assert_eq!(
            text,
            "{\n  \"a\": {\n    \"y\": [\n      0.50000000000000000\n    ],\n    \"z\": 1\n  },\n  \"b\": [],\n  \"c\": \"x\"\n}\n"
        );
    }
}
