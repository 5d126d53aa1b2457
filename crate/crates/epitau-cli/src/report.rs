//! Result reporting: every command prints one JSON document that embeds the
//! configuration and seed it ran under, with floats at 12 significant digits
//! so identical analyses serialize identically.

use epitau::error::{Error, Result};
use epitau::numeric::round_sig;
use serde::Serialize;
use serde_json::Value;

pub const SCHEMA_VERSION: u32 = 1;

/// Round every fractional number in the tree to 12 significant digits;
/// integers pass through exactly.
pub fn round_floats(value: &mut Value) {
    match value {
        Value::Number(n) => {
            if n.is_f64() {
                if let Some(rounded) =
                    n.as_f64().and_then(|f| serde_json::Number::from_f64(round_sig(f, 12)))
                {
                    *value = Value::Number(rounded);
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

fn to_value(label: &str, data: &impl Serialize) -> Result<Value> {
    serde_json::to_value(data)
        .map_err(|e| Error::InvalidInput(format!("cannot serialize {label}: {e}")))
}

/// The standard report document. `seed` is `None` for commands that consume
/// no randomness (the field still appears, as `null`).
pub fn envelope(
    command: &str,
    seed: Option<u64>,
    config: &impl Serialize,
    results: &impl Serialize,
) -> Result<Value> {
    let mut doc = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "seed": seed,
        "config": to_value("config", config)?,
        "results": to_value("results", results)?,
    });
    round_floats(&mut doc);
    Ok(doc)
}

pub fn render_json(doc: &Value) -> String {
    let mut text = serde_json::to_string_pretty(doc).expect("value serialization cannot fail");
    text.push('\n');
    text
}

/// Format one float the way the reports do.
pub fn fmt(v: f64) -> String {
    round_sig(v, 12).to_string()
}

/// Format an optional float; missing values print empty (CSV convention).
pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

/// Build a small CSV from header + rows (for `--output csv`).
pub fn csv_string(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(header).expect("in-memory write");
    for row in rows {
        writer.write_record(row).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}
