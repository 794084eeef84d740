//! JSON-lines and CSV record writers.

use std::io::Write;

use anyhow::Result;
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Writes one JSON object per line, or a CSV table whose columns are the
/// union of record keys in first-seen order. Nested values become compact
/// JSON in a single cell.
pub fn write_records(out: &mut dyn Write, records: &[Value], format: Format) -> Result<()> {
    match format {
        Format::Json => {
            for r in records {
                serde_json::to_writer(&mut *out, r)?;
                out.write_all(b"\n")?;
            }
        }
        Format::Csv => {
            let mut columns: Vec<String> = Vec::new();
            for r in records {
                if let Value::Object(m) = r {
                    for k in m.keys() {
                        if !columns.contains(k) {
                            columns.push(k.clone());
                        }
                    }
                }
            }
            let mut w = csv::Writer::from_writer(out);
            w.write_record(&columns)?;
            for r in records {
                w.write_record(columns.iter().map(|c| cell(r.get(c))))?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn cell(v: Option<&Value>) -> String {
    match v {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(other) => other.to_string(),
    }
}
