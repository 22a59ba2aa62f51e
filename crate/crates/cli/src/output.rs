//! Output envelope: fixed-header CSV or a JSON object, both carrying a
//! schema version. Floats go through Rust's shortest round-trip formatting,
//! so parsing an emitted cell recovers the exact value.

use clap::ValueEnum;
use serde::Serialize;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Row types that know their CSV cell rendering.
pub trait CsvRow {
    fn cells(&self) -> Vec<String>;
}

/// Empty cell for absent optional values.
pub fn opt_cell<T: std::fmt::Display>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn emit<T: Serialize + CsvRow>(format: Format, command: &str, header: &[&str], rows: &[T]) {
    match format {
        Format::Csv => {
            println!("{}", header.join(","));
            for row in rows {
                println!("{}", row.cells().join(","));
            }
        }
        Format::Json => {
            let doc = serde_json::json!({
                "schema_version": SCHEMA_VERSION,
                "command": command,
                "rows": rows,
            });
            println!("{}", serde_json::to_string_pretty(&doc).expect("serializable rows"));
        }
    }
}
