//! CSV and JSON writers. Every output starts with the tool version, the
//! resolved configuration and the master seed.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{Format, RunConfig};
use crate::CliError;

pub const TOOL: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn open(out: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match out {
        Some(path) => {
            let file = File::create(path).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
            Box::new(BufWriter::new(file))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn io_err(e: impl std::fmt::Display) -> CliError {
    CliError::Io(e.to_string())
}

/// `# key: value` lines placed above the CSV header row.
pub fn provenance(config: &RunConfig) -> String {
    format!("# {TOOL} {VERSION}\n# config: {}\n# seed: {}\n", config.echo(), config.seed)
}

/// Writes `rows` in the configured format. JSON output is a single document
/// whose `rows` field holds the records; `extra` fields are added to it.
pub fn write_rows<T: Serialize>(config: &RunConfig, rows: &[T], extra: Map<String, Value>) -> Result<(), CliError> {
    match config.format {
        Format::Csv => {
            let mut sink = open(config.out.as_deref())?;
            sink.write_all(provenance(config).as_bytes()).map_err(io_err)?;
            let mut writer = csv::Writer::from_writer(sink);
            for row in rows {
                writer.serialize(row).map_err(io_err)?;
            }
            writer.flush().map_err(io_err)
        }
        Format::Json => {
            let mut doc = extra;
            doc.insert("rows".into(), serde_json::to_value(rows).map_err(io_err)?);
            write_document(config, doc)
        }
    }
}

/// Writes one JSON document with the provenance fields followed by `body`.
pub fn write_document(config: &RunConfig, body: Map<String, Value>) -> Result<(), CliError> {
    let mut doc = Map::new();
    doc.insert("tool".into(), json!(TOOL));
    doc.insert("version".into(), json!(VERSION));
    doc.insert("seed".into(), json!(config.seed));
    doc.insert("config".into(), serde_json::to_value(config).map_err(io_err)?);
    doc.extend(body);
    let mut sink = open(config.out.as_deref())?;
    serde_json::to_writer_pretty(&mut sink, &Value::Object(doc)).map_err(io_err)?;
    sink.write_all(b"\n").map_err(io_err)?;
    sink.flush().map_err(io_err)
}
