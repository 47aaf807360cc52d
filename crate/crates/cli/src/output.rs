//! Result tables and their CSV / JSON-lines encodings.
//!
//! CSV files start with `#` lines carrying the tool version, a generation
//! timestamp and the run configuration as one line of JSON; the rest is an
//! RFC 4180 table. JSON-lines files carry the same metadata in a first
//! `{"header": …}` object, followed by one object per row.

use std::io::Write;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::{Format, RunConfig};
use crate::CliError;

pub const CONFIG_PREFIX: &str = "# config: ";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Rows sharing one column list; cells are JSON scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Self { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Float cell; non-finite values become strings, since JSON has no NaN.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        Value::from(x)
    } else {
        Value::from(x.to_string())
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn write_csv(out: &mut dyn Write, table: &Table, cfg: &RunConfig) -> Result<(), CliError> {
    let config = serde_json::to_string(cfg).map_err(CliError::numeric)?;
    writeln!(out, "# fblgbc {VERSION}")?;
    writeln!(out, "# generated: {}", timestamp())?;
    writeln!(out, "{CONFIG_PREFIX}{config}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&table.columns).map_err(CliError::numeric)?;
    for row in &table.rows {
        w.write_record(row.iter().map(cell)).map_err(CliError::numeric)?;
    }
    w.flush()?;
    Ok(())
}

fn write_jsonl(out: &mut dyn Write, table: &Table, cfg: &RunConfig) -> Result<(), CliError> {
    #[derive(Serialize)]
    struct Header<'a> {
        tool: &'static str,
        version: &'static str,
        generated: String,
        config: &'a RunConfig,
        columns: &'a [&'static str],
    }
    #[derive(Serialize)]
    struct Wrapped<'a> {
        header: Header<'a>,
    }
    let header = Wrapped {
        header: Header { tool: "fblgbc", version: VERSION, generated: timestamp(), config: cfg, columns: &table.columns },
    };
    writeln!(out, "{}", serde_json::to_string(&header).map_err(CliError::numeric)?)?;
    for row in &table.rows {
        let obj: Map<String, Value> = table.columns.iter().map(|c| c.to_string()).zip(row.iter().cloned()).collect();
        writeln!(out, "{}", Value::Object(obj))?;
    }
    Ok(())
}

pub fn write_table(out: &mut dyn Write, table: &Table, cfg: &RunConfig) -> Result<(), CliError> {
    match cfg.format {
        Format::Csv => write_csv(out, table, cfg),
        Format::Json => write_jsonl(out, table, cfg),
    }
}

/// A JSON document with the configuration and version but no timestamp, so
/// that reruns are byte-identical.
pub fn write_document<T: Serialize>(out: &mut dyn Write, cfg: &RunConfig, key: &str, body: &T) -> Result<(), CliError> {
    let mut doc = Map::new();
    doc.insert("tool".into(), Value::from("fblgbc"));
    doc.insert("version".into(), Value::from(VERSION));
    doc.insert("config".into(), serde_json::to_value(cfg).map_err(CliError::numeric)?);
    doc.insert(key.into(), serde_json::to_value(body).map_err(CliError::numeric)?);
    serde_json::to_writer_pretty(&mut *out, &Value::Object(doc)).map_err(CliError::numeric)?;
    writeln!(out)?;
    Ok(())
}
