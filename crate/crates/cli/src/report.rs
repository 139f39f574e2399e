//! Report writing: one header line carrying the timestamp, then a JSON
//! document or a CSV table. Everything below the header depends only on
//! the resolved configuration.

use std::io::Write;

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Format, RunConfig};

/// Outcome of one experiment.
pub struct Report {
    pub passed: bool,
    pub summary: String,
    pub result: Value,
    pub table: Table,
}

/// CSV view of a report.
#[derive(Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push<I, S>(&mut self, row: I)
    where
        I: IntoIterator<Item = S>,
        S: ToString,
    {
        self.rows.push(row.into_iter().map(|v| v.to_string()).collect());
    }
}

pub fn to_value<T: Serialize>(v: &T) -> anyhow::Result<Value> {
    Ok(serde_json::to_value(v)?)
}

pub fn header_line(config: &RunConfig) -> String {
    format!(
        "# spongelab {} {} generated {}",
        spongelab::VERSION,
        config.experiment.id(),
        chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
    )
}

pub fn write_report<W: Write>(mut out: W, config: &RunConfig, report: &Report) -> anyhow::Result<()> {
    writeln!(out, "{}", header_line(config))?;
    match config.format {
        Format::Json => {
            let doc = json!({
                "tool": "spongelab",
                "version": spongelab::VERSION,
                "config": config,
                "passed": report.passed,
                "summary": report.summary,
                "result": report.result,
            });
            serde_json::to_writer_pretty(&mut out, &doc)?;
            writeln!(out)?;
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(&report.table.header)?;
            for row in &report.table.rows {
                w.write_record(row)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}
