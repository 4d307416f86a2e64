use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::sweep::ResultTable;
use crate::harness::table::FrobeniusTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::InvalidArgument(format!("unknown output format {other:?}"))),
        }
    }
}

pub const CSV_HEADER: &str = "label,snr_db,m,n,trials,mean_eps,median_eps,stderr";

pub fn results_csv(table: &ResultTable) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for a in &table.aggregates {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            a.label, a.snr_db, a.m, a.n, a.trials, a.mean_eps, a.median_eps, a.stderr
        );
    }
    out
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Write aggregates as CSV, or the full table (aggregates, per-trial records,
/// failures) as JSON.
pub fn emit_results(table: &ResultTable, path: &Path, format: OutputFormat) -> Result<()> {
    let text = match format {
        OutputFormat::Csv => results_csv(table),
        OutputFormat::Json => serde_json::to_string_pretty(table)? + "\n",
    };
    write(path, &text)
}

pub fn emit_frobenius(table: &FrobeniusTable, path: &Path, format: OutputFormat) -> Result<()> {
    let text = match format {
        OutputFormat::Csv => {
            let mut out = String::from("snr_db,label,m,n,objective,objective_normalized,iterations\n");
            for r in &table.rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    r.snr_db, r.label, table.m, table.n, r.objective, r.objective_normalized, r.iterations
                );
            }
            out
        }
        OutputFormat::Json => serde_json::to_string_pretty(table)? + "\n",
    };
    write(path, &text)
}
