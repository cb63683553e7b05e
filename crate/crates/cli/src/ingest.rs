//! Trace files: JSONL (`{"block":..,"inputs":[..],"outputs":[..]}` per line)
//! or CSV with header `block,inputs,outputs` and `;`-separated accounts.
//! Other JSONL fields (values, gas) are ignored.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use txallo::{AccountId, Transaction};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceFormat {
    Jsonl,
    Csv,
}

impl TraceFormat {
    /// `.csv` is CSV, anything else JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => TraceFormat::Csv,
            _ => TraceFormat::Jsonl,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub block: u64,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

impl TraceRecord {
    pub fn to_transaction(&self) -> Result<Transaction, String> {
        let mut accounts = Vec::with_capacity(self.inputs.len() + self.outputs.len());
        for s in self.inputs.iter().chain(&self.outputs) {
            accounts.push(s.parse::<AccountId>().map_err(|e| e.to_string())?);
        }
        Transaction::new(self.block, accounts).map_err(|e| e.to_string())
    }

    /// Writes the first account as the input and the rest as outputs.
    pub fn from_transaction(tx: &Transaction) -> Self {
        let mut ids = tx.accounts().iter().map(ToString::to_string);
        TraceRecord {
            block: tx.block(),
            inputs: ids.next().into_iter().collect(),
            outputs: ids.collect(),
        }
    }
}

/// Parsed trace plus the malformed lines, as (1-based line, reason).
#[derive(Debug, Default)]
pub struct Parsed {
    pub txs: Vec<Transaction>,
    pub bad: Vec<(u64, String)>,
}

pub fn parse_trace(reader: impl Read, format: TraceFormat) -> CliResult<Parsed> {
    match format {
        TraceFormat::Jsonl => parse_jsonl(reader),
        TraceFormat::Csv => parse_csv(reader),
    }
}

fn parse_jsonl(reader: impl Read) -> CliResult<Parsed> {
    let mut out = Parsed::default();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| CliError::data("reading trace", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<TraceRecord>(&line)
            .map_err(|e| e.to_string())
            .and_then(|r| r.to_transaction());
        match parsed {
            Ok(tx) => out.txs.push(tx),
            Err(e) => out.bad.push((i as u64 + 1, e)),
        }
    }
    Ok(out)
}

fn split_accounts(field: &str) -> impl Iterator<Item = String> + '_ {
    field
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_owned)
}

fn parse_csv(reader: impl Read) -> CliResult<Parsed> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| CliError::data("reading trace header", e))?;
    if header.iter().collect::<Vec<_>>() != ["block", "inputs", "outputs"] {
        return Err(CliError::Data(format!(
            "trace header must be `block,inputs,outputs`, got `{}`",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Parsed::default();
    for rec in rdr.records() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                if matches!(e.kind(), csv::ErrorKind::Io(_)) {
                    return Err(CliError::data("reading trace", e));
                }
                out.bad.push((line, e.to_string()));
                continue;
            }
        };
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 3 {
            out.bad
                .push((line, format!("expected 3 fields, got {}", rec.len())));
            continue;
        }
        let parsed = rec[0]
            .parse::<u64>()
            .map_err(|e| format!("block: {e}"))
            .and_then(|block| {
                TraceRecord {
                    block,
                    inputs: split_accounts(&rec[1]).collect(),
                    outputs: split_accounts(&rec[2]).collect(),
                }
                .to_transaction()
            });
        match parsed {
            Ok(tx) => out.txs.push(tx),
            Err(e) => out.bad.push((line, e)),
        }
    }
    Ok(out)
}

/// Reads a trace file. Malformed lines abort the run unless `skip_bad`.
pub fn ingest(
    path: &Path,
    format: Option<TraceFormat>,
    skip_bad: bool,
) -> CliResult<Vec<Transaction>> {
    let format = format.unwrap_or_else(|| TraceFormat::from_path(path));
    let file = File::open(path).map_err(|e| CliError::data(path.display(), e))?;
    let parsed = parse_trace(file, format)?;
    if let Some((line, reason)) = parsed.bad.first() {
        let summary = format!(
            "{}: {} malformed line(s), first at line {line}: {reason}",
            path.display(),
            parsed.bad.len()
        );
        if !skip_bad {
            return Err(CliError::Data(format!(
                "{summary} (use --skip-bad to ignore)"
            )));
        }
        eprintln!("warning: skipped {summary}");
    }
    log::info!("{}: {} transactions", path.display(), parsed.txs.len());
    Ok(parsed.txs)
}

pub fn write_trace(path: &Path, format: TraceFormat, txs: &[Transaction]) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::data(path.display(), e))?;
    let mut out = BufWriter::new(file);
    let io = |e: std::io::Error| CliError::data(path.display(), e);
    match format {
        TraceFormat::Jsonl => {
            for tx in txs {
                let line = serde_json::to_string(&TraceRecord::from_transaction(tx))
                    .map_err(|e| CliError::Invariant(e.to_string()))?;
                writeln!(out, "{line}").map_err(io)?;
            }
        }
        TraceFormat::Csv => {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(["block", "inputs", "outputs"])
                .map_err(|e| CliError::data(path.display(), e))?;
            for tx in txs {
                let r = TraceRecord::from_transaction(tx);
                w.write_record([r.block.to_string(), r.inputs.join(";"), r.outputs.join(";")])
                    .map_err(|e| CliError::data(path.display(), e))?;
            }
            w.flush().map_err(io)?;
        }
    }
    out.flush().map_err(io)
}
