//! Output files. Floats carry 12 significant digits and lines end in `\n`.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde_json::Value;
use txallo::replay::SCORING_NOTES;
use txallo::{AccountId, EpochReport, ShardMap, SystemReport};

use crate::error::{CliError, CliResult};

pub const EPOCH_HEADER: &str =
    "epoch,algorithm,gamma,rho,throughput_norm,latency_mean,runtime_ms,nodes,touched";

/// `x` rounded to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().expect("formatted float parses")
}

pub fn fmt_float(x: f64) -> String {
    let r = round12(x);
    // Avoid "-0".
    if r == 0.0 {
        "0".into()
    } else {
        r.to_string()
    }
}

fn round_json(v: &mut Value) {
    match v {
        Value::Number(n) => {
            if let Some(f) = n.as_f64().filter(|_| n.is_f64()) {
                if let Some(r) = serde_json::Number::from_f64(round12(f)) {
                    *n = r;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_json),
        Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::data(path.display(), e))
}

fn io_err(path: &Path) -> impl Fn(io::Error) -> CliError + '_ {
    move |e| CliError::data(path.display(), e)
}

/// `account,shard` rows sorted by account.
pub fn write_allocation(path: &Path, map: &ShardMap) -> CliResult<()> {
    let mut out = create(path)?;
    writeln!(out, "account,shard").map_err(io_err(path))?;
    for (account, shard) in map.iter() {
        writeln!(out, "{account},{shard}").map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))
}

/// Reads an allocation file. `k` defaults to one more than the largest shard.
pub fn read_allocation(path: &Path, k: Option<usize>) -> CliResult<ShardMap> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::data(path.display(), e))?;
    let header = rdr
        .headers()
        .map_err(|e| CliError::data(path.display(), e))?
        .clone();
    if header.iter().collect::<Vec<_>>() != ["account", "shard"] {
        return Err(CliError::Data(format!(
            "{}: allocation header must be `account,shard`",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::data(path.display(), e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |what: &str| CliError::Data(format!("{}:{line}: invalid {what}", path.display()));
        let account: AccountId = rec[0].parse().map_err(|_| bad("account"))?;
        let shard: usize = rec[1].parse().map_err(|_| bad("shard"))?;
        rows.push((account, shard));
    }
    let k = match k {
        Some(k) => k,
        None => rows.iter().map(|r| r.1 + 1).max().unwrap_or(1),
    };
    let mut map = ShardMap::new(k)?;
    for (account, shard) in rows {
        if map.get(&account).is_some() {
            return Err(CliError::Data(format!(
                "{}: account {account} listed twice",
                path.display()
            )));
        }
        map.insert(account, shard)?;
    }
    Ok(map)
}

pub fn report_json(report: &SystemReport) -> CliResult<String> {
    let mut v = serde_json::to_value(report).map_err(|e| CliError::Invariant(e.to_string()))?;
    round_json(&mut v);
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| CliError::Invariant(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Writes to `path`, or standard output when `path` is `None`.
pub fn write_text(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => {
            let mut out = create(p)?;
            out.write_all(text.as_bytes()).map_err(io_err(p))?;
            out.flush().map_err(io_err(p))
        }
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::data("stdout", e)),
    }
}

/// Epoch time series, preceded by `#` lines describing the scoring.
pub fn epochs_csv(reports: &[EpochReport], timing: bool) -> String {
    let mut s = String::new();
    for note in SCORING_NOTES {
        s.push_str("# ");
        s.push_str(note);
        s.push('\n');
    }
    s.push_str(EPOCH_HEADER);
    s.push('\n');
    for r in reports {
        let runtime = if timing { r.runtime_ms } else { 0.0 };
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.epoch_index,
            r.algorithm,
            fmt_float(r.gamma),
            fmt_float(r.rho),
            fmt_float(r.throughput_normalized),
            fmt_float(r.latency_mean),
            fmt_float(runtime),
            r.node_count,
            r.touched_count
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_keeps_twelve_digits() {
        assert_eq!(round12(1.0 / 3.0), 0.333333333333);
        assert_eq!(round12(2.0 / 3.0 * 1e6), 666666.666667);
        assert_eq!(round12(0.0), 0.0);
        assert_eq!(fmt_float(1.9999999999999998), "2");
        assert_eq!(fmt_float(-0.0), "0");
        assert_eq!(fmt_float(1.5), "1.5");
    }

    #[test]
    fn json_numbers_are_rounded() {
        let mut v = serde_json::json!({"a": 0.1 + 0.2, "b": [1.0 / 3.0], "c": 7});
        round_json(&mut v);
        assert_eq!(v.to_string(), r#"{"a":0.3,"b":[0.333333333333],"c":7}"#);
    }
}
