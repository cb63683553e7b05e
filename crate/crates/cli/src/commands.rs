use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use txallo::params::{DEFAULT_ETA, DEFAULT_MAX_SWEEPS};
use txallo::replay::{DEFAULT_TAU1, DEFAULT_WARMUP_FRACTION};
use txallo::{
    build_graph, g_txallo, generate_synthetic, hash_allocate, replay, system_report, AlloParams,
    Allocation, Policy, ReplayParams, Schedule, SyntheticSpec, Transaction,
};

use crate::config::{pick, Config};
use crate::error::{CliError, CliResult};
use crate::ingest::{ingest, write_trace, TraceFormat};
use crate::output::{epochs_csv, read_allocation, report_json, write_allocation, write_text};

#[derive(Debug, Parser)]
#[command(
    name = "txallo",
    version,
    about = "Account-to-shard allocation for sharded ledgers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Allocate the accounts of a trace and score the result.
    Allocate(AllocateArgs),
    /// Replay a block stream with periodic re-allocation.
    Replay(ReplayArgs),
    /// Rescore an existing allocation file against a trace.
    Report(ReportArgs),
    /// Generate a synthetic trace.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyArg {
    Txallo,
    Hash,
}

impl From<PolicyArg> for Policy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Txallo => Policy::Txallo,
            PolicyArg::Hash => Policy::Hash,
        }
    }
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Trace file (JSONL, or CSV by `.csv` extension).
    #[arg(long = "in", value_name = "TRACE")]
    pub input: Option<PathBuf>,
    /// Override the trace format inferred from the extension.
    #[arg(long, value_enum)]
    pub format: Option<TraceFormat>,
    /// Drop malformed trace lines instead of aborting.
    #[arg(long)]
    pub skip_bad: bool,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Number of shards.
    #[arg(long, value_name = "K")]
    pub shards: Option<usize>,
    /// Cross-shard workload multiplier [default: 2].
    #[arg(long)]
    pub eta: Option<f64>,
    /// Per-shard capacity [default: transactions / K].
    #[arg(long)]
    pub lambda: Option<f64>,
    /// TOML file with defaults for any of these flags.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AllocateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Convergence threshold [default: 1e-5 * transactions].
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub max_sweeps: Option<usize>,
    /// Allocation policy [default: txallo].
    #[arg(long, value_enum)]
    pub policy: Option<PolicyArg>,
    #[arg(long, value_name = "PATH")]
    pub out_alloc: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub out_report: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Synthetic spec to generate the stream from instead of a trace.
    #[arg(long, value_name = "SPEC", conflicts_with = "input")]
    pub synth: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub max_sweeps: Option<usize>,
    /// Blocks per adaptive epoch [default: 300].
    #[arg(long)]
    pub tau1: Option<u64>,
    /// Blocks per global refresh [default: never].
    #[arg(long)]
    pub tau2: Option<u64>,
    /// Share of blocks used for the initial allocation [default: 0.9].
    #[arg(long)]
    pub warmup: Option<f64>,
    /// Allocation policy [default: txallo].
    #[arg(long, value_enum)]
    pub policy: Option<PolicyArg>,
    /// Write 0 for every runtime so repeated runs compare byte for byte.
    #[arg(long)]
    pub no_timing: bool,
    /// Time-series CSV output [default: stdout].
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Allocation file (`account,shard`).
    #[arg(long, value_name = "PATH")]
    pub alloc: PathBuf,
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Report JSON output [default: stdout].
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Spec file, TOML (or JSON by `.json` extension).
    #[arg(long, value_name = "PATH")]
    pub spec: PathBuf,
    #[arg(long, value_name = "TRACE")]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<TraceFormat>,
}

pub fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Allocate(a) => allocate(a),
        Command::Replay(a) => run_replay(a),
        Command::Report(a) => report(a),
        Command::Synth(a) => synth(a),
    }
}

fn read_input(input: &InputArgs) -> CliResult<Vec<Transaction>> {
    let path = input
        .input
        .as_deref()
        .ok_or_else(|| CliError::Usage("missing --in TRACE".into()))?;
    let txs = ingest(path, input.format, input.skip_bad)?;
    if txs.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no transactions",
            path.display()
        )));
    }
    Ok(txs)
}

fn shards(flag: Option<usize>, config: &Config) -> CliResult<usize> {
    flag.or(config.shards)
        .ok_or_else(|| CliError::Usage("missing --shards K".into()))
}

fn model_params(
    model: &ModelArgs,
    config: &Config,
    k: usize,
    tx_count: u64,
) -> CliResult<AlloParams> {
    let eta = pick(model.eta, config.eta, DEFAULT_ETA);
    let mut p = AlloParams::for_workload(tx_count, k, eta)?;
    if let Some(l) = model.lambda.or(config.lambda) {
        p = p.with_lambda(l)?;
    }
    Ok(p)
}

fn allocate(args: AllocateArgs) -> CliResult<()> {
    let config = Config::load(args.model.config.as_deref())?;
    let k = shards(args.model.shards, &config)?;
    let txs = read_input(&args.input)?;
    let graph = build_graph(&txs);
    let mut params = model_params(&args.model, &config, k, graph.tx_count())?
        .with_max_sweeps(pick(args.max_sweeps, config.max_sweeps, DEFAULT_MAX_SWEEPS))?;
    if let Some(e) = args.epsilon.or(config.epsilon) {
        params = params.with_epsilon(e)?;
    }
    let alloc = match pick(args.policy, config.policy, PolicyArg::Txallo) {
        PolicyArg::Txallo => g_txallo(&graph, &params)?.allocation,
        PolicyArg::Hash => {
            Allocation::from_shard_map(&graph, &hash_allocate(graph.accounts(), k)?, params.eta)?
        }
    };
    alloc.verify(&graph)?;
    let report = system_report(&graph, &alloc, &params, Some(&txs))?;
    write_allocation(&args.out_alloc, &alloc.to_shard_map(&graph))?;
    write_text(Some(&args.out_report), &report_json(&report)?)
}

fn load_spec(path: &Path) -> CliResult<SyntheticSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::data(path.display(), e))?;
    let is_json = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let spec: SyntheticSpec = if is_json {
        serde_json::from_str(&text).map_err(|e| CliError::data(path.display(), e))?
    } else {
        toml::from_str(&text).map_err(|e| {
            let msg = e.to_string();
            CliError::data(path.display(), msg.lines().next().unwrap_or("invalid spec"))
        })?
    };
    spec.validate()?;
    Ok(spec)
}

fn run_replay(args: ReplayArgs) -> CliResult<()> {
    let config = Config::load(args.model.config.as_deref())?;
    let k = shards(args.model.shards, &config)?;
    let schedule = Schedule::new(
        pick(args.tau1, config.tau1, DEFAULT_TAU1),
        args.tau2.or(config.tau2),
        pick(args.warmup, config.warmup, DEFAULT_WARMUP_FRACTION),
    )?;
    if args.model.lambda.is_some() || config.lambda.is_some() {
        return Err(CliError::Usage(
            "replay derives lambda per epoch; use epoch_lambda in the config to override".into(),
        ));
    }
    let txs = match &args.synth {
        Some(spec) => generate_synthetic(&load_spec(spec)?)?,
        None if args.input.input.is_some() => read_input(&args.input)?,
        None => {
            return Err(CliError::Usage(
                "one of --in TRACE or --synth SPEC is required".into(),
            ))
        }
    };
    let params = ReplayParams {
        k,
        eta: pick(args.model.eta, config.eta, DEFAULT_ETA),
        epoch_lambda: config.epoch_lambda,
        max_sweeps: pick(args.max_sweeps, config.max_sweeps, DEFAULT_MAX_SWEEPS),
    };
    let policy = pick(args.policy, config.policy, PolicyArg::Txallo);
    let reports = replay(&txs, params, schedule, policy.into())?;
    write_text(args.out.as_deref(), &epochs_csv(&reports, !args.no_timing))
}

fn report(args: ReportArgs) -> CliResult<()> {
    let config = Config::load(args.model.config.as_deref())?;
    let map = read_allocation(&args.alloc, args.model.shards.or(config.shards))?;
    let txs = read_input(&args.input)?;
    let graph = build_graph(&txs);
    let params = model_params(&args.model, &config, map.k(), graph.tx_count())?;
    let alloc = Allocation::from_shard_map(&graph, &map, params.eta)?;
    let report = system_report(&graph, &alloc, &params, Some(&txs))?;
    write_text(args.out.as_deref(), &report_json(&report)?)
}

fn synth(args: SynthArgs) -> CliResult<()> {
    let spec = load_spec(&args.spec)?;
    let txs = generate_synthetic(&spec)?;
    let format = args
        .format
        .unwrap_or_else(|| TraceFormat::from_path(&args.out));
    write_trace(&args.out, format, &txs)
}
