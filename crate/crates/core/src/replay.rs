//! Block-stream replay: one warm-up allocation, then an adaptive update every
//! `tau1` blocks and an optional global refresh every `tau2` blocks.
//!
//! Each epoch is scored on its own transactions only, with capacity
//! `lambda = epoch tx count / k` unless overridden. Allocations themselves
//! are always computed on the cumulative graph.

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::adaptive::{a_txallo, EpochDelta};
use crate::allocation::{Allocation, ShardLookup, ShardMap};
use crate::baseline::hash_shard;
use crate::error::{Error, Result};
use crate::global::g_txallo;
use crate::graph::{build_graph, Transaction, TransactionGraph};
use crate::metrics::system_report;
use crate::params::{AlloParams, DEFAULT_ETA, DEFAULT_MAX_SWEEPS};

pub const DEFAULT_TAU1: u64 = 300;
pub const DEFAULT_WARMUP_FRACTION: f64 = 0.9;

/// Header lines describing how epochs are scored.
pub const SCORING_NOTES: [&str; 2] = [
    "scoring: gamma, rho, throughput and latency use only the epoch's transactions, lambda = epoch txs / k unless overridden",
    "allocation: computed on the cumulative graph of all blocks seen so far",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    /// Blocks per adaptive epoch.
    pub tau1: u64,
    /// Blocks per global refresh; `None` never refreshes.
    pub tau2: Option<u64>,
    /// Share of the block range used to build the initial allocation.
    pub warmup_fraction: f64,
}

impl Schedule {
    pub fn new(tau1: u64, tau2: Option<u64>, warmup_fraction: f64) -> Result<Self> {
        let s = Schedule {
            tau1,
            tau2,
            warmup_fraction,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau1 == 0 {
            return Err(Error::InvalidSchedule("tau1 must be positive".into()));
        }
        if let Some(tau2) = self.tau2 {
            if tau2 <= self.tau1 {
                return Err(Error::InvalidSchedule(format!(
                    "tau2 ({tau2}) must exceed tau1 ({})",
                    self.tau1
                )));
            }
            if tau2 % self.tau1 != 0 {
                return Err(Error::InvalidSchedule(format!(
                    "tau2 ({tau2}) must be a multiple of tau1 ({})",
                    self.tau1
                )));
            }
        }
        if !(self.warmup_fraction > 0.0 && self.warmup_fraction < 1.0) {
            return Err(Error::InvalidSchedule(format!(
                "warmup fraction must be in (0, 1), got {}",
                self.warmup_fraction
            )));
        }
        Ok(())
    }
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            tau1: DEFAULT_TAU1,
            tau2: None,
            warmup_fraction: DEFAULT_WARMUP_FRACTION,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Txallo,
    Hash,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmTag {
    Adaptive,
    Global,
    Baseline,
}

impl fmt::Display for AlgorithmTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AlgorithmTag::Adaptive => "adaptive",
            AlgorithmTag::Global => "global",
            AlgorithmTag::Baseline => "baseline",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplayParams {
    pub k: usize,
    pub eta: f64,
    /// Scoring capacity per shard; `None` uses the epoch's tx count over `k`.
    pub epoch_lambda: Option<f64>,
    pub max_sweeps: usize,
}

impl ReplayParams {
    pub fn new(k: usize) -> Self {
        ReplayParams {
            k,
            eta: DEFAULT_ETA,
            epoch_lambda: None,
            max_sweeps: DEFAULT_MAX_SWEEPS,
        }
    }

    /// Allocator parameters for a cumulative graph of `tx_count` transactions.
    pub fn allocation_params(&self, tx_count: u64) -> Result<AlloParams> {
        AlloParams::for_workload(tx_count, self.k, self.eta)?.with_max_sweeps(self.max_sweeps)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    /// 0 for the warm-up; a refresh shares the index of its epoch.
    pub epoch_index: usize,
    pub algorithm: AlgorithmTag,
    pub gamma: f64,
    pub rho: f64,
    pub throughput_normalized: f64,
    pub latency_mean: f64,
    pub runtime_ms: f64,
    /// Accounts in the cumulative graph.
    pub node_count: usize,
    /// Accounts the allocator was allowed to revisit.
    pub touched_count: usize,
    /// Transactions scored.
    pub tx_count: usize,
    /// First block height of the scored window.
    pub first_block: u64,
}

#[derive(Debug, Clone)]
enum State {
    Txallo(Allocation),
    Hash(ShardMap),
}

/// Replay state, advanced one non-empty `tau1` window at a time.
#[derive(Debug, Clone)]
pub struct Replay {
    params: ReplayParams,
    schedule: Schedule,
    txs: Vec<Transaction>,
    cursor: usize,
    // Start height of the next window and windows elapsed since warm-up.
    next_start: u64,
    windows: u64,
    epoch: usize,
    graph: TransactionGraph,
    state: State,
}

impl Replay {
    /// Runs the warm-up and returns the replay positioned at the first epoch,
    /// together with the warm-up report.
    pub fn start(
        txs: &[Transaction],
        params: ReplayParams,
        schedule: Schedule,
        policy: Policy,
    ) -> Result<(Self, EpochReport)> {
        schedule.validate()?;
        params.allocation_params(1)?;
        if let Some(l) = params.epoch_lambda {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::InvalidParams(format!(
                    "epoch lambda must be > 0, got {l}"
                )));
            }
        }
        if txs.is_empty() {
            return Err(Error::EmptyTransactions);
        }
        let mut txs = txs.to_vec();
        txs.sort_by_key(|tx| tx.block());
        let first = txs[0].block();
        let span = txs[txs.len() - 1].block() - first + 1;
        let warm_blocks = ((schedule.warmup_fraction * span as f64).floor() as u64).max(1);
        let next_start = first + warm_blocks;
        let cursor = txs.partition_point(|tx| tx.block() < next_start);

        let started = Instant::now();
        let graph = build_graph(&txs[..cursor]);
        let (state, tag) = match policy {
            Policy::Txallo => {
                let p = params.allocation_params(graph.tx_count())?;
                (
                    State::Txallo(g_txallo(&graph, &p)?.allocation),
                    AlgorithmTag::Global,
                )
            }
            Policy::Hash => {
                let mut map = ShardMap::new(params.k)?;
                for account in graph.accounts() {
                    map.insert(account.clone(), hash_shard(account, params.k))?;
                }
                (State::Hash(map), AlgorithmTag::Baseline)
            }
        };
        let runtime = elapsed_ms(started);
        log::info!(
            "warm-up: {} blocks, {} txs, {} accounts",
            warm_blocks,
            cursor,
            graph.node_count()
        );

        let replay = Replay {
            params,
            schedule,
            txs,
            cursor,
            next_start,
            windows: 0,
            epoch: 0,
            graph,
            state,
        };
        let touched = replay.graph.node_count();
        let report = replay.score(0, tag, &replay.txs[..cursor], first, runtime, touched)?;
        Ok((replay, report))
    }

    pub fn graph(&self) -> &TransactionGraph {
        &self.graph
    }

    /// Current allocation of every account seen so far.
    pub fn shard_map(&self) -> ShardMap {
        match &self.state {
            State::Txallo(alloc) => alloc.to_shard_map(&self.graph),
            State::Hash(map) => map.clone(),
        }
    }

    /// Graph-bound allocation, for the txallo policy.
    pub fn allocation(&self) -> Option<&Allocation> {
        match &self.state {
            State::Txallo(alloc) => Some(alloc),
            State::Hash(_) => None,
        }
    }

    pub fn is_finished(&self) -> bool {
        self.cursor >= self.txs.len()
    }

    /// Processes the next non-empty window. Returns its adaptive (or
    /// baseline) report, followed by a global report when a refresh is due.
    pub fn step(&mut self) -> Result<Option<Vec<EpochReport>>> {
        if self.is_finished() {
            return Ok(None);
        }
        let tau1 = self.schedule.tau1;
        // Skip empty windows in one go.
        let next_block = self.txs[self.cursor].block();
        let skipped = (next_block - self.next_start) / tau1;
        self.windows += skipped;
        self.next_start += skipped * tau1;

        let start = self.next_start;
        let end = start + tau1;
        let lo = self.cursor;
        let hi = lo + self.txs[lo..].partition_point(|tx| tx.block() < end);
        self.cursor = hi;
        self.next_start = end;
        self.windows += 1;
        self.epoch += 1;
        let epoch_txs = self.txs[lo..hi].to_vec();

        let started = Instant::now();
        let delta = EpochDelta::new(epoch_txs);
        self.graph.merge_from(&build_graph(delta.new_txs()));
        let touched = delta.touched().len();
        let tag = match &mut self.state {
            State::Txallo(alloc) => {
                let p = self.params.allocation_params(self.graph.tx_count())?;
                let prev = std::mem::replace(
                    alloc,
                    Allocation::unassigned(&TransactionGraph::new(), 1, 1.0)?,
                );
                *alloc = a_txallo(&self.graph, prev, &delta, &p)?.allocation;
                AlgorithmTag::Adaptive
            }
            State::Hash(map) => {
                for account in delta.touched() {
                    if map.get(account).is_none() {
                        map.insert(account.clone(), hash_shard(account, self.params.k))?;
                    }
                }
                AlgorithmTag::Baseline
            }
        };
        let runtime = elapsed_ms(started);
        let mut reports =
            vec![self.score(self.epoch, tag, delta.new_txs(), start, runtime, touched)?];

        let refresh_due = self
            .schedule
            .tau2
            .is_some_and(|tau2| (self.windows * tau1).is_multiple_of(tau2));
        if refresh_due {
            if let State::Txallo(alloc) = &mut self.state {
                let started = Instant::now();
                let p = self.params.allocation_params(self.graph.tx_count())?;
                *alloc = g_txallo(&self.graph, &p)?.allocation;
                let runtime = elapsed_ms(started);
                let nodes = self.graph.node_count();
                reports.push(self.score(
                    self.epoch,
                    AlgorithmTag::Global,
                    delta.new_txs(),
                    start,
                    runtime,
                    nodes,
                )?);
            }
        }
        Ok(Some(reports))
    }

    fn score(
        &self,
        epoch_index: usize,
        algorithm: AlgorithmTag,
        txs: &[Transaction],
        first_block: u64,
        runtime_ms: f64,
        touched_count: usize,
    ) -> Result<EpochReport> {
        let k = self.params.k;
        let eta = self.params.eta;
        let epoch_graph = build_graph(txs);
        let alloc = match &self.state {
            State::Txallo(a) => score_allocation(&epoch_graph, &a.bind(&self.graph), eta)?,
            State::Hash(m) => score_allocation(&epoch_graph, m, eta)?,
        };
        let lambda = self
            .params
            .epoch_lambda
            .unwrap_or((txs.len() as f64).max(1.0) / k as f64);
        let p = AlloParams::new(k, eta, lambda, 1.0)?;
        let r = system_report(&epoch_graph, &alloc, &p, Some(txs))?;
        Ok(EpochReport {
            epoch_index,
            algorithm,
            gamma: r.gamma,
            rho: r.rho,
            throughput_normalized: r.throughput_normalized,
            latency_mean: r.latency_mean,
            runtime_ms,
            node_count: self.graph.node_count(),
            touched_count,
            tx_count: txs.len(),
            first_block,
        })
    }
}

fn score_allocation(
    epoch_graph: &TransactionGraph,
    lookup: &impl ShardLookup,
    eta: f64,
) -> Result<Allocation> {
    Allocation::from_lookup(epoch_graph, lookup, eta).map_err(|e| match e {
        Error::UnmappedAccount(a) => {
            Error::ContractViolation(format!("epoch account {a} left unallocated"))
        }
        other => other,
    })
}

fn elapsed_ms(started: Instant) -> f64 {
    started.elapsed().as_secs_f64() * 1e3
}

/// Full replay of a stream; reports come in epoch order.
pub fn replay(
    txs: &[Transaction],
    params: ReplayParams,
    schedule: Schedule,
    policy: Policy,
) -> Result<Vec<EpochReport>> {
    let (mut r, warm) = Replay::start(txs, params, schedule, policy)?;
    let mut reports = vec![warm];
    while let Some(step) = r.step()? {
        reports.extend(step);
    }
    Ok(reports)
}
