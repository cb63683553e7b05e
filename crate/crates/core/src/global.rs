//! Global allocation over the full transaction graph.
//!
//! 1. Louvain communities seed the shards: the `k` heaviest communities by
//!    workload become shards, padded with empty shards when there are fewer.
//! 2. Nodes of the remaining small communities join, one at a time in
//!    canonical order, the shard with the best join gain.
//! 3. Sweeps over every node move it to its best candidate shard whenever
//!    that strictly increases capacity-bounded throughput, until a sweep
//!    gains less than `epsilon`.

use crate::allocation::{shard_tallies, Allocation};
use crate::error::{Error, Result};
use crate::gain::{apply_move, best_join, best_move, MoveDelta};
use crate::graph::TransactionGraph;
use crate::louvain::louvain;
use crate::metrics::total_throughput;
use crate::params::AlloParams;

/// Which part of an allocator produced a move.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Placing a node that had no shard yet.
    Absorb,
    /// Improving move during a sweep.
    Optimize,
}

#[derive(Debug, Clone)]
pub struct GTxAlloResult {
    pub allocation: Allocation,
    pub sweeps: usize,
    /// Capacity-bounded total throughput of the final allocation.
    pub final_lambda: f64,
    /// Throughput gained in each sweep.
    pub history: Vec<f64>,
    /// Number of Louvain communities before truncation to `k`.
    pub initial_communities: usize,
}

pub fn g_txallo(graph: &TransactionGraph, params: &AlloParams) -> Result<GTxAlloResult> {
    g_txallo_observed(graph, params, |_, _, _| {})
}

/// [`g_txallo`] calling `observer` after every applied move.
pub fn g_txallo_observed(
    graph: &TransactionGraph,
    params: &AlloParams,
    mut observer: impl FnMut(Phase, &Allocation, &MoveDelta),
) -> Result<GTxAlloResult> {
    params.validate()?;
    if graph.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let communities = louvain(graph)?;
    let l = communities.community_count();

    // Rank communities by workload, heaviest first; labels already follow
    // smallest-member order, so they break ties.
    let tallies = shard_tallies(graph, l, |n| Some(communities.label(n)));
    let mut ranked: Vec<usize> = (0..l).collect();
    ranked.sort_by(|&a, &b| {
        tallies[b]
            .sigma(params.eta)
            .total_cmp(&tallies[a].sigma(params.eta))
            .then(a.cmp(&b))
    });
    let mut shard_of_comm = vec![None; l];
    for (shard, &c) in ranked.iter().take(params.k).enumerate() {
        shard_of_comm[c] = Some(shard);
    }
    let mut alloc = Allocation::from_fn(graph, params.k, params.eta, |n| {
        shard_of_comm[communities.label(n)]
    })?;
    log::debug!(
        "g_txallo: {l} communities, {} nodes outside the top {}",
        alloc.unassigned_count(),
        params.k
    );

    let order = graph.canonical_order();
    for &node in &order {
        if alloc.shard_of(node).is_none() {
            let delta = best_join(graph, &alloc, params, node)?;
            apply_move(graph, &mut alloc, &delta)?;
            observer(Phase::Absorb, &alloc, &delta);
        }
    }

    let (sweeps, history) = optimize(graph, &mut alloc, params, &order, true, &mut observer)?;
    let final_lambda = total_throughput(graph, &alloc, params)?;
    Ok(GTxAlloResult {
        allocation: alloc,
        sweeps,
        final_lambda,
        history,
        initial_communities: l,
    })
}

/// Repeated improving sweeps over `nodes` until a sweep gains less than
/// `epsilon` or `max_sweeps` is reached. Returns the sweep count and the
/// per-sweep gains.
pub(crate) fn optimize(
    graph: &TransactionGraph,
    alloc: &mut Allocation,
    params: &AlloParams,
    nodes: &[usize],
    refresh: bool,
    observer: &mut impl FnMut(Phase, &Allocation, &MoveDelta),
) -> Result<(usize, Vec<f64>)> {
    let mut history = Vec::new();
    loop {
        let mut gained = 0.0;
        for &node in nodes {
            if let Some(delta) = best_move(graph, alloc, params, node)? {
                apply_move(graph, alloc, &delta)?;
                gained += delta.d_lambda;
                observer(Phase::Optimize, alloc, &delta);
            }
        }
        history.push(gained);
        if refresh && alloc.refresh_if_drifted(graph) {
            log::debug!("sweep {}: cached aggregates refreshed", history.len());
        }
        if gained < params.epsilon || history.len() >= params.max_sweeps {
            break;
        }
    }
    Ok((history.len(), history))
}
