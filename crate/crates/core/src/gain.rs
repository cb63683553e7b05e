//! Incremental throughput-gain arithmetic for single-node moves.
//!
//! Moving node `v` from shard `p` to shard `q` only changes the workload and
//! capacity-free throughput of `p` and `q`; every other shard keeps its
//! aggregates bit-for-bit. The gain of a move is therefore the leave gain of
//! `p` plus the join gain of `q`, each evaluated with capacity truncation.

use crate::allocation::{Allocation, ShardId};
use crate::error::{Error, Result};
use crate::graph::TransactionGraph;
use crate::metrics::capped_throughput;
use crate::params::AlloParams;

/// Relative tolerance used to detect a delta computed against an older state.
pub const STALE_TOLERANCE: f64 = 1e-6;

/// Effect of a join or leave on one shard.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShardUpdate {
    /// Change in the shard's capacity-bounded throughput.
    pub d_lambda: f64,
    pub sigma_after: f64,
    pub lambda_hat_after: f64,
}

/// A fully evaluated single-node move. `from` is `None` when the node is
/// currently unassigned and the move is a pure join.
#[derive(Debug, Clone, PartialEq)]
pub struct MoveDelta {
    pub node: usize,
    pub from: Option<ShardId>,
    pub to: ShardId,
    /// Change in total capacity-bounded throughput.
    pub d_lambda: f64,
    pub leave: Option<ShardUpdate>,
    pub join: ShardUpdate,
    // (sigma, lambda_hat) of `from` and `to` at evaluation time.
    from_before: Option<(f64, f64)>,
    to_before: (f64, f64),
}

impl MoveDelta {
    pub fn sigma_p_after(&self) -> Option<f64> {
        self.leave.map(|u| u.sigma_after)
    }

    pub fn sigma_q_after(&self) -> f64 {
        self.join.sigma_after
    }

    pub fn lambda_hat_p_after(&self) -> Option<f64> {
        self.leave.map(|u| u.lambda_hat_after)
    }

    pub fn lambda_hat_q_after(&self) -> f64 {
        self.join.lambda_hat_after
    }
}

fn check_params(alloc: &Allocation, params: &AlloParams) -> Result<()> {
    if params.k != alloc.k() {
        return Err(Error::InvalidParams(format!(
            "params.k = {} but allocation has {} shards",
            params.k,
            alloc.k()
        )));
    }
    if params.eta != alloc.eta() {
        return Err(Error::InvalidParams(format!(
            "params.eta = {} but allocation caches were built for eta = {}",
            params.eta,
            alloc.eta()
        )));
    }
    Ok(())
}

fn check_shard(alloc: &Allocation, shard: ShardId) -> Result<()> {
    if shard >= alloc.k() {
        return Err(Error::ShardOutOfRange {
            shard,
            k: alloc.k(),
        });
    }
    Ok(())
}

/// Shards other than the node's own that it has positive edge weight into.
pub fn candidates(graph: &TransactionGraph, alloc: &Allocation, node: usize) -> Vec<ShardId> {
    let own = alloc.shard_of(node);
    alloc
        .node_weights(graph, node)
        .shards()
        .filter(|&(s, w)| Some(s) != own && w > 0.0)
        .map(|(s, _)| s)
        .collect()
}

/// Gain of shard `q` when `node` (not currently in `q`) joins it.
pub fn join_gain(
    graph: &TransactionGraph,
    alloc: &Allocation,
    params: &AlloParams,
    node: usize,
    q: ShardId,
) -> Result<ShardUpdate> {
    check_params(alloc, params)?;
    check_shard(alloc, q)?;
    if alloc.shard_of(node) == Some(q) {
        return Err(Error::ContractViolation(format!(
            "node {} is already in shard {q}",
            graph.account(node)
        )));
    }
    Ok(join_unchecked(graph, alloc, params, node, q))
}

fn join_unchecked(
    graph: &TransactionGraph,
    alloc: &Allocation,
    params: &AlloParams,
    node: usize,
    q: ShardId,
) -> ShardUpdate {
    let nw = alloc.node_weights(graph, node);
    let to_q = nw.to_shard(q);
    let eta = params.eta;
    let (sigma, lambda_hat) = (alloc.sigma(q), alloc.lambda_hat(q));
    // Self-loop turns intra; edges to other shards become cross for q;
    // edges into q turn from cross to intra.
    let sigma_after = sigma + nw.self_loop + eta * (nw.total_to_others - to_q) + (1.0 - eta) * to_q;
    let lambda_hat_after = lambda_hat + nw.self_loop + nw.total_to_others / 2.0;
    ShardUpdate {
        d_lambda: capped_throughput(lambda_hat_after, sigma_after, params.lambda)
            - capped_throughput(lambda_hat, sigma, params.lambda),
        sigma_after,
        lambda_hat_after,
    }
}

/// Gain of shard `p` when `node` (currently in `p`) leaves it.
pub fn leave_gain(
    graph: &TransactionGraph,
    alloc: &Allocation,
    params: &AlloParams,
    node: usize,
    p: ShardId,
) -> Result<ShardUpdate> {
    check_params(alloc, params)?;
    check_shard(alloc, p)?;
    if alloc.shard_of(node) != Some(p) {
        return Err(Error::ContractViolation(format!(
            "node {} is not in shard {p}",
            graph.account(node)
        )));
    }
    Ok(leave_unchecked(graph, alloc, params, node, p))
}

fn leave_unchecked(
    graph: &TransactionGraph,
    alloc: &Allocation,
    params: &AlloParams,
    node: usize,
    p: ShardId,
) -> ShardUpdate {
    let nw = alloc.node_weights(graph, node);
    let to_p = nw.to_shard(p);
    let eta = params.eta;
    let (sigma, lambda_hat) = (alloc.sigma(p), alloc.lambda_hat(p));
    let sigma_after = sigma - nw.self_loop - eta * (nw.total_to_others - to_p) + (eta - 1.0) * to_p;
    let lambda_hat_after = lambda_hat - nw.self_loop - nw.total_to_others / 2.0;
    ShardUpdate {
        d_lambda: capped_throughput(lambda_hat_after, sigma_after, params.lambda)
            - capped_throughput(lambda_hat, sigma, params.lambda),
        sigma_after,
        lambda_hat_after,
    }
}

fn assemble(
    alloc: &Allocation,
    node: usize,
    from: Option<ShardId>,
    to: ShardId,
    leave: Option<ShardUpdate>,
    join: ShardUpdate,
) -> MoveDelta {
    MoveDelta {
        node,
        from,
        to,
        d_lambda: leave.map_or(0.0, |u| u.d_lambda) + join.d_lambda,
        leave,
        join,
        from_before: from.map(|p| (alloc.sigma(p), alloc.lambda_hat(p))),
        to_before: (alloc.sigma(to), alloc.lambda_hat(to)),
    }
}

/// Total throughput change of moving `node` from its current shard to `q`.
/// For an unassigned node this is the join gain alone.
pub fn move_gain(
    graph: &TransactionGraph,
    alloc: &Allocation,
    params: &AlloParams,
    node: usize,
    q: ShardId,
) -> Result<MoveDelta> {
    check_params(alloc, params)?;
    check_shard(alloc, q)?;
    if node >= alloc.node_count() {
        return Err(Error::ContractViolation(format!(
            "node index {node} out of range"
        )));
    }
    let from = alloc.shard_of(node);
    if from == Some(q) {
        return Err(Error::ContractViolation(format!(
            "move of {} from shard {q} to itself",
            graph.account(node)
        )));
    }
    let leave = from.map(|p| leave_unchecked(graph, alloc, params, node, p));
    let join = join_unchecked(graph, alloc, params, node, q);
    Ok(assemble(alloc, node, from, q, leave, join))
}

fn drifted(before: f64, now: f64) -> bool {
    (before - now).abs() > STALE_TOLERANCE * before.abs().max(now.abs()).max(1.0)
}

/// Applies a move evaluated by [`move_gain`]. Only the two shards involved
/// have their cached aggregates replaced.
pub fn apply_move(
    graph: &TransactionGraph,
    alloc: &mut Allocation,
    delta: &MoveDelta,
) -> Result<()> {
    if delta.from == Some(delta.to) {
        return Err(Error::ContractViolation(format!(
            "move of node {} from shard {} to itself",
            delta.node, delta.to
        )));
    }
    check_shard(alloc, delta.to)?;
    if delta.node >= alloc.node_count() || alloc.shard_of(delta.node) != delta.from {
        return Err(Error::StaleDelta(format!(
            "node {} is no longer in shard {:?}",
            delta.node, delta.from
        )));
    }
    let to_now = (alloc.sigma(delta.to), alloc.lambda_hat(delta.to));
    let mut stale = drifted(delta.to_before.0, to_now.0) || drifted(delta.to_before.1, to_now.1);
    if let (Some(p), Some(before)) = (delta.from, delta.from_before) {
        stale |= drifted(before.0, alloc.sigma(p)) || drifted(before.1, alloc.lambda_hat(p));
    }
    if stale {
        return Err(Error::StaleDelta(format!(
            "aggregates of shards {:?} -> {} changed since evaluation",
            delta.from, delta.to
        )));
    }
    alloc.relocate(
        graph,
        delta.node,
        delta.to,
        delta.leave.map(|u| (u.sigma_after, u.lambda_hat_after)),
        (delta.join.sigma_after, delta.join.lambda_hat_after),
    );
    Ok(())
}

/// Best join for an unassigned node: among shards it connects to, or all
/// shards when it connects to none, the largest join gain; ties go to the
/// smallest shard index.
pub fn best_join(
    graph: &TransactionGraph,
    alloc: &Allocation,
    params: &AlloParams,
    node: usize,
) -> Result<MoveDelta> {
    check_params(alloc, params)?;
    if alloc.shard_of(node).is_some() {
        return Err(Error::ContractViolation(format!(
            "node {} is already assigned",
            graph.account(node)
        )));
    }
    let connected = candidates(graph, alloc, node);
    let pool: Vec<ShardId> = if connected.is_empty() {
        (0..alloc.k()).collect()
    } else {
        connected
    };
    let mut best: Option<(ShardId, ShardUpdate)> = None;
    for q in pool {
        let join = join_unchecked(graph, alloc, params, node, q);
        if best.is_none_or(|(_, b)| join.d_lambda > b.d_lambda) {
            best = Some((q, join));
        }
    }
    let (q, join) = best.expect("k >= 1");
    Ok(assemble(alloc, node, None, q, None, join))
}

/// Best improving move for an assigned node among its candidate shards, or
/// `None` when no candidate strictly increases throughput. Ties go to the
/// smallest shard index.
pub fn best_move(
    graph: &TransactionGraph,
    alloc: &Allocation,
    params: &AlloParams,
    node: usize,
) -> Result<Option<MoveDelta>> {
    check_params(alloc, params)?;
    let p = alloc.shard_of(node).ok_or_else(|| {
        Error::ContractViolation(format!("node {} is unassigned", graph.account(node)))
    })?;
    let nw = alloc.node_weights(graph, node);
    let mut best: Option<(ShardId, ShardUpdate)> = None;
    let mut leave: Option<ShardUpdate> = None;
    for (q, w) in nw.shards() {
        if q == p || w <= 0.0 {
            continue;
        }
        let leave = *leave.get_or_insert_with(|| leave_unchecked(graph, alloc, params, node, p));
        let join = join_unchecked(graph, alloc, params, node, q);
        let gain = leave.d_lambda + join.d_lambda;
        if best.is_none_or(|(_, b)| gain > leave.d_lambda + b.d_lambda) {
            best = Some((q, join));
        }
    }
    Ok(match (best, leave) {
        (Some((q, join)), Some(leave)) if leave.d_lambda + join.d_lambda > 0.0 => {
            Some(assemble(alloc, node, Some(p), q, Some(leave), join))
        }
        _ => None,
    })
}
