//! Adaptive allocation update from the previous allocation plus only the
//! newly committed transactions.
//!
//! Gains are evaluated on the full merged graph, but only accounts touched
//! by the new transactions are ever visited, so the work scales with the
//! epoch rather than with the history.

use std::collections::BTreeSet;

use crate::allocation::Allocation;
use crate::error::{Error, Result};
use crate::gain::{apply_move, best_join, MoveDelta};
use crate::global::{optimize, Phase};
use crate::graph::{build_graph, AccountId, Transaction, TransactionGraph};
use crate::params::AlloParams;

/// Transactions committed since the last update and the accounts they touch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpochDelta {
    new_txs: Vec<Transaction>,
    touched: BTreeSet<AccountId>,
}

impl EpochDelta {
    pub fn new(new_txs: Vec<Transaction>) -> Self {
        let touched = new_txs
            .iter()
            .flat_map(|tx| tx.accounts().iter().cloned())
            .collect();
        EpochDelta { new_txs, touched }
    }

    pub fn new_txs(&self) -> &[Transaction] {
        &self.new_txs
    }

    /// Touched accounts in canonical order.
    pub fn touched(&self) -> &BTreeSet<AccountId> {
        &self.touched
    }

    pub fn is_empty(&self) -> bool {
        self.new_txs.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct ATxAlloResult {
    pub allocation: Allocation,
    /// Accounts seen for the first time in this epoch.
    pub new_nodes: usize,
    pub sweeps: usize,
    pub history: Vec<f64>,
}

/// Updates `prev` for a graph that already includes `epoch`'s transactions.
///
/// `prev` must be the allocation of the graph before the merge, with every
/// node of that graph assigned.
pub fn a_txallo(
    graph: &TransactionGraph,
    prev: Allocation,
    epoch: &EpochDelta,
    params: &AlloParams,
) -> Result<ATxAlloResult> {
    a_txallo_observed(graph, prev, epoch, params, |_, _, _| {})
}

/// [`a_txallo`] calling `observer` after every applied move.
pub fn a_txallo_observed(
    graph: &TransactionGraph,
    mut alloc: Allocation,
    epoch: &EpochDelta,
    params: &AlloParams,
    mut observer: impl FnMut(Phase, &Allocation, &MoveDelta),
) -> Result<ATxAlloResult> {
    params.validate()?;
    if params.k != alloc.k() || params.eta != alloc.eta() {
        return Err(Error::InvalidParams(format!(
            "params (k {}, eta {}) do not match the allocation (k {}, eta {})",
            params.k,
            params.eta,
            alloc.k(),
            alloc.eta()
        )));
    }
    if !alloc.is_complete() {
        return Err(Error::StaleAllocation(format!(
            "{} previously known accounts are unassigned",
            alloc.unassigned_count()
        )));
    }
    let known = alloc.node_count();
    if epoch.is_empty() {
        alloc
            .ensure_covers(graph)
            .map_err(|e| Error::StaleAllocation(e.to_string()))?;
        return Ok(ATxAlloResult {
            allocation: alloc,
            new_nodes: 0,
            sweeps: 0,
            history: Vec::new(),
        });
    }

    let mut touched = Vec::with_capacity(epoch.touched.len());
    for account in &epoch.touched {
        let node = graph.index_of(account).ok_or_else(|| {
            Error::StaleAllocation(format!("graph does not contain epoch account {account}"))
        })?;
        touched.push(node);
    }
    let new_nodes = touched.iter().filter(|&&n| n >= known).count();
    if known + new_nodes != graph.node_count() {
        return Err(Error::StaleAllocation(format!(
            "graph has {} nodes, expected {known} known plus {new_nodes} new",
            graph.node_count()
        )));
    }

    let delta = build_graph(&epoch.new_txs);
    alloc.absorb_merge(graph, &delta)?;

    for &node in &touched {
        if alloc.shard_of(node).is_none() {
            let d = best_join(graph, &alloc, params, node)?;
            apply_move(graph, &mut alloc, &d)?;
            observer(Phase::Absorb, &alloc, &d);
        }
    }
    let (sweeps, history) = optimize(graph, &mut alloc, params, &touched, false, &mut observer)?;
    Ok(ATxAlloResult {
        allocation: alloc,
        new_nodes,
        sweeps,
        history,
    })
}
