//! Account-to-shard mappings.
//!
//! [`ShardMap`] is the portable form: a plain total mapping from account to
//! shard, independent of any graph. [`Allocation`] is the working form used
//! by the optimizers: it is bound to one [`TransactionGraph`] by node index
//! and caches, per shard, the workload `sigma` and the capacity-free
//! throughput `lambda_hat`, plus per node the edge weight into every shard.
//!
//! Nodes may be temporarily unassigned (fresh accounts, or nodes still in a
//! small initial community). Their edges count as cross-shard from the side
//! of any assigned endpoint and are not charged to any shard otherwise, so
//! joining a shard is exactly the join-move arithmetic.

use std::collections::BTreeMap;

use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::graph::{AccountId, TransactionGraph};

pub type ShardId = usize;

/// Relative tolerance for cache verification.
pub const CACHE_TOLERANCE: f64 = 1e-9;
/// Relative drift beyond which cached aggregates are replaced.
pub const DRIFT_TOLERANCE: f64 = 1e-8;

/// Anything that can answer "which shard holds this account".
pub trait ShardLookup {
    fn shard_count(&self) -> usize;
    fn shard_of_account(&self, account: &AccountId) -> Option<ShardId>;
}

/// Plain account-to-shard mapping over `k` shards.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShardMap {
    k: usize,
    assign: BTreeMap<AccountId, ShardId>,
}

impl ShardMap {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParams("k must be at least 1".into()));
        }
        Ok(ShardMap {
            k,
            assign: BTreeMap::new(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn insert(&mut self, account: AccountId, shard: ShardId) -> Result<()> {
        if shard >= self.k {
            return Err(Error::ShardOutOfRange { shard, k: self.k });
        }
        self.assign.insert(account, shard);
        Ok(())
    }

    pub fn get(&self, account: &AccountId) -> Option<ShardId> {
        self.assign.get(account).copied()
    }

    pub fn len(&self) -> usize {
        self.assign.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assign.is_empty()
    }

    /// Entries in account order.
    pub fn iter(&self) -> impl Iterator<Item = (&AccountId, ShardId)> {
        self.assign.iter().map(|(a, &s)| (a, s))
    }
}

impl ShardLookup for ShardMap {
    fn shard_count(&self) -> usize {
        self.k
    }

    fn shard_of_account(&self, account: &AccountId) -> Option<ShardId> {
        self.get(account)
    }
}

/// Weight a node sends into one shard, with the number of distinct
/// neighbors carrying it (used to drop the entry exactly when it empties).
#[derive(Debug, Clone, Copy, PartialEq)]
struct ShardLink {
    shard: u32,
    weight: f64,
    links: u32,
}

/// Read-only view of one node's edge weight into each shard.
#[derive(Debug, Clone, Copy)]
pub struct NodeCommunityWeights<'a> {
    links: &'a [ShardLink],
    /// Weight of the node's self-loop.
    pub self_loop: f64,
    /// Weight to every other node, assigned or not.
    pub total_to_others: f64,
}

impl NodeCommunityWeights<'_> {
    /// Weight from the node into shard `shard`, self-loop excluded.
    pub fn to_shard(&self, shard: ShardId) -> f64 {
        self.links
            .binary_search_by_key(&(shard as u32), |l| l.shard)
            .map(|i| self.links[i].weight)
            .unwrap_or(0.0)
    }

    /// Shards with at least one neighbor, ascending, with their weights.
    pub fn shards(&self) -> impl Iterator<Item = (ShardId, f64)> + '_ {
        self.links.iter().map(|l| (l.shard as ShardId, l.weight))
    }
}

/// Intra and cross weight charged to one shard.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ShardTally {
    pub intra: f64,
    pub cross: f64,
}

impl ShardTally {
    pub fn sigma(&self, eta: f64) -> f64 {
        self.intra + eta * self.cross
    }

    pub fn lambda_hat(&self) -> f64 {
        self.intra + self.cross / 2.0
    }
}

/// Per-shard intra/cross weights computed from scratch.
///
/// Self-loops are intra. An edge with exactly one assigned endpoint is cross
/// for that endpoint's shard.
pub fn shard_tallies(
    graph: &TransactionGraph,
    k: usize,
    shard_of: impl Fn(usize) -> Option<ShardId>,
) -> Vec<ShardTally> {
    let mut tallies = vec![ShardTally::default(); k];
    for (u, v, w) in graph.edges() {
        match (shard_of(u), shard_of(v)) {
            (Some(a), Some(b)) if a == b => tallies[a].intra += w,
            (Some(a), Some(b)) => {
                tallies[a].cross += w;
                tallies[b].cross += w;
            }
            (Some(a), None) | (None, Some(a)) => tallies[a].cross += w,
            (None, None) => {}
        }
    }
    tallies
}

const UNASSIGNED: u32 = u32::MAX;

/// Graph-bound allocation with cached per-shard aggregates.
#[derive(Debug, Clone)]
pub struct Allocation {
    k: usize,
    eta: f64,
    assign: Vec<u32>,
    unassigned: usize,
    sigma: Vec<f64>,
    lambda_hat: Vec<f64>,
    links: Vec<SmallVec<[ShardLink; 4]>>,
}

impl Allocation {
    /// Every node of `graph` unassigned; all shards empty.
    pub fn unassigned(graph: &TransactionGraph, k: usize, eta: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParams("k must be at least 1".into()));
        }
        if k >= UNASSIGNED as usize {
            return Err(Error::InvalidParams(format!("k = {k} is too large")));
        }
        let n = graph.node_count();
        Ok(Allocation {
            k,
            eta,
            assign: vec![UNASSIGNED; n],
            unassigned: n,
            sigma: vec![0.0; k],
            lambda_hat: vec![0.0; k],
            links: vec![SmallVec::new(); n],
        })
    }

    /// Builds an allocation from a per-node shard choice; `None` leaves the
    /// node unassigned.
    pub fn from_fn(
        graph: &TransactionGraph,
        k: usize,
        eta: f64,
        mut shard_of: impl FnMut(usize) -> Option<ShardId>,
    ) -> Result<Self> {
        let mut alloc = Self::unassigned(graph, k, eta)?;
        for node in 0..graph.node_count() {
            if let Some(s) = shard_of(node) {
                if s >= k {
                    return Err(Error::ShardOutOfRange { shard: s, k });
                }
                alloc.assign[node] = s as u32;
                alloc.unassigned -= 1;
            }
        }
        alloc.rebuild_links(graph);
        alloc.recompute_aggregates(graph);
        Ok(alloc)
    }

    /// Binds a [`ShardMap`] to `graph`. Every graph node must be mapped.
    pub fn from_shard_map(graph: &TransactionGraph, map: &ShardMap, eta: f64) -> Result<Self> {
        Self::from_lookup(graph, map, eta)
    }

    /// Binds any lookup to `graph`. Every graph node must be mapped.
    pub fn from_lookup(
        graph: &TransactionGraph,
        lookup: &impl ShardLookup,
        eta: f64,
    ) -> Result<Self> {
        for account in graph.accounts() {
            if lookup.shard_of_account(account).is_none() {
                return Err(Error::UnmappedAccount(account.clone()));
            }
        }
        Self::from_fn(graph, lookup.shard_count(), eta, |node| {
            lookup.shard_of_account(graph.account(node))
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Number of graph nodes this allocation knows about.
    pub fn node_count(&self) -> usize {
        self.assign.len()
    }

    pub fn unassigned_count(&self) -> usize {
        self.unassigned
    }

    pub fn is_complete(&self) -> bool {
        self.unassigned == 0
    }

    pub fn shard_of(&self, node: usize) -> Option<ShardId> {
        match self.assign.get(node) {
            Some(&s) if s != UNASSIGNED => Some(s as ShardId),
            _ => None,
        }
    }

    pub fn sigma(&self, shard: ShardId) -> f64 {
        self.sigma[shard]
    }

    pub fn lambda_hat(&self, shard: ShardId) -> f64 {
        self.lambda_hat[shard]
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigma
    }

    pub fn lambda_hats(&self) -> &[f64] {
        &self.lambda_hat
    }

    /// Node indices per shard, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (node, &s) in self.assign.iter().enumerate() {
            if s != UNASSIGNED {
                out[s as usize].push(node);
            }
        }
        out
    }

    pub fn node_weights<'a>(
        &'a self,
        graph: &TransactionGraph,
        node: usize,
    ) -> NodeCommunityWeights<'a> {
        NodeCommunityWeights {
            links: &self.links[node],
            self_loop: graph.self_loop(node),
            total_to_others: graph.incident_weight(node),
        }
    }

    /// Checks that the allocation covers every node of `graph`.
    pub fn ensure_covers(&self, graph: &TransactionGraph) -> Result<()> {
        if self.assign.len() < graph.node_count() {
            let missing = graph.account(self.assign.len());
            return Err(Error::UnmappedAccount(missing.clone()));
        }
        if self.assign.len() > graph.node_count() {
            return Err(Error::StaleAllocation(format!(
                "allocation knows {} nodes but graph has {}",
                self.assign.len(),
                graph.node_count()
            )));
        }
        if self.unassigned > 0 {
            let node = self
                .assign
                .iter()
                .position(|&s| s == UNASSIGNED)
                .expect("unassigned count is positive");
            return Err(Error::UnmappedAccount(graph.account(node).clone()));
        }
        Ok(())
    }

    /// Portable mapping over the assigned nodes.
    pub fn to_shard_map(&self, graph: &TransactionGraph) -> ShardMap {
        let mut map = ShardMap::new(self.k).expect("k validated at construction");
        for (node, &s) in self.assign.iter().enumerate() {
            if s != UNASSIGNED {
                map.assign.insert(graph.account(node).clone(), s as ShardId);
            }
        }
        map
    }

    pub fn bind<'a>(&'a self, graph: &'a TransactionGraph) -> BoundAllocation<'a> {
        BoundAllocation { graph, alloc: self }
    }

    /// Aggregates recomputed from scratch: `(sigma, lambda_hat)` per shard.
    pub fn recompute(&self, graph: &TransactionGraph) -> (Vec<f64>, Vec<f64>) {
        let tallies = shard_tallies(graph, self.k, |n| self.shard_of(n));
        (
            tallies.iter().map(|t| t.sigma(self.eta)).collect(),
            tallies.iter().map(ShardTally::lambda_hat).collect(),
        )
    }

    /// Fails if any cached aggregate differs from its recomputation by more
    /// than [`CACHE_TOLERANCE`] relative.
    pub fn verify(&self, graph: &TransactionGraph) -> Result<()> {
        let (sigma, lambda_hat) = self.recompute(graph);
        let scale = graph.total_weight().max(1.0);
        for i in 0..self.k {
            let ds = (sigma[i] - self.sigma[i]).abs();
            let dl = (lambda_hat[i] - self.lambda_hat[i]).abs();
            if ds > CACHE_TOLERANCE * scale || dl > CACHE_TOLERANCE * scale {
                return Err(Error::ContractViolation(format!(
                    "shard {i}: cached (sigma {}, lambda_hat {}) vs recomputed ({}, {})",
                    self.sigma[i], self.lambda_hat[i], sigma[i], lambda_hat[i]
                )));
            }
        }
        Ok(())
    }

    /// Replaces the cached aggregates if they drifted beyond
    /// [`DRIFT_TOLERANCE`]. Returns whether a replacement happened.
    pub fn refresh_if_drifted(&mut self, graph: &TransactionGraph) -> bool {
        let (sigma, lambda_hat) = self.recompute(graph);
        let scale = graph.total_weight().max(1.0);
        let drifted = (0..self.k).any(|i| {
            (sigma[i] - self.sigma[i]).abs() > DRIFT_TOLERANCE * scale
                || (lambda_hat[i] - self.lambda_hat[i]).abs() > DRIFT_TOLERANCE * scale
        });
        if drifted {
            self.sigma = sigma;
            self.lambda_hat = lambda_hat;
        }
        drifted
    }

    /// Brings the allocation up to date after `delta` was merged into the
    /// graph it was built for, producing `merged`.
    ///
    /// Accounts new to the graph start unassigned. Cached aggregates absorb
    /// the delta's edges, and the per-shard weights of every node touched by
    /// the delta are rebuilt from the merged adjacency.
    pub fn absorb_merge(
        &mut self,
        merged: &TransactionGraph,
        delta: &TransactionGraph,
    ) -> Result<()> {
        let n = merged.node_count();
        if n < self.assign.len() {
            return Err(Error::StaleAllocation(format!(
                "allocation knows {} nodes but graph has {n}",
                self.assign.len()
            )));
        }
        let added = n - self.assign.len();
        self.assign.resize(n, UNASSIGNED);
        self.links.resize(n, SmallVec::new());
        self.unassigned += added;

        let mut map = Vec::with_capacity(delta.node_count());
        for account in delta.accounts() {
            let node = merged.index_of(account).ok_or_else(|| {
                Error::StaleAllocation(format!("delta account {account} missing from graph"))
            })?;
            map.push(node);
        }
        let eta = self.eta;
        for (u, v, w) in delta.edges() {
            let (u, v) = (map[u], map[v]);
            match (self.shard_of(u), self.shard_of(v)) {
                (Some(a), Some(b)) if a == b => {
                    self.sigma[a] += w;
                    self.lambda_hat[a] += w;
                }
                (Some(a), Some(b)) => {
                    self.sigma[a] += eta * w;
                    self.sigma[b] += eta * w;
                    self.lambda_hat[a] += w / 2.0;
                    self.lambda_hat[b] += w / 2.0;
                }
                (Some(a), None) | (None, Some(a)) => {
                    self.sigma[a] += eta * w;
                    self.lambda_hat[a] += w / 2.0;
                }
                (None, None) => {}
            }
        }
        for &node in &map {
            self.links[node] = self.links_from_scratch(merged, node);
        }
        Ok(())
    }

    fn links_from_scratch(
        &self,
        graph: &TransactionGraph,
        node: usize,
    ) -> SmallVec<[ShardLink; 4]> {
        let mut out: SmallVec<[ShardLink; 4]> = SmallVec::new();
        for (u, w) in graph.neighbors(node) {
            if let Some(s) = self.shard_of(u) {
                add_link(&mut out, s as u32, w);
            }
        }
        out
    }

    fn rebuild_links(&mut self, graph: &TransactionGraph) {
        for node in 0..graph.node_count() {
            self.links[node] = self.links_from_scratch(graph, node);
        }
    }

    fn recompute_aggregates(&mut self, graph: &TransactionGraph) {
        let (sigma, lambda_hat) = self.recompute(graph);
        self.sigma = sigma;
        self.lambda_hat = lambda_hat;
    }

    /// Moves `node` to `to` and installs the given post-move aggregates.
    /// Callers are responsible for the aggregates being correct.
    pub(crate) fn relocate(
        &mut self,
        graph: &TransactionGraph,
        node: usize,
        to: ShardId,
        from_after: Option<(f64, f64)>,
        to_after: (f64, f64),
    ) {
        let from = self.shard_of(node);
        if let (Some(p), Some((sigma, lambda_hat))) = (from, from_after) {
            self.sigma[p] = sigma;
            self.lambda_hat[p] = lambda_hat;
        }
        self.sigma[to] = to_after.0;
        self.lambda_hat[to] = to_after.1;
        if from.is_none() {
            self.unassigned -= 1;
        }
        self.assign[node] = to as u32;
        for (u, w) in graph.neighbors(node) {
            if let Some(p) = from {
                remove_link(&mut self.links[u], p as u32, w);
            }
            add_link(&mut self.links[u], to as u32, w);
        }
    }
}

fn add_link(links: &mut SmallVec<[ShardLink; 4]>, shard: u32, w: f64) {
    match links.binary_search_by_key(&shard, |l| l.shard) {
        Ok(i) => {
            links[i].weight += w;
            links[i].links += 1;
        }
        Err(i) => links.insert(
            i,
            ShardLink {
                shard,
                weight: w,
                links: 1,
            },
        ),
    }
}

fn remove_link(links: &mut SmallVec<[ShardLink; 4]>, shard: u32, w: f64) {
    if let Ok(i) = links.binary_search_by_key(&shard, |l| l.shard) {
        if links[i].links <= 1 {
            links.remove(i);
        } else {
            links[i].weight -= w;
            links[i].links -= 1;
        }
    }
}

/// An [`Allocation`] paired with its graph, usable as a [`ShardLookup`].
#[derive(Debug, Clone, Copy)]
pub struct BoundAllocation<'a> {
    pub graph: &'a TransactionGraph,
    pub alloc: &'a Allocation,
}

impl ShardLookup for BoundAllocation<'_> {
    fn shard_count(&self) -> usize {
        self.alloc.k()
    }

    fn shard_of_account(&self, account: &AccountId) -> Option<ShardId> {
        self.graph
            .index_of(account)
            .and_then(|n| self.alloc.shard_of(n))
    }
}
