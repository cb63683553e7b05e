//! Accounts, transactions and the undirected weighted transaction graph.
//!
//! Every transaction distributes a total weight of one over the unordered
//! pairs of accounts it touches, so the sum of all edge weights equals the
//! number of transactions folded into the graph. Single-account transactions
//! put their unit weight on a self-loop.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Opaque account identifier, compared as raw bytes.
///
/// The textual form is `0x`-prefixed lowercase hex. Parsing accepts an
/// optional prefix, either case and odd digit counts (left-padded with a
/// zero nibble).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AccountId(Box<[u8]>);

impl AccountId {
    pub fn from_bytes(bytes: impl Into<Vec<u8>>) -> Result<Self> {
        let bytes = bytes.into();
        if bytes.is_empty() {
            return Err(Error::InvalidAccount(String::new()));
        }
        Ok(AccountId(bytes.into_boxed_slice()))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl FromStr for AccountId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let trimmed = s.trim();
        let digits = trimmed
            .strip_prefix("0x")
            .or_else(|| trimmed.strip_prefix("0X"))
            .unwrap_or(trimmed);
        if digits.is_empty() {
            return Err(Error::InvalidAccount(s.to_string()));
        }
        let padded;
        let digits = if digits.len() % 2 == 1 {
            padded = format!("0{digits}");
            padded.as_str()
        } else {
            digits
        };
        let bytes = hex::decode(digits).map_err(|_| Error::InvalidAccount(s.to_string()))?;
        AccountId::from_bytes(bytes)
    }
}

impl fmt::Display for AccountId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(&self.0))
    }
}

impl fmt::Debug for AccountId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// One ledger entry: the deduplicated set of accounts it involves.
///
/// Input and output roles are erased; only the union matters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    block: u64,
    accounts: Vec<AccountId>,
}

impl Transaction {
    pub fn new(block: u64, accounts: impl IntoIterator<Item = AccountId>) -> Result<Self> {
        let mut accounts: Vec<AccountId> = accounts.into_iter().collect();
        accounts.sort();
        accounts.dedup();
        if accounts.is_empty() {
            return Err(Error::EmptyTransaction { block });
        }
        Ok(Transaction { block, accounts })
    }

    pub fn block(&self) -> u64 {
        self.block
    }

    /// Accounts in canonical (byte-lexicographic) order.
    pub fn accounts(&self) -> &[AccountId] {
        &self.accounts
    }
}

/// Number of unordered account pairs a transaction expands into.
///
/// A single-account transaction counts as one self-loop pair.
pub fn pair_count(tx: &Transaction) -> u64 {
    let n = tx.accounts.len() as u64;
    if n < 2 {
        1
    } else {
        n * (n - 1) / 2
    }
}

/// Undirected weighted graph over accounts.
///
/// Node indices are dense and stable: merging only ever appends nodes, so an
/// index handed out once keeps referring to the same account.
#[derive(Debug, Clone, Default)]
pub struct TransactionGraph {
    ids: Vec<AccountId>,
    index: HashMap<AccountId, usize>,
    // Neighbor weights excluding self-loops, mirrored on both endpoints.
    adj: Vec<BTreeMap<usize, f64>>,
    self_loops: Vec<f64>,
    // Sum of non-self incident weight per node.
    incident: Vec<f64>,
    tx_count: u64,
}

impl TransactionGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn tx_count(&self) -> u64 {
        self.tx_count
    }

    /// Number of unordered pairs with positive weight, self-loops included.
    pub fn edge_count(&self) -> usize {
        let links: usize = self.adj.iter().map(BTreeMap::len).sum();
        links / 2 + self.self_loops.iter().filter(|w| **w > 0.0).count()
    }

    pub fn account(&self, node: usize) -> &AccountId {
        &self.ids[node]
    }

    pub fn accounts(&self) -> &[AccountId] {
        &self.ids
    }

    pub fn index_of(&self, account: &AccountId) -> Option<usize> {
        self.index.get(account).copied()
    }

    /// Neighbors of `node` other than itself, in ascending node index.
    pub fn neighbors(&self, node: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.adj[node].iter().map(|(&u, &w)| (u, w))
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adj[node].len()
    }

    pub fn self_loop(&self, node: usize) -> f64 {
        self.self_loops[node]
    }

    /// Total weight from `node` to every other node (self-loop excluded).
    pub fn incident_weight(&self, node: usize) -> f64 {
        self.incident[node]
    }

    pub fn weight(&self, u: usize, v: usize) -> f64 {
        if u == v {
            self.self_loops[u]
        } else {
            self.adj[u].get(&v).copied().unwrap_or(0.0)
        }
    }

    /// Every unordered pair once as `(u, v, w)` with `u <= v`, ordered by `u`
    /// then `v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.ids.len()).flat_map(move |u| {
            let self_loop = self.self_loops[u];
            let head = (self_loop > 0.0).then_some((u, u, self_loop));
            head.into_iter()
                .chain(self.adj[u].range(u + 1..).map(move |(&v, &w)| (u, v, w)))
        })
    }

    /// Sum of all edge weights, each unordered pair counted once.
    pub fn total_weight(&self) -> f64 {
        self.edges().map(|(_, _, w)| w).sum()
    }

    /// Node indices sorted by account identifier.
    pub fn canonical_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.ids.len()).collect();
        order.sort_by(|&a, &b| self.ids[a].cmp(&self.ids[b]));
        order
    }

    /// Edge list keyed by account identifiers, smaller identifier first,
    /// sorted. Independent of node index assignment.
    pub fn canonical_edges(&self) -> Vec<(AccountId, AccountId, f64)> {
        let mut out: Vec<_> = self
            .edges()
            .map(|(u, v, w)| {
                let (a, b) = (&self.ids[u], &self.ids[v]);
                if a <= b {
                    (a.clone(), b.clone(), w)
                } else {
                    (b.clone(), a.clone(), w)
                }
            })
            .collect();
        out.sort_by(|x, y| (&x.0, &x.1).cmp(&(&y.0, &y.1)));
        out
    }

    pub fn ensure_node(&mut self, account: &AccountId) -> usize {
        if let Some(&ix) = self.index.get(account) {
            return ix;
        }
        let ix = self.ids.len();
        self.ids.push(account.clone());
        self.index.insert(account.clone(), ix);
        self.adj.push(BTreeMap::new());
        self.self_loops.push(0.0);
        self.incident.push(0.0);
        ix
    }

    fn add_weight(&mut self, u: usize, v: usize, w: f64) {
        if u == v {
            self.self_loops[u] += w;
        } else {
            *self.adj[u].entry(v).or_insert(0.0) += w;
            *self.adj[v].entry(u).or_insert(0.0) += w;
            self.incident[u] += w;
            self.incident[v] += w;
        }
    }

    /// Folds one transaction into the graph.
    pub fn add_transaction(&mut self, tx: &Transaction) {
        let nodes: Vec<usize> = tx.accounts.iter().map(|a| self.ensure_node(a)).collect();
        if nodes.len() == 1 {
            self.add_weight(nodes[0], nodes[0], 1.0);
        } else {
            let w = 1.0 / pair_count(tx) as f64;
            for i in 0..nodes.len() {
                for j in i + 1..nodes.len() {
                    self.add_weight(nodes[i], nodes[j], w);
                }
            }
        }
        self.tx_count += 1;
    }

    /// Adds every edge of `delta` to `self`. Existing node indices are kept;
    /// accounts new to `self` are appended in `delta`'s node order.
    pub fn merge_from(&mut self, delta: &TransactionGraph) {
        let map: Vec<usize> = delta.ids.iter().map(|a| self.ensure_node(a)).collect();
        for (u, v, w) in delta.edges() {
            self.add_weight(map[u], map[v], w);
        }
        self.tx_count += delta.tx_count;
    }
}

/// Builds the transaction graph of a stream.
///
/// Transactions are folded in ascending block order (stable within a block),
/// so floating-point sums do not depend on how blocks were interleaved.
pub fn build_graph(txs: &[Transaction]) -> TransactionGraph {
    let mut order: Vec<usize> = (0..txs.len()).collect();
    order.sort_by_key(|&i| txs[i].block);
    let mut graph = TransactionGraph::new();
    for i in order {
        graph.add_transaction(&txs[i]);
    }
    graph
}

/// Edge-wise sum of two graphs.
pub fn merge_graph(base: &TransactionGraph, delta: &TransactionGraph) -> TransactionGraph {
    let mut merged = base.clone();
    merged.merge_from(delta);
    merged
}
