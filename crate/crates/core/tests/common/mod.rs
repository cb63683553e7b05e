#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use txallo::metrics::capped_throughput;
use txallo::{AccountId, AlloParams, Allocation, Transaction, TransactionGraph};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn acc(i: u32) -> AccountId {
    AccountId::from_bytes(i.to_be_bytes().to_vec()).unwrap()
}

pub fn tx(block: u64, accounts: &[u32]) -> Transaction {
    Transaction::new(block, accounts.iter().map(|&a| acc(a))).unwrap()
}

/// `count` transactions over `accounts` accounts, 1..=max_size accounts each.
pub fn random_txs(
    rng: &mut ChaCha8Rng,
    accounts: u32,
    count: usize,
    max_size: usize,
) -> Vec<Transaction> {
    (0..count)
        .map(|_| {
            let size = rng.gen_range(1..=max_size);
            let ids: Vec<u32> = (0..size).map(|_| rng.gen_range(0..accounts)).collect();
            tx(rng.gen_range(0..50), &ids)
        })
        .collect()
}

pub fn random_allocation(
    rng: &mut ChaCha8Rng,
    graph: &TransactionGraph,
    k: usize,
    eta: f64,
) -> Allocation {
    let shards: Vec<usize> = (0..graph.node_count())
        .map(|_| rng.gen_range(0..k))
        .collect();
    Allocation::from_fn(graph, k, eta, |n| Some(shards[n])).unwrap()
}

/// Per-shard (intra, cross) weight straight from the edge list.
pub fn edge_tallies(
    graph: &TransactionGraph,
    k: usize,
    shard_of: impl Fn(usize) -> usize,
) -> Vec<(f64, f64)> {
    let mut t = vec![(0.0, 0.0); k];
    for (u, v, w) in graph.edges() {
        let (a, b) = (shard_of(u), shard_of(v));
        if a == b {
            t[a].0 += w;
        } else {
            t[a].1 += w;
            t[b].1 += w;
        }
    }
    t
}

/// Capacity-bounded throughput of every shard, computed from scratch.
pub fn oracle_shard_lambdas(
    graph: &TransactionGraph,
    alloc: &Allocation,
    params: &AlloParams,
) -> Vec<f64> {
    edge_tallies(graph, params.k, |n| alloc.shard_of(n).unwrap())
        .into_iter()
        .map(|(intra, cross)| {
            capped_throughput(
                intra + cross / 2.0,
                intra + params.eta * cross,
                params.lambda,
            )
        })
        .collect()
}

pub fn oracle_lambda(graph: &TransactionGraph, alloc: &Allocation, params: &AlloParams) -> f64 {
    oracle_shard_lambdas(graph, alloc, params).iter().sum()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
