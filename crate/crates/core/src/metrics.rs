//! Performance metrics of an allocation: cross-shard ratio, workload,
//! balance, capacity-bounded throughput and confirmation latency.
//!
//! Everything here is evaluated from scratch against the graph; cached
//! aggregates on [`Allocation`] are never consulted.

use serde::{Deserialize, Serialize};

use crate::allocation::{shard_tallies, Allocation, ShardId, ShardLookup, ShardTally};
use crate::error::{Error, Result};
use crate::graph::{Transaction, TransactionGraph};
use crate::params::AlloParams;

/// Metrics of one shard.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShardReport {
    pub sigma: f64,
    pub throughput: f64,
    pub latency: f64,
    pub intra_weight: f64,
    pub cross_weight: f64,
}

/// System-wide metrics of an allocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemReport {
    pub gamma: f64,
    pub rho: f64,
    pub throughput_total: f64,
    pub throughput_normalized: f64,
    pub latency_mean: f64,
    pub latency_worst: f64,
    pub shards: Vec<ShardReport>,
}

/// Number of distinct shards a transaction touches.
pub fn mu(tx: &Transaction, lookup: &impl ShardLookup) -> Result<usize> {
    let mut shards: Vec<ShardId> = Vec::with_capacity(tx.accounts().len());
    for account in tx.accounts() {
        let s = lookup
            .shard_of_account(account)
            .ok_or_else(|| Error::UnmappedAccount(account.clone()))?;
        shards.push(s);
    }
    shards.sort_unstable();
    shards.dedup();
    Ok(shards.len())
}

fn tallies(graph: &TransactionGraph, alloc: &Allocation) -> Result<Vec<ShardTally>> {
    alloc.ensure_covers(graph)?;
    Ok(shard_tallies(graph, alloc.k(), |n| alloc.shard_of(n)))
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

/// Workload of shard `shard`: intra weight plus `eta` times cross weight.
pub fn shard_workload(
    graph: &TransactionGraph,
    alloc: &Allocation,
    params: &AlloParams,
    shard: ShardId,
) -> Result<f64> {
    check_shard(alloc, shard)?;
    Ok(tallies(graph, alloc)?[shard].sigma(params.eta))
}

/// Fraction of edge weight whose endpoints lie in different shards.
pub fn gamma_graph(graph: &TransactionGraph, alloc: &Allocation) -> Result<f64> {
    if graph.is_empty() {
        return Err(Error::EmptyGraph);
    }
    alloc.ensure_covers(graph)?;
    let mut cross = 0.0;
    let mut total = 0.0;
    for (u, v, w) in graph.edges() {
        total += w;
        if alloc.shard_of(u) != alloc.shard_of(v) {
            cross += w;
        }
    }
    Ok(cross / total)
}

/// Fraction of transactions touching more than one shard.
pub fn gamma_exact(txs: &[Transaction], lookup: &impl ShardLookup) -> Result<f64> {
    if txs.is_empty() {
        return Err(Error::EmptyTransactions);
    }
    let mut cross = 0usize;
    for tx in txs {
        if mu(tx, lookup)? > 1 {
            cross += 1;
        }
    }
    Ok(cross as f64 / txs.len() as f64)
}

/// Population standard deviation of per-shard workloads.
pub fn balance(sigmas: &[f64]) -> f64 {
    if sigmas.is_empty() {
        return 0.0;
    }
    let k = sigmas.len() as f64;
    let mean = sigmas.iter().sum::<f64>() / k;
    (sigmas.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / k).sqrt()
}

/// Capacity-bounded throughput of a shard with capacity-free throughput
/// `lambda_hat` and workload `sigma`.
pub fn capped_throughput(lambda_hat: f64, sigma: f64, lambda: f64) -> f64 {
    if sigma <= lambda {
        lambda_hat
    } else {
        lambda / sigma * lambda_hat
    }
}

pub fn shard_throughput(
    graph: &TransactionGraph,
    alloc: &Allocation,
    params: &AlloParams,
    shard: ShardId,
) -> Result<f64> {
    check_shard(alloc, shard)?;
    let t = tallies(graph, alloc)?[shard];
    Ok(capped_throughput(
        t.lambda_hat(),
        t.sigma(params.eta),
        params.lambda,
    ))
}

/// Sum of capacity-bounded throughput over all shards.
pub fn total_throughput(
    graph: &TransactionGraph,
    alloc: &Allocation,
    params: &AlloParams,
) -> Result<f64> {
    Ok(tallies(graph, alloc)?
        .iter()
        .map(|t| capped_throughput(t.lambda_hat(), t.sigma(params.eta), params.lambda))
        .sum())
}

/// Mean confirmation latency, in time units, of a shard with workload
/// `sigma` and capacity `lambda`.
///
/// With `s = sigma / lambda` this is `(1/s) * ∫₀ˢ ⌈x⌉ dx`: the fraction of
/// work finishing in time unit `t` waits `t` units. An empty shard has
/// latency 0.
pub fn shard_latency(sigma: f64, lambda: f64) -> Result<f64> {
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(Error::InvalidParams(format!(
            "lambda must be > 0, got {lambda}"
        )));
    }
    if sigma.is_nan() || sigma < 0.0 {
        return Err(Error::InvalidParams(format!(
            "sigma must be >= 0, got {sigma}"
        )));
    }
    let s = sigma / lambda;
    if s == 0.0 {
        return Ok(0.0);
    }
    // Number of fully used time units before the last, partial one.
    let full = s.ceil() - 1.0;
    Ok((full * (full + 1.0) / 2.0 + (s - full) * (full + 1.0)) / s)
}

/// Aggregates every per-shard metric. With `txs`, gamma is the exact
/// transaction-level ratio; otherwise the graph-level one.
pub fn system_report(
    graph: &TransactionGraph,
    alloc: &Allocation,
    params: &AlloParams,
    txs: Option<&[Transaction]>,
) -> Result<SystemReport> {
    params.validate()?;
    let tallies = tallies(graph, alloc)?;
    let mut shards = Vec::with_capacity(tallies.len());
    for t in &tallies {
        let sigma = t.sigma(params.eta);
        shards.push(ShardReport {
            sigma,
            throughput: capped_throughput(t.lambda_hat(), sigma, params.lambda),
            latency: shard_latency(sigma, params.lambda)?,
            intra_weight: t.intra,
            cross_weight: t.cross,
        });
    }
    let gamma = match txs {
        Some(txs) => gamma_exact(txs, &alloc.bind(graph))?,
        None => gamma_graph(graph, alloc)?,
    };
    let sigmas: Vec<f64> = shards.iter().map(|s| s.sigma).collect();
    let throughput_total: f64 = shards.iter().map(|s| s.throughput).sum();
    let latency_mean = shards.iter().map(|s| s.latency).sum::<f64>() / shards.len() as f64;
    let latency_worst = shards.iter().map(|s| s.latency).fold(0.0, f64::max);
    Ok(SystemReport {
        gamma,
        rho: balance(&sigmas),
        throughput_total,
        throughput_normalized: throughput_total / params.lambda,
        latency_mean,
        latency_worst,
        shards,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::ShardMap;
    use crate::graph::{build_graph, AccountId};

    fn acc(s: &str) -> AccountId {
        s.parse().unwrap()
    }

    fn tx(block: u64, accounts: &[&str]) -> Transaction {
        Transaction::new(block, accounts.iter().map(|s| acc(s))).unwrap()
    }

    fn map(k: usize, pairs: &[(&str, usize)]) -> ShardMap {
        let mut m = ShardMap::new(k).unwrap();
        for (a, s) in pairs {
            m.insert(acc(a), *s).unwrap();
        }
        m
    }

    #[test]
    fn mu_counts_distinct_shards() {
        let m = map(
            8,
            &[("0xa", 3), ("0xb", 3), ("0xc", 5), ("0xd", 0), ("0xe", 7)],
        );
        assert_eq!(mu(&tx(0, &["0xa", "0xb"]), &m).unwrap(), 1);
        assert_eq!(mu(&tx(0, &["0xa", "0xb", "0xc"]), &m).unwrap(), 2);
        assert_eq!(mu(&tx(0, &["0xa", "0xc", "0xd", "0xe"]), &m).unwrap(), 4);
        assert_eq!(
            mu(&tx(0, &["0xa", "0xf"]), &m),
            Err(Error::UnmappedAccount(acc("0xf")))
        );
    }

    #[test]
    fn workload_of_intra_and_cross() {
        // Shard 0 holds {a, b, c}: intra a-b (2) + c self-loop (1) = 3,
        // cross b-d (1) + c-e (1) = 2.
        let txs = [
            tx(0, &["0xa", "0xb"]),
            tx(0, &["0xa", "0xb"]),
            tx(0, &["0xc"]),
            tx(0, &["0xb", "0xd"]),
            tx(0, &["0xc", "0xe"]),
        ];
        let g = build_graph(&txs);
        let m = map(
            3,
            &[("0xa", 0), ("0xb", 0), ("0xc", 0), ("0xd", 1), ("0xe", 1)],
        );
        let alloc = Allocation::from_shard_map(&g, &m, 2.0).unwrap();
        let p = AlloParams::new(3, 2.0, 10.0, 1e-3).unwrap();
        assert_eq!(shard_workload(&g, &alloc, &p, 0).unwrap(), 7.0);
        assert_eq!(shard_workload(&g, &alloc, &p, 2).unwrap(), 0.0);
        assert_eq!(
            shard_workload(&g, &alloc, &p, 3),
            Err(Error::ShardOutOfRange { shard: 3, k: 3 })
        );
        assert_eq!(gamma_exact(&txs, &m).unwrap(), 0.4);
        assert_eq!(gamma_graph(&g, &alloc).unwrap(), 0.4);
    }

    #[test]
    fn gamma_extremes() {
        let txs = [tx(0, &["0xa", "0xb"]), tx(0, &["0xc", "0xd"])];
        let g = build_graph(&txs);
        let one = Allocation::from_fn(&g, 2, 2.0, |_| Some(0)).unwrap();
        assert_eq!(gamma_graph(&g, &one).unwrap(), 0.0);
        let split = Allocation::from_fn(&g, 2, 2.0, |n| Some(n % 2)).unwrap();
        assert_eq!(gamma_graph(&g, &split).unwrap(), 1.0);
        let empty = TransactionGraph::new();
        let none = Allocation::unassigned(&empty, 2, 2.0).unwrap();
        assert_eq!(gamma_graph(&empty, &none), Err(Error::EmptyGraph));
        assert_eq!(
            gamma_exact(&[], &ShardMap::new(1).unwrap()),
            Err(Error::EmptyTransactions)
        );
    }

    #[test]
    fn gamma_exact_quarter() {
        let txs = [
            tx(0, &["0xa", "0xb"]),
            tx(0, &["0xa", "0xb"]),
            tx(0, &["0xc"]),
            tx(0, &["0xa", "0xc"]),
        ];
        let m = map(2, &[("0xa", 0), ("0xb", 0), ("0xc", 1)]);
        assert_eq!(gamma_exact(&txs, &m).unwrap(), 0.25);
    }

    #[test]
    fn balance_values() {
        assert_eq!(balance(&[3.0, 3.0, 3.0]), 0.0);
        assert_eq!(balance(&[0.0, 2.0]), 1.0);
        assert!((balance(&[1.0, 2.0, 3.0, 4.0]) - 1.118_033_988_749_895).abs() < 1e-12);
    }

    #[test]
    fn throughput_caps_at_capacity() {
        assert_eq!(capped_throughput(10.0, 8.0, 8.0), 10.0);
        assert_eq!(capped_throughput(10.0, 16.0, 8.0), 5.0);
    }

    #[test]
    fn latency_reference_points() {
        assert_eq!(shard_latency(5.0, 5.0).unwrap(), 1.0);
        assert!((shard_latency(2.0, 1.0).unwrap() - 1.5).abs() < 1e-12);
        assert!((shard_latency(2.5, 1.0).unwrap() - 1.8).abs() < 1e-12);
        assert_eq!(shard_latency(0.0, 3.0).unwrap(), 0.0);
        assert_eq!(shard_latency(0.3, 1.0).unwrap(), 1.0);
        assert!(shard_latency(1.0, 0.0).is_err());
    }

    #[test]
    fn latency_at_integers_is_half_n_plus_one() {
        for n in 1..20 {
            let z = shard_latency(n as f64 * 3.0, 3.0).unwrap();
            assert!((z - (n as f64 + 1.0) / 2.0).abs() < 1e-12, "n = {n}: {z}");
        }
    }

    #[test]
    fn single_shard_report() {
        let txs = [tx(0, &["0xa", "0xb"]), tx(1, &["0xb", "0xc", "0xd"])];
        let g = build_graph(&txs);
        let alloc = Allocation::from_fn(&g, 1, 2.0, |_| Some(0)).unwrap();
        let p = AlloParams::for_workload(2, 1, 2.0).unwrap();
        let r = system_report(&g, &alloc, &p, Some(&txs)).unwrap();
        assert_eq!(r.gamma, 0.0);
        assert!((r.throughput_total - 2.0).abs() < 1e-12);
        assert!((r.throughput_normalized - 1.0).abs() < 1e-12);
        assert!((r.latency_mean - 1.0).abs() < 1e-12);
        assert_eq!(r.rho, 0.0);
    }

    #[test]
    fn report_rejects_partial_allocation() {
        let txs = [tx(0, &["0xa", "0xb"])];
        let g = build_graph(&txs);
        let alloc = Allocation::from_fn(&g, 2, 2.0, |n| (n == 0).then_some(0)).unwrap();
        let p = AlloParams::for_workload(1, 2, 2.0).unwrap();
        assert!(matches!(
            system_report(&g, &alloc, &p, None),
            Err(Error::UnmappedAccount(_))
        ));
    }
}
