mod common;

use common::*;
use txallo::global::g_txallo_observed;
use txallo::metrics::{shard_workload, total_throughput};
use txallo::{
    a_txallo, build_graph, g_txallo, generate_synthetic, hash_shard, louvain, modularity, replay,
    AlgorithmTag, AlloParams, Allocation, EpochDelta, Policy, Replay, ReplayParams, Schedule,
    ShardLookup, SyntheticSpec, Transaction,
};

/// Workload per shard accumulated transaction by transaction, without the
/// graph: every account pair of a transaction carries 1 / C(n, 2).
fn tx_level_sigma(txs: &[Transaction], lookup: &impl ShardLookup, k: usize, eta: f64) -> Vec<f64> {
    let mut sigma = vec![0.0; k];
    for t in txs {
        let shards: Vec<usize> = t
            .accounts()
            .iter()
            .map(|a| lookup.shard_of_account(a).unwrap())
            .collect();
        let n = shards.len();
        if n == 1 {
            sigma[shards[0]] += 1.0;
            continue;
        }
        let w = 2.0 / (n * (n - 1)) as f64;
        for i in 0..n {
            for j in i + 1..n {
                if shards[i] == shards[j] {
                    sigma[shards[i]] += w;
                } else {
                    sigma[shards[i]] += eta * w;
                    sigma[shards[j]] += eta * w;
                }
            }
        }
    }
    sigma
}

#[test]
fn workload_matches_transaction_level_oracle() {
    let mut r = rng(11);
    for case in 0..50 {
        let txs = random_txs(&mut r, 60, 300, 5);
        let g = build_graph(&txs);
        let k = 1 + case % 7;
        let eta = [1.0, 2.0, 10.0][case % 3];
        let alloc = random_allocation(&mut r, &g, k, eta);
        let p = AlloParams::for_workload(g.tx_count(), k, eta).unwrap();
        let oracle = tx_level_sigma(&txs, &alloc.bind(&g), k, eta);
        for (i, expected) in oracle.iter().enumerate() {
            let got = shard_workload(&g, &alloc, &p, i).unwrap();
            assert!(
                rel_close(got, *expected, 1e-9),
                "case {case} shard {i}: {got} vs {expected}"
            );
        }
    }
}

#[test]
fn eta_one_workload_is_incident_degree_sum() {
    // Sum of node strengths in the shard, with each internal edge counted
    // once rather than from both ends.
    let mut r = rng(12);
    for _ in 0..30 {
        let txs = random_txs(&mut r, 50, 200, 5);
        let g = build_graph(&txs);
        let alloc = random_allocation(&mut r, &g, 4, 1.0);
        let p = AlloParams::for_workload(g.tx_count(), 4, 1.0).unwrap();
        for i in 0..4 {
            let members: Vec<usize> = (0..g.node_count())
                .filter(|&n| alloc.shard_of(n) == Some(i))
                .collect();
            let degree_sum: f64 = members
                .iter()
                .map(|&n| g.self_loop(n) + g.incident_weight(n))
                .sum();
            let internal: f64 = members
                .iter()
                .flat_map(|&u| members.iter().map(move |&v| (u, v)))
                .filter(|(u, v)| u < v)
                .map(|(u, v)| g.weight(u, v))
                .sum();
            let got = shard_workload(&g, &alloc, &p, i).unwrap();
            assert!(rel_close(got, degree_sum - internal, 1e-9));
        }
    }
}

fn two_cliques_with_bridge(size: u32) -> Vec<Transaction> {
    let mut txs = Vec::new();
    for base in [0, 100] {
        for i in 0..size {
            for j in i + 1..size {
                txs.push(tx(0, &[base + i, base + j]));
            }
        }
    }
    txs.push(tx(0, &[0, 100]));
    txs
}

#[test]
fn global_allocation_reaches_best_balanced_bipartition() {
    let txs = two_cliques_with_bridge(4);
    let g = build_graph(&txs);
    let p = AlloParams::for_workload(g.tx_count(), 2, 2.0).unwrap();
    let got = g_txallo(&g, &p).unwrap().final_lambda;
    let n = g.node_count();
    let mut best = f64::NEG_INFINITY;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize * 2 != n {
            continue;
        }
        let a = Allocation::from_fn(&g, 2, 2.0, |v| Some((mask >> v & 1) as usize)).unwrap();
        best = best.max(oracle_lambda(&g, &a, &p));
    }
    assert!(got >= best - 1e-9, "g_txallo {got} vs brute force {best}");
}

/// Restricted growth strings enumerate every set partition once.
fn for_each_partition(n: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(labels: &mut Vec<usize>, n: usize, max: usize, f: &mut impl FnMut(&[usize])) {
        if labels.len() == n {
            f(labels);
            return;
        }
        for c in 0..=max + 1 {
            labels.push(c);
            rec(labels, n, max.max(c), f);
            labels.pop();
        }
    }
    let mut labels = vec![0];
    rec(&mut labels, n, 0, f);
}

#[test]
fn louvain_finds_modularity_optimum_on_small_graph() {
    let g = build_graph(&two_cliques_with_bridge(4));
    let found = louvain(&g).unwrap();
    let q = modularity(&g, found.labels());
    let mut best = f64::NEG_INFINITY;
    let mut count = 0;
    for_each_partition(g.node_count(), &mut |labels| {
        best = best.max(modularity(&g, labels));
        count += 1;
    });
    assert_eq!(count, 4140);
    assert!((q - best).abs() < 1e-12, "louvain {q} vs optimum {best}");
    assert_eq!(found.community_count(), 2);
}

#[test]
fn accepted_moves_never_lower_throughput() {
    let mut r = rng(13);
    for case in 0..20 {
        let txs = random_txs(&mut r, 80, 400, 4);
        let g = build_graph(&txs);
        let k = 2 + case % 5;
        let p = AlloParams::for_workload(g.tx_count(), k, 2.0).unwrap();
        let mut last: Option<f64> = None;
        let result = g_txallo_observed(&g, &p, |phase, alloc, _| {
            if phase == txallo::Phase::Optimize {
                let now = oracle_lambda(&g, alloc, &p);
                if let Some(prev) = last {
                    assert!(now >= prev - 1e-9 * prev.max(1.0));
                }
                last = Some(now);
            }
        })
        .unwrap();
        assert!(result.sweeps <= p.max_sweeps);
    }
}

fn planted(seed: u64, blocks: u64) -> SyntheticSpec {
    SyntheticSpec {
        community_count: 6,
        nodes_per_community: 60,
        intra_edge_probability: 0.9,
        inter_edge_probability: 0.1,
        activity_skew: 0.6,
        blocks,
        txs_per_block: 20,
        seed,
    }
}

#[test]
fn adaptive_beats_hash_extension_over_twenty_epochs() {
    let txs = generate_synthetic(&planted(5, 120)).unwrap();
    let warm: Vec<Transaction> = txs.iter().filter(|t| t.block() < 100).cloned().collect();
    let mut graph = build_graph(&warm);
    let k = 6;
    let p0 = AlloParams::for_workload(graph.tx_count(), k, 2.0).unwrap();
    let start = g_txallo(&graph, &p0).unwrap().allocation;
    let start_map = start.to_shard_map(&graph);
    let mut alloc = start;
    for epoch in 0..20 {
        let new: Vec<Transaction> = txs
            .iter()
            .filter(|t| t.block() == 100 + epoch)
            .cloned()
            .collect();
        let delta = EpochDelta::new(new);
        graph.merge_from(&build_graph(delta.new_txs()));
        let p = AlloParams::for_workload(graph.tx_count(), k, 2.0).unwrap();
        alloc = a_txallo(&graph, alloc, &delta, &p).unwrap().allocation;
    }
    let p = AlloParams::for_workload(graph.tx_count(), k, 2.0).unwrap();
    let extended = Allocation::from_fn(&graph, k, 2.0, |n| {
        let a = graph.account(n);
        Some(start_map.get(a).unwrap_or_else(|| hash_shard(a, k)))
    })
    .unwrap();
    let adaptive = total_throughput(&graph, &alloc, &p).unwrap();
    let baseline = total_throughput(&graph, &extended, &p).unwrap();
    assert!(adaptive >= baseline - 1e-9, "{adaptive} < {baseline}");
}

#[test]
fn txallo_epochs_never_fall_below_hash_epochs() {
    let txs = generate_synthetic(&planted(6, 200)).unwrap();
    let schedule = Schedule::new(4, None, 0.5).unwrap();
    let params = ReplayParams::new(6);
    let ours = replay(&txs, params, schedule, Policy::Txallo).unwrap();
    let hash = replay(&txs, params, schedule, Policy::Hash).unwrap();
    assert_eq!(ours.len(), hash.len());
    for (a, b) in ours.iter().zip(&hash) {
        assert_eq!(a.epoch_index, b.epoch_index);
        assert!(
            a.throughput_normalized >= b.throughput_normalized,
            "epoch {}",
            a.epoch_index
        );
    }
}

#[test]
fn adaptive_stays_close_to_fresh_global_runs() {
    let txs = generate_synthetic(&planted(7, 160)).unwrap();
    let k = 6;
    let (mut r, _) = Replay::start(
        &txs,
        ReplayParams::new(k),
        Schedule::new(2, None, 0.6).unwrap(),
        Policy::Txallo,
    )
    .unwrap();
    let mut epochs = 0;
    while let Some(reports) = r.step().unwrap() {
        assert_eq!(reports[0].algorithm, AlgorithmTag::Adaptive);
        epochs += 1;
        if epochs % 5 == 0 {
            let g = r.graph();
            let p = AlloParams::for_workload(g.tx_count(), k, 2.0).unwrap();
            let fresh = g_txallo(g, &p).unwrap().final_lambda;
            let ours = total_throughput(g, r.allocation().unwrap(), &p).unwrap();
            assert!(ours >= 0.95 * fresh, "epoch {epochs}: {ours} vs {fresh}");
        }
    }
    assert!(epochs >= 30);
}
