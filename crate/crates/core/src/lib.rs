//! Transaction-graph based account allocation for sharded ledgers.
//!
//! The crate builds a weighted account graph from transactions, allocates
//! accounts to shards (globally from scratch, adaptively per epoch, or by
//! hashing) and scores allocations by cross-shard ratio, workload balance,
//! capacity-bounded throughput and confirmation latency.

pub mod adaptive;
pub mod allocation;
pub mod baseline;
pub mod error;
pub mod gain;
pub mod global;
pub mod graph;
pub mod louvain;
pub mod metrics;
pub mod params;
pub mod replay;
pub mod synth;

pub use adaptive::{a_txallo, a_txallo_observed, ATxAlloResult, EpochDelta};
pub use allocation::{Allocation, ShardId, ShardLookup, ShardMap};
pub use baseline::{hash_allocate, hash_shard};
pub use error::{Error, Result};
pub use gain::{apply_move, best_join, best_move, move_gain, MoveDelta};
pub use global::{g_txallo, g_txallo_observed, GTxAlloResult, Phase};
pub use graph::{build_graph, merge_graph, pair_count, AccountId, Transaction, TransactionGraph};
pub use louvain::{louvain, modularity, CommunityAssignment};
pub use metrics::{system_report, ShardReport, SystemReport};
pub use params::AlloParams;
pub use replay::{replay, AlgorithmTag, EpochReport, Policy, Replay, ReplayParams, Schedule};
pub use synth::{generate_synthetic, SyntheticSpec};
