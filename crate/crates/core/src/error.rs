use thiserror::Error;

use crate::graph::AccountId;

/// Errors raised by the allocation engine and its metrics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid account identifier {0:?}")]
    InvalidAccount(String),

    #[error("transaction at block {block} has no accounts")]
    EmptyTransaction { block: u64 },

    #[error("account {0} is not mapped by the allocation")]
    UnmappedAccount(AccountId),

    #[error("shard index {shard} out of range for k = {k}")]
    ShardOutOfRange { shard: usize, k: usize },

    #[error("graph has no nodes")]
    EmptyGraph,

    #[error("transaction sequence is empty")]
    EmptyTransactions,

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("stale move delta: {0}")]
    StaleDelta(String),

    #[error("allocation is stale with respect to the graph: {0}")]
    StaleAllocation(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid synthetic workload spec: {0}")]
    InvalidSpec(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
