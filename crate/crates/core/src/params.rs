use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_ETA: f64 = 2.0;
pub const DEFAULT_MAX_SWEEPS: usize = 100;
/// Convergence threshold as a fraction of the transaction count.
pub const EPSILON_FRACTION: f64 = 1e-5;

/// Cost model and stopping rule shared by every allocator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlloParams {
    /// Number of shards.
    pub k: usize,
    /// Workload of a cross-shard transaction relative to an intra-shard one.
    pub eta: f64,
    /// Per-shard processing capacity.
    pub lambda: f64,
    /// Stop optimizing once a full sweep gains less than this.
    pub epsilon: f64,
    pub max_sweeps: usize,
}

impl AlloParams {
    pub fn new(k: usize, eta: f64, lambda: f64, epsilon: f64) -> Result<Self> {
        let params = AlloParams {
            k,
            eta,
            lambda,
            epsilon,
            max_sweeps: DEFAULT_MAX_SWEEPS,
        };
        params.validate()?;
        Ok(params)
    }

    /// Defaults derived from the workload size: `lambda = |T| / k` and
    /// `epsilon = 1e-5 * |T|`.
    pub fn for_workload(tx_count: u64, k: usize, eta: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParams("k must be at least 1".into()));
        }
        let t = (tx_count as f64).max(1.0);
        Self::new(k, eta, t / k as f64, EPSILON_FRACTION * t)
    }

    pub fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        self.lambda = lambda;
        self.validate()?;
        Ok(self)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        self.epsilon = epsilon;
        self.validate()?;
        Ok(self)
    }

    pub fn with_max_sweeps(mut self, max_sweeps: usize) -> Result<Self> {
        self.max_sweeps = max_sweeps;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParams("k must be at least 1".into()));
        }
        if !(self.eta >= 1.0 && self.eta.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "eta must be >= 1, got {}",
                self.eta
            )));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "lambda must be > 0, got {}",
                self.lambda
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidParams("max_sweeps must be positive".into()));
        }
        Ok(())
    }
}
