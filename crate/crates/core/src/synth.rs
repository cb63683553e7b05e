//! Seeded synthetic transaction streams with planted communities and a
//! long-tailed account activity profile.

use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::{AccountId, Transaction};

/// Probabilities of a transaction touching 2, 3, 4 or 5 accounts.
const SIZE_WEIGHTS: [f64; 4] = [0.70, 0.15, 0.10, 0.05];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub community_count: usize,
    pub nodes_per_community: usize,
    /// Relative weight of a transaction staying inside the community of its
    /// first account.
    pub intra_edge_probability: f64,
    /// Relative weight of a transaction reaching into other communities.
    pub inter_edge_probability: f64,
    /// Zipf exponent of account activity; 0 means uniform.
    pub activity_skew: f64,
    pub blocks: u64,
    pub txs_per_block: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.community_count == 0 || self.nodes_per_community == 0 {
            return bad("spec has no accounts".into());
        }
        for (name, p) in [
            ("intra_edge_probability", self.intra_edge_probability),
            ("inter_edge_probability", self.inter_edge_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be in [0, 1], got {p}"));
            }
        }
        if self.intra_edge_probability + self.inter_edge_probability <= 0.0 {
            return bad("intra and inter probabilities are both zero".into());
        }
        if !(self.activity_skew >= 0.0 && self.activity_skew.is_finite()) {
            return bad(format!(
                "activity_skew must be >= 0, got {}",
                self.activity_skew
            ));
        }
        if self.blocks == 0 || self.txs_per_block == 0 {
            return bad("spec produces no transactions".into());
        }
        Ok(())
    }

    pub fn account_count(&self) -> usize {
        self.community_count * self.nodes_per_community
    }

    /// Identifier of member `member` of community `community`.
    pub fn account(&self, community: usize, member: usize) -> AccountId {
        let index = (community * self.nodes_per_community + member) as u64;
        let mut h = Sha256::new();
        h.update(self.seed.to_be_bytes());
        h.update(index.to_be_bytes());
        AccountId::from_bytes(h.finalize()[..20].to_vec()).expect("20 bytes")
    }

    /// Planted community of every account.
    pub fn planted_labels(&self) -> BTreeMap<AccountId, usize> {
        (0..self.community_count)
            .flat_map(|c| (0..self.nodes_per_community).map(move |j| (c, j)))
            .map(|(c, j)| (self.account(c, j), c))
            .collect()
    }

    // Activity rank interleaves communities so that no single community
    // holds all the busiest accounts.
    fn weight(&self, community: usize, member: usize) -> f64 {
        let rank = member * self.community_count + community;
        ((rank + 1) as f64).powf(-self.activity_skew)
    }
}

/// Generates `blocks * txs_per_block` transactions, blocks numbered from 0.
///
/// The first account of each transaction is drawn by activity over all
/// accounts. The transaction then stays inside that account's community with
/// probability `intra / (intra + inter)`; otherwise each further account comes
/// from a uniformly chosen different community. Within a community, accounts
/// are drawn by activity.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Vec<Transaction>> {
    spec.validate()?;
    let c_count = spec.community_count;
    let n = spec.nodes_per_community;
    let ids: Vec<Vec<AccountId>> = (0..c_count)
        .map(|c| (0..n).map(|j| spec.account(c, j)).collect())
        .collect();
    let global =
        WeightedIndex::new((0..c_count).flat_map(|c| (0..n).map(move |j| spec.weight(c, j))))
            .map_err(|e| Error::InvalidSpec(e.to_string()))?;
    let local: Vec<WeightedIndex<f64>> = (0..c_count)
        .map(|c| WeightedIndex::new((0..n).map(|j| spec.weight(c, j))))
        .collect::<Result<_, _>>()
        .map_err(|e| Error::InvalidSpec(e.to_string()))?;
    let sizes = WeightedIndex::new(SIZE_WEIGHTS).expect("static weights");
    let p_intra =
        spec.intra_edge_probability / (spec.intra_edge_probability + spec.inter_edge_probability);

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut txs = Vec::with_capacity(spec.blocks as usize * spec.txs_per_block);
    for block in 0..spec.blocks {
        for _ in 0..spec.txs_per_block {
            let first = global.sample(&mut rng);
            let home = first / n;
            let size = 2 + sizes.sample(&mut rng);
            let intra = c_count == 1 || rng.gen_bool(p_intra);
            let mut accounts = Vec::with_capacity(size);
            accounts.push(ids[home][first % n].clone());
            for _ in 1..size {
                let c = if intra {
                    home
                } else {
                    let other = rng.gen_range(0..c_count - 1);
                    if other >= home {
                        other + 1
                    } else {
                        other
                    }
                };
                accounts.push(ids[c][local[c].sample(&mut rng)].clone());
            }
            txs.push(Transaction::new(block, accounts)?);
        }
    }
    Ok(txs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> SyntheticSpec {
        SyntheticSpec {
            community_count: 4,
            nodes_per_community: 25,
            intra_edge_probability: 0.9,
            inter_edge_probability: 0.1,
            activity_skew: 0.8,
            blocks: 20,
            txs_per_block: 10,
            seed: 7,
        }
    }

    #[test]
    fn same_seed_same_stream() {
        assert_eq!(
            generate_synthetic(&spec()).unwrap(),
            generate_synthetic(&spec()).unwrap()
        );
        let other = SyntheticSpec { seed: 8, ..spec() };
        assert_ne!(
            generate_synthetic(&spec()).unwrap(),
            generate_synthetic(&other).unwrap()
        );
    }

    #[test]
    fn shape_follows_spec() {
        let txs = generate_synthetic(&spec()).unwrap();
        assert_eq!(txs.len(), 200);
        assert!(txs.windows(2).all(|w| w[0].block() <= w[1].block()));
        assert_eq!(txs.last().unwrap().block(), 19);
        let labels = spec().planted_labels();
        assert_eq!(labels.len(), 100);
        for tx in &txs {
            assert!((1..=5).contains(&tx.accounts().len()));
            assert!(tx.accounts().iter().all(|a| labels.contains_key(a)));
        }
    }

    #[test]
    fn no_inter_weight_keeps_transactions_inside_communities() {
        let s = SyntheticSpec {
            inter_edge_probability: 0.0,
            ..spec()
        };
        let labels = s.planted_labels();
        for tx in generate_synthetic(&s).unwrap() {
            let c = labels[&tx.accounts()[0]];
            assert!(tx.accounts().iter().all(|a| labels[a] == c));
        }
    }

    #[test]
    fn high_skew_concentrates_activity() {
        let s = SyntheticSpec {
            activity_skew: 2.0,
            blocks: 50,
            ..spec()
        };
        let top = s.account(0, 0);
        let txs = generate_synthetic(&s).unwrap();
        let share =
            txs.iter().filter(|t| t.accounts().contains(&top)).count() as f64 / txs.len() as f64;
        assert!(share > 0.10, "top account share {share}");
    }

    #[test]
    fn rejects_degenerate_specs() {
        for s in [
            SyntheticSpec {
                nodes_per_community: 0,
                ..spec()
            },
            SyntheticSpec {
                community_count: 0,
                ..spec()
            },
            SyntheticSpec {
                intra_edge_probability: 1.5,
                ..spec()
            },
            SyntheticSpec {
                intra_edge_probability: 0.0,
                inter_edge_probability: 0.0,
                ..spec()
            },
            SyntheticSpec {
                activity_skew: -1.0,
                ..spec()
            },
            SyntheticSpec {
                blocks: 0,
                ..spec()
            },
        ] {
            assert!(matches!(generate_synthetic(&s), Err(Error::InvalidSpec(_))));
        }
    }
}
