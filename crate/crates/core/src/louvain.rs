//! Deterministic weighted Louvain community detection.
//!
//! Nodes are visited in canonical account order at every level. Aggregated
//! nodes are numbered by their smallest original member, so "smallest member"
//! tie-breaking and visit order stay canonical across levels.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::graph::TransactionGraph;

/// Passes stop once a full pass improves modularity by no more than this.
pub const MIN_PASS_GAIN: f64 = 1e-7;
const MAX_PASSES_PER_LEVEL: usize = 1_000;

/// Community label per graph node, labels contiguous in `[0, count)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommunityAssignment {
    labels: Vec<usize>,
    count: usize,
}

impl CommunityAssignment {
    /// Label of graph node `node`.
    pub fn label(&self, node: usize) -> usize {
        self.labels[node]
    }

    /// Labels indexed by graph node.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn community_count(&self) -> usize {
        self.count
    }

    /// Graph nodes of each community, ascending.
    pub fn communities(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.count];
        for (node, &c) in self.labels.iter().enumerate() {
            out[c].push(node);
        }
        out
    }
}

/// Compressed adjacency of one aggregation level. Self-loops are kept apart.
struct Level {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
    self_loops: Vec<f64>,
    // Strength with self-loops counted twice.
    degree: Vec<f64>,
}

impl Level {
    fn len(&self) -> usize {
        self.self_loops.len()
    }

    fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.targets[r.clone()]
            .iter()
            .copied()
            .zip(self.weights[r].iter().copied())
    }

    fn from_adjacency(adj: Vec<BTreeMap<usize, f64>>, self_loops: Vec<f64>) -> Level {
        let mut offsets = Vec::with_capacity(adj.len() + 1);
        let mut targets = Vec::new();
        let mut weights = Vec::new();
        let mut degree = Vec::with_capacity(adj.len());
        offsets.push(0);
        for (i, row) in adj.into_iter().enumerate() {
            let mut d = 2.0 * self_loops[i];
            for (j, w) in row {
                targets.push(j);
                weights.push(w);
                d += w;
            }
            offsets.push(targets.len());
            degree.push(d);
        }
        Level {
            offsets,
            targets,
            weights,
            self_loops,
            degree,
        }
    }

    /// Level 0, with node `r` being the graph node of canonical rank `r`.
    fn from_graph(graph: &TransactionGraph, order: &[usize]) -> Level {
        let mut rank = vec![0; order.len()];
        for (r, &node) in order.iter().enumerate() {
            rank[node] = r;
        }
        let adj = order
            .iter()
            .map(|&node| graph.neighbors(node).map(|(u, w)| (rank[u], w)).collect())
            .collect();
        let self_loops = order.iter().map(|&node| graph.self_loop(node)).collect();
        Level::from_adjacency(adj, self_loops)
    }

    /// Collapses communities into nodes. `comm` must be numbered by smallest
    /// member.
    fn aggregate(&self, comm: &[usize], count: usize) -> Level {
        let mut adj: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); count];
        let mut self_loops = vec![0.0; count];
        for i in 0..self.len() {
            let ci = comm[i];
            self_loops[ci] += self.self_loops[i];
            for (j, w) in self.neighbors(i) {
                let cj = comm[j];
                if ci == cj {
                    if i < j {
                        self_loops[ci] += w;
                    }
                } else {
                    *adj[ci].entry(cj).or_insert(0.0) += w;
                }
            }
        }
        Level::from_adjacency(adj, self_loops)
    }
}

struct LocalMoves {
    comm: Vec<usize>,
    tot: Vec<f64>,
    members: Vec<BTreeSet<usize>>,
    // Scratch: weight from the current node into each community.
    to_comm: Vec<f64>,
    touched: Vec<usize>,
}

impl LocalMoves {
    fn singletons(n: usize, level: &Level) -> Self {
        LocalMoves {
            comm: (0..n).collect(),
            tot: level.degree.clone(),
            members: (0..n).map(|i| BTreeSet::from([i])).collect(),
            to_comm: vec![0.0; n],
            touched: Vec::new(),
        }
    }

    fn min_member(&self, c: usize) -> usize {
        self.members[c].first().copied().unwrap_or(usize::MAX)
    }

    /// One pass over all nodes in index order; returns the modularity gain.
    fn pass(&mut self, level: &Level, m: f64) -> f64 {
        let two_m = 2.0 * m;
        let mut pass_gain = 0.0;
        for i in 0..level.len() {
            for (j, w) in level.neighbors(i) {
                let c = self.comm[j];
                if self.to_comm[c] == 0.0 {
                    self.touched.push(c);
                }
                self.to_comm[c] += w;
            }
            let old = self.comm[i];
            let k_i = level.degree[i];
            self.tot[old] -= k_i;
            self.members[old].remove(&i);

            let gain = |s: &Self, c: usize| s.to_comm[c] - s.tot[c] * k_i / two_m;
            let stay = gain(self, old);
            let mut best: Option<(usize, f64)> = None;
            for &c in &self.touched {
                if c == old {
                    continue;
                }
                let g = gain(self, c);
                let better = match best {
                    None => true,
                    Some((b, bg)) => g > bg || (g == bg && self.min_member(c) < self.min_member(b)),
                };
                if better {
                    best = Some((c, g));
                }
            }
            let target = match best {
                Some((c, g)) if g > stay => {
                    pass_gain += (g - stay) / m;
                    c
                }
                _ => old,
            };
            self.comm[i] = target;
            self.tot[target] += k_i;
            self.members[target].insert(i);

            for &c in &self.touched {
                self.to_comm[c] = 0.0;
            }
            self.touched.clear();
        }
        pass_gain
    }

    /// Renumbers communities by smallest member; returns (labels, count).
    fn renumber(&self) -> (Vec<usize>, usize) {
        let mut map = vec![usize::MAX; self.comm.len()];
        let mut next = 0;
        let labels = self
            .comm
            .iter()
            .map(|&c| {
                if map[c] == usize::MAX {
                    map[c] = next;
                    next += 1;
                }
                map[c]
            })
            .collect();
        (labels, next)
    }
}

/// Modularity-maximizing communities of `graph` (resolution 1).
pub fn louvain(graph: &TransactionGraph) -> Result<CommunityAssignment> {
    if graph.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let order = graph.canonical_order();
    let mut level = Level::from_graph(graph, &order);
    let m = level.degree.iter().sum::<f64>() / 2.0;
    // Community of each canonical rank at the current top level.
    let mut rank_comm: Vec<usize> = (0..order.len()).collect();

    if m > 0.0 {
        loop {
            let mut moves = LocalMoves::singletons(level.len(), &level);
            let mut level_gain = 0.0;
            for _ in 0..MAX_PASSES_PER_LEVEL {
                let g = moves.pass(&level, m);
                level_gain += g;
                if g <= MIN_PASS_GAIN {
                    break;
                }
            }
            let (labels, count) = moves.renumber();
            if level_gain <= MIN_PASS_GAIN || count == level.len() {
                break;
            }
            for c in rank_comm.iter_mut() {
                *c = labels[*c];
            }
            log::debug!(
                "louvain level: {} -> {} nodes, gain {level_gain:.3e}",
                level.len(),
                count
            );
            level = level.aggregate(&labels, count);
        }
    }

    // Relabel by first appearance in canonical order.
    let mut map = vec![usize::MAX; order.len()];
    let mut next = 0;
    let mut labels = vec![0; graph.node_count()];
    for (r, &node) in order.iter().enumerate() {
        let c = rank_comm[r];
        if map[c] == usize::MAX {
            map[c] = next;
            next += 1;
        }
        labels[node] = map[c];
    }
    Ok(CommunityAssignment {
        labels,
        count: next,
    })
}

/// Weighted modularity (resolution 1) of a labelling of graph nodes.
/// Self-loops count once as internal weight and twice toward strength.
pub fn modularity(graph: &TransactionGraph, labels: &[usize]) -> f64 {
    let count = labels.iter().copied().max().map_or(0, |c| c + 1);
    let mut internal = vec![0.0; count];
    let mut strength = vec![0.0; count];
    let mut m = 0.0;
    for (u, v, w) in graph.edges() {
        m += w;
        if labels[u] == labels[v] {
            internal[labels[u]] += w;
        }
        strength[labels[u]] += w;
        strength[labels[v]] += w;
    }
    if m == 0.0 {
        return 0.0;
    }
    (0..count)
        .map(|c| internal[c] / m - (strength[c] / (2.0 * m)).powi(2))
        .sum()
}
