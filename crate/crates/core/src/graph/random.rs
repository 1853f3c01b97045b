use std::collections::BTreeSet;

use super::{build_graph, Graph, GraphError};
use crate::rng::{self, Rng};

/// Uniform random graph with exactly `m` distinct unit-weight edges.
pub fn gnm_random_graph(n: usize, m: usize, rng: &mut Rng) -> Result<Graph, GraphError> {
    let max_edges = n * n.saturating_sub(1) / 2;
    if m > max_edges {
        return Err(GraphError::IndexOutOfRange { i: m, j: max_edges, n });
    }
    let mut chosen = BTreeSet::new();
    if m * 2 > max_edges {
        // dense regime: shuffle all pairs instead of rejection sampling
        let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        for k in 0..m {
            let r = k + rng::index(rng, pairs.len() - k);
            pairs.swap(k, r);
        }
        chosen.extend(pairs.into_iter().take(m));
    } else {
        while chosen.len() < m {
            let i = rng::index(rng, n);
            let j = rng::index(rng, n);
            if i != j {
                chosen.insert((i.min(j), i.max(j)));
            }
        }
    }
    let edges: Vec<_> = chosen.into_iter().map(|(i, j)| (i, j, 1.0)).collect();
    build_graph(&edges, n)
}

/// Erdős–Rényi graph where every pair is joined independently with
/// probability `p`, with random weights in `[0.5, 1.5)` when `weighted`.
pub fn gnp_random_graph(n: usize, p: f64, weighted: bool, rng: &mut Rng) -> Result<Graph, GraphError> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng::unit(rng) < p {
                let w = if weighted { rng::uniform(rng, 0.5, 1.5) } else { 1.0 };
                edges.push((i, j, w));
            }
        }
    }
    build_graph(&edges, n)
}
