//! Undirected friendship graph: adjacency storage, K-hop frontier sampling,
//! and negative sampling.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

/// Undirected friendship graph over users 0..n. Neighbor lists stay sorted
/// and duplicate-free; every edge carries the day it appeared.
#[derive(Clone, Debug, Default)]
pub struct FriendshipGraph {
    adj: Vec<Vec<u32>>,
    edge_day: HashMap<(u32, u32), u16>,
}

fn edge_key(u: u32, v: u32) -> (u32, u32) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

impl FriendshipGraph {
    pub fn new(n: usize) -> Self {
        FriendshipGraph { adj: vec![Vec::new(); n], edge_day: HashMap::new() }
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_day.len()
    }

    pub fn contains(&self, u: u32) -> bool {
        (u as usize) < self.adj.len()
    }

    pub fn neighbors(&self, u: u32) -> &[u32] {
        &self.adj[u as usize]
    }

    pub fn degree(&self, u: u32) -> usize {
        self.adj[u as usize].len()
    }

    pub fn has_edge(&self, u: u32, v: u32) -> bool {
        self.edge_day.contains_key(&edge_key(u, v))
    }

    pub fn edge_day(&self, u: u32, v: u32) -> Option<u16> {
        self.edge_day.get(&edge_key(u, v)).copied()
    }

    /// Inserts an undirected edge; returns false (and changes nothing) for
    /// self-loops and duplicates.
    pub fn add_edge(&mut self, u: u32, v: u32, day: u16) -> bool {
        if u == v || !self.contains(u) || !self.contains(v) || self.has_edge(u, v) {
            return false;
        }
        self.edge_day.insert(edge_key(u, v), day);
        let au = &mut self.adj[u as usize];
        au.insert(au.partition_point(|&x| x < v), v);
        let av = &mut self.adj[v as usize];
        av.insert(av.partition_point(|&x| x < u), u);
        true
    }

    /// Edges as (u, v, day) with u < v, sorted: a deterministic serialization
    /// order.
    pub fn edges_sorted(&self) -> Vec<(u32, u32, u16)> {
        let mut out: Vec<(u32, u32, u16)> =
            self.edge_day.iter().map(|(&(u, v), &d)| (u, v, d)).collect();
        out.sort_unstable();
        out
    }

    /// Subgraph keeping only edges with day ≤ `max_day`. Used to hide the
    /// test day from model-visible structure.
    pub fn up_to_day(&self, max_day: u16) -> FriendshipGraph {
        let mut g = FriendshipGraph::new(self.n());
        for (u, v, d) in self.edges_sorted() {
            if d <= max_day {
                g.add_edge(u, v, d);
            }
        }
        g
    }

    /// |N(u) ∩ N(v)| by sorted-list merge.
    pub fn common_neighbors(&self, u: u32, v: u32) -> usize {
        let (a, b) = (self.neighbors(u), self.neighbors(v));
        let (mut i, mut j, mut count) = (0, 0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    count += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        count
    }
}

/// In-place Fisher-Yates shuffle; deterministic in the generator state.
pub(crate) fn shuffle<T, R: Rng>(items: &mut [T], rng: &mut R) {
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i);
        items.swap(i, j);
    }
}

/// At most `k` items from `pool`, sampled without replacement (partial
/// Fisher-Yates), deterministic in the generator state.
pub(crate) fn sample_without_replacement<R: Rng>(pool: &[u32], k: usize, rng: &mut R) -> Vec<u32> {
    if pool.len() <= k {
        return pool.to_vec();
    }
    let mut idx: Vec<u32> = pool.to_vec();
    for i in 0..k {
        let j = rng.gen_range(i..idx.len());
        idx.swap(i, j);
    }
    idx.truncate(k);
    idx
}

/// Exact hop-frontier sampling: layer i holds at most `sample_sizes[i]` ids
/// drawn without replacement from the set of nodes at exactly distance i+1
/// from `u`. Layers are disjoint from each other and from {u}.
pub fn k_hop_neighbors(
    graph: &FriendshipGraph,
    u: u32,
    k: usize,
    sample_sizes: &[usize],
    seed: u64,
) -> Result<Vec<Vec<u32>>> {
    if !graph.contains(u) {
        return Err(Error::UnknownUser { id: u });
    }
    assert!(k >= 1, "k_hop_neighbors: K must be >= 1");
    assert_eq!(sample_sizes.len(), k, "k_hop_neighbors: one sample size per hop");
    assert!(sample_sizes.iter().all(|&s| s >= 1));

    let mut visited = vec![false; graph.n()];
    visited[u as usize] = true;
    let mut frontier = vec![u];
    let mut layers = Vec::with_capacity(k);
    for (hop, &size) in sample_sizes.iter().enumerate() {
        let mut next = Vec::new();
        for &x in &frontier {
            for &y in graph.neighbors(x) {
                if !visited[y as usize] {
                    visited[y as usize] = true;
                    next.push(y);
                }
            }
        }
        next.sort_unstable();
        let mut rng = rng::stream_n(seed, "khop", hop as u64);
        layers.push(sample_without_replacement(&next, size, &mut rng));
        frontier = next;
    }
    Ok(layers)
}

/// Result of negative sampling; `shortfall` marks that fewer eligible users
/// existed than requested.
#[derive(Clone, Debug)]
pub struct NegativeSample {
    pub ids: Vec<u32>,
    pub shortfall: bool,
}

/// `count` users that are not `u`, not adjacent to `u`, and not in
/// `exclude`; duplicate-free and deterministic in `seed`.
pub fn sample_negatives_excluding(
    graph: &FriendshipGraph,
    u: u32,
    exclude: &[u32],
    count: usize,
    seed: u64,
) -> NegativeSample {
    assert!(graph.contains(u), "sample_negatives: unknown user {u}");
    assert!(count >= 1, "sample_negatives: count must be >= 1");
    let n = graph.n() as u32;
    let eligible = |x: u32| -> bool {
        x != u && !graph.has_edge(u, x) && !exclude.contains(&x)
    };

    // Upper bound on eligible users; exact when exclude has no overlap with
    // u's neighborhood.
    let mut ineligible = 1 + graph.degree(u);
    for &x in exclude {
        if x != u && !graph.has_edge(u, x) {
            ineligible += 1;
        }
    }
    let eligible_count = (n as usize).saturating_sub(ineligible);

    let mut rng = rng::stream(seed, "negatives");
    if eligible_count <= count.saturating_mul(2) {
        // Dense regime: materialize and shuffle.
        let all: Vec<u32> = (0..n).filter(|&x| eligible(x)).collect();
        let shortfall = all.len() < count;
        let ids = sample_without_replacement(&all, count, &mut rng);
        return NegativeSample { ids, shortfall };
    }
    // Sparse regime: rejection sampling.
    let mut seen = std::collections::HashSet::with_capacity(count * 2);
    let mut ids = Vec::with_capacity(count);
    while ids.len() < count {
        let x = rng.gen_range(0..n);
        if eligible(x) && seen.insert(x) {
            ids.push(x);
        }
    }
    NegativeSample { ids, shortfall: false }
}

/// `count` non-neighbors of `u` (excluding `u` itself), flagged on shortfall.
pub fn sample_negatives(graph: &FriendshipGraph, u: u32, count: usize, seed: u64) -> NegativeSample {
    sample_negatives_excluding(graph, u, &[], count, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_graph() -> FriendshipGraph {
        // a(0) - b(1) - c(2)
        let mut g = FriendshipGraph::new(3);
        assert!(g.add_edge(0, 1, 1));
        assert!(g.add_edge(1, 2, 1));
        g
    }

    #[test]
    fn adjacency_stays_symmetric_and_sorted() {
        let mut g = FriendshipGraph::new(5);
        g.add_edge(3, 1, 2);
        g.add_edge(3, 0, 2);
        g.add_edge(3, 4, 3);
        assert_eq!(g.neighbors(3), &[0, 1, 4]);
        for u in 0..5u32 {
            for &v in g.neighbors(u) {
                assert!(g.neighbors(v).contains(&u));
            }
        }
        assert!(!g.add_edge(1, 3, 9), "duplicate rejected");
        assert!(!g.add_edge(2, 2, 1), "self-loop rejected");
        assert_eq!(g.edge_day(3, 4), Some(3));
    }

    #[test]
    fn k_hop_on_path_graph() {
        let g = path_graph();
        let layers = k_hop_neighbors(&g, 0, 2, &[5, 5], 7).unwrap();
        assert_eq!(layers, vec![vec![1], vec![2]]);
    }

    #[test]
    fn k_hop_isolated_node_all_layers_empty() {
        let mut g = FriendshipGraph::new(4);
        g.add_edge(1, 2, 1);
        let layers = k_hop_neighbors(&g, 0, 2, &[3, 3], 7).unwrap();
        assert!(layers.iter().all(|l| l.is_empty()));
    }

    #[test]
    fn k_hop_star_samples_exactly_three_leaves() {
        let mut g = FriendshipGraph::new(11);
        for leaf in 1..=10 {
            g.add_edge(0, leaf, 1);
        }
        let layers = k_hop_neighbors(&g, 0, 2, &[3, 3], 123).unwrap();
        assert_eq!(layers[0].len(), 3);
        let mut sorted = layers[0].clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 3, "distinct leaves");
        assert!(layers[1].is_empty(), "no hop-2 nodes in a star from its center");
    }

    #[test]
    fn k_hop_layers_disjoint_and_exclude_origin() {
        use rand::Rng;
        let mut rng = rng::stream(5, "khop-test-graph");
        let mut g = FriendshipGraph::new(60);
        for _ in 0..150 {
            let u = rng.gen_range(0..60u32);
            let v = rng.gen_range(0..60u32);
            g.add_edge(u, v, 1);
        }
        for u in 0..60u32 {
            let layers = k_hop_neighbors(&g, u, 2, &[4, 4], 9).unwrap();
            let mut seen = std::collections::HashSet::new();
            seen.insert(u);
            for layer in &layers {
                for &x in layer {
                    assert!(seen.insert(x), "layer overlap at {x}");
                }
            }
        }
    }

    #[test]
    fn k_hop_unknown_user_errors() {
        let g = path_graph();
        assert!(matches!(k_hop_neighbors(&g, 9, 1, &[1], 0), Err(Error::UnknownUser { id: 9 })));
    }

    #[test]
    fn k_hop_deterministic() {
        let mut g = FriendshipGraph::new(30);
        for i in 0..29 {
            g.add_edge(i, i + 1, 1);
            g.add_edge(i, (i * 7 + 3) % 30, 1);
        }
        let a = k_hop_neighbors(&g, 0, 2, &[3, 2], 42).unwrap();
        let b = k_hop_neighbors(&g, 0, 2, &[3, 2], 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn negatives_complete_graph_shortfall() {
        let mut g = FriendshipGraph::new(3);
        g.add_edge(0, 1, 1);
        g.add_edge(0, 2, 1);
        g.add_edge(1, 2, 1);
        let s = sample_negatives(&g, 0, 2, 1);
        assert!(s.ids.is_empty());
        assert!(s.shortfall);
    }

    #[test]
    fn negatives_empty_edge_set_returns_all_others() {
        let g = FriendshipGraph::new(5);
        let s = sample_negatives(&g, 0, 4, 3);
        let mut ids = s.ids.clone();
        ids.sort_unstable();
        assert_eq!(ids, vec![1, 2, 3, 4]);
        assert!(!s.shortfall);
    }

    #[test]
    fn negatives_never_include_neighbors() {
        use rand::Rng;
        let mut rng = rng::stream(8, "neg-test-graph");
        let mut g = FriendshipGraph::new(100);
        for _ in 0..300 {
            let u = rng.gen_range(0..100u32);
            let v = rng.gen_range(0..100u32);
            g.add_edge(u, v, 1);
        }
        for trial in 0..1000u64 {
            let u = (trial % 100) as u32;
            let s = sample_negatives(&g, u, 10, trial);
            assert_eq!(s.ids.len(), 10);
            let mut dedup = s.ids.clone();
            dedup.sort_unstable();
            dedup.dedup();
            assert_eq!(dedup.len(), 10, "duplicates returned");
            for &x in &s.ids {
                assert_ne!(x, u);
                assert!(!g.has_edge(u, x), "neighbor {x} sampled for {u}");
            }
        }
    }

    #[test]
    fn negatives_deterministic_and_respect_exclusions() {
        let g = FriendshipGraph::new(50);
        let a = sample_negatives_excluding(&g, 0, &[7, 9], 20, 99);
        let b = sample_negatives_excluding(&g, 0, &[7, 9], 20, 99);
        assert_eq!(a.ids, b.ids);
        assert!(!a.ids.contains(&7));
        assert!(!a.ids.contains(&9));
    }

    #[test]
    fn common_neighbors_brute_force_example() {
        // edges {(a,b),(a,c),(b,d),(c,d)} with a=0,b=1,c=2,d=3
        let mut g = FriendshipGraph::new(4);
        g.add_edge(0, 1, 1);
        g.add_edge(0, 2, 1);
        g.add_edge(1, 3, 1);
        g.add_edge(2, 3, 1);
        assert_eq!(g.common_neighbors(0, 3), 2);
        assert_eq!(g.common_neighbors(3, 0), 2);
        assert_eq!(g.common_neighbors(0, 1), 0);
    }

    #[test]
    fn up_to_day_filters_edges() {
        let mut g = FriendshipGraph::new(4);
        g.add_edge(0, 1, 1);
        g.add_edge(1, 2, 7);
        g.add_edge(2, 3, 8);
        let h = g.up_to_day(7);
        assert!(h.has_edge(0, 1));
        assert!(h.has_edge(1, 2));
        assert!(!h.has_edge(2, 3));
        assert_eq!(h.n(), 4);
    }
}
