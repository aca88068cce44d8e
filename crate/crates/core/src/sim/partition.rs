//! Balanced graph partitioning by multi-source BFS growth from
//! farthest-point seeds.

use std::collections::{BTreeSet, VecDeque};

use super::graph::RoadGraph;
use crate::error::{Error, Result};
use crate::submodular::{NodeId, NodePartition};

/// Splits the node set into `k` disjoint, connected, size-balanced
/// regions. Deterministic for a given seed.
pub fn partition_graph(graph: &RoadGraph, k: usize, seed: u64) -> Result<NodePartition> {
    let n = graph.n_nodes();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k = {k} invalid for a graph with {n} nodes")));
    }
    if k == 1 {
        let all: BTreeSet<NodeId> = graph.node_ids().collect();
        return NodePartition::new(vec![all]);
    }

    let seeds = farthest_point_seeds(graph, k, seed);

    // round-robin BFS growth, always extending the currently smallest
    // region that can still grow
    let mut assignment: Vec<Option<usize>> = vec![None; n];
    let mut queues: Vec<VecDeque<NodeId>> = vec![VecDeque::new(); k];
    let mut sizes = vec![0usize; k];
    for (region, &s) in seeds.iter().enumerate() {
        assignment[s.0] = Some(region);
        sizes[region] += 1;
        for &(v, _) in graph.neighbors(s) {
            queues[region].push_back(v);
        }
    }

    let mut assigned = k;
    while assigned < n {
        let Some(region) = (0..k)
            .filter(|&r| !queues[r].is_empty())
            .min_by_key(|&r| (sizes[r], r))
        else {
            return Err(Error::Graph("partition growth stalled on a disconnected graph".into()));
        };
        if let Some(u) = queues[region].pop_front() {
            if assignment[u.0].is_none() {
                assignment[u.0] = Some(region);
                sizes[region] += 1;
                assigned += 1;
                for &(v, _) in graph.neighbors(u) {
                    if assignment[v.0].is_none() {
                        queues[region].push_back(v);
                    }
                }
            }
        }
    }

    rebalance(graph, &mut assignment, &mut sizes, k);

    let mut sets = vec![BTreeSet::new(); k];
    for (i, region) in assignment.into_iter().enumerate() {
        sets[region.expect("all nodes assigned")].insert(NodeId(i));
    }
    NodePartition::new(sets)
}

/// Moves boundary nodes from the largest to adjacent smaller regions while
/// both stay connected, until sizes spread by at most one or no legal move
/// remains.
fn rebalance(graph: &RoadGraph, assignment: &mut [Option<usize>], sizes: &mut [usize], k: usize) {
    let n = graph.n_nodes();
    'outer: for _ in 0..4 * n {
        let largest = (0..k).max_by_key(|&r| (sizes[r], r)).expect("k >= 1");
        let smallest_size = (0..k).map(|r| sizes[r]).min().expect("k >= 1");
        if sizes[largest] - smallest_size <= 1 {
            return;
        }
        // candidate donations: boundary nodes of the largest region next to
        // a strictly smaller region, preferring the smallest receiver
        let mut moves: Vec<(usize, usize, usize)> = Vec::new(); // (recv size, node, recv)
        for i in 0..n {
            if assignment[i] != Some(largest) {
                continue;
            }
            for &(v, _) in graph.neighbors(NodeId(i)) {
                let recv = assignment[v.0].expect("assigned");
                if recv != largest && sizes[recv] + 1 < sizes[largest] {
                    moves.push((sizes[recv], i, recv));
                }
            }
        }
        moves.sort();
        for (_, node, recv) in moves {
            if donor_stays_connected(graph, assignment, largest, node) {
                assignment[node] = Some(recv);
                sizes[largest] -= 1;
                sizes[recv] += 1;
                continue 'outer;
            }
        }
        return; // no legal donation from the largest region
    }
}

/// Whether region `region` remains connected after dropping `node`.
fn donor_stays_connected(
    graph: &RoadGraph,
    assignment: &[Option<usize>],
    region: usize,
    node: usize,
) -> bool {
    let members: Vec<usize> = (0..graph.n_nodes())
        .filter(|&i| i != node && assignment[i] == Some(region))
        .collect();
    let Some(&start) = members.first() else { return false };
    let mut seen = BTreeSet::from([start]);
    let mut stack = vec![start];
    while let Some(u) = stack.pop() {
        for &(v, _) in graph.neighbors(NodeId(u)) {
            if v.0 != node && assignment[v.0] == Some(region) && seen.insert(v.0) {
                stack.push(v.0);
            }
        }
    }
    seen.len() == members.len()
}

/// First seed from the rng, then repeatedly the node with maximal BFS hop
/// distance to the chosen seeds (ties to the lowest id).
fn farthest_point_seeds(graph: &RoadGraph, k: usize, seed: u64) -> Vec<NodeId> {
    use rand::Rng;
    let n = graph.n_nodes();
    let mut rng = crate::seeded_rng(seed, 0);
    let first = NodeId(rng.gen_range(0..n));
    let mut seeds = vec![first];
    let mut min_hops = bfs_hops(graph, first);
    while seeds.len() < k {
        let mut best = None;
        let mut best_d = 0usize;
        for i in 0..n {
            if min_hops[i] > best_d && !seeds.contains(&NodeId(i)) {
                best_d = min_hops[i];
                best = Some(NodeId(i));
            }
        }
        // all remaining nodes at hop distance 0 can only happen when k > n,
        // which is rejected upfront
        let next = best.unwrap_or_else(|| {
            NodeId((0..n).find(|&i| !seeds.contains(&NodeId(i))).expect("k <= n"))
        });
        seeds.push(next);
        for (i, h) in bfs_hops(graph, next).into_iter().enumerate() {
            if h < min_hops[i] {
                min_hops[i] = h;
            }
        }
    }
    seeds
}

fn bfs_hops(graph: &RoadGraph, src: NodeId) -> Vec<usize> {
    let n = graph.n_nodes();
    let mut hops = vec![usize::MAX; n];
    hops[src.0] = 0;
    let mut queue = VecDeque::from([src]);
    while let Some(u) = queue.pop_front() {
        for &(v, _) in graph.neighbors(u) {
            if hops[v.0] == usize::MAX {
                hops[v.0] = hops[u.0] + 1;
                queue.push_back(v);
            }
        }
    }
    hops
}

#[cfg(test)]
mod tests {
    use super::*;

    fn region_is_connected(graph: &RoadGraph, set: &BTreeSet<NodeId>) -> bool {
        let Some(&start) = set.iter().next() else { return false };
        let mut seen = BTreeSet::from([start]);
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for &(v, _) in graph.neighbors(u) {
                if set.contains(&v) && seen.insert(v) {
                    stack.push(v);
                }
            }
        }
        seen.len() == set.len()
    }

    #[test]
    fn single_region_is_whole_graph() {
        let graph = RoadGraph::grid(4, 4, 10.0, 0).unwrap();
        let p = partition_graph(&graph, 1, 0).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.sets()[0].len(), 16);
    }

    #[test]
    fn rejects_bad_k() {
        let graph = RoadGraph::grid(2, 2, 10.0, 0).unwrap();
        assert!(partition_graph(&graph, 0, 0).is_err());
        assert!(partition_graph(&graph, 5, 0).is_err());
    }

    #[test]
    fn partitions_cover_disjointly_and_stay_connected() {
        let graph = RoadGraph::grid(9, 9, 100.0, 0).unwrap();
        for seed in [0u64, 1, 72] {
            let p = partition_graph(&graph, 9, seed).unwrap();
            assert_eq!(p.len(), 9);
            let total: usize = p.sets().iter().map(|s| s.len()).sum();
            assert_eq!(total, 81);
            for set in p.sets() {
                assert!(region_is_connected(&graph, set), "seed {seed}: disconnected region");
            }
        }
    }

    #[test]
    fn default_map_partition_is_balanced() {
        let graph = RoadGraph::grid(9, 9, 100.0, 0).unwrap();
        let p = partition_graph(&graph, 9, 72).unwrap();
        let ideal = 81.0 / 9.0;
        for set in p.sets() {
            let size = set.len() as f64;
            assert!(
                (size - ideal).abs() <= 2.0,
                "region size {size} deviates from {ideal} by more than 2"
            );
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let graph = RoadGraph::grid(7, 7, 10.0, 0).unwrap();
        let a = partition_graph(&graph, 6, 9).unwrap();
        let b = partition_graph(&graph, 6, 9).unwrap();
        assert_eq!(a, b);
    }
}
