//! Candidate UGV route generation: drop random non-depot nodes, keep the
//! graph connected, build the metric closure of the survivors, solve a
//! heuristic TSP (nearest neighbor + 2-opt) over it, and expand the tour
//! back to a road walk through shortest paths.

use rand::seq::SliceRandom;
use rand::Rng;

use super::graph::RoadGraph;
use crate::error::{Error, Result};
use crate::submodular::{GroundSet, NodeId, Route, RouteId};

const MAX_REMOVAL_RETRIES: usize = 100;

/// Generates `count` closed depot tours as the ground set of candidate
/// routes.
pub fn generate_candidate_routes(
    graph: &RoadGraph,
    count: usize,
    removal_fraction: f64,
    rng: &mut impl Rng,
) -> Result<GroundSet> {
    if count == 0 {
        return Err(Error::invalid("route count must be >= 1"));
    }
    if !(0.0..1.0).contains(&removal_fraction) {
        return Err(Error::invalid(format!(
            "removal fraction {removal_fraction} outside [0, 1)"
        )));
    }
    let routes = (0..count)
        .map(|i| {
            let nodes = generate_one_route(graph, removal_fraction, rng)?;
            Ok(Route { id: RouteId(i), nodes })
        })
        .collect::<Result<Vec<_>>>()?;
    GroundSet::new(routes)
}

fn generate_one_route(
    graph: &RoadGraph,
    removal_fraction: f64,
    rng: &mut impl Rng,
) -> Result<Vec<NodeId>> {
    let n = graph.n_nodes();
    let depot = graph.depot();
    let n_remove = (removal_fraction * (n - 1) as f64).floor() as usize;

    // remove nodes one at a time in random order, skipping any removal
    // that would disconnect the survivors; every connected graph keeps a
    // non-cut vertex, so repeated passes reach the quota unless it only
    // leaves the depot
    let non_depot: Vec<usize> = (0..n).filter(|&i| i != depot.0).collect();
    for _ in 0..MAX_REMOVAL_RETRIES {
        let mut candidates = non_depot.clone();
        candidates.shuffle(rng);
        let mut allowed = vec![true; n];
        let mut removed = 0;
        loop {
            let before = removed;
            candidates.retain(|&i| {
                if removed == n_remove || !allowed[i] {
                    return allowed[i] && removed < n_remove;
                }
                allowed[i] = false;
                if graph.induced_is_connected(&allowed) {
                    removed += 1;
                    false
                } else {
                    allowed[i] = true;
                    true
                }
            });
            if removed == n_remove || removed == before {
                break;
            }
        }
        if removed == n_remove {
            return expand_tour(graph, &allowed);
        }
    }
    Err(Error::Graph(format!(
        "failed to find a connected subgraph after {MAX_REMOVAL_RETRIES} removals"
    )))
}

/// Builds the tour over the surviving nodes and expands it to a road walk.
fn expand_tour(graph: &RoadGraph, allowed: &[bool]) -> Result<Vec<NodeId>> {
    let survivors: Vec<NodeId> =
        (0..graph.n_nodes()).filter(|&i| allowed[i]).map(NodeId).collect();
    let depot = graph.depot();
    let m = survivors.len();
    let index_of: std::collections::BTreeMap<NodeId, usize> =
        survivors.iter().enumerate().map(|(i, &v)| (v, i)).collect();

    // metric closure over the induced subgraph
    let mut dist = vec![vec![0.0f64; m]; m];
    let mut prevs = Vec::with_capacity(m);
    for (i, &src) in survivors.iter().enumerate() {
        let (d, prev) = graph.shortest_paths(src, Some(allowed));
        for (j, &dst) in survivors.iter().enumerate() {
            dist[i][j] = d[dst.0];
        }
        prevs.push(prev);
    }

    let depot_idx = index_of[&depot];
    let (tour, _, _) = solve_tsp(&dist, depot_idx);

    // expand consecutive tour legs into road paths
    let mut walk: Vec<NodeId> = vec![depot];
    for leg in 0..tour.len() {
        let from = tour[leg];
        let to = tour[(leg + 1) % tour.len()];
        let path = RoadGraph::path_from_prev(&prevs[from], survivors[from], survivors[to])?;
        walk.extend_from_slice(&path[1..]);
    }
    Ok(walk)
}

/// Nearest-neighbor construction followed by 2-opt improvement over a
/// closed tour. Returns the tour (as indices into the distance matrix,
/// starting at `start`), the nearest-neighbor length, and the final
/// length.
pub(crate) fn solve_tsp(dist: &[Vec<f64>], start: usize) -> (Vec<usize>, f64, f64) {
    let m = dist.len();
    let mut tour = Vec::with_capacity(m);
    let mut visited = vec![false; m];
    tour.push(start);
    visited[start] = true;
    while tour.len() < m {
        let here = *tour.last().unwrap();
        let mut best = None;
        let mut best_d = f64::INFINITY;
        for (j, &v) in visited.iter().enumerate() {
            if !v && dist[here][j] < best_d {
                best_d = dist[here][j];
                best = Some(j);
            }
        }
        tour.push(best.expect("unvisited node must exist"));
        visited[best.unwrap()] = true;
    }
    let nn_len = tour_length(dist, &tour);

    // 2-opt: reverse segments while an improving move exists
    let mut improved = true;
    let mut passes = 0;
    while improved && passes < 200 {
        improved = false;
        passes += 1;
        for i in 0..m.saturating_sub(1) {
            for j in (i + 2)..m {
                if i == 0 && j == m - 1 {
                    continue;
                }
                let a = tour[i];
                let b = tour[i + 1];
                let c = tour[j];
                let d = tour[(j + 1) % m];
                let delta = dist[a][c] + dist[b][d] - dist[a][b] - dist[c][d];
                if delta < -1e-10 {
                    tour[i + 1..=j].reverse();
                    improved = true;
                }
            }
        }
    }
    let final_len = tour_length(dist, &tour);
    (tour, nn_len, final_len)
}

fn tour_length(dist: &[Vec<f64>], tour: &[usize]) -> f64 {
    let m = tour.len();
    (0..m).map(|i| dist[tour[i]][tour[(i + 1) % m]]).sum()
}
