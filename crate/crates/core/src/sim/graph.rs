//! Road network: an undirected connected graph with Euclidean edge lengths.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::submodular::NodeId;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RoadGraphRepr", into = "RoadGraphRepr")]
pub struct RoadGraph {
    nodes: Vec<(f64, f64)>,
    edges: Vec<(NodeId, NodeId)>,
    depot: NodeId,
    #[allow(clippy::type_complexity)]
    adjacency: Vec<Vec<(NodeId, f64)>>,
}

#[derive(Serialize, Deserialize)]
struct RoadGraphRepr {
    nodes: Vec<(f64, f64)>,
    edges: Vec<(usize, usize)>,
    depot: usize,
}

impl From<RoadGraph> for RoadGraphRepr {
    fn from(g: RoadGraph) -> Self {
        RoadGraphRepr {
            nodes: g.nodes,
            edges: g.edges.iter().map(|(u, v)| (u.0, v.0)).collect(),
            depot: g.depot.0,
        }
    }
}

impl TryFrom<RoadGraphRepr> for RoadGraph {
    type Error = Error;
    fn try_from(r: RoadGraphRepr) -> Result<Self> {
        RoadGraph::new(
            r.nodes,
            r.edges.into_iter().map(|(u, v)| (NodeId(u), NodeId(v))).collect(),
            NodeId(r.depot),
        )
    }
}

impl PartialEq for RoadGraph {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.edges == other.edges && self.depot == other.depot
    }
}

fn euclid(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

impl RoadGraph {
    pub fn new(nodes: Vec<(f64, f64)>, edges: Vec<(NodeId, NodeId)>, depot: NodeId) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Graph("graph must have at least one node".into()));
        }
        if depot.0 >= nodes.len() {
            return Err(Error::Graph(format!("depot {depot} outside the node range")));
        }
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for &(u, v) in &edges {
            if u.0 >= nodes.len() || v.0 >= nodes.len() {
                return Err(Error::Graph(format!("edge ({u}, {v}) references a missing node")));
            }
            if u == v {
                return Err(Error::Graph(format!("self-loop at node {u}")));
            }
            let len = euclid(nodes[u.0], nodes[v.0]);
            if len <= 0.0 {
                return Err(Error::Graph(format!(
                    "edge ({u}, {v}) has zero length (coincident endpoints)"
                )));
            }
            adjacency[u.0].push((v, len));
            adjacency[v.0].push((u, len));
        }
        let graph = RoadGraph { nodes, edges, depot, adjacency };
        if !graph.is_connected() {
            return Err(Error::Graph("graph must be connected".into()));
        }
        Ok(graph)
    }

    /// A grid road network with the given spacing; node `(ix, iy)` sits at
    /// `(ix * spacing, iy * spacing)` and has index `iy * nx + ix`.
    pub fn grid(nx: usize, ny: usize, spacing: f64, depot: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::Graph("grid dimensions must be positive".into()));
        }
        if spacing <= 0.0 {
            return Err(Error::Graph("grid spacing must be positive".into()));
        }
        let mut nodes = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            for ix in 0..nx {
                nodes.push((ix as f64 * spacing, iy as f64 * spacing));
            }
        }
        let mut edges = Vec::new();
        for iy in 0..ny {
            for ix in 0..nx {
                let id = iy * nx + ix;
                if ix + 1 < nx {
                    edges.push((NodeId(id), NodeId(id + 1)));
                }
                if iy + 1 < ny {
                    edges.push((NodeId(id), NodeId(id + nx)));
                }
            }
        }
        RoadGraph::new(nodes, edges, NodeId(depot))
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn depot(&self) -> NodeId {
        self.depot
    }

    pub fn coords(&self, node: NodeId) -> (f64, f64) {
        self.nodes[node.0]
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn neighbors(&self, node: NodeId) -> &[(NodeId, f64)] {
        &self.adjacency[node.0]
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len()).map(NodeId)
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![NodeId(0)];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &(v, _) in self.neighbors(u) {
                if !seen[v.0] {
                    seen[v.0] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == self.nodes.len()
    }

    /// Checks connectivity of the subgraph induced by `allowed`.
    pub fn induced_is_connected(&self, allowed: &[bool]) -> bool {
        let Some(start) = (0..self.nodes.len()).find(|&i| allowed[i]) else {
            return false;
        };
        let total = allowed.iter().filter(|&&a| a).count();
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![NodeId(start)];
        seen[start] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &(v, _) in self.neighbors(u) {
                if allowed[v.0] && !seen[v.0] {
                    seen[v.0] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == total
    }

    /// Dijkstra from `src`, optionally restricted to an induced subgraph.
    /// Returns distances and predecessor links.
    pub fn shortest_paths(
        &self,
        src: NodeId,
        allowed: Option<&[bool]>,
    ) -> (Vec<f64>, Vec<Option<NodeId>>) {
        #[derive(PartialEq)]
        struct Entry {
            dist: f64,
            node: NodeId,
        }
        impl Eq for Entry {}
        impl Ord for Entry {
            fn cmp(&self, other: &Self) -> Ordering {
                // reversed for a min-heap; distances are finite and non-NaN
                other.dist.total_cmp(&self.dist).then(other.node.0.cmp(&self.node.0))
            }
        }
        impl PartialOrd for Entry {
            fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
                Some(self.cmp(other))
            }
        }

        let n = self.nodes.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut prev = vec![None; n];
        let ok = |i: usize| allowed.map_or(true, |a| a[i]);
        if !ok(src.0) {
            return (dist, prev);
        }
        dist[src.0] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(Entry { dist: 0.0, node: src });
        while let Some(Entry { dist: d, node: u }) = heap.pop() {
            if d > dist[u.0] {
                continue;
            }
            for &(v, len) in self.neighbors(u) {
                if !ok(v.0) {
                    continue;
                }
                let nd = d + len;
                if nd < dist[v.0] {
                    dist[v.0] = nd;
                    prev[v.0] = Some(u);
                    heap.push(Entry { dist: nd, node: v });
                }
            }
        }
        (dist, prev)
    }

    /// Reconstructs the path `src -> target` from predecessor links.
    pub fn path_from_prev(prev: &[Option<NodeId>], src: NodeId, target: NodeId) -> Result<Vec<NodeId>> {
        let mut path = vec![target];
        let mut cur = target;
        while cur != src {
            match prev[cur.0] {
                Some(p) => {
                    path.push(p);
                    cur = p;
                }
                None => {
                    return Err(Error::Graph(format!("no path from {src} to {target}")));
                }
            }
        }
        path.reverse();
        Ok(path)
    }

    /// The road node closest to a point; ties break toward the lowest id.
    pub fn nearest_node(&self, point: (f64, f64)) -> NodeId {
        let mut best = NodeId(0);
        let mut best_d = f64::INFINITY;
        for (i, &xy) in self.nodes.iter().enumerate() {
            let d = euclid(point, xy);
            if d < best_d {
                best_d = d;
                best = NodeId(i);
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_has_expected_structure() {
        let g = RoadGraph::grid(3, 2, 10.0, 0).unwrap();
        assert_eq!(g.n_nodes(), 6);
        assert_eq!(g.edges().len(), 7);
        assert_eq!(g.coords(NodeId(4)), (10.0, 10.0));
    }

    #[test]
    fn rejects_malformed_graphs() {
        assert!(RoadGraph::new(vec![], vec![], NodeId(0)).is_err());
        // disconnected
        assert!(RoadGraph::new(vec![(0.0, 0.0), (1.0, 0.0)], vec![], NodeId(0)).is_err());
        // self loop
        assert!(RoadGraph::new(
            vec![(0.0, 0.0), (1.0, 0.0)],
            vec![(NodeId(0), NodeId(0)), (NodeId(0), NodeId(1))],
            NodeId(0)
        )
        .is_err());
        // coincident endpoints
        assert!(RoadGraph::new(
            vec![(0.0, 0.0), (0.0, 0.0)],
            vec![(NodeId(0), NodeId(1))],
            NodeId(0)
        )
        .is_err());
        // depot out of range
        assert!(RoadGraph::new(vec![(0.0, 0.0)], vec![], NodeId(3)).is_err());
    }

    #[test]
    fn dijkstra_on_grid() {
        let g = RoadGraph::grid(3, 3, 1.0, 0).unwrap();
        let (dist, prev) = g.shortest_paths(NodeId(0), None);
        assert!((dist[8] - 4.0).abs() < 1e-12);
        let path = RoadGraph::path_from_prev(&prev, NodeId(0), NodeId(8)).unwrap();
        assert_eq!(path.len(), 5);
        assert_eq!(path[0], NodeId(0));
        assert_eq!(path[4], NodeId(8));
    }

    #[test]
    fn restricted_dijkstra_respects_mask() {
        let g = RoadGraph::grid(3, 1, 1.0, 0).unwrap();
        let mut allowed = vec![true; 3];
        allowed[1] = false;
        let (dist, _) = g.shortest_paths(NodeId(0), Some(&allowed));
        assert!(dist[2].is_infinite());
    }

    #[test]
    fn nearest_node_picks_closest() {
        let g = RoadGraph::grid(3, 3, 10.0, 0).unwrap();
        assert_eq!(g.nearest_node((11.0, 9.0)), NodeId(4));
        assert_eq!(g.nearest_node((-5.0, -5.0)), NodeId(0));
    }

    #[test]
    fn json_round_trip() {
        let g = RoadGraph::grid(4, 3, 25.0, 2).unwrap();
        let back: RoadGraph = serde_json::from_str(&serde_json::to_string(&g).unwrap()).unwrap();
        assert_eq!(g, back);
    }
}
