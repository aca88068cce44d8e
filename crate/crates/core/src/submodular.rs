//! Parameterized monotone submodular coverage objectives over candidate
//! routes.
//!
//! The ground set is a collection of routes on a road graph. For a node
//! partition `W_1..W_n` and a family of decay parameters `Γ`, the basis
//! function value for partition `i` and decay `γ` is `Σ_{α=1..ψ} γ^(α-1)`,
//! where `ψ` counts covered vertices. The full objective is the
//! `w`-weighted sum of basis values, which is normalized, monotone, and
//! submodular for any non-negative weight matrix.
//!
//! Coverage multiplicity: repeated visits of a node *within one route*
//! count once; visits of the same node by *different* selected routes each
//! count. The decay `γ` then discounts the repeats.

use std::collections::BTreeSet;
use std::io::{Read, Write};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a node on the road graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

/// Identifier of a candidate route.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RouteId(pub usize);

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::fmt::Display for RouteId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One candidate route: an ordered node sequence. Nodes may repeat and
/// routes may overlap each other.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Route {
    pub id: RouteId,
    pub nodes: Vec<NodeId>,
}

/// The ground set of candidate routes, kept sorted by route id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GroundSetRepr", into = "GroundSetRepr")]
pub struct GroundSet {
    routes: Vec<Route>,
}

#[derive(Serialize, Deserialize)]
struct GroundSetRepr {
    routes: Vec<Route>,
}

impl From<GroundSet> for GroundSetRepr {
    fn from(g: GroundSet) -> Self {
        GroundSetRepr { routes: g.routes }
    }
}

impl TryFrom<GroundSetRepr> for GroundSet {
    type Error = Error;
    fn try_from(r: GroundSetRepr) -> Result<Self> {
        GroundSet::new(r.routes)
    }
}

impl GroundSet {
    pub fn new(mut routes: Vec<Route>) -> Result<Self> {
        if routes.is_empty() {
            return Err(Error::invalid("ground set must contain at least one route"));
        }
        routes.sort_by_key(|r| r.id);
        if routes.windows(2).any(|w| w[0].id == w[1].id) {
            return Err(Error::invalid("route ids must be unique"));
        }
        Ok(GroundSet { routes })
    }

    pub fn len(&self) -> usize {
        self.routes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }

    /// Routes in canonical (ascending id) order.
    pub fn routes(&self) -> &[Route] {
        &self.routes
    }

    pub fn route_ids(&self) -> impl Iterator<Item = RouteId> + '_ {
        self.routes.iter().map(|r| r.id)
    }

    pub fn route(&self, id: RouteId) -> Result<&Route> {
        self.index_of(id).map(|i| &self.routes[i])
    }

    pub(crate) fn index_of(&self, id: RouteId) -> Result<usize> {
        self.routes
            .binary_search_by_key(&id, |r| r.id)
            .map_err(|_| Error::invalid(format!("unknown route id {id}")))
    }

    /// Checks that every node id referenced by a route is below `n_nodes`.
    pub fn validate_nodes(&self, n_nodes: usize) -> Result<()> {
        for route in &self.routes {
            if let Some(bad) = route.nodes.iter().find(|n| n.0 >= n_nodes) {
                return Err(Error::invalid(format!(
                    "route {} references node {bad} outside the graph (|V| = {n_nodes})",
                    route.id
                )));
            }
        }
        Ok(())
    }
}

/// Disjoint node sets `W_1..W_n` that define the coverage basis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "NodePartitionRepr", into = "NodePartitionRepr")]
pub struct NodePartition {
    sets: Vec<BTreeSet<NodeId>>,
}

#[derive(Serialize, Deserialize)]
struct NodePartitionRepr {
    sets: Vec<BTreeSet<NodeId>>,
}

impl From<NodePartition> for NodePartitionRepr {
    fn from(p: NodePartition) -> Self {
        NodePartitionRepr { sets: p.sets }
    }
}

impl TryFrom<NodePartitionRepr> for NodePartition {
    type Error = Error;
    fn try_from(r: NodePartitionRepr) -> Result<Self> {
        NodePartition::new(r.sets)
    }
}

impl NodePartition {
    pub fn new(sets: Vec<BTreeSet<NodeId>>) -> Result<Self> {
        if sets.is_empty() {
            return Err(Error::invalid("partition must contain at least one set"));
        }
        if sets.iter().any(|s| s.is_empty()) {
            return Err(Error::invalid("partition sets must be non-empty"));
        }
        let mut seen = BTreeSet::new();
        for set in &sets {
            for node in set {
                if !seen.insert(*node) {
                    return Err(Error::invalid(format!(
                        "partition sets must be disjoint (node {node} repeats)"
                    )));
                }
            }
        }
        Ok(NodePartition { sets })
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn sets(&self) -> &[BTreeSet<NodeId>] {
        &self.sets
    }

    pub fn set(&self, index: usize) -> Result<&BTreeSet<NodeId>> {
        self.sets
            .get(index)
            .ok_or_else(|| Error::invalid(format!("partition index {index} out of range")))
    }
}

/// The decay parameters `Γ`, each in `(0, 1]`, strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BasisFamilyRepr", into = "BasisFamilyRepr")]
pub struct BasisFamily {
    gammas: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct BasisFamilyRepr {
    gammas: Vec<f64>,
}

impl From<BasisFamily> for BasisFamilyRepr {
    fn from(b: BasisFamily) -> Self {
        BasisFamilyRepr { gammas: b.gammas }
    }
}

impl TryFrom<BasisFamilyRepr> for BasisFamily {
    type Error = Error;
    fn try_from(r: BasisFamilyRepr) -> Result<Self> {
        BasisFamily::new(r.gammas)
    }
}

impl BasisFamily {
    pub fn new(gammas: Vec<f64>) -> Result<Self> {
        if gammas.is_empty() {
            return Err(Error::invalid("basis family must contain at least one decay"));
        }
        for &g in &gammas {
            if !(g > 0.0 && g <= 1.0) {
                return Err(Error::invalid(format!("decay {g} outside (0, 1]")));
            }
        }
        if gammas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("decays must be strictly increasing"));
        }
        Ok(BasisFamily { gammas })
    }

    pub fn len(&self) -> usize {
        self.gammas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gammas.is_empty()
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }
}

/// Non-negative reward weights, one row per partition set, one column per
/// decay parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WeightMatrixRepr", into = "WeightMatrixRepr")]
pub struct WeightMatrix {
    data: Array2<f64>,
}

#[derive(Serialize, Deserialize)]
struct WeightMatrixRepr {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl From<WeightMatrix> for WeightMatrixRepr {
    fn from(w: WeightMatrix) -> Self {
        let (rows, cols) = w.data.dim();
        WeightMatrixRepr { rows, cols, data: w.data.into_raw_vec_and_offset().0 }
    }
}

impl TryFrom<WeightMatrixRepr> for WeightMatrix {
    type Error = Error;
    fn try_from(r: WeightMatrixRepr) -> Result<Self> {
        WeightMatrix::from_vec(r.rows, r.cols, r.data)
    }
}

impl WeightMatrix {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        for &v in data.iter() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid(format!("weight entries must be finite and >= 0, got {v}")));
            }
        }
        Ok(WeightMatrix { data })
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        let arr = Array2::from_shape_vec((rows, cols), data)
            .map_err(|e| Error::dims(format!("weight matrix shape: {e}")))?;
        WeightMatrix::new(arr)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        WeightMatrix { data: Array2::zeros((rows, cols)) }
    }

    pub fn n_partitions(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_gammas(&self) -> usize {
        self.data.ncols()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[(i, j)]
    }

    /// Scales every entry by a non-negative factor.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        WeightMatrix::new(&self.data * factor)
    }

    fn check_shape(&self, partition: &NodePartition, basis: &BasisFamily) -> Result<()> {
        if self.n_partitions() != partition.len() || self.n_gammas() != basis.len() {
            return Err(Error::dims(format!(
                "weight matrix is {}x{} but instance needs {}x{}",
                self.n_partitions(),
                self.n_gammas(),
                partition.len(),
                basis.len()
            )));
        }
        Ok(())
    }

    /// Writes the matrix as CSV: a header row of decay values, then one row
    /// of weights per partition set.
    pub fn write_csv<W: Write>(&self, basis: &BasisFamily, out: W) -> Result<()> {
        self.check_shape_cols(basis)?;
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(basis.gammas().iter().map(|g| format!("{g:.17e}")))?;
        for row in self.data.rows() {
            wtr.write_record(row.iter().map(|v| format!("{v:.17e}")))?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads a matrix plus its decay header back from CSV.
    pub fn read_csv<R: Read>(input: R) -> Result<(WeightMatrix, BasisFamily)> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
        let mut records = rdr.records();
        let header = records
            .next()
            .ok_or_else(|| Error::invalid("empty weight csv"))??;
        let gammas = header
            .iter()
            .map(|f| f.trim().parse::<f64>().map_err(|e| Error::invalid(format!("bad decay value: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let basis = BasisFamily::new(gammas)?;
        let mut data = Vec::new();
        let mut rows = 0;
        for record in records {
            let record = record?;
            if record.len() != basis.len() {
                return Err(Error::dims(format!(
                    "csv row has {} fields, expected {}",
                    record.len(),
                    basis.len()
                )));
            }
            for field in record.iter() {
                data.push(
                    field
                        .trim()
                        .parse::<f64>()
                        .map_err(|e| Error::invalid(format!("bad weight value: {e}")))?,
                );
            }
            rows += 1;
        }
        Ok((WeightMatrix::from_vec(rows, basis.len(), data)?, basis))
    }

    fn check_shape_cols(&self, basis: &BasisFamily) -> Result<()> {
        if self.n_gammas() != basis.len() {
            return Err(Error::dims(format!(
                "weight matrix has {} columns but basis family has {}",
                self.n_gammas(),
                basis.len()
            )));
        }
        Ok(())
    }
}

/// An ordered duplicate-free subset of the ground set. Order records the
/// sequence in which greedy picked the routes.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Selection {
    chosen: Vec<RouteId>,
}

impl Selection {
    pub fn empty() -> Self {
        Selection { chosen: Vec::new() }
    }

    pub fn from_ids(ids: impl IntoIterator<Item = RouteId>) -> Result<Self> {
        let mut sel = Selection::empty();
        for id in ids {
            sel.push(id)?;
        }
        Ok(sel)
    }

    pub fn push(&mut self, id: RouteId) -> Result<()> {
        if self.contains(id) {
            return Err(Error::invalid(format!("route {id} already selected")));
        }
        self.chosen.push(id);
        Ok(())
    }

    pub fn contains(&self, id: RouteId) -> bool {
        self.chosen.contains(&id)
    }

    pub fn len(&self) -> usize {
        self.chosen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chosen.is_empty()
    }

    pub fn ids(&self) -> &[RouteId] {
        &self.chosen
    }

    /// Ids in ascending order, for set-wise comparisons.
    pub fn sorted_ids(&self) -> Vec<RouteId> {
        let mut ids = self.chosen.clone();
        ids.sort();
        ids
    }

    pub fn is_subset_of(&self, other: &Selection) -> bool {
        self.chosen.iter().all(|id| other.contains(*id))
    }
}

impl std::fmt::Display for Selection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{")?;
        for (i, id) in self.chosen.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{id}")?;
        }
        write!(f, "}}")
    }
}

/// Basis value `Σ_{α=1..ψ} γ^(α-1)`.
///
/// Uses the closed form `(1 - γ^ψ)/(1 - γ)` away from `γ = 1` and direct
/// summation inside the cancellation-prone band.
pub fn basis_value(psi: usize, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::invalid(format!("decay {gamma} outside (0, 1]")));
    }
    Ok(basis_value_unchecked(psi, gamma))
}

pub(crate) fn basis_value_unchecked(psi: usize, gamma: f64) -> f64 {
    if psi == 0 {
        return 0.0;
    }
    if (1.0 - gamma).abs() > 1e-9 {
        (1.0 - gamma.powi(psi as i32)) / (1.0 - gamma)
    } else {
        let mut sum = 0.0;
        let mut term = 1.0;
        for _ in 0..psi {
            sum += term;
            term *= gamma;
        }
        sum
    }
}

/// A coverage objective instance with per-route coverage counts
/// precomputed so that greedy inner loops run in `O(n·|Γ|)` per candidate.
#[derive(Debug, Clone)]
pub struct CoverageObjective {
    ground: GroundSet,
    partition: NodePartition,
    basis: BasisFamily,
    /// counts[route_index][partition_index] = distinct nodes of that route
    /// inside the partition set.
    counts: Vec<Vec<usize>>,
}

impl CoverageObjective {
    pub fn new(ground: GroundSet, partition: NodePartition, basis: BasisFamily) -> Self {
        let counts = ground
            .routes()
            .iter()
            .map(|route| {
                let distinct: BTreeSet<NodeId> = route.nodes.iter().copied().collect();
                partition
                    .sets()
                    .iter()
                    .map(|set| distinct.iter().filter(|n| set.contains(n)).count())
                    .collect()
            })
            .collect();
        CoverageObjective { ground, partition, basis, counts }
    }

    pub fn ground(&self) -> &GroundSet {
        &self.ground
    }

    pub fn partition(&self) -> &NodePartition {
        &self.partition
    }

    pub fn basis(&self) -> &BasisFamily {
        &self.basis
    }

    pub fn n_partitions(&self) -> usize {
        self.partition.len()
    }

    pub fn n_gammas(&self) -> usize {
        self.basis.len()
    }

    /// Distinct-node coverage of a single route inside each partition set.
    pub fn route_coverage(&self, id: RouteId) -> Result<&[usize]> {
        Ok(&self.counts[self.ground.index_of(id)?])
    }

    /// Coverage count `ψ_i(S)`: vertex visits of the selected routes in
    /// `W_i`, deduplicated within a route, summed across routes.
    pub fn count_coverage(&self, partition_index: usize, selection: &Selection) -> Result<usize> {
        if partition_index >= self.partition.len() {
            return Err(Error::invalid(format!(
                "partition index {partition_index} out of range (n = {})",
                self.partition.len()
            )));
        }
        let mut psi = 0;
        for id in selection.ids() {
            psi += self.counts[self.ground.index_of(*id)?][partition_index];
        }
        Ok(psi)
    }

    /// All coverage counts at once.
    pub fn psi_vector(&self, selection: &Selection) -> Result<Vec<usize>> {
        let mut psi = vec![0usize; self.partition.len()];
        for id in selection.ids() {
            let row = &self.counts[self.ground.index_of(*id)?];
            for (p, c) in psi.iter_mut().zip(row) {
                *p += c;
            }
        }
        Ok(psi)
    }

    /// Weighted objective `f(S, w) = Σ_i Σ_j w_ij · Σ_{α=1..ψ_i} γ_j^(α-1)`.
    pub fn objective_value(&self, selection: &Selection, w: &WeightMatrix) -> Result<f64> {
        w.check_shape(&self.partition, &self.basis)?;
        let psi = self.psi_vector(selection)?;
        Ok(self.value_from_psi(&psi, w))
    }

    pub(crate) fn value_from_psi(&self, psi: &[usize], w: &WeightMatrix) -> f64 {
        let mut total = 0.0;
        for (i, &p) in psi.iter().enumerate() {
            if p == 0 {
                continue;
            }
            for (j, &gamma) in self.basis.gammas().iter().enumerate() {
                total += w.get(i, j) * basis_value_unchecked(p, gamma);
            }
        }
        total
    }

    /// Marginal gain `f(S ∪ {u}, w) - f(S, w)`.
    pub fn marginal_gain(
        &self,
        selection: &Selection,
        candidate: RouteId,
        w: &WeightMatrix,
    ) -> Result<f64> {
        w.check_shape(&self.partition, &self.basis)?;
        if selection.contains(candidate) {
            return Err(Error::invalid(format!("candidate {candidate} already selected")));
        }
        let psi = self.psi_vector(selection)?;
        Ok(self.gain_from_psi(&psi, self.ground.index_of(candidate)?, w))
    }

    pub(crate) fn gain_from_psi(&self, psi: &[usize], candidate_index: usize, w: &WeightMatrix) -> f64 {
        let row = &self.counts[candidate_index];
        let mut gain = 0.0;
        for (i, (&p, &c)) in psi.iter().zip(row).enumerate() {
            if c == 0 {
                continue;
            }
            for (j, &gamma) in self.basis.gammas().iter().enumerate() {
                gain += w.get(i, j)
                    * (basis_value_unchecked(p + c, gamma) - basis_value_unchecked(p, gamma));
            }
        }
        gain
    }

    /// Gradient of the marginal gain in the weights. The objective is
    /// linear in `w`, so entry `(i, j)` is the basis-value increment and is
    /// independent of `w`.
    pub fn marginal_gain_weight_gradient(
        &self,
        selection: &Selection,
        candidate: RouteId,
    ) -> Result<Array2<f64>> {
        if selection.contains(candidate) {
            return Err(Error::invalid(format!("candidate {candidate} already selected")));
        }
        let psi = self.psi_vector(selection)?;
        Ok(self.gain_gradient_from_psi(&psi, self.ground.index_of(candidate)?))
    }

    pub(crate) fn gain_gradient_from_psi(&self, psi: &[usize], candidate_index: usize) -> Array2<f64> {
        let row = &self.counts[candidate_index];
        let mut grad = Array2::zeros((self.partition.len(), self.basis.len()));
        for (i, (&p, &c)) in psi.iter().zip(row).enumerate() {
            if c == 0 {
                continue;
            }
            for (j, &gamma) in self.basis.gammas().iter().enumerate() {
                grad[(i, j)] =
                    basis_value_unchecked(p + c, gamma) - basis_value_unchecked(p, gamma);
            }
        }
        grad
    }

    /// Updates a coverage vector in place after adding a route.
    pub(crate) fn add_route_to_psi(&self, psi: &mut [usize], route_index: usize) {
        for (p, c) in psi.iter_mut().zip(&self.counts[route_index]) {
            *p += c;
        }
    }
}
