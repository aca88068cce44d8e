//! Greedy maximization over an independence system, in two flavors: the
//! deterministic classic and a smoothed variant that samples each step from
//! an entropy-regularized distribution over marginal gains.
//!
//! The smoothed variant records a full trace (candidates, gains, step
//! distribution, chosen element and probability) so that downstream code
//! can differentiate the output distribution in the objective weights.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::submodular::{CoverageObjective, GroundSet, RouteId, Selection, WeightMatrix};

/// Feasibility structure for selections.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum IndependenceSystem {
    /// `|S| <= limit`.
    Cardinality { limit: usize },
    /// Per-block capacities over a partition of the ground set.
    Partition { blocks: Vec<PartitionBlock> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionBlock {
    pub routes: BTreeSet<RouteId>,
    pub capacity: usize,
}

impl IndependenceSystem {
    pub fn cardinality(limit: usize) -> Result<Self> {
        if limit == 0 {
            return Err(Error::invalid("cardinality limit must be >= 1"));
        }
        Ok(IndependenceSystem::Cardinality { limit })
    }

    pub fn partition(blocks: Vec<(BTreeSet<RouteId>, usize)>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for (routes, _) in &blocks {
            for id in routes {
                if !seen.insert(*id) {
                    return Err(Error::invalid(format!("route {id} appears in two blocks")));
                }
            }
        }
        Ok(IndependenceSystem::Partition {
            blocks: blocks
                .into_iter()
                .map(|(routes, capacity)| PartitionBlock { routes, capacity })
                .collect(),
        })
    }

    /// Checks block disjointness (done at construction) plus coverage of
    /// the ground set, which needs the ground set at hand.
    pub fn validate_against(&self, ground: &GroundSet) -> Result<()> {
        if let IndependenceSystem::Partition { blocks } = self {
            for id in ground.route_ids() {
                if !blocks.iter().any(|b| b.routes.contains(&id)) {
                    return Err(Error::invalid(format!("route {id} not covered by any block")));
                }
            }
        }
        Ok(())
    }

    pub fn is_independent(&self, selection: &Selection) -> bool {
        match self {
            IndependenceSystem::Cardinality { limit } => selection.len() <= *limit,
            IndependenceSystem::Partition { blocks } => blocks.iter().all(|block| {
                selection.ids().iter().filter(|id| block.routes.contains(id)).count()
                    <= block.capacity
            }),
        }
    }

    fn can_add(&self, selection: &Selection, candidate: RouteId) -> bool {
        match self {
            IndependenceSystem::Cardinality { limit } => selection.len() < *limit,
            IndependenceSystem::Partition { blocks } => blocks.iter().all(|block| {
                if !block.routes.contains(&candidate) {
                    return true;
                }
                selection.ids().iter().filter(|id| block.routes.contains(id)).count()
                    < block.capacity
            }),
        }
    }
}

/// Entropy temperature for the smoothed step distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizerConfig {
    pub epsilon: f64,
}

impl Default for RegularizerConfig {
    fn default() -> Self {
        RegularizerConfig { epsilon: 0.2 }
    }
}

impl RegularizerConfig {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(RegularizerConfig { epsilon })
    }

    /// Regularizer range bound `δ(n_k) = ε·ln n_k` for a step with `n_k`
    /// candidates.
    pub fn delta(&self, n_candidates: usize) -> f64 {
        self.epsilon * (n_candidates as f64).ln()
    }
}

/// One smoothed-greedy step: the candidate pool, its marginal gains, the
/// step distribution, and the sampled choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyStep {
    pub candidates: Vec<RouteId>,
    pub gains: Vec<f64>,
    pub probs: Vec<f64>,
    pub chosen_index: usize,
    pub chosen_prob: f64,
}

impl GreedyStep {
    pub fn chosen(&self) -> RouteId {
        self.candidates[self.chosen_index]
    }

    pub fn n_candidates(&self) -> usize {
        self.candidates.len()
    }
}

/// A complete smoothed-greedy run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyTrace {
    pub steps: Vec<GreedyStep>,
    pub selection: Selection,
    pub log_prob: f64,
}

/// All routes that can still be added without violating independence, in
/// ascending route-id order.
pub fn addable_elements(
    selection: &Selection,
    system: &IndependenceSystem,
    ground: &GroundSet,
) -> Result<Vec<RouteId>> {
    if !system.is_independent(selection) {
        return Err(Error::invalid("selection is already dependent"));
    }
    Ok(ground
        .route_ids()
        .filter(|id| !selection.contains(*id) && system.can_add(selection, *id))
        .collect())
}

/// The entropy-regularized argmax over the probability simplex, which has
/// the closed form `p_i = exp(m_i/ε) / Σ_j exp(m_j/ε)`.
pub fn regularized_argmax(gains: &[f64], config: &RegularizerConfig) -> Result<Vec<f64>> {
    if gains.is_empty() {
        return Err(Error::invalid("gain vector must be non-empty"));
    }
    if gains.iter().any(|g| !g.is_finite()) {
        return Err(Error::invalid("gains must be finite"));
    }
    let max = gains.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = gains.iter().map(|&g| ((g - max) / config.epsilon).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

/// Samples an index from a probability vector by inverse CDF.
pub fn sample_step(probs: &[f64], rng: &mut impl Rng) -> Result<usize> {
    if probs.is_empty() {
        return Err(Error::invalid("probability vector must be non-empty"));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || probs.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
        return Err(Error::invalid(format!("degenerate probability vector (sum {sum})")));
    }
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return Ok(i);
        }
    }
    Ok(probs.len() - 1)
}

/// Smoothed greedy: iterates until no addable elements remain, sampling
/// each step from the softmax of marginal gains at temperature ε.
pub fn run_smoothed_greedy(
    objective: &CoverageObjective,
    w: &WeightMatrix,
    system: &IndependenceSystem,
    config: &RegularizerConfig,
    rng: &mut impl Rng,
) -> Result<GreedyTrace> {
    system.validate_against(objective.ground())?;
    let mut selection = Selection::empty();
    let mut psi = vec![0usize; objective.n_partitions()];
    let mut steps = Vec::new();
    let mut log_prob = 0.0;

    loop {
        let candidates = addable_elements(&selection, system, objective.ground())?;
        if candidates.is_empty() {
            break;
        }
        let gains: Vec<f64> = candidates
            .iter()
            .map(|id| {
                objective
                    .ground()
                    .index_of(*id)
                    .map(|idx| objective.gain_from_psi(&psi, idx, w))
            })
            .collect::<Result<_>>()?;
        let probs = regularized_argmax(&gains, config)?;
        let chosen_index = sample_step(&probs, rng)?;
        let chosen = candidates[chosen_index];
        let chosen_prob = probs[chosen_index];
        log_prob += chosen_prob.ln();
        steps.push(GreedyStep { candidates, gains, probs, chosen_index, chosen_prob });
        objective.add_route_to_psi(&mut psi, objective.ground().index_of(chosen)?);
        selection.push(chosen)?;
    }

    Ok(GreedyTrace { steps, selection, log_prob })
}

/// Classic greedy: picks the candidate with maximal marginal gain at each
/// step, ties broken by lowest route id, until no addable elements remain.
pub fn run_deterministic_greedy(
    objective: &CoverageObjective,
    w: &WeightMatrix,
    system: &IndependenceSystem,
) -> Result<Selection> {
    system.validate_against(objective.ground())?;
    let mut selection = Selection::empty();
    let mut psi = vec![0usize; objective.n_partitions()];

    loop {
        let candidates = addable_elements(&selection, system, objective.ground())?;
        if candidates.is_empty() {
            break;
        }
        let mut best: Option<(RouteId, f64)> = None;
        for id in candidates {
            let gain = objective.gain_from_psi(&psi, objective.ground().index_of(id)?, w);
            // candidates come in ascending id order, so strict > keeps the
            // lowest id among ties
            if best.map_or(true, |(_, b)| gain > b) {
                best = Some((id, gain));
            }
        }
        let (chosen, _) = best.expect("non-empty candidate list");
        objective.add_route_to_psi(&mut psi, objective.ground().index_of(chosen)?);
        selection.push(chosen)?;
    }

    Ok(selection)
}

/// Log-probability of a trace under its own recorded step distributions.
pub fn trace_log_probability(trace: &GreedyTrace) -> f64 {
    trace.steps.iter().map(|s| s.chosen_prob.ln()).sum()
}
