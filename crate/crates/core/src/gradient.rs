//! Decision loss and its gradient in the predicted weights.
//!
//! The loss for one sample is the gap between the decision quality under
//! the true weights and the expected quality of the smoothed-greedy output
//! sampled under the predicted weights, both scored at the true weights.
//! Because the expectation runs over a weight-dependent distribution, the
//! gradient is estimated with the score-function (log-derivative) trick:
//! `-1/N Σ_j f(S_j, w_true) ∇_ŵ ln p(S_j, ŵ)`, which is unbiased.
//!
//! An exact enumeration oracle over the smoothed-greedy outcome tree backs
//! the estimator tests on small instances.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::greedy::{
    addable_elements, regularized_argmax, run_deterministic_greedy, run_smoothed_greedy,
    GreedyStep, GreedyTrace, IndependenceSystem, RegularizerConfig,
};
use crate::seeded_rng;
use crate::submodular::{CoverageObjective, Selection, WeightMatrix};

/// An objective plus the feasibility structure it is maximized over.
#[derive(Debug, Clone, Copy)]
pub struct DecisionProblem<'a> {
    pub objective: &'a CoverageObjective,
    pub system: &'a IndependenceSystem,
}

impl<'a> DecisionProblem<'a> {
    pub fn new(objective: &'a CoverageObjective, system: &'a IndependenceSystem) -> Self {
        DecisionProblem { objective, system }
    }

    fn weight_shape(&self) -> (usize, usize) {
        (self.objective.n_partitions(), self.objective.n_gammas())
    }

    fn check_weights(&self, w: &WeightMatrix) -> Result<()> {
        let (n, k) = self.weight_shape();
        if w.n_partitions() != n || w.n_gammas() != k {
            return Err(Error::dims(format!(
                "weight matrix is {}x{} but problem needs {n}x{k}",
                w.n_partitions(),
                w.n_gammas()
            )));
        }
        Ok(())
    }
}

/// Monte Carlo estimate of the decision loss.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionLossEstimate {
    /// `reference_value - mc_mean`.
    pub loss: f64,
    /// Decision quality of deterministic greedy under the true weights.
    pub reference_value: f64,
    /// Mean of `f(S_j, w_true)` over smoothed-greedy samples under `ŵ`.
    pub mc_mean: f64,
    pub n_trials: usize,
    /// Sample standard deviation of the per-trial scores.
    pub mc_std: f64,
}

/// Monte Carlo estimate of `∂loss/∂ŵ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub grad: Array2<f64>,
    /// Componentwise sample standard deviation of the per-trial terms.
    pub grad_std: Array2<f64>,
    pub n_trials: usize,
}

/// Decision loss for one (true, predicted) weight pair.
///
/// Samples are drawn under `w_hat` and scored under `w_true`.
pub fn decision_loss(
    w_true: &WeightMatrix,
    w_hat: &WeightMatrix,
    problem: &DecisionProblem,
    config: &RegularizerConfig,
    n_trials: usize,
    seed: u64,
) -> Result<DecisionLossEstimate> {
    let (loss, _) = loss_and_gradient(w_true, w_hat, problem, config, n_trials, seed, None)?;
    Ok(loss)
}

/// Unbiased score-function estimate of `∂loss/∂ŵ`.
pub fn score_function_gradient(
    w_true: &WeightMatrix,
    w_hat: &WeightMatrix,
    problem: &DecisionProblem,
    config: &RegularizerConfig,
    n_trials: usize,
    seed: u64,
) -> Result<GradientEstimate> {
    let (_, grad) = loss_and_gradient(w_true, w_hat, problem, config, n_trials, seed, None)?;
    Ok(grad)
}

/// Loss and gradient from one shared set of smoothed-greedy trials.
///
/// `baseline` subtracts a constant from the score inside the estimator; it
/// leaves the expectation unchanged and is off (`None`) by default.
pub fn loss_and_gradient(
    w_true: &WeightMatrix,
    w_hat: &WeightMatrix,
    problem: &DecisionProblem,
    config: &RegularizerConfig,
    n_trials: usize,
    seed: u64,
    baseline: Option<f64>,
) -> Result<(DecisionLossEstimate, GradientEstimate)> {
    problem.check_weights(w_true)?;
    problem.check_weights(w_hat)?;
    if n_trials == 0 {
        return Err(Error::invalid("n_trials must be >= 1"));
    }

    let reference_selection = run_deterministic_greedy(problem.objective, w_true, problem.system)?;
    let reference_value = problem.objective.objective_value(&reference_selection, w_true)?;

    let (n, k) = problem.weight_shape();
    let mut sum_f = 0.0;
    let mut sum_f2 = 0.0;
    let mut grad_sum = Array2::<f64>::zeros((n, k));
    let mut grad_sum_sq = Array2::<f64>::zeros((n, k));
    let b = baseline.unwrap_or(0.0);

    for trial in 0..n_trials {
        let mut rng = seeded_rng(seed, trial as u64);
        let trace = run_smoothed_greedy(problem.objective, w_hat, problem.system, config, &mut rng)?;
        let score = problem.objective.objective_value(&trace.selection, w_true)?;
        sum_f += score;
        sum_f2 += score * score;
        let logp_grad = trace_log_prob_weight_gradient(&trace, problem, config)?;
        let term = logp_grad.mapv(|g| -(score - b) * g);
        grad_sum += &term;
        grad_sum_sq += &term.mapv(|t| t * t);
    }

    let n_f = n_trials as f64;
    let mc_mean = sum_f / n_f;
    let mc_var = ((sum_f2 / n_f) - mc_mean * mc_mean).max(0.0);
    let mc_std = if n_trials > 1 { (mc_var * n_f / (n_f - 1.0)).sqrt() } else { 0.0 };

    let grad = grad_sum.mapv(|g| g / n_f);
    let grad_std = if n_trials > 1 {
        let mean_sq = grad_sum_sq.mapv(|s| s / n_f);
        let var = (&mean_sq - &grad.mapv(|m| m * m)).mapv(|v| (v.max(0.0) * n_f / (n_f - 1.0)).sqrt());
        var
    } else {
        Array2::zeros((n, k))
    };

    Ok((
        DecisionLossEstimate {
            loss: reference_value - mc_mean,
            reference_value,
            mc_mean,
            n_trials,
            mc_std,
        },
        GradientEstimate { grad, grad_std, n_trials },
    ))
}

/// Jacobian of the entropy-regularized argmax in the gains:
/// `(diag(p) - p pᵀ)/ε`. Symmetric, positive semidefinite, rows sum to 0.
pub fn softmax_jacobian(probs: &[f64], epsilon: f64) -> Result<Array2<f64>> {
    if probs.is_empty() {
        return Err(Error::invalid("probability vector must be non-empty"));
    }
    if !(epsilon > 0.0) {
        return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || probs.iter().any(|&p| p <= 0.0) {
        return Err(Error::invalid("probabilities must lie in the open simplex"));
    }
    let n = probs.len();
    let mut jac = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let kron = if i == j { probs[i] } else { 0.0 };
            jac[(i, j)] = (kron - probs[i] * probs[j]) / epsilon;
        }
    }
    Ok(jac)
}

/// Gradient of `ln p_k(s_k, ŵ)` for one recorded step, chained through the
/// marginal-gain weight-gradients of every candidate at that step.
///
/// Equals `(1/p_s) Σ_c J[s, c] ∇_ŵ m_k(c)` with `J` the softmax Jacobian,
/// which contracts to `Σ_c (δ_sc - p_c)/ε · ∇_ŵ m_k(c)`. The contracted
/// form stays finite when non-chosen probabilities underflow at very low
/// temperatures.
pub fn step_log_prob_weight_gradient(
    step: &GreedyStep,
    prefix_selection: &Selection,
    problem: &DecisionProblem,
    config: &RegularizerConfig,
) -> Result<Array2<f64>> {
    let expected = addable_elements(prefix_selection, problem.system, problem.objective.ground())?;
    if expected != step.candidates {
        return Err(Error::invalid(
            "step is inconsistent with its prefix selection (candidate set differs)",
        ));
    }
    if step.chosen_index >= step.candidates.len() {
        return Err(Error::invalid("chosen index out of range"));
    }
    let sum: f64 = step.probs.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || step.probs.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
        return Err(Error::invalid("step probabilities are degenerate"));
    }
    if step.probs[step.chosen_index] <= 0.0 {
        return Err(Error::invalid("chosen element has zero recorded probability"));
    }

    let (n, k) = (problem.objective.n_partitions(), problem.objective.n_gammas());
    let mut grad = Array2::zeros((n, k));
    for (c, candidate) in step.candidates.iter().enumerate() {
        let kron = if c == step.chosen_index { 1.0 } else { 0.0 };
        let coeff = (kron - step.probs[c]) / config.epsilon;
        if coeff == 0.0 {
            continue;
        }
        let gain_grad =
            problem.objective.marginal_gain_weight_gradient(prefix_selection, *candidate)?;
        grad.zip_mut_with(&gain_grad, |g, &m| *g += coeff * m);
    }
    Ok(grad)
}

/// Gradient of the whole trace's log-probability: the sum of the per-step
/// gradients along the recorded element sequence.
pub fn trace_log_prob_weight_gradient(
    trace: &GreedyTrace,
    problem: &DecisionProblem,
    config: &RegularizerConfig,
) -> Result<Array2<f64>> {
    let (n, k) = (problem.objective.n_partitions(), problem.objective.n_gammas());
    let mut grad = Array2::zeros((n, k));
    let mut prefix = Selection::empty();
    for step in &trace.steps {
        grad += &step_log_prob_weight_gradient(step, &prefix, problem, config)?;
        prefix.push(step.chosen())?;
    }
    Ok(grad)
}

/// Exact expectation `E[f(S, w_true)]` under the smoothed-greedy output
/// distribution at `ŵ`, by enumerating the outcome tree.
pub fn exact_expected_value(
    w_true: &WeightMatrix,
    w_hat: &WeightMatrix,
    problem: &DecisionProblem,
    config: &RegularizerConfig,
) -> Result<f64> {
    let mut acc = EnumAccumulator::new(problem);
    enumerate_outcomes(w_true, w_hat, problem, config, &mut acc)?;
    Ok(acc.expected_value)
}

/// Exact gradient `∇_ŵ E[f(S, w_true)]` by the same enumeration,
/// differentiated analytically through every step distribution.
pub fn exact_expected_value_gradient(
    w_true: &WeightMatrix,
    w_hat: &WeightMatrix,
    problem: &DecisionProblem,
    config: &RegularizerConfig,
) -> Result<Array2<f64>> {
    let mut acc = EnumAccumulator::new(problem);
    enumerate_outcomes(w_true, w_hat, problem, config, &mut acc)?;
    Ok(acc.gradient)
}

/// Total probability mass of the outcome tree (1 up to roundoff); exposed
/// for normalization checks.
pub fn outcome_tree_total_probability(
    w_hat: &WeightMatrix,
    problem: &DecisionProblem,
    config: &RegularizerConfig,
) -> Result<f64> {
    let mut acc = EnumAccumulator::new(problem);
    enumerate_outcomes(w_hat, w_hat, problem, config, &mut acc)?;
    Ok(acc.total_probability)
}

const MAX_OUTCOMES: usize = 10_000;

struct EnumAccumulator {
    expected_value: f64,
    gradient: Array2<f64>,
    total_probability: f64,
    leaves: usize,
}

impl EnumAccumulator {
    fn new(problem: &DecisionProblem) -> Self {
        EnumAccumulator {
            expected_value: 0.0,
            gradient: Array2::zeros((problem.objective.n_partitions(), problem.objective.n_gammas())),
            total_probability: 0.0,
            leaves: 0,
        }
    }
}

fn enumerate_outcomes(
    w_true: &WeightMatrix,
    w_hat: &WeightMatrix,
    problem: &DecisionProblem,
    config: &RegularizerConfig,
    acc: &mut EnumAccumulator,
) -> Result<()> {
    problem.check_weights(w_true)?;
    problem.check_weights(w_hat)?;
    problem.system.validate_against(problem.objective.ground())?;
    let shape = (problem.objective.n_partitions(), problem.objective.n_gammas());
    let prefix = Selection::empty();
    let psi = vec![0usize; problem.objective.n_partitions()];
    recurse(w_true, w_hat, problem, config, prefix, psi, 1.0, Array2::zeros(shape), acc)
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    w_true: &WeightMatrix,
    w_hat: &WeightMatrix,
    problem: &DecisionProblem,
    config: &RegularizerConfig,
    prefix: Selection,
    psi: Vec<usize>,
    prob: f64,
    logp_grad: Array2<f64>,
    acc: &mut EnumAccumulator,
) -> Result<()> {
    let candidates = addable_elements(&prefix, problem.system, problem.objective.ground())?;
    if candidates.is_empty() {
        acc.leaves += 1;
        if acc.leaves > MAX_OUTCOMES {
            return Err(Error::InstanceTooLarge(format!(
                "outcome tree exceeds {MAX_OUTCOMES} leaves"
            )));
        }
        let value = problem.objective.value_from_psi(&psi, w_true);
        acc.expected_value += prob * value;
        acc.total_probability += prob;
        acc.gradient.zip_mut_with(&logp_grad, |g, &lg| *g += prob * value * lg);
        return Ok(());
    }

    let ground = problem.objective.ground();
    let indices: Vec<usize> =
        candidates.iter().map(|id| ground.index_of(*id)).collect::<Result<_>>()?;
    let gains: Vec<f64> = indices
        .iter()
        .map(|&idx| problem.objective.gain_from_psi(&psi, idx, w_hat))
        .collect();
    let probs = regularized_argmax(&gains, config)?;
    let gain_grads: Vec<Array2<f64>> = indices
        .iter()
        .map(|&idx| problem.objective.gain_gradient_from_psi(&psi, idx))
        .collect();

    for (choice, (&candidate, &idx)) in candidates.iter().zip(&indices).enumerate() {
        // ∇ ln p(choice) = Σ_c (δ - p_c)/ε · ∇m_c
        let mut child_grad = logp_grad.clone();
        for (c, gg) in gain_grads.iter().enumerate() {
            let coeff = ((if c == choice { 1.0 } else { 0.0 }) - probs[c]) / config.epsilon;
            child_grad.zip_mut_with(gg, |g, &m| *g += coeff * m);
        }
        let mut child_prefix = prefix.clone();
        child_prefix.push(candidate)?;
        let mut child_psi = psi.clone();
        problem.objective.add_route_to_psi(&mut child_psi, idx);
        recurse(
            w_true,
            w_hat,
            problem,
            config,
            child_prefix,
            child_psi,
            prob * probs[choice],
            child_grad,
            acc,
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::submodular::{BasisFamily, GroundSet, NodeId, NodePartition, Route, RouteId};
    use std::collections::BTreeSet;

    fn node_set(ids: &[usize]) -> BTreeSet<NodeId> {
        ids.iter().map(|&i| NodeId(i)).collect()
    }

    fn route(id: usize, nodes: &[usize]) -> Route {
        Route { id: RouteId(id), nodes: nodes.iter().map(|&n| NodeId(n)).collect() }
    }

    /// Three overlapping routes over two partition sets and two decays.
    fn test_objective() -> CoverageObjective {
        let ground = GroundSet::new(vec![
            route(0, &[1, 2, 4]),
            route(1, &[2, 3]),
            route(2, &[4, 5, 1]),
        ])
        .unwrap();
        let partition =
            NodePartition::new(vec![node_set(&[1, 2, 3]), node_set(&[4, 5])]).unwrap();
        let basis = BasisFamily::new(vec![0.5, 1.0]).unwrap();
        CoverageObjective::new(ground, partition, basis)
    }

    fn w(vals: [f64; 4]) -> WeightMatrix {
        WeightMatrix::from_vec(2, 2, vals.to_vec()).unwrap()
    }

    #[test]
    fn forced_decision_has_zero_loss_and_gradient() {
        let ground = GroundSet::new(vec![route(0, &[1])]).unwrap();
        let partition = NodePartition::new(vec![node_set(&[1])]).unwrap();
        let basis = BasisFamily::new(vec![1.0]).unwrap();
        let obj = CoverageObjective::new(ground, partition, basis);
        let sys = IndependenceSystem::cardinality(1).unwrap();
        let problem = DecisionProblem::new(&obj, &sys);
        let w_true = WeightMatrix::from_vec(1, 1, vec![2.0]).unwrap();
        let w_hat = WeightMatrix::from_vec(1, 1, vec![0.1]).unwrap();
        let cfg = RegularizerConfig::default();
        let (loss, grad) =
            loss_and_gradient(&w_true, &w_hat, &problem, &cfg, 32, 9, None).unwrap();
        assert_eq!(loss.loss, 0.0);
        assert!(grad.grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn loss_collapses_when_prediction_is_true_and_temperature_low() {
        let obj = test_objective();
        let sys = IndependenceSystem::cardinality(2).unwrap();
        let problem = DecisionProblem::new(&obj, &sys);
        let weights = w([1.0, 0.2, 0.4, 1.5]);
        let cfg = RegularizerConfig::new(1e-9).unwrap();
        let est = decision_loss(&weights, &weights, &problem, &cfg, 64, 3).unwrap();
        assert!(est.loss.abs() < 1e-9, "loss {}", est.loss);
    }

    #[test]
    fn reversed_gains_give_positive_gap() {
        // two disjoint single-node routes, one slot: losing the order costs
        // exactly the value difference
        let ground = GroundSet::new(vec![route(0, &[1]), route(1, &[2])]).unwrap();
        let partition = NodePartition::new(vec![node_set(&[1]), node_set(&[2])]).unwrap();
        let basis = BasisFamily::new(vec![1.0]).unwrap();
        let obj = CoverageObjective::new(ground, partition, basis);
        let sys = IndependenceSystem::cardinality(1).unwrap();
        let problem = DecisionProblem::new(&obj, &sys);
        let w_true = WeightMatrix::from_vec(2, 1, vec![3.0, 1.0]).unwrap();
        let w_hat = WeightMatrix::from_vec(2, 1, vec![1.0, 3.0]).unwrap();
        let cfg = RegularizerConfig::new(1e-9).unwrap();
        let est = decision_loss(&w_true, &w_hat, &problem, &cfg, 16, 5).unwrap();
        assert!((est.loss - 2.0).abs() < 1e-9, "loss {}", est.loss);
    }

    #[test]
    fn jacobian_closed_form_and_structure() {
        let jac = softmax_jacobian(&[1.0], 1.0).unwrap();
        assert_eq!(jac[(0, 0)], 0.0);

        let jac = softmax_jacobian(&[0.5, 0.5], 1.0).unwrap();
        for (idx, want) in [((0, 0), 0.25), ((0, 1), -0.25), ((1, 0), -0.25), ((1, 1), 0.25)] {
            assert!((jac[idx] - want).abs() < 1e-15);
        }

        let probs = [0.1, 0.25, 0.4, 0.25];
        let jac = softmax_jacobian(&probs, 0.3).unwrap();
        for i in 0..4 {
            let row_sum: f64 = (0..4).map(|j| jac[(i, j)]).sum();
            assert!(row_sum.abs() < 1e-12);
            assert!(jac[(i, i)] >= 0.0);
            for j in 0..4 {
                assert!((jac[(i, j)] - jac[(j, i)]).abs() < 1e-15);
            }
        }
        // PSD: x^T J x >= 0 on a few probes
        for probe in 0..8 {
            let x: Vec<f64> = (0..4).map(|i| ((probe * 7 + i * 3) % 11) as f64 - 5.0).collect();
            let mut quad = 0.0;
            for i in 0..4 {
                for j in 0..4 {
                    quad += x[i] * jac[(i, j)] * x[j];
                }
            }
            assert!(quad >= -1e-12, "probe {probe} quad {quad}");
        }
    }

    #[test]
    fn jacobian_rejects_bad_inputs() {
        assert!(softmax_jacobian(&[0.5, 0.6], 1.0).is_err());
        assert!(softmax_jacobian(&[1.0, 0.0], 1.0).is_err());
        assert!(softmax_jacobian(&[0.5, 0.5], 0.0).is_err());
    }

    #[test]
    fn jacobian_matches_finite_differences_of_softmax() {
        let cfg = RegularizerConfig::new(0.4).unwrap();
        let gains = [0.3, 1.1, 0.7];
        let probs = regularized_argmax(&gains, &cfg).unwrap();
        let jac = softmax_jacobian(&probs, cfg.epsilon).unwrap();
        let h = 1e-6;
        for j in 0..3 {
            let mut up = gains;
            up[j] += h;
            let mut dn = gains;
            dn[j] -= h;
            let p_up = regularized_argmax(&up, &cfg).unwrap();
            let p_dn = regularized_argmax(&dn, &cfg).unwrap();
            for i in 0..3 {
                let fd = (p_up[i] - p_dn[i]) / (2.0 * h);
                assert!((fd - jac[(i, j)]).abs() < 1e-7, "({i},{j}) fd={fd} jac={}", jac[(i, j)]);
            }
        }
    }

    #[test]
    fn single_candidate_step_has_zero_gradient() {
        let obj = test_objective();
        let sys = IndependenceSystem::cardinality(3).unwrap();
        let problem = DecisionProblem::new(&obj, &sys);
        let cfg = RegularizerConfig::default();
        let weights = w([1.0, 0.5, 0.25, 2.0]);
        let trace =
            run_smoothed_greedy(&obj, &weights, &sys, &cfg, &mut crate::seeded_rng(3, 0)).unwrap();
        // last step has a single candidate
        let last = trace.steps.last().unwrap();
        assert_eq!(last.candidates.len(), 1);
        let mut prefix = Selection::empty();
        for step in &trace.steps[..trace.steps.len() - 1] {
            prefix.push(step.chosen()).unwrap();
        }
        let grad = step_log_prob_weight_gradient(last, &prefix, &problem, &cfg).unwrap();
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn step_gradient_matches_finite_differences() {
        let obj = test_objective();
        let sys = IndependenceSystem::cardinality(2).unwrap();
        let problem = DecisionProblem::new(&obj, &sys);
        let cfg = RegularizerConfig::new(0.5).unwrap();
        let base = w([1.0, 0.3, 0.8, 1.2]);
        let trace =
            run_smoothed_greedy(&obj, &base, &sys, &cfg, &mut crate::seeded_rng(21, 0)).unwrap();

        let mut prefix = Selection::empty();
        for step in &trace.steps {
            let grad = step_log_prob_weight_gradient(step, &prefix, &problem, &cfg).unwrap();
            // recompute ln p_k(s_k) from scratch under perturbed weights
            let log_prob_under = |wm: &WeightMatrix| -> f64 {
                let gains: Vec<f64> = step
                    .candidates
                    .iter()
                    .map(|id| obj.marginal_gain(&prefix, *id, wm).unwrap())
                    .collect();
                let probs = regularized_argmax(&gains, &cfg).unwrap();
                probs[step.chosen_index].ln()
            };
            let h = 1e-5;
            for i in 0..2 {
                for j in 0..2 {
                    let mut up = base.as_array().clone();
                    up[(i, j)] += h;
                    let mut dn = base.as_array().clone();
                    dn[(i, j)] -= h;
                    let fd = (log_prob_under(&WeightMatrix::new(up).unwrap())
                        - log_prob_under(&WeightMatrix::new(dn).unwrap()))
                        / (2.0 * h);
                    assert!(
                        (fd - grad[(i, j)]).abs() <= 1e-6,
                        "({i},{j}) fd={fd} grad={}",
                        grad[(i, j)]
                    );
                }
            }
            prefix.push(step.chosen()).unwrap();
        }
    }

    #[test]
    fn trace_gradient_matches_path_probability_finite_differences() {
        let obj = test_objective();
        let sys = IndependenceSystem::cardinality(2).unwrap();
        let problem = DecisionProblem::new(&obj, &sys);
        let cfg = RegularizerConfig::new(0.7).unwrap();
        let base = w([0.9, 0.2, 1.1, 0.6]);
        let trace =
            run_smoothed_greedy(&obj, &base, &sys, &cfg, &mut crate::seeded_rng(31, 4)).unwrap();
        let grad = trace_log_prob_weight_gradient(&trace, &problem, &cfg).unwrap();

        // log-probability of the SAME element sequence under perturbed weights
        let path_log_prob = |wm: &WeightMatrix| -> f64 {
            let mut prefix = Selection::empty();
            let mut total = 0.0;
            for step in &trace.steps {
                let candidates =
                    addable_elements(&prefix, &sys, obj.ground()).unwrap();
                let gains: Vec<f64> = candidates
                    .iter()
                    .map(|id| obj.marginal_gain(&prefix, *id, wm).unwrap())
                    .collect();
                let probs = regularized_argmax(&gains, &cfg).unwrap();
                let pos = candidates.iter().position(|c| *c == step.chosen()).unwrap();
                total += probs[pos].ln();
                prefix.push(step.chosen()).unwrap();
            }
            total
        };
        let h = 1e-5;
        for i in 0..2 {
            for j in 0..2 {
                let mut up = base.as_array().clone();
                up[(i, j)] += h;
                let mut dn = base.as_array().clone();
                dn[(i, j)] -= h;
                let fd = (path_log_prob(&WeightMatrix::new(up).unwrap())
                    - path_log_prob(&WeightMatrix::new(dn).unwrap()))
                    / (2.0 * h);
                assert!(
                    (fd - grad[(i, j)]).abs() <= 1e-6,
                    "({i},{j}) fd={fd} grad={}",
                    grad[(i, j)]
                );
            }
        }
    }

    #[test]
    fn outcome_tree_probabilities_sum_to_one() {
        let obj = test_objective();
        for limit in [1, 2, 3] {
            let sys = IndependenceSystem::cardinality(limit).unwrap();
            let problem = DecisionProblem::new(&obj, &sys);
            let total = outcome_tree_total_probability(
                &w([0.7, 0.4, 1.3, 0.9]),
                &problem,
                &RegularizerConfig::default(),
            )
            .unwrap();
            assert!((total - 1.0).abs() < 1e-12, "limit {limit} total {total}");
        }
    }

    #[test]
    fn exact_gradient_matches_finite_differences_of_expectation() {
        let obj = test_objective();
        let sys = IndependenceSystem::cardinality(2).unwrap();
        let problem = DecisionProblem::new(&obj, &sys);
        let cfg = RegularizerConfig::new(0.8).unwrap();
        let w_true = w([1.2, 0.4, 0.6, 1.0]);
        let w_hat = w([0.5, 0.9, 1.4, 0.2]);
        let exact = exact_expected_value_gradient(&w_true, &w_hat, &problem, &cfg).unwrap();
        let h = 1e-5;
        for i in 0..2 {
            for j in 0..2 {
                let mut up = w_hat.as_array().clone();
                up[(i, j)] += h;
                let mut dn = w_hat.as_array().clone();
                dn[(i, j)] -= h;
                let e_up =
                    exact_expected_value(&w_true, &WeightMatrix::new(up).unwrap(), &problem, &cfg)
                        .unwrap();
                let e_dn =
                    exact_expected_value(&w_true, &WeightMatrix::new(dn).unwrap(), &problem, &cfg)
                        .unwrap();
                let fd = (e_up - e_dn) / (2.0 * h);
                assert!(
                    (fd - exact[(i, j)]).abs() <= 1e-6,
                    "({i},{j}) fd={fd} exact={}",
                    exact[(i, j)]
                );
            }
        }
    }

    #[test]
    fn monte_carlo_gradient_is_unbiased_against_oracle() {
        let obj = test_objective();
        let sys = IndependenceSystem::cardinality(1).unwrap();
        let problem = DecisionProblem::new(&obj, &sys);
        let cfg = RegularizerConfig::new(1.0).unwrap();
        let w_true = w([1.0, 0.5, 0.3, 1.4]);
        let w_hat = w([0.6, 0.8, 1.1, 0.4]);
        let n_trials = 100_000;
        let est =
            score_function_gradient(&w_true, &w_hat, &problem, &cfg, n_trials, 77).unwrap();
        let exact = exact_expected_value_gradient(&w_true, &w_hat, &problem, &cfg).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                // the estimator targets -∇E[f]
                let diff = (est.grad[(i, j)] + exact[(i, j)]).abs();
                let se = est.grad_std[(i, j)] / (n_trials as f64).sqrt();
                assert!(
                    diff <= 4.0 * se.max(1e-12),
                    "({i},{j}) diff={diff} 4se={}",
                    4.0 * se
                );
            }
        }
    }

    #[test]
    fn loss_scales_with_weights() {
        let obj = test_objective();
        let sys = IndependenceSystem::cardinality(2).unwrap();
        let problem = DecisionProblem::new(&obj, &sys);
        let w_true = w([1.0, 0.5, 0.3, 1.4]);
        let w_hat = w([0.6, 0.8, 1.1, 0.4]);
        let c = 3.5;
        // deterministic pieces scale exactly and greedy choices are unchanged
        let det = run_deterministic_greedy(&obj, &w_true, &sys).unwrap();
        let det_scaled =
            run_deterministic_greedy(&obj, &w_true.scaled(c).unwrap(), &sys).unwrap();
        assert_eq!(det, det_scaled);
        // loss scales when the temperature is scaled along (softmax of c·m
        // at c·ε equals softmax of m at ε, so the trace distribution and
        // every sampled path coincide)
        let cfg = RegularizerConfig::new(0.5).unwrap();
        let cfg_scaled = RegularizerConfig::new(0.5 * c).unwrap();
        let base = decision_loss(&w_true, &w_hat, &problem, &cfg, 64, 11).unwrap();
        let scaled = decision_loss(
            &w_true.scaled(c).unwrap(),
            &w_hat.scaled(c).unwrap(),
            &problem,
            &cfg_scaled,
            64,
            11,
        )
        .unwrap();
        assert!((scaled.loss - c * base.loss).abs() < 1e-9 * c.max(1.0));
    }

    #[test]
    fn loss_lower_bound_respects_delta_slack() {
        let obj = test_objective();
        let sys = IndependenceSystem::cardinality(2).unwrap();
        let problem = DecisionProblem::new(&obj, &sys);
        let cfg = RegularizerConfig::new(0.3).unwrap();
        let weights = w([1.0, 0.5, 0.3, 1.4]);
        let n_trials = 20_000;
        let est = decision_loss(&weights, &weights, &problem, &cfg, n_trials, 13).unwrap();
        // Σ_k ε ln n_k for cardinality 2 over 3 routes: ln 3 + ln 2
        let slack = cfg.delta(3) + cfg.delta(2);
        let margin = 3.0 * est.mc_std / (n_trials as f64).sqrt();
        assert!(est.loss >= -slack - margin, "loss {} slack {slack}", est.loss);
    }

    #[test]
    fn estimator_rejects_zero_trials() {
        let obj = test_objective();
        let sys = IndependenceSystem::cardinality(1).unwrap();
        let problem = DecisionProblem::new(&obj, &sys);
        let weights = w([1.0, 0.5, 0.3, 1.4]);
        assert!(decision_loss(
            &weights,
            &weights,
            &problem,
            &RegularizerConfig::default(),
            0,
            1
        )
        .is_err());
    }

    #[test]
    fn enumeration_guard_trips_on_large_instances() {
        // 9 routes, cardinality 5: 9*8*7*6*5 = 15120 ordered outcomes > guard
        let routes: Vec<Route> = (0..9).map(|i| route(i, &[i + 1])).collect();
        let ground = GroundSet::new(routes).unwrap();
        let partition = NodePartition::new(vec![node_set(&[1])]).unwrap();
        let basis = BasisFamily::new(vec![1.0]).unwrap();
        let obj = CoverageObjective::new(ground, partition, basis);
        let sys = IndependenceSystem::cardinality(5).unwrap();
        let problem = DecisionProblem::new(&obj, &sys);
        let wm = WeightMatrix::from_vec(1, 1, vec![1.0]).unwrap();
        let err = exact_expected_value(&wm, &wm, &problem, &RegularizerConfig::default());
        assert!(matches!(err, Err(Error::InstanceTooLarge(_))));
    }
}
