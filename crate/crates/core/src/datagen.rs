//! Training-data pipeline: sample contexts, roll out missions, score many
//! route selections against the same outcomes, and fit per-context weight
//! matrices by projected gradient descent on a non-negative regularized
//! least-squares objective.

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictor::ContextVector;
use crate::sim::{evaluate_selection, CircleSpec, ScenarioTemplate, WindField};
use crate::submodular::{basis_value, CoverageObjective, GroundSet, RouteId, Selection, WeightMatrix};
use crate::{derive_seed, seeded_rng};

/// Uniform sampling ranges for context generation. Wind direction is
/// always drawn from `[0, 360)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContextRanges {
    pub center_x: (f64, f64),
    pub center_y: (f64, f64),
    pub radius: (f64, f64),
    pub wind_a: (f64, f64),
    pub wind_b: (f64, f64),
}

impl ContextRanges {
    fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [
            ("center_x", self.center_x),
            ("center_y", self.center_y),
            ("radius", self.radius),
            ("wind_a", self.wind_a),
            ("wind_b", self.wind_b),
        ] {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::invalid(format!("empty or non-finite range for {name}")));
            }
        }
        if !(self.radius.0 > 0.0) {
            return Err(Error::invalid("radius range must be positive"));
        }
        if !(self.wind_a.0 > 0.0) || !(self.wind_b.0 > 0.0) {
            return Err(Error::invalid("wind parameter ranges must be positive"));
        }
        Ok(())
    }
}

/// Structured form of one context: the UAV circles plus the wind field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextParams {
    pub circles: Vec<CircleSpec>,
    pub wind: WindField,
}

/// Uniformly samples `n_samples` contexts for `n_uavs` UAVs.
///
/// Circles within a context are emitted in canonical order (sorted by
/// center, then radius): the UAVs are interchangeable, and fixing the slot
/// order removes a permutation symmetry the predictor would otherwise have
/// to learn from data.
pub fn generate_contexts(
    n_samples: usize,
    n_uavs: usize,
    ranges: &ContextRanges,
    rng: &mut impl Rng,
) -> Result<Vec<ContextParams>> {
    ranges.validate()?;
    if n_uavs == 0 {
        return Err(Error::invalid("n_uavs must be >= 1"));
    }
    let draw = |rng: &mut dyn rand::RngCore, (lo, hi): (f64, f64)| {
        if lo == hi {
            lo
        } else {
            rand::Rng::gen_range(rng, lo..hi)
        }
    };
    (0..n_samples)
        .map(|_| {
            let mut circles: Vec<CircleSpec> = (0..n_uavs)
                .map(|_| CircleSpec {
                    center: (draw(rng, ranges.center_x), draw(rng, ranges.center_y)),
                    radius: draw(rng, ranges.radius),
                })
                .collect();
            circles.sort_by(|a, b| {
                (a.center.0, a.center.1, a.radius)
                    .partial_cmp(&(b.center.0, b.center.1, b.radius))
                    .expect("finite circle parameters")
            });
            let wind = WindField::new(
                draw(rng, ranges.wind_a),
                draw(rng, ranges.wind_b),
                draw(rng, (0.0, 360.0)),
            )?;
            Ok(ContextParams { circles, wind })
        })
        .collect()
}

/// Flattens a structured context to the model input layout.
pub fn encode_context(params: &ContextParams) -> ContextVector {
    let mut z = Vec::with_capacity(3 * params.circles.len() + 3);
    for c in &params.circles {
        z.push(c.center.0);
        z.push(c.center.1);
        z.push(c.radius);
    }
    z.push(params.wind.a);
    z.push(params.wind.b);
    z.push(params.wind.omega_o);
    ContextVector(z)
}

/// Recovers the structured context from a flat vector.
pub fn decode_context(z: &ContextVector, n_uavs: usize) -> Result<ContextParams> {
    z.validate(n_uavs)?;
    let v = z.as_slice();
    let circles = (0..n_uavs)
        .map(|u| CircleSpec { center: (v[3 * u], v[3 * u + 1]), radius: v[3 * u + 2] })
        .collect();
    let wind = WindField::new(v[3 * n_uavs], v[3 * n_uavs + 1], v[3 * n_uavs + 2])?;
    Ok(ContextParams { circles, wind })
}

/// One context's raw data: every planned selection with its observed value
/// (UAV count averaged over `repeats` seeded rollouts).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawContextRecord {
    pub context: ContextVector,
    pub evaluations: Vec<(Selection, f64)>,
    pub repeats: usize,
}

/// Default evaluation plan: all singletons, then random distinct pairs and
/// random `n_g`-subsets up to the given budgets.
pub fn default_selection_plan(
    ground: &GroundSet,
    n_g: usize,
    pair_budget: usize,
    tuple_budget: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Selection>> {
    let ids: Vec<RouteId> = ground.route_ids().collect();
    let mut plan: Vec<Selection> = Vec::new();
    for &id in &ids {
        plan.push(Selection::from_ids([id])?);
    }
    fn push_subset(
        seen: &mut std::collections::BTreeSet<Vec<RouteId>>,
        plan: &mut Vec<Selection>,
        subset: Vec<RouteId>,
    ) -> Result<bool> {
        let mut key = subset.clone();
        key.sort();
        if seen.insert(key) {
            plan.push(Selection::from_ids(subset)?);
            Ok(true)
        } else {
            Ok(false)
        }
    }

    let mut seen = std::collections::BTreeSet::new();
    if ids.len() >= 2 && n_g >= 2 {
        let mut taken = 0;
        for _ in 0..8 * pair_budget {
            if taken >= pair_budget {
                break;
            }
            let i = rng.gen_range(0..ids.len());
            let j = rng.gen_range(0..ids.len());
            if i != j && push_subset(&mut seen, &mut plan, vec![ids[i], ids[j]])? {
                taken += 1;
            }
        }
    }
    if ids.len() >= n_g && n_g >= 3 {
        let mut taken = 0;
        for _ in 0..8 * tuple_budget {
            if taken >= tuple_budget {
                break;
            }
            let mut pool = ids.clone();
            use rand::seq::SliceRandom;
            pool.shuffle(rng);
            if push_subset(&mut seen, &mut plan, pool[..n_g].to_vec())? {
                taken += 1;
            }
        }
    }
    Ok(plan)
}

/// Rolls out `repeats` missions for one context and scores every planned
/// selection against the same outcomes.
pub fn rollout_raw_data(
    params: &ContextParams,
    plan: &[Selection],
    template: &ScenarioTemplate,
    repeats: usize,
    seed: u64,
) -> Result<RawContextRecord> {
    if repeats == 0 {
        return Err(Error::invalid("repeats must be >= 1"));
    }
    if plan.is_empty() {
        return Err(Error::invalid("selection plan must be non-empty"));
    }
    let scenario = template.instantiate(&params.circles, &params.wind)?;
    let outcomes: Vec<_> = (0..repeats)
        .map(|rep| scenario.roll_out(derive_seed(seed, rep as u64)))
        .collect::<Result<_>>()?;
    let evaluations = plan
        .iter()
        .map(|sel| {
            let mut total = 0usize;
            for outcome in &outcomes {
                total += evaluate_selection(sel, outcome, &template.ground)?;
            }
            Ok((sel.clone(), total as f64 / repeats as f64))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RawContextRecord { context: encode_context(params), evaluations, repeats })
}

/// One training pair after weight fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSample {
    pub z: ContextVector,
    pub w: WeightMatrix,
    /// L2 norm of the data-term residual `Φw - y` at the fitted weights.
    pub fit_residual: f64,
}

/// Fit diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitInfo {
    pub converged: bool,
    pub iterations: usize,
    pub design_rank: usize,
    /// Whether the design matrix has full column rank `dim(w)`.
    pub identifiable: bool,
}

const FIT_MAX_ITERS: usize = 100_000;
const FIT_GRAD_TOL: f64 = 1e-8;

/// Fits `w >= 0` minimizing `Σ_s (f(S_s, w) - y_s)^2 + ξ·||w||^2` by
/// projected gradient descent with a backtracking line search, started at
/// zero. The design matrix has one row per evaluation, one column per
/// `(partition, decay)` basis function.
pub fn fit_weights(
    record: &RawContextRecord,
    objective: &CoverageObjective,
    xi: f64,
) -> Result<(DatasetSample, FitInfo)> {
    if !(xi >= 0.0) {
        return Err(Error::invalid(format!("regularization must be >= 0, got {xi}")));
    }
    let n = objective.n_partitions();
    let k = objective.n_gammas();
    let dim = n * k;
    let rows = record.evaluations.len();
    if rows == 0 {
        return Err(Error::invalid("record has no evaluations"));
    }

    let mut design = Array2::<f64>::zeros((rows, dim));
    let mut target = Array1::<f64>::zeros(rows);
    for (r, (sel, value)) in record.evaluations.iter().enumerate() {
        let psi = objective.psi_vector(sel)?;
        for i in 0..n {
            for (j, &gamma) in objective.basis().gammas().iter().enumerate() {
                design[(r, i * k + j)] = basis_value(psi[i], gamma)?;
            }
        }
        target[r] = *value;
    }

    let design_rank = matrix_rank(&design);
    let identifiable = design_rank >= dim;

    let g = |w: &Array1<f64>| -> f64 {
        let resid = design.dot(w) - &target;
        resid.dot(&resid) + xi * w.dot(w)
    };
    let grad = |w: &Array1<f64>| -> Array1<f64> {
        let resid = design.dot(w) - &target;
        design.t().dot(&resid) * 2.0 + &(w * (2.0 * xi))
    };
    let project = |w: Array1<f64>| w.mapv(|v| v.max(0.0));

    // Lipschitz constant 2(σ_max(Φ)² + ξ) estimated by power iteration on
    // ΦᵀΦ; anchors the step and the gradient-mapping stopping rule
    // 10% headroom on the power-iteration estimate; backtracking shrinks
    // the step further whenever it is still too long
    let sigma_sq = 1.1 * top_singular_value_squared(&design);
    let t_ref = 1.0 / (2.0 * (sigma_sq + xi)).max(1e-12);

    let mut w = Array1::<f64>::zeros(dim);
    let mut g_w = g(&w);
    let mut t = t_ref;
    let mut iterations = 0;
    let mut converged = false;
    let mut last_improvement = 0usize;
    while iterations < FIT_MAX_ITERS {
        iterations += 1;
        let gr = grad(&w);
        let mapping = (&w - &project(&w - &(&gr * t_ref))) / t_ref;
        if mapping.dot(&mapping).sqrt() < FIT_GRAD_TOL {
            converged = true;
            break;
        }
        // backtracking: halve the step until the objective stops rising
        let mut accepted = false;
        for _ in 0..60 {
            let candidate = project(&w - &(&gr * t));
            let g_new = g(&candidate);
            if g_new <= g_w {
                if g_w - g_new > 1e-8 * g_w.abs().max(1e-300) {
                    last_improvement = iterations;
                }
                w = candidate;
                g_w = g_new;
                t *= 1.3;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break; // no descent direction left at the smallest step
        }
        // stalled far from the tolerance: stop early, keep the best iterate
        if iterations - last_improvement > 1000 {
            break;
        }
    }

    let resid = design.dot(&w) - &target;
    let fit_residual = resid.dot(&resid).sqrt();
    let sample = DatasetSample {
        z: record.context.clone(),
        w: WeightMatrix::from_vec(n, k, w.to_vec())?,
        fit_residual,
    };
    Ok((sample, FitInfo { converged, iterations, design_rank, identifiable }))
}

/// Largest squared singular value of `m` by power iteration on `mᵀm`.
fn top_singular_value_squared(m: &Array2<f64>) -> f64 {
    let cols = m.ncols();
    let mut v = Array1::from_elem(cols, 1.0 / (cols as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..50 {
        let mv = m.t().dot(&m.dot(&v));
        let norm = mv.dot(&mv).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        lambda = norm;
        v = mv / norm;
    }
    lambda
}

/// Numerical rank by Gaussian elimination with partial pivoting.
fn matrix_rank(m: &Array2<f64>) -> usize {
    let (rows, cols) = m.dim();
    let mut a = m.clone();
    let max_abs = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let tol = 1e-9 * max_abs.max(1.0) * rows.max(cols) as f64;
    let mut rank = 0;
    let mut row = 0;
    for col in 0..cols {
        // pivot search in this column
        let mut pivot = row;
        for r in row..rows {
            if a[(r, col)].abs() > a[(pivot, col)].abs() {
                pivot = r;
            }
        }
        if row >= rows || a[(pivot, col)].abs() <= tol {
            continue;
        }
        if pivot != row {
            for c in 0..cols {
                let tmp = a[(row, c)];
                a[(row, c)] = a[(pivot, c)];
                a[(pivot, c)] = tmp;
            }
        }
        for r in (row + 1)..rows {
            let factor = a[(r, col)] / a[(row, col)];
            for c in col..cols {
                a[(r, c)] -= factor * a[(row, c)];
            }
        }
        rank += 1;
        row += 1;
    }
    rank
}

/// Fitted samples split into train and test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub train: Vec<DatasetSample>,
    pub test: Vec<DatasetSample>,
}

/// Fits every record and splits the samples by a seeded shuffle;
/// `train_fraction` of them (rounded) land in the training split.
pub fn assemble_dataset(
    records: &[RawContextRecord],
    objective: &CoverageObjective,
    xi: f64,
    split_seed: u64,
    train_fraction: f64,
) -> Result<(Dataset, Vec<FitInfo>)> {
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(Error::invalid(format!("train fraction {train_fraction} outside [0, 1]")));
    }
    let mut samples = Vec::with_capacity(records.len());
    let mut infos = Vec::with_capacity(records.len());
    for record in records {
        let (sample, info) = fit_weights(record, objective, xi)?;
        samples.push(sample);
        infos.push(info);
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    use rand::seq::SliceRandom;
    order.shuffle(&mut seeded_rng(split_seed, 0));
    let n_train = (train_fraction * samples.len() as f64).round() as usize;
    let mut train = Vec::with_capacity(n_train);
    let mut test = Vec::with_capacity(samples.len() - n_train);
    for (pos, &idx) in order.iter().enumerate() {
        if pos < n_train {
            train.push(samples[idx].clone());
        } else {
            test.push(samples[idx].clone());
        }
    }
    Ok((Dataset { train, test }, infos))
}

/// Writes samples as JSON lines, one per row.
pub fn write_jsonl<W: std::io::Write>(samples: &[DatasetSample], mut out: W) -> Result<()> {
    for s in samples {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads samples back from JSON lines.
pub fn read_jsonl<R: std::io::BufRead>(input: R) -> Result<Vec<DatasetSample>> {
    let mut samples = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        samples.push(serde_json::from_str(&line)?);
    }
    Ok(samples)
}

/// CSV export of `(z..., w...)` rows for external tooling.
pub fn write_csv<W: std::io::Write>(samples: &[DatasetSample], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    for s in samples {
        let mut row: Vec<String> = s.z.as_slice().iter().map(|v| format!("{v:.17e}")).collect();
        row.extend(s.w.as_array().iter().map(|v| format!("{v:.17e}")));
        wtr.write_record(row)?;
    }
    wtr.flush()?;
    Ok(())
}
