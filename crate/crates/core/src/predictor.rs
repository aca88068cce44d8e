//! Context-to-weights predictor: a one-hidden-layer MLP with a softplus
//! output head (the objective needs non-negative weights), manual
//! backpropagation against an injected upstream gradient, SGD and Adam,
//! and the two training loops — decision-oriented and two-stage MSE.

use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gradient::{loss_and_gradient, DecisionProblem};
use crate::greedy::{run_deterministic_greedy, RegularizerConfig};
use crate::submodular::{Selection, WeightMatrix};
use crate::{derive_seed, seeded_rng};

/// Flat context observation: per-UAV circle parameters followed by the
/// wind field triple `(a, b, ω_o)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextVector(pub Vec<f64>);

impl ContextVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Validates the layout for `n_uavs` circles: length `3·n_a + 3`,
    /// positive radii, positive wind parameters, direction in `[0, 360)`.
    pub fn validate(&self, n_uavs: usize) -> Result<()> {
        let want = 3 * n_uavs + 3;
        if self.0.len() != want {
            return Err(Error::dims(format!(
                "context vector has {} entries, expected {want} for {n_uavs} UAVs",
                self.0.len()
            )));
        }
        for u in 0..n_uavs {
            let r = self.0[3 * u + 2];
            if !(r > 0.0) {
                return Err(Error::invalid(format!("radius of UAV {u} must be positive, got {r}")));
            }
        }
        let a = self.0[3 * n_uavs];
        let b = self.0[3 * n_uavs + 1];
        let omega = self.0[3 * n_uavs + 2];
        if !(a > 0.0) || !(b > 0.0) {
            return Err(Error::invalid("wind parameters a, b must be positive"));
        }
        if !(0.0..360.0).contains(&omega) {
            return Err(Error::invalid(format!("wind direction {omega} outside [0, 360)")));
        }
        Ok(())
    }
}

/// MLP parameters: input -> hidden (ReLU) -> output (softplus).
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl MlpParams {
    pub fn input_dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.w2.nrows()
    }

    /// Uniform `(-1/sqrt(fan_in), 1/sqrt(fan_in))` initialization per layer.
    pub fn init(input: usize, hidden: usize, output: usize, rng: &mut impl Rng) -> Self {
        let layer = |rows: usize, cols: usize, fan_in: usize, rng: &mut dyn rand::RngCore| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            Array2::from_shape_fn((rows, cols), |_| {
                let u: f64 = rand::Rng::gen(rng);
                (2.0 * u - 1.0) * bound
            })
        };
        let w1 = layer(hidden, input, input, rng);
        let w2 = layer(output, hidden, hidden, rng);
        MlpParams { w1, b1: Array1::zeros(hidden), w2, b2: Array1::zeros(output) }
    }

    fn check_finite(&self) -> Result<()> {
        let all_finite = self
            .w1
            .iter()
            .chain(self.b1.iter())
            .chain(self.w2.iter())
            .chain(self.b2.iter())
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::invalid("non-finite parameter encountered"));
        }
        Ok(())
    }
}

/// Gradient of a scalar loss in every MLP parameter; mirrors `MlpParams`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrad {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl MlpGrad {
    pub fn zeros_like(params: &MlpParams) -> Self {
        MlpGrad {
            w1: Array2::zeros(params.w1.dim()),
            b1: Array1::zeros(params.b1.dim()),
            w2: Array2::zeros(params.w2.dim()),
            b2: Array1::zeros(params.b2.dim()),
        }
    }

    pub fn add_assign(&mut self, other: &MlpGrad) {
        self.w1 += &other.w1;
        self.b1 += &other.b1;
        self.w2 += &other.w2;
        self.b2 += &other.b2;
    }

    pub fn scale(&mut self, factor: f64) {
        self.w1 *= factor;
        self.b1 *= factor;
        self.w2 *= factor;
        self.b2 *= factor;
    }

    fn is_finite(&self) -> bool {
        self.w1
            .iter()
            .chain(self.b1.iter())
            .chain(self.w2.iter())
            .chain(self.b2.iter())
            .all(|v| v.is_finite())
    }
}

/// Activations cached by the forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Array1<f64>,
    pre_hidden: Array1<f64>,
    hidden: Array1<f64>,
    raw_output: Array1<f64>,
}

fn softplus(x: f64) -> f64 {
    // stable: max(x, 0) + ln(1 + exp(-|x|))
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Forward pass: `softplus(W2·relu(W1·z + b1) + b2)` reshaped to the
/// weight-matrix layout. Returns the prediction plus the cache needed by
/// the backward pass.
pub fn mlp_forward(
    z: &[f64],
    params: &MlpParams,
    n_partitions: usize,
    n_gammas: usize,
) -> Result<(WeightMatrix, ForwardCache)> {
    if z.len() != params.input_dim() {
        return Err(Error::dims(format!(
            "input has {} entries, model expects {}",
            z.len(),
            params.input_dim()
        )));
    }
    if params.output_dim() != n_partitions * n_gammas {
        return Err(Error::dims(format!(
            "model outputs {} values, objective needs {}x{}",
            params.output_dim(),
            n_partitions,
            n_gammas
        )));
    }
    let input = Array1::from_vec(z.to_vec());
    let pre_hidden = params.w1.dot(&input) + &params.b1;
    let hidden = pre_hidden.mapv(|v| v.max(0.0));
    let raw_output = params.w2.dot(&hidden) + &params.b2;
    let out = raw_output.mapv(softplus);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite prediction"));
    }
    let w = WeightMatrix::from_vec(n_partitions, n_gammas, out.to_vec())?;
    Ok((w, ForwardCache { input, pre_hidden, hidden, raw_output }))
}

/// Backward pass: exact reverse-mode gradient of `<upstream, output>`
/// through softplus, affine, ReLU, affine.
pub fn mlp_backward(
    params: &MlpParams,
    cache: &ForwardCache,
    upstream: &Array2<f64>,
) -> Result<MlpGrad> {
    let upstream_flat: Vec<f64> = upstream.iter().copied().collect();
    if upstream_flat.len() != params.output_dim() {
        return Err(Error::dims(format!(
            "upstream gradient has {} entries, model outputs {}",
            upstream_flat.len(),
            params.output_dim()
        )));
    }
    if cache.input.len() != params.input_dim() || cache.hidden.len() != params.hidden_dim() {
        return Err(Error::dims("cache does not match the model shape".to_string()));
    }

    // d(out)/d(raw) = sigmoid(raw)
    let d_raw: Array1<f64> = Array1::from_vec(upstream_flat) * &cache.raw_output.mapv(sigmoid);
    let grad_w2 = outer(&d_raw, &cache.hidden);
    let grad_b2 = d_raw.clone();
    let d_hidden = params.w2.t().dot(&d_raw);
    let d_pre: Array1<f64> =
        d_hidden * &cache.pre_hidden.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
    let grad_w1 = outer(&d_pre, &cache.input);
    Ok(MlpGrad { w1: grad_w1, b1: d_pre, w2: grad_w2, b2: grad_b2 })
}

fn outer(col: &Array1<f64>, row: &Array1<f64>) -> Array2<f64> {
    let mut out = Array2::zeros((col.len(), row.len()));
    for (i, &c) in col.iter().enumerate() {
        for (j, &r) in row.iter().enumerate() {
            out[(i, j)] = c * r;
        }
    }
    out
}

/// Optimizer selection; the learning rate lives in `TrainConfig`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam_default() -> Self {
        OptimizerKind::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam moment buffers; unused for SGD.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    step: usize,
    m: MlpGrad,
    v: MlpGrad,
}

impl OptimizerState {
    pub fn new(params: &MlpParams) -> Self {
        OptimizerState { step: 0, m: MlpGrad::zeros_like(params), v: MlpGrad::zeros_like(params) }
    }
}

/// One optimizer update. SGD is the plain `θ ← θ - α·g` rule; Adam uses
/// bias-corrected first and second moments.
pub fn optimizer_step(
    params: &mut MlpParams,
    grad: &MlpGrad,
    state: &mut OptimizerState,
    learning_rate: f64,
    kind: &OptimizerKind,
) -> Result<()> {
    if !grad.is_finite() {
        return Err(Error::invalid("non-finite gradient; aborting the update"));
    }
    match *kind {
        OptimizerKind::Sgd => {
            apply(params, grad, &mut state.m, &mut state.v, |p, g, _, _| {
                *p -= learning_rate * g;
            });
        }
        OptimizerKind::Adam { beta1, beta2, eps } => {
            state.step += 1;
            let t = state.step as f64;
            let c1 = 1.0 - beta1.powf(t);
            let c2 = 1.0 - beta2.powf(t);
            apply(params, grad, &mut state.m, &mut state.v, |p, g, m, v| {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= learning_rate * m_hat / (v_hat.sqrt() + eps);
            });
        }
    }
    params.check_finite()
}

fn apply(
    params: &mut MlpParams,
    grad: &MlpGrad,
    m: &mut MlpGrad,
    v: &mut MlpGrad,
    mut f: impl FnMut(&mut f64, f64, &mut f64, &mut f64),
) {
    macro_rules! walk {
        ($field:ident) => {
            for (((p, &g), mm), vv) in params
                .$field
                .iter_mut()
                .zip(grad.$field.iter())
                .zip(m.$field.iter_mut())
                .zip(v.$field.iter_mut())
            {
                f(p, g, mm, vv);
            }
        };
    }
    walk!(w1);
    walk!(b1);
    walk!(w2);
    walk!(b2);
}

/// Training hyperparameters shared by both loops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub optimizer: OptimizerKind,
    /// Smoothed-greedy trials per sample for the gradient estimate.
    pub sg_trials: usize,
    /// Entropy temperature of the smoothed greedy.
    pub epsilon: f64,
    pub seed: u64,
    pub hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 40,
            learning_rate: 1e-3,
            epochs: 50,
            optimizer: OptimizerKind::adam_default(),
            sg_trials: 10,
            epsilon: 0.2,
            seed: 0,
            hidden: 64,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be >= 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if self.sg_trials == 0 {
            return Err(Error::invalid("sg_trials must be >= 1"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("epsilon must be positive"));
        }
        if self.hidden == 0 {
            return Err(Error::invalid("hidden width must be >= 1"));
        }
        Ok(())
    }
}

/// Per-feature affine standardization fit on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalization {
    pub fn fit(samples: &[&[f64]]) -> Result<Self> {
        let Some(first) = samples.first() else {
            return Err(Error::invalid("cannot fit normalization on an empty set"));
        };
        let d = first.len();
        let n = samples.len() as f64;
        let mut mean = vec![0.0; d];
        for s in samples {
            if s.len() != d {
                return Err(Error::dims("inconsistent context dimensions".to_string()));
            }
            for (m, &x) in mean.iter_mut().zip(s.iter()) {
                *m += x / n;
            }
        }
        let mut std = vec![0.0; d];
        for s in samples {
            for ((v, &x), &m) in std.iter_mut().zip(s.iter()).zip(mean.iter()) {
                *v += (x - m) * (x - m) / n;
            }
        }
        for v in &mut std {
            *v = v.sqrt();
            if *v < 1e-12 {
                *v = 1.0; // constant feature: center only
            }
        }
        Ok(Normalization { mean, std })
    }

    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.mean).zip(&self.std).map(|((&x, &m), &s)| (x - m) / s).collect()
    }
}

/// A trained model: parameters, the input normalization fitted with them,
/// and the output shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictor {
    pub params: MlpParams,
    pub norm: Normalization,
    pub n_partitions: usize,
    pub n_gammas: usize,
}

impl Predictor {
    pub fn predict(&self, z: &ContextVector) -> Result<WeightMatrix> {
        let normalized = self.norm.apply(z.as_slice());
        Ok(mlp_forward(&normalized, &self.params, self.n_partitions, self.n_gammas)?.0)
    }
}

/// One training pair: context plus fitted ground-truth weights.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample {
    pub z: ContextVector,
    pub w: WeightMatrix,
}

/// Per-epoch training record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub seconds: f64,
}

/// Loss trajectory of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossHistory {
    pub entries: Vec<EpochRecord>,
    pub seed: u64,
}

impl LossHistory {
    pub fn losses(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.loss).collect()
    }

    /// CSV with columns `epoch,loss,seconds`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["epoch", "loss", "seconds"])?;
        for e in &self.entries {
            wtr.write_record([
                e.epoch.to_string(),
                format!("{:.17e}", e.loss),
                format!("{:.17e}", e.seconds),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn init_predictor(
    dataset: &[TrainSample],
    problem: &DecisionProblem,
    config: &TrainConfig,
) -> Result<(Predictor, Vec<Vec<f64>>)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::invalid("dataset must be non-empty"));
    }
    let n_partitions = problem.objective.n_partitions();
    let n_gammas = problem.objective.n_gammas();
    let d = dataset[0].z.len();
    for s in dataset {
        if s.z.len() != d {
            return Err(Error::dims("inconsistent context dimensions".to_string()));
        }
        if s.w.n_partitions() != n_partitions || s.w.n_gammas() != n_gammas {
            return Err(Error::dims("sample weight shape does not match the objective".to_string()));
        }
    }
    let refs: Vec<&[f64]> = dataset.iter().map(|s| s.z.as_slice()).collect();
    let norm = Normalization::fit(&refs)?;
    let normalized: Vec<Vec<f64>> = dataset.iter().map(|s| norm.apply(s.z.as_slice())).collect();
    let mut rng = seeded_rng(config.seed, 0);
    let params = MlpParams::init(d, config.hidden, n_partitions * n_gammas, &mut rng);
    Ok((Predictor { params, norm, n_partitions, n_gammas }, normalized))
}

/// Shuffled index batches for one epoch.
fn epoch_batches(n: usize, batch_size: usize, rng: &mut impl Rng) -> Vec<Vec<usize>> {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.chunks(batch_size).map(|c| c.to_vec()).collect()
}

/// Decision-oriented training: per sample, the upstream `∂ℓ/∂ŵ` comes
/// from the score-function estimator over smoothed-greedy trials and is
/// chained through the MLP by manual backprop. Batch gradients are
/// averaged and parameters updated once per batch.
pub fn train_dol(
    dataset: &[TrainSample],
    problem: &DecisionProblem,
    config: &TrainConfig,
) -> Result<(Predictor, LossHistory)> {
    let (mut predictor, normalized) = init_predictor(dataset, problem, config)?;
    let sg_config = RegularizerConfig::new(config.epsilon)?;

    // the reference term f(S*(w_i), w_i) is fixed per sample
    let references: Vec<f64> = dataset
        .iter()
        .map(|s| {
            let sel = run_deterministic_greedy(problem.objective, &s.w, problem.system)?;
            problem.objective.objective_value(&sel, &s.w)
        })
        .collect::<Result<_>>()?;

    let mut state = OptimizerState::new(&predictor.params);
    let mut shuffle_rng = seeded_rng(config.seed, 1);
    let mut history = LossHistory { entries: Vec::new(), seed: config.seed };
    let start = Instant::now();

    for epoch in 0..config.epochs {
        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for (batch_no, batch) in epoch_batches(dataset.len(), config.batch_size, &mut shuffle_rng)
            .into_iter()
            .enumerate()
        {
            let mut batch_grad = MlpGrad::zeros_like(&predictor.params);
            for &i in &batch {
                let sample = &dataset[i];
                let (w_hat, cache) = mlp_forward(
                    &normalized[i],
                    &predictor.params,
                    predictor.n_partitions,
                    predictor.n_gammas,
                )?;
                let trial_seed =
                    derive_seed(config.seed, ((epoch * 1_000 + batch_no) * 1_000 + i) as u64);
                let (loss_est, grad_est) = loss_and_gradient(
                    &sample.w,
                    &w_hat,
                    problem,
                    &sg_config,
                    config.sg_trials,
                    trial_seed,
                    None,
                )?;
                // the loss estimate's reference equals the precomputed one
                epoch_loss += references[i] - loss_est.mc_mean;
                seen += 1;
                let sample_grad = mlp_backward(&predictor.params, &cache, &grad_est.grad)?;
                batch_grad.add_assign(&sample_grad);
            }
            batch_grad.scale(1.0 / batch.len() as f64);
            optimizer_step(
                &mut predictor.params,
                &batch_grad,
                &mut state,
                config.learning_rate,
                &config.optimizer,
            )?;
        }
        history.entries.push(EpochRecord {
            epoch,
            loss: epoch_loss / seen as f64,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok((predictor, history))
}

/// Two-stage baseline: the same architecture, initialization, batching,
/// and optimizer, trained purely on mean squared error in weight space.
pub fn train_two_stage(
    dataset: &[TrainSample],
    problem: &DecisionProblem,
    config: &TrainConfig,
) -> Result<(Predictor, LossHistory)> {
    let (mut predictor, normalized) = init_predictor(dataset, problem, config)?;
    let out_dim = (predictor.n_partitions * predictor.n_gammas) as f64;

    let mut state = OptimizerState::new(&predictor.params);
    let mut shuffle_rng = seeded_rng(config.seed, 1);
    let mut history = LossHistory { entries: Vec::new(), seed: config.seed };
    let start = Instant::now();

    for epoch in 0..config.epochs {
        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for batch in epoch_batches(dataset.len(), config.batch_size, &mut shuffle_rng) {
            let mut batch_grad = MlpGrad::zeros_like(&predictor.params);
            for &i in &batch {
                let sample = &dataset[i];
                let (w_hat, cache) = mlp_forward(
                    &normalized[i],
                    &predictor.params,
                    predictor.n_partitions,
                    predictor.n_gammas,
                )?;
                let diff = w_hat.as_array() - sample.w.as_array();
                epoch_loss += diff.iter().map(|d| d * d).sum::<f64>() / out_dim;
                seen += 1;
                let upstream = diff.mapv(|d| 2.0 * d / out_dim);
                let sample_grad = mlp_backward(&predictor.params, &cache, &upstream)?;
                batch_grad.add_assign(&sample_grad);
            }
            batch_grad.scale(1.0 / batch.len() as f64);
            optimizer_step(
                &mut predictor.params,
                &batch_grad,
                &mut state,
                config.learning_rate,
                &config.optimizer,
            )?;
        }
        history.entries.push(EpochRecord {
            epoch,
            loss: epoch_loss / seen as f64,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok((predictor, history))
}

/// Test-time decision: deterministic greedy under the predicted weights.
pub fn select_routes(
    predictor: &Predictor,
    z: &ContextVector,
    problem: &DecisionProblem,
) -> Result<Selection> {
    let w_hat = predictor.predict(z)?;
    run_deterministic_greedy(problem.objective, &w_hat, problem.system)
}

/// Serialized checkpoint: shapes, flattened parameters, normalization
/// stats, and an echo of the training configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub n_partitions: usize,
    pub n_gammas: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub norm_mean: Vec<f64>,
    pub norm_std: Vec<f64>,
    pub config: TrainConfig,
    /// Which loop produced this model: "dol" or "two-stage".
    pub method: String,
}

impl Checkpoint {
    pub fn from_predictor(predictor: &Predictor, config: &TrainConfig, method: &str) -> Self {
        Checkpoint {
            input_dim: predictor.params.input_dim(),
            hidden_dim: predictor.params.hidden_dim(),
            n_partitions: predictor.n_partitions,
            n_gammas: predictor.n_gammas,
            w1: predictor.params.w1.iter().copied().collect(),
            b1: predictor.params.b1.to_vec(),
            w2: predictor.params.w2.iter().copied().collect(),
            b2: predictor.params.b2.to_vec(),
            norm_mean: predictor.norm.mean.clone(),
            norm_std: predictor.norm.std.clone(),
            config: config.clone(),
            method: method.to_string(),
        }
    }

    pub fn into_predictor(self) -> Result<Predictor> {
        let w1 = Array2::from_shape_vec((self.hidden_dim, self.input_dim), self.w1)
            .map_err(|e| Error::dims(format!("w1 shape: {e}")))?;
        let w2 =
            Array2::from_shape_vec((self.n_partitions * self.n_gammas, self.hidden_dim), self.w2)
                .map_err(|e| Error::dims(format!("w2 shape: {e}")))?;
        if self.b1.len() != self.hidden_dim || self.b2.len() != self.n_partitions * self.n_gammas {
            return Err(Error::dims("bias lengths do not match the declared shapes".to_string()));
        }
        if self.norm_mean.len() != self.input_dim || self.norm_std.len() != self.input_dim {
            return Err(Error::dims("normalization lengths do not match the input".to_string()));
        }
        Ok(Predictor {
            params: MlpParams {
                w1,
                b1: Array1::from_vec(self.b1),
                w2,
                b2: Array1::from_vec(self.b2),
            },
            norm: Normalization { mean: self.norm_mean, std: self.norm_std },
            n_partitions: self.n_partitions,
            n_gammas: self.n_gammas,
        })
    }
}
