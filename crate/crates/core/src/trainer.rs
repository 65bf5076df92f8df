//! Alternating optimization of the network parameters and the tensor normal
//! prior's covariances.
//!
//! Each epoch runs one pass of mini-batch SGD with momentum over the pooled
//! examples of all tasks, then one flip-flop sweep over every task-specific
//! layer's feature, class and task covariances (ridged by `ε·I` and
//! normalized to unit trace).

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::MultiTaskDataset;
use crate::error::{arg_err, Error, Result};
use crate::linalg::{OpCounter, SpdFactor};
use crate::matrix::DenseMatrix;
use crate::net::{prior_penalty, Gradient, MultiTaskNet, TaskLayerStack};
use crate::tnd::{accumulate_mode_gram, KronCovariance};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LrSchedule {
    Constant,
    /// `lr · (1 + gamma·iter)^(−power)`, with `iter` counting SGD steps.
    InverseDecay { gamma: f64, power: f64 },
}

impl LrSchedule {
    pub fn rate(&self, base: f64, iter: usize) -> f64 {
        match *self {
            LrSchedule::Constant => base,
            LrSchedule::InverseDecay { gamma, power } => {
                base * libm::pow(1.0 + gamma * iter as f64, -power)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Ridge `ε` added to every covariance update before normalization.
    pub epsilon_ridge: f64,
    /// Weight `λ` of the prior term in the objective.
    pub prior_weight: f64,
    /// One task covariance shared by all task-specific layers.
    pub shared_task_sigma: bool,
    /// Learning-rate multiplier for the task-specific layers.
    pub new_layer_lr_multiplier: f64,
    pub lr_schedule: LrSchedule,
    /// When false the covariances stay at their initialization.
    pub learn_covariances: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            momentum: 0.9,
            batch_size: 32,
            epochs: 50,
            epsilon_ridge: 1e-3,
            prior_weight: 1.0,
            shared_task_sigma: false,
            new_layer_lr_multiplier: 10.0,
            lr_schedule: LrSchedule::Constant,
            learn_covariances: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(arg_err!("{name} must be positive, got {v}"))
            }
        };
        positive(self.learning_rate, "learning_rate")?;
        positive(self.epsilon_ridge, "epsilon_ridge")?;
        positive(self.new_layer_lr_multiplier, "new_layer_lr_multiplier")?;
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(arg_err!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        if !(self.prior_weight >= 0.0 && self.prior_weight.is_finite()) {
            return Err(arg_err!("prior_weight must be non-negative, got {}", self.prior_weight));
        }
        if self.batch_size == 0 {
            return Err(arg_err!("batch_size must be positive"));
        }
        if let LrSchedule::InverseDecay { gamma, power } = self.lr_schedule {
            if !(gamma >= 0.0 && power >= 0.0) {
                return Err(arg_err!("inverse-decay gamma and power must be non-negative"));
            }
        }
        Ok(())
    }
}

/// Feature, class and task covariances of every task-specific layer, stored
/// as the layer's prior `Σⁱ ⊗ Σᵒ ⊗ Σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceState {
    names: Vec<String>,
    priors: Vec<KronCovariance>,
}

impl CovarianceState {
    /// `I/dim` for every factor.
    pub fn unit_trace_identity(stack: &TaskLayerStack) -> Self {
        Self {
            names: stack.names(),
            priors: stack
                .layers()
                .iter()
                .map(|l| {
                    KronCovariance::new(
                        l.weights
                            .dims()
                            .map(|d| SpdFactor::scaled_identity(d, 1.0 / d as f64)),
                    )
                })
                .collect(),
        }
    }

    pub fn from_priors(names: Vec<String>, priors: Vec<KronCovariance>) -> Result<Self> {
        if names.len() != priors.len() {
            return Err(arg_err!("{} names for {} priors", names.len(), priors.len()));
        }
        Ok(Self { names, priors })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn priors(&self) -> &[KronCovariance] {
        &self.priors
    }

    pub fn len(&self) -> usize {
        self.priors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.priors.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn feature(&self, layer: usize) -> &SpdFactor {
        self.priors[layer].factor(1)
    }

    pub fn class(&self, layer: usize) -> &SpdFactor {
        self.priors[layer].factor(2)
    }

    pub fn task(&self, layer: usize) -> &SpdFactor {
        self.priors[layer].factor(3)
    }

    /// True when every factor has unit trace within `tol`.
    pub fn has_unit_traces(&self, tol: f64) -> bool {
        self.priors
            .iter()
            .flat_map(|p| p.factors().iter())
            .all(|f| (f.trace() - 1.0).abs() <= tol)
    }
}

/// Momentum buffer and step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub velocity: Vec<f64>,
    pub step: usize,
}

impl OptimizerState {
    pub fn new(net: &MultiTaskNet) -> Self {
        Self {
            velocity: vec![0.0; net.param_count()],
            step: 0,
        }
    }
}

/// Wall-clock source; the core has none of its own.
pub trait Clock {
    /// Seconds since an arbitrary fixed origin.
    fn now(&self) -> f64;
}

/// A clock that always reads zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullClock;

impl Clock for NullClock {
    fn now(&self) -> f64 {
        0.0
    }
}

fn check_data(net: &MultiTaskNet, data: &MultiTaskDataset) -> Result<()> {
    if data.num_tasks() != net.num_tasks()
        || data.feature_dim() != net.input_dim()
        || data.num_classes() != net.num_classes()
    {
        return Err(arg_err!(
            "dataset ({} tasks, D={}, C={}) does not match network ({} tasks, D={}, C={})",
            data.num_tasks(),
            data.feature_dim(),
            data.num_classes(),
            net.num_tasks(),
            net.input_dim(),
            net.num_classes()
        ));
    }
    Ok(())
}

fn check_cov(net: &MultiTaskNet, cov: &CovarianceState) -> Result<()> {
    let stack = net.stack();
    if cov.len() != stack.len()
        || stack
            .layers()
            .iter()
            .zip(cov.priors())
            .any(|(l, p)| l.weights.dims() != p.dims())
    {
        return Err(arg_err!("covariance state does not match the task-specific layers"));
    }
    Ok(())
}

/// One epoch of mini-batch SGD with momentum over the pooled examples.
///
/// Each batch gradient is the batch mean of the cross-entropy gradients
/// plus, for every task `t` present in the batch, `λ·(n_{t,b}/N_t)/|b|`
/// times the prior gradient `[Σ⁻¹ vec(Wℓ)]_t`. Summed over an epoch each
/// task's prior gradient is applied with total weight `λ/|b|`, the same
/// relative weight it carries in the objective. Returns the mean batch
/// cross-entropy.
pub fn sgd_epoch(
    net: &mut MultiTaskNet,
    cov: &CovarianceState,
    data: &MultiTaskDataset,
    cfg: &TrainConfig,
    opt: &mut OptimizerState,
    epoch: usize,
) -> Result<f64> {
    check_data(net, data)?;
    check_cov(net, cov)?;
    let sizes = data.task_sizes();
    if let Some(t) = sizes.iter().position(|&n| n == 0) {
        return Err(arg_err!("task '{}' has no training examples", data.task_names()[t]));
    }
    let mut order: Vec<(usize, usize)> = sizes
        .iter()
        .enumerate()
        .flat_map(|(t, &n)| (0..n).map(move |i| (t, i)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(epoch as u64);
    order.shuffle(&mut rng);

    let layout = net.layout();
    let trunk_len = layout.trunk_len();
    let mut grad = Gradient::zeros(layout);
    let use_prior = cfg.prior_weight > 0.0;
    let mut loss_sum = 0.0;
    let mut batches = 0;
    for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
        grad.data.iter_mut().for_each(|g| *g = 0.0);
        let inv = 1.0 / batch.len() as f64;
        let mut counts = vec![0usize; sizes.len()];
        let mut batch_loss = 0.0;
        for &(t, i) in batch {
            let task = data.task(t);
            batch_loss += net.backward_into(t, &task.features[i], task.labels[i], inv, &mut grad)?;
            counts[t] += 1;
        }
        if use_prior {
            for (li, (layer, prior)) in net.stack().layers().iter().zip(cov.priors()).enumerate() {
                let p = prior.solve(&layer.weights)?;
                let off = grad.layout.task_weight_offset(li);
                let tasks = layer.num_tasks();
                for (t, &n) in counts.iter().enumerate() {
                    if n == 0 {
                        continue;
                    }
                    let w = cfg.prior_weight * (n as f64 / sizes[t] as f64) * inv;
                    let g = &mut grad.data[off..off + p.len()];
                    for (k, pv) in p.as_slice().iter().enumerate().skip(t).step_by(tasks) {
                        g[k] += w * pv;
                    }
                }
            }
        }
        if !grad.is_finite() {
            return Err(Error::Training {
                epoch,
                batch: b,
                reason: "non-finite gradient".into(),
            });
        }
        let lr = cfg.lr_schedule.rate(cfg.learning_rate, opt.step);
        let lr_task = lr * cfg.new_layer_lr_multiplier;
        let mu = cfg.momentum;
        let velocity = &mut opt.velocity;
        let g = &grad.data;
        net.visit_params_mut(|k, p| {
            let rate = if k < trunk_len { lr } else { lr_task };
            velocity[k] = mu * velocity[k] + rate * g[k];
            *p -= velocity[k];
        });
        opt.step += 1;
        loss_sum += batch_loss * inv;
        batches += 1;
    }
    Ok(loss_sum / batches as f64)
}

/// Diagnostics of one covariance sweep.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CovUpdateStats {
    /// Largest relative Frobenius change of any factor.
    pub max_residual: f64,
    /// Multiply-adds spent in each layer's task-covariance (mode-3) step.
    pub mode3_ops: Vec<u64>,
}

fn ridge_normalize(
    gram: DenseMatrix,
    eps: f64,
    layer: &str,
    mode: usize,
    ops: &mut OpCounter,
) -> Result<SpdFactor> {
    let n = gram.rows();
    let mut m = gram;
    for i in 0..n {
        m[(i, i)] += eps;
    }
    let tr = m.trace();
    if !(tr > 0.0 && tr.is_finite()) {
        return Err(Error::Estimation(format!(
            "layer '{layer}' mode {mode}: covariance update has non-positive trace"
        )));
    }
    ops.add(n * n + 2 * n);
    SpdFactor::new_counted(m.scaled(1.0 / tr), ops).map_err(|_| {
        Error::Estimation(format!(
            "layer '{layer}' mode {mode}: covariance update is not positive definite after the ridge; increase epsilon"
        ))
    })
}

fn rel_change(old: &SpdFactor, new: &SpdFactor) -> f64 {
    let diff = DenseMatrix::from_fn(old.dim(), old.dim(), |i, j| {
        new.matrix()[(i, j)] - old.matrix()[(i, j)]
    });
    diff.frobenius_norm() / old.matrix().frobenius_norm()
}

/// One flip-flop sweep per layer: feature, then class, then task covariance.
///
/// Mode `k` of layer `ℓ` becomes the Gram of `Wℓ(k)` against the inverse of
/// the other two current factors, divided by the product of the other two
/// dimensions, plus `ε·I`, normalized to unit trace. With
/// `shared_task_sigma` the raw mode-3 Grams of all layers are pooled and
/// divided by `Σℓ Dℓⁱ Dℓᵒ`, and the result is installed in every layer.
pub fn update_covariances(
    stack: &TaskLayerStack,
    cov: &CovarianceState,
    cfg: &TrainConfig,
) -> Result<(CovarianceState, CovUpdateStats)> {
    if cov.len() != stack.len() {
        return Err(arg_err!("covariance state does not match the task-specific layers"));
    }
    let eps = cfg.epsilon_ridge;
    let mut stats = CovUpdateStats::default();
    let mut out = cov.clone();
    let tasks = stack.num_tasks();
    let mut pooled = DenseMatrix::zeros(tasks, tasks);
    let mut pooled_cells = 0usize;

    for (li, layer) in stack.layers().iter().enumerate() {
        let w = &layer.weights;
        if !w.is_finite() {
            return Err(Error::Estimation(format!("layer '{}' has non-finite weights", layer.name)));
        }
        let dims = w.dims();
        let prior = &mut out.priors[li];
        let upto = if cfg.shared_task_sigma { 2 } else { 3 };
        let mut other_ops = OpCounter::default();
        let mut mode3_ops = OpCounter::default();
        for mode in 1..=3 {
            let dk = dims[mode - 1];
            let mut gram = DenseMatrix::zeros(dk, dk);
            let counter = if mode == 3 { &mut mode3_ops } else { &mut other_ops };
            {
                let f = prior.factors();
                accumulate_mode_gram(w, [&f[0], &f[1], &f[2]].map(Some), mode, &mut gram, counter);
            }
            if mode > upto {
                pooled_cells += dims[0] * dims[1];
                for (p, g) in pooled.as_mut_slice().iter_mut().zip(gram.as_slice()) {
                    *p += g;
                }
                continue;
            }
            let cells = (w.len() / dk) as f64;
            let gram = gram.scaled(1.0 / cells);
            let counter = if mode == 3 { &mut mode3_ops } else { &mut other_ops };
            let updated = ridge_normalize(gram, eps, &layer.name, mode, counter)?;
            stats.max_residual = stats.max_residual.max(rel_change(prior.factor(mode), &updated));
            prior.set_factor(mode, updated);
        }
        stats.mode3_ops.push(mode3_ops.0);
    }

    if cfg.shared_task_sigma {
        let gram = pooled.scaled(1.0 / pooled_cells as f64);
        let mut c = OpCounter::default();
        let shared = ridge_normalize(gram, eps, "shared", 3, &mut c)?;
        for (li, prior) in out.priors.iter_mut().enumerate() {
            stats.max_residual = stats.max_residual.max(rel_change(cov.task(li), &shared));
            prior.set_factor(3, shared.clone());
            stats.mode3_ops[li] += c.0;
        }
    }
    Ok((out, stats))
}

/// `Σt Σn J(f_t(x), y) + λ·prior_penalty`, over the full dataset.
pub fn objective(
    net: &MultiTaskNet,
    cov: &CovarianceState,
    data: &MultiTaskDataset,
    cfg: &TrainConfig,
) -> Result<f64> {
    check_data(net, data)?;
    check_cov(net, cov)?;
    let mut risk = 0.0;
    for (t, task) in data.tasks().iter().enumerate() {
        for (x, &y) in task.features.iter().zip(&task.labels) {
            risk += net.loss(t, x, y)?;
        }
    }
    if cfg.prior_weight == 0.0 {
        return Ok(risk);
    }
    Ok(risk + cfg.prior_weight * prior_penalty(net.stack(), cov.priors())?)
}

/// Fraction of correctly classified examples per task (`NaN` for an empty task).
pub fn accuracy(net: &MultiTaskNet, data: &MultiTaskDataset) -> Result<Vec<f64>> {
    check_data(net, data)?;
    data.tasks()
        .iter()
        .enumerate()
        .map(|(t, task)| {
            let mut hits = 0usize;
            for (x, &y) in task.features.iter().zip(&task.labels) {
                if net.predict(t, x)? == y {
                    hits += 1;
                }
            }
            Ok(hits as f64 / task.len() as f64)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based epoch number.
    pub epoch: usize,
    pub objective: f64,
    pub mean_batch_loss: f64,
    pub train_accuracy: Vec<f64>,
    pub test_accuracy: Option<Vec<f64>>,
    /// Largest relative change of any covariance factor in this epoch's sweep.
    pub cov_residual: f64,
    pub sgd_seconds: f64,
    pub cov_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub task_names: Vec<String>,
    pub epochs: Vec<EpochRecord>,
}

impl TrainReport {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }
}

/// Result of [`train`].
#[derive(Debug, Clone, PartialEq)]
pub struct Trained {
    pub net: MultiTaskNet,
    pub cov: CovarianceState,
    pub report: TrainReport,
}

/// Alternates [`sgd_epoch`] and [`update_covariances`] for `cfg.epochs`
/// epochs starting from unit-trace identity covariances.
pub fn train(
    net: MultiTaskNet,
    train_data: &MultiTaskDataset,
    test_data: Option<&MultiTaskDataset>,
    cfg: &TrainConfig,
    clock: &dyn Clock,
) -> Result<Trained> {
    cfg.validate()?;
    check_data(&net, train_data)?;
    if let Some(test) = test_data {
        check_data(&net, test)?;
    }
    let mut net = net;
    let mut cov = CovarianceState::unit_trace_identity(net.stack());
    let mut opt = OptimizerState::new(&net);
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let with_context = |epoch: usize, e: Error| match e {
        Error::Estimation(reason) | Error::NotPositiveDefinite(reason) => Error::Training {
            epoch,
            batch: 0,
            reason,
        },
        other => other,
    };

    for epoch in 1..=cfg.epochs {
        let t0 = clock.now();
        let mean_batch_loss = sgd_epoch(&mut net, &cov, train_data, cfg, &mut opt, epoch)?;
        let t1 = clock.now();
        let mut cov_residual = 0.0;
        if cfg.learn_covariances {
            let (next, stats) =
                update_covariances(net.stack(), &cov, cfg).map_err(|e| with_context(epoch, e))?;
            cov = next;
            cov_residual = stats.max_residual;
        }
        let t2 = clock.now();
        let objective = objective(&net, &cov, train_data, cfg)?;
        if !objective.is_finite() {
            return Err(Error::Training {
                epoch,
                batch: 0,
                reason: "objective is not finite".into(),
            });
        }
        epochs.push(EpochRecord {
            epoch,
            objective,
            mean_batch_loss,
            train_accuracy: accuracy(&net, train_data)?,
            test_accuracy: test_data.map(|d| accuracy(&net, d)).transpose()?,
            cov_residual,
            sgd_seconds: t1 - t0,
            cov_seconds: t2 - t1,
        });
    }
    Ok(Trained {
        net,
        cov,
        report: TrainReport {
            task_names: train_data.task_names().to_vec(),
            epochs,
        },
    })
}

/// Task covariance of `layer` rescaled to unit diagonal.
pub fn extract_relationship(cov: &CovarianceState, layer: usize) -> Result<DenseMatrix> {
    if layer >= cov.len() {
        return Err(arg_err!("layer {layer} out of range for {} layers", cov.len()));
    }
    correlation(cov.task(layer).matrix())
}

/// `C[i,j] = S[i,j] / sqrt(S[i,i]·S[j,j])`.
pub fn correlation(s: &DenseMatrix) -> Result<DenseMatrix> {
    let n = s.rows();
    if let Some(i) = (0..n).find(|&i| !(s[(i, i)] > 0.0)) {
        return Err(Error::Estimation(format!(
            "diagonal entry {i} is not positive, correlation undefined"
        )));
    }
    Ok(DenseMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            s[(i, j)] / libm::sqrt(s[(i, i)] * s[(j, j)])
        }
    }))
}
