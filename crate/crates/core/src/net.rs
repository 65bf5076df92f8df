//! Multi-task classifier with a shared trunk and task-specific layers.
//!
//! Task-specific layer `ℓ` keeps the weights of all `T` tasks in one tensor
//! `Wℓ ∈ ℝ^{Dℓⁱ × Dℓᵒ × T}`; mode-3 slice `t` is task `t`'s weight matrix.
//! A layer maps `h ↦ a(Wᵀh + b)`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{arg_err, Result};
use crate::matrix::DenseMatrix;
use crate::tensor::Tensor3;
use crate::tnd::KronCovariance;

/// Name of the task-specific classifier layer.
pub const CLASSIFIER: &str = "classifier";
/// Name of the single task-specific hidden layer.
pub const BOTTLENECK: &str = "bottleneck";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Softmax,
    Identity,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Softmax => "softmax",
            Activation::Identity => "identity",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "relu" => Some(Activation::Relu),
            "softmax" => Some(Activation::Softmax),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }

    /// Applies a hidden-layer activation in place. Softmax is handled by the
    /// loss and leaves logits untouched here.
    fn apply_hidden(self, z: &mut [f64]) {
        if self == Activation::Relu {
            z.iter_mut().for_each(|v| *v = v.max(0.0));
        }
    }

    /// Multiplies `delta` by the activation derivative at pre-activation `z`.
    /// The ReLU subgradient at 0 is 0.
    fn backprop_hidden(self, z: &[f64], delta: &mut [f64]) {
        if self == Activation::Relu {
            for (d, &zi) in delta.iter_mut().zip(z) {
                if zi <= 0.0 {
                    *d = 0.0;
                }
            }
        }
    }
}

/// A shared fully connected layer, `weight` is `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weight: DenseMatrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(weight: DenseMatrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weight.cols() {
            return Err(arg_err!(
                "bias length {} does not match layer width {}",
                bias.len(),
                weight.cols()
            ));
        }
        Ok(Self {
            weight,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.cols()
    }

    fn pre_activation(&self, h: &[f64]) -> Vec<f64> {
        let mut z = self.bias.clone();
        for (i, &hi) in h.iter().enumerate() {
            if hi == 0.0 {
                continue;
            }
            for (zj, &w) in z.iter_mut().zip(self.weight.row(i)) {
                *zj += hi * w;
            }
        }
        z
    }
}

/// One task-specific layer: stacked weights for every task plus per-task biases.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskLayer {
    pub name: String,
    /// `in × out × T`.
    pub weights: Tensor3,
    /// `biases[t]` has length `out`.
    pub biases: Vec<Vec<f64>>,
    pub activation: Activation,
}

impl TaskLayer {
    pub fn in_dim(&self) -> usize {
        self.weights.dim(1)
    }

    pub fn out_dim(&self) -> usize {
        self.weights.dim(2)
    }

    pub fn num_tasks(&self) -> usize {
        self.weights.dim(3)
    }

    /// Task `t`'s weight matrix.
    pub fn task_weight(&self, t: usize) -> Result<DenseMatrix> {
        self.weights.slice3(t)
    }

    fn pre_activation(&self, t: usize, h: &[f64]) -> Vec<f64> {
        let [_, out, tasks] = self.weights.dims();
        let w = self.weights.as_slice();
        let mut z = self.biases[t].clone();
        for (i, &hi) in h.iter().enumerate() {
            if hi == 0.0 {
                continue;
            }
            let base = i * out * tasks + t;
            for (j, zj) in z.iter_mut().enumerate() {
                *zj += hi * w[base + j * tasks];
            }
        }
        z
    }
}

/// The task-specific layers `ℒ`, in forward order.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskLayerStack {
    layers: Vec<TaskLayer>,
}

impl TaskLayerStack {
    pub fn new(layers: Vec<TaskLayer>) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| arg_err!("at least one task-specific layer is required"))?;
        let tasks = first.num_tasks();
        for (k, l) in layers.iter().enumerate() {
            if l.num_tasks() != tasks {
                return Err(arg_err!(
                    "layer '{}' has {} tasks, expected {tasks}",
                    l.name,
                    l.num_tasks()
                ));
            }
            if l.biases.len() != tasks || l.biases.iter().any(|b| b.len() != l.out_dim()) {
                return Err(arg_err!("layer '{}' biases do not match its shape", l.name));
            }
            if let Some(next) = layers.get(k + 1) {
                if next.in_dim() != l.out_dim() {
                    return Err(arg_err!(
                        "layer '{}' outputs {} but '{}' expects {}",
                        l.name,
                        l.out_dim(),
                        next.name,
                        next.in_dim()
                    ));
                }
            }
        }
        for (k, l) in layers.iter().enumerate() {
            if layers[..k].iter().any(|p| p.name == l.name) {
                return Err(arg_err!("duplicate layer name '{}'", l.name));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[TaskLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [TaskLayer] {
        &mut self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn num_tasks(&self) -> usize {
        self.layers[0].num_tasks()
    }

    pub fn layer(&self, idx: usize) -> &TaskLayer {
        &self.layers[idx]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.name == name)
    }

    pub fn names(&self) -> Vec<String> {
        self.layers.iter().map(|l| l.name.clone()).collect()
    }
}

/// Layer sizes and names used to build a fresh network.
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    pub input_dim: usize,
    /// Widths of the shared ReLU trunk layers.
    pub trunk_widths: Vec<usize>,
    /// Widths of the task-specific ReLU layers before the classifier.
    pub task_hidden_widths: Vec<usize>,
    pub num_classes: usize,
    pub num_tasks: usize,
}

impl Architecture {
    pub fn task_layer_names(&self) -> Vec<String> {
        let mut names: Vec<String> = match self.task_hidden_widths.len() {
            0 => Vec::new(),
            1 => vec![BOTTLENECK.into()],
            n => (1..=n).map(|k| format!("{BOTTLENECK}{k}")).collect(),
        };
        names.push(CLASSIFIER.into());
        names
    }
}

/// How task-specific weights are initialized across tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TaskInit {
    /// Independent draws per task.
    #[default]
    Independent,
    /// Every task starts from the same draw.
    Shared,
}

/// Shared trunk followed by the task-specific stack.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiTaskNet {
    trunk: Vec<DenseLayer>,
    stack: TaskLayerStack,
    input_dim: usize,
}

/// Offsets of every parameter block inside a flattened parameter vector.
///
/// Order: trunk layers (weight row-major, then bias), then task layers
/// (weight tensor in storage order, then biases task-major).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    trunk: Vec<(usize, usize)>,
    stack: Vec<(usize, usize)>,
    trunk_len: usize,
    total: usize,
}

impl ParamLayout {
    pub fn total(&self) -> usize {
        self.total
    }

    /// Parameters before this offset belong to the shared trunk.
    pub fn trunk_len(&self) -> usize {
        self.trunk_len
    }

    pub fn trunk_weight_offset(&self, layer: usize) -> usize {
        self.trunk[layer].0
    }

    pub fn trunk_bias_offset(&self, layer: usize) -> usize {
        self.trunk[layer].1
    }

    pub fn task_weight_offset(&self, layer: usize) -> usize {
        self.stack[layer].0
    }

    pub fn task_bias_offset(&self, layer: usize) -> usize {
        self.stack[layer].1
    }
}

/// Gradient with the same shape as the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub data: Vec<f64>,
    pub layout: ParamLayout,
}

impl Gradient {
    pub fn zeros(layout: ParamLayout) -> Self {
        Self {
            data: vec![0.0; layout.total],
            layout,
        }
    }

    /// Gradient of a task-specific layer's full weight tensor.
    pub fn task_weights(&self, net: &MultiTaskNet, layer: usize) -> Tensor3 {
        let dims = net.stack.layers[layer].weights.dims();
        let off = self.layout.stack[layer].0;
        let len = dims.iter().product::<usize>();
        Tensor3::new(dims, self.data[off..off + len].to_vec()).expect("layout matches net")
    }

    pub fn trunk_weight(&self, net: &MultiTaskNet, layer: usize) -> DenseMatrix {
        let l = &net.trunk[layer];
        let off = self.layout.trunk[layer].0;
        let len = l.in_dim() * l.out_dim();
        DenseMatrix::new(l.in_dim(), l.out_dim(), self.data[off..off + len].to_vec())
            .expect("layout matches net")
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let mut e: Vec<f64> = logits.iter().map(|&z| libm::exp(z - m)).collect();
    let s: f64 = e.iter().sum();
    e.iter_mut().for_each(|v| *v /= s);
    e
}

pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let m = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    m + libm::log(logits.iter().map(|&z| libm::exp(z - m)).sum::<f64>())
}

/// `−ln softmax(logits)[label]`, evaluated through log-sum-exp.
pub fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    (log_sum_exp(logits) - logits[label]).max(0.0)
}

struct Trace {
    /// Input to every layer (trunk then task layers), plus the final logits.
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of every layer.
    pre: Vec<Vec<f64>>,
}

impl MultiTaskNet {
    pub fn from_parts(trunk: Vec<DenseLayer>, stack: TaskLayerStack, input_dim: usize) -> Result<Self> {
        let mut width = input_dim;
        for (k, l) in trunk.iter().enumerate() {
            if l.in_dim() != width {
                return Err(arg_err!(
                    "trunk layer {k} expects {} inputs, previous width is {width}",
                    l.in_dim()
                ));
            }
            if l.activation == Activation::Softmax {
                return Err(arg_err!("trunk layer {k} cannot use softmax"));
            }
            width = l.out_dim();
        }
        if stack.layers[0].in_dim() != width {
            return Err(arg_err!(
                "first task layer expects {} inputs, trunk outputs {width}",
                stack.layers[0].in_dim()
            ));
        }
        let last = stack.layers.len() - 1;
        for (k, l) in stack.layers.iter().enumerate() {
            let ok = if k == last {
                l.activation == Activation::Softmax
            } else {
                l.activation != Activation::Softmax
            };
            if !ok {
                return Err(arg_err!(
                    "only the last task layer may (and must) use softmax, layer '{}' uses {}",
                    l.name,
                    l.activation.name()
                ));
            }
        }
        Ok(Self {
            trunk,
            stack,
            input_dim,
        })
    }

    /// Random initialization: weights `N(0, g²/fan_in)` with `g² = 2` for
    /// ReLU layers and `1` for the classifier; biases zero.
    pub fn random<R: Rng + ?Sized>(arch: &Architecture, init: TaskInit, rng: &mut R) -> Result<Self> {
        if arch.input_dim == 0 || arch.num_classes < 2 || arch.num_tasks == 0 {
            return Err(arg_err!(
                "need input_dim > 0, at least 2 classes and 1 task, got {arch:?}"
            ));
        }
        if arch.trunk_widths.iter().chain(&arch.task_hidden_widths).any(|&w| w == 0) {
            return Err(arg_err!("layer widths must be positive"));
        }
        let mut width = arch.input_dim;
        let mut trunk = Vec::new();
        for &w in &arch.trunk_widths {
            let sd = libm::sqrt(2.0 / width as f64);
            let weight = DenseMatrix::from_fn(width, w, |_, _| sd * rng.sample::<f64, _>(StandardNormal));
            trunk.push(DenseLayer::new(weight, vec![0.0; w], Activation::Relu)?);
            width = w;
        }
        let names = arch.task_layer_names();
        let widths = arch
            .task_hidden_widths
            .iter()
            .copied()
            .chain(core::iter::once(arch.num_classes));
        let tasks = arch.num_tasks;
        let mut layers = Vec::new();
        for (name, out) in names.into_iter().zip(widths) {
            let classifier = name == CLASSIFIER;
            let gain = if classifier { 1.0 } else { 2.0 };
            let sd = libm::sqrt(gain / width as f64);
            let weights = match init {
                TaskInit::Independent => {
                    Tensor3::from_fn([width, out, tasks], |_, _, _| sd * rng.sample::<f64, _>(StandardNormal))?
                }
                TaskInit::Shared => {
                    let base = DenseMatrix::from_fn(width, out, |_, _| sd * rng.sample::<f64, _>(StandardNormal));
                    Tensor3::from_fn([width, out, tasks], |i, j, _| base[(i, j)])?
                }
            };
            layers.push(TaskLayer {
                name,
                weights,
                biases: vec![vec![0.0; out]; tasks],
                activation: if classifier {
                    Activation::Softmax
                } else {
                    Activation::Relu
                },
            });
            width = out;
        }
        Self::from_parts(trunk, TaskLayerStack::new(layers)?, arch.input_dim)
    }

    pub fn trunk(&self) -> &[DenseLayer] {
        &self.trunk
    }

    pub fn stack(&self) -> &TaskLayerStack {
        &self.stack
    }

    pub fn stack_mut(&mut self) -> &mut TaskLayerStack {
        &mut self.stack
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_tasks(&self) -> usize {
        self.stack.num_tasks()
    }

    pub fn num_classes(&self) -> usize {
        self.stack.layers.last().map_or(0, TaskLayer::out_dim)
    }

    fn check(&self, task: usize, x: &[f64]) -> Result<()> {
        if task >= self.num_tasks() {
            return Err(arg_err!("task {task} out of range for {} tasks", self.num_tasks()));
        }
        if x.len() != self.input_dim {
            return Err(arg_err!(
                "input has length {}, network expects {}",
                x.len(),
                self.input_dim
            ));
        }
        Ok(())
    }

    fn trace(&self, task: usize, x: &[f64]) -> Trace {
        let n = self.trunk.len() + self.stack.layers.len();
        let mut inputs = Vec::with_capacity(n + 1);
        let mut pre = Vec::with_capacity(n);
        let mut h = x.to_vec();
        for l in &self.trunk {
            let z = l.pre_activation(&h);
            inputs.push(h);
            h = z.clone();
            l.activation.apply_hidden(&mut h);
            pre.push(z);
        }
        for l in &self.stack.layers {
            let z = l.pre_activation(task, &h);
            inputs.push(h);
            h = z.clone();
            l.activation.apply_hidden(&mut h);
            pre.push(z);
        }
        inputs.push(h);
        Trace { inputs, pre }
    }

    /// Classifier logits for `task`.
    pub fn logits(&self, task: usize, x: &[f64]) -> Result<Vec<f64>> {
        self.check(task, x)?;
        Ok(self.trace(task, x).inputs.pop().unwrap_or_default())
    }

    /// Class probabilities for `task`.
    pub fn forward(&self, task: usize, x: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(task, x)?))
    }

    pub fn predict(&self, task: usize, x: &[f64]) -> Result<usize> {
        let z = self.logits(task, x)?;
        Ok(z.iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (k, &v)| if v > best.1 { (k, v) } else { best })
            .0)
    }

    pub fn loss(&self, task: usize, x: &[f64], label: usize) -> Result<f64> {
        if label >= self.num_classes() {
            return Err(arg_err!("label {label} out of range for {} classes", self.num_classes()));
        }
        Ok(cross_entropy(&self.logits(task, x)?, label))
    }

    pub fn layout(&self) -> ParamLayout {
        let mut off = 0;
        let mut trunk = Vec::new();
        for l in &self.trunk {
            let w = off;
            off += l.in_dim() * l.out_dim();
            trunk.push((w, off));
            off += l.out_dim();
        }
        let trunk_len = off;
        let mut stack = Vec::new();
        for l in &self.stack.layers {
            let w = off;
            off += l.weights.len();
            stack.push((w, off));
            off += l.num_tasks() * l.out_dim();
        }
        ParamLayout {
            trunk,
            stack,
            trunk_len,
            total: off,
        }
    }

    /// Visits every parameter in [`ParamLayout`] order.
    pub fn visit_params_mut(&mut self, mut f: impl FnMut(usize, &mut f64)) {
        let mut k = 0;
        let mut visit = |v: &mut f64| {
            f(k, v);
            k += 1;
        };
        for l in &mut self.trunk {
            l.weight.as_mut_slice().iter_mut().for_each(&mut visit);
            l.bias.iter_mut().for_each(&mut visit);
        }
        for l in &mut self.stack.layers {
            l.weights.as_mut_slice().iter_mut().for_each(&mut visit);
            l.biases.iter_mut().flatten().for_each(&mut visit);
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.layout().total);
        for l in &self.trunk {
            out.extend_from_slice(l.weight.as_slice());
            out.extend_from_slice(&l.bias);
        }
        for l in &self.stack.layers {
            out.extend_from_slice(l.weights.as_slice());
            l.biases.iter().for_each(|b| out.extend_from_slice(b));
        }
        out
    }

    pub fn unflatten(&mut self, params: &[f64]) -> Result<()> {
        let total = self.layout().total;
        if params.len() != total {
            return Err(arg_err!("expected {total} parameters, got {}", params.len()));
        }
        self.visit_params_mut(|k, v| *v = params[k]);
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.layout().total
    }

    /// Adds `scale ×` the gradient of the cross-entropy of one example to
    /// `grad` and returns the loss. Parameters of other tasks are untouched.
    pub fn backward_into(
        &self,
        task: usize,
        x: &[f64],
        label: usize,
        scale: f64,
        grad: &mut Gradient,
    ) -> Result<f64> {
        self.check(task, x)?;
        if label >= self.num_classes() {
            return Err(arg_err!("label {label} out of range for {} classes", self.num_classes()));
        }
        let tr = self.trace(task, x);
        let logits = tr.inputs.last().expect("trace has output");
        let loss = cross_entropy(logits, label);
        let mut delta = softmax(logits);
        delta[label] -= 1.0;

        let nt = self.trunk.len();
        let layout = &grad.layout;
        let g = &mut grad.data;
        for (li, l) in self.stack.layers.iter().enumerate().rev() {
            let k = nt + li;
            let h = &tr.inputs[k];
            let [din, dout, tasks] = l.weights.dims();
            let (woff, boff) = layout.stack[li];
            for i in 0..din {
                let hi = h[i] * scale;
                if hi == 0.0 {
                    continue;
                }
                let base = woff + i * dout * tasks + task;
                for (j, dj) in delta.iter().enumerate() {
                    g[base + j * tasks] += hi * dj;
                }
            }
            for (j, dj) in delta.iter().enumerate() {
                g[boff + task * dout + j] += scale * dj;
            }
            if k == 0 {
                break;
            }
            let w = l.weights.as_slice();
            let mut prev = vec![0.0; din];
            for (i, p) in prev.iter_mut().enumerate() {
                let base = i * dout * tasks + task;
                *p = delta.iter().enumerate().map(|(j, dj)| w[base + j * tasks] * dj).sum();
            }
            self.activation_of(k - 1).backprop_hidden(&tr.pre[k - 1], &mut prev);
            delta = prev;
        }
        for (li, l) in self.trunk.iter().enumerate().rev() {
            let h = &tr.inputs[li];
            let (woff, boff) = layout.trunk[li];
            let dout = l.out_dim();
            for (i, &hi) in h.iter().enumerate() {
                let hs = hi * scale;
                if hs == 0.0 {
                    continue;
                }
                for (j, dj) in delta.iter().enumerate() {
                    g[woff + i * dout + j] += hs * dj;
                }
            }
            for (j, dj) in delta.iter().enumerate() {
                g[boff + j] += scale * dj;
            }
            if li == 0 {
                break;
            }
            let mut prev = l.weight.matvec(&delta)?;
            self.trunk[li - 1].activation.backprop_hidden(&tr.pre[li - 1], &mut prev);
            delta = prev;
        }
        Ok(loss)
    }

    fn activation_of(&self, k: usize) -> Activation {
        if k < self.trunk.len() {
            self.trunk[k].activation
        } else {
            self.stack.layers[k - self.trunk.len()].activation
        }
    }

    /// Exact gradient of one example's cross-entropy.
    pub fn backward(&self, task: usize, x: &[f64], label: usize) -> Result<(f64, Gradient)> {
        let mut g = Gradient::zeros(self.layout());
        let loss = self.backward_into(task, x, label, 1.0, &mut g)?;
        Ok((loss, g))
    }
}

fn check_priors(stack: &TaskLayerStack, priors: &[KronCovariance]) -> Result<()> {
    if priors.len() != stack.len() {
        return Err(arg_err!(
            "{} priors given for {} task-specific layers",
            priors.len(),
            stack.len()
        ));
    }
    for (l, p) in stack.layers.iter().zip(priors) {
        if p.dims() != l.weights.dims() {
            return Err(arg_err!(
                "prior dims {:?} do not match layer '{}' dims {:?}",
                p.dims(),
                l.name,
                l.weights.dims()
            ));
        }
    }
    Ok(())
}

/// `½ Σℓ (vec(Wℓ)ᵀ Σ_{1:3,ℓ}⁻¹ vec(Wℓ) − Dℓⁱ Dℓᵒ ln|Σℓ|)` where `Σℓ` is the
/// task (mode-3) factor of layer `ℓ`'s prior.
pub fn prior_penalty(stack: &TaskLayerStack, priors: &[KronCovariance]) -> Result<f64> {
    check_priors(stack, priors)?;
    let mut total = 0.0;
    for (l, p) in stack.layers.iter().zip(priors) {
        let q = p.quadratic_form(&l.weights)?;
        let cells = (l.in_dim() * l.out_dim()) as f64;
        total += 0.5 * (q - cells * p.factor(3).logdet());
    }
    Ok(total)
}

/// `Σ_{1:3,ℓ}⁻¹ vec(Wℓ)` folded back to a tensor; slice `t` is the prior
/// gradient for task `t`.
pub fn prior_gradient_tensor(stack: &TaskLayerStack, priors: &[KronCovariance], layer: usize) -> Result<Tensor3> {
    check_priors(stack, priors)?;
    let l = stack
        .layers
        .get(layer)
        .ok_or_else(|| arg_err!("layer {layer} out of range"))?;
    priors[layer].solve(&l.weights)
}

/// Gradient of the prior's quadratic term with respect to `W_{t,ℓ}`.
pub fn prior_gradient(
    stack: &TaskLayerStack,
    priors: &[KronCovariance],
    task: usize,
    layer: usize,
) -> Result<DenseMatrix> {
    if task >= stack.num_tasks() {
        return Err(arg_err!("task {task} out of range"));
    }
    prior_gradient_tensor(stack, priors, layer)?.slice3(task)
}
