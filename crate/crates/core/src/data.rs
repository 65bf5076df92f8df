//! Multi-task datasets, seeded train/test splits and a synthetic generator
//! whose tasks share a known task covariance.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{arg_err, Error, Result};
use crate::linalg::SpdFactor;
use crate::matrix::DenseMatrix;
use crate::net::softmax;
use crate::tensor::Tensor3;
use crate::tnd::{KronCovariance, TensorNormal};

/// Examples of a single task: one feature row per example.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskData {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl TaskData {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn select(&self, idx: &[usize]) -> Self {
        Self {
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiTaskDataset {
    task_names: Vec<String>,
    tasks: Vec<TaskData>,
    feature_dim: usize,
    num_classes: usize,
}

impl MultiTaskDataset {
    /// Validates shapes and labels. Tasks may be empty (a test fold can be);
    /// training requires every task to be nonempty.
    pub fn new(
        task_names: Vec<String>,
        tasks: Vec<TaskData>,
        feature_dim: usize,
        num_classes: usize,
    ) -> Result<Self> {
        if tasks.is_empty() || task_names.len() != tasks.len() {
            return Err(arg_err!(
                "{} task names for {} tasks",
                task_names.len(),
                tasks.len()
            ));
        }
        if feature_dim == 0 || num_classes == 0 {
            return Err(arg_err!("feature dimension and class count must be positive"));
        }
        for (name, t) in task_names.iter().zip(&tasks) {
            if t.features.len() != t.labels.len() {
                return Err(arg_err!("task '{name}' has mismatched features and labels"));
            }
            if let Some(k) = t.features.iter().position(|r| r.len() != feature_dim) {
                return Err(arg_err!(
                    "task '{name}' example {k} has {} features, expected {feature_dim}",
                    t.features[k].len()
                ));
            }
            if let Some(k) = t.labels.iter().position(|&y| y >= num_classes) {
                return Err(arg_err!(
                    "task '{name}' example {k} has label {} but there are {num_classes} classes",
                    t.labels[k]
                ));
            }
        }
        Ok(Self {
            task_names,
            tasks,
            feature_dim,
            num_classes,
        })
    }

    pub fn task_names(&self) -> &[String] {
        &self.task_names
    }

    pub fn tasks(&self) -> &[TaskData] {
        &self.tasks
    }

    pub fn task(&self, t: usize) -> &TaskData {
        &self.tasks[t]
    }

    pub fn num_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// `N = Σt Nt`.
    pub fn total_len(&self) -> usize {
        self.tasks.iter().map(TaskData::len).sum()
    }

    pub fn task_sizes(&self) -> Vec<usize> {
        self.tasks.iter().map(TaskData::len).collect()
    }

    /// First `n_train` examples of every task versus the rest.
    pub fn head_split(&self, n_train: usize) -> Result<(Self, Self)> {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (name, t) in self.task_names.iter().zip(&self.tasks) {
            if n_train > t.len() {
                return Err(Error::Split(format!(
                    "task '{name}' has {} examples, cannot take {n_train}",
                    t.len()
                )));
            }
            let idx: Vec<usize> = (0..t.len()).collect();
            train.push(t.select(&idx[..n_train]));
            test.push(t.select(&idx[n_train..]));
        }
        Ok((self.with_tasks(train), self.with_tasks(test)))
    }

    fn with_tasks(&self, tasks: Vec<TaskData>) -> Self {
        Self {
            task_names: self.task_names.clone(),
            tasks,
            feature_dim: self.feature_dim,
            num_classes: self.num_classes,
        }
    }
}

/// Per-task random train/test split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    /// Fraction of each task used for training, in `(0, 1)`.
    pub train_fraction: f64,
    /// Keep per-class proportions within each task.
    pub stratified: bool,
    pub seed: u64,
}

fn round_half_up(x: f64) -> usize {
    libm::floor(x + 0.5) as usize
}

/// Splits every task independently by seeded sampling without replacement.
///
/// Without stratification each task contributes `round(f·Nt)` training
/// examples. With stratification each present class `c` contributes
/// `max(1, round(f·n_c))` and must keep at least one test example.
pub fn split(ds: &MultiTaskDataset, spec: &SplitSpec) -> Result<(MultiTaskDataset, MultiTaskDataset)> {
    let f = spec.train_fraction;
    if !(f > 0.0 && f < 1.0) {
        return Err(arg_err!("train fraction must lie in (0, 1), got {f}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train = Vec::with_capacity(ds.num_tasks());
    let mut test = Vec::with_capacity(ds.num_tasks());
    for (name, t) in ds.task_names.iter().zip(&ds.tasks) {
        let mut train_idx = Vec::new();
        let mut test_idx = Vec::new();
        if spec.stratified {
            for c in 0..ds.num_classes {
                let mut idx: Vec<usize> = (0..t.len()).filter(|&i| t.labels[i] == c).collect();
                if idx.is_empty() {
                    continue;
                }
                let k = round_half_up(f * idx.len() as f64).max(1);
                if k >= idx.len() {
                    return Err(Error::Split(format!(
                        "task '{name}' class {c} has {} examples, too few to stratify at fraction {f}",
                        idx.len()
                    )));
                }
                idx.shuffle(&mut rng);
                train_idx.extend_from_slice(&idx[..k]);
                test_idx.extend_from_slice(&idx[k..]);
            }
        } else {
            let n = t.len();
            if (n as f64) * f < 1.0 {
                return Err(Error::Split(format!(
                    "task '{name}' has {n} examples, fewer than 1/{f}"
                )));
            }
            let k = round_half_up(f * n as f64).clamp(1, n);
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            train_idx.extend_from_slice(&idx[..k]);
            test_idx.extend_from_slice(&idx[k..]);
        }
        train_idx.sort_unstable();
        test_idx.sort_unstable();
        train.push(t.select(&train_idx));
        test.push(t.select(&test_idx));
    }
    Ok((ds.with_tasks(train), ds.with_tasks(test)))
}

/// `k` seeded folds per task for cross-validation: fold `i` is the test part
/// of split `i`; every example lands in exactly one test fold.
pub fn k_fold(ds: &MultiTaskDataset, k: usize, seed: u64) -> Result<Vec<(MultiTaskDataset, MultiTaskDataset)>> {
    if k < 2 {
        return Err(arg_err!("need at least 2 folds, got {k}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let perms: Vec<Vec<usize>> = ds
        .tasks
        .iter()
        .map(|t| {
            let mut idx: Vec<usize> = (0..t.len()).collect();
            idx.shuffle(&mut rng);
            idx
        })
        .collect();
    for (name, t) in ds.task_names.iter().zip(&ds.tasks) {
        if t.len() < k {
            return Err(Error::Split(format!("task '{name}' has fewer than {k} examples")));
        }
    }
    Ok((0..k)
        .map(|fold| {
            let mut train = Vec::new();
            let mut test = Vec::new();
            for (t, perm) in ds.tasks.iter().zip(&perms) {
                let (mut tr, mut te): (Vec<usize>, Vec<usize>) =
                    (0..perm.len()).partition(|&p| p % k != fold);
                tr.iter_mut().for_each(|p| *p = perm[*p]);
                te.iter_mut().for_each(|p| *p = perm[*p]);
                tr.sort_unstable();
                te.sort_unstable();
                train.push(t.select(&tr));
                test.push(t.select(&te));
            }
            (ds.with_tasks(train), ds.with_tasks(test))
        })
        .collect())
}

/// Parameters of the synthetic related-tasks generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub num_tasks: usize,
    pub feature_dim: usize,
    pub num_classes: usize,
    pub samples_per_task: usize,
    /// Ground-truth task covariance `Ω`, `T × T` SPD.
    pub task_covariance: DenseMatrix,
    /// Temperature of the label softmax; smaller is less noisy.
    pub noise_scale: f64,
    pub seed: u64,
}

/// `T × T` correlation matrix: tasks `0..related` share correlation `rho`,
/// all other pairs are uncorrelated.
pub fn block_correlation(num_tasks: usize, related: usize, rho: f64) -> DenseMatrix {
    DenseMatrix::from_fn(num_tasks, num_tasks, |i, j| {
        if i == j {
            1.0
        } else if i < related && j < related {
            rho
        } else {
            0.0
        }
    })
}

/// Draws ground-truth weights `W* ~ TN(0, I_D, I_C, Ω)` and, for every task,
/// inputs `x ~ N(0, I_D)` with labels sampled from `softmax(W*_tᵀ x / noise)`.
///
/// Returns the dataset and `W*` (`D × C × T`).
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(MultiTaskDataset, Tensor3)> {
    let (t, d, c) = (spec.num_tasks, spec.feature_dim, spec.num_classes);
    if t == 0 || d == 0 || c < 2 || spec.samples_per_task == 0 {
        return Err(arg_err!(
            "synthetic spec needs positive tasks, features, samples and at least 2 classes"
        ));
    }
    if !(spec.noise_scale > 0.0) {
        return Err(arg_err!("noise scale must be positive"));
    }
    if spec.task_covariance.rows() != t || spec.task_covariance.cols() != t {
        return Err(arg_err!("task covariance must be {t}x{t}"));
    }
    let omega = SpdFactor::new(spec.task_covariance.clone())?;
    let prior = TensorNormal::new(
        Tensor3::zeros([d, c, t])?,
        KronCovariance::new([SpdFactor::identity(d), SpdFactor::identity(c), omega]),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let weights = prior.sample(&mut rng);

    let mut tasks = Vec::with_capacity(t);
    for task in 0..t {
        let mut features = Vec::with_capacity(spec.samples_per_task);
        let mut labels = Vec::with_capacity(spec.samples_per_task);
        for _ in 0..spec.samples_per_task {
            let x: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let logits: Vec<f64> = (0..c)
                .map(|k| (0..d).map(|i| weights[(i, k, task)] * x[i]).sum::<f64>() / spec.noise_scale)
                .collect();
            let probs = softmax(&logits);
            let y = WeightedIndex::new(&probs)
                .map_err(|e| Error::Estimation(format!("label distribution: {e}")))?
                .sample(&mut rng);
            features.push(x);
            labels.push(y);
        }
        tasks.push(TaskData { features, labels });
    }
    let names = (1..=t).map(|k| format!("task{k}")).collect();
    Ok((MultiTaskDataset::new(names, tasks, d, c)?, weights))
}
