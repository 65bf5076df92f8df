//! Trained models and their JSON checkpoint.

use std::path::Path;

use drn_core::data::MultiTaskDataset;
use drn_core::net::{Activation, DenseLayer, MultiTaskNet, TaskLayer, TaskLayerStack};
use drn_core::trainer::CovarianceState;
use drn_core::{DenseMatrix, KronCovariance, SpdFactor, Tensor3};
use serde::{Deserialize, Serialize};

use crate::config::Variant;
use crate::dataset::{read_json, write_json};
use crate::error::{Error, Result};

const FORMAT: &str = "drn-model";
const VERSION: u32 = 1;

/// One network shared by all tasks, or one network per task.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Joint(MultiTaskNet),
    PerTask(Vec<MultiTaskNet>),
}

impl Model {
    pub fn num_tasks(&self) -> usize {
        match self {
            Model::Joint(net) => net.num_tasks(),
            Model::PerTask(nets) => nets.len(),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Model::Joint(net) => net.input_dim(),
            Model::PerTask(nets) => nets[0].input_dim(),
        }
    }

    pub fn num_classes(&self) -> usize {
        match self {
            Model::Joint(net) => net.num_classes(),
            Model::PerTask(nets) => nets[0].num_classes(),
        }
    }

    pub fn predict(&self, task: usize, x: &[f64]) -> Result<usize> {
        Ok(match self {
            Model::Joint(net) => net.predict(task, x)?,
            Model::PerTask(nets) => {
                let net = nets.get(task).ok_or_else(|| {
                    Error::Config(format!("task {task} out of range for {} tasks", nets.len()))
                })?;
                net.predict(0, x)?
            }
        })
    }

    /// Per-task accuracy; the dataset's shape must match the model.
    pub fn accuracy(&self, data: &MultiTaskDataset) -> Result<Vec<f64>> {
        if data.num_tasks() != self.num_tasks()
            || data.feature_dim() != self.input_dim()
            || data.num_classes() != self.num_classes()
        {
            return Err(Error::Config(format!(
                "data has {} tasks, D={}, C={} but the model expects {} tasks, D={}, C={}",
                data.num_tasks(),
                data.feature_dim(),
                data.num_classes(),
                self.num_tasks(),
                self.input_dim(),
                self.num_classes()
            )));
        }
        data.tasks()
            .iter()
            .enumerate()
            .map(|(t, task)| {
                let mut hits = 0usize;
                for (x, &y) in task.features.iter().zip(&task.labels) {
                    if self.predict(t, x)? == y {
                        hits += 1;
                    }
                }
                Ok(hits as f64 / task.len() as f64)
            })
            .collect()
    }
}

/// A trained model with its task names and learned covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub variant: Variant,
    pub task_names: Vec<String>,
    pub model: Model,
    pub covariances: Option<CovarianceState>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile {
    format: String,
    version: u32,
    variant: Variant,
    task_names: Vec<String>,
    input_dim: usize,
    num_classes: usize,
    networks: Vec<NetFile>,
    covariances: Vec<CovFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetFile {
    trunk: Vec<DenseFile>,
    task_layers: Vec<TaskLayerFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DenseFile {
    activation: String,
    rows: usize,
    cols: usize,
    /// Row-major `rows × cols`, mapping inputs (rows) to outputs (cols).
    weight: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskLayerFile {
    name: String,
    activation: String,
    dims: [usize; 3],
    /// Row-major over (input, output, task).
    weights: Vec<f64>,
    biases: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CovFile {
    layer: String,
    feature: Vec<Vec<f64>>,
    class: Vec<Vec<f64>>,
    task: Vec<Vec<f64>>,
}

pub(crate) fn matrix_rows(m: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DenseMatrix> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::Config("ragged matrix rows".into()));
    }
    Ok(DenseMatrix::new(r, c, rows.concat())?)
}

fn activation(name: &str) -> Result<Activation> {
    Activation::from_name(name).ok_or_else(|| Error::Config(format!("unknown activation '{name}'")))
}

fn net_to_file(net: &MultiTaskNet) -> NetFile {
    NetFile {
        trunk: net
            .trunk()
            .iter()
            .map(|l| DenseFile {
                activation: l.activation.name().into(),
                rows: l.weight.rows(),
                cols: l.weight.cols(),
                weight: l.weight.as_slice().to_vec(),
                bias: l.bias.clone(),
            })
            .collect(),
        task_layers: net
            .stack()
            .layers()
            .iter()
            .map(|l| TaskLayerFile {
                name: l.name.clone(),
                activation: l.activation.name().into(),
                dims: l.weights.dims(),
                weights: l.weights.as_slice().to_vec(),
                biases: l.biases.clone(),
            })
            .collect(),
    }
}

fn net_from_file(f: NetFile, input_dim: usize) -> Result<MultiTaskNet> {
    let trunk = f
        .trunk
        .into_iter()
        .map(|l| {
            DenseLayer::new(
                DenseMatrix::new(l.rows, l.cols, l.weight)?,
                l.bias,
                activation(&l.activation)?,
            )
            .map_err(Error::from)
        })
        .collect::<Result<Vec<_>>>()?;
    let layers = f
        .task_layers
        .into_iter()
        .map(|l| {
            Ok(TaskLayer {
                name: l.name,
                activation: activation(&l.activation)?,
                weights: Tensor3::from_vec(l.dims, l.weights)?,
                biases: l.biases,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MultiTaskNet::from_parts(trunk, TaskLayerStack::new(layers)?, input_dim)?)
}

impl Checkpoint {
    pub fn write(&self, path: &Path) -> Result<()> {
        let networks = match &self.model {
            Model::Joint(net) => vec![net_to_file(net)],
            Model::PerTask(nets) => nets.iter().map(net_to_file).collect(),
        };
        let covariances = self
            .covariances
            .iter()
            .flat_map(|c| {
                c.names().iter().zip(c.priors()).map(|(name, p)| CovFile {
                    layer: name.clone(),
                    feature: matrix_rows(p.factor(1).matrix()),
                    class: matrix_rows(p.factor(2).matrix()),
                    task: matrix_rows(p.factor(3).matrix()),
                })
            })
            .collect();
        let file = CheckpointFile {
            format: FORMAT.into(),
            version: VERSION,
            variant: self.variant,
            task_names: self.task_names.clone(),
            input_dim: self.model.input_dim(),
            num_classes: self.model.num_classes(),
            networks,
            covariances,
        };
        write_json(path, &file)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let f: CheckpointFile = read_json(path)?;
        let bad = |message: String| Error::Json {
            path: path.to_path_buf(),
            message,
        };
        if f.format != FORMAT || f.version != VERSION {
            return Err(bad(format!(
                "expected format '{FORMAT}' version {VERSION}, found '{}' version {}",
                f.format, f.version
            )));
        }
        let mut nets = f
            .networks
            .into_iter()
            .map(|n| net_from_file(n, f.input_dim))
            .collect::<Result<Vec<_>>>()?;
        let model = match (f.variant, nets.len()) {
            (Variant::Stl, n) if n == f.task_names.len() => Model::PerTask(nets),
            (Variant::Drn | Variant::Drn8, 1) => Model::Joint(nets.remove(0)),
            (v, n) => return Err(bad(format!("{n} networks do not fit variant {v:?}"))),
        };
        if model.num_tasks() != f.task_names.len() || model.num_classes() != f.num_classes {
            return Err(bad("network shape disagrees with task names or class count".into()));
        }
        let covariances = if f.covariances.is_empty() {
            None
        } else {
            let names = f.covariances.iter().map(|c| c.layer.clone()).collect();
            let priors = f
                .covariances
                .iter()
                .map(|c| {
                    let factor = |rows: &[Vec<f64>]| -> Result<SpdFactor> {
                        Ok(SpdFactor::new(matrix_from_rows(rows)?)?)
                    };
                    Ok(KronCovariance::new([
                        factor(&c.feature)?,
                        factor(&c.class)?,
                        factor(&c.task)?,
                    ]))
                })
                .collect::<Result<Vec<_>>>()?;
            Some(CovarianceState::from_priors(names, priors)?)
        };
        Ok(Self {
            variant: f.variant,
            task_names: f.task_names,
            model,
            covariances,
        })
    }
}
