//! Builds the network for a variant, trains it and collects the outputs.

use drn_core::data::{generate_synthetic, split, MultiTaskDataset};
use drn_core::net::{Architecture, MultiTaskNet};
use drn_core::trainer::{train, Clock, EpochRecord, TrainConfig, TrainReport};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{DataSource, ExperimentConfig, NetworkConfig, Variant};
use crate::dataset::load_manifest;
use crate::error::Result;
use crate::model::{Checkpoint, Model};
use crate::relationship::Relationship;

/// Everything a training run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub checkpoint: Checkpoint,
    pub report: TrainReport,
    /// One per task-specific layer; empty for the single-task baseline.
    pub relationships: Vec<Relationship>,
}

/// Train and test data described by the config.
pub fn load_data(cfg: &ExperimentConfig) -> Result<(MultiTaskDataset, MultiTaskDataset)> {
    match &cfg.data {
        DataSource::Synthetic(s) => {
            let (ds, _) = generate_synthetic(&s.spec()?)?;
            Ok(ds.head_split(s.train_per_task)?)
        }
        DataSource::Manifest(m) => {
            let ds = load_manifest(&m.path)?;
            Ok(split(&ds, &m.split.into())?)
        }
    }
}

pub fn architecture(
    variant: Variant,
    net: &NetworkConfig,
    input_dim: usize,
    num_classes: usize,
    num_tasks: usize,
) -> Architecture {
    let (trunk_widths, task_hidden_widths) = match variant {
        Variant::Drn | Variant::Stl => (net.trunk_widths.clone(), vec![net.bottleneck]),
        Variant::Drn8 => {
            let mut trunk = net.trunk_widths.clone();
            trunk.push(net.bottleneck);
            (trunk, Vec::new())
        }
    };
    Architecture {
        input_dim,
        trunk_widths,
        task_hidden_widths,
        num_classes,
        num_tasks,
    }
}

fn only_task(ds: &MultiTaskDataset, t: usize) -> Result<MultiTaskDataset> {
    Ok(MultiTaskDataset::new(
        vec![ds.task_names()[t].clone()],
        vec![ds.task(t).clone()],
        ds.feature_dim(),
        ds.num_classes(),
    )?)
}

/// Joins per-task reports of independently trained networks epoch by epoch.
fn merge_reports(names: &[String], reports: &[TrainReport]) -> TrainReport {
    let epochs = reports[0].epochs.len();
    let records = (0..epochs)
        .map(|e| {
            let recs: Vec<&EpochRecord> = reports.iter().map(|r| &r.epochs[e]).collect();
            let test = recs
                .iter()
                .map(|r| r.test_accuracy.as_ref().map(|a| a[0]))
                .collect::<Option<Vec<f64>>>();
            EpochRecord {
                epoch: e + 1,
                objective: recs.iter().map(|r| r.objective).sum(),
                mean_batch_loss: recs.iter().map(|r| r.mean_batch_loss).sum::<f64>()
                    / recs.len() as f64,
                train_accuracy: recs.iter().map(|r| r.train_accuracy[0]).collect(),
                test_accuracy: test,
                cov_residual: 0.0,
                sgd_seconds: recs.iter().map(|r| r.sgd_seconds).sum(),
                cov_seconds: recs.iter().map(|r| r.cov_seconds).sum(),
            }
        })
        .collect();
    TrainReport {
        task_names: names.to_vec(),
        epochs: records,
    }
}

/// Trains the configured variant. `test` is evaluated after every epoch when
/// every task has test examples.
pub fn run(
    cfg: &ExperimentConfig,
    train_data: &MultiTaskDataset,
    test_data: &MultiTaskDataset,
    clock: &dyn Clock,
) -> Result<Outcome> {
    let tc = cfg.train.to_train_config();
    let test = test_data.tasks().iter().all(|t| !t.is_empty()).then_some(test_data);
    let (d, c, t) = (train_data.feature_dim(), train_data.num_classes(), train_data.num_tasks());
    let names = train_data.task_names().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let init = cfg.network.task_init.into();
    match cfg.variant {
        Variant::Drn | Variant::Drn8 => {
            let arch = architecture(cfg.variant, &cfg.network, d, c, t);
            let net = MultiTaskNet::random(&arch, init, &mut rng)?;
            let trained = train(net, train_data, test, &tc, clock)?;
            let relationships = (0..trained.cov.len())
                .map(|l| Relationship::from_state(&trained.cov, l, &names))
                .collect::<Result<Vec<_>>>()?;
            Ok(Outcome {
                checkpoint: Checkpoint {
                    variant: cfg.variant,
                    task_names: names,
                    model: Model::Joint(trained.net),
                    covariances: Some(trained.cov),
                },
                report: trained.report,
                relationships,
            })
        }
        Variant::Stl => {
            let arch = architecture(Variant::Stl, &cfg.network, d, c, 1);
            let single = TrainConfig {
                learn_covariances: false,
                ..tc
            };
            let mut nets = Vec::with_capacity(t);
            let mut reports = Vec::with_capacity(t);
            for task in 0..t {
                let tr = only_task(train_data, task)?;
                let te = test.map(|d| only_task(d, task)).transpose()?;
                let net = MultiTaskNet::random(&arch, init, &mut rng)?;
                let trained = train(net, &tr, te.as_ref(), &single, clock)?;
                nets.push(trained.net);
                reports.push(trained.report);
            }
            Ok(Outcome {
                checkpoint: Checkpoint {
                    variant: Variant::Stl,
                    task_names: names.clone(),
                    model: Model::PerTask(nets),
                    covariances: None,
                },
                report: merge_reports(&names, &reports),
                relationships: Vec::new(),
            })
        }
    }
}
