//! The `drn` command-line tool.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 no convergence,
//! 3 numeric failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};
use drn_core::data::{split, MultiTaskDataset, SplitSpec};
use drn_core::FlipFlopOptions;

use crate::clock::WallClock;
use crate::config::{DataSource, ExperimentConfig};
use crate::dataset::{load_manifest, read_json, write_dataset, write_json};
use crate::error::{exit, Error, Result};
use crate::experiment::{load_data, run as run_experiment};
use crate::model::Checkpoint;
use crate::relationship::{file_name, Relationship};
use crate::report::{report_csv, timings_csv};
use crate::tnd_fit::{fit, TndSamples};

pub const MODEL_FILE: &str = "model.json";
pub const REPORT_FILE: &str = "report.csv";
pub const TIMINGS_FILE: &str = "timings.csv";

#[derive(Debug, Parser)]
#[command(name = "drn", version, about = "Tensor normal fitting and multi-task relationship networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a tensor normal distribution to samples by flip-flop maximum likelihood.
    TndFit {
        /// JSON file {"dims": [d1, d2, d3], "samples": [[...], ...]}.
        #[arg(long)]
        input: PathBuf,
        /// Write the fit here instead of standard output.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 200)]
        max_iter: usize,
    },
    /// Train a model from an experiment config.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides train.seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print per-task and mean accuracy of a checkpoint as CSV.
    Eval {
        #[arg(long)]
        model: PathBuf,
        /// Dataset manifest.
        #[arg(long)]
        data: PathBuf,
        /// all | train:FRACTION[:SEED][:stratified] | test:FRACTION[:SEED][:stratified] | head:N | tail:N
        #[arg(long, default_value = "all")]
        split: EvalSplit,
    },
    /// Print a learned task correlation matrix.
    ExportRelationship {
        #[arg(long)]
        model_dir: PathBuf,
        #[arg(long)]
        layer: String,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Write a config's synthetic dataset as per-task CSV files plus a manifest.
    GenSynthetic {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Which examples of each task `eval` scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalSplit {
    All,
    Train(SplitSpec),
    Test(SplitSpec),
    /// First `n` examples of each task.
    Head(usize),
    /// Everything after the first `n` examples of each task.
    Tail(usize),
}

impl FromStr for EvalSplit {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let count = |p: &[&str]| -> std::result::Result<usize, String> {
            match p {
                [n] => n.parse().map_err(|_| format!("'{n}' is not a count")),
                _ => Err(format!("expected one count in '{s}'")),
            }
        };
        let spec = |p: &[&str]| -> std::result::Result<SplitSpec, String> {
            let mut rest = p;
            let stratified = rest.last() == Some(&"stratified");
            if stratified {
                rest = &rest[..rest.len() - 1];
            }
            let (f, seed) = match rest {
                [f] => (f, "0"),
                [f, seed] => (f, *seed),
                _ => return Err(format!("cannot parse split '{s}'")),
            };
            Ok(SplitSpec {
                train_fraction: f.parse().map_err(|_| format!("'{f}' is not a fraction"))?,
                stratified,
                seed: seed.parse().map_err(|_| format!("'{seed}' is not a seed"))?,
            })
        };
        match parts.as_slice() {
            ["all"] => Ok(EvalSplit::All),
            ["train", rest @ ..] => spec(rest).map(EvalSplit::Train),
            ["test", rest @ ..] => spec(rest).map(EvalSplit::Test),
            ["head", rest @ ..] => count(rest).map(EvalSplit::Head),
            ["tail", rest @ ..] => count(rest).map(EvalSplit::Tail),
            _ => Err(format!("unknown split '{s}'")),
        }
    }
}

impl EvalSplit {
    pub fn select(&self, ds: MultiTaskDataset) -> Result<MultiTaskDataset> {
        Ok(match self {
            EvalSplit::All => ds,
            EvalSplit::Train(s) => split(&ds, s)?.0,
            EvalSplit::Test(s) => split(&ds, s)?.1,
            EvalSplit::Head(n) => ds.head_split(*n)?.0,
            EvalSplit::Tail(n) => ds.head_split(*n)?.1,
        })
    }
}

/// Error with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: e.exit_code(),
            message: e.to_string(),
        }
    }
}

impl From<drn_core::Error> for Failure {
    fn from(e: drn_core::Error) -> Self {
        Error::from(e).into()
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: exit::USAGE,
        message: message.into(),
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
    .into()
}

/// Parses `args` (including the program name), runs the command and returns
/// its exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return if e.use_stderr() { exit::USAGE } else { exit::OK };
        }
    };
    match execute(cli.command, stdout) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

fn execute(command: Command, stdout: &mut dyn Write) -> std::result::Result<u8, Failure> {
    match command {
        Command::TndFit {
            input,
            output,
            tol,
            max_iter,
        } => cmd_tnd_fit(&input, output.as_deref(), FlipFlopOptions { tol, max_iter }, stdout),
        Command::Train { config, seed, out } => cmd_train(&config, seed, &out, stdout),
        Command::Eval { model, data, split } => cmd_eval(&model, &data, split, stdout),
        Command::ExportRelationship {
            model_dir,
            layer,
            format,
        } => cmd_export_relationship(&model_dir, &layer, format, stdout),
        Command::GenSynthetic { config, out } => cmd_gen_synthetic(&config, &out, stdout),
    }
}

fn emit(stdout: &mut dyn Write, text: &str) -> std::result::Result<(), Failure> {
    stdout
        .write_all(text.as_bytes())
        .map_err(|e| usage(format!("writing output: {e}")))
}

fn cmd_tnd_fit(
    input: &Path,
    output: Option<&Path>,
    opts: FlipFlopOptions,
    stdout: &mut dyn Write,
) -> std::result::Result<u8, Failure> {
    let samples: TndSamples = read_json(input)?;
    let result = fit(&samples, opts)?;
    match output {
        Some(path) => write_json(path, &result)?,
        None => {
            let mut text = serde_json::to_string_pretty(&result).expect("fit serializes");
            text.push('\n');
            emit(stdout, &text)?;
        }
    }
    Ok(if result.converged {
        exit::OK
    } else {
        exit::NOT_CONVERGED
    })
}

fn cmd_train(
    config: &Path,
    seed: Option<u64>,
    out: &Path,
    stdout: &mut dyn Write,
) -> std::result::Result<u8, Failure> {
    let mut cfg = ExperimentConfig::from_file(config)?;
    if let Some(s) = seed {
        cfg.train.seed = s;
    }
    let (train, test) = load_data(&cfg)?;
    let outcome = run_experiment(&cfg, &train, &test, &WallClock::new())?;
    fs::create_dir_all(out).map_err(|e| io_failure(out, e))?;
    outcome.checkpoint.write(&out.join(MODEL_FILE))?;
    let write = |name: &str, text: String| {
        let path = out.join(name);
        fs::write(&path, text).map_err(|e| io_failure(&path, e))
    };
    write(REPORT_FILE, report_csv(&outcome.report))?;
    write(TIMINGS_FILE, timings_csv(&outcome.report))?;
    for r in &outcome.relationships {
        r.write(&out.join(file_name(&r.layer)))?;
    }
    if let Some(last) = outcome.report.last() {
        let acc = last.test_accuracy.as_ref().unwrap_or(&last.train_accuracy);
        let which = if last.test_accuracy.is_some() { "test" } else { "train" };
        let mean = acc.iter().sum::<f64>() / acc.len() as f64;
        emit(stdout, &format!("epochs {} mean {which} accuracy {mean:.4}\n", last.epoch))?;
    }
    Ok(exit::OK)
}

fn cmd_eval(
    model: &Path,
    data: &Path,
    which: EvalSplit,
    stdout: &mut dyn Write,
) -> std::result::Result<u8, Failure> {
    let ckpt = Checkpoint::read(model)?;
    let ds = which.select(load_manifest(data)?)?;
    if let Some(t) = ds.tasks().iter().position(|t| t.is_empty()) {
        return Err(usage(format!(
            "task '{}' has no examples in the selected split",
            ds.task_names()[t]
        )));
    }
    if ds.task_names() != ckpt.task_names.as_slice() {
        return Err(usage(format!(
            "data tasks {:?} do not match model tasks {:?}",
            ds.task_names(),
            ckpt.task_names
        )));
    }
    let acc = ckpt.model.accuracy(&ds)?;
    let mut text = String::from("task,accuracy\n");
    for (name, a) in ds.task_names().iter().zip(&acc) {
        text.push_str(&format!("{name},{a:?}\n"));
    }
    let mean = acc.iter().sum::<f64>() / acc.len() as f64;
    text.push_str(&format!("mean,{mean:?}\n"));
    emit(stdout, &text)?;
    Ok(exit::OK)
}

fn cmd_export_relationship(
    model_dir: &Path,
    layer: &str,
    format: Format,
    stdout: &mut dyn Write,
) -> std::result::Result<u8, Failure> {
    let path = model_dir.join(file_name(layer));
    if !path.is_file() {
        return Err(usage(format!("no relationship for layer '{layer}' in {}", model_dir.display())));
    }
    let r = Relationship::read(&path)?;
    let text = match format {
        Format::Json => r.export_json(),
        Format::Csv => r.export_csv(),
    };
    emit(stdout, &text)?;
    Ok(exit::OK)
}

fn cmd_gen_synthetic(config: &Path, out: &Path, stdout: &mut dyn Write) -> std::result::Result<u8, Failure> {
    let cfg = ExperimentConfig::from_file(config)?;
    let DataSource::Synthetic(s) = &cfg.data else {
        return Err(usage("config has no synthetic data source"));
    };
    let (ds, _) = drn_core::data::generate_synthetic(&s.spec()?)?;
    let manifest = write_dataset(&ds, out)?;
    emit(stdout, &format!("{}\n", manifest.display()))?;
    Ok(exit::OK)
}
