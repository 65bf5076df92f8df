//! Per-task CSV files and the dataset manifest.
//!
//! Each CSV row holds `D` decimal features followed by an integer label in
//! `0..C`. A header row is allowed only when requested.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use drn_core::data::{MultiTaskDataset, TaskData};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Reads one task file. `feature_dim` is inferred from the first row when
/// `None`.
pub fn read_task_csv(
    path: &Path,
    feature_dim: Option<usize>,
    num_classes: usize,
    header: bool,
) -> Result<TaskData> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut dim = feature_dim;
    let mut task = TaskData {
        features: Vec::new(),
        labels: Vec::new(),
    };
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() < 2 {
            return Err(parse_err(path, line, "expected at least one feature and a label"));
        }
        let d = *dim.get_or_insert(record.len() - 1);
        if record.len() != d + 1 {
            return Err(parse_err(
                path,
                line,
                format!("expected {} columns, found {}", d + 1, record.len()),
            ));
        }
        let mut x = Vec::with_capacity(d);
        for (col, cell) in record.iter().take(d).enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                parse_err(path, line, format!("column {}: '{cell}' is not a number", col + 1))
            })?;
            if !v.is_finite() {
                return Err(parse_err(path, line, format!("column {}: non-finite value", col + 1)));
            }
            x.push(v);
        }
        let cell = &record[d];
        let y: usize = cell
            .parse()
            .map_err(|_| parse_err(path, line, format!("label '{cell}' is not a class index")))?;
        if y >= num_classes {
            return Err(parse_err(
                path,
                line,
                format!("label {y} out of range for {num_classes} classes"),
            ));
        }
        task.features.push(x);
        task.labels.push(y);
    }
    Ok(task)
}

/// Loads one CSV file per task, in the order given.
pub fn load_csv(
    paths: &[PathBuf],
    task_names: Vec<String>,
    feature_dim: Option<usize>,
    num_classes: usize,
    header: bool,
) -> Result<MultiTaskDataset> {
    let mut dim = feature_dim;
    let mut tasks = Vec::with_capacity(paths.len());
    for path in paths {
        let task = read_task_csv(path, dim, num_classes, header)?;
        if dim.is_none() {
            dim = task.features.first().map(Vec::len);
        }
        tasks.push(task);
    }
    let dim = dim.ok_or_else(|| Error::Config("all task files are empty".into()))?;
    Ok(MultiTaskDataset::new(task_names, tasks, dim, num_classes)?)
}

pub fn write_task_csv(task: &TaskData, path: &Path) -> Result<()> {
    let mut out = String::new();
    for (x, y) in task.features.iter().zip(&task.labels) {
        for v in x {
            out.push_str(&fmt_f64(*v));
            out.push(',');
        }
        out.push_str(&y.to_string());
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Task names, per-task CSV paths (relative to the manifest) and shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub task_names: Vec<String>,
    pub paths: Vec<PathBuf>,
    pub feature_dim: usize,
    pub num_classes: usize,
    #[serde(default)]
    pub header: bool,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        if m.task_names.len() != m.paths.len() {
            return Err(Error::Json {
                path: path.to_path_buf(),
                message: format!("{} task names for {} paths", m.task_names.len(), m.paths.len()),
            });
        }
        Ok(m)
    }

    pub fn load(&self, base_dir: &Path) -> Result<MultiTaskDataset> {
        let paths: Vec<PathBuf> = self.paths.iter().map(|p| base_dir.join(p)).collect();
        load_csv(
            &paths,
            self.task_names.clone(),
            Some(self.feature_dim),
            self.num_classes,
            self.header,
        )
    }
}

/// Reads a manifest and the task files it lists.
pub fn load_manifest(path: &Path) -> Result<MultiTaskDataset> {
    let base = path.parent().unwrap_or(Path::new("."));
    Manifest::read(path)?.load(base)
}

/// Writes `<task>.csv` per task and `manifest.json` into `dir`.
pub fn write_dataset(ds: &MultiTaskDataset, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for (name, task) in ds.task_names().iter().zip(ds.tasks()) {
        let file = PathBuf::from(format!("{name}.csv"));
        write_task_csv(task, &dir.join(&file))?;
        paths.push(file);
    }
    let manifest = Manifest {
        task_names: ds.task_names().to_vec(),
        paths,
        feature_dim: ds.feature_dim(),
        num_classes: ds.num_classes(),
        header: false,
    };
    let path = dir.join("manifest.json");
    write_json(&path, &manifest)?;
    Ok(path)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    text.push('\n');
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}
