//! Learned task relationships of one task-specific layer.

use std::path::Path;

use drn_core::trainer::{extract_relationship, CovarianceState};
use serde::{Deserialize, Serialize};

use crate::dataset::{fmt_f64, read_json, write_json};
use crate::error::{Error, Result};
use crate::model::matrix_rows;

/// Task covariance and its correlation form, rows indexed like `task_names`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Relationship {
    pub layer: String,
    pub task_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<Vec<Vec<f64>>>,
    pub correlation: Vec<Vec<f64>>,
}

pub fn file_name(layer: &str) -> String {
    format!("relationship_{layer}.json")
}

impl Relationship {
    pub fn from_state(cov: &CovarianceState, layer: usize, task_names: &[String]) -> Result<Self> {
        Ok(Self {
            layer: cov.names()[layer].clone(),
            task_names: task_names.to_vec(),
            covariance: Some(matrix_rows(cov.task(layer).matrix())),
            correlation: matrix_rows(&extract_relationship(cov, layer)?),
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let r: Self = read_json(path)?;
        let t = r.task_names.len();
        let square = |m: &Vec<Vec<f64>>| m.len() == t && m.iter().all(|row| row.len() == t);
        if !square(&r.correlation) || !r.covariance.as_ref().is_none_or(square) {
            return Err(Error::Json {
                path: path.to_path_buf(),
                message: format!("matrices must be {t}x{t}"),
            });
        }
        Ok(r)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    /// The correlation matrix alone, as pretty JSON.
    pub fn export_json(&self) -> String {
        let view = Self {
            covariance: None,
            ..self.clone()
        };
        let mut s = serde_json::to_string_pretty(&view).expect("finite matrix serializes");
        s.push('\n');
        s
    }

    /// Header `task,<names…>`, then one row per task.
    pub fn export_csv(&self) -> String {
        let mut s = String::from("task");
        for n in &self.task_names {
            s.push(',');
            s.push_str(n);
        }
        s.push('\n');
        for (n, row) in self.task_names.iter().zip(&self.correlation) {
            s.push_str(n);
            for v in row {
                s.push(',');
                s.push_str(&fmt_f64(*v));
            }
            s.push('\n');
        }
        s
    }
}
