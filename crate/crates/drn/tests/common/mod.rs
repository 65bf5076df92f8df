#![allow(dead_code)]

use std::path::Path;

pub struct CliOutput {
    pub code: u8,
    pub stdout: String,
    pub stderr: String,
}

pub fn run_cli(args: &[&str]) -> CliOutput {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("drn").chain(args.iter().copied());
    let code = drn::cli::run(argv, &mut out, &mut err);
    CliOutput {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small synthetic experiment config as JSON text.
pub fn synthetic_config(variant: &str, epochs: usize, seed: u64) -> String {
    format!(
        r#"{{
  "schema_version": 1,
  "variant": "{variant}",
  "data": {{
    "synthetic": {{
      "num_tasks": 3,
      "feature_dim": 5,
      "num_classes": 3,
      "task_covariance": [[1.0, 0.8, 0.0], [0.8, 1.0, 0.0], [0.0, 0.0, 1.0]],
      "noise_scale": 1.0,
      "seed": 11,
      "train_per_task": 20,
      "test_per_task": 30
    }}
  }},
  "network": {{ "trunk_widths": [6], "bottleneck": 4, "task_init": "shared" }},
  "train": {{
    "learning_rate": 0.01,
    "batch_size": 8,
    "epochs": {epochs},
    "prior_weight": 0.002,
    "epsilon_ridge": 3.0,
    "seed": {seed}
  }}
}}
"#
    )
}

pub fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}
