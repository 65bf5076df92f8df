//! JSON input and output of the tensor normal fit.

use drn_core::{
    flip_flop_mle, mle_mean, normalize_identifiable, FlipFlopOptions, KronCovariance, Tensor3,
};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::matrix_rows;

/// Samples stored flat in row-major order over `dims`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TndSamples {
    pub dims: [usize; 3],
    pub samples: Vec<Vec<f64>>,
}

impl TndSamples {
    pub fn tensors(&self) -> Result<Vec<Tensor3>> {
        Ok(self
            .samples
            .iter()
            .map(|s| Tensor3::from_vec(self.dims, s.clone()))
            .collect::<drn_core::Result<Vec<_>>>()?)
    }
}

/// Mean, unit-trace factors and the scale multiplying their Kronecker product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TndFit {
    pub dims: [usize; 3],
    pub mean: Vec<f64>,
    pub factors: Vec<Vec<Vec<f64>>>,
    pub scale: f64,
    pub iterations: usize,
    pub log_likelihood: f64,
    pub converged: bool,
}

/// Fits mean and covariance by maximum likelihood, starting from identity
/// factors.
pub fn fit(input: &TndSamples, opts: FlipFlopOptions) -> Result<TndFit> {
    let samples = input.tensors()?;
    let mean = mle_mean(&samples)?;
    let init = KronCovariance::identity(input.dims);
    let fit = flip_flop_mle(&samples, &mean, &init, opts)?;
    let (cov, scale) = normalize_identifiable(&fit.cov);
    Ok(TndFit {
        dims: input.dims,
        mean: mean.into_vec(),
        factors: cov.factors().iter().map(|f| matrix_rows(f.matrix())).collect(),
        scale,
        iterations: fit.iterations,
        log_likelihood: fit.log_likelihood,
        converged: fit.converged,
    })
}
