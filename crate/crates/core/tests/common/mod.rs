#![allow(dead_code)]

use drn_core::{DenseMatrix, SpdFactor, Tensor3};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

pub fn to_na(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn random_tensor(rng: &mut ChaCha8Rng, dims: [usize; 3]) -> Tensor3 {
    Tensor3::from_fn(dims, |_, _, _| rng.sample(StandardNormal)).unwrap()
}

/// A·Aᵀ/n + 0.5·I with unit-order entries.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> SpdFactor {
    let a = random_matrix(rng, n, n);
    let mut s = a.matmul(&a.transpose()).unwrap().scaled(1.0 / n as f64);
    for i in 0..n {
        s[(i, i)] += 0.5;
    }
    // exact symmetry
    let s = DenseMatrix::from_fn(n, n, |i, j| 0.5 * (s[(i, j)] + s[(j, i)]));
    SpdFactor::new(s).unwrap()
}

/// Dense Kronecker product via nalgebra.
pub fn na_kron3(a: &DenseMatrix, b: &DenseMatrix, c: &DenseMatrix) -> DMatrix<f64> {
    to_na(a).kronecker(&to_na(b).kronecker(&to_na(c)))
}

/// Multivariate normal log-density with a dense covariance.
pub fn dense_mvn_log_pdf(mean: &[f64], cov: &DMatrix<f64>, x: &[f64]) -> f64 {
    let d = mean.len();
    let chol = cov.clone().cholesky().expect("dense covariance must be SPD");
    let diff = DVector::from_iterator(d, x.iter().zip(mean).map(|(a, b)| a - b));
    let sol = chol.solve(&diff);
    let quad = diff.dot(&sol);
    let logdet = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    -0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln() - 0.5 * logdet - 0.5 * quad
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Max relative entrywise error, normalized by the largest magnitude.
pub fn rel_err_slice(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let scale = a.iter().chain(b).fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs())) / scale
}
