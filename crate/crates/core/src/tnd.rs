//! The tensor normal distribution over order-3 tensors.
//!
//! `X ~ TN(M, Σ1, Σ2, Σ3)` means `vec(X) ~ N(vec(M), Σ1 ⊗ Σ2 ⊗ Σ3)`. The
//! Kronecker covariance is never materialized: inverses and square roots are
//! applied one mode at a time through the Cholesky factor of each `Σk`, so a
//! quadratic form costs `O(Σk dk²·d/dk)` instead of `O(d³)`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{arg_err, Error, Result};
use crate::linalg::{OpCounter, SpdFactor};
use crate::matrix::{kronecker, DenseMatrix};
use crate::tensor::Tensor3;

/// Default relative log-likelihood change at which flip-flop stops.
pub const DEFAULT_FLIP_FLOP_TOL: f64 = 1e-8;
/// Default sweep budget for flip-flop.
pub const DEFAULT_FLIP_FLOP_MAX_ITER: usize = 200;

/// `Σ1 ⊗ Σ2 ⊗ Σ3`, stored as its three factors.
#[derive(Debug, Clone, PartialEq)]
pub struct KronCovariance {
    factors: [SpdFactor; 3],
}

impl KronCovariance {
    pub fn new(factors: [SpdFactor; 3]) -> Self {
        Self { factors }
    }

    pub fn identity(dims: [usize; 3]) -> Self {
        Self::new(dims.map(SpdFactor::identity))
    }

    pub fn dims(&self) -> [usize; 3] {
        [
            self.factors[0].dim(),
            self.factors[1].dim(),
            self.factors[2].dim(),
        ]
    }

    pub fn total_dim(&self) -> usize {
        self.dims().iter().product()
    }

    /// Factor for `mode` in `1..=3`.
    pub fn factor(&self, mode: usize) -> &SpdFactor {
        &self.factors[mode - 1]
    }

    pub fn factors(&self) -> &[SpdFactor; 3] {
        &self.factors
    }

    pub fn into_factors(self) -> [SpdFactor; 3] {
        self.factors
    }

    pub fn set_factor(&mut self, mode: usize, f: SpdFactor) {
        assert_eq!(f.dim(), self.factors[mode - 1].dim(), "factor dim mismatch");
        self.factors[mode - 1] = f;
    }

    /// `ln |Σ1 ⊗ Σ2 ⊗ Σ3| = Σk (d/dk)·ln|Σk|`.
    pub fn logdet(&self) -> f64 {
        let d = self.total_dim() as f64;
        self.factors
            .iter()
            .map(|f| d / f.dim() as f64 * f.logdet())
            .sum()
    }

    fn check_dims(&self, t: &Tensor3) -> Result<()> {
        if t.dims() != self.dims() {
            return Err(arg_err!(
                "tensor dims {:?} do not match covariance dims {:?}",
                t.dims(),
                self.dims()
            ));
        }
        Ok(())
    }

    /// `Σ⁻¹ vec(t)`, folded back into a tensor.
    pub fn solve(&self, t: &Tensor3) -> Result<Tensor3> {
        self.check_dims(t)?;
        let mut out = t.clone();
        for (mode, f) in (1..=3).zip(&self.factors) {
            out.map_fibers(mode, |x| f.solve_in_place(x));
        }
        Ok(out)
    }

    /// `(L1 ⊗ L2 ⊗ L3)⁻¹ vec(t)`, folded back into a tensor.
    pub fn whiten(&self, t: &Tensor3) -> Result<Tensor3> {
        self.check_dims(t)?;
        let mut out = t.clone();
        for (mode, f) in (1..=3).zip(&self.factors) {
            out.map_fibers(mode, |x| f.whiten_in_place(x));
        }
        Ok(out)
    }

    /// `vec(t)ᵀ Σ⁻¹ vec(t)`.
    pub fn quadratic_form(&self, t: &Tensor3) -> Result<f64> {
        Ok(self.whiten(t)?.as_slice().iter().map(|x| x * x).sum())
    }

    /// Materializes the full `d × d` covariance. Diagnostics only.
    pub fn to_dense(&self) -> Result<DenseMatrix> {
        kronecker(
            self.factors[0].matrix(),
            &kronecker(self.factors[1].matrix(), self.factors[2].matrix())?,
        )
    }
}

/// Whitens `t` along every mode except `skip`, then accumulates the Gram
/// matrix of its mode-`skip` fibers into `gram`.
///
/// Summed over samples this is `Σi Xi(k) (⊗_{j≠k} Σj)⁻¹ Xi(k)ᵀ`.
pub(crate) fn accumulate_mode_gram(
    t: &Tensor3,
    others: [Option<&SpdFactor>; 3],
    skip: usize,
    gram: &mut DenseMatrix,
    ops: &mut OpCounter,
) {
    let mut z = t.clone();
    for (mode, f) in (1..=3).zip(others) {
        if mode == skip {
            continue;
        }
        if let Some(f) = f {
            let n = f.dim();
            let fibers = z.len() / n;
            z.map_fibers(mode, |x| f.whiten_in_place(x));
            ops.add(fibers * n * (n + 1) / 2);
        }
    }
    let n = t.dim(skip);
    let fibers = z.len() / n;
    z.map_fibers(skip, |x| {
        for r in 0..n {
            let xr = x[r];
            for s in 0..=r {
                gram[(r, s)] += xr * x[s];
            }
        }
    });
    ops.add(fibers * n * (n + 1) / 2);
    for r in 0..n {
        for s in 0..r {
            gram[(s, r)] = gram[(r, s)];
        }
    }
}

/// A tensor normal distribution `TN(M, Σ1, Σ2, Σ3)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorNormal {
    mean: Tensor3,
    cov: KronCovariance,
}

impl TensorNormal {
    pub fn new(mean: Tensor3, cov: KronCovariance) -> Result<Self> {
        if mean.dims() != cov.dims() {
            return Err(arg_err!(
                "mean dims {:?} do not match covariance dims {:?}",
                mean.dims(),
                cov.dims()
            ));
        }
        Ok(Self { mean, cov })
    }

    pub fn mean(&self) -> &Tensor3 {
        &self.mean
    }

    pub fn cov(&self) -> &KronCovariance {
        &self.cov
    }

    pub fn dims(&self) -> [usize; 3] {
        self.mean.dims()
    }

    /// `vec(x − M)ᵀ (Σ1 ⊗ Σ2 ⊗ Σ3)⁻¹ vec(x − M)`.
    pub fn mahalanobis(&self, x: &Tensor3) -> Result<f64> {
        let centered = x.sub(&self.mean)?;
        self.cov.quadratic_form(&centered)
    }

    pub fn log_pdf(&self, x: &Tensor3) -> Result<f64> {
        let q = self.mahalanobis(x)?;
        let d = self.cov.total_dim() as f64;
        Ok(-0.5 * d * libm::log(2.0 * PI) - 0.5 * self.cov.logdet() - 0.5 * q)
    }

    /// Draws `M + Z ×1 L1 ×2 L2 ×3 L3` with `Z` standard normal.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Tensor3 {
        let dims = self.dims();
        let z: Vec<f64> = (0..self.mean.len())
            .map(|_| rng.sample(StandardNormal))
            .collect();
        let mut t = Tensor3::new(dims, z).expect("dims already validated");
        for (mode, f) in (1..=3).zip(self.cov.factors()) {
            let l = f.chol();
            t.map_fibers(mode, |x| {
                // x ← L x, bottom-up so each entry is read before it is overwritten
                for i in (0..x.len()).rev() {
                    x[i] = (0..=i).map(|k| l[(i, k)] * x[k]).sum();
                }
            });
        }
        for (v, m) in t.as_mut_slice().iter_mut().zip(self.mean.as_slice()) {
            *v += m;
        }
        t
    }

    /// Sum of `log_pdf` over `samples`.
    pub fn total_log_likelihood(&self, samples: &[Tensor3]) -> Result<f64> {
        samples.iter().map(|x| self.log_pdf(x)).sum()
    }
}

/// Maximum likelihood mean: the elementwise average of the samples.
pub fn mle_mean(samples: &[Tensor3]) -> Result<Tensor3> {
    let first = samples
        .first()
        .ok_or_else(|| arg_err!("mean of an empty sample set"))?;
    let dims = first.dims();
    let mut acc = vec![0.0; first.len()];
    for s in samples {
        if s.dims() != dims {
            return Err(arg_err!(
                "sample dims {:?} differ from {:?}",
                s.dims(),
                dims
            ));
        }
        for (a, v) in acc.iter_mut().zip(s.as_slice()) {
            *a += v;
        }
    }
    let n = samples.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Tensor3::new(dims, acc)
}

/// Stopping rule for [`flip_flop_mle`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlipFlopOptions {
    /// Stop once `|ℓ_new − ℓ_old| ≤ tol·|ℓ_old|`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FlipFlopOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_FLIP_FLOP_TOL,
            max_iter: DEFAULT_FLIP_FLOP_MAX_ITER,
        }
    }
}

/// Result of [`flip_flop_mle`].
#[derive(Debug, Clone, PartialEq)]
pub struct FlipFlopFit {
    pub cov: KronCovariance,
    /// Number of completed sweeps.
    pub iterations: usize,
    pub log_likelihood: f64,
    pub converged: bool,
    /// Total log-likelihood at the initialization and after every sweep.
    pub history: Vec<f64>,
}

/// Flip-flop maximum likelihood estimate of the three covariance factors.
///
/// Each sweep updates `Σ1`, `Σ2`, `Σ3` in that order; the update for mode
/// `k` is the scatter of the mode-`k` unfoldings of `Xi − M` whitened by the
/// current other two factors, divided by `n·d/dk`. Every update maximizes
/// the likelihood over one factor, so the total log-likelihood never
/// decreases. `mean` is held fixed.
pub fn flip_flop_mle(
    samples: &[Tensor3],
    mean: &Tensor3,
    init: &KronCovariance,
    opts: FlipFlopOptions,
) -> Result<FlipFlopFit> {
    if samples.is_empty() {
        return Err(arg_err!("flip-flop needs at least one sample"));
    }
    if !(opts.tol >= 0.0) {
        return Err(arg_err!("tolerance must be non-negative"));
    }
    let dims = mean.dims();
    if init.dims() != dims {
        return Err(arg_err!(
            "initial covariance dims {:?} do not match mean dims {dims:?}",
            init.dims()
        ));
    }
    let centered = samples
        .iter()
        .map(|s| s.sub(mean))
        .collect::<Result<Vec<_>>>()?;
    let n = samples.len() as f64;
    let d: usize = dims.iter().product();

    let mut cov = init.clone();
    let mut ll = TensorNormal::new(mean.clone(), cov.clone())?.total_log_likelihood(samples)?;
    let mut history = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    let mut ops = OpCounter::default();

    while iterations < opts.max_iter {
        for mode in 1..=3 {
            let dk = dims[mode - 1];
            let mut gram = DenseMatrix::zeros(dk, dk);
            {
                let f = cov.factors();
                let others = [&f[0], &f[1], &f[2]].map(Some);
                for c in &centered {
                    accumulate_mode_gram(c, others, mode, &mut gram, &mut ops);
                }
            }
            let gram = gram.scaled(1.0 / (n * (d / dk) as f64));
            let updated = SpdFactor::new(gram).map_err(|_| Error::SingularUpdate { mode })?;
            cov.set_factor(mode, updated);
        }
        iterations += 1;
        let next = TensorNormal::new(mean.clone(), cov.clone())?.total_log_likelihood(samples)?;
        history.push(next);
        if !next.is_finite() {
            return Err(Error::Estimation(alloc::format!(
                "log-likelihood became non-finite after sweep {iterations}"
            )));
        }
        let change = (next - ll).abs();
        ll = next;
        if change <= opts.tol * ll.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }

    Ok(FlipFlopFit {
        cov,
        iterations,
        log_likelihood: ll,
        converged,
        history,
    })
}

/// Rescales every factor to unit trace and returns the extracted scalar, so
/// that `scale · (Σ1' ⊗ Σ2' ⊗ Σ3')` equals the input product.
pub fn normalize_identifiable(cov: &KronCovariance) -> (KronCovariance, f64) {
    let mut scale = 1.0;
    let factors = cov.factors().clone().map(|f| {
        let tr = f.trace();
        scale *= tr;
        f.scaled(1.0 / tr)
    });
    (KronCovariance::new(factors), scale)
}

/// Folds a global scalar back into the first factor.
pub fn with_scale(cov: &KronCovariance, scale: f64) -> KronCovariance {
    let mut out = cov.clone();
    let f = out.factor(1).scaled(scale);
    out.set_factor(1, f);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag(v: &[f64]) -> SpdFactor {
        let n = v.len();
        SpdFactor::new(DenseMatrix::from_fn(n, n, |i, j| if i == j { v[i] } else { 0.0 }))
            .unwrap()
    }

    #[test]
    fn mahalanobis_at_mean_is_zero() {
        let m = Tensor3::from_fn([2, 3, 2], |a, b, c| (a + b * c) as f64).unwrap();
        let cov = KronCovariance::new([diag(&[1.0, 2.0]), diag(&[3.0, 1.0, 0.5]), diag(&[2.0, 2.0])]);
        let tn = TensorNormal::new(m.clone(), cov).unwrap();
        assert_eq!(tn.mahalanobis(&m).unwrap(), 0.0);
    }

    #[test]
    fn identity_mahalanobis_is_squared_norm() {
        let x = Tensor3::from_fn([2, 2, 3], |a, b, c| a as f64 - 0.5 * b as f64 + c as f64).unwrap();
        let tn = TensorNormal::new(Tensor3::zeros([2, 2, 3]).unwrap(), KronCovariance::identity([2, 2, 3]))
            .unwrap();
        let norm2: f64 = x.as_slice().iter().map(|v| v * v).sum();
        assert!((tn.mahalanobis(&x).unwrap() - norm2).abs() < 1e-12);
    }

    #[test]
    fn scalar_log_pdf() {
        let tn = TensorNormal::new(Tensor3::zeros([1, 1, 1]).unwrap(), KronCovariance::identity([1, 1, 1]))
            .unwrap();
        let lp = tn.log_pdf(&Tensor3::zeros([1, 1, 1]).unwrap()).unwrap();
        assert!((lp - (-0.918_938_533_204_672_7)).abs() < 1e-12);
    }

    #[test]
    fn identity_log_pdf_at_mean() {
        let m = Tensor3::zeros([2, 3, 2]).unwrap();
        let tn = TensorNormal::new(m.clone(), KronCovariance::identity([2, 3, 2])).unwrap();
        let expect = -6.0 * libm::log(2.0 * PI);
        assert!((tn.log_pdf(&m).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_errors() {
        let tn = TensorNormal::new(Tensor3::zeros([2, 2, 2]).unwrap(), KronCovariance::identity([2, 2, 2]))
            .unwrap();
        let x = Tensor3::zeros([2, 2, 3]).unwrap();
        assert!(matches!(tn.mahalanobis(&x), Err(Error::Argument(_))));
        assert!(tn.log_pdf(&x).is_err());
        assert!(TensorNormal::new(x, KronCovariance::identity([2, 2, 2])).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let tn = TensorNormal::new(
            Tensor3::zeros([2, 3, 2]).unwrap(),
            KronCovariance::new([diag(&[1.0, 2.0]), diag(&[3.0, 1.0, 0.5]), diag(&[2.0, 2.0])]),
        )
        .unwrap();
        let a = tn.sample(&mut ChaCha8Rng::seed_from_u64(9));
        let b = tn.sample(&mut ChaCha8Rng::seed_from_u64(9));
        let c = tn.sample(&mut ChaCha8Rng::seed_from_u64(10));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn mle_mean_cases() {
        assert!(mle_mean(&[]).is_err());
        let t = Tensor3::from_fn([2, 2, 2], |a, b, c| (a * 4 + b * 2 + c) as f64 - 3.5).unwrap();
        assert_eq!(mle_mean(core::slice::from_ref(&t)).unwrap(), t);
        let neg = Tensor3::new([2, 2, 2], t.as_slice().iter().map(|v| -v).collect()).unwrap();
        assert_eq!(mle_mean(&[t.clone(), neg]).unwrap(), Tensor3::zeros([2, 2, 2]).unwrap());
        assert!(mle_mean(&[t, Tensor3::zeros([2, 2, 1]).unwrap()]).is_err());
    }

    #[test]
    fn zero_scatter_is_singular() {
        let m = Tensor3::from_fn([2, 2, 2], |a, b, c| (a + b + c) as f64).unwrap();
        let samples = vec![m.clone(); 4];
        let err = flip_flop_mle(&samples, &m, &KronCovariance::identity([2, 2, 2]), FlipFlopOptions::default())
            .unwrap_err();
        assert_eq!(err, Error::SingularUpdate { mode: 1 });
    }

    #[test]
    fn normalization_of_trace_one_factors_is_noop() {
        let cov = KronCovariance::new([
            SpdFactor::scaled_identity(2, 0.5),
            diag(&[0.25, 0.75]),
            SpdFactor::identity(1),
        ]);
        let (norm, scale) = normalize_identifiable(&cov);
        assert_eq!(scale, 1.0);
        assert_eq!(norm, cov);
    }
}
