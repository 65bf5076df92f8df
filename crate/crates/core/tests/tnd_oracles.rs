mod common;

use common::*;
use drn_core::tnd::with_scale;
use drn_core::{
    flip_flop_mle, mle_mean, normalize_identifiable, DenseMatrix, FlipFlopOptions, KronCovariance,
    SpdFactor, Tensor3, TensorNormal,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn random_tnd(seed: u64, dims: [usize; 3]) -> TensorNormal {
    let mut r = rng(seed);
    let mean = random_tensor(&mut r, dims);
    let cov = KronCovariance::new(dims.map(|d| random_spd(&mut r, d)));
    TensorNormal::new(mean, cov).unwrap()
}

fn dense_cov(cov: &KronCovariance) -> DMatrix<f64> {
    let f = cov.factors();
    na_kron3(f[0].matrix(), f[1].matrix(), f[2].matrix())
}

#[test]
fn mahalanobis_matches_dense_solve() {
    let tn = random_tnd(21, [3, 2, 2]);
    let x = random_tensor(&mut rng(22), [3, 2, 2]);
    let diff = DVector::from_iterator(12, x.sub(tn.mean()).unwrap().vectorize());
    let dense = diff.dot(&dense_cov(tn.cov()).lu().solve(&diff).unwrap());
    assert!(rel_err(tn.mahalanobis(&x).unwrap(), dense) < 1e-10);
}

#[test]
fn log_pdf_matches_dense_mvn() {
    let tn = random_tnd(23, [2, 3, 2]);
    let x = random_tensor(&mut rng(24), [2, 3, 2]);
    let dense = dense_mvn_log_pdf(tn.mean().as_slice(), &dense_cov(tn.cov()), x.as_slice());
    assert!(rel_err(tn.log_pdf(&x).unwrap(), dense) < 1e-10);
}

#[test]
fn solve_matches_dense_inverse() {
    let tn = random_tnd(25, [2, 2, 3]);
    let x = random_tensor(&mut rng(26), [2, 2, 3]);
    let dense = dense_cov(tn.cov()).lu().solve(&DVector::from_column_slice(x.as_slice())).unwrap();
    assert!(rel_err_slice(tn.cov().solve(&x).unwrap().as_slice(), dense.as_slice()) < 1e-10);
}

fn integrate_1d(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    // composite Simpson
    let h = (hi - lo) / n as f64;
    let mut s = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(lo + i as f64 * h);
    }
    s * h / 3.0
}

#[test]
fn density_integrates_to_one_scalar() {
    let mut r = rng(27);
    let tn = TensorNormal::new(
        Tensor3::new([1, 1, 1], vec![0.3]).unwrap(),
        KronCovariance::new([0; 3].map(|_| random_spd(&mut r, 1))),
    )
    .unwrap();
    let p = |x: f64| tn.log_pdf(&Tensor3::new([1, 1, 1], vec![x]).unwrap()).unwrap().exp();
    let total = integrate_1d(p, -40.0, 40.0, 20_000);
    assert!((total - 1.0).abs() < 1e-6, "integral {total}");
}

#[test]
fn density_integrates_to_one_two_dims() {
    let mut r = rng(28);
    let tn = TensorNormal::new(
        Tensor3::new([2, 1, 1], vec![0.1, -0.2]).unwrap(),
        KronCovariance::new([random_spd(&mut r, 2), random_spd(&mut r, 1), random_spd(&mut r, 1)]),
    )
    .unwrap();
    let inner = |x: f64| {
        integrate_1d(
            |y| tn.log_pdf(&Tensor3::new([2, 1, 1], vec![x, y]).unwrap()).unwrap().exp(),
            -25.0,
            25.0,
            1000,
        )
    };
    let total = integrate_1d(inner, -25.0, 25.0, 1000);
    assert!((total - 1.0).abs() < 1e-6, "integral {total}");
}

#[test]
fn standard_sample_moments() {
    let tn = TensorNormal::new(Tensor3::zeros([2, 2, 2]).unwrap(), KronCovariance::identity([2, 2, 2])).unwrap();
    let mut r = rng(29);
    let n = 100_000;
    let mut sum = [0.0; 8];
    let mut sq = [0.0; 8];
    for _ in 0..n {
        let s = tn.sample(&mut r);
        for (k, v) in s.as_slice().iter().enumerate() {
            sum[k] += v;
            sq[k] += v * v;
        }
    }
    for k in 0..8 {
        let mean = sum[k] / n as f64;
        let var = sq[k] / n as f64 - mean * mean;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }
}

#[test]
fn sample_covariance_matches_kronecker() {
    let mut r = rng(30);
    let cov = KronCovariance::new([0; 3].map(|_| random_spd(&mut r, 2)));
    let tn = TensorNormal::new(Tensor3::zeros([2, 2, 2]).unwrap(), cov).unwrap();
    let n = 100_000;
    let mut acc = DMatrix::<f64>::zeros(8, 8);
    for _ in 0..n {
        let v = DVector::from_column_slice(tn.sample(&mut r).as_slice());
        acc += &v * v.transpose();
    }
    acc /= n as f64;
    let truth = dense_cov(tn.cov());
    let worst = (acc - &truth).abs().max();
    assert!(worst < 0.1, "max entrywise error {worst}");
}

#[test]
fn mle_mean_matches_loop_average() {
    let tn = random_tnd(31, [2, 3, 2]);
    let mut r = rng(32);
    let samples: Vec<Tensor3> = (0..100).map(|_| tn.sample(&mut r)).collect();
    let m = mle_mean(&samples).unwrap();
    for k in 0..12 {
        let mut s = 0.0;
        for x in &samples {
            s += x.as_slice()[k];
        }
        assert!((m.as_slice()[k] - s / 100.0).abs() < 1e-14);
    }
}

#[test]
fn single_mode_flip_flop_is_sample_covariance() {
    let mut r = rng(33);
    let truth = TensorNormal::new(
        Tensor3::zeros([3, 1, 1]).unwrap(),
        KronCovariance::new([random_spd(&mut r, 3), SpdFactor::identity(1), SpdFactor::identity(1)]),
    )
    .unwrap();
    let samples: Vec<Tensor3> = (0..40).map(|_| truth.sample(&mut r)).collect();
    let mean = mle_mean(&samples).unwrap();
    let fit = flip_flop_mle(
        &samples,
        &mean,
        &KronCovariance::identity([3, 1, 1]),
        FlipFlopOptions { tol: 0.0, max_iter: 1 },
    )
    .unwrap();
    let mut s = DMatrix::<f64>::zeros(3, 3);
    for x in &samples {
        let v = DVector::from_iterator(3, x.sub(&mean).unwrap().vectorize());
        s += &v * v.transpose();
    }
    s /= samples.len() as f64;
    assert_eq!(fit.iterations, 1);
    assert!(rel_err_slice(fit.cov.factor(1).matrix().as_slice(), s.as_slice()) < 1e-12);
    assert!((fit.cov.factor(2).matrix()[(0, 0)] - 1.0).abs() < 1e-12);
    assert!((fit.cov.factor(3).matrix()[(0, 0)] - 1.0).abs() < 1e-12);
}

fn product_error(fit: &KronCovariance, truth: &KronCovariance) -> f64 {
    let a = dense_cov(fit);
    let b = dense_cov(truth);
    (a - &b).norm() / b.norm()
}

#[test]
fn flip_flop_recovers_product_with_more_data() {
    let truth = random_tnd(34, [4, 3, 2]);
    let mut r = rng(35);
    let all: Vec<Tensor3> = (0..5000).map(|_| truth.sample(&mut r)).collect();
    let mut errors = Vec::new();
    for n in [50, 5000] {
        let s = &all[..n];
        let mean = mle_mean(s).unwrap();
        let fit = flip_flop_mle(s, &mean, &KronCovariance::identity([4, 3, 2]), FlipFlopOptions::default()).unwrap();
        for w in fit.history.windows(2) {
            assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0), "log-likelihood decreased: {w:?}");
        }
        errors.push(product_error(&fit.cov, truth.cov()));
    }
    assert!(errors[1] < errors[0], "{errors:?}");
}

#[test]
fn normalization_reconstructs_product() {
    let cov = KronCovariance::new([
        SpdFactor::scaled_identity(2, 2.0),
        SpdFactor::scaled_identity(2, 3.0),
        SpdFactor::identity(2),
    ]);
    let (norm, scale) = normalize_identifiable(&cov);
    for f in norm.factors() {
        assert!((f.trace() - 1.0).abs() < 1e-15);
        assert_eq!(f.matrix(), &DenseMatrix::identity(2).scaled(0.5));
    }
    assert!((scale - 48.0).abs() < 1e-12);
    let rebuilt = dense_cov(&norm) * scale;
    assert!((rebuilt - dense_cov(&cov)).abs().max() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn log_pdf_equals_dense_density(
        d1 in 1usize..5, d2 in 1usize..4, d3 in 1usize..4, seed in any::<u64>()
    ) {
        let dims = [d1, d2, d3];
        let tn = random_tnd(seed, dims);
        let x = random_tensor(&mut rng(seed ^ 0x5eed), dims);
        let dense = dense_mvn_log_pdf(tn.mean().as_slice(), &dense_cov(tn.cov()), x.as_slice());
        prop_assert!(rel_err(tn.log_pdf(&x).unwrap(), dense) < 1e-10);
    }

    #[test]
    fn normalized_factors_preserve_density(seed in any::<u64>()) {
        let tn = random_tnd(seed, [2, 3, 2]);
        let (norm, scale) = normalize_identifiable(tn.cov());
        let back = TensorNormal::new(tn.mean().clone(), with_scale(&norm, scale)).unwrap();
        let x = random_tensor(&mut rng(seed.wrapping_add(1)), [2, 3, 2]);
        prop_assert!(rel_err(back.log_pdf(&x).unwrap(), tn.log_pdf(&x).unwrap()) < 1e-10);
        let rebuilt = dense_cov(&norm) * scale;
        prop_assert!(rel_err_slice(rebuilt.as_slice(), dense_cov(tn.cov()).as_slice()) < 1e-12);
    }
}
