mod common;

use common::*;
use drn_core::net::{
    prior_gradient, prior_gradient_tensor, prior_penalty, Architecture, MultiTaskNet, TaskInit,
};
use drn_core::{DenseMatrix, KronCovariance, SpdFactor};
use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

fn small_net(seed: u64) -> MultiTaskNet {
    let arch = Architecture {
        input_dim: 7,
        trunk_widths: vec![5],
        task_hidden_widths: vec![4],
        num_classes: 3,
        num_tasks: 2,
    };
    let mut r = rng(seed);
    let mut net = MultiTaskNet::random(&arch, TaskInit::Independent, &mut r).unwrap();
    // non-zero biases so every parameter is exercised
    let p: Vec<f64> = net.flatten().iter().map(|v| v + 0.1 * r.sample::<f64, _>(StandardNormal)).collect();
    net.unflatten(&p).unwrap();
    net
}

fn random_priors(net: &MultiTaskNet, seed: u64) -> Vec<KronCovariance> {
    let mut r = rng(seed);
    net.stack()
        .layers()
        .iter()
        .map(|l| KronCovariance::new(l.weights.dims().map(|d| random_spd(&mut r, d))))
        .collect()
}

/// Scalar-loop forward pass, independent of the library's layer code.
fn naive_logits(net: &MultiTaskNet, task: usize, x: &[f64]) -> Vec<f64> {
    let mut h = x.to_vec();
    for l in net.trunk() {
        let mut out = vec![0.0; l.out_dim()];
        for j in 0..l.out_dim() {
            let mut z = l.bias[j];
            for i in 0..l.in_dim() {
                z += l.weight[(i, j)] * h[i];
            }
            out[j] = if z > 0.0 { z } else { 0.0 };
        }
        h = out;
    }
    let n = net.stack().len();
    for (k, l) in net.stack().layers().iter().enumerate() {
        let mut out = vec![0.0; l.out_dim()];
        for j in 0..l.out_dim() {
            let mut z = l.biases[task][j];
            for i in 0..l.in_dim() {
                z += l.weights[(i, j, task)] * h[i];
            }
            out[j] = if k + 1 == n || z > 0.0 { z } else { 0.0 };
        }
        h = out;
    }
    h
}

#[test]
fn forward_matches_naive_loops() {
    let net = small_net(41);
    let mut r = rng(42);
    for task in 0..2 {
        let x: Vec<f64> = (0..7).map(|_| r.sample(StandardNormal)).collect();
        let z = naive_logits(&net, task, &x);
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
        let s: f64 = e.iter().sum();
        let p = net.forward(task, &x).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (a, b) in p.iter().zip(&e) {
            assert!((a - b / s).abs() < 1e-14);
        }
    }
}

#[test]
fn cross_entropy_matches_naive() {
    let mut r = rng(43);
    for _ in 0..20 {
        let z: Vec<f64> = (0..5).map(|_| 3.0 * r.sample::<f64, _>(StandardNormal)).collect();
        let label = r.random_range(0..5);
        let naive = -(z[label].exp() / z.iter().map(|v| v.exp()).sum::<f64>()).ln();
        assert!(rel_err(drn_core::net::cross_entropy(&z, label), naive) < 1e-13);
    }
}

fn fd_rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4)
}

#[test]
fn backward_matches_finite_differences() {
    let net = small_net(44);
    let mut r = rng(45);
    let x: Vec<f64> = (0..7).map(|_| r.sample(StandardNormal)).collect();
    let (task, label) = (1, 2);
    let (_, g) = net.backward(task, &x, label).unwrap();
    let p = net.flatten();
    let h = 1e-5;
    let mut probe = net.clone();
    for k in 0..p.len() {
        let mut q = p.clone();
        q[k] = p[k] + h;
        probe.unflatten(&q).unwrap();
        let up = probe.loss(task, &x, label).unwrap();
        q[k] = p[k] - h;
        probe.unflatten(&q).unwrap();
        let down = probe.loss(task, &x, label).unwrap();
        let numeric = (up - down) / (2.0 * h);
        assert!(fd_rel_err(g.data[k], numeric) < 1e-6, "param {k}: {} vs {numeric}", g.data[k]);
    }
}

#[test]
fn other_tasks_get_zero_gradient() {
    let net = small_net(46);
    let (_, g) = net.backward(0, &[0.5; 7], 1).unwrap();
    let w = g.task_weights(&net, 0);
    for i in 0..5 {
        for j in 0..4 {
            assert_eq!(w[(i, j, 1)], 0.0);
        }
    }
}

#[test]
fn zero_input_zero_bias_gives_zero_trunk_gradient() {
    let mut net = small_net(47);
    for l in net.stack_mut().layers_mut() {
        l.biases.iter_mut().flatten().for_each(|b| *b = 0.0);
    }
    let mut zeroed = net.trunk().to_vec();
    zeroed.iter_mut().for_each(|l| l.bias.iter_mut().for_each(|b| *b = 0.0));
    let net = MultiTaskNet::from_parts(zeroed, net.stack().clone(), 7).unwrap();
    let (_, g) = net.backward(0, &[0.0; 7], 0).unwrap();
    assert!(g.data[..g.layout.trunk_len()].iter().all(|&v| v == 0.0));
}

#[test]
fn prior_penalty_matches_dense() {
    let net = small_net(48);
    let priors = random_priors(&net, 49);
    let mut expect = 0.0;
    for (l, p) in net.stack().layers().iter().zip(&priors) {
        let f = p.factors();
        let cov = na_kron3(f[0].matrix(), f[1].matrix(), f[2].matrix());
        let w = DVector::from_column_slice(l.weights.as_slice());
        let q = w.dot(&cov.lu().solve(&w).unwrap());
        let logdet_task = to_na(f[2].matrix()).determinant().ln();
        expect += 0.5 * (q - (l.in_dim() * l.out_dim()) as f64 * logdet_task);
    }
    assert!(rel_err(prior_penalty(net.stack(), &priors).unwrap(), expect) < 1e-10);
}

#[test]
fn prior_gradient_matches_finite_differences() {
    let net = small_net(50);
    let priors = random_priors(&net, 51);
    let h = 1e-5;
    for layer in 0..net.stack().len() {
        for task in 0..2 {
            let g = prior_gradient(net.stack(), &priors, task, layer).unwrap();
            let (din, dout) = (g.rows(), g.cols());
            for i in 0..din {
                for j in 0..dout {
                    let mut s = net.stack().clone();
                    let base = s.layer(layer).weights[(i, j, task)];
                    s.layers_mut()[layer].weights[(i, j, task)] = base + h;
                    let up = prior_penalty(&s, &priors).unwrap();
                    s.layers_mut()[layer].weights[(i, j, task)] = base - h;
                    let down = prior_penalty(&s, &priors).unwrap();
                    let numeric = (up - down) / (2.0 * h);
                    assert!(fd_rel_err(g[(i, j)], numeric) < 1e-6);
                }
            }
        }
    }
}

#[test]
fn prior_gradient_slices_stack_to_full_solve() {
    let net = small_net(52);
    let priors = random_priors(&net, 53);
    for layer in 0..2 {
        let full = prior_gradient_tensor(net.stack(), &priors, layer).unwrap();
        let mut rebuilt = drn_core::Tensor3::zeros(full.dims()).unwrap();
        for t in 0..2 {
            rebuilt.set_slice3(t, &prior_gradient(net.stack(), &priors, t, layer).unwrap()).unwrap();
        }
        assert_eq!(rebuilt, full);
        let f = priors[layer].factors();
        let cov = na_kron3(f[0].matrix(), f[1].matrix(), f[2].matrix());
        let w = DVector::from_column_slice(net.stack().layer(layer).weights.as_slice());
        let dense = cov.lu().solve(&w).unwrap();
        assert!(rel_err_slice(full.as_slice(), dense.as_slice()) < 1e-10);
    }
}

#[test]
fn independent_task_slice_depends_only_on_its_weights() {
    let arch = Architecture {
        input_dim: 3,
        trunk_widths: vec![],
        task_hidden_widths: vec![],
        num_classes: 2,
        num_tasks: 3,
    };
    let mut r = rng(54);
    let net = MultiTaskNet::random(&arch, TaskInit::Independent, &mut r).unwrap();
    // tasks 0 and 1 correlated, task 2 independent
    let task_cov = SpdFactor::new(
        DenseMatrix::from_rows(&[&[1.0, 0.6, 0.0], &[0.6, 1.0, 0.0], &[0.0, 0.0, 0.7]]).unwrap(),
    )
    .unwrap();
    let priors = vec![KronCovariance::new([random_spd(&mut r, 3), random_spd(&mut r, 2), task_cov])];
    let before = prior_gradient(net.stack(), &priors, 2, 0).unwrap();
    let mut s = net.stack().clone();
    for t in 0..2 {
        s.layers_mut()[0]
            .weights
            .set_slice3(t, &random_matrix(&mut r, 3, 2))
            .unwrap();
    }
    let after = prior_gradient(&s, &priors, 2, 0).unwrap();
    assert!(rel_err_slice(before.as_slice(), after.as_slice()) < 1e-14);
    // and the other slices do react
    assert_ne!(
        prior_gradient(net.stack(), &priors, 0, 0).unwrap(),
        prior_gradient(&s, &priors, 0, 0).unwrap()
    );
}

#[test]
fn identity_prior_is_weight_decay() {
    let net = small_net(55);
    let priors: Vec<_> = net
        .stack()
        .layers()
        .iter()
        .map(|l| KronCovariance::identity(l.weights.dims()))
        .collect();
    for layer in 0..2 {
        for t in 0..2 {
            assert_eq!(
                prior_gradient(net.stack(), &priors, t, layer).unwrap(),
                net.stack().layer(layer).task_weight(t).unwrap()
            );
        }
    }
}

#[test]
fn large_logits_stay_valid() {
    let mut net = small_net(56);
    let p: Vec<f64> = net.flatten().iter().map(|v| v * 200.0).collect();
    net.unflatten(&p).unwrap();
    let x = [3.0, -2.0, 1.0, 0.5, 4.0, -1.0, 2.0];
    let z = net.logits(0, &x).unwrap();
    assert!(z.iter().any(|v| v.abs() > 1e3));
    let probs = net.forward(0, &x).unwrap();
    assert!(probs.iter().all(|v| v.is_finite() && *v >= 0.0));
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(net.loss(0, &x, 1).unwrap().is_finite());
}
