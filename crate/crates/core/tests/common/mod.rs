#![allow(dead_code)]

use foliate::net::{Activation, NetParams};
use foliate::rng;
use foliate::suite::is_generic;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

pub fn random_net(dims: &[usize], seed: u64) -> NetParams {
    random_net_with(dims, Activation::Relu, seed)
}

/// Initialized like training, then biases jittered so hidden units are not all
/// alive at the origin.
pub fn random_net_with(dims: &[usize], activation: Activation, seed: u64) -> NetParams {
    let mut r = rng::stream(seed, "test-net");
    let mut p = NetParams::init(dims, activation, &mut r).unwrap();
    for b in p.biases.iter_mut().flatten() {
        *b = 0.3 * r.random::<f64>() - 0.15;
    }
    p
}

pub fn gaussian(n: usize, r: &mut impl rand::Rng) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(r)).collect()
}

pub fn unit(n: usize, r: &mut impl rand::Rng) -> Vec<f64> {
    let v = gaussian(n, r);
    let l = norm(&v);
    v.into_iter().map(|a| a / l).collect()
}

/// A point whose hidden pre-activations are all at least `margin` from zero.
pub fn generic_point(params: &NetParams, margin: f64, r: &mut impl rand::Rng) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..params.input_dim()).map(|_| r.random::<f64>()).collect();
        if is_generic(params, &x, margin) {
            return x;
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    norm(&sub(a, b)) / norm(a).max(norm(b)).max(1e-300)
}

/// Central difference of a scalar function along every coordinate.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|k| {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[k] += h;
            m[k] -= h;
            (f(&p) - f(&m)) / (2.0 * h)
        })
        .collect()
}

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-5;

// Straightforward forward pass: explicit loops, no shared code with the crate.
pub fn naive_forward(p: &NetParams, x: &[f64]) -> Vec<f64> {
    let mut a = x.to_vec();
    let layers = p.layer_dims.len() - 1;
    for l in 0..layers {
        let (n_in, n_out) = (p.layer_dims[l], p.layer_dims[l + 1]);
        let mut z = vec![0.0; n_out];
        for j in 0..n_out {
            let mut s = p.biases[l][j];
            for k in 0..n_in {
                s += p.weights[l][j * n_in + k] * a[k];
            }
            z[j] = if l + 1 < layers { s.max(0.0) } else { s };
        }
        a = z;
    }
    a
}

pub fn naive_log_probs(p: &NetParams, x: &[f64]) -> Vec<f64> {
    let s = naive_forward(p, x);
    let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + s.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    s.iter().map(|v| v - lse).collect()
}
