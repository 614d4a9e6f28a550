mod common;

use common::*;
use foliate::geometry::{
    self, involutivity_residual, jacobi, kl_divergence, kl_quadratic_check, project_onto_distribution,
    project_onto_kernel, spectrum, FactoredPSD, GeometryError, RowSpace, DEFAULT_BRACKET_STEP,
};
use foliate::net::{self, Activation, NetParams};
use foliate::rng;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

// Brute-force n×n expectation, built entry by entry from the C factors.
fn dense_expectation(weights: &[f64], factors: &[Vec<f64>]) -> DMatrix<f64> {
    let n = factors[0].len();
    DMatrix::from_fn(n, n, |a, b| {
        weights.iter().zip(factors).map(|(p, g)| p * g[a] * g[b]).sum()
    })
}

fn dense_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().cloned().collect();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    v
}

#[test]
fn factored_g_equals_dense_expectation() {
    let mut r = rng::stream(21, "pts");
    for k in 0..20 {
        let p = random_net(&[4, 3, 2], 500 + k);
        let x = generic_point(&p, 1e-3, &mut r);
        let g = geometry::local_data_matrix(&p, &x).unwrap();
        let jac = net::input_jacobian(&p, &x).unwrap();
        let oracle = dense_expectation(&jac.probs, &jac.rows);
        let ours = g.densify();
        for a in 0..4 {
            for b in 0..4 {
                assert!((ours[a * 4 + b] - oracle[(a, b)]).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn factored_fisher_equals_dense_expectation() {
    let mut r = rng::stream(22, "pts");
    for k in 0..20 {
        let p = random_net(&[4, 3, 2], 600 + k);
        let x = generic_point(&p, 1e-3, &mut r);
        let f = geometry::local_fisher_matrix(&p, &x).unwrap();
        let (grads, probs) = net::param_log_jacobian(&p, &x).unwrap();
        let flat: Vec<Vec<f64>> = grads.iter().map(NetParams::flatten).collect();
        let oracle = dense_expectation(&probs, &flat);
        let d = f.dim();
        let ours = f.densify();
        for a in 0..d {
            for b in 0..d {
                assert!((ours[a * d + b] - oracle[(a, b)]).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn gram_spectrum_matches_dense_eigensolve() {
    let mut r = rng::stream(23, "pts");
    for case in 0..20 {
        let c = 6;
        let n = 5 + case % 7;
        let raw: Vec<f64> = (0..c).map(|_| 0.05 + rand::Rng::random::<f64>(&mut r)).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let factors: Vec<Vec<f64>> = (0..c).map(|_| gaussian(n, &mut r)).collect();
        let m = FactoredPSD { weights: weights.clone(), factors: factors.clone() };
        let s = spectrum(&m);
        let dense = dense_eigenvalues(&dense_expectation(&weights, &factors));
        for (k, lam) in s.eigenvalues.iter().enumerate() {
            let oracle = dense.get(k).copied().unwrap_or(0.0);
            assert!((lam - oracle).abs() <= 1e-9 * dense[0].max(1.0), "case {case}: {lam} vs {oracle}");
        }
        let direct: f64 = weights.iter().zip(&factors).map(|(p, g)| p * dot(g, g)).sum();
        assert!((s.trace - direct).abs() <= 1e-10 * direct);
        let sum: f64 = s.eigenvalues.iter().sum();
        assert!((sum - s.trace).abs() <= 1e-10 * s.trace);
    }
}

#[test]
fn single_factor_spectrum() {
    let g = vec![1.0, -2.0, 2.0];
    let s = spectrum(&FactoredPSD { weights: vec![1.0], factors: vec![g] });
    assert!((s.eigenvalues[0] - 9.0).abs() < 1e-12);
    assert!(s.eigenvalues[1..].iter().all(|v| v.abs() < 1e-12));
    assert_eq!(s.soft_rank, 1);
}

#[test]
fn jacobi_diagonalizes() {
    let mut r = rng::stream(24, "pts");
    let n = 7;
    let b: Vec<f64> = gaussian(n * n, &mut r);
    let a: Vec<f64> = (0..n * n).map(|k| b[k] + b[(k % n) * n + k / n]).collect();
    let e = jacobi::symmetric_eigen(&a, n);
    let oracle = dense_eigenvalues(&DMatrix::from_row_slice(n, n, &a));
    for (x, y) in e.values.iter().zip(&oracle) {
        assert!((x - y).abs() < 1e-10);
    }
}

#[test]
fn mnist_sized_storage_is_factored() {
    let p = NetParams::zeros(&[784, 128, 10], Activation::Relu).unwrap();
    let g = geometry::local_data_matrix(&p, &vec![0.5; 784]).unwrap();
    assert_eq!(g.stored_len(), 7840);
    assert!(g.trace().abs() == 0.0);
}

#[test]
fn rank_bounds_on_random_draws() {
    let mut r = rng::stream(25, "pts");
    for k in 0..50 {
        let c = 2 + (k % 5) as usize;
        let p = random_net(&[6, 8, c], 700 + k);
        let x = generic_point(&p, 1e-4, &mut r);
        let g = spectrum(&geometry::local_data_matrix(&p, &x).unwrap());
        let f = spectrum(&geometry::local_fisher_matrix(&p, &x).unwrap());
        assert!(g.soft_rank < c && f.soft_rank < c, "C={c}: {} {}", g.soft_rank, f.soft_rank);
        assert!(g.lambda_min() >= -1e-10 * g.lambda_max());
    }
}

#[test]
fn one_hot_prediction_has_vanishing_fisher_trace() {
    let mut p = random_net(&[3, 4, 3], 3);
    p.biases[1] = vec![800.0, 0.0, 0.0];
    let f = geometry::local_fisher_matrix(&p, &[0.2, 0.4, 0.1]).unwrap();
    assert!(f.trace() < 1e-300);
}

// Modified Gram–Schmidt on the rows, then Σ ⟨v,q⟩q.
fn gram_schmidt_projection(rows: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    let scale = rows.iter().map(|r| norm(r)).fold(0.0, f64::max);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for row in rows {
        let mut w = row.clone();
        for q in &basis {
            let c = dot(&w, q);
            w.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
        }
        let l = norm(&w);
        if l > 1e-8 * scale {
            basis.push(w.into_iter().map(|a| a / l).collect());
        }
    }
    let mut out = vec![0.0; v.len()];
    for q in &basis {
        let c = dot(v, q);
        out.iter_mut().zip(q).for_each(|(a, b)| *a += c * b);
    }
    out
}

#[test]
fn projection_matches_gram_schmidt() {
    let mut r = rng::stream(26, "pts");
    for k in 0..30 {
        let p = random_net(&[4, 3, 2], 800 + k);
        let x = generic_point(&p, 1e-3, &mut r);
        let jac = net::input_jacobian(&p, &x).unwrap();
        let v = gaussian(4, &mut r);
        let ours = project_onto_distribution(&v, &jac);
        let oracle = gram_schmidt_projection(&jac.rows, &v);
        assert!(norm(&sub(&ours, &oracle)) <= 1e-9 * norm(&v));
        let k = project_onto_kernel(&v, &jac);
        for row in &jac.rows {
            assert!(dot(&k, row).abs() <= 1e-9 * norm(row) * norm(&v));
        }
        let both: Vec<f64> = ours.iter().zip(&k).map(|(a, b)| a + b).collect();
        assert!(norm(&sub(&both, &v)) <= 1e-15 * norm(&v));
    }
}

#[test]
fn projection_seed_cases() {
    let rows = vec![vec![1.0, 0.0, 0.0, 0.0], vec![-1.0, 0.0, 0.0, 0.0], vec![0.0, 2.0, 0.0, 0.0]];
    let space = RowSpace::new(&rows);
    assert_eq!(space.rank(), 2);
    let inside = [3.0, -1.0, 0.0, 0.0];
    let back = space.project(&inside);
    assert!(norm(&sub(&back, &inside)) <= 1e-10 * norm(&inside));
    assert!(norm(&space.project(&[0.0, 0.0, 1.0, -4.0])) == 0.0);
    assert!(norm(&space.project_complement(&inside)) <= 1e-10);
    let zero = RowSpace::new(&[vec![0.0; 4], vec![0.0; 4]]);
    assert_eq!(zero.project(&inside), vec![0.0; 4]);
}

#[test]
fn kernel_vectors_are_annihilated_by_dense_g() {
    let mut r = rng::stream(27, "pts");
    for k in 0..20 {
        let p = random_net(&[9, 7, 4], 900 + k);
        let x = generic_point(&p, 1e-3, &mut r);
        let jac = net::input_jacobian(&p, &x).unwrap();
        let dense = dense_expectation(&jac.probs, &jac.rows);
        let lmax = dense_eigenvalues(&dense)[0];
        for _ in 0..20 {
            let kv = project_onto_kernel(&gaussian(9, &mut r), &jac);
            let gk = &dense * DVector::from_column_slice(&kv);
            assert!(gk.norm() <= 1e-8 * lmax * norm(&kv));
        }
    }
}

proptest! {
    #[test]
    fn pythagoras(seed in 0u64..1000, v in proptest::collection::vec(-10.0f64..10.0, 6)) {
        let p = random_net(&[6, 5, 4], seed);
        let jac = net::input_jacobian(&p, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        let pv = project_onto_distribution(&v, &jac);
        let kv = project_onto_kernel(&v, &jac);
        let lhs = dot(&v, &v);
        prop_assert!((lhs - dot(&pv, &pv) - dot(&kv, &kv)).abs() <= 1e-9 * lhs.max(1e-300));
    }

    #[test]
    fn projection_is_idempotent_and_self_adjoint(
        seed in 0u64..1000,
        u in proptest::collection::vec(-1.0f64..1.0, 6),
        v in proptest::collection::vec(-1.0f64..1.0, 6),
    ) {
        let p = random_net(&[6, 5, 4], seed);
        let jac = net::input_jacobian(&p, &[0.6, 0.5, 0.4, 0.3, 0.2, 0.1]).unwrap();
        let pv = project_onto_distribution(&v, &jac);
        let pu = project_onto_distribution(&u, &jac);
        let ppv = project_onto_distribution(&pv, &jac);
        prop_assert!(norm(&sub(&ppv, &pv)) <= 1e-9 * norm(&pv).max(1e-300));
        prop_assert!((dot(&pu, &v) - dot(&u, &pv)).abs() <= 1e-9 * norm(&u) * norm(&v));
        prop_assert!(norm(&pv) <= norm(&v) * (1.0 + 1e-12));
    }
}

#[test]
fn kl_rejects_non_distributions() {
    assert!(kl_divergence(&[0.5, 0.6], &[0.5, 0.5]).is_err());
    assert!(kl_divergence(&[1.0, 0.0], &[0.5, 0.5]).is_err());
    assert!(kl_divergence(&[0.5, 0.5], &[0.3, 0.3, 0.4]).is_err());
}

#[test]
fn kl_remainder_is_third_order() {
    let mut r = rng::stream(28, "pts");
    let mut checked = 0;
    for k in 0..40 {
        if checked == 20 {
            break;
        }
        let p = random_net(&[5, 8, 4], 1000 + k);
        let x = generic_point(&p, 5e-2, &mut r);
        let u = unit(5, &mut r);
        let (t, half) = (2e-3, 1e-3);
        let (Ok(a), Ok(b)) = (kl_quadratic_check(&p, &x, &u, t), kl_quadratic_check(&p, &x, &u, half)) else {
            continue;
        };
        let ratio = a.abs_error / b.abs_error;
        assert!((6.0..=10.0).contains(&ratio), "ratio {ratio}, errors {:e} {:e}", a.abs_error, b.abs_error);
        checked += 1;
    }
    assert_eq!(checked, 20);
}

#[test]
fn kl_vanishes_along_kernel_and_at_zero_step() {
    let mut r = rng::stream(29, "pts");
    for k in 0..20 {
        let p = random_net(&[8, 10, 3], 1100 + k);
        let x = generic_point(&p, 1e-2, &mut r);
        let jac = net::input_jacobian(&p, &x).unwrap();
        let kv = project_onto_kernel(&gaussian(8, &mut r), &jac);
        let u: Vec<f64> = kv.iter().map(|a| a / norm(&kv)).collect();
        let c = kl_quadratic_check(&p, &x, &u, 1e-3).unwrap();
        assert!(c.predicted.abs() <= 1e-20);
        assert!(c.measured <= 1e-9);
        let z = kl_quadratic_check(&p, &x, &u, 0.0).unwrap();
        assert_eq!((z.measured, z.predicted), (0.0, 0.0));
    }
}

#[test]
fn kl_check_reports_region_crossing() {
    let mut p = NetParams::zeros(&[1, 1, 2], Activation::Relu).unwrap();
    p.weights[0] = vec![1.0];
    p.weights[1] = vec![1.0, -1.0];
    let e = kl_quadratic_check(&p, &[-0.1], &[1.0], 0.5).unwrap_err();
    assert!(matches!(e, GeometryError::RegionCrossing { .. }));
}

// Linear-softmax bracket: b = Wᵀ (diag p − p pᵀ) W (g_j − g_i).
fn linear_bracket(p: &NetParams, x: &[f64], i: usize, j: usize) -> Vec<f64> {
    let (n, c) = (p.layer_dims[0], p.layer_dims[1]);
    let w = DMatrix::from_row_slice(c, n, &p.weights[0]);
    let jac = net::input_jacobian(p, x).unwrap();
    let probs = DVector::from_column_slice(&jac.probs);
    let cov = DMatrix::from_diagonal(&probs) - &probs * probs.transpose();
    let diff = DVector::from_column_slice(&sub(&jac.rows[j], &jac.rows[i]));
    (w.transpose() * cov * &w * diff).iter().cloned().collect()
}

#[test]
fn linear_softmax_bracket_matches_closed_form() {
    let mut r = rng::stream(30, "pts");
    for k in 0..10 {
        let p = random_net(&[6, 4], 1200 + k);
        let x = gaussian(6, &mut r);
        for (i, j) in [(0, 1), (1, 3), (2, 0)] {
            let res = involutivity_residual(&p, &x, i, j, DEFAULT_BRACKET_STEP).unwrap();
            let oracle = linear_bracket(&p, &x, i, j);
            let on = norm(&oracle);
            assert!((res.bracket_norm - on).abs() <= 1e-6 * on, "{} vs {on}", res.bracket_norm);
            let jac = net::input_jacobian(&p, &x).unwrap();
            let out = norm(&project_onto_kernel(&oracle, &jac));
            assert!(out <= 1e-9 * on);
            assert!(res.relative <= 1e-6, "relative residual {:e}", res.relative);
        }
    }
}

#[test]
fn relu_brackets_stay_in_span() {
    let mut r = rng::stream(31, "pts");
    let mut accepted = 0;
    for k in 0..60 {
        let p = random_net(&[10, 16, 5], 1300 + k);
        let x = generic_point(&p, 1e-2, &mut r);
        let mut ok = true;
        for i in 0..5 {
            for j in i + 1..5 {
                match involutivity_residual(&p, &x, i, j, DEFAULT_BRACKET_STEP) {
                    Ok(res) => assert!(res.relative <= 1e-3, "{i},{j}: {:e}", res.relative),
                    Err(GeometryError::RegionCrossing { .. }) => ok = false,
                    Err(e) => panic!("{e}"),
                }
            }
        }
        accepted += usize::from(ok);
    }
    assert!(accepted >= 20, "only {accepted} points away from kinks");
}

#[test]
fn region_guard_flags_a_kink() {
    let mut p = NetParams::zeros(&[2, 1, 2], Activation::Relu).unwrap();
    p.weights[0] = vec![1.0, 0.0];
    p.weights[1] = vec![1.0, -1.0];
    let e = geometry::region_probe(&p, &[1e-5, 0.0], &[1.0, 0.0], 1e-4).unwrap_err();
    assert!(matches!(e, GeometryError::RegionCrossing { .. }));
    assert!(geometry::region_probe(&p, &[1.0, 0.0], &[1.0, 0.0], 1e-4).is_ok());
}

// Exploratory: smooth activations are not covered by the theorem; only report.
#[test]
fn tanh_bracket_residual_is_reported() {
    let mut r = rng::stream(32, "pts");
    let p = random_net_with(&[10, 16, 5], Activation::Tanh, 5);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let x = gaussian(10, &mut r);
        let res = involutivity_residual(&p, &x, 0, 1, DEFAULT_BRACKET_STEP).unwrap();
        assert!(res.relative.is_finite());
        worst = worst.max(res.relative);
    }
    println!("tanh: worst relative bracket residual {worst:.3e}");
}

#[test]
fn param_space_residual_is_reported() {
    let mut r = rng::stream(33, "pts");
    let p = random_net(&[4, 6, 3], 9);
    let x = generic_point(&p, 0.05, &mut r);
    match geometry::param_involutivity_residual(&p, &x, 0, 1, 1e-5) {
        Ok(res) => {
            assert!(res.relative.is_finite());
            println!("parameter space: relative bracket residual {:.3e}", res.relative);
        }
        Err(GeometryError::RegionCrossing { .. }) => println!("parameter space: probe crossed a kink"),
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn suites_pass_when_g_has_full_rank() {
    // n <= C - 1: the rows span R^n and the kernel is trivial.
    let mut r = rng::stream(33, "pts");
    let mut full = 0;
    for k in 0..10 {
        let p = random_net(&[4, 11, 6], 1400 + k);
        let x = generic_point(&p, 1e-3, &mut r);
        let report = foliate::suite::run_suites(&p, &[x.clone()], Default::default(), &mut r);
        assert!(report.passed(), "{}", report.to_csv());
        let jac = net::input_jacobian(&p, &x).unwrap();
        full += usize::from(RowSpace::new(&jac.rows).is_full());
    }
    assert!(full >= 5, "only {full} full-rank draws");
}
