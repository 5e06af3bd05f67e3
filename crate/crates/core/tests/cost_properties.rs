mod common;

use common::checks::{alpha_continuity, infinite_limit, infinite_reduction, mat_rel, random_sylvester};
use common::*;
use lqgvar::cost_expm::{block_exponential, build_block_matrix};
use lqgvar::cost_lyap::{
    expected_cost_finite, expected_cost_infinite, finite_cost_stats_lyapunov, infinite_cost_stats,
    variance_cost_finite, variance_cost_infinite,
};
use lqgvar::gaussian_moments::{joint_quartic_expectation, JointGaussian};
use lqgvar::linalg::{mat_exp, shifted};
use lqgvar::state_moments::{cross_moment, mean_state, second_moment};
use lqgvar::{auto_cost_stats, cost_stats_expm, CostSpec, LtiSystem, Matrix, Method, Vector};
use nalgebra::{dmatrix, dvector};

#[test]
fn alpha_branches_are_continuous() {
    let worst = alpha_continuity(21, 30);
    assert!(worst < 1e-4, "{worst}");
}

#[test]
fn finite_horizon_tends_to_infinite() {
    let worst = infinite_limit(22, 30);
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn reduced_infinite_variance_matches_unreduced() {
    let worst = infinite_reduction(23, 50);
    assert!(worst < 1e-9, "{worst}");
}

#[test]
fn variance_is_nonnegative() {
    let mut r = rng(24);
    for i in 0..100 {
        let n = 2 + i % 3;
        let a = random_stable(&mut r, n);
        let sys = random_system(&mut r, a);
        let alpha = -0.1 - 0.5 * (i % 5) as f64 / 5.0;
        let stats = infinite_cost_stats(&sys, &CostSpec::infinite(random_weight(&mut r, n), alpha).unwrap()).unwrap();
        assert!(stats.variance >= 0.0 && stats.raw_variance > -1e-8 * (1.0 + stats.mean * stats.mean));
    }
}

#[test]
fn mean_matches_quadrature() {
    let mut r = rng(25);
    for alpha in [-0.4, 0.0, 0.25] {
        let sys = random_comparable_system(&mut r, 3, alpha, 2.0);
        let q = random_weight(&mut r, 3);
        let t = 1.5;
        let exact = expected_cost_finite(&sys, &CostSpec::finite(q.clone(), alpha, t).unwrap()).unwrap();
        let quad = quadrature::double_exponential::integrate(
            |s| (2.0 * alpha * s).exp() * (second_moment(&sys, s).unwrap() * &q).trace(),
            0.0,
            t,
            1e-13,
        )
        .integral;
        assert!(rel_diff(exact, quad) < 1e-10, "{exact} {quad}");
    }
}

#[test]
fn infinite_mean_matches_quadrature() {
    let mut r = rng(26);
    let a = random_stable(&mut r, 2);
    let sys = random_system(&mut r, a);
    let q = random_weight(&mut r, 2);
    let alpha = -0.3;
    let exact = expected_cost_infinite(&sys, &CostSpec::infinite(q.clone(), alpha).unwrap()).unwrap();
    let quad = quad_matrix_semi_infinite(
        |s| dmatrix![(2.0 * alpha * s).exp() * (second_moment(&sys, s).unwrap() * &q).trace()],
        1e-12,
    )[(0, 0)];
    assert!(rel_diff(exact, quad) < 1e-9, "{exact} {quad}");
}

// Var[J_T] = int int e^{2 alpha (t1 + t2)} Cov(x1^T Q x1, x2^T Q x2) dt1 dt2,
// with the quartic moment taken from the joint Gaussian of (x(t1), x(t2)).
fn variance_by_trapezoid(sys: &LtiSystem, q: &Matrix, alpha: f64, t: f64, steps: usize) -> f64 {
    let h = t / steps as f64;
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * h).collect();
    let means: Vec<Vector> = times.iter().map(|&s| mean_state(sys, s).unwrap()).collect();
    let seconds: Vec<Matrix> = times.iter().map(|&s| second_moment(sys, s).unwrap()).collect();
    let weight = |k: usize| if k == 0 || k == steps { 0.5 } else { 1.0 };
    let mut total = 0.0;
    for i in 0..=steps {
        for j in i..=steps {
            let (mi, mj) = (&means[i], &means[j]);
            let cross = cross_moment(sys, times[i], times[j]).unwrap();
            let jg = JointGaussian::new(
                mi.clone(),
                mj.clone(),
                &seconds[i] - mi * mi.transpose(),
                &cross - mi * mj.transpose(),
                &seconds[j] - mj * mj.transpose(),
            )
            .unwrap();
            let joint = joint_quartic_expectation(&jg, q, q).unwrap();
            let cov = joint - (&seconds[i] * q).trace() * (&seconds[j] * q).trace();
            let w = weight(i) * weight(j) * (2.0 * alpha * (times[i] + times[j])).exp();
            total += if i == j { w * cov } else { 2.0 * w * cov };
        }
    }
    total * h * h
}

#[test]
fn variance_matches_quartic_quadrature() {
    let a = dmatrix![-0.7, 0.4; -0.3, -1.1];
    let sys = LtiSystem::deterministic_start(a, dmatrix![0.8, 0.1; 0.1, 0.5], dvector![1.0, -0.5]).unwrap();
    let q = dmatrix![1.0, 0.2; 0.2, 0.6];
    for alpha in [-0.3, 0.0] {
        let t = 0.6;
        let exact = variance_cost_finite(&sys, &CostSpec::finite(q.clone(), alpha, t).unwrap()).unwrap();
        let quad = variance_by_trapezoid(&sys, &q, alpha, t, 240);
        assert!(((exact - quad) / exact).abs() < 1e-4, "{exact} {quad}");
    }
}

#[test]
fn mean_grows_with_horizon() {
    let mut r = rng(27);
    for alpha in [-0.8, 0.0, 0.3] {
        let sys = random_comparable_system(&mut r, 3, alpha, 5.0);
        let q = random_weight(&mut r, 3);
        let mut last = 0.0;
        for k in 1..=25 {
            let cost = CostSpec::finite(q.clone(), alpha, 0.2 * k as f64).unwrap();
            let m = auto_cost_stats(&sys, &cost).unwrap().mean;
            assert!(m >= last);
            last = m;
        }
    }
}

#[test]
fn scalar_examples() {
    let stationary = LtiSystem::new(dmatrix![-1.0], dmatrix![2.0], dvector![0.0], dmatrix![1.0]).unwrap();
    let q = dmatrix![1.0];
    let mean = expected_cost_finite(&stationary, &CostSpec::finite(q.clone(), -0.5, 3.0).unwrap()).unwrap();
    assert!((mean - (1.0 - (-3f64).exp())).abs() < 1e-14);
    assert!((mean - 0.95021).abs() < 1e-5);
    let inf = CostSpec::infinite(q.clone(), -0.5).unwrap();
    assert!((expected_cost_infinite(&stationary, &inf).unwrap() - 1.0).abs() < 1e-14);
    assert!((variance_cost_infinite(&stationary, &inf).unwrap() - 2.0 / 3.0).abs() < 1e-14);
    let still = LtiSystem::new(dmatrix![-1.0], dmatrix![0.0], dvector![0.0], dmatrix![0.0]).unwrap();
    assert_eq!(expected_cost_infinite(&still, &inf).unwrap(), 0.0);
}

#[test]
fn deterministic_system_has_zero_variance() {
    let sys = LtiSystem::deterministic_start(dmatrix![-1.0, 2.0; 0.0, -0.5], Matrix::zeros(2, 2), dvector![1.0, 2.0]).unwrap();
    let q = Matrix::identity(2, 2);
    let inf = infinite_cost_stats(&sys, &CostSpec::infinite(q.clone(), -0.1).unwrap()).unwrap();
    assert!(inf.variance <= 1e-12 * inf.mean * inf.mean);
    for alpha in [-0.3, 0.0, 0.2] {
        let stats = finite_cost_stats_lyapunov(&sys, &CostSpec::finite(q.clone(), alpha, 2.0).unwrap()).unwrap();
        assert!(stats.variance <= 1e-10 * stats.mean * stats.mean, "{stats:?}");
    }
}

#[test]
fn block_matrix_layout() {
    let sys = LtiSystem::new(dmatrix![0.3], dmatrix![0.7], dvector![0.0], dmatrix![1.0]).unwrap();
    let c = build_block_matrix(&sys, &CostSpec::finite(dmatrix![2.0], 0.1, 1.0).unwrap()).unwrap();
    let diag: Vec<f64> = (0..5).map(|i| c[(i, i)]).collect();
    let expected = [-0.3 - 0.2, 0.3, -0.3, 0.3 + 0.2, -0.3 + 0.2];
    for (d, e) in diag.iter().zip(expected) {
        assert!((d - e).abs() < 1e-15);
    }
    assert_eq!(c[(0, 1)], 2.0);
    assert_eq!(c[(3, 4)], 0.7);

    let zero = LtiSystem::new(Matrix::zeros(2, 2), Matrix::zeros(2, 2), Vector::zeros(2), Matrix::zeros(2, 2)).unwrap();
    let c = build_block_matrix(&zero, &CostSpec::finite(Matrix::zeros(2, 2), 0.0, 1.0).unwrap()).unwrap();
    assert_eq!(c, Matrix::zeros(10, 10));
}

#[test]
fn c44_is_shifted_exponential() {
    let mut r = rng(28);
    for alpha in [-0.5, 0.0, 0.4] {
        let a = random_sylvester(&mut r, 3, 0.1);
        let sys = random_system(&mut r, a.clone());
        let t = 1.2;
        let blocks = block_exponential(&sys, &CostSpec::finite(random_weight(&mut r, 3), alpha, t).unwrap()).unwrap();
        assert!(mat_rel(&blocks.c44, &mat_exp(&shifted(&a, 2.0 * alpha), t).unwrap()) < 1e-10);
    }
}

#[test]
fn expm_zero_weight() {
    let mut r = rng(29);
    let a = random_stable(&mut r, 3);
    let sys = random_system(&mut r, a);
    let stats = cost_stats_expm(&sys, &CostSpec::finite(Matrix::zeros(3, 3), -0.2, 2.0).unwrap()).unwrap();
    assert_eq!((stats.mean, stats.variance), (0.0, 0.0));
}

#[test]
fn route_selection() {
    let mut r = rng(30);
    let a = random_stable(&mut r, 2);
    let sys = random_system(&mut r, a);
    let q = random_weight(&mut r, 2);
    let inf = auto_cost_stats(&sys, &CostSpec::infinite(q.clone(), -0.2).unwrap()).unwrap();
    assert_eq!(inf.method, Method::Lyapunov);

    let double = LtiSystem::new(dmatrix![0.0, 1.0; 0.0, 0.0], Matrix::identity(2, 2), Vector::zeros(2), Matrix::identity(2, 2)).unwrap();
    let cost = CostSpec::finite(Matrix::identity(2, 2), 0.0, 1.0).unwrap();
    assert_eq!(auto_cost_stats(&double, &cost).unwrap().method, Method::Expm);
    assert!(finite_cost_stats_lyapunov(&double, &cost).is_err());
}
