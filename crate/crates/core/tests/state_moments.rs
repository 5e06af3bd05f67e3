mod common;

use common::checks::mat_rel;
use common::*;
use lqgvar::linalg::{mat_exp, min_symmetric_eigenvalue, solve_lyapunov};
use lqgvar::state_moments::{cross_moment, mean_state, second_moment};
use lqgvar::{LtiSystem, Matrix, Vector};
use nalgebra::{dmatrix, dvector};

#[test]
fn derivative_identity() {
    let mut r = rng(11);
    let h = 1e-4;
    for _ in 0..10 {
        let a = random_stable(&mut r, 3);
        let sys = random_system(&mut r, a.clone());
        for t in [0.3, 1.0, 2.5] {
            let fd = (second_moment(&sys, t + h).unwrap() - second_moment(&sys, t - h).unwrap()) / (2.0 * h);
            let s = second_moment(&sys, t).unwrap();
            let exact = &a * &s + &s * a.transpose() + sys.v();
            assert!(mat_rel(&fd, &exact) < 1e-5, "{}", mat_rel(&fd, &exact));
        }
    }
}

#[test]
fn symmetry_and_psd() {
    let mut r = rng(12);
    for i in 0..20 {
        let n = 2 + i % 3;
        let a = random_stable(&mut r, n);
        let sys = random_system(&mut r, a);
        for t in [0.0, 0.1, 0.7, 3.0, 10.0] {
            let s = second_moment(&sys, t).unwrap();
            assert_eq!(s, s.transpose());
            let mu = mean_state(&sys, t).unwrap();
            let cov = &s - &mu * mu.transpose();
            assert!(min_symmetric_eigenvalue(&cov) >= -1e-10);
        }
        let (t1, t2) = (0.4, 1.3);
        assert_eq!(cross_moment(&sys, t1, t2).unwrap(), cross_moment(&sys, t2, t1).unwrap().transpose());
        assert_eq!(cross_moment(&sys, t2, t2).unwrap(), second_moment(&sys, t2).unwrap());
    }
}

#[test]
fn stationary_limit() {
    let mut r = rng(13);
    for _ in 0..5 {
        let a = random_stable(&mut r, 3);
        let sys = random_system(&mut r, a.clone());
        let mut t = 10.0;
        while mat_exp(&a, t).unwrap().norm() >= 1e-12 {
            t *= 1.5;
        }
        let xv = solve_lyapunov(&a, sys.v()).unwrap();
        let s = second_moment(&sys, t).unwrap();
        assert!((&s - &xv).norm() <= 1e-10 * (1.0 + xv.norm()));
    }
}

#[test]
fn non_sylvester_drift_uses_integral_form() {
    // Double integrator: Sigma(t) = [[t^3/3, t^2/2], [t^2/2, t]] from zero start.
    let sys = LtiSystem::new(dmatrix![0.0, 1.0; 0.0, 0.0], dmatrix![0.0, 0.0; 0.0, 1.0], Vector::zeros(2), Matrix::zeros(2, 2)).unwrap();
    let t: f64 = 1.7;
    let s = second_moment(&sys, t).unwrap();
    let exact = dmatrix![t.powi(3) / 3.0, t * t / 2.0; t * t / 2.0, t];
    assert!(mat_rel(&s, &exact) < 1e-13);
    assert!(cross_moment(&sys, 0.5, 1.0).is_err());
}

#[test]
fn scalar_examples() {
    let sys = LtiSystem::new(dmatrix![-1.0], dmatrix![2.0], dvector![0.0], dmatrix![3.0]).unwrap();
    let s1 = second_moment(&sys, 1.0).unwrap()[(0, 0)];
    assert!((s1 - ((-2f64).exp() * 2.0 + 1.0)).abs() < 1e-14);
    assert!((s1 - 1.27067).abs() < 1e-5);
    let c = cross_moment(&sys, 0.5, 1.0).unwrap()[(0, 0)];
    let exact = (-0.5f64).exp() * 2.0 * (-1f64).exp() + (-0.5f64).exp();
    assert!((c - exact).abs() < 1e-14);
    // Stationary start: only the lag term survives.
    let stat = LtiSystem::new(dmatrix![-1.0], dmatrix![2.0], dvector![0.0], dmatrix![1.0]).unwrap();
    let c = cross_moment(&stat, 0.2, 0.9).unwrap()[(0, 0)];
    assert!((c - (-0.7f64).exp()).abs() < 1e-15);
}

#[test]
fn second_moment_matches_quadrature() {
    let mut r = rng(14);
    let a = random_stable(&mut r, 3);
    let sys = random_system(&mut r, a.clone());
    let t = 1.3;
    let e = mat_exp(&a, t).unwrap();
    let noise = quad_matrix(
        |s| {
            let es = mat_exp(&a, s).unwrap();
            &es * sys.v() * es.transpose()
        },
        0.0,
        t,
        1e-13,
    );
    let expected = &e * sys.sigma0() * e.transpose() + noise;
    assert!(mat_rel(&second_moment(&sys, t).unwrap(), &expected) < 1e-10);
}
