//! Sweeps shared by the topic tests and the acceptance target. Each returns
//! the worst relative discrepancy it saw.

use super::*;
use lqgvar::cost_lyap::{
    finite_cost_stats_lyapunov, infinite_cost_stats, variance_cost_infinite,
    variance_cost_infinite_unreduced,
};
use lqgvar::cost_stats_expm;
use lqgvar::linalg::{
    lyap_finite, mat_exp, shifted, solve_lyapunov, solve_lyapunov_transposed, trace_product,
};
use lqgvar::{CostSpec, LtiSystem, Matrix};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn mat_rel(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// Random matrix (not necessarily stable) whose eigenvalues stay at least
/// `min_margin` from the non-Sylvester set.
pub fn random_sylvester(rng: &mut ChaCha8Rng, n: usize, min_margin: f64) -> Matrix {
    loop {
        let shift = rng.random_range(-1.0..1.0);
        let a = shifted(&(gaussian_matrix(rng, n, n) / (n as f64).sqrt()), shift);
        if sylvester_margin(&a) >= min_margin {
            return a;
        }
    }
}

fn polynomial(rng: &mut ChaCha8Rng, a: &Matrix) -> Matrix {
    let n = a.nrows();
    let c: [f64; 3] = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-0.5..0.5)];
    Matrix::identity(n, n) * c[0] + a * c[1] + a * a * c[2]
}

#[derive(Debug, Default, Clone, Copy)]
pub struct LyapunovIdentities {
    pub symmetry: f64,
    pub finite_interval: f64,
    pub linearity: f64,
    pub trace_interchange: f64,
    pub difference: f64,
}

impl LyapunovIdentities {
    pub fn worst(&self) -> f64 {
        [self.symmetry, self.finite_interval, self.linearity, self.trace_interchange, self.difference]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Symmetry, finite-interval, linearity, trace-interchange and difference
/// identities of Lyapunov solutions on `count` random Sylvester matrices.
pub fn lyapunov_identity_suite(seed: u64, count: usize) -> LyapunovIdentities {
    let mut r = rng(seed);
    let mut out = LyapunovIdentities::default();
    for i in 0..count {
        let n = 2 + i % 4;
        let a = random_sylvester(&mut r, n, 0.1);
        let q = gaussian_matrix(&mut r, n, n);
        let v = gaussian_matrix(&mut r, n, n);

        // X^Q - (X^Q)^T solves the equation with Q - Q^T; symmetric Q gives symmetric X.
        let qs = &q + q.transpose();
        let xs = solve_lyapunov(&a, &qs).unwrap();
        let x = solve_lyapunov(&a, &q).unwrap();
        let skew = solve_lyapunov(&a, &(&q - q.transpose())).unwrap();
        out.symmetry = out
            .symmetry
            .max((&xs - xs.transpose()).amax())
            .max(mat_rel(&(&x - x.transpose()), &skew));

        let t1 = r.random_range(0.0..1.0);
        let t2 = t1 + r.random_range(0.0..1.0);
        let e1 = mat_exp(&a, t1).unwrap();
        let e2 = mat_exp(&a, t2).unwrap();
        let rhs = &e1 * &q * e1.transpose() - &e2 * &q * e2.transpose();
        out.finite_interval = out
            .finite_interval
            .max(mat_rel(&lyap_finite(&a, &q, t1, t2).unwrap(), &solve_lyapunov(&a, &rhs).unwrap()));

        let c = polynomial(&mut r, &a);
        let lhs = solve_lyapunov(&a, &(&c * &q + &v)).unwrap();
        let xv = solve_lyapunov(&a, &v).unwrap();
        out.linearity = out.linearity.max(mat_rel(&lhs, &(&c * &x + &xv)));

        let f = polynomial(&mut r, &a);
        let g = polynomial(&mut r, &a.transpose());
        let xbar = solve_lyapunov_transposed(&a, &q).unwrap();
        let left = trace_product(&q, &(&f * &xv * &g));
        let right = trace_product(&xbar, &(&f * &v * &g));
        let scale = (&q * &f).norm() * (&xv * &g).norm() + (&xbar * &f).norm() * (&v * &g).norm();
        out.trace_interchange = out.trace_interchange.max((left - right).abs() / scale);

        for alpha in [-0.5, 0.3] {
            let aa = shifted(&a, alpha);
            if sylvester_margin(&aa) < 0.1 {
                continue;
            }
            let xa = solve_lyapunov(&aa, &q).unwrap();
            let middle = (&xa - &x) / (2.0 * alpha);
            let outer = solve_lyapunov(&aa, &x).unwrap();
            let inner = solve_lyapunov(&a, &xa).unwrap();
            out.difference = out.difference.max(mat_rel(&outer, &middle)).max(mat_rel(&inner, &middle));
        }
    }
    out
}

/// Lyapunov and matrix-exponential routes over 50 random systems, every
/// `alpha in {-0.8, 0, 0.3}` and `T in {0.5, 1, 5}`.
pub fn cross_method(seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for i in 0..50 {
        let n = [2, 3, 4][i % 3];
        for alpha in [-0.8, 0.0, 0.3] {
            let sys = random_comparable_system(&mut r, n, alpha, 5.0);
            for t in [0.5, 1.0, 5.0] {
                let cost = finite_cost(&mut r, n, alpha, t);
                let l = finite_cost_stats_lyapunov(&sys, &cost).unwrap();
                let e = cost_stats_expm(&sys, &cost).unwrap();
                worst = worst
                    .max(rel_diff(e.mean, l.mean))
                    .max(rel_diff(e.variance, l.variance));
            }
        }
    }
    worst
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// `|stats(alpha = eps) - stats(alpha = 0)| / |stats(alpha = 0)|` for both
/// moments, worst over `count` random systems and `eps = +-1e-6`.
pub fn alpha_continuity(seed: u64, count: usize) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for i in 0..count {
        let n = 2 + i % 3;
        let sys = random_comparable_system(&mut r, n, 0.0, 2.0);
        let q = random_weight(&mut r, n);
        let t = r.random_range(0.5..2.0);
        let base = finite_cost_stats_lyapunov(&sys, &CostSpec::finite(q.clone(), 0.0, t).unwrap()).unwrap();
        for eps in [1e-6, -1e-6] {
            let near = finite_cost_stats_lyapunov(&sys, &CostSpec::finite(q.clone(), eps, t).unwrap()).unwrap();
            worst = worst.max(rel(near.mean, base.mean)).max(rel(near.variance, base.variance));
        }
    }
    worst
}

/// Finite horizon at `T = 60/|alpha|` against the infinite-horizon formulas.
pub fn infinite_limit(seed: u64, count: usize) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for i in 0..count {
        let n = 2 + i % 3;
        let alpha = [-0.8, -0.5, -0.3][i % 3];
        let a = random_stable_with_margin(&mut r, n, alpha, &[-1.0, 0.0, 1.0, 2.0], 0.05);
        let sys = random_system(&mut r, a);
        let q = random_weight(&mut r, n);
        let inf = infinite_cost_stats(&sys, &CostSpec::infinite(q.clone(), alpha).unwrap()).unwrap();
        let fin = finite_cost_stats_lyapunov(&sys, &CostSpec::finite(q, alpha, 60.0 / alpha.abs()).unwrap()).unwrap();
        worst = worst.max(rel(fin.mean, inf.mean)).max(rel(fin.variance, inf.variance));
    }
    worst
}

/// Reduced and unreduced infinite-horizon variance expressions.
pub fn infinite_reduction(seed: u64, count: usize) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for i in 0..count {
        let n = 2 + i % 3;
        let alpha = -r.random_range(0.1..1.0);
        let a = random_stable(&mut r, n);
        let sys = random_system(&mut r, a);
        let cost = CostSpec::infinite(random_weight(&mut r, n), alpha).unwrap();
        let a = variance_cost_infinite(&sys, &cost).unwrap();
        let b = variance_cost_infinite_unreduced(&sys, &cost).unwrap();
        worst = worst.max(rel(b, a));
    }
    worst
}

/// Scalar system `x' = -x + v`, `V = 2`, `x0 ~ N(0, 1)`, weight 1, `alpha = -1/2`.
pub fn scalar_reference() -> LtiSystem {
    use nalgebra::{dmatrix, dvector};
    LtiSystem::new(dmatrix![-1.0], dmatrix![2.0], dvector![0.0], dmatrix![1.0]).unwrap()
}
