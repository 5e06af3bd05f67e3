#![allow(dead_code)]

pub mod checks;

use lqgvar::linalg::{eigenvalues, shifted};
use lqgvar::cost_expm::{expm_dynamic_range, EXPM_DYNAMIC_RANGE_LIMIT};
use lqgvar::{CostSpec, LtiSystem, Matrix, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Random symmetric PSD matrix `M M^T / n`.
pub fn random_psd(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let m = gaussian_matrix(rng, n, n);
    &m * m.transpose() / n as f64
}

/// `min |lambda_i + lambda_j|` over all eigenvalue pairs, `i = j` included.
pub fn sylvester_margin(a: &Matrix) -> f64 {
    let eigs = eigenvalues(a).unwrap();
    let mut best = f64::INFINITY;
    for (i, li) in eigs.iter().enumerate() {
        for lj in &eigs[i..] {
            best = best.min((li + lj).norm());
        }
    }
    best
}

/// Random stable drift with spectral abscissa in `[-1.2, -0.2]`.
pub fn random_stable(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let g = gaussian_matrix(rng, n, n) / (n as f64).sqrt();
    let abscissa = eigenvalues(&g)
        .unwrap()
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let margin = rng.random_range(0.2..1.2);
    shifted(&g, -(abscissa + margin))
}

/// Random stable drift whose shifts `A + k alpha I` for the given `ks` stay
/// at least `min_margin` away from the non-Sylvester set.
pub fn random_stable_with_margin(
    rng: &mut ChaCha8Rng,
    n: usize,
    alpha: f64,
    ks: &[f64],
    min_margin: f64,
) -> Matrix {
    loop {
        let a = random_stable(rng, n);
        if ks
            .iter()
            .all(|k| sylvester_margin(&shifted(&a, k * alpha)) >= min_margin)
        {
            return a;
        }
    }
}

/// System with random PSD noise, random mean and random initial covariance.
pub fn random_system(rng: &mut ChaCha8Rng, a: Matrix) -> LtiSystem {
    let n = a.nrows();
    let v = random_psd(rng, n);
    let mu0 = gaussian_vector(rng, n) * 0.7;
    let cov = random_psd(rng, n);
    let sigma0 = &cov + &mu0 * mu0.transpose();
    LtiSystem::new(a, v, mu0, sigma0).unwrap()
}

pub fn random_weight(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    random_psd(rng, n) + Matrix::identity(n, n) * 0.1
}

pub fn finite_cost(rng: &mut ChaCha8Rng, n: usize, alpha: f64, t: f64) -> CostSpec {
    CostSpec::finite(random_weight(rng, n), alpha, t).unwrap()
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + b.abs())
}

/// Random system for comparing the two cost routes: shifts by `-alpha`,
/// `alpha` and `2 alpha` keep a Sylvester margin, and `e^{C t_max}` stays
/// within the matrix-exponential route's dynamic range.
pub fn random_comparable_system(rng: &mut ChaCha8Rng, n: usize, alpha: f64, t_max: f64) -> LtiSystem {
    loop {
        let a = random_stable_with_margin(rng, n, alpha, &[-1.0, 0.0, 1.0, 2.0], 0.05);
        let sys = random_system(rng, a);
        let probe = CostSpec::finite(Matrix::identity(n, n), alpha, t_max).unwrap();
        if expm_dynamic_range(&sys, &probe).unwrap() <= EXPM_DYNAMIC_RANGE_LIMIT {
            return sys;
        }
    }
}

/// Entrywise adaptive quadrature of a matrix-valued integrand.
pub fn quad_matrix(f: impl Fn(f64) -> Matrix, a: f64, b: f64, tol: f64) -> Matrix {
    let shape = f(a).shape();
    Matrix::from_fn(shape.0, shape.1, |i, j| {
        quadrature::double_exponential::integrate(|t| f(t)[(i, j)], a, b, tol).integral
    })
}

/// `int_0^inf f(t) dt` through `t = s / (1 - s)`.
pub fn quad_matrix_semi_infinite(f: impl Fn(f64) -> Matrix, tol: f64) -> Matrix {
    let shape = f(0.0).shape();
    Matrix::from_fn(shape.0, shape.1, |i, j| {
        quadrature::double_exponential::integrate(
            |s| {
                if s >= 1.0 {
                    return 0.0;
                }
                let t = s / (1.0 - s);
                f(t)[(i, j)] / ((1.0 - s) * (1.0 - s))
            },
            0.0,
            1.0,
            tol,
        )
        .integral
    })
}
