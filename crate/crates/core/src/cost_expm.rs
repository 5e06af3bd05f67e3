//! Finite-horizon cost mean and variance from one `5n x 5n` matrix
//! exponential. No spectral conditions are needed, but accuracy degrades as
//! the exponential's dynamic range grows with `T`.

use crate::cost_lyap::{
    clamp_variance, finite_cost_stats_lyapunov, infinite_cost_stats, CostSpec, CostStats,
    Horizon, Method,
};
use crate::error::{ConditionCheck, Error, Result};
use crate::linalg::{eigenvalues, mat_exp, shifted, trace_product, Matrix};
use crate::state_moments::LtiSystem;

/// Largest `T * max |Re lambda(C)|` for which the automatic policy prefers expm.
pub const EXPM_DYNAMIC_RANGE_LIMIT: f64 = 12.0;

/// Blocks of `e^{C T}` consumed by the mean and variance formulas.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockExpResult {
    pub c12: Matrix,
    pub c13: Matrix,
    pub c14: Matrix,
    pub c15: Matrix,
    pub c44: Matrix,
}

/// The block upper-triangular generator
///
/// ```text
/// [ -A_2a^T  Q    0     0     0       ]
/// [  0       A    V     0     0       ]
/// [  0       0   -A^T   Q     0       ]
/// [  0       0    0     A_2a  V       ]
/// [  0       0    0     0    -A_-2a^T ]
/// ```
///
/// with `A_k = A + k alpha I`.
pub fn build_block_matrix(sys: &LtiSystem, cost: &CostSpec) -> Result<Matrix> {
    cost.check_against(sys)?;
    let n = sys.dim();
    let a = sys.a();
    let alpha = cost.alpha();
    let q = cost.q();
    let v = sys.v();
    let mut c = Matrix::zeros(5 * n, 5 * n);
    let mut put = |row: usize, col: usize, m: &Matrix| {
        c.view_mut((row * n, col * n), (n, n)).copy_from(m);
    };
    put(0, 0, &(-shifted(a, 2.0 * alpha).transpose()));
    put(0, 1, q);
    put(1, 1, a);
    put(1, 2, v);
    put(2, 2, &(-a.transpose()));
    put(2, 3, q);
    put(3, 3, &shifted(a, 2.0 * alpha));
    put(3, 4, v);
    put(4, 4, &(-shifted(a, -2.0 * alpha).transpose()));
    Ok(c)
}

pub fn block_exponential(sys: &LtiSystem, cost: &CostSpec) -> Result<BlockExpResult> {
    let t = cost.finite_horizon()?;
    let n = sys.dim();
    let c = build_block_matrix(sys, cost)?;
    let e = mat_exp(&c, t).map_err(|err| match err {
        Error::Accuracy(msg) => Error::Accuracy(format!(
            "{msg}; the horizon is too long for the matrix-exponential route, use the Lyapunov route"
        )),
        other => other,
    })?;
    let block = |row: usize, col: usize| e.view((row * n, col * n), (n, n)).into_owned();
    Ok(BlockExpResult {
        c12: block(0, 1),
        c13: block(0, 2),
        c14: block(0, 3),
        c15: block(0, 4),
        c44: block(3, 3),
    })
}

/// `T * max |Re lambda(C)|`, read off the spectrum of `A`.
pub fn expm_dynamic_range(sys: &LtiSystem, cost: &CostSpec) -> Result<f64> {
    let t = cost.finite_horizon()?;
    let two_alpha = 2.0 * cost.alpha();
    let widest = eigenvalues(sys.a())?
        .iter()
        .map(|l| {
            (l.re + two_alpha)
                .abs()
                .max(l.re.abs())
                .max((l.re - two_alpha).abs())
        })
        .fold(0.0, f64::max);
    Ok(t * widest)
}


/// `E[J_T]` and `Var[J_T]` from the blocks of `e^{C T}`.
pub fn cost_stats_expm(sys: &LtiSystem, cost: &CostSpec) -> Result<CostStats> {
    let blocks = block_exponential(sys, cost)?;
    let range = expm_dynamic_range(sys, cost)?;
    let sigma0 = sys.sigma0();
    let mu0 = sys.mu0();
    let c44t = blocks.c44.transpose();

    let m = &c44t * (&blocks.c12 * sigma0 + &blocks.c13);
    let mean = m.trace();
    let fourth = &c44t * (&blocks.c14 * sigma0 + &blocks.c15);
    let quad = (mu0.transpose() * &c44t * &blocks.c12 * mu0)[(0, 0)];
    let raw = 2.0 * (trace_product(&m, &m) - 2.0 * fourth.trace()) - 2.0 * quad * quad;

    let mut warnings = Vec::new();
    if range > EXPM_DYNAMIC_RANGE_LIMIT {
        warnings.push(format!(
            "matrix-exponential dynamic range T*max|Re lambda(C)| = {range:.1} exceeds {EXPM_DYNAMIC_RANGE_LIMIT}; accuracy may be reduced"
        ));
    }
    Ok(CostStats {
        mean,
        variance: clamp_variance(raw, mean)?,
        raw_variance: raw,
        method: Method::Expm,
        branch: "finite horizon, matrix exponential".to_string(),
        conditions_checked: vec![ConditionCheck::new(
            format!("T*max|Re lambda(C)| <= {EXPM_DYNAMIC_RANGE_LIMIT}"),
            range <= EXPM_DYNAMIC_RANGE_LIMIT,
        )],
        warnings,
    })
}

/// Picks the route: infinite horizons use Lyapunov solutions; finite
/// horizons use the matrix exponential while its dynamic range is small and
/// Lyapunov solutions otherwise, falling back to the other route on failure.
pub fn auto_cost_stats(sys: &LtiSystem, cost: &CostSpec) -> Result<CostStats> {
    if cost.horizon() == Horizon::Infinite {
        return infinite_cost_stats(sys, cost);
    }
    let range = expm_dynamic_range(sys, cost)?;
    if range <= EXPM_DYNAMIC_RANGE_LIMIT {
        match cost_stats_expm(sys, cost) {
            Ok(stats) => Ok(stats),
            Err(expm) => match finite_cost_stats_lyapunov(sys, cost) {
                Ok(mut stats) => {
                    stats
                        .warnings
                        .push(format!("matrix-exponential route failed: {expm}"));
                    Ok(stats)
                }
                Err(lyapunov) => Err(Error::BothRoutesFailed {
                    lyapunov: Box::new(lyapunov),
                    expm: Box::new(expm),
                }),
            },
        }
    } else {
        match finite_cost_stats_lyapunov(sys, cost) {
            Ok(stats) => Ok(stats),
            Err(lyapunov) => match cost_stats_expm(sys, cost) {
                Ok(mut stats) => {
                    stats.warnings.push(format!(
                        "Lyapunov route unavailable ({lyapunov}); used matrix exponential outside its preferred range, results may be ill-conditioned"
                    ));
                    Ok(stats)
                }
                Err(expm) => Err(Error::BothRoutesFailed {
                    lyapunov: Box::new(lyapunov),
                    expm: Box::new(expm),
                }),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost_lyap::lyapunov_cost_stats;
    use crate::linalg::Vector;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn scalar_block_diagonal() {
        let (a, q, v, alpha) = (-0.7, 2.0, 0.5, 0.3);
        let sys = LtiSystem::new(dmatrix![a], dmatrix![v], dvector![0.0], dmatrix![1.0]).unwrap();
        let cost = CostSpec::finite(dmatrix![q], alpha, 1.0).unwrap();
        let c = build_block_matrix(&sys, &cost).unwrap();
        let diag: Vec<f64> = (0..5).map(|i| c[(i, i)]).collect();
        let expected = [-a - 2.0 * alpha, a, -a, a + 2.0 * alpha, -a + 2.0 * alpha];
        for (d, e) in diag.iter().zip(expected) {
            assert!((d - e).abs() < 1e-15);
        }
        assert_eq!(c[(0, 1)], q);
        assert_eq!(c[(2, 3)], q);
        assert_eq!(c[(1, 2)], v);
        assert_eq!(c[(3, 4)], v);
    }

    #[test]
    fn all_zero_generator() {
        let sys = LtiSystem::new(Matrix::zeros(2, 2), Matrix::zeros(2, 2), Vector::zeros(2), Matrix::zeros(2, 2)).unwrap();
        let cost = CostSpec::finite(Matrix::zeros(2, 2), 0.0, 1.0).unwrap();
        assert_eq!(build_block_matrix(&sys, &cost).unwrap(), Matrix::zeros(10, 10));
    }

    #[test]
    fn zero_weight() {
        let sys = LtiSystem::new(dmatrix![0.0, 1.0; 0.0, 0.0], Matrix::identity(2, 2), Vector::zeros(2), Matrix::identity(2, 2)).unwrap();
        let cost = CostSpec::finite(Matrix::zeros(2, 2), 0.2, 1.0).unwrap();
        let stats = cost_stats_expm(&sys, &cost).unwrap();
        assert_eq!(stats.mean, 0.0);
        assert_eq!(stats.variance, 0.0);
    }

    #[test]
    fn c44_is_shifted_exponential() {
        let a = dmatrix![-0.4, 1.2; -0.8, -0.3];
        let sys = LtiSystem::new(a.clone(), Matrix::identity(2, 2), Vector::zeros(2), Matrix::identity(2, 2)).unwrap();
        let cost = CostSpec::finite(Matrix::identity(2, 2), -0.6, 2.0).unwrap();
        let blocks = block_exponential(&sys, &cost).unwrap();
        let direct = mat_exp(&shifted(&a, -1.2), 2.0).unwrap();
        assert!((blocks.c44 - &direct).amax() <= 1e-10 * direct.amax());
    }

    #[test]
    fn agrees_with_lyapunov_scalar() {
        let sys = LtiSystem::new(dmatrix![-1.0], dmatrix![2.0], dvector![0.5], dmatrix![1.0]).unwrap();
        for alpha in [-0.5, 0.0, 0.25] {
            let cost = CostSpec::finite(dmatrix![1.0], alpha, 2.0).unwrap();
            let e = cost_stats_expm(&sys, &cost).unwrap();
            let l = lyapunov_cost_stats(&sys, &cost).unwrap();
            assert!((e.mean - l.mean).abs() < 1e-12 * (1.0 + l.mean.abs()), "alpha {alpha}");
            assert!((e.variance - l.variance).abs() < 1e-11 * (1.0 + l.variance.abs()), "alpha {alpha}");
        }
    }

    #[test]
    fn auto_route_selection() {
        let sys = LtiSystem::new(dmatrix![-1.0], dmatrix![2.0], dvector![0.0], dmatrix![1.0]).unwrap();
        let inf = CostSpec::infinite(dmatrix![1.0], -0.5).unwrap();
        assert_eq!(auto_cost_stats(&sys, &inf).unwrap().method, Method::Lyapunov);

        let short = CostSpec::finite(dmatrix![1.0], -0.5, 1.0).unwrap();
        assert_eq!(auto_cost_stats(&sys, &short).unwrap().method, Method::Expm);
        let long = CostSpec::finite(dmatrix![1.0], -0.5, 50.0).unwrap();
        assert_eq!(auto_cost_stats(&sys, &long).unwrap().method, Method::Lyapunov);

        let double_integrator = LtiSystem::new(dmatrix![0.0, 1.0; 0.0, 0.0], Matrix::identity(2, 2), Vector::zeros(2), Matrix::identity(2, 2)).unwrap();
        let cost = CostSpec::finite(Matrix::identity(2, 2), 0.0, 1.0).unwrap();
        assert_eq!(auto_cost_stats(&double_integrator, &cost).unwrap().method, Method::Expm);
    }
}
