//! Reduction of a controlled, observed plant
//!
//! ```text
//! x' = A x + B u + v,    y = C x + w
//! ```
//!
//! to the autonomous form `x' = A x + v` handled by the cost modules:
//! Riccati-optimal state feedback, the Kalman observer gain, and the
//! closed loops under full-state and observer-based feedback.

use crate::cost_lyap::{CostSpec, Horizon};
use crate::error::{Error, Result};
use crate::linalg::{
    eigenvalues, ensure_finite, ensure_finite_scalar, ensure_shape, ensure_square, is_stable,
    is_symmetric, min_symmetric_eigenvalue, shifted, solve_lyapunov, solve_lyapunov_transposed,
    symmetrize, Matrix, Vector,
};
use crate::state_moments::LtiSystem;

const SYMMETRY_RTOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

/// Newton iteration stops once `||X_{k+1} - X_k||_F <= STEP_RTOL ||X_{k+1}||_F`.
pub const STEP_RTOL: f64 = 1e-12;
pub const MAX_NEWTON_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct LqgPlant {
    a: Matrix,
    b: Matrix,
    q: Matrix,
    r: Matrix,
    v: Matrix,
    alpha: f64,
    output: Option<(Matrix, Matrix)>,
}

fn check_symmetric(m: &Matrix, what: &str) -> Result<Matrix> {
    ensure_finite(m, what)?;
    if !is_symmetric(m, SYMMETRY_RTOL) {
        return Err(Error::Contract(format!("{what} must be symmetric")));
    }
    Ok(symmetrize(m))
}

fn check_psd(m: &Matrix, what: &str) -> Result<Matrix> {
    let m = check_symmetric(m, what)?;
    let l = min_symmetric_eigenvalue(&m);
    if l < -PSD_TOL * m.amax().max(1.0) {
        return Err(Error::Contract(format!(
            "{what} must be positive semidefinite (min eigenvalue {l:.3e})"
        )));
    }
    Ok(m)
}

fn check_pd(m: &Matrix, what: &str) -> Result<Matrix> {
    let m = check_symmetric(m, what)?;
    let l = min_symmetric_eigenvalue(&m);
    if l <= PSD_TOL * m.amax().max(1.0) {
        return Err(Error::Contract(format!(
            "{what} must be positive definite (min eigenvalue {l:.3e})"
        )));
    }
    Ok(m)
}

fn spd_inverse(m: &Matrix, what: &str) -> Result<Matrix> {
    m.clone()
        .cholesky()
        .map(|c| symmetrize(&c.inverse()))
        .ok_or_else(|| Error::Contract(format!("{what} must be positive definite")))
}

impl LqgPlant {
    /// Full-state plant `x' = A x + B u + v` with cost weights `Q`, `R` and
    /// discount exponent `alpha`.
    pub fn new(a: Matrix, b: Matrix, q: Matrix, r: Matrix, v: Matrix, alpha: f64) -> Result<Self> {
        ensure_square(&a, "A")?;
        let n = a.nrows();
        if b.nrows() != n {
            return Err(Error::Dimension(format!(
                "B must have {n} rows, got {}",
                b.nrows()
            )));
        }
        let m = b.ncols();
        ensure_shape(&q, n, n, "Q")?;
        ensure_shape(&r, m, m, "R")?;
        ensure_shape(&v, n, n, "V")?;
        ensure_finite(&a, "A")?;
        ensure_finite(&b, "B")?;
        ensure_finite_scalar(alpha, "alpha")?;
        Ok(Self {
            q: check_psd(&q, "Q")?,
            r: check_pd(&r, "R")?,
            v: check_psd(&v, "V")?,
            a,
            b,
            alpha,
            output: None,
        })
    }

    /// Adds the measurement `y = C x + w`, `w` of intensity `W`.
    pub fn with_output(mut self, c: Matrix, w: Matrix) -> Result<Self> {
        let n = self.dim();
        if c.ncols() != n {
            return Err(Error::Dimension(format!(
                "C must have {n} columns, got {}",
                c.ncols()
            )));
        }
        ensure_finite(&c, "C")?;
        ensure_shape(&w, c.nrows(), c.nrows(), "W")?;
        let w = check_pd(&w, "W")?;
        self.output = Some((c, w));
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn r(&self) -> &Matrix {
        &self.r
    }

    pub fn v(&self) -> &Matrix {
        &self.v
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn c(&self) -> Option<&Matrix> {
        self.output.as_ref().map(|(c, _)| c)
    }

    pub fn w(&self) -> Option<&Matrix> {
        self.output.as_ref().map(|(_, w)| w)
    }

    /// `A_alpha - B F`.
    pub fn shifted_closed_loop(&self, f: &Matrix) -> Result<Matrix> {
        self.check_gain(f)?;
        Ok(shifted(&self.a, self.alpha) - &self.b * f)
    }

    fn check_gain(&self, f: &Matrix) -> Result<()> {
        ensure_shape(f, self.inputs(), self.dim(), "F")?;
        ensure_finite(f, "F")
    }

    fn require_output(&self) -> Result<(&Matrix, &Matrix)> {
        self.output
            .as_ref()
            .map(|(c, w)| (c, w))
            .ok_or_else(|| Error::Contract("plant has no measurement equation (C, W)".into()))
    }
}

/// Feedback gain `F` and, for output feedback, observer gain `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainPair {
    pub f: Matrix,
    pub k: Option<Matrix>,
}

fn riccati_residual(ain: &Matrix, g: &Matrix, q: &Matrix, x: &Matrix) -> Matrix {
    ain.transpose() * x + x * ain + q - x * g * x
}

// Bass: with A + beta I antistable, Z solving (A + beta I) Z + Z (A + beta I)^T = 2 G
// makes A - G Z^{-1} stable.
fn initial_gain(ain: &Matrix, g: &Matrix) -> Result<Matrix> {
    let n = ain.nrows();
    if is_stable(ain)? {
        return Ok(Matrix::zeros(n, n));
    }
    let max_re = eigenvalues(ain)?
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let beta = max_re.max(0.0) + 1.0 + 0.1 * ain.norm();
    let z = solve_lyapunov(&shifted(ain, beta), &(-2.0 * g))?;
    let z_inv = symmetrize(&z).try_inverse().ok_or_else(|| Error::Synthesis {
        reason: "no stabilizing initial gain: (A, B) is not controllable enough for the eigenvalue-shift construction".into(),
        residuals: vec![],
    })?;
    let x0 = symmetrize(&z_inv);
    if !is_stable(&(ain - g * &x0))? {
        return Err(Error::Synthesis {
            reason: "eigenvalue-shift initialization did not stabilize the pair (A, B)".into(),
            residuals: vec![],
        });
    }
    Ok(x0)
}

/// Stabilizing solution of `Ain^T X + X Ain + Q - X B R^{-1} B^T X = 0` by
/// Newton–Kleinman iteration.
pub fn solve_riccati(ain: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix) -> Result<Matrix> {
    ensure_square(ain, "A")?;
    let n = ain.nrows();
    if b.nrows() != n {
        return Err(Error::Dimension(format!(
            "B must have {n} rows, got {}",
            b.nrows()
        )));
    }
    ensure_shape(q, n, n, "Q")?;
    ensure_shape(r, b.ncols(), b.ncols(), "R")?;
    ensure_finite(ain, "A")?;
    ensure_finite(b, "B")?;
    let q = check_psd(q, "Q")?;
    let r = check_pd(r, "R")?;
    let r_inv = spd_inverse(&r, "R")?;
    let g = symmetrize(&(b * &r_inv * b.transpose()));

    // The iterate X_k defines the gain R^{-1} B^T X_k.
    let mut x = initial_gain(ain, &g)?;
    let mut residuals = Vec::new();
    for _ in 0..MAX_NEWTON_ITERATIONS {
        let closed = ain - &g * &x;
        let rhs = symmetrize(&(&q + &x * &g * &x));
        let next = match solve_lyapunov_transposed(&closed, &rhs) {
            Ok(next) => next,
            Err(err) => {
                return Err(Error::Synthesis {
                    reason: format!("Newton step failed: {err}"),
                    residuals,
                })
            }
        };
        let step = (&next - &x).norm();
        x = next;
        residuals.push(riccati_residual(ain, &g, &q, &x).norm());
        if step <= STEP_RTOL * x.norm() || step == 0.0 {
            if !is_stable(&(ain - &g * &x))? {
                return Err(Error::Synthesis {
                    reason: "converged solution is not stabilizing".into(),
                    residuals,
                });
            }
            log::debug!("Riccati converged in {} Newton steps", residuals.len());
            return Ok(x);
        }
    }
    Err(Error::Synthesis {
        reason: format!("Newton iteration did not converge in {MAX_NEWTON_ITERATIONS} steps"),
        residuals,
    })
}

/// `F = R^{-1} B^T X` with `X` the stabilizing Riccati solution for `A_alpha`.
pub fn optimal_gain(plant: &LqgPlant) -> Result<Matrix> {
    let ain = shifted(&plant.a, plant.alpha);
    let x = solve_riccati(&ain, &plant.b, &plant.q, &plant.r)?;
    let r_inv = spd_inverse(&plant.r, "R")?;
    Ok(r_inv * plant.b.transpose() * x)
}

/// `K = E C^T W^{-1}` with `A E + E A^T + V - E C^T W^{-1} C E = 0`.
///
/// The filter equation uses `A` itself, without the discount shift.
pub fn kalman_gain(plant: &LqgPlant) -> Result<Matrix> {
    let (c, w) = plant.require_output()?;
    let e = solve_riccati(&plant.a.transpose(), &c.transpose(), &plant.v, w)?;
    let w_inv = spd_inverse(w, "W")?;
    Ok(e * c.transpose() * w_inv)
}

/// Riccati feedback gain, plus the Kalman gain when the plant has outputs.
pub fn synthesize(plant: &LqgPlant) -> Result<GainPair> {
    let f = optimal_gain(plant)?;
    let k = match plant.output {
        Some(_) => Some(kalman_gain(plant)?),
        None => None,
    };
    Ok(GainPair { f, k })
}

fn closed_loop_horizon(plant: &LqgPlant, horizon: Horizon, weight: Matrix) -> Result<CostSpec> {
    CostSpec::new(weight, plant.alpha, horizon)
}

/// Under `u = -F x`: drift `A - B F` and weight `Q + F^T R F`.
pub fn close_loop_full_state(
    plant: &LqgPlant,
    f: &Matrix,
    mu0: Vector,
    sigma0: Matrix,
    horizon: Horizon,
) -> Result<(LtiSystem, CostSpec)> {
    plant.check_gain(f)?;
    let drift = &plant.a - &plant.b * f;
    let weight = symmetrize(&(&plant.q + f.transpose() * &plant.r * f));
    let sys = LtiSystem::new(drift, plant.v.clone(), mu0, sigma0)?;
    Ok((sys, closed_loop_horizon(plant, horizon, weight)?))
}

/// Initial moments of `(x, x_hat)` when the estimator starts at the prior
/// mean: `x_hat(0) = mu0` deterministically.
pub fn estimator_initial_moments(mu0: &Vector, sigma0: &Matrix) -> (Vector, Matrix) {
    let n = mu0.len();
    let outer = mu0 * mu0.transpose();
    let mut mu = Vector::zeros(2 * n);
    mu.rows_mut(0, n).copy_from(mu0);
    mu.rows_mut(n, n).copy_from(mu0);
    let mut s = Matrix::zeros(2 * n, 2 * n);
    s.view_mut((0, 0), (n, n)).copy_from(sigma0);
    s.view_mut((0, n), (n, n)).copy_from(&outer);
    s.view_mut((n, 0), (n, n)).copy_from(&outer);
    s.view_mut((n, n), (n, n)).copy_from(&outer);
    (mu, s)
}

/// Under `u = -F x_hat` with `x_hat' = A x_hat + B u + K (y - C x_hat)`, the
/// state `(x, x_hat)` evolves with drift
///
/// ```text
/// [ A     -B F         ]
/// [ K C    A - B F - K C ]
/// ```
///
/// and noise `(v, K w)` of intensity `diag(V, K W K^T)`. The integrand
/// `x^T Q x + u^T R u` becomes the weight `diag(Q, F^T R F)`.
pub fn close_loop_output_feedback(
    plant: &LqgPlant,
    f: &Matrix,
    k: &Matrix,
    mu0: Vector,
    sigma0: Matrix,
    horizon: Horizon,
) -> Result<(LtiSystem, CostSpec)> {
    plant.check_gain(f)?;
    let (c, w) = plant.require_output()?;
    let n = plant.dim();
    ensure_shape(k, n, c.nrows(), "K")?;
    ensure_finite(k, "K")?;
    let bf = &plant.b * f;
    let kc = k * c;

    let mut drift = Matrix::zeros(2 * n, 2 * n);
    drift.view_mut((0, 0), (n, n)).copy_from(&plant.a);
    drift.view_mut((0, n), (n, n)).copy_from(&(-&bf));
    drift.view_mut((n, 0), (n, n)).copy_from(&kc);
    drift.view_mut((n, n), (n, n)).copy_from(&(&plant.a - &bf - &kc));

    let mut noise = Matrix::zeros(2 * n, 2 * n);
    noise.view_mut((0, 0), (n, n)).copy_from(&plant.v);
    noise
        .view_mut((n, n), (n, n))
        .copy_from(&symmetrize(&(k * w * k.transpose())));

    let mut weight = Matrix::zeros(2 * n, 2 * n);
    weight.view_mut((0, 0), (n, n)).copy_from(&plant.q);
    weight
        .view_mut((n, n), (n, n))
        .copy_from(&symmetrize(&(f.transpose() * &plant.r * f)));

    let sys = LtiSystem::new(drift, noise, mu0, sigma0)?;
    Ok((sys, closed_loop_horizon(plant, horizon, weight)?))
}
