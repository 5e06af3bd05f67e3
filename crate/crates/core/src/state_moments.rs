//! First and second moments of the state of `x' = A x + v`, with `v` white
//! noise of intensity `V` and a Gaussian initial state.
//!
//! `sigma0` is the second moment `E[x0 x0^T]`, not the covariance; the
//! covariance of `x0` is `sigma0 - mu0 mu0^T`.

use crate::error::{Error, Result};
use crate::linalg::{
    ensure_finite, ensure_shape, ensure_square, is_symmetric, mat_exp, min_symmetric_eigenvalue,
    solve_lyapunov, symmetrize, van_loan_integral, Matrix, Vector,
};

/// Absolute eigenvalue tolerance for the PSD checks on `V` and the initial covariance.
pub const PSD_TOL: f64 = 1e-10;

const SYMMETRY_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem {
    a: Matrix,
    v: Matrix,
    mu0: Vector,
    sigma0: Matrix,
}

impl LtiSystem {
    /// Validates dimensions, finiteness, symmetry of `V` and `sigma0`, and the
    /// PSD conditions on `V` and `sigma0 - mu0 mu0^T`.
    pub fn new(a: Matrix, v: Matrix, mu0: Vector, sigma0: Matrix) -> Result<Self> {
        ensure_square(&a, "A")?;
        let n = a.nrows();
        ensure_shape(&v, n, n, "V")?;
        ensure_shape(&sigma0, n, n, "Sigma0")?;
        if mu0.len() != n {
            return Err(Error::Dimension(format!(
                "mu0 must have length {n}, got {}",
                mu0.len()
            )));
        }
        ensure_finite(&a, "A")?;
        ensure_finite(&v, "V")?;
        ensure_finite(&sigma0, "Sigma0")?;
        if !mu0.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("mu0".into()));
        }
        if !is_symmetric(&v, SYMMETRY_RTOL) {
            return Err(Error::Contract("V must be symmetric".into()));
        }
        if !is_symmetric(&sigma0, SYMMETRY_RTOL) {
            return Err(Error::Contract("Sigma0 must be symmetric".into()));
        }
        let v = symmetrize(&v);
        let sigma0 = symmetrize(&sigma0);
        let scale = |m: &Matrix| PSD_TOL * m.amax().max(1.0);
        let lv = min_symmetric_eigenvalue(&v);
        if lv < -scale(&v) {
            return Err(Error::Contract(format!(
                "V must be positive semidefinite (min eigenvalue {lv:.3e})"
            )));
        }
        let cov = &sigma0 - &mu0 * mu0.transpose();
        let lc = min_symmetric_eigenvalue(&cov);
        if lc < -scale(&sigma0) {
            return Err(Error::Contract(format!(
                "Sigma0 - mu0 mu0^T must be positive semidefinite (min eigenvalue {lc:.3e})"
            )));
        }
        Ok(Self { a, v, mu0, sigma0 })
    }

    /// A system whose initial state is known exactly (`sigma0 = mu0 mu0^T`).
    pub fn deterministic_start(a: Matrix, v: Matrix, x0: Vector) -> Result<Self> {
        let sigma0 = &x0 * x0.transpose();
        Self::new(a, v, x0, sigma0)
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn v(&self) -> &Matrix {
        &self.v
    }

    pub fn mu0(&self) -> &Vector {
        &self.mu0
    }

    pub fn sigma0(&self) -> &Matrix {
        &self.sigma0
    }

    /// Covariance of the initial state.
    pub fn initial_covariance(&self) -> Matrix {
        symmetrize(&(&self.sigma0 - &self.mu0 * self.mu0.transpose()))
    }

    /// Stationary second moment `X^V` solving `A X + X A^T + V = 0`.
    pub fn stationary_moment(&self) -> Result<Matrix> {
        solve_lyapunov(&self.a, &self.v)
    }
}

fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::Contract(format!("time must be finite and >= 0, got {t}")))
    }
}

/// `mu(t) = e^{A t} mu0`.
pub fn mean_state(sys: &LtiSystem, t: f64) -> Result<Vector> {
    check_time(t)?;
    Ok(mat_exp(&sys.a, t)? * &sys.mu0)
}

/// `Sigma(t) = E[x(t) x(t)^T]`.
///
/// Uses `e^{At}(Sigma0 - X^V)e^{A^T t} + X^V` when `A` admits `X^V`, and
/// otherwise `e^{At} Sigma0 e^{A^T t} + int_0^t e^{As} V e^{A^T s} ds`
/// with the integral taken from a block exponential.
pub fn second_moment(sys: &LtiSystem, t: f64) -> Result<Matrix> {
    check_time(t)?;
    if t == 0.0 {
        return Ok(sys.sigma0.clone());
    }
    let e = mat_exp(&sys.a, t)?;
    match sys.stationary_moment() {
        Ok(xv) => {
            let out = &e * (&sys.sigma0 - &xv) * e.transpose() + xv;
            Ok(symmetrize(&out))
        }
        Err(Error::NotSylvester { .. }) => {
            let noise = noise_integral(&sys.a, &sys.v, t, &e)?;
            Ok(symmetrize(&(&e * &sys.sigma0 * e.transpose() + noise)))
        }
        Err(e) => Err(e),
    }
}

/// `int_0^t e^{As} V e^{A^T s} ds` for any `A`, given `e = e^{At}`.
pub fn noise_integral(a: &Matrix, v: &Matrix, t: f64, e: &Matrix) -> Result<Matrix> {
    // int_0^t e^{A(t-s)} V e^{-A^T s} ds, then multiply by e^{A^T t}.
    let partial = van_loan_integral(a, v, &(-a.transpose()), t)?;
    Ok(symmetrize(&(partial * e.transpose())))
}

/// `Sigma(t1, t2) = E[x(t1) x(t2)^T]`; requires `X^V` to exist.
pub fn cross_moment(sys: &LtiSystem, t1: f64, t2: f64) -> Result<Matrix> {
    check_time(t1)?;
    check_time(t2)?;
    if t1 > t2 {
        return Ok(cross_moment(sys, t2, t1)?.transpose());
    }
    let xv = sys.stationary_moment()?;
    let e1 = mat_exp(&sys.a, t1)?;
    let e2 = mat_exp(&sys.a, t2)?;
    let lag = mat_exp(&sys.a, t2 - t1)?;
    let out = &e1 * (&sys.sigma0 - &xv) * e2.transpose() + &xv * lag.transpose();
    if t1 == t2 {
        Ok(symmetrize(&out))
    } else {
        Ok(out)
    }
}
