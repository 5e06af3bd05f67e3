//! Fourth-order expectations of Gaussian vectors in terms of second moments.
//!
//! Inputs are second moments `Sigma = E[x x^T]` rather than covariances; use
//! [`second_moment_from_covariance`] to convert.

use crate::error::{Error, Result};
use crate::linalg::{is_symmetric, min_symmetric_eigenvalue, trace_product, Matrix, Vector};

const SYMMETRY_RTOL: f64 = 1e-12;

pub fn second_moment_from_covariance(mu: &Vector, cov: &Matrix) -> Matrix {
    cov + mu * mu.transpose()
}

pub fn covariance_from_second_moment(mu: &Vector, sigma: &Matrix) -> Matrix {
    sigma - mu * mu.transpose()
}

fn check_weight(m: &Matrix, n: usize, what: &str) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::Dimension(format!(
            "{what} must be {n}x{n}, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if !is_symmetric(m, SYMMETRY_RTOL) {
        return Err(Error::Contract(format!("{what} must be symmetric")));
    }
    Ok(())
}

/// `E[x^T P x x^T Q x]` for Gaussian `x` with mean `mu` and second moment `sigma`:
/// `tr(Sigma P) tr(Sigma Q) + 2 tr(Sigma P Sigma Q) - 2 mu^T P mu mu^T Q mu`.
pub fn quartic_expectation(mu: &Vector, sigma: &Matrix, p: &Matrix, q: &Matrix) -> Result<f64> {
    let n = mu.len();
    if sigma.nrows() != n || sigma.ncols() != n {
        return Err(Error::Dimension(format!(
            "second moment must be {n}x{n}, got {}x{}",
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    check_weight(p, n, "P")?;
    check_weight(q, n, "Q")?;
    let cov = covariance_from_second_moment(mu, sigma);
    if min_symmetric_eigenvalue(&cov) < -1e-10 * sigma.amax().max(1.0) {
        return Err(Error::Contract(
            "Sigma - mu mu^T must be positive semidefinite".into(),
        ));
    }
    let sp = sigma * p;
    let sq = sigma * q;
    let mpm = (mu.transpose() * p * mu)[(0, 0)];
    let mqm = (mu.transpose() * q * mu)[(0, 0)];
    Ok(sp.trace() * sq.trace() + 2.0 * trace_product(&sp, &sq) - 2.0 * mpm * mqm)
}

/// Jointly Gaussian `(x, y)` described by means and covariance blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct JointGaussian {
    pub mu_x: Vector,
    pub mu_y: Vector,
    pub k_xx: Matrix,
    pub k_xy: Matrix,
    pub k_yy: Matrix,
}

impl JointGaussian {
    pub fn new(mu_x: Vector, mu_y: Vector, k_xx: Matrix, k_xy: Matrix, k_yy: Matrix) -> Result<Self> {
        let (nx, ny) = (mu_x.len(), mu_y.len());
        if k_xx.shape() != (nx, nx) || k_yy.shape() != (ny, ny) || k_xy.shape() != (nx, ny) {
            return Err(Error::Dimension(format!(
                "covariance blocks do not match means of length {nx} and {ny}"
            )));
        }
        let jg = Self {
            mu_x,
            mu_y,
            k_xx,
            k_xy,
            k_yy,
        };
        let joint = jg.joint_covariance();
        if !is_symmetric(&joint, SYMMETRY_RTOL) {
            return Err(Error::Contract("joint covariance must be symmetric".into()));
        }
        if min_symmetric_eigenvalue(&joint) < -1e-10 * joint.amax().max(1.0) {
            return Err(Error::Contract(
                "joint covariance must be positive semidefinite".into(),
            ));
        }
        Ok(jg)
    }

    pub fn joint_covariance(&self) -> Matrix {
        let (nx, ny) = (self.mu_x.len(), self.mu_y.len());
        let mut k = Matrix::zeros(nx + ny, nx + ny);
        k.view_mut((0, 0), (nx, nx)).copy_from(&self.k_xx);
        k.view_mut((0, nx), (nx, ny)).copy_from(&self.k_xy);
        k.view_mut((nx, 0), (ny, nx)).copy_from(&self.k_xy.transpose());
        k.view_mut((nx, nx), (ny, ny)).copy_from(&self.k_yy);
        k
    }

    pub fn joint_mean(&self) -> Vector {
        let mut m = Vector::zeros(self.mu_x.len() + self.mu_y.len());
        m.rows_mut(0, self.mu_x.len()).copy_from(&self.mu_x);
        m.rows_mut(self.mu_x.len(), self.mu_y.len()).copy_from(&self.mu_y);
        m
    }

    /// The pair with the roles of `x` and `y` exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            mu_x: self.mu_y.clone(),
            mu_y: self.mu_x.clone(),
            k_xx: self.k_yy.clone(),
            k_xy: self.k_xy.transpose(),
            k_yy: self.k_xx.clone(),
        }
    }
}

/// `E[x^T P x y^T Q y]`:
/// `tr(S_xx P) tr(S_yy Q) + 2 tr(S_yx P S_xy Q) - 2 mu_x^T P mu_x mu_y^T Q mu_y`
/// with `S_ab = K_ab + mu_a mu_b^T`.
pub fn joint_quartic_expectation(jg: &JointGaussian, p: &Matrix, q: &Matrix) -> Result<f64> {
    check_weight(p, jg.mu_x.len(), "P")?;
    check_weight(q, jg.mu_y.len(), "Q")?;
    let s_xx = second_moment_from_covariance(&jg.mu_x, &jg.k_xx);
    let s_yy = second_moment_from_covariance(&jg.mu_y, &jg.k_yy);
    let s_xy = &jg.k_xy + &jg.mu_x * jg.mu_y.transpose();
    let mpm = (jg.mu_x.transpose() * p * &jg.mu_x)[(0, 0)];
    let mqm = (jg.mu_y.transpose() * q * &jg.mu_y)[(0, 0)];
    let cross = s_xy.transpose() * p * &s_xy * q;
    Ok(trace_product(&s_xx, p) * trace_product(&s_yy, q) + 2.0 * cross.trace() - 2.0 * mpm * mqm)
}
