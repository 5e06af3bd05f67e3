//! Gradient descent over the state-feedback gain `F` on the analytic
//! infinite-horizon cost mean or variance.

use crate::cost_lyap::{infinite_cost_stats, CostStats, Horizon};
use crate::error::{Error, Result};
use crate::linalg::{is_stable, Matrix, Vector};
use crate::lqg::{close_loop_full_state, LqgPlant};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Mean,
    Variance,
}

impl Objective {
    pub fn of(self, stats: &CostStats) -> f64 {
        match self {
            Objective::Mean => stats.mean,
            Objective::Variance => stats.variance,
        }
    }
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Objective::Mean => "mean",
            Objective::Variance => "variance",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneOptions {
    pub objective: Objective,
    pub f0: Matrix,
    /// Stop once no step longer than `step_tol (1 + ||F||)` decreases the objective.
    pub step_tol: f64,
    /// Converged when `||grad|| <= grad_tol (1 + |objective|)`.
    pub grad_tol: f64,
    pub max_iterations: usize,
    /// Central differences use `h = fd_step (1 + |F_ij|)`.
    pub fd_step: f64,
}

impl TuneOptions {
    pub fn new(objective: Objective, f0: Matrix) -> Self {
        Self {
            objective,
            f0,
            step_tol: 1e-6,
            grad_tol: 1e-6,
            max_iterations: 10_000,
            fd_step: 1e-4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("step tolerance", self.step_tol),
            ("gradient tolerance", self.grad_tol),
            ("finite-difference step", self.fd_step),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Contract(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.max_iterations == 0 {
            return Err(Error::Contract("max iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub f: Matrix,
    pub objective_value: f64,
    pub mean_at_f: f64,
    pub variance_at_f: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    /// Objective after each accepted iterate, starting with `F0` at 0.
    pub trace: Vec<(usize, f64)>,
}

/// Infinite-horizon cost statistics of the loop closed by `u = -F x`.
pub fn evaluate_gain(plant: &LqgPlant, f: &Matrix, mu0: &Vector, sigma0: &Matrix) -> Result<CostStats> {
    let closed = plant.shifted_closed_loop(f)?;
    if !is_stable(&closed)? {
        return Err(Error::InfeasibleGain(format!(
            "A_alpha - B F is not stable for F = {:?}",
            f.as_slice()
        )));
    }
    let (sys, cost) = close_loop_full_state(plant, f, mu0.clone(), sigma0.clone(), Horizon::Infinite)?;
    infinite_cost_stats(&sys, &cost)
}

struct Problem<'a> {
    plant: &'a LqgPlant,
    mu0: &'a Vector,
    sigma0: &'a Matrix,
    objective: Objective,
}

impl Problem<'_> {
    fn value(&self, f: &Matrix) -> Result<f64> {
        Ok(self.objective.of(&evaluate_gain(self.plant, f, self.mu0, self.sigma0)?))
    }

    // Infeasible or failed evaluations count as +inf.
    fn value_or_inf(&self, f: &Matrix) -> f64 {
        self.value(f).unwrap_or(f64::INFINITY)
    }

    fn gradient(&self, f: &Matrix, rel_step: f64, four_point: bool) -> Result<Matrix> {
        let mut g = Matrix::zeros(f.nrows(), f.ncols());
        for idx in 0..f.len() {
            let h = rel_step * (1.0 + f[idx].abs());
            let at = |k: f64| {
                let mut p = f.clone();
                p[idx] += k * h;
                self.value(&p)
            };
            g[idx] = if four_point {
                (-at(2.0)? + 8.0 * at(1.0)? - 8.0 * at(-1.0)? + at(-2.0)?) / (12.0 * h)
            } else {
                (at(1.0)? - at(-1.0)?) / (2.0 * h)
            };
        }
        Ok(g)
    }
}

/// Central-difference gradient of the objective at `f`.
pub fn objective_gradient(
    plant: &LqgPlant,
    mu0: &Vector,
    sigma0: &Matrix,
    objective: Objective,
    f: &Matrix,
    rel_step: f64,
) -> Result<Matrix> {
    let p = Problem { plant, mu0, sigma0, objective };
    p.gradient(f, rel_step, false)
}

/// Gradient from the fourth-order stencil `(-f(2h) + 8 f(h) - 8 f(-h) + f(-2h)) / 12h`.
pub fn objective_gradient_four_point(
    plant: &LqgPlant,
    mu0: &Vector,
    sigma0: &Matrix,
    objective: Objective,
    f: &Matrix,
    rel_step: f64,
) -> Result<Matrix> {
    let p = Problem { plant, mu0, sigma0, objective };
    p.gradient(f, rel_step, true)
}

const ARMIJO_C: f64 = 1e-4;

/// Quasi-Newton descent with backtracking. The direction is the gradient
/// scaled by a BFGS estimate of the inverse Hessian, reset to steepest
/// descent whenever it fails to descend. The first trial step has length 1;
/// steps are halved until the Armijo condition holds with a stabilizing
/// candidate.
pub fn tune_gain(plant: &LqgPlant, mu0: &Vector, sigma0: &Matrix, opts: &TuneOptions) -> Result<TuneResult> {
    opts.validate()?;
    let p = Problem {
        plant,
        mu0,
        sigma0,
        objective: opts.objective,
    };
    let (rows, cols) = opts.f0.shape();
    let k = rows * cols;
    let mut f = opts.f0.clone();
    let mut value = p.value(&f)?;
    let mut trace = vec![(0, value)];
    let mut converged = false;
    let mut gnorm = f64::INFINITY;
    let mut iterations = 0;

    let mut h: Option<Matrix> = None;
    let mut prev: Option<(Matrix, Matrix)> = None;
    while iterations < opts.max_iterations {
        let g = p.gradient(&f, opts.fd_step, false)?;
        gnorm = g.norm();
        if gnorm <= opts.grad_tol * (1.0 + value.abs()) {
            converged = true;
            break;
        }
        let gv = Vector::from_column_slice(g.as_slice());
        if let Some((f_prev, g_prev)) = &prev {
            let s = Vector::from_column_slice((&f - f_prev).as_slice());
            let y = &gv - Vector::from_column_slice(g_prev.as_slice());
            let sy = s.dot(&y);
            if sy > 1e-12 * s.norm() * y.norm() {
                let hk = h.take().unwrap_or_else(|| Matrix::identity(k, k) * (sy / y.norm_squared()));
                let rho = 1.0 / sy;
                let left = Matrix::identity(k, k) - &s * y.transpose() * rho;
                h = Some(&left * hk * left.transpose() + &s * s.transpose() * rho);
            }
        }
        let mut d = match &h {
            Some(hk) => -(hk * &gv),
            None => -&gv / gnorm,
        };
        let mut slope = d.dot(&gv);
        if slope >= 0.0 {
            h = None;
            d = -&gv / gnorm;
            slope = -gnorm;
        }
        let d = Matrix::from_column_slice(rows, cols, d.as_slice());
        let dnorm = d.norm();

        let min_step = opts.step_tol * (1.0 + f.norm());
        let mut t = 1.0;
        let accepted = loop {
            let cand = &f + &d * t;
            let v = p.value_or_inf(&cand);
            if v <= value + ARMIJO_C * t * slope {
                break Some((cand, v));
            }
            t *= 0.5;
            if t * dnorm < min_step {
                break None;
            }
        };
        let Some((cand, v)) = accepted else {
            if h.take().is_some() {
                prev = None;
                continue;
            }
            break;
        };
        iterations += 1;
        prev = Some((std::mem::replace(&mut f, cand), g));
        value = v;
        trace.push((iterations, value));
    }
    if !converged && iterations < opts.max_iterations {
        log::debug!("line search stalled after {iterations} iterations, gradient norm {gnorm:e}");
    }

    let stats = evaluate_gain(plant, &f, mu0, sigma0)?;
    Ok(TuneResult {
        objective_value: opts.objective.of(&stats),
        mean_at_f: stats.mean,
        variance_at_f: stats.variance,
        f,
        iterations,
        converged,
        gradient_norm: gnorm,
        trace,
    })
}
