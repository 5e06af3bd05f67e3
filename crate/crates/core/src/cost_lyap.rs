//! Closed-form mean and variance of the discounted quadratic cost
//!
//! ```text
//! J_T = int_0^T e^{2 alpha t} x(t)^T Q x(t) dt      (finite horizon)
//! J   = int_0^inf e^{2 alpha t} x(t)^T Q x(t) dt    (infinite horizon)
//! ```
//!
//! built from solutions of Lyapunov equations. Notation in comments:
//! `A_k = A + k alpha I`, `X_k^M` solves `A_k X + X A_k^T + M = 0`,
//! `Xb_k^M` solves `A_k^T X + X A_k + M = 0`, and `Xb_k^M(T)` is the
//! finite-horizon integral `int_0^T e^{A_k^T t} M e^{A_k t} dt`.
//!
//! Each route first evaluates its applicability predicates; if any fails the
//! call returns [`Error::Condition`] listing all of them, so callers can fall
//! back to the matrix-exponential route in [`crate::cost_expm`].

use serde::{Deserialize, Serialize};

use crate::error::{ConditionCheck, Error, Result};
use crate::linalg::{
    classify_spectrum, ensure_finite, ensure_shape, is_symmetric, mat_exp, shifted,
    solve_lyapunov, solve_lyapunov_transposed, symmetrize, van_loan_integral, Matrix,
    trace_product, SpectrumReport, SPECTRUM_TOL,
};
use crate::state_moments::LtiSystem;

/// Below this value of `|alpha| * max(1, T)` the undiscounted formulas are used.
pub const ALPHA_ZERO_THRESHOLD: f64 = 1e-9;

/// Relative allowance for rounding-induced negative variances.
pub const NEGATIVE_VARIANCE_RTOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Horizon {
    Finite(f64),
    Infinite,
}

/// Weight, discount exponent and horizon of the quadratic cost.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSpec {
    q: Matrix,
    alpha: f64,
    horizon: Horizon,
}

impl CostSpec {
    pub fn new(q: Matrix, alpha: f64, horizon: Horizon) -> Result<Self> {
        if q.nrows() != q.ncols() {
            return Err(Error::Dimension(format!(
                "Q must be square, got {}x{}",
                q.nrows(),
                q.ncols()
            )));
        }
        ensure_finite(&q, "Q")?;
        if !is_symmetric(&q, 1e-12) {
            return Err(Error::Contract("Q must be symmetric".into()));
        }
        if !alpha.is_finite() {
            return Err(Error::NonFinite("alpha".into()));
        }
        if let Horizon::Finite(t) = horizon {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::Contract(format!(
                    "finite horizon must be > 0, got {t}"
                )));
            }
        }
        Ok(Self {
            q: symmetrize(&q),
            alpha,
            horizon,
        })
    }

    pub fn finite(q: Matrix, alpha: f64, t: f64) -> Result<Self> {
        Self::new(q, alpha, Horizon::Finite(t))
    }

    pub fn infinite(q: Matrix, alpha: f64) -> Result<Self> {
        Self::new(q, alpha, Horizon::Infinite)
    }

    pub fn with_horizon(&self, horizon: Horizon) -> Result<Self> {
        Self::new(self.q.clone(), self.alpha, horizon)
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn horizon(&self) -> Horizon {
        self.horizon
    }

    pub(crate) fn check_against(&self, sys: &LtiSystem) -> Result<()> {
        let n = sys.dim();
        ensure_shape(&self.q, n, n, "Q")
    }

    pub(crate) fn finite_horizon(&self) -> Result<f64> {
        match self.horizon {
            Horizon::Finite(t) => Ok(t),
            Horizon::Infinite => Err(Error::Contract(
                "operation needs a finite horizon".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lyapunov,
    Expm,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Lyapunov => "lyapunov",
            Method::Expm => "expm",
        })
    }
}

/// Analytic cost statistics together with the route that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostStats {
    pub mean: f64,
    /// Variance after clamping tiny negative rounding artefacts to zero.
    pub variance: f64,
    /// Variance as evaluated, before clamping.
    pub raw_variance: f64,
    pub method: Method,
    /// Formula family that was applied, e.g. `finite horizon, alpha != 0`.
    pub branch: String,
    pub conditions_checked: Vec<ConditionCheck>,
    /// Non-fatal notes, e.g. why a route was skipped.
    pub warnings: Vec<String>,
}

impl CostStats {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Clamps rounding-level negatives to zero and rejects anything larger.
pub fn clamp_variance(raw: f64, mean: f64) -> Result<f64> {
    if !raw.is_finite() {
        return Err(Error::Numerical(format!("variance evaluated to {raw}")));
    }
    if raw >= 0.0 {
        return Ok(raw);
    }
    if raw >= -NEGATIVE_VARIANCE_RTOL * (1.0 + mean * mean) {
        Ok(0.0)
    } else {
        Err(Error::Numerical(format!(
            "variance evaluated to {raw:.6e}, inconsistent with mean {mean:.6e}"
        )))
    }
}

fn use_zero_alpha(alpha: f64, horizon: f64) -> bool {
    alpha.abs() * horizon.max(1.0) < ALPHA_ZERO_THRESHOLD
}

fn spectrum(a: &Matrix) -> Result<SpectrumReport> {
    classify_spectrum(a, SPECTRUM_TOL)
}

fn sylvester_check(name: &str, a: &Matrix) -> Result<ConditionCheck> {
    Ok(ConditionCheck::new(
        format!("{name} Sylvester"),
        spectrum(a)?.is_sylvester,
    ))
}

fn require(checks: Vec<ConditionCheck>) -> Result<Vec<ConditionCheck>> {
    if checks.iter().all(|c| c.holds) {
        Ok(checks)
    } else {
        Err(Error::Condition { checks })
    }
}


/// `(e^{x} - 1) / x`, continuous through `x = 0`.
fn expm1_ratio(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.exp_m1() / x
    }
}

/// Applicability predicates for the finite-horizon mean.
pub fn finite_mean_conditions(sys: &LtiSystem, cost: &CostSpec) -> Result<Vec<ConditionCheck>> {
    let t = cost.finite_horizon()?;
    let a = sys.a();
    let mut checks = vec![sylvester_check("A", a)?];
    if !use_zero_alpha(cost.alpha, t) {
        checks.push(sylvester_check("A_alpha", &shifted(a, cost.alpha))?);
    }
    Ok(checks)
}

/// Applicability predicates for the finite-horizon variance.
pub fn finite_variance_conditions(
    sys: &LtiSystem,
    cost: &CostSpec,
) -> Result<Vec<ConditionCheck>> {
    let t = cost.finite_horizon()?;
    let a = sys.a();
    let alpha = cost.alpha;
    if use_zero_alpha(alpha, t) {
        return Ok(vec![sylvester_check("A", a)?]);
    }
    Ok(vec![
        sylvester_check("A_-alpha", &shifted(a, -alpha))?,
        sylvester_check("A", a)?,
        sylvester_check("A_alpha", &shifted(a, alpha))?,
        sylvester_check("A_2alpha", &shifted(a, 2.0 * alpha))?,
    ])
}

/// Applicability predicates for the infinite-horizon mean and variance.
pub fn infinite_conditions(sys: &LtiSystem, cost: &CostSpec) -> Result<Vec<ConditionCheck>> {
    Ok(vec![
        ConditionCheck::new("alpha < 0", cost.alpha < 0.0),
        ConditionCheck::new(
            "A_alpha stable",
            spectrum(&shifted(sys.a(), cost.alpha))?.is_stable,
        ),
    ])
}

/// Shared quantities of one finite-horizon evaluation.
struct FiniteTerms {
    alpha: f64,
    t: f64,
    zero_alpha: bool,
    /// Xb_1^Q (or Xb^Q when alpha is treated as zero).
    xbar: Matrix,
    /// Xb_1^Q(T).
    xbar_t: Matrix,
    /// X^V.
    xv: Matrix,
    /// Sigma(T).
    sigma_t: Matrix,
}

impl FiniteTerms {
    fn new(sys: &LtiSystem, cost: &CostSpec) -> Result<Self> {
        cost.check_against(sys)?;
        let t = cost.finite_horizon()?;
        let alpha = cost.alpha;
        let zero_alpha = use_zero_alpha(alpha, t);
        let a = sys.a();
        let a_alpha = if zero_alpha { a.clone() } else { shifted(a, alpha) };

        let xbar = solve_lyapunov_transposed(&a_alpha, &cost.q)?;
        let e_alpha = mat_exp(&a_alpha, t)?;
        let xbar_t = symmetrize(&(&xbar - e_alpha.transpose() * &xbar * &e_alpha));

        let xv = solve_lyapunov(a, sys.v())?;
        let e = mat_exp(a, t)?;
        let sigma_t = symmetrize(&(&e * (sys.sigma0() - &xv) * e.transpose() + &xv));
        Ok(Self {
            alpha,
            t,
            zero_alpha,
            xbar,
            xbar_t,
            xv,
            sigma_t,
        })
    }

    fn mean(&self, sys: &LtiSystem) -> f64 {
        let (alpha, t) = (self.alpha, self.t);
        let weight = if self.zero_alpha {
            sys.sigma0() - &self.sigma_t + sys.v() * t
        } else {
            // (1 - e^{2aT}) (-V / 2a) = T (e^{2aT} - 1) / (2aT) V
            let growth = (2.0 * alpha * t).exp();
            sys.sigma0() - &self.sigma_t * growth + sys.v() * (t * expm1_ratio(2.0 * alpha * t))
        };
        trace_product(&weight, &self.xbar)
    }
}

fn finite_branch(zero_alpha: bool) -> &'static str {
    if zero_alpha {
        "finite horizon, alpha = 0"
    } else {
        "finite horizon, alpha != 0"
    }
}

/// `E[J_T]` from Lyapunov solutions.
pub fn expected_cost_finite(sys: &LtiSystem, cost: &CostSpec) -> Result<f64> {
    require(finite_mean_conditions(sys, cost)?)?;
    Ok(FiniteTerms::new(sys, cost)?.mean(sys))
}

/// `E[J]` for `alpha < 0` and stable `A_alpha`: `tr((Sigma0 - V / 2 alpha) Xb_1^Q)`.
pub fn expected_cost_infinite(sys: &LtiSystem, cost: &CostSpec) -> Result<f64> {
    cost.check_against(sys)?;
    require(infinite_conditions(sys, cost)?)?;
    let alpha = cost.alpha;
    let xbar = solve_lyapunov_transposed(&shifted(sys.a(), alpha), &cost.q)?;
    let weight = sys.sigma0() - sys.v() / (2.0 * alpha);
    Ok(trace_product(&weight, &xbar))
}

/// Raw (unclamped) `Var[J_T]` given the shared terms.
fn finite_variance_raw(sys: &LtiSystem, cost: &CostSpec, terms: &FiniteTerms) -> Result<f64> {
    let a = sys.a();
    let q = &cost.q;
    let (alpha, t) = (terms.alpha, terms.t);
    let mu0 = sys.mu0();
    let delta = sys.sigma0() - &terms.xv;
    let xbar_t = &terms.xbar_t;
    let xv = &terms.xv;

    let dx = &delta * xbar_t;
    let first = 2.0 * trace_product(&dx, &dx);
    let quad = (mu0.transpose() * xbar_t * mu0)[(0, 0)];
    let second = -2.0 * quad * quad;

    let inner = if terms.zero_alpha {
        // X^V (T Xb^Q - Xb^{Xb^Q}(T)) + 2 X^Delta Xb^Q(T) - 2 Xt_{0,0}^{X^Delta e^{A^T T} Q}(T)
        let e = mat_exp(a, t)?;
        let nested = solve_lyapunov_transposed(a, &terms.xbar)?;
        let nested_t = &nested - e.transpose() * &nested * &e;
        let x_delta = solve_lyapunov(a, &delta)?;
        let coupling = &x_delta * e.transpose() * q;
        let tilde = van_loan_integral(a, &coupling, a, t)?;
        xv * (&terms.xbar * t - nested_t) + &x_delta * xbar_t * 2.0 - tilde * 2.0
    } else {
        // X^V (e^{4aT} Xb_-1^Q(T) - Xb_1^Q(T)) / 4a + 2 X_2^Delta Xb_1^Q(T)
        //   - 2 Xt_{3,1}^{X_2^Delta e^{A_1^T T} Q}(T)
        let a_minus = shifted(a, -alpha);
        let a_alpha = shifted(a, alpha);
        let a_2 = shifted(a, 2.0 * alpha);
        let a_3 = shifted(a, 3.0 * alpha);

        let xbar_minus = solve_lyapunov_transposed(&a_minus, q)?;
        let e_minus = mat_exp(&a_minus, t)?;
        let xbar_minus_t = &xbar_minus - e_minus.transpose() * &xbar_minus * &e_minus;
        let diff = (xbar_minus_t * (4.0 * alpha * t).exp() - xbar_t) / (4.0 * alpha);

        let x2_delta = solve_lyapunov(&a_2, &delta)?;
        let e_alpha = mat_exp(&a_alpha, t)?;
        let coupling = &x2_delta * e_alpha.transpose() * q;
        let tilde = van_loan_integral(&a_3, &coupling, &a_alpha, t)?;
        xv * diff + &x2_delta * xbar_t * 2.0 - tilde * 2.0
    };
    let third = 4.0 * trace_product(&(xv * q), &inner);
    Ok(first + second + third)
}

/// `Var[J_T]` from Lyapunov solutions, clamped at zero.
pub fn variance_cost_finite(sys: &LtiSystem, cost: &CostSpec) -> Result<f64> {
    require(finite_variance_conditions(sys, cost)?)?;
    let terms = FiniteTerms::new(sys, cost)?;
    let raw = finite_variance_raw(sys, cost, &terms)?;
    clamp_variance(raw, terms.mean(sys))
}

struct InfiniteTerms {
    alpha: f64,
    xbar: Matrix,
}

impl InfiniteTerms {
    fn new(sys: &LtiSystem, cost: &CostSpec) -> Result<Self> {
        cost.check_against(sys)?;
        require(infinite_conditions(sys, cost)?)?;
        let alpha = cost.alpha;
        Ok(Self {
            alpha,
            xbar: solve_lyapunov_transposed(&shifted(sys.a(), alpha), &cost.q)?,
        })
    }

    fn mean(&self, sys: &LtiSystem) -> f64 {
        trace_product(&(sys.sigma0() - sys.v() / (2.0 * self.alpha)), &self.xbar)
    }

    fn variance_raw(&self, sys: &LtiSystem) -> Result<f64> {
        let alpha = self.alpha;
        let xbar = &self.xbar;
        let mu0 = sys.mu0();
        let a2 = shifted(sys.a(), 2.0 * alpha);
        let x2_sigma0 = solve_lyapunov(&a2, sys.sigma0())?;
        let x2_v = solve_lyapunov(&a2, sys.v())?;

        let sx = sys.sigma0() * xbar;
        let quad = (mu0.transpose() * xbar * mu0)[(0, 0)];
        let left = x2_sigma0 - x2_v / (4.0 * alpha);
        let right = xbar * sys.v() * xbar;
        Ok(2.0 * trace_product(&sx, &sx) - 2.0 * quad * quad + 4.0 * trace_product(&left, &right))
    }
}

/// `Var[J]` for `alpha < 0` and stable `A_alpha`, clamped at zero.
pub fn variance_cost_infinite(sys: &LtiSystem, cost: &CostSpec) -> Result<f64> {
    let terms = InfiniteTerms::new(sys, cost)?;
    clamp_variance(terms.variance_raw(sys)?, terms.mean(sys))
}

/// The infinite-horizon variance in its unsimplified form (the `T -> inf`
/// limit of the finite-horizon expression, written with `Delta = Sigma0 - X^V`):
///
/// ```text
/// 2 tr((Delta Xb_1^Q)^2) - 2 (mu0^T Xb_1^Q mu0)^2 + 4 tr(Xb_1^Q X^V Q (2 X_2^Delta - X^V / 4 alpha))
/// ```
///
/// Needs `A` itself to be Sylvester for `X^V`. Exposed for diagnostics; the
/// value agrees with [`variance_cost_infinite`] up to rounding.
pub fn variance_cost_infinite_unreduced(sys: &LtiSystem, cost: &CostSpec) -> Result<f64> {
    let terms = InfiniteTerms::new(sys, cost)?;
    let alpha = terms.alpha;
    let xbar = &terms.xbar;
    let mu0 = sys.mu0();
    let xv = solve_lyapunov(sys.a(), sys.v())?;
    let delta = sys.sigma0() - &xv;
    let x2_delta = solve_lyapunov(&shifted(sys.a(), 2.0 * alpha), &delta)?;

    let dx = &delta * xbar;
    let quad = (mu0.transpose() * xbar * mu0)[(0, 0)];
    let left = xbar * &xv * &cost.q;
    let right = x2_delta * 2.0 - &xv / (4.0 * alpha);
    Ok(2.0 * trace_product(&dx, &dx) - 2.0 * quad * quad + 4.0 * trace_product(&left, &right))
}

/// Mean and variance of the finite-horizon cost via Lyapunov solutions.
pub fn finite_cost_stats_lyapunov(sys: &LtiSystem, cost: &CostSpec) -> Result<CostStats> {
    // The mean's predicates are a subset of the variance's.
    let checks = require(finite_variance_conditions(sys, cost)?)?;
    let terms = FiniteTerms::new(sys, cost)?;
    let mean = terms.mean(sys);
    let raw = finite_variance_raw(sys, cost, &terms)?;
    Ok(CostStats {
        mean,
        variance: clamp_variance(raw, mean)?,
        raw_variance: raw,
        method: Method::Lyapunov,
        branch: finite_branch(terms.zero_alpha).to_string(),
        conditions_checked: checks,
        warnings: Vec::new(),
    })
}

/// Mean and variance of the infinite-horizon cost.
pub fn infinite_cost_stats(sys: &LtiSystem, cost: &CostSpec) -> Result<CostStats> {
    if cost.horizon != Horizon::Infinite {
        return Err(Error::Contract("operation needs an infinite horizon".into()));
    }
    let checks = infinite_conditions(sys, cost)?;
    let terms = InfiniteTerms::new(sys, cost)?;
    let mean = terms.mean(sys);
    let raw = terms.variance_raw(sys)?;
    Ok(CostStats {
        mean,
        variance: clamp_variance(raw, mean)?,
        raw_variance: raw,
        method: Method::Lyapunov,
        branch: "infinite horizon".to_string(),
        conditions_checked: checks,
        warnings: Vec::new(),
    })
}

/// Lyapunov-route statistics for either horizon.
pub fn lyapunov_cost_stats(sys: &LtiSystem, cost: &CostSpec) -> Result<CostStats> {
    match cost.horizon {
        Horizon::Finite(_) => finite_cost_stats_lyapunov(sys, cost),
        Horizon::Infinite => infinite_cost_stats(sys, cost),
    }
}
