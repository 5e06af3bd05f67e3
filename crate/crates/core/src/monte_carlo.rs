//! Sample-path simulation of `x' = A x + v` and empirical cost statistics.
//!
//! Every path draws from its own ChaCha stream selected by the path index,
//! so results do not depend on how paths are spread over threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost_lyap::{CostSpec, CostStats, Horizon};
use crate::error::{Error, Result};
use crate::linalg::{mat_exp, psd_sqrt, Matrix, Vector};
use crate::state_moments::{noise_integral, LtiSystem};

/// Eigenvalues below this are treated as zero when factoring noise intensities.
pub const SQRT_CLAMP_TOL: f64 = 1e-12;

/// Time-stepping rule for one step of length `dt`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// `x_{k+1} = e^{A dt} x_k + L_d xi` with `L_d L_d^T` the exact one-step
    /// noise covariance; no discretization bias in the sampled states.
    #[default]
    Exact,
    /// `x_{k+1} = x_k + A x_k dt + L xi sqrt(dt)` with `L L^T = V`.
    EulerMaruyama,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub threshold: Option<f64>,
    pub scheme: Scheme,
}

impl SimConfig {
    pub fn new(dt: f64, horizon: f64, n_paths: usize, seed: u64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Contract(format!("dt must be > 0, got {dt}")));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Contract(format!("T must be > 0, got {horizon}")));
        }
        if n_paths < 2 {
            return Err(Error::Contract(format!(
                "at least 2 paths are needed, got {n_paths}"
            )));
        }
        Ok(Self {
            dt,
            horizon,
            n_paths,
            seed,
            threshold: None,
            scheme: Scheme::default(),
        })
    }

    pub fn with_threshold(mut self, threshold: f64) -> Result<Self> {
        if threshold.is_nan() {
            return Err(Error::NonFinite("threshold".into()));
        }
        self.threshold = Some(threshold);
        Ok(self)
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    /// Number of steps `round(T / dt)`, at least one.
    pub fn steps(&self) -> usize {
        ((self.horizon / self.dt).round() as usize).max(1)
    }

    /// Step length actually used, `T / steps`.
    pub fn effective_dt(&self) -> f64 {
        self.horizon / self.steps() as f64
    }

    fn rounding_warning(&self) -> Option<String> {
        let ratio = self.horizon / self.dt;
        ((ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0)).then(|| {
            format!(
                "T/dt = {ratio} is not an integer; using {} steps of {}",
                self.steps(),
                self.effective_dt()
            )
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCostStats {
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub mean_stderr: f64,
    pub variance_stderr: f64,
    pub exceed_prob: Option<f64>,
    pub exceed_count: Option<u64>,
    /// Binomial standard error of `exceed_prob`.
    pub exceed_stderr: Option<f64>,
    pub threshold: Option<f64>,
    pub n_paths: usize,
    pub steps: usize,
    pub dt: f64,
    pub scheme: Scheme,
    pub warnings: Vec<String>,
}

/// Cost and final state of one simulated path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathOutcome {
    pub cost: f64,
    pub terminal: Vector,
}

struct Stepper {
    n: usize,
    steps: usize,
    // Row-major one-step transition.
    phi: Vec<f64>,
    noise: Vec<f64>,
    init: Vec<f64>,
    mu0: Vec<f64>,
    q: Vec<f64>,
    // Trapezoid weight times discount at each grid point.
    weights: Vec<f64>,
}

fn row_major(m: &Matrix) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

impl Stepper {
    fn new(sys: &LtiSystem, cost: &CostSpec, cfg: &SimConfig) -> Result<Self> {
        let n = sys.dim();
        if cost.q().nrows() != n {
            return Err(Error::Dimension(format!(
                "Q must be {n}x{n}, got {}x{}",
                cost.q().nrows(),
                cost.q().ncols()
            )));
        }
        let steps = cfg.steps();
        let dt = cfg.effective_dt();
        let (phi, noise) = match cfg.scheme {
            Scheme::Exact => {
                let e = mat_exp(sys.a(), dt)?;
                let cov = noise_integral(sys.a(), sys.v(), dt, &e)?;
                (e, psd_sqrt(&cov, SQRT_CLAMP_TOL * dt)?)
            }
            Scheme::EulerMaruyama => (
                Matrix::identity(n, n) + sys.a() * dt,
                psd_sqrt(sys.v(), SQRT_CLAMP_TOL)? * dt.sqrt(),
            ),
        };
        let init = psd_sqrt(&sys.initial_covariance(), SQRT_CLAMP_TOL)?;
        let two_alpha = 2.0 * cost.alpha();
        let weights = (0..=steps)
            .map(|k| {
                let end = if k == 0 || k == steps { 0.5 } else { 1.0 };
                end * dt * (two_alpha * k as f64 * dt).exp()
            })
            .collect();
        Ok(Self {
            n,
            steps,
            phi: row_major(&phi),
            noise: row_major(&noise),
            init: row_major(&init),
            mu0: sys.mu0().as_slice().to_vec(),
            q: row_major(cost.q()),
            weights,
        })
    }

    fn quad(&self, x: &[f64]) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for i in 0..n {
            let row = &self.q[i * n..(i + 1) * n];
            s += x[i] * row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
        s
    }

    // out = m x + l xi, xi fresh standard normals.
    fn affine(m: &[f64], x: &[f64], l: &[f64], rng: &mut ChaCha8Rng, xi: &mut [f64], out: &mut [f64]) {
        let n = x.len();
        for v in xi.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        for i in 0..n {
            let mr = &m[i * n..(i + 1) * n];
            let lr = &l[i * n..(i + 1) * n];
            out[i] = mr.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
                + lr.iter().zip(xi.iter()).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    fn run(&self, seed: u64, path: u64) -> PathOutcome {
        let n = self.n;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path);
        let mut xi = vec![0.0; n];
        let mut x = vec![0.0; n];
        let mut next = vec![0.0; n];
        let identity: Vec<f64> = (0..n * n).map(|k| if k % (n + 1) == 0 { 1.0 } else { 0.0 }).collect();
        Self::affine(&identity, &self.mu0, &self.init, &mut rng, &mut xi, &mut x);
        let mut cost = self.weights[0] * self.quad(&x);
        for k in 1..=self.steps {
            Self::affine(&self.phi, &x, &self.noise, &mut rng, &mut xi, &mut next);
            std::mem::swap(&mut x, &mut next);
            cost += self.weights[k] * self.quad(&x);
        }
        PathOutcome {
            cost,
            terminal: Vector::from_vec(x),
        }
    }
}

fn check_horizon(cost: &CostSpec, cfg: &SimConfig) -> Result<()> {
    match cost.horizon() {
        Horizon::Finite(t) if (t - cfg.horizon).abs() <= 1e-12 * t.max(1.0) => Ok(()),
        Horizon::Finite(t) => Err(Error::Contract(format!(
            "cost horizon {t} differs from simulated horizon {}",
            cfg.horizon
        ))),
        Horizon::Infinite => Err(Error::Contract(
            "simulation needs a finite cost horizon".into(),
        )),
    }
}

/// Simulates all paths and returns them in path order.
pub fn sample_paths(sys: &LtiSystem, cost: &CostSpec, cfg: &SimConfig) -> Result<Vec<PathOutcome>> {
    check_horizon(cost, cfg)?;
    let stepper = Stepper::new(sys, cost, cfg)?;
    Ok((0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|p| stepper.run(cfg.seed, p))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exceedance {
    pub count: u64,
    pub prob: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSummary {
    pub mean: f64,
    pub variance: f64,
    pub mean_stderr: f64,
    /// From the fourth central moment.
    pub variance_stderr: f64,
    pub exceedance: Option<Exceedance>,
}

/// Moment estimates of a cost sample, with the exceedance frequency of
/// `threshold` when given.
pub fn summarize(costs: &[f64], threshold: Option<f64>) -> Result<SampleSummary> {
    let n = costs.len();
    if n < 2 {
        return Err(Error::Contract("at least 2 samples are needed".into()));
    }
    let nf = n as f64;
    let mean = costs.iter().sum::<f64>() / nf;
    let (mut m2, mut m4) = (0.0, 0.0);
    for c in costs {
        let d2 = (c - mean).powi(2);
        m2 += d2;
        m4 += d2 * d2;
    }
    let variance = m2 / (nf - 1.0);
    let m4 = m4 / nf;
    let mean_stderr = (variance / nf).sqrt();
    let variance_stderr = ((m4 - (nf - 3.0) / (nf - 1.0) * variance * variance) / nf)
        .max(0.0)
        .sqrt();
    let exceedance = threshold.map(|t| {
        let count = costs.iter().filter(|&&c| c > t).count() as u64;
        let prob = count as f64 / nf;
        Exceedance {
            count,
            prob,
            stderr: (prob * (1.0 - prob) / nf).sqrt(),
        }
    });
    Ok(SampleSummary {
        mean,
        variance,
        mean_stderr,
        variance_stderr,
        exceedance,
    })
}

/// Mean, variance and (if `cfg.threshold` is set) exceedance probability of
/// the simulated cost.
pub fn simulate_costs(sys: &LtiSystem, cost: &CostSpec, cfg: &SimConfig) -> Result<EmpiricalCostStats> {
    let paths = sample_paths(sys, cost, cfg)?;
    let costs: Vec<f64> = paths.iter().map(|p| p.cost).collect();
    let s = summarize(&costs, cfg.threshold)?;
    log::debug!("simulated {} paths of {} steps", cfg.n_paths, cfg.steps());
    Ok(EmpiricalCostStats {
        mean: s.mean,
        variance: s.variance,
        mean_stderr: s.mean_stderr,
        variance_stderr: s.variance_stderr,
        exceed_prob: s.exceedance.map(|e| e.prob),
        exceed_count: s.exceedance.map(|e| e.count),
        exceed_stderr: s.exceedance.map(|e| e.stderr),
        threshold: cfg.threshold,
        n_paths: cfg.n_paths,
        steps: cfg.steps(),
        dt: cfg.effective_dt(),
        scheme: cfg.scheme,
        warnings: cfg.rounding_warning().into_iter().collect(),
    })
}

/// As [`simulate_costs`], requiring a threshold.
pub fn exceedance_probability(sys: &LtiSystem, cost: &CostSpec, cfg: &SimConfig) -> Result<EmpiricalCostStats> {
    if cfg.threshold.is_none() {
        return Err(Error::Contract("exceedance probability needs a threshold".into()));
    }
    simulate_costs(sys, cost, cfg)
}

/// Distance between analytic and simulated moments in standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub mean_z: f64,
    pub variance_z: f64,
    /// Both distances within `limit`.
    pub pass: bool,
    pub limit: f64,
}

impl Agreement {
    pub fn new(analytic: &CostStats, empirical: &EmpiricalCostStats, limit: f64) -> Self {
        let z = |a: f64, e: f64, se: f64| {
            if se > 0.0 {
                (e - a).abs() / se
            } else if (e - a).abs() <= 1e-9 * (1.0 + a.abs()) {
                0.0
            } else {
                f64::INFINITY
            }
        };
        let mean_z = z(analytic.mean, empirical.mean, empirical.mean_stderr);
        let variance_z = z(analytic.variance, empirical.variance, empirical.variance_stderr);
        Self {
            mean_z,
            variance_z,
            pass: mean_z <= limit && variance_z <= limit,
            limit,
        }
    }
}
