//! The two-state example: the Riccati gain minimizes the mean cost, a
//! variance-tuned gain trades a higher mean for fewer threshold violations.
//!
//! The example leaves the process noise and the initial state unspecified.
//! Unless an assumption file says otherwise we take `V = I`, `mu0 = 0` and
//! `Sigma0 = 0`, and every report states the values used.

use std::path::Path;

use lqgvar::lqg::{close_loop_full_state, optimal_gain};
use lqgvar::monte_carlo::{exceedance_probability, Agreement, EmpiricalCostStats, SimConfig};
use lqgvar::tuner::{evaluate_gain, tune_gain, Objective, TuneOptions};
use lqgvar::{auto_cost_stats, Horizon, LqgPlant, Matrix, Vector};
use nalgebra::dmatrix;
use serde::{Deserialize, Serialize};

use crate::commands::{empirical_rows, AnalyticSummary, AGREEMENT_LIMIT};
use crate::error::CliError;
use crate::model::{rows, to_matrix, to_vector, Rows};
use crate::report::{matrix, num, percent, write_json, Table};
use crate::ReproduceArgs;

/// Reference values for this example, rounded as originally reported.
pub const REFERENCE_F_OPT: [f64; 2] = [1.6, 9.9];
pub const REFERENCE_F_MV: [f64; 2] = [4.4, 30.0];
pub const REFERENCE_MEAN_OPT: f64 = 154.4;
pub const REFERENCE_MEAN_MV: f64 = 187.5;
pub const REFERENCE_EXCEED_OPT: f64 = 0.00091;
pub const REFERENCE_EXCEED_MV: f64 = 0.00059;

pub const ALPHA: f64 = -0.8;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssumptionFile {
    #[serde(rename = "V", default)]
    pub v: Option<Rows>,
    #[serde(default)]
    pub mu0: Option<Vec<f64>>,
    #[serde(rename = "Sigma0", default)]
    pub sigma0: Option<Rows>,
}

/// Parameters the example leaves open, as used for a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assumption {
    pub source: String,
    #[serde(rename = "V")]
    pub v: Rows,
    pub mu0: Vec<f64>,
    #[serde(rename = "Sigma0")]
    pub sigma0: Rows,
    pub note: String,
}

const NOTE: &str = "process noise intensity and initial state are not specified by the example; \
absolute exceedance probabilities depend on them";

impl Assumption {
    pub fn standard() -> Self {
        Self {
            source: "default".into(),
            v: rows(&Matrix::identity(2, 2)),
            mu0: vec![0.0, 0.0],
            sigma0: rows(&Matrix::zeros(2, 2)),
            note: NOTE.into(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        let file: AssumptionFile = serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("{}: invalid assumption file: {e}", path.display())))?;
        let base = Self::standard();
        let a = Self {
            source: path.display().to_string(),
            v: file.v.unwrap_or(base.v),
            mu0: file.mu0.unwrap_or(base.mu0),
            sigma0: file.sigma0.unwrap_or(base.sigma0),
            note: NOTE.into(),
        };
        a.parts()?;
        Ok(a)
    }

    fn parts(&self) -> Result<(Matrix, Vector, Matrix), CliError> {
        Ok((
            to_matrix(&self.v, 2, 2, "V")?,
            to_vector(&self.mu0, 2, "mu0")?,
            to_matrix(&self.sigma0, 2, 2, "Sigma0")?,
        ))
    }
}

pub fn example_plant(v: Matrix) -> Result<LqgPlant, CliError> {
    Ok(LqgPlant::new(
        dmatrix![1.0, 0.0; 0.05, 1.0],
        dmatrix![1.0; 0.0],
        Matrix::identity(2, 2),
        dmatrix![1.0],
        v,
        ALPHA,
    )?)
}

#[derive(Debug, Clone)]
pub struct ExampleConfig {
    pub paths: usize,
    pub seed: u64,
    pub threshold: f64,
    pub horizon: f64,
    pub dt: f64,
    pub landscape_points: usize,
    pub assumption: Assumption,
}

impl ExampleConfig {
    pub fn from_args(args: &ReproduceArgs) -> Result<Self, CliError> {
        Ok(Self {
            paths: args.paths as usize,
            seed: args.seed,
            threshold: args.threshold,
            horizon: args.horizon,
            dt: args.dt,
            landscape_points: args.landscape_points as usize,
            assumption: match &args.assumption_file {
                Some(p) => Assumption::load(p)?,
                None => Assumption::standard(),
            },
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GainRow {
    pub label: &'static str,
    #[serde(rename = "F")]
    pub f: Vec<f64>,
    pub reference_f: [f64; 2],
    /// Infinite-horizon statistics.
    pub mean: f64,
    pub variance: f64,
    pub reference_mean: f64,
    /// Statistics over the simulated horizon.
    pub finite_horizon: AnalyticSummary,
    pub empirical: EmpiricalCostStats,
    pub agreement: Agreement,
    pub reference_exceed_prob: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LandscapePoint {
    pub s: f64,
    #[serde(rename = "F")]
    pub f: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TuneSummary {
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExampleChecks {
    /// `p(F_mv) < p(F_opt)`.
    pub fewer_violations_with_mv: bool,
    /// Empirical and analytic moments within the agreement limit for both gains.
    pub consistent_opt: bool,
    pub consistent_mv: bool,
    pub f_opt_within_0_05: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExampleReport {
    pub command: &'static str,
    pub assumption: Assumption,
    #[serde(rename = "A")]
    pub a: Rows,
    #[serde(rename = "B")]
    pub b: Rows,
    #[serde(rename = "Q")]
    pub q: Rows,
    #[serde(rename = "R")]
    pub r: Rows,
    pub alpha: f64,
    pub threshold: f64,
    pub horizon: f64,
    pub dt: f64,
    pub paths: usize,
    pub seed: u64,
    pub opt: GainRow,
    pub mv: GainRow,
    pub tuning: TuneSummary,
    /// Infinite-horizon statistics at the rounded reference minimum-variance gain.
    pub reference_mv_gain_stats: AnalyticSummary,
    pub landscape: Vec<LandscapePoint>,
    pub checks: ExampleChecks,
}

struct Setup<'a> {
    plant: &'a LqgPlant,
    mu0: &'a Vector,
    sigma0: &'a Matrix,
    cfg: &'a ExampleConfig,
}

impl Setup<'_> {
    fn row(&self, label: &'static str, f: &Matrix, reference: ([f64; 2], f64, f64)) -> Result<GainRow, CliError> {
        let inf = evaluate_gain(self.plant, f, self.mu0, self.sigma0)?;
        let horizon = Horizon::Finite(self.cfg.horizon);
        let (sys, cost) = close_loop_full_state(self.plant, f, self.mu0.clone(), self.sigma0.clone(), horizon)?;
        let finite = auto_cost_stats(&sys, &cost)?;
        let sim = SimConfig::new(self.cfg.dt, self.cfg.horizon, self.cfg.paths, self.cfg.seed)?
            .with_threshold(self.cfg.threshold)?;
        let empirical = exceedance_probability(&sys, &cost, &sim)?;
        Ok(GainRow {
            label,
            f: f.iter().copied().collect(),
            reference_f: reference.0,
            mean: inf.mean,
            variance: inf.variance,
            reference_mean: reference.1,
            finite_horizon: AnalyticSummary::from(&finite),
            agreement: Agreement::new(&finite, &empirical, AGREEMENT_LIMIT),
            empirical,
            reference_exceed_prob: reference.2,
        })
    }
}

/// Runs the whole example: synthesis, tuning, landscape and both simulations.
pub fn run_example(cfg: &ExampleConfig) -> Result<ExampleReport, CliError> {
    let (v, mu0, sigma0) = cfg.assumption.parts()?;
    let plant = example_plant(v)?;
    let f_opt = optimal_gain(&plant)?;
    let tuned = tune_gain(&plant, &mu0, &sigma0, &TuneOptions::new(Objective::Variance, f_opt.clone()))?;
    let f_mv = tuned.f.clone();
    let setup = Setup {
        plant: &plant,
        mu0: &mu0,
        sigma0: &sigma0,
        cfg,
    };
    let opt = setup.row("F_opt", &f_opt, (REFERENCE_F_OPT, REFERENCE_MEAN_OPT, REFERENCE_EXCEED_OPT))?;
    let mv = setup.row("F_mv", &f_mv, (REFERENCE_F_MV, REFERENCE_MEAN_MV, REFERENCE_EXCEED_MV))?;

    let reference_mv = Matrix::from_row_slice(1, 2, &REFERENCE_F_MV);
    let reference_mv_gain_stats = AnalyticSummary::from(&evaluate_gain(&plant, &reference_mv, &mu0, &sigma0)?);

    let last = (cfg.landscape_points - 1) as f64;
    let landscape = (0..cfg.landscape_points)
        .map(|k| {
            let s = k as f64 / last;
            let f = &f_opt + (&f_mv - &f_opt) * s;
            let stats = evaluate_gain(&plant, &f, &mu0, &sigma0)?;
            Ok(LandscapePoint {
                s,
                f: f.iter().copied().collect(),
                mean: stats.mean,
                variance: stats.variance,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let p = |row: &GainRow| row.empirical.exceed_prob.unwrap_or(f64::NAN);
    let checks = ExampleChecks {
        fewer_violations_with_mv: p(&mv) < p(&opt),
        consistent_opt: opt.agreement.pass,
        consistent_mv: mv.agreement.pass,
        f_opt_within_0_05: f_opt.iter().zip(REFERENCE_F_OPT).all(|(a, b)| (a - b).abs() <= 0.05),
    };
    Ok(ExampleReport {
        command: "reproduce-example",
        assumption: cfg.assumption.clone(),
        a: rows(plant.a()),
        b: rows(plant.b()),
        q: rows(plant.q()),
        r: rows(plant.r()),
        alpha: plant.alpha(),
        threshold: cfg.threshold,
        horizon: cfg.horizon,
        dt: cfg.dt,
        paths: cfg.paths,
        seed: cfg.seed,
        opt,
        mv,
        tuning: TuneSummary {
            iterations: tuned.iterations,
            converged: tuned.converged,
            gradient_norm: tuned.gradient_norm,
        },
        reference_mv_gain_stats,
        landscape,
        checks,
    })
}

fn gain_table(row: &GainRow) -> Table {
    let f = Matrix::from_row_slice(1, row.f.len(), &row.f);
    let mut t = Table::new(row.label);
    t.row("F", format!("{}   (reference {:?})", matrix(&f), row.reference_f))
        .row("E[J]", format!("{}   (reference {})", num(row.mean), num(row.reference_mean)))
        .row("Var[J]", num(row.variance))
        .row("E[J_T] analytic", num(row.finite_horizon.mean))
        .row("Var[J_T] analytic", num(row.finite_horizon.variance));
    empirical_rows(&mut t, &row.empirical);
    t.row(
        "reference p(J > threshold)",
        percent(row.reference_exceed_prob),
    )
    .row(
        "analytic vs simulated",
        format!(
            "{} (z = {:.2}, {:.2})",
            if row.agreement.pass { "PASS" } else { "FAIL" },
            row.agreement.mean_z,
            row.agreement.variance_z
        ),
    );
    t
}

pub fn reproduce_example(args: &ReproduceArgs) -> Result<(), CliError> {
    let cfg = ExampleConfig::from_args(args)?;
    let report = run_example(&cfg)?;
    let a = &report.assumption;
    let mut head = Table::new("reproduce-example");
    head.row("ASSUMPTION", format!("({}) {}", a.source, a.note))
        .row("  V", format!("{:?}", a.v))
        .row("  mu0", format!("{:?}", a.mu0))
        .row("  Sigma0", format!("{:?}", a.sigma0))
        .row("alpha", num(report.alpha))
        .row("threshold", num(report.threshold))
        .row("T, dt", format!("{}, {}", num(report.horizon), num(report.dt)))
        .row("paths, seed", format!("{}, {}", report.paths, report.seed))
        .row(
            "tuning",
            format!(
                "{} iterations, converged {}, gradient norm {}",
                report.tuning.iterations,
                report.tuning.converged,
                num(report.tuning.gradient_norm)
            ),
        );
    head.print();
    gain_table(&report.opt).print();
    gain_table(&report.mv).print();

    let mut land = Table::new("landscape from F_opt (s = 0) to F_mv (s = 1)");
    for p in &report.landscape {
        land.row(
            format!("s = {:.2}", p.s),
            format!("F = [{}, {}]  E[J] = {}  Var[J] = {}", num(p.f[0]), num(p.f[1]), num(p.mean), num(p.variance)),
        );
    }
    land.print();
    let r = &report.reference_mv_gain_stats;
    let c = &report.checks;
    let mut checks = Table::new("checks");
    checks
        .row("reference F_mv stats", format!("E[J] = {}  Var[J] = {}", num(r.mean), num(r.variance)))
        .row("p(F_mv) < p(F_opt)", c.fewer_violations_with_mv.to_string())
        .row("F_opt consistent", c.consistent_opt.to_string())
        .row("F_mv consistent", c.consistent_mv.to_string())
        .row("F_opt within 0.05 of reference", c.f_opt_within_0_05.to_string());
    checks.print();
    if let Some(path) = &args.out {
        write_json(path, &report)?;
    }
    Ok(())
}
