use std::path::Path;

use lqgvar::cost_lyap::lyapunov_cost_stats;
use lqgvar::linalg::{eigenvalues, shifted};
use lqgvar::lqg::{
    close_loop_full_state, close_loop_output_feedback, estimator_initial_moments, kalman_gain,
    optimal_gain,
};
use lqgvar::monte_carlo::{simulate_costs, Agreement, EmpiricalCostStats, SimConfig};
use lqgvar::tuner::{tune_gain, Objective, TuneOptions};
use lqgvar::{
    auto_cost_stats, cost_stats_expm, ConditionCheck, CostSpec, CostStats, Horizon, Matrix, Method,
};
use serde::Serialize;

use crate::error::CliError;
use crate::model::{rows, HorizonField, ModelFile, Rows};
use crate::report::{matrix, num, percent, write_json, Table};
use crate::{AnalyzeArgs, MethodArg, SimulateArgs, SynthesizeArgs, TuneArgs};

/// z-score limit for the analytic/empirical comparison in `simulate`.
pub const AGREEMENT_LIMIT: f64 = 4.0;

fn display(path: &Path) -> String {
    path.display().to_string()
}

fn finish<T: Serialize>(table: &Table, out: Option<&Path>, report: &T) -> Result<(), CliError> {
    table.print();
    if let Some(path) = out {
        write_json(path, report)?;
    }
    Ok(())
}

pub fn stats_for(method: MethodArg, sys: &lqgvar::LtiSystem, cost: &CostSpec) -> Result<CostStats, CliError> {
    Ok(match method {
        MethodArg::Lyapunov => lyapunov_cost_stats(sys, cost)?,
        MethodArg::Expm => cost_stats_expm(sys, cost)?,
        MethodArg::Auto => auto_cost_stats(sys, cost)?,
    })
}

#[derive(Debug, Serialize)]
pub struct AnalyzeReport {
    pub command: &'static str,
    pub model: String,
    pub horizon: HorizonField,
    pub alpha: f64,
    pub method_requested: MethodArg,
    pub method: Method,
    pub branch: String,
    pub mean: f64,
    pub variance: f64,
    pub std_dev: f64,
    pub raw_variance: f64,
    pub conditions_checked: Vec<ConditionCheck>,
    pub warnings: Vec<String>,
}

fn condition_rows(table: &mut Table, checks: &[ConditionCheck]) {
    for c in checks {
        table.row(format!("condition {}", c.name), if c.holds { "ok" } else { "FAILED" });
    }
}

pub fn analyze(args: &AnalyzeArgs) -> Result<(), CliError> {
    let model = ModelFile::load(&args.model)?;
    let (sys, mut cost) = model.to_system()?;
    if let Some(h) = args.horizon {
        cost = cost.with_horizon(h)?;
    }
    let stats = stats_for(args.method, &sys, &cost)?;
    let report = AnalyzeReport {
        command: "analyze",
        model: display(&args.model),
        horizon: HorizonField::from_horizon(cost.horizon()),
        alpha: cost.alpha(),
        method_requested: args.method,
        method: stats.method,
        branch: stats.branch.clone(),
        mean: stats.mean,
        variance: stats.variance,
        std_dev: stats.std_dev(),
        raw_variance: stats.raw_variance,
        conditions_checked: stats.conditions_checked.clone(),
        warnings: stats.warnings.clone(),
    };
    let mut t = Table::new(format!("analyze {}", report.model));
    t.row("horizon", horizon_text(cost.horizon()))
        .row("alpha", num(cost.alpha()))
        .row("method", stats.method.to_string())
        .row("branch", stats.branch.clone())
        .row("E[J]", num(stats.mean))
        .row("Var[J]", num(stats.variance))
        .row("std[J]", num(stats.std_dev()));
    condition_rows(&mut t, &stats.conditions_checked);
    for w in &stats.warnings {
        t.row("warning", w.clone());
    }
    finish(&t, args.out.as_deref(), &report)
}

pub fn horizon_text(h: Horizon) -> String {
    match h {
        Horizon::Finite(t) => num(t),
        Horizon::Infinite => "inf".into(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyticSummary {
    pub mean: f64,
    pub variance: f64,
    pub method: Method,
    pub branch: String,
}

impl From<&CostStats> for AnalyticSummary {
    fn from(s: &CostStats) -> Self {
        Self {
            mean: s.mean,
            variance: s.variance,
            method: s.method,
            branch: s.branch.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SimulateReport {
    pub command: &'static str,
    pub model: String,
    pub alpha: f64,
    pub config: SimConfig,
    pub empirical: EmpiricalCostStats,
    pub analytic: Option<AnalyticSummary>,
    pub agreement: Option<Agreement>,
    /// `PASS` or `FAIL` from the agreement check, `n/a` without analytic values.
    pub verdict: String,
    pub analytic_error: Option<String>,
}

pub fn empirical_rows(t: &mut Table, e: &EmpiricalCostStats) {
    t.row("paths", e.n_paths.to_string())
        .row("steps", format!("{} of {}", e.steps, num(e.dt)))
        .row("mean", format!("{} ± {}", num(e.mean), num(e.mean_stderr)))
        .row("variance", format!("{} ± {}", num(e.variance), num(e.variance_stderr)));
    if let (Some(p), Some(se), Some(count), Some(th)) = (e.exceed_prob, e.exceed_stderr, e.exceed_count, e.threshold) {
        t.row(format!("p(J > {})", num(th)), format!("{} ± {} ({count} paths)", percent(p), percent(se)));
    }
    for w in &e.warnings {
        t.row("warning", w.clone());
    }
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let model = ModelFile::load(&args.model)?;
    let (sys, cost) = model.to_system()?;
    let t = match (args.horizon, cost.horizon()) {
        (Some(t), _) | (None, Horizon::Finite(t)) => t,
        (None, Horizon::Infinite) => {
            return Err(CliError::Input(
                "the model's horizon is infinite; pass --T to simulate".into(),
            ))
        }
    };
    let cost = cost.with_horizon(Horizon::Finite(t))?;
    let mut cfg = SimConfig::new(args.dt, t, args.paths as usize, args.seed)?.with_scheme(args.scheme.into());
    if let Some(th) = args.threshold {
        cfg = cfg.with_threshold(th)?;
    }
    let empirical = simulate_costs(&sys, &cost, &cfg)?;
    let (analytic, analytic_error) = match auto_cost_stats(&sys, &cost) {
        Ok(s) => (Some(s), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let agreement = analytic.as_ref().map(|a| Agreement::new(a, &empirical, AGREEMENT_LIMIT));
    let verdict = match &agreement {
        Some(a) if a.pass => "PASS",
        Some(_) => "FAIL",
        None => "n/a",
    };

    let mut table = Table::new(format!("simulate {}", display(&args.model)));
    table.row("T", num(t)).row("seed", args.seed.to_string());
    empirical_rows(&mut table, &empirical);
    if let (Some(a), Some(g)) = (&analytic, &agreement) {
        table
            .row("analytic mean", format!("{} (z = {:.2})", num(a.mean), g.mean_z))
            .row("analytic variance", format!("{} (z = {:.2})", num(a.variance), g.variance_z));
    }
    if let Some(e) = &analytic_error {
        table.row("analytic", format!("unavailable: {e}"));
    }
    table.row(format!("agreement within {AGREEMENT_LIMIT} stderr"), verdict);

    let report = SimulateReport {
        command: "simulate",
        model: display(&args.model),
        alpha: cost.alpha(),
        config: cfg,
        empirical,
        analytic: analytic.as_ref().map(AnalyticSummary::from),
        agreement,
        verdict: verdict.into(),
        analytic_error,
    };
    finish(&table, args.out.as_deref(), &report)
}

pub fn spectrum(m: &Matrix) -> Result<Vec<[f64; 2]>, CliError> {
    let mut eigs: Vec<[f64; 2]> = eigenvalues(m)?.iter().map(|l| [l.re, l.im]).collect();
    eigs.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    Ok(eigs)
}

fn spectrum_text(eigs: &[[f64; 2]]) -> String {
    eigs.iter()
        .map(|[re, im]| {
            if *im == 0.0 {
                num(*re)
            } else {
                format!("{} {} {}i", num(*re), if *im < 0.0 { "-" } else { "+" }, num(im.abs()))
            }
        })
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Serialize)]
pub struct SynthesizeReport {
    pub command: &'static str,
    pub model: String,
    pub mode: &'static str,
    #[serde(rename = "F")]
    pub f: Rows,
    #[serde(rename = "K")]
    pub k: Option<Rows>,
    /// Spectrum of the closed-loop drift.
    pub closed_loop_eigenvalues: Vec<[f64; 2]>,
    /// Spectrum of the closed-loop drift shifted by `alpha`.
    pub shifted_closed_loop_eigenvalues: Vec<[f64; 2]>,
    /// Spectrum of `A - K C` with output feedback.
    pub observer_eigenvalues: Option<Vec<[f64; 2]>>,
    pub closed_loop_model: ModelFile,
}

pub fn synthesize(args: &SynthesizeArgs) -> Result<(), CliError> {
    let pm = ModelFile::load(&args.plant)?.to_plant()?;
    let plant = &pm.plant;
    let f = optimal_gain(plant)?;
    let output = plant.c().is_some() && !args.full_state;
    let (k, sys, cost) = if output {
        let k = kalman_gain(plant)?;
        let (mu, sigma) = estimator_initial_moments(&pm.mu0, &pm.sigma0);
        let (sys, cost) = close_loop_output_feedback(plant, &f, &k, mu, sigma, pm.horizon)?;
        (Some(k), sys, cost)
    } else {
        let (sys, cost) = close_loop_full_state(plant, &f, pm.mu0.clone(), pm.sigma0.clone(), pm.horizon)?;
        (None, sys, cost)
    };
    let eig = spectrum(sys.a())?;
    let shifted_eig = spectrum(&shifted(sys.a(), plant.alpha()))?;
    let observer = match (&k, plant.c()) {
        (Some(k), Some(c)) => Some(spectrum(&(plant.a() - k * c))?),
        _ => None,
    };
    let closed = ModelFile::from_system(&sys, &cost);
    if let Some(path) = &args.model_out {
        std::fs::write(path, closed.to_json() + "\n")
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
    }

    let mode = if output { "output-feedback" } else { "full-state" };
    let mut t = Table::new(format!("synthesize {}", display(&args.plant)));
    t.row("mode", mode).row("F", matrix(&f));
    if let Some(k) = &k {
        t.row("K", matrix(k));
    }
    t.row("closed-loop eigenvalues", spectrum_text(&eig))
        .row("shifted by alpha", spectrum_text(&shifted_eig));
    if let Some(o) = &observer {
        t.row("observer eigenvalues", spectrum_text(o));
    }
    if let Some(path) = &args.model_out {
        t.row("closed-loop model", display(path));
    }
    let report = SynthesizeReport {
        command: "synthesize",
        model: display(&args.plant),
        mode,
        f: rows(&f),
        k: k.as_ref().map(rows),
        closed_loop_eigenvalues: eig,
        shifted_closed_loop_eigenvalues: shifted_eig,
        observer_eigenvalues: observer,
        closed_loop_model: closed,
    };
    finish(&t, args.out.as_deref(), &report)
}

pub fn parse_gain(text: &str, rows: usize, cols: usize) -> Result<Matrix, CliError> {
    let values: Vec<f64> = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| CliError::Input(format!("bad gain entry \"{s}\""))))
        .collect::<Result<_, _>>()?;
    if values.len() != rows * cols {
        return Err(CliError::Input(format!(
            "gain needs {} entries ({rows}x{cols}, row-major), got {}",
            rows * cols,
            values.len()
        )));
    }
    Ok(Matrix::from_row_slice(rows, cols, &values))
}

#[derive(Debug, Serialize)]
pub struct TuneReport {
    pub command: &'static str,
    pub model: String,
    pub objective: String,
    pub initial_f: Rows,
    pub riccati_f: Option<Rows>,
    #[serde(rename = "F")]
    pub f: Rows,
    pub objective_value: f64,
    pub mean_at_f: f64,
    pub variance_at_f: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    pub trace: Vec<(usize, f64)>,
}

pub fn tune(args: &TuneArgs) -> Result<(), CliError> {
    let pm = ModelFile::load(&args.plant)?.to_plant()?;
    let plant = &pm.plant;
    let riccati = optimal_gain(plant);
    let f0 = match &args.init {
        Some(text) => parse_gain(text, plant.inputs(), plant.dim())?,
        None => riccati.as_ref().map_err(|e| CliError::Condition(e.to_string()))?.clone(),
    };
    let objective: Objective = args.objective.into();
    let mut opts = TuneOptions::new(objective, f0.clone());
    opts.max_iterations = args.max_iter;
    opts.step_tol = args.step_tol;
    opts.grad_tol = args.grad_tol;
    opts.fd_step = args.fd_step;
    let res = tune_gain(plant, &pm.mu0, &pm.sigma0, &opts)?;

    let mut t = Table::new(format!("tune {} ({objective})", display(&args.plant)));
    t.row("initial F", matrix(&f0))
        .row("initial objective", num(res.trace[0].1))
        .row("F", matrix(&res.f))
        .row("objective", num(res.objective_value))
        .row("E[J]", num(res.mean_at_f))
        .row("Var[J]", num(res.variance_at_f))
        .row("iterations", res.iterations.to_string())
        .row("converged", res.converged.to_string())
        .row("gradient norm", num(res.gradient_norm));
    if let Ok(r) = &riccati {
        t.row("Riccati F", matrix(r));
    }
    let report = TuneReport {
        command: "tune",
        model: display(&args.plant),
        objective: objective.to_string(),
        initial_f: rows(&f0),
        riccati_f: riccati.ok().as_ref().map(rows),
        f: rows(&res.f),
        objective_value: res.objective_value,
        mean_at_f: res.mean_at_f,
        variance_at_f: res.variance_at_f,
        iterations: res.iterations,
        converged: res.converged,
        gradient_norm: res.gradient_norm,
        trace: res.trace,
    };
    finish(&t, args.out.as_deref(), &report)
}
