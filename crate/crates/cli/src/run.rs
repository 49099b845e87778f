//! Scenario pipelines: generate data, filter, calibrate, write artifacts.

use std::fmt::Write as _;
use std::path::{Path as FsPath, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use sdefl_core::kalman::{
    bates_ekf_system, condition_on_first, ekf_objective, ekf_run, estimate_ekf, estimate_kalman, heston_ekf_system,
    kalman_neg_log_likelihood, kalman_run, bk_state_space, ou_state_space, EkfSetup, SvEkfSystem,
};
use sdefl_core::likelihood::{estimate_mle, neg_log_likelihood, EstimateOptions, EstimationReport};
use sdefl_core::models::{simulate_bates, simulate_bk, simulate_heston, simulate_ou, simulate_ou_jump};
use sdefl_core::particle::{particle_ekf_run, SvDensities};
use sdefl_core::stats::rmse_slices;
use sdefl_core::{HestonParams, ModelParams, Path, RandomSource};

use crate::error::{CliError, Result};
use crate::output::{emit_csv, emit_path_csv, emit_plot, emit_records, path_from_table, read_csv, write_atomic, Series, Table};
use crate::scenario::{MethodKind, Scenario};

/// Sub-stream of the scenario seed that drives particle noise.
const PARTICLE_TAG: u64 = 0x7061_7274;

/// The series a scenario works on.
#[derive(Debug, Clone)]
pub enum Data {
    Scalar(Path),
    Volatility { log_price: Path, variance: Option<Path> },
}

impl Data {
    fn primary(&self) -> &Path {
        match self {
            Data::Scalar(p) => p,
            Data::Volatility { log_price, .. } => log_price,
        }
    }

    /// The series as one path: `t,value` or `t,log_price,variance`.
    pub fn joint(&self) -> Result<Path> {
        match self {
            Data::Scalar(p) => Ok(p.clone()),
            Data::Volatility { log_price, variance: Some(v) } => {
                Ok(Path::zip(log_price.t0(), log_price.dt(), log_price.values()?, v.values()?)?)
            }
            Data::Volatility { log_price, variance: None } => Ok(log_price.clone()),
        }
    }
}

/// Which stages of a scenario to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Phases {
    pub filter: bool,
    pub estimate: bool,
}

impl Phases {
    pub const SIMULATE: Phases = Phases { filter: false, estimate: false };
    pub const FILTER: Phases = Phases { filter: true, estimate: false };
    pub const ESTIMATE: Phases = Phases { filter: false, estimate: true };

    /// Everything the scenario's method supports.
    pub fn all(sc: &Scenario) -> Phases {
        Phases { filter: sc.method.kind.filters(), estimate: sc.method.estimation.is_some() }
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    /// Tracking RMSE: latent state for linear models, next-step price for Heston and Bates.
    pub rmse: Option<f64>,
    /// RMSE of the filtered variance against the simulated variance.
    pub variance_rmse: Option<f64>,
    pub estimation: Option<EstimationReport>,
    /// The calibration objective evaluated at the true parameters.
    pub truth_objective: Option<f64>,
    /// Wall-clock seconds per phase.
    pub timings: Vec<(String, f64)>,
    pub artifacts: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn timing(&self, phase: &str) -> Option<f64> {
        self.timings.iter().find(|(p, _)| p == phase).map(|(_, s)| *s)
    }

    /// One line per fact, for terminals and the timings file.
    pub fn render(&self) -> String {
        let mut s = format!("scenario {} (seed {})\n", self.scenario, self.seed);
        if let Some(r) = self.rmse {
            let _ = writeln!(s, "  tracking rmse     {r:.6e}");
        }
        if let Some(r) = self.variance_rmse {
            let _ = writeln!(s, "  variance rmse     {r:.6e}");
        }
        if let Some(est) = &self.estimation {
            let names = est.params.tag().param_names();
            let vals: Vec<String> = names.iter().zip(est.params.to_vec()).map(|(n, v)| format!("{n}={v:.4}")).collect();
            let _ = writeln!(s, "  estimate          {}", vals.join(" "));
            let _ = writeln!(s, "  objective         {:.6}", est.neg_log_lik);
            if let Some(t) = self.truth_objective {
                let _ = writeln!(s, "  objective (truth) {t:.6}");
            }
            let _ = writeln!(s, "  iterations        {} ({} evaluations, {:?})", est.iterations, est.evaluations, est.stage);
        }
        for (phase, secs) in &self.timings {
            let _ = writeln!(s, "  time {phase:<12} {secs:.4} s");
        }
        for w in &self.warnings {
            let _ = writeln!(s, "  warning: {w}");
        }
        s
    }
}

/// Simulate the scenario's series, or load it from `input_csv`.
pub fn generate(sc: &Scenario) -> Result<(Data, Vec<String>)> {
    if let Some(file) = &sc.input_csv {
        return load_data(sc, file);
    }
    let src = RandomSource::new(sc.seed);
    let (dt, n) = (sc.dt, sc.n_steps);
    Ok(match &sc.params {
        ModelParams::Ou(p) => (Data::Scalar(simulate_ou(p, sc.x0, dt, n, &src)?), Vec::new()),
        ModelParams::OuJump(p, jp) => {
            let jp = simulate_ou_jump(p, jp, sc.simulation_jump_convention, sc.x0, dt, n, &src)?;
            (Data::Scalar(jp.path), Vec::new())
        }
        ModelParams::Bk(p) => (Data::Scalar(simulate_bk(p, sc.x0, dt, n, &src)?), Vec::new()),
        ModelParams::Heston(p) => {
            let v = simulate_heston(p, sc.x0, sc.v0, dt, n, &src)?;
            (Data::Volatility { log_price: v.log_price, variance: Some(v.variance) }, v.warnings)
        }
        ModelParams::Bates(p) => {
            let v = simulate_bates(p, sc.x0, sc.v0, dt, n, &src)?;
            (Data::Volatility { log_price: v.log_price, variance: Some(v.variance) }, v.warnings)
        }
    })
}

fn load_data(sc: &Scenario, file: &FsPath) -> Result<(Data, Vec<String>)> {
    let table = read_csv(file)?;
    let path = path_from_table(&table, file)?;
    let mut warnings = Vec::new();
    if (path.dt() - sc.dt).abs() > 1e-9 * sc.dt {
        warnings.push(format!("input grid step {} overrides scenario dt {}", path.dt(), sc.dt));
    }
    let data = match (sc.model().is_stochastic_volatility(), path.dim()) {
        (false, 1) => Data::Scalar(path),
        (true, 1) => Data::Volatility { log_price: path, variance: None },
        (true, 2) => Data::Volatility {
            log_price: Path::scalar(path.t0(), path.dt(), path.component(0))?,
            variance: Some(Path::scalar(path.t0(), path.dt(), path.component(1))?),
        },
        _ => {
            return Err(CliError::Csv {
                path: file.to_path_buf(),
                reason: format!("{} data needs columns t,value", sc.model().as_str()),
            })
        }
    };
    Ok((data, warnings))
}

/// Filtered output aligned for tabulation.
pub struct Tracking {
    pub table: Table,
    pub rmse: f64,
    pub variance_rmse: Option<f64>,
    pub series: Vec<Series>,
    pub title: String,
}

fn sv_system(params: &ModelParams, dt: f64, log_price: &Path) -> Result<SvEkfSystem> {
    Ok(match params {
        ModelParams::Heston(h) => heston_ekf_system(h, dt, log_price)?,
        ModelParams::Bates(b) => bates_ekf_system(b, dt, log_price)?,
        _ => unreachable!("validated: extended filters run on heston or bates"),
    })
}

/// Run the scenario's filter with its true parameters.
pub fn track(sc: &Scenario, data: &Data) -> Result<Tracking> {
    match (sc.method.kind, data) {
        (MethodKind::Kalman, Data::Scalar(path)) => track_linear(sc, path),
        (MethodKind::Ekf | MethodKind::ParticleEkf, Data::Volatility { log_price, variance }) => {
            track_volatility(sc, log_price, variance.as_ref())
        }
        (MethodKind::Mle, _) => Err(CliError::validation(format!("{}: method mle has no filter", sc.name))),
        _ => unreachable!("validated: method matches model"),
    }
}

fn track_linear(sc: &Scenario, path: &Path) -> Result<Tracking> {
    let dt = path.dt();
    let m = &sc.method;
    let (filtered, latent) = match &sc.params {
        ModelParams::Ou(p) => {
            let (sys, tail) = condition_on_first(ou_state_space(p, dt, m.meas_var, None)?, path)?;
            (kalman_run(tail, &sys)?.filtered(1), tail.to_vec())
        }
        ModelParams::OuJump(p, jp) => {
            let (sys, tail) = condition_on_first(ou_state_space(p, dt, m.meas_var, Some(jp))?, path)?;
            (kalman_run(tail, &sys)?.filtered(1), tail.to_vec())
        }
        ModelParams::Bk(p) => {
            // Filter ln r, report rates.
            let rates = path.values()?;
            if rates.iter().any(|r| *r <= 0.0) {
                return Err(sdefl_core::Error::domain("B-K series must be positive").into());
            }
            let logs = Path::scalar(path.t0(), dt, rates.iter().map(|r| r.ln()).collect())?;
            let (sys, tail) = condition_on_first(bk_state_space(p, dt, m.meas_var)?, &logs)?;
            let f = kalman_run(tail, &sys)?.filtered(1).iter().map(|x| x.exp()).collect();
            (f, rates[1..].to_vec())
        }
        _ => unreachable!("validated: the linear filter runs on ou, ou_jump or bk"),
    };
    let t: Vec<f64> = (1..path.len()).map(|k| path.time(k)).collect();
    let mut table = Table::new(&["t", "observed", "filtered"]);
    table.rows = t.iter().zip(&latent).zip(&filtered).map(|((t, y), f)| vec![*t, *y, *f]).collect();
    Ok(Tracking {
        rmse: rmse_slices(&filtered, &latent)?,
        variance_rmse: None,
        series: vec![Series::new("observed", t.clone(), latent), Series::new("filtered", t, filtered)],
        title: format!("{}: Kalman filter tracking", sc.name),
        table,
    })
}

fn track_volatility(sc: &Scenario, log_price: &Path, variance: Option<&Path>) -> Result<Tracking> {
    let dt = log_price.dt();
    let m = &sc.method;
    let sys = sv_system(&sc.params, dt, log_price)?;
    let obs = sys.observations();
    let (estimates, predicted) = match m.kind {
        MethodKind::Ekf => {
            let run = ekf_run(obs, &sys, sys.initial_state(sc.v0, m.p0))?;
            (
                run.states.iter().map(|s| s.mean[0]).collect::<Vec<f64>>(),
                run.states.iter().map(|s| s.predicted_obs).collect::<Vec<f64>>(),
            )
        }
        MethodKind::ParticleEkf => {
            let dens = SvDensities { system: sys.clone() };
            let src = RandomSource::new(sc.seed).derive(PARTICLE_TAG);
            let run = particle_ekf_run(obs, &sys, &dens, sc.v0, m.p0, m.n_particles, &src, m.resample)?;
            (run.estimates, run.predicted_obs)
        }
        _ => unreachable!("validated: volatility models use extended filters"),
    };
    let forecast: Vec<f64> = sys.forecast_log_prices(&predicted).iter().map(|x| x.exp()).collect();
    let realised: Vec<f64> = sys.realised_log_prices().iter().map(|x| x.exp()).collect();
    // Filter step i estimates the variance at grid index i + 1, which drives
    // the return into the price at index i + 2.
    let truth = match variance {
        Some(v) => Some(v.values()?[1..=estimates.len()].to_vec()),
        None => None,
    };
    let mut table = Table::new(&["t", "variance", "filtered_variance", "next_price", "forecast_price"]);
    for i in 0..estimates.len() {
        let v = truth.as_ref().map_or(f64::NAN, |v| v[i]);
        table.rows.push(vec![log_price.time(i + 1), v, estimates[i], realised[i], forecast[i]]);
    }
    let t: Vec<f64> = (0..estimates.len()).map(|i| log_price.time(i + 2)).collect();
    let label = if m.kind == MethodKind::Ekf { "EKF forecast" } else { "particle EKF forecast" };
    Ok(Tracking {
        rmse: rmse_slices(&forecast, &realised)?,
        variance_rmse: truth.as_ref().map(|v| rmse_slices(&estimates, v)).transpose()?,
        series: vec![Series::new("price", t.clone(), realised), Series::new(label, t, forecast)],
        title: format!("{}: {} tracking", sc.name, sc.model().as_str()),
        table,
    })
}

fn estimate_options(sc: &Scenario) -> EstimateOptions {
    EstimateOptions {
        jump_convention: sc.method.jump_convention,
        multi_start: sc.method.estimation.as_ref().map_or(0, |e| e.multi_start),
        multi_start_seed: sc.seed,
        ..Default::default()
    }
}

/// Calibrate on `data`, returning the report and the objective at the truth.
pub fn calibrate(sc: &Scenario, data: &Data) -> Result<(EstimationReport, f64)> {
    let est = sc
        .method
        .estimation
        .as_ref()
        .ok_or_else(|| CliError::validation(format!("{}: no [method.init] and [method.bounds] to estimate from", sc.name)))?;
    let opts = estimate_options(sc);
    let m = &sc.method;
    let series = data.primary();
    match m.kind {
        MethodKind::Mle => Ok((
            estimate_mle(series, &est.init, &est.bounds, &opts)?,
            neg_log_likelihood(series, &sc.params, m.jump_convention)?,
        )),
        MethodKind::Kalman => Ok((
            estimate_kalman(series, &est.init, &est.bounds, &opts, m.meas_var)?,
            kalman_neg_log_likelihood(series, &sc.params, m.meas_var)?,
        )),
        MethodKind::Ekf => {
            let setup = EkfSetup { v0: sc.v0, p0: m.p0, objective: m.objective };
            Ok((
                estimate_ekf(series, &est.init, &est.bounds, &opts, &setup)?,
                ekf_objective(series, &sc.params, &setup)?,
            ))
        }
        MethodKind::ParticleEkf => Err(CliError::validation(format!("{}: particle_ekf does not calibrate", sc.name))),
    }
}

/// Simulate again from the estimate with the same noise, for visual comparison.
fn reconstruct(sc: &Scenario, params: &ModelParams, path: &Path) -> Result<Path> {
    let src = RandomSource::new(sc.seed);
    let x0 = path.values()?[0];
    let n = path.len() - 1;
    Ok(match params {
        ModelParams::Ou(p) => simulate_ou(p, x0, path.dt(), n, &src)?,
        ModelParams::OuJump(p, jp) => simulate_ou_jump(p, jp, sc.simulation_jump_convention, x0, path.dt(), n, &src)?.path,
        ModelParams::Bk(p) => simulate_bk(p, x0, path.dt(), n, &src)?,
        _ => unreachable!("only scalar models are reconstructed"),
    })
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

/// Run the requested phases. Artifacts go under `out_root/<outputs.dir>` when
/// `out_root` is given; otherwise nothing touches the filesystem.
pub fn execute(sc: &Scenario, phases: Phases, out_root: Option<&FsPath>) -> Result<RunReport> {
    if phases.filter && !sc.method.kind.filters() {
        return Err(CliError::validation(format!("{}: method mle has no filter", sc.name)));
    }
    if phases.estimate && (sc.method.estimation.is_none() || sc.method.kind == MethodKind::ParticleEkf) {
        return Err(CliError::validation(format!("{}: method {} has nothing to estimate", sc.name, sc.method.kind.as_str())));
    }
    let dir = out_root.map(|r| r.join(&sc.outputs.dir));
    let (csv, plot) = (dir.as_ref().filter(|_| sc.outputs.csv), dir.as_ref().filter(|_| sc.outputs.plot));
    let mut report = RunReport {
        scenario: sc.name.clone(),
        seed: sc.seed,
        rmse: None,
        variance_rmse: None,
        estimation: None,
        truth_objective: None,
        timings: Vec::new(),
        artifacts: Vec::new(),
        warnings: Vec::new(),
    };

    let clock = Instant::now();
    let (data, warnings) = generate(sc)?;
    report.warnings.extend(warnings);
    report.timings.push(("simulate".into(), clock.elapsed().as_secs_f64()));
    if let Some(d) = csv {
        report.artifacts.push(emit_path_csv(&data.joint()?, &d.join("data.csv"))?);
    }
    if let (Some(d), false, false) = (plot, phases.filter, phases.estimate) {
        let p = data.primary();
        let t: Vec<f64> = (0..p.len()).map(|k| p.time(k)).collect();
        let (label, y) = match &data {
            Data::Scalar(p) => ("simulated", p.values()?.to_vec()),
            Data::Volatility { log_price, .. } => ("price", log_price.values()?.iter().map(|x| x.exp()).collect()),
        };
        let title = format!("{}: simulated {}", sc.name, sc.model().as_str());
        report.artifacts.push(emit_plot(&[Series::new(label, t, y)], &title, &d.join("data.svg"))?);
    }

    if phases.filter {
        let clock = Instant::now();
        let tr = track(sc, &data)?;
        report.timings.push(("filter".into(), clock.elapsed().as_secs_f64()));
        report.rmse = Some(tr.rmse);
        report.variance_rmse = tr.variance_rmse;
        if let Some(d) = csv {
            report.artifacts.push(emit_csv(&tr.table, &d.join("tracking.csv"))?);
        }
        if let Some(d) = plot {
            report.artifacts.push(emit_plot(&tr.series, &tr.title, &d.join("tracking.svg"))?);
        }
    }

    if phases.estimate {
        let clock = Instant::now();
        let (est, truth) = calibrate(sc, &data)?;
        report.timings.push(("estimate".into(), clock.elapsed().as_secs_f64()));
        if let Some(d) = csv {
            let init = sc.method.estimation.as_ref().expect("checked above").init.to_vec();
            let rows: Vec<Vec<String>> = sc
                .model()
                .param_names()
                .iter()
                .zip(sc.params.to_vec())
                .zip(init)
                .zip(est.params.to_vec())
                .map(|(((n, t), i), e)| vec![n.to_string(), fmt(t), fmt(i), fmt(e)])
                .collect();
            report.artifacts.push(emit_records(&["parameter", "true", "init", "estimate"], &rows, &d.join("estimates.csv"))?);
        }
        if let Data::Scalar(path) = &data {
            let rec = reconstruct(sc, &est.params, path)?;
            if let Some(d) = csv {
                report.artifacts.push(emit_path_csv(&rec, &d.join("reconstructed.csv"))?);
            }
            if let Some(d) = plot {
                let t: Vec<f64> = (0..path.len()).map(|k| path.time(k)).collect();
                let series = [
                    Series::new("simulated", t.clone(), path.values()?.to_vec()),
                    Series::new("reconstructed", t, rec.values()?.to_vec()),
                ];
                let title = format!("{}: simulated and reconstructed paths", sc.name);
                report.artifacts.push(emit_plot(&series, &title, &d.join("reconstruction.svg"))?);
            }
        }
        report.truth_objective = Some(truth);
        report.estimation = Some(est);
    }

    if let Some(d) = &dir {
        if let Some(d) = csv {
            report.artifacts.push(emit_records(&["key", "value"], &summary_rows(sc, &report), &d.join("summary.csv"))?);
        }
        let file = d.join("timings.txt");
        write_atomic(&file, report.render().as_bytes())?;
        report.artifacts.push(file);
    }
    Ok(report)
}

fn summary_rows(sc: &Scenario, r: &RunReport) -> Vec<Vec<String>> {
    let mut rows = vec![
        vec!["scenario".into(), sc.name.clone()],
        vec!["model".into(), sc.model().as_str().into()],
        vec!["method".into(), sc.method.kind.as_str().into()],
        vec!["seed".into(), sc.seed.to_string()],
        vec!["dt".into(), fmt(sc.dt)],
        vec!["n_steps".into(), sc.n_steps.to_string()],
    ];
    if let Some(x) = r.rmse {
        rows.push(vec!["rmse".into(), fmt(x)]);
    }
    if let Some(x) = r.variance_rmse {
        rows.push(vec!["variance_rmse".into(), fmt(x)]);
    }
    if let Some(e) = &r.estimation {
        rows.push(vec!["objective".into(), fmt(e.neg_log_lik)]);
        rows.push(vec!["iterations".into(), e.iterations.to_string()]);
        rows.push(vec!["evaluations".into(), e.evaluations.to_string()]);
        rows.push(vec!["converged".into(), e.converged.to_string()]);
    }
    if let Some(x) = r.truth_objective {
        rows.push(vec!["objective_at_truth".into(), fmt(x)]);
    }
    rows
}

/// Run every phase the scenario supports.
pub fn run_scenario(sc: &Scenario, out_root: &FsPath) -> Result<RunReport> {
    execute(sc, Phases::all(sc), Some(out_root))
}

/// Heston rows of the robustness sweep: μ_s, κ, θ_v, ξ, ρ.
pub const TABLE5_ROWS: [[f64; 5]; 4] = [
    [0.04, 0.3, 1.5, 0.6, 0.04],
    [0.1, 1.0, 0.02, 0.1, -0.8],
    [0.3, 2.0, 0.01, 0.6, -0.1],
    [0.23, 0.01, 3.0, 0.2, 0.0],
];

/// The four sweep scenarios, built from `heston_ekf` with one row each.
pub fn table5_scenarios(seed: Option<u64>) -> Vec<Scenario> {
    let base = Scenario::builtin("heston_ekf").expect("shipped").with_seed(seed);
    TABLE5_ROWS
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let p = HestonParams::new(r[0], r[1], r[2], r[3], r[4]).expect("valid sweep row");
            let mut sc = base.clone();
            sc.name = format!("heston_ekf_task{}", i + 1);
            sc.outputs.dir = format!("task{}", i + 1);
            sc.params = ModelParams::Heston(p);
            sc.v0 = p.theta_v;
            sc
        })
        .collect()
}

/// EKF tracking at each sweep row; RMSEs go to `table5/table5.csv`.
pub fn run_table5_sweep(out_root: Option<&FsPath>, seed: Option<u64>) -> Result<Vec<RunReport>> {
    let root = out_root.map(|r| r.join("table5"));
    let scenarios = table5_scenarios(seed);
    let reports = scenarios
        .iter()
        .map(|sc| execute(sc, Phases::FILTER, root.as_deref()))
        .collect::<Result<Vec<_>>>()?;
    if let Some(root) = &root {
        let mut table = Table::new(&["task", "mu_s", "kappa", "theta_v", "xi", "rho", "rmse"]);
        for (i, (row, r)) in TABLE5_ROWS.iter().zip(&reports).enumerate() {
            let mut cells = vec![(i + 1) as f64];
            cells.extend_from_slice(row);
            cells.push(r.rmse.expect("filter phase ran"));
            table.rows.push(cells);
        }
        emit_csv(&table, &root.join("table5.csv"))?;
    }
    Ok(reports)
}

/// Median wall-clock of two calibrations of one series.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub first: String,
    pub second: String,
    pub first_runs: Vec<f64>,
    pub second_runs: Vec<f64>,
    pub first_median_s: f64,
    pub second_median_s: f64,
    /// first / second: how many times faster the second method is.
    pub ratio: f64,
}

impl Comparison {
    pub fn render(&self) -> String {
        format!(
            "{:<32} median {:.4} s over {} runs\n{:<32} median {:.4} s over {} runs\nratio {:.4}\n",
            self.first,
            self.first_median_s,
            self.first_runs.len(),
            self.second,
            self.second_median_s,
            self.second_runs.len(),
            self.ratio
        )
    }
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn same_series(a: &Scenario, b: &Scenario) -> bool {
    a.params == b.params
        && a.dt == b.dt
        && a.n_steps == b.n_steps
        && a.seed == b.seed
        && a.x0 == b.x0
        && a.v0 == b.v0
        && a.simulation_jump_convention == b.simulation_jump_convention
        && a.input_csv == b.input_csv
}

/// Time both calibrations on the series generated by `a`, alternating runs.
pub fn benchmark(a: &Scenario, b: &Scenario, repetitions: usize) -> Result<Comparison> {
    if repetitions == 0 {
        return Err(CliError::validation("benchmark needs at least one repetition"));
    }
    if !same_series(a, b) {
        return Err(CliError::validation(format!(
            "{} and {} do not describe the same series (model, parameters, grid and seed must match)",
            a.name, b.name
        )));
    }
    let (data, _) = generate(a)?;
    let time = |sc: &Scenario| -> Result<f64> {
        let clock = Instant::now();
        calibrate(sc, &data)?;
        Ok(clock.elapsed().as_secs_f64())
    };
    let (mut ra, mut rb) = (Vec::new(), Vec::new());
    for _ in 0..repetitions {
        ra.push(time(a)?);
        rb.push(time(b)?);
    }
    let (ma, mb) = (median(&ra), median(&rb));
    Ok(Comparison {
        first: a.name.clone(),
        second: b.name.clone(),
        first_runs: ra,
        second_runs: rb,
        first_median_s: ma,
        second_median_s: mb,
        ratio: ma / mb,
    })
}

pub fn write_comparison(c: &Comparison, out_root: &FsPath) -> Result<PathBuf> {
    let file = out_root.join("benchmark").join(format!("{}_vs_{}.txt", c.first, c.second));
    write_atomic(&file, c.render().as_bytes())?;
    Ok(file)
}

/// Calibration pairs timed by `reproduce`.
pub const BENCHMARK_PAIRS: [(&str, &str); 2] = [("ou_mle", "ou_kalman"), ("ou_jump_mle", "ou_jump_kalman")];

#[derive(Debug)]
pub struct Reproduction {
    pub reports: Vec<RunReport>,
    pub table5: Vec<RunReport>,
    pub benchmarks: Vec<Comparison>,
}

/// Run every shipped scenario (in parallel), the sweep and the benchmarks.
pub fn reproduce(out_root: &FsPath, seed: Option<u64>, repetitions: usize) -> Result<Reproduction> {
    let scenarios: Vec<Scenario> = Scenario::all_builtin().into_iter().map(|s| s.with_seed(seed)).collect();
    let reports = scenarios.par_iter().map(|sc| run_scenario(sc, out_root)).collect::<Result<Vec<_>>>()?;
    let table5 = run_table5_sweep(Some(out_root), seed)?;

    let mut rows = Vec::new();
    for r in reports.iter().chain(&table5) {
        let opt = |x: Option<f64>| x.map(fmt).unwrap_or_default();
        rows.push(vec![
            r.scenario.clone(),
            r.seed.to_string(),
            opt(r.rmse),
            opt(r.estimation.as_ref().map(|e| e.neg_log_lik)),
            opt(r.truth_objective),
        ]);
    }
    emit_records(&["scenario", "seed", "rmse", "objective", "objective_at_truth"], &rows, &out_root.join("summary.csv"))?;

    let mut benchmarks = Vec::new();
    if repetitions > 0 {
        for (a, b) in BENCHMARK_PAIRS {
            let find = |n: &str| scenarios.iter().find(|s| s.name == n).expect("shipped pair");
            let c = benchmark(find(a), find(b), repetitions)?;
            write_comparison(&c, out_root)?;
            benchmarks.push(c);
        }
    }
    Ok(Reproduction { reports, table5, benchmarks })
}
