use super::ekf::{ekf_log_likelihood, EkfObjective};
use super::heston::{bates_ekf_system, heston_ekf_system};
use super::linear::{ar1_log_lik, bk_state_space, condition_on_first, ou_state_space, LinearStateSpace};
use crate::error::{Error, Result};
use crate::likelihood::{calibrate, EstimateOptions, EstimationReport};
use crate::models::ModelParams;
use crate::optim::Bounds;
use crate::path::Path;

/// Negative Kalman log-likelihood of an OU, OU-with-jump or B-K series.
///
/// The filter conditions on the first observation. B-K is filtered on ln r.
pub fn kalman_neg_log_likelihood(series: &Path, params: &ModelParams, meas_var: f64) -> Result<f64> {
    let dt = series.dt();
    match params {
        ModelParams::Ou(o) => neg_conditioned(ou_state_space(o, dt, meas_var, None)?, series),
        ModelParams::OuJump(o, j) => neg_conditioned(ou_state_space(o, dt, meas_var, Some(j))?, series),
        ModelParams::Bk(b) => neg_conditioned(bk_state_space(b, dt, meas_var)?, &log_series(series)?),
        ModelParams::Heston(_) | ModelParams::Bates(_) => Err(nonlinear(params)),
    }
}

/// Calibrate OU, OU-with-jump or B-K by maximising the Kalman marginal likelihood.
pub fn estimate_kalman(
    series: &Path,
    init: &ModelParams,
    bounds: &Bounds,
    opts: &EstimateOptions,
    meas_var: f64,
) -> Result<EstimationReport> {
    if series.values()?.len() < 2 {
        return Err(Error::shape("estimation needs at least two observations"));
    }
    match init {
        ModelParams::Ou(_) | ModelParams::OuJump(..) => {
            calibrate(|p| kalman_neg_log_likelihood(series, p, meas_var), init, bounds, opts)
        }
        ModelParams::Bk(_) => {
            // Take logs once rather than on every evaluation.
            let logs = log_series(series)?;
            let dt = series.dt();
            calibrate(
                |p| {
                    let ModelParams::Bk(b) = p else { unreachable!("tag is fixed by the initial point") };
                    neg_conditioned(bk_state_space(b, dt, meas_var)?, &logs)
                },
                init,
                bounds,
                opts,
            )
        }
        ModelParams::Heston(_) | ModelParams::Bates(_) => Err(nonlinear(init)),
    }
}

fn nonlinear(p: &ModelParams) -> Error {
    Error::domain(format!("{} is nonlinear; use the extended filter", p.tag().as_str()))
}

fn log_series(series: &Path) -> Result<Path> {
    let logs = series
        .values()?
        .iter()
        .map(|r| if *r > 0.0 { Ok(r.ln()) } else { Err(Error::domain("B-K series must be positive")) })
        .collect::<Result<Vec<f64>>>()?;
    Path::scalar(series.t0(), series.dt(), logs)
}

fn neg_conditioned(sys: LinearStateSpace<2>, series: &Path) -> Result<f64> {
    let (sys, tail) = condition_on_first(sys, series)?;
    neg_ar1(tail, &sys)
}

fn neg_ar1(tail: &[f64], sys: &LinearStateSpace<2>) -> Result<f64> {
    Ok(-ar1_log_lik(tail, sys.a[(1, 0)], sys.a[(1, 1)], sys.q[(1, 1)], sys.r, sys.x0[1], sys.p0[(1, 1)])?)
}

/// Initial variance state and objective choice for EKF calibration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EkfSetup {
    pub v0: f64,
    pub p0: f64,
    pub objective: EkfObjective,
}

/// The EKF objective of a Heston or Bates log-price path at `params`.
pub fn ekf_objective(log_price: &Path, params: &ModelParams, setup: &EkfSetup) -> Result<f64> {
    let dt = log_price.dt();
    let sys = match params {
        ModelParams::Heston(h) => heston_ekf_system(h, dt, log_price)?,
        ModelParams::Bates(b) => bates_ekf_system(b, dt, log_price)?,
        _ => {
            return Err(Error::domain(format!(
                "the extended filter calibrates heston or bates, not {}",
                params.tag().as_str()
            )))
        }
    };
    ekf_log_likelihood(sys.observations(), &sys, sys.initial_state(setup.v0, setup.p0), setup.objective)
}

/// Calibrate Heston or Bates by minimising the EKF objective on a log-price path.
pub fn estimate_ekf(
    log_price: &Path,
    init: &ModelParams,
    bounds: &Bounds,
    opts: &EstimateOptions,
    setup: &EkfSetup,
) -> Result<EstimationReport> {
    if !init.tag().is_stochastic_volatility() {
        return Err(Error::domain(format!(
            "the extended filter calibrates heston or bates, not {}",
            init.tag().as_str()
        )));
    }
    calibrate(|p| ekf_objective(log_price, p, setup), init, bounds, opts)
}
