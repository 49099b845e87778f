//! Exact Euler transition densities, conditional log-likelihoods and direct
//! maximum-likelihood calibration for OU, OU-with-jump and Black–Karasinski.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::models::{BkParams, JumpConvention, JumpParams, ModelParams, ModelTag, OuParams};
use crate::optim::{self, Bounds, MinimizeOptions, Stage};
use crate::path::Path;
use crate::random::RandomSource;
use crate::stats::{ln_normal_pdf, normal_pdf};

/// Densities below this are floored before taking logs.
pub const DENSITY_FLOOR: f64 = 1e-300;

/// Conditional density of the next observation given the previous one.
pub trait TransitionDensity {
    fn density(&self, x_prev: f64, x_next: f64, dt: f64) -> f64;

    /// `ln(max(density, DENSITY_FLOOR))`.
    fn log_density(&self, x_prev: f64, x_next: f64, dt: f64) -> f64 {
        self.density(x_prev, x_next, dt).max(DENSITY_FLOOR).ln()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OuDensity {
    p: OuParams,
}

impl OuDensity {
    pub fn new(p: OuParams) -> Result<Self> {
        if !(p.sigma > 0.0) {
            return Err(Error::domain(format!("OU density needs sigma > 0, got {}", p.sigma)));
        }
        Ok(Self { p })
    }

    #[inline]
    fn mean(&self, x_prev: f64, dt: f64) -> f64 {
        x_prev + self.p.theta * (self.p.mu - x_prev) * dt
    }
}

impl TransitionDensity for OuDensity {
    fn density(&self, x_prev: f64, x_next: f64, dt: f64) -> f64 {
        let s = self.p.sigma * dt.sqrt();
        let z = (x_next - self.mean(x_prev, dt)) / s;
        (-0.5 * z * z).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
    }

    fn log_density(&self, x_prev: f64, x_next: f64, dt: f64) -> f64 {
        ln_normal_pdf(x_next, self.mean(x_prev, dt), self.p.sigma * dt.sqrt()).max(DENSITY_FLOOR.ln())
    }
}

/// Gaussian density of ln r_next with mean ln r_prev + (θ − α ln r_prev)dt.
#[derive(Debug, Clone, Copy)]
pub struct BkDensity {
    p: BkParams,
}

impl BkDensity {
    pub fn new(p: BkParams) -> Result<Self> {
        if !(p.sigma > 0.0) {
            return Err(Error::domain(format!("B-K density needs sigma > 0, got {}", p.sigma)));
        }
        Ok(Self { p })
    }

    pub fn log_mean(&self, r_prev: f64, dt: f64) -> f64 {
        let y = r_prev.ln();
        y + (self.p.theta - self.p.alpha * y) * dt
    }
}

impl TransitionDensity for BkDensity {
    fn density(&self, r_prev: f64, r_next: f64, dt: f64) -> f64 {
        if !(r_prev > 0.0 && r_next > 0.0) {
            return 0.0;
        }
        let s = self.p.sigma * dt.sqrt();
        let z = (r_next.ln() - self.log_mean(r_prev, dt)) / s;
        (-0.5 * z * z).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
    }

    fn log_density(&self, r_prev: f64, r_next: f64, dt: f64) -> f64 {
        if !(r_prev > 0.0 && r_next > 0.0) {
            return DENSITY_FLOOR.ln();
        }
        ln_normal_pdf(r_next.ln(), self.log_mean(r_prev, dt), self.p.sigma * dt.sqrt())
            .max(DENSITY_FLOOR.ln())
    }
}

/// Two-component mixture: no jump with probability 1 − w, one Gaussian jump with
/// probability w = Φ(threshold), where the threshold follows the jump convention.
#[derive(Debug, Clone, Copy)]
pub struct OuJumpDensity {
    p: OuParams,
    jp: JumpParams,
    convention: JumpConvention,
}

impl OuJumpDensity {
    pub fn new(p: OuParams, jp: JumpParams) -> Result<Self> {
        Self::with_convention(p, jp, JumpConvention::CdfDt)
    }

    pub fn with_convention(p: OuParams, jp: JumpParams, convention: JumpConvention) -> Result<Self> {
        if !(p.sigma > 0.0) {
            return Err(Error::domain(
                "OU-jump density: the no-jump component variance sigma^2*dt must be > 0",
            ));
        }
        Ok(Self { p, jp, convention })
    }

    pub fn jump_weight(&self, dt: f64) -> f64 {
        self.convention.trigger_probability(self.jp.lambda_j, dt)
    }
}

impl TransitionDensity for OuJumpDensity {
    fn density(&self, x_prev: f64, x_next: f64, dt: f64) -> f64 {
        let m = x_prev + self.p.theta * (self.p.mu - x_prev) * dt;
        let w = self.jump_weight(dt);
        let s0 = self.p.sigma * dt.sqrt();
        let s1 = (self.p.sigma * self.p.sigma * dt + self.jp.sigma_j * self.jp.sigma_j).sqrt();
        let inv = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        let z0 = (x_next - m) / s0;
        let z1 = (x_next - m - self.jp.mu_j) / s1;
        (1.0 - w) * inv / s0 * (-0.5 * z0 * z0).exp() + w * inv / s1 * (-0.5 * z1 * z1).exp()
    }
}

pub fn ou_density(x_prev: f64, x_next: f64, dt: f64, p: &OuParams) -> Result<f64> {
    check_dt(dt)?;
    if !(p.sigma > 0.0) {
        return Err(Error::domain(format!("OU density needs sigma > 0, got {}", p.sigma)));
    }
    normal_pdf(x_next, x_prev + p.theta * (p.mu - x_prev) * dt, p.sigma * dt.sqrt())
}

pub fn bk_density(r_prev: f64, r_next: f64, dt: f64, p: &BkParams) -> Result<f64> {
    check_dt(dt)?;
    if !(r_prev > 0.0 && r_next > 0.0) {
        return Err(Error::domain(format!("B-K density needs positive rates, got {r_prev}, {r_next}")));
    }
    Ok(BkDensity::new(*p)?.density(r_prev, r_next, dt))
}

pub fn ou_jump_density(x_prev: f64, x_next: f64, dt: f64, p: &OuParams, jp: &JumpParams) -> Result<f64> {
    check_dt(dt)?;
    Ok(OuJumpDensity::new(*p, *jp)?.density(x_prev, x_next, dt))
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("dt must be > 0, got {dt}")))
    }
}

/// Σ_{t≥1} ln f(X_t | X_{t−1}); the initial-value term is not included.
pub fn log_likelihood(path: &Path, density: &dyn TransitionDensity) -> Result<f64> {
    let xs = path.values()?;
    if xs.len() < 2 {
        return Err(Error::shape("log-likelihood needs at least two observations"));
    }
    let dt = path.dt();
    Ok(xs.windows(2).map(|w| density.log_density(w[0], w[1], dt)).sum())
}

/// Transition density for a model record, where one exists in closed form.
pub fn density_for(params: &ModelParams, convention: JumpConvention) -> Result<Box<dyn TransitionDensity>> {
    Ok(match params {
        ModelParams::Ou(p) => Box::new(OuDensity::new(*p)?),
        ModelParams::OuJump(p, jp) => Box::new(OuJumpDensity::with_convention(*p, *jp, convention)?),
        ModelParams::Bk(p) => Box::new(BkDensity::new(*p)?),
        ModelParams::Heston(_) | ModelParams::Bates(_) => {
            return Err(Error::domain(format!(
                "no closed-form transition density for {}; calibrate it through a filter",
                params.tag().as_str()
            )))
        }
    })
}

#[derive(Debug, Clone)]
pub struct EstimationReport {
    pub params: ModelParams,
    pub neg_log_lik: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub wall_clock_s: f64,
    pub converged: bool,
    pub stage: Stage,
    pub trace: Option<Vec<(Vec<f64>, f64)>>,
}

#[derive(Debug, Clone, Default)]
pub struct EstimateOptions {
    pub minimize: MinimizeOptions,
    pub jump_convention: JumpConvention,
    /// Extra uniformly drawn starting points, in addition to the supplied one.
    pub multi_start: usize,
    pub multi_start_seed: u64,
}

/// Minimise a parameter-record objective over a box, reporting the best point.
///
/// Candidates that violate the model's parameter invariants score `+inf`.
pub fn calibrate<F>(objective: F, init: &ModelParams, bounds: &Bounds, opts: &EstimateOptions) -> Result<EstimationReport>
where
    F: Fn(&ModelParams) -> Result<f64>,
{
    let tag: ModelTag = init.tag();
    let x0 = init.to_vec();
    if bounds.len() != x0.len() {
        return Err(Error::shape(format!(
            "{} has {} parameters but {} bounds were given",
            tag.as_str(),
            x0.len(),
            bounds.len()
        )));
    }
    if !bounds.contains(&x0) {
        return Err(Error::Init(format!("initial parameters {x0:?} lie outside the bounds")));
    }
    let f = |v: &[f64]| -> f64 {
        match ModelParams::from_vec(tag, v).and_then(|p| objective(&p)) {
            Ok(val) if val.is_finite() => val,
            _ => f64::INFINITY,
        }
    };
    let start = Instant::now();
    let mut best = optim::minimize(f, &x0, bounds, &opts.minimize)?;
    if opts.multi_start > 0 {
        use rand::Rng;
        let mut rng = RandomSource::new(opts.multi_start_seed).derive(0x5747).rng();
        for _ in 0..opts.multi_start {
            let xs: Vec<f64> = (0..x0.len())
                .map(|i| rng.random_range(bounds.lower[i]..bounds.upper[i]))
                .collect();
            if let Ok(m) = optim::minimize(f, &xs, bounds, &opts.minimize) {
                if m.f < best.f {
                    best = m;
                }
            }
        }
    }
    let wall_clock_s = start.elapsed().as_secs_f64();
    Ok(EstimationReport {
        params: ModelParams::from_vec(tag, &best.x)?,
        neg_log_lik: best.f,
        iterations: best.iterations,
        evaluations: best.evaluations,
        wall_clock_s,
        converged: best.converged,
        stage: best.stage,
        trace: opts.minimize.record_trace.then_some(best.trace),
    })
}

/// Negative conditional log-likelihood of `path` under `params`.
pub fn neg_log_likelihood(path: &Path, params: &ModelParams, convention: JumpConvention) -> Result<f64> {
    let d = density_for(params, convention)?;
    Ok(-log_likelihood(path, d.as_ref())?)
}

/// Direct maximum-likelihood estimate for OU, OU-with-jump or B-K data.
pub fn estimate_mle(path: &Path, init: &ModelParams, bounds: &Bounds, opts: &EstimateOptions) -> Result<EstimationReport> {
    if init.tag().is_stochastic_volatility() {
        return Err(Error::domain(format!(
            "direct MLE is not available for {}",
            init.tag().as_str()
        )));
    }
    if path.values()?.len() < 2 {
        return Err(Error::shape("estimation needs at least two observations"));
    }
    let conv = opts.jump_convention;
    calibrate(|p| neg_log_likelihood(path, p, conv), init, bounds, opts)
}
