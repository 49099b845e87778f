use nalgebra::{RowSVector, SMatrix, SVector};

use crate::error::{Error, Result};
use crate::models::{BkParams, JumpParams, OuParams};
use crate::path::Path;

/// 1×1 matrix.
pub(crate) fn m1(x: f64) -> SMatrix<f64, 1, 1> {
    SMatrix::from_element(x)
}

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// x_t = A x_{t−1} + G w_t, y_t = H x_t + ε_t with w ~ N(0, Q), ε ~ N(0, R).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearStateSpace<const N: usize> {
    pub a: SMatrix<f64, N, N>,
    pub g: SMatrix<f64, N, N>,
    pub q: SMatrix<f64, N, N>,
    pub h: RowSVector<f64, N>,
    pub r: f64,
    pub x0: SVector<f64, N>,
    pub p0: SMatrix<f64, N, N>,
}

fn check_psd<const N: usize>(name: &str, m: &SMatrix<f64, N, N>) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain(format!("{name} has non-finite entries")));
    }
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > 1e-12 * scale {
        return Err(Error::domain(format!("{name} is not symmetric")));
    }
    let shifted = m + SMatrix::<f64, N, N>::identity() * (1e-10 * scale);
    if shifted.cholesky().is_none() {
        return Err(Error::domain(format!("{name} is not positive semidefinite")));
    }
    Ok(())
}

impl<const N: usize> LinearStateSpace<N> {
    pub fn new(
        a: SMatrix<f64, N, N>,
        g: SMatrix<f64, N, N>,
        q: SMatrix<f64, N, N>,
        h: RowSVector<f64, N>,
        r: f64,
        x0: SVector<f64, N>,
        p0: SMatrix<f64, N, N>,
    ) -> Result<Self> {
        let sys = Self { a, g, q, h, r, x0, p0 };
        sys.validate()?;
        Ok(sys)
    }

    pub fn validate(&self) -> Result<()> {
        check_psd("Q", &self.q)?;
        check_psd("P0", &self.p0)?;
        if !(self.r >= 0.0) || !self.r.is_finite() {
            return Err(Error::domain(format!("R must be finite and >= 0, got {}", self.r)));
        }
        let finite = self.a.iter().chain(self.g.iter()).chain(self.h.iter()).chain(self.x0.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::domain("A, G, H and x0 must be finite"));
        }
        Ok(())
    }

    pub fn initial_state(&self) -> GaussianState<N> {
        GaussianState::initial(self.x0, self.p0)
    }
}

/// Filter snapshot after processing one observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianState<const N: usize> {
    pub mean: SVector<f64, N>,
    pub cov: SMatrix<f64, N, N>,
    pub prior_mean: SVector<f64, N>,
    pub prior_cov: SMatrix<f64, N, N>,
    /// H x⁻, the one-step-ahead observation forecast.
    pub predicted_obs: f64,
    pub innovation: f64,
    pub innovation_var: f64,
    pub gain: SVector<f64, N>,
    /// Number of observations absorbed so far.
    pub step: usize,
}

impl<const N: usize> GaussianState<N> {
    pub fn initial(mean: SVector<f64, N>, cov: SMatrix<f64, N, N>) -> Self {
        Self {
            mean,
            cov,
            prior_mean: mean,
            prior_cov: cov,
            predicted_obs: f64::NAN,
            innovation: 0.0,
            innovation_var: f64::NAN,
            gain: SVector::zeros(),
            step: 0,
        }
    }

    /// ln N(r_t; 0, S_t).
    pub fn ln_innovation_density(&self) -> f64 {
        -0.5 * (self.innovation * self.innovation / self.innovation_var + self.innovation_var.ln() + LN_2PI)
    }
}

/// Shared measurement update given the predicted moments and linearisation.
#[allow(clippy::too_many_arguments)]
pub(crate) fn update<const N: usize>(
    step: usize,
    prior_mean: SVector<f64, N>,
    prior_cov: SMatrix<f64, N, N>,
    h: &RowSVector<f64, N>,
    predicted_obs: f64,
    r_eff: f64,
    y: f64,
) -> Result<GaussianState<N>> {
    let ph = prior_cov * h.transpose();
    let s = (h * ph)[0] + r_eff;
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::DegenerateSystem { step, reason: format!("innovation variance {s}") });
    }
    let gain = ph / s;
    let innovation = y - predicted_obs;
    let mean = prior_mean + gain * innovation;
    let cov = (SMatrix::<f64, N, N>::identity() - gain * h) * prior_cov;
    let cov = 0.5 * (cov + cov.transpose());
    Ok(GaussianState {
        mean,
        cov,
        prior_mean,
        prior_cov,
        predicted_obs,
        innovation,
        innovation_var: s,
        gain,
        step,
    })
}

/// Propagate the previous posterior through A, then correct with `y`.
pub fn kalman_step<const N: usize>(st: &GaussianState<N>, sys: &LinearStateSpace<N>, y: f64) -> Result<GaussianState<N>> {
    let prior_mean = sys.a * st.mean;
    let prior_cov = sys.a * st.cov * sys.a.transpose() + sys.g * sys.q * sys.g.transpose();
    let prior_cov = 0.5 * (prior_cov + prior_cov.transpose());
    let predicted_obs = (sys.h * prior_mean)[0];
    update(st.step + 1, prior_mean, prior_cov, &sys.h, predicted_obs, sys.r, y)
}

#[derive(Debug, Clone)]
pub struct KalmanRun<const N: usize> {
    pub states: Vec<GaussianState<N>>,
    /// −½ Σ (r_t²/S_t + ln S_t + ln 2π).
    pub log_lik: f64,
}

impl<const N: usize> KalmanRun<N> {
    /// Filtered means of state component `c`.
    pub fn filtered(&self, c: usize) -> Vec<f64> {
        self.states.iter().map(|s| s.mean[c]).collect()
    }
}

pub fn kalman_run<const N: usize>(series: &[f64], sys: &LinearStateSpace<N>) -> Result<KalmanRun<N>> {
    if series.is_empty() {
        return Err(Error::shape("Kalman filter needs at least one observation"));
    }
    let mut states = Vec::with_capacity(series.len());
    let mut st = sys.initial_state();
    let mut log_lik = 0.0;
    for &y in series {
        st = kalman_step(&st, sys, y)?;
        log_lik += st.ln_innovation_density();
        states.push(st);
    }
    Ok(KalmanRun { states, log_lik })
}

/// Marginal log-likelihood of x_t = α + β x_{t−1} + w_t, y_t = x_t + ε_t.
///
/// This is the augmented (1, x) filter with a known constant, written out as a
/// scalar recursion. Once the prior variance reaches a floating-point fixed
/// point the gain and innovation variance no longer change, so the remaining
/// steps only accumulate squared innovations.
#[allow(clippy::too_many_arguments)]
pub(crate) fn ar1_log_lik(series: &[f64], alpha: f64, beta: f64, q: f64, r: f64, x0: f64, p0: f64) -> Result<f64> {
    let mut x = x0;
    let mut p = p0;
    let mut log_lik = 0.0;
    let mut last_prior = f64::NAN;
    for (i, &y) in series.iter().enumerate() {
        let prior = beta * beta * p + q;
        let s = prior + r;
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::DegenerateSystem { step: i + 1, reason: format!("innovation variance {s}") });
        }
        let k = prior / s;
        if prior == last_prior {
            // Steady state: the same (s, k) apply to every remaining step.
            // x ← (1 − k)(α + βx) + k·y keeps a single multiply-add on the serial chain.
            let (c, d) = ((1.0 - k) * alpha, (1.0 - k) * beta);
            let mut sum_sq = 0.0;
            for &y in &series[i..] {
                let v = y - (alpha + beta * x);
                sum_sq += v * v;
                x = d * x + (c + k * y);
            }
            let n = (series.len() - i) as f64;
            return Ok(log_lik - 0.5 * (sum_sq / s + n * (s.ln() + LN_2PI)));
        }
        let v = y - (alpha + beta * x);
        log_lik -= 0.5 * (v * v / s + s.ln() + LN_2PI);
        x = alpha + beta * x + k * v;
        p = (1.0 - k) * prior;
        last_prior = prior;
    }
    Ok(log_lik)
}

/// Augmented state (1, x): x_t = α + β x_{t−1} + noise with α = θμdt and β = 1 − θdt.
///
/// With jumps the process noise is inflated to σ²dt + λ_j μ_j² dt. The start is
/// x0 = (1, μ) with P0 = diag(0, 1).
pub fn ou_state_space(p: &OuParams, dt: f64, meas_var: f64, jump: Option<&JumpParams>) -> Result<LinearStateSpace<2>> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::domain(format!("dt must be > 0, got {dt}")));
    }
    let alpha = p.theta * p.mu * dt;
    let beta = 1.0 - p.theta * dt;
    let mut var = p.sigma * p.sigma * dt;
    if let Some(j) = jump {
        var += j.lambda_j * j.mu_j * j.mu_j * dt;
    }
    augmented_ar1(alpha, beta, var, meas_var, p.mu)
}

/// The same construction for ln r under Black–Karasinski: α = θdt, β = 1 − αdt.
pub fn bk_state_space(p: &BkParams, dt: f64, meas_var: f64) -> Result<LinearStateSpace<2>> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::domain(format!("dt must be > 0, got {dt}")));
    }
    augmented_ar1(p.theta * dt, 1.0 - p.alpha * dt, p.sigma * p.sigma * dt, meas_var, p.theta / p.alpha)
}

fn augmented_ar1(alpha: f64, beta: f64, var: f64, meas_var: f64, level: f64) -> Result<LinearStateSpace<2>> {
    LinearStateSpace::new(
        SMatrix::<f64, 2, 2>::new(1.0, 0.0, alpha, beta),
        SMatrix::identity(),
        SMatrix::<f64, 2, 2>::new(0.0, 0.0, 0.0, var),
        RowSVector::<f64, 2>::new(0.0, 1.0),
        meas_var,
        SVector::<f64, 2>::new(1.0, level),
        SMatrix::<f64, 2, 2>::new(0.0, 0.0, 0.0, 1.0),
    )
}

/// Start an augmented AR(1) system at the first observation and return the rest.
pub fn condition_on_first(mut sys: LinearStateSpace<2>, series: &Path) -> Result<(LinearStateSpace<2>, &[f64])> {
    let xs = series.values()?;
    if xs.len() < 2 {
        return Err(Error::shape("series needs at least two observations"));
    }
    sys.x0[1] = xs[0];
    Ok((sys, &xs[1..]))
}
