use nalgebra::{RowSVector, SMatrix, SVector};

use super::ekf::NonlinearSystem;
use super::linear::{m1, GaussianState};
use crate::error::{Error, Result};
use crate::models::{BatesParams, HestonParams};
use crate::path::Path;

type V1 = SVector<f64, 1>;

/// Default lower bound on v inside the square-root loadings. Without it a
/// non-positive prediction zeroes both noise terms, the gain becomes 1/H and
/// the filter collapses onto a point mass.
pub const DEFAULT_V_FLOOR: f64 = 1e-8;

/// One-dimensional variance-state EKF for Heston and Bates.
///
/// Substituting the price shock out of the variance equation gives
/// v_k = v(1 − (κ − ½ρξ)dt) + (κθ_v − ρξμ)dt + ρξ r_k + ξ√(1−ρ²)√(v dt) w_k,
/// where r_k = ln S_k − ln S_{k−1} and μ is the price drift. The observation at
/// step k is the next return r_{k+1} = (μ − ½v_k)dt + √(v_k dt) ε_k.
/// Square roots use max(v, v_floor).
#[derive(Debug, Clone)]
pub struct SvEkfSystem {
    pub params: HestonParams,
    /// μ_s for Heston, μ_s + λj for Bates.
    pub drift: f64,
    pub dt: f64,
    /// Lower bound on v inside the square-root noise loadings.
    pub v_floor: f64,
    log_price: Vec<f64>,
    returns: Vec<f64>,
}

pub fn heston_ekf_system(p: &HestonParams, dt: f64, log_price: &Path) -> Result<SvEkfSystem> {
    SvEkfSystem::new(*p, p.mu_s, dt, log_price)
}

pub fn bates_ekf_system(p: &BatesParams, dt: f64, log_price: &Path) -> Result<SvEkfSystem> {
    SvEkfSystem::new(p.heston, p.effective_drift(), dt, log_price)
}

impl SvEkfSystem {
    fn new(params: HestonParams, drift: f64, dt: f64, log_price: &Path) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::domain(format!("dt must be > 0, got {dt}")));
        }
        let lp = log_price.values()?;
        if lp.len() < 2 {
            return Err(Error::shape("stochastic-volatility EKF needs at least two log prices"));
        }
        Ok(Self {
            params,
            drift,
            dt,
            v_floor: DEFAULT_V_FLOOR,
            log_price: lp.to_vec(),
            returns: lp.windows(2).map(|w| w[1] - w[0]).collect(),
        })
    }

    /// Returns r_2, r_3, …, one per filter step.
    pub fn observations(&self) -> &[f64] {
        &self.returns[1..]
    }

    /// Initial state for the variance filter.
    pub fn initial_state(&self, v0: f64, p0: f64) -> GaussianState<1> {
        GaussianState::initial(V1::new(v0), m1(p0))
    }

    /// One-step-ahead log-price forecasts ln S_k + ĥ_k for k = 1, 2, ….
    pub fn forecast_log_prices(&self, predicted_obs: &[f64]) -> Vec<f64> {
        predicted_obs.iter().enumerate().map(|(i, p)| self.log_price[i + 1] + p).collect()
    }

    /// Realised ln S_{k+1} aligned with [`Self::forecast_log_prices`].
    pub fn realised_log_prices(&self) -> &[f64] {
        &self.log_price[2..]
    }

    /// Deterministic part of the state transition at step k.
    #[inline]
    pub fn transition_mean(&self, k: usize, v: f64) -> f64 {
        let p = &self.params;
        let rx = p.rho * p.xi;
        v * (1.0 - (p.kappa - 0.5 * rx) * self.dt) + (p.kappa * p.theta_v - rx * self.drift) * self.dt + rx * self.returns[k - 1]
    }

    /// Standard deviation of the state transition from v.
    #[inline]
    pub fn transition_sd(&self, v: f64) -> f64 {
        let p = &self.params;
        p.xi * (1.0 - p.rho * p.rho).max(0.0).sqrt() * (v.max(self.v_floor) * self.dt).sqrt()
    }

    #[inline]
    pub fn observation_mean(&self, v: f64) -> f64 {
        (self.drift - 0.5 * v) * self.dt
    }

    #[inline]
    pub fn observation_sd(&self, v: f64) -> f64 {
        (v.max(self.v_floor) * self.dt).sqrt()
    }
}

impl NonlinearSystem<1> for SvEkfSystem {
    fn f(&self, k: usize, x: &V1) -> V1 {
        V1::new(self.transition_mean(k, x[0]))
    }
    fn h(&self, _: usize, x: &V1) -> f64 {
        self.observation_mean(x[0])
    }
    fn a_jacobian(&self, _: usize, _: &V1) -> SMatrix<f64, 1, 1> {
        let p = &self.params;
        m1(1.0 - (p.kappa - 0.5 * p.rho * p.xi) * self.dt)
    }
    fn w_jacobian(&self, _: usize, x: &V1) -> SMatrix<f64, 1, 1> {
        m1(self.transition_sd(x[0]))
    }
    fn h_jacobian(&self, _: usize, _: &V1) -> RowSVector<f64, 1> {
        RowSVector::<f64, 1>::new(-0.5 * self.dt)
    }
    fn eps_jacobian(&self, _: usize, x: &V1) -> f64 {
        self.observation_sd(x[0])
    }
    fn q(&self, _: usize) -> SMatrix<f64, 1, 1> {
        m1(1.0)
    }
    fn r(&self, _: usize) -> f64 {
        1.0
    }
}
