use nalgebra::{RowSVector, SMatrix, SVector};

use super::linear::{update, GaussianState, LinearStateSpace};
use crate::error::{Error, Result};

/// x_k = f(x_{k−1}) + W w_k, y_k = h(x_k) + ε v_k with w ~ N(0, Q), v ~ N(0, R).
///
/// Every callable receives the step index `k ≥ 1` of the observation being
/// processed, so systems may read exogenous inputs such as past returns.
pub trait NonlinearSystem<const N: usize> {
    fn f(&self, k: usize, x: &SVector<f64, N>) -> SVector<f64, N>;
    fn h(&self, k: usize, x: &SVector<f64, N>) -> f64;
    /// ∂f/∂x.
    fn a_jacobian(&self, k: usize, x: &SVector<f64, N>) -> SMatrix<f64, N, N>;
    /// Process-noise loading at x.
    fn w_jacobian(&self, k: usize, x: &SVector<f64, N>) -> SMatrix<f64, N, N>;
    /// ∂h/∂x.
    fn h_jacobian(&self, k: usize, x: &SVector<f64, N>) -> RowSVector<f64, N>;
    /// Observation-noise loading at x.
    fn eps_jacobian(&self, k: usize, x: &SVector<f64, N>) -> f64;
    fn q(&self, k: usize) -> SMatrix<f64, N, N>;
    fn r(&self, k: usize) -> f64;
}

/// A linear system seen through the nonlinear interface.
#[derive(Debug, Clone, Copy)]
pub struct LinearAsNonlinear<const N: usize>(pub LinearStateSpace<N>);

impl<const N: usize> NonlinearSystem<N> for LinearAsNonlinear<N> {
    fn f(&self, _: usize, x: &SVector<f64, N>) -> SVector<f64, N> {
        self.0.a * x
    }
    fn h(&self, _: usize, x: &SVector<f64, N>) -> f64 {
        (self.0.h * x)[0]
    }
    fn a_jacobian(&self, _: usize, _: &SVector<f64, N>) -> SMatrix<f64, N, N> {
        self.0.a
    }
    fn w_jacobian(&self, _: usize, _: &SVector<f64, N>) -> SMatrix<f64, N, N> {
        self.0.g
    }
    fn h_jacobian(&self, _: usize, _: &SVector<f64, N>) -> RowSVector<f64, N> {
        self.0.h
    }
    fn eps_jacobian(&self, _: usize, _: &SVector<f64, N>) -> f64 {
        1.0
    }
    fn q(&self, _: usize) -> SMatrix<f64, N, N> {
        self.0.q
    }
    fn r(&self, _: usize) -> f64 {
        self.0.r
    }
}

/// Predict with Jacobians at the previous estimate, correct with those at the prediction.
pub fn ekf_step<const N: usize, S: NonlinearSystem<N> + ?Sized>(
    st: &GaussianState<N>,
    sys: &S,
    y: f64,
) -> Result<GaussianState<N>> {
    let k = st.step + 1;
    let a = sys.a_jacobian(k, &st.mean);
    let w = sys.w_jacobian(k, &st.mean);
    let prior_mean = sys.f(k, &st.mean);
    let prior_cov = a * st.cov * a.transpose() + w * sys.q(k) * w.transpose();
    let prior_cov = 0.5 * (prior_cov + prior_cov.transpose());
    let h = sys.h_jacobian(k, &prior_mean);
    let eps = sys.eps_jacobian(k, &prior_mean);
    let predicted_obs = sys.h(k, &prior_mean);
    update(k, prior_mean, prior_cov, &h, predicted_obs, eps * sys.r(k) * eps, y)
}

#[derive(Debug, Clone)]
pub struct EkfRun<const N: usize> {
    pub states: Vec<GaussianState<N>>,
}

/// Run the EKF over `obs`, processing `obs[i]` at step `init.step + i + 1`.
pub fn ekf_run<const N: usize, S: NonlinearSystem<N> + ?Sized>(
    obs: &[f64],
    sys: &S,
    init: GaussianState<N>,
) -> Result<EkfRun<N>> {
    if obs.is_empty() {
        return Err(Error::shape("EKF needs at least one observation"));
    }
    let mut states = Vec::with_capacity(obs.len());
    let mut st = init;
    for &y in obs {
        st = ekf_step(&st, sys, y)?;
        states.push(st);
    }
    Ok(EkfRun { states })
}

/// Which variance normalises the squared innovation in the EKF objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EkfObjective {
    /// Σ [ln P_t + r_t²/P_t] with P_t the posterior state variance.
    #[default]
    Posterior,
    /// Σ [ln S_t + r_t²/S_t] with S_t the innovation variance.
    Innovation,
}

impl EkfObjective {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "posterior" => Some(Self::Posterior),
            "innovation" => Some(Self::Innovation),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Posterior => "posterior",
            Self::Innovation => "innovation",
        }
    }

    /// One summand of the objective for a filtered state.
    pub fn term(self, st: &GaussianState<1>) -> Result<f64> {
        let v = match self {
            Self::Posterior => st.cov[0],
            Self::Innovation => st.innovation_var,
        };
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::DegenerateSystem { step: st.step, reason: format!("variance {v} in EKF objective") });
        }
        Ok(v.ln() + st.innovation * st.innovation / v)
    }
}

impl EkfRun<1> {
    /// Sum of objective terms over the stored states; smaller is better.
    pub fn objective(&self, kind: EkfObjective) -> Result<f64> {
        self.states.iter().map(|s| kind.term(s)).sum()
    }
}

/// EKF calibration objective for a scalar-state system, to be minimised.
pub fn ekf_log_likelihood<S: NonlinearSystem<1> + ?Sized>(
    obs: &[f64],
    sys: &S,
    init: GaussianState<1>,
    kind: EkfObjective,
) -> Result<f64> {
    if obs.is_empty() {
        return Err(Error::shape("EKF objective needs at least one observation"));
    }
    let mut st = init;
    let mut total = 0.0;
    for &y in obs {
        st = ekf_step(&st, sys, y)?;
        total += kind.term(&st)?;
    }
    Ok(total)
}
