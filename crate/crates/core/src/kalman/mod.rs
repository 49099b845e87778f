//! Linear Kalman filter, extended Kalman filter, model state-space builders and
//! the Gaussian likelihoods used to calibrate through them.

mod ekf;
mod estimate;
mod heston;
mod linear;

pub use ekf::{ekf_log_likelihood, ekf_run, ekf_step, EkfObjective, EkfRun, LinearAsNonlinear, NonlinearSystem};
pub use estimate::{ekf_objective, estimate_ekf, estimate_kalman, kalman_neg_log_likelihood, EkfSetup};
pub use heston::{bates_ekf_system, heston_ekf_system, SvEkfSystem, DEFAULT_V_FLOOR};
pub(crate) use linear::m1;
pub use linear::{
    bk_state_space, condition_on_first, kalman_run, kalman_step, ou_state_space, GaussianState, KalmanRun,
    LinearStateSpace,
};
