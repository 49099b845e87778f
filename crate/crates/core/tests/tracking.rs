use nalgebra::{RowSVector, SMatrix, SVector};
use rand::Rng;
use rand_distr::StandardNormal;
use sdefl_core::kalman::{
    condition_on_first, ekf_run, heston_ekf_system, kalman_run, ou_state_space, LinearAsNonlinear, LinearStateSpace,
};
use sdefl_core::models::{simulate_heston, simulate_ou};
use sdefl_core::particle::{particle_ekf_run, LinearDensities, ResampleMode};
use sdefl_core::stats::rmse_slices;
use sdefl_core::{HestonParams, OuParams, RandomSource};

#[test]
fn kalman_tracks_noise_free_ou() {
    let p = OuParams::new(1.0, 2.0, 3.0).unwrap();
    let path = simulate_ou(&p, 0.0, 0.499, 1000, &RandomSource::new(42)).unwrap();
    let (sys, tail) = condition_on_first(ou_state_space(&p, 0.499, 1e-4, None).unwrap(), &path).unwrap();
    let run = kalman_run(tail, &sys).unwrap();
    let err = rmse_slices(&run.filtered(1), tail).unwrap();
    assert!(err <= 1e-2, "rmse {err}");
}

fn toy() -> LinearStateSpace<1> {
    LinearStateSpace::new(
        SMatrix::<f64, 1, 1>::from_element(0.9),
        SMatrix::<f64, 1, 1>::from_element(1.0),
        SMatrix::<f64, 1, 1>::from_element(0.5),
        RowSVector::<f64, 1>::from_element(1.0),
        1.0,
        SVector::<f64, 1>::from_element(0.0),
        SMatrix::<f64, 1, 1>::from_element(1.0),
    )
    .unwrap()
}

fn toy_observations(sys: &LinearStateSpace<1>, n: usize, src: &RandomSource) -> Vec<f64> {
    let mut rng = src.rng();
    let mut x = sys.x0[0] + sys.p0[0].sqrt() * rng.sample::<f64, _>(StandardNormal);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        x = sys.a[0] * x + sys.q[0].sqrt() * rng.sample::<f64, _>(StandardNormal);
        ys.push(sys.h[0] * x + sys.r.sqrt() * rng.sample::<f64, _>(StandardNormal));
    }
    ys
}

#[test]
fn particle_likelihood_tracks_exact_likelihood() {
    let sys = toy();
    let ys = toy_observations(&sys, 50, &RandomSource::new(7));
    let exact = kalman_run(&ys, &sys).unwrap().log_lik;
    let dens = LinearDensities(sys);
    let mut rel: Vec<f64> = (0..20)
        .map(|seed| {
            let run = particle_ekf_run(&ys, &LinearAsNonlinear(sys), &dens, 0.0, 1.0, 4000, &RandomSource::new(seed), ResampleMode::Always)
                .unwrap();
            ((run.log_lik - exact) / exact).abs()
        })
        .collect();
    rel.sort_by(f64::total_cmp);
    let median = 0.5 * (rel[9] + rel[10]);
    assert!(median <= 0.05, "median relative error {median}");
}

#[test]
fn particle_estimates_follow_kalman_means() {
    let sys = toy();
    let ys = toy_observations(&sys, 100, &RandomSource::new(11));
    let kf = kalman_run(&ys, &sys).unwrap().filtered(0);
    let run = particle_ekf_run(&ys, &LinearAsNonlinear(sys), &LinearDensities(sys), 0.0, 1.0, 2000, &RandomSource::new(5), ResampleMode::EssBelow(0.5))
        .unwrap();
    let gap = rmse_slices(&run.estimates, &kf).unwrap();
    assert!(gap < 0.05, "particle vs kalman mean rmse {gap}");
}

#[test]
fn ekf_variance_error_stays_bounded_when_feller_fails() {
    let p = HestonParams::new(0.3, 2.0, 0.01, 0.6, -0.1).unwrap();
    let dt = 1.0 / 252.0;
    let paths = simulate_heston(&p, 100.0, p.theta_v, dt, 1000, &RandomSource::new(42)).unwrap();
    let sys = heston_ekf_system(&p, dt, &paths.log_price).unwrap();
    let run = ekf_run(sys.observations(), &sys, sys.initial_state(p.theta_v, 0.01)).unwrap();
    let filtered: Vec<f64> = run.states.iter().map(|s| s.mean[0]).collect();
    let latent = &paths.variance.values().unwrap()[1..=filtered.len()];
    let err = rmse_slices(&filtered, latent).unwrap();
    assert!((0.1..=3.0).contains(&err), "variance rmse {err}");
}
