use sdefl_core::kalman::{
    condition_on_first, ekf_objective, estimate_kalman, kalman_neg_log_likelihood, kalman_run, ou_state_space,
    EkfObjective, EkfSetup,
};
use sdefl_core::likelihood::{estimate_mle, neg_log_likelihood, EstimateOptions};
use sdefl_core::models::{simulate_heston, simulate_ou, simulate_ou_jump};
use sdefl_core::optim::Bounds;
use sdefl_core::{HestonParams, JumpConvention, JumpParams, ModelParams, ModelTag, OuParams, RandomSource};

const SEEDS: std::ops::Range<u64> = 42..52;

fn jump_truth() -> ModelParams {
    ModelParams::OuJump(OuParams::new(1.0, 2.0, 4.0).unwrap(), JumpParams::new(0.5, 1.0, 1.0).unwrap())
}

#[test]
fn kalman_objective_matches_full_filter() {
    let p = OuParams::new(1.0, 2.0, 3.0).unwrap();
    let path = simulate_ou(&p, 0.0, 0.499, 300, &RandomSource::new(3)).unwrap();
    let (sys, tail) = condition_on_first(ou_state_space(&p, 0.499, 1e-4, None).unwrap(), &path).unwrap();
    let full = -kalman_run(tail, &sys).unwrap().log_lik;
    let fast = kalman_neg_log_likelihood(&path, &ModelParams::Ou(p), 1e-4).unwrap();
    assert!((full - fast).abs() <= 1e-9 * full.abs().max(1.0), "{full} vs {fast}");
}

#[test]
fn kalman_and_exact_likelihood_agree_on_ou() {
    // With negligible measurement noise the filter likelihood is the exact
    // AR(1) transition likelihood, so both calibrations land together.
    let p = OuParams::new(1.0, 2.0, 3.0).unwrap();
    let path = simulate_ou(&p, 0.0, 0.499, 1000, &RandomSource::new(42)).unwrap();
    let init = ModelParams::Ou(OuParams::new(0.5, 1.0, 1.0).unwrap());
    let b = Bounds::new(vec![1e-6, -10.0, 1e-6], vec![10.0, 10.0, 20.0]).unwrap();
    let o = EstimateOptions::default();
    let m = estimate_mle(&path, &init, &b, &o).unwrap().params.to_vec();
    let k = estimate_kalman(&path, &init, &b, &o, 1e-4).unwrap().params.to_vec();
    for (a, c) in m.iter().zip(&k) {
        assert!((a - c).abs() < 0.05, "mle {m:?} kalman {k:?}");
    }
}

#[test]
fn jump_estimates_never_lose_to_the_truth() {
    let truth = jump_truth();
    let ModelParams::OuJump(p, jp) = truth else { unreachable!() };
    let init = ModelParams::from_vec(ModelTag::OuJump, &[0.5, 1.0, 2.0, 1.0, 0.5, 0.5]).unwrap();
    let b = Bounds::uniform(6, 1e-15, 6.0).unwrap();
    let o = EstimateOptions::default();
    for seed in SEEDS {
        let path = simulate_ou_jump(&p, &jp, JumpConvention::CdfDt, 0.0, 0.499, 1000, &RandomSource::new(seed))
            .unwrap()
            .path;
        let m = estimate_mle(&path, &init, &b, &o).unwrap();
        let mt = neg_log_likelihood(&path, &truth, JumpConvention::CdfDt).unwrap();
        assert!(m.neg_log_lik <= mt, "seed {seed}: mle {} > truth {mt}", m.neg_log_lik);
        let k = estimate_kalman(&path, &init, &b, &o, 1e-4).unwrap();
        let kt = kalman_neg_log_likelihood(&path, &truth, 1e-4).unwrap();
        assert!(k.neg_log_lik <= kt, "seed {seed}: kalman {} > truth {kt}", k.neg_log_lik);
    }
}

#[test]
fn ekf_objective_prefers_true_long_run_variance() {
    let dt = 1.0 / 252.0;
    let p = HestonParams::new(0.05, 0.3, 1.5, 0.6, -0.6).unwrap();
    let setup = EkfSetup { v0: p.theta_v, p0: 0.01, objective: EkfObjective::Posterior };
    let mut doubled = p;
    doubled.theta_v *= 2.0;
    let mut wins = 0;
    for seed in SEEDS {
        let paths = simulate_heston(&p, 100.0, p.theta_v, dt, 1000, &RandomSource::new(seed)).unwrap();
        let at_truth = ekf_objective(&paths.log_price, &ModelParams::Heston(p), &setup).unwrap();
        let at_double = ekf_objective(&paths.log_price, &ModelParams::Heston(doubled), &setup).unwrap();
        if at_truth < at_double {
            wins += 1;
        }
    }
    assert!(wins >= 8, "true theta preferred on {wins}/10 seeds");
}

#[test]
fn ekf_objective_rejects_linear_models() {
    let p = OuParams::new(1.0, 2.0, 3.0).unwrap();
    let path = simulate_ou(&p, 0.0, 0.1, 10, &RandomSource::new(0)).unwrap();
    let setup = EkfSetup { v0: 0.1, p0: 0.01, objective: EkfObjective::Posterior };
    assert!(ekf_objective(&path, &ModelParams::Ou(p), &setup).is_err());
    assert!(kalman_neg_log_likelihood(&path, &ModelParams::Heston(HestonParams::new(0.0, 1.0, 0.1, 0.1, 0.0).unwrap()), 1e-4).is_err());
}
