//! Particle extended Kalman filter: every particle carries its own EKF, the
//! EKF posterior is the importance proposal, and weights are kept in log space.

use nalgebra::SVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::kalman::{ekf_step, GaussianState, LinearStateSpace, NonlinearSystem, SvEkfSystem};
use crate::models::{BatesParams, HestonParams};
use crate::path::Path;
use crate::random::RandomSource;
use crate::stats::ln_normal_pdf;

/// Floor applied to every density standard deviation.
pub const SD_FLOOR: f64 = 1e-8;

const RESAMPLE_TAG: u64 = 0x7265_7361_6d70;
const INIT_TAG: u64 = 0x696e_6974;

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleCloud {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
    /// Per-particle EKF posterior variances.
    pub covariances: Vec<f64>,
}

impl ParticleCloud {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// 1 / Σ w².
    pub fn ess(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    pub fn weighted_mean(&self) -> f64 {
        self.values.iter().zip(&self.weights).map(|(x, w)| x * w).sum()
    }
}

/// Log densities used to weight proposals.
pub trait ProposalDensities {
    /// ln p(y_k | x_k).
    fn ln_obs(&self, k: usize, y: f64, x: f64) -> f64;
    /// ln p(x_k | x_{k−1}).
    fn ln_trans(&self, k: usize, x: f64, x_prev: f64) -> f64;
    /// ln q(x | EKF posterior), a Gaussian with the posterior mean and variance.
    fn ln_proposal(&self, x: f64, mean: f64, var: f64) -> f64 {
        ln_normal_pdf(x, mean, var.max(0.0).sqrt().max(SD_FLOOR))
    }
}

/// Densities for the variance-state Heston or Bates system.
#[derive(Debug, Clone)]
pub struct SvDensities {
    pub system: SvEkfSystem,
}

pub fn heston_densities(p: &HestonParams, dt: f64, log_price: &Path) -> Result<SvDensities> {
    Ok(SvDensities { system: crate::kalman::heston_ekf_system(p, dt, log_price)? })
}

pub fn bates_densities(p: &BatesParams, dt: f64, log_price: &Path) -> Result<SvDensities> {
    Ok(SvDensities { system: crate::kalman::bates_ekf_system(p, dt, log_price)? })
}

impl ProposalDensities for SvDensities {
    fn ln_obs(&self, _: usize, y: f64, x: f64) -> f64 {
        ln_normal_pdf(y, self.system.observation_mean(x), self.system.observation_sd(x).max(SD_FLOOR))
    }

    fn ln_trans(&self, k: usize, x: f64, x_prev: f64) -> f64 {
        ln_normal_pdf(x, self.system.transition_mean(k, x_prev), self.system.transition_sd(x_prev).max(SD_FLOOR))
    }
}

/// Exact densities of a scalar linear-Gaussian system.
#[derive(Debug, Clone, Copy)]
pub struct LinearDensities(pub LinearStateSpace<1>);

impl ProposalDensities for LinearDensities {
    fn ln_obs(&self, _: usize, y: f64, x: f64) -> f64 {
        ln_normal_pdf(y, self.0.h[0] * x, self.0.r.sqrt().max(SD_FLOOR))
    }

    fn ln_trans(&self, _: usize, x: f64, x_prev: f64) -> f64 {
        let g = self.0.g[0];
        ln_normal_pdf(x, self.0.a[0] * x_prev, (g * g * self.0.q[0]).sqrt().max(SD_FLOOR))
    }
}

/// n particles x0 + √P0·Z with uniform weights and covariances P0.
pub fn init_cloud(x0: f64, p0: f64, n: usize, src: &RandomSource) -> Result<ParticleCloud> {
    if n == 0 {
        return Err(Error::shape("a particle cloud needs at least one particle"));
    }
    if !(p0 >= 0.0) || !p0.is_finite() || !x0.is_finite() {
        return Err(Error::domain(format!("need finite x0 and P0 >= 0 (x0={x0}, P0={p0})")));
    }
    let sd = p0.sqrt();
    let z = src.derive(INIT_TAG).standard_normals(n);
    Ok(ParticleCloud {
        values: z.iter().map(|z| x0 + sd * z).collect(),
        weights: vec![1.0 / n as f64; n],
        covariances: vec![p0; n],
    })
}

/// Diagnostics from one propagate-and-weight step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSummary {
    /// ln Σ_i w_prev^(i) · p(y|x̃)p(x̃|x_prev)/q(x̃).
    pub ln_increment: f64,
    /// Σ_i w_prev^(i) h(x̂⁻^(i)), the forecast made before seeing y.
    pub predicted_obs: f64,
}

/// EKF-step every particle, draw from its posterior, reweight and normalise.
///
/// `k` is the step index passed to the system; particle i draws its proposal
/// noise from the stream `src.derive2(k, i)`.
pub fn propagate_and_weight<S, D>(
    cloud: &ParticleCloud,
    sys: &S,
    dens: &D,
    y: f64,
    k: usize,
    src: &RandomSource,
) -> Result<(ParticleCloud, StepSummary)>
where
    S: NonlinearSystem<1> + ?Sized,
    D: ProposalDensities + ?Sized,
{
    let n = cloud.len();
    let mut values = Vec::with_capacity(n);
    let mut covariances = Vec::with_capacity(n);
    let mut ln_w = Vec::with_capacity(n);
    let mut predicted_obs = 0.0;
    for i in 0..n {
        let x_prev = cloud.values[i];
        let mut st = GaussianState::initial(SVector::<f64, 1>::new(x_prev), crate::kalman::m1(cloud.covariances[i]));
        st.step = k - 1;
        let post = ekf_step(&st, sys, y)?;
        predicted_obs += cloud.weights[i] * post.predicted_obs;
        let (m, p) = (post.mean[0], post.cov[0].max(0.0));
        let z: f64 = src.derive2(k as u64, i as u64).rng().sample(StandardNormal);
        let x = m + p.sqrt() * z;
        let inc = dens.ln_obs(k, y, x) + dens.ln_trans(k, x, x_prev) - dens.ln_proposal(x, m, p);
        ln_w.push(cloud.weights[i].ln() + inc);
        values.push(x);
        covariances.push(p);
    }
    let max = ln_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::WeightDegeneracy { step: k });
    }
    let mut weights: Vec<f64> = ln_w.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::WeightDegeneracy { step: k });
    }
    for w in &mut weights {
        *w /= total;
    }
    Ok((
        ParticleCloud { values, weights, covariances },
        StepSummary { ln_increment: max + total.ln(), predicted_obs },
    ))
}

/// Systematic resampling with one uniform offset; weights reset to 1/n.
pub fn resample(cloud: &ParticleCloud, src: &RandomSource) -> ParticleCloud {
    let n = cloud.len();
    let u: f64 = src.rng().random::<f64>();
    let mut values = Vec::with_capacity(n);
    let mut covariances = Vec::with_capacity(n);
    let mut cum = 0.0;
    let mut i = 0;
    for j in 0..n {
        let pos = u + j as f64;
        while i + 1 < n && cum + cloud.weights[i] * n as f64 <= pos {
            cum += cloud.weights[i] * n as f64;
            i += 1;
        }
        values.push(cloud.values[i]);
        covariances.push(cloud.covariances[i]);
    }
    ParticleCloud { values, weights: vec![1.0 / n as f64; n], covariances }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ResampleMode {
    /// Resample after every step.
    #[default]
    Always,
    /// Resample when the effective sample size drops below this fraction of N.
    EssBelow(f64),
}

#[derive(Debug, Clone)]
pub struct ParticleRun {
    /// Weighted posterior mean of the state after each observation.
    pub estimates: Vec<f64>,
    /// Particle-averaged one-step-ahead observation forecasts.
    pub predicted_obs: Vec<f64>,
    /// Σ_t ln l_t.
    pub log_lik: f64,
    /// Effective sample size after each weighting, before any resampling.
    pub ess: Vec<f64>,
}

/// Run the particle EKF over `obs`, processing `obs[i]` at step `i + 1`.
#[allow(clippy::too_many_arguments)]
pub fn particle_ekf_run<S, D>(
    obs: &[f64],
    sys: &S,
    dens: &D,
    x0: f64,
    p0: f64,
    n_particles: usize,
    src: &RandomSource,
    mode: ResampleMode,
) -> Result<ParticleRun>
where
    S: NonlinearSystem<1> + ?Sized,
    D: ProposalDensities + ?Sized,
{
    if obs.is_empty() {
        return Err(Error::shape("particle filter needs at least one observation"));
    }
    let mut cloud = init_cloud(x0, p0, n_particles, src)?;
    let resampling = src.derive(RESAMPLE_TAG);
    let mut run = ParticleRun {
        estimates: Vec::with_capacity(obs.len()),
        predicted_obs: Vec::with_capacity(obs.len()),
        log_lik: 0.0,
        ess: Vec::with_capacity(obs.len()),
    };
    for (i, &y) in obs.iter().enumerate() {
        let k = i + 1;
        let (next, summary) = propagate_and_weight(&cloud, sys, dens, y, k, src)?;
        run.log_lik += summary.ln_increment;
        run.predicted_obs.push(summary.predicted_obs);
        run.estimates.push(next.weighted_mean());
        let ess = next.ess();
        run.ess.push(ess);
        let redraw = match mode {
            ResampleMode::Always => true,
            ResampleMode::EssBelow(frac) => ess < frac * n_particles as f64,
        };
        cloud = if redraw { resample(&next, &resampling.derive(k as u64)) } else { next };
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kalman::{ekf_run, m1, LinearAsNonlinear};
    use crate::models::simulate_heston;
    use nalgebra::RowSVector;

    fn linear(a: f64, q: f64, r: f64) -> LinearStateSpace<1> {
        LinearStateSpace::new(m1(a), m1(1.0), m1(q), RowSVector::<f64, 1>::new(1.0), r, SVector::<f64, 1>::new(0.0), m1(1.0))
            .unwrap()
    }

    #[test]
    fn init_cloud_contract() {
        let c = init_cloud(0.3, 0.0, 10, &RandomSource::new(1)).unwrap();
        assert!(c.values.iter().all(|&x| x == 0.3));
        let c = init_cloud(0.0, 1.0, 1000, &RandomSource::new(1)).unwrap();
        let m = c.values.iter().sum::<f64>() / 1000.0;
        let var = c.values.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 999.0;
        assert!((var - 1.0).abs() < 0.15);
        assert!(c.weights.iter().all(|&w| w == 1.0 / 1000.0));
        assert!(c.covariances.iter().all(|&p| p == 1.0));
        assert!(matches!(init_cloud(0.0, 1.0, 0, &RandomSource::new(1)), Err(Error::Shape(_))));
    }

    #[test]
    fn weights_normalise() {
        let sys = linear(0.9, 0.5, 0.2);
        let dens = LinearDensities(sys);
        let src = RandomSource::new(2);
        let mut cloud = init_cloud(0.0, 1.0, 200, &src).unwrap();
        for (i, y) in src.derive(5).standard_normals(30).into_iter().enumerate() {
            let (next, _) = propagate_and_weight(&cloud, &LinearAsNonlinear(sys), &dens, y, i + 1, &src).unwrap();
            assert!((next.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(next.weights.iter().all(|&w| w >= 0.0));
            let ess = next.ess();
            assert!((1.0..=200.0 + 1e-9).contains(&ess));
            cloud = resample(&next, &src.derive2(77, i as u64));
        }
        let one = init_cloud(0.0, 1.0, 1, &src).unwrap();
        let (next, _) = propagate_and_weight(&one, &LinearAsNonlinear(sys), &dens, 3.0, 1, &src).unwrap();
        assert_eq!(next.weights, vec![1.0]);
    }

    #[test]
    fn uninformative_observation_keeps_uniform_weights() {
        struct Flat(LinearStateSpace<1>);
        impl ProposalDensities for Flat {
            fn ln_obs(&self, _: usize, _: f64, _: f64) -> f64 {
                -1.0
            }
            fn ln_trans(&self, _: usize, x: f64, x_prev: f64) -> f64 {
                ln_normal_pdf(x, self.0.a[0] * x_prev, self.0.q[0].sqrt())
            }
        }
        // Enormous R and zero prior spread make the EKF posterior equal the transition.
        let mut sys = linear(0.8, 0.4, 1e300);
        sys.p0 = m1(0.0);
        let src = RandomSource::new(3);
        let mut cloud = init_cloud(1.0, 0.5, 100, &src).unwrap();
        cloud.covariances.iter_mut().for_each(|p| *p = 0.0);
        let (next, _) = propagate_and_weight(&cloud, &LinearAsNonlinear(sys), &Flat(sys), 0.7, 1, &src).unwrap();
        assert!(next.weights.iter().all(|w| (w - 0.01).abs() < 1e-12));
    }

    #[test]
    fn all_zero_weights_report_the_step() {
        struct Impossible;
        impl ProposalDensities for Impossible {
            fn ln_obs(&self, _: usize, _: f64, _: f64) -> f64 {
                f64::NEG_INFINITY
            }
            fn ln_trans(&self, _: usize, _: f64, _: f64) -> f64 {
                0.0
            }
        }
        let sys = linear(0.8, 0.4, 1.0);
        let cloud = init_cloud(0.0, 1.0, 10, &RandomSource::new(1)).unwrap();
        let err = propagate_and_weight(&cloud, &LinearAsNonlinear(sys), &Impossible, 0.0, 4, &RandomSource::new(1));
        assert_eq!(err.unwrap_err(), Error::WeightDegeneracy { step: 4 });
    }

    #[test]
    fn systematic_resampling_contract() {
        let src = RandomSource::new(10);
        let mut cloud = init_cloud(0.0, 1.0, 50, &src).unwrap();
        let out = resample(&cloud, &src.derive(1));
        let mut a = out.values.clone();
        let mut b = cloud.values.clone();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        assert_eq!(a, b);

        cloud.weights = vec![0.0; 50];
        cloud.weights[0] = 1.0;
        let out = resample(&cloud, &src.derive(2));
        assert!(out.values.iter().all(|&x| x == cloud.values[0]));
        assert!(out.weights.iter().all(|&w| w == 1.0 / 50.0));
    }

    #[test]
    fn copy_counts_match_expectation() {
        let n = 20;
        let raw: Vec<f64> = (0..n).map(|i| ((i * 7 % 11) + 1) as f64).collect();
        let total: f64 = raw.iter().sum();
        let cloud = ParticleCloud {
            values: (0..n).map(|i| i as f64).collect(),
            weights: raw.iter().map(|w| w / total).collect(),
            covariances: vec![0.0; n],
        };
        let mut mean_counts = vec![0.0; n];
        for trial in 0..1000 {
            let out = resample(&cloud, &RandomSource::new(trial));
            for (i, (m, w)) in mean_counts.iter_mut().zip(&cloud.weights).enumerate() {
                let c = out.values.iter().filter(|&&x| x == i as f64).count() as f64;
                assert!((c - n as f64 * w).abs() <= 1.0);
                *m += c / 1000.0;
            }
        }
        for (m, w) in mean_counts.iter().zip(&cloud.weights) {
            assert!((m - n as f64 * w).abs() < 0.1);
        }
    }

    #[test]
    fn resampling_preserves_weighted_mean() {
        let n = 1000;
        let mut hits = 0;
        for trial in 0..100 {
            let src = RandomSource::new(trial);
            let values = src.derive(1).standard_normals(n);
            let raw: Vec<f64> = src.derive(2).standard_normals(n).iter().map(|z| z.exp()).collect();
            let total: f64 = raw.iter().sum();
            let cloud = ParticleCloud { values, weights: raw.iter().map(|w| w / total).collect(), covariances: vec![0.0; n] };
            let m = cloud.weighted_mean();
            let sd = cloud.values.iter().zip(&cloud.weights).map(|(x, w)| w * (x - m).powi(2)).sum::<f64>().sqrt();
            let out = resample(&cloud, &src.derive(3));
            let after = out.values.iter().sum::<f64>() / n as f64;
            if (after - m).abs() <= 5.0 * sd / (n as f64).sqrt() {
                hits += 1;
            }
        }
        assert!(hits >= 95, "{hits}");
    }

    #[test]
    fn collapses_to_ekf_without_noise() {
        let mut sys = linear(0.9, 0.0, 0.3);
        sys.x0 = SVector::<f64, 1>::new(1.5);
        sys.p0 = m1(0.0);
        let ys = RandomSource::new(4).standard_normals(25);
        let ekf = ekf_run(&ys, &LinearAsNonlinear(sys), sys.initial_state()).unwrap();
        let run = particle_ekf_run(&ys, &LinearAsNonlinear(sys), &LinearDensities(sys), 1.5, 0.0, 1, &RandomSource::new(4), ResampleMode::Always)
            .unwrap();
        for (a, b) in run.estimates.iter().zip(&ekf.states) {
            assert_eq!(*a, b.mean[0]);
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let p = HestonParams::new(0.3, 2.0, 0.01, 0.6, -0.1).unwrap();
        let paths = simulate_heston(&p, 100.0, 0.01, 1.0 / 252.0, 100, &RandomSource::new(6)).unwrap();
        let dens = heston_densities(&p, 1.0 / 252.0, &paths.log_price).unwrap();
        let go = |mode| {
            particle_ekf_run(dens.system.observations(), &dens.system, &dens, 0.01, 1e-4, 200, &RandomSource::new(9), mode).unwrap()
        };
        for mode in [ResampleMode::Always, ResampleMode::EssBelow(0.5)] {
            let (a, b) = (go(mode), go(mode));
            assert_eq!(a.estimates, b.estimates);
            assert_eq!(a.log_lik.to_bits(), b.log_lik.to_bits());
            assert!(a.ess.iter().all(|&e| (1.0..=200.0 + 1e-9).contains(&e)));
        }
    }

    #[test]
    fn sv_density_properties() {
        let dt = 1.0 / 252.0;
        let h = HestonParams::new(0.05, 0.3, 1.5, 0.6, -0.6).unwrap();
        let paths = simulate_heston(&h, 100.0, 1.5, dt, 20, &RandomSource::new(1)).unwrap();
        let dh = heston_densities(&h, dt, &paths.log_price).unwrap();

        let trapezoid = |f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize| {
            let step = (b - a) / n as f64;
            step * (0.5 * (f(a) + f(b)) + (1..n).map(|i| f(a + i as f64 * step)).sum::<f64>())
        };
        let x = 0.9;
        let (m, s) = (dh.system.observation_mean(x), dh.system.observation_sd(x));
        let q = trapezoid(&|y| dh.ln_obs(1, y, x).exp(), m - 12.0 * s, m + 12.0 * s, 20_000);
        assert!((q - 1.0).abs() < 1e-6);

        let (tm, ts) = (dh.system.transition_mean(3, x), dh.system.transition_sd(x));
        let q = trapezoid(&|v| dh.ln_trans(3, v, x).exp(), tm - 12.0 * ts, tm + 12.0 * ts, 20_000);
        assert!((q - 1.0).abs() < 1e-6);
        assert!(dh.ln_trans(3, tm, x) > dh.ln_trans(3, tm + 1e-3, x));
        assert!(dh.ln_trans(3, tm, x) > dh.ln_trans(3, tm - 1e-3, x));

        let flat = HestonParams::new(0.05, 0.3, 1.5, 1e-300, 0.0).unwrap();
        let df = heston_densities(&flat, dt, &paths.log_price).unwrap();
        let at = df.system.transition_mean(2, x);
        assert!((df.ln_trans(2, at, x) - ln_normal_pdf(at, at, SD_FLOOR)).abs() < 1e-9);

        let b0 = bates_densities(&BatesParams::new(h, 0.0, 0.1).unwrap(), dt, &paths.log_price).unwrap();
        let b1 = bates_densities(&BatesParams::new(h, 10.0, 0.1).unwrap(), dt, &paths.log_price).unwrap();
        for (y, v) in [(0.01, 0.5), (-0.03, 1.2)] {
            assert_eq!(b0.ln_obs(2, y, v).to_bits(), dh.ln_obs(2, y, v).to_bits());
            assert_eq!(b0.ln_trans(2, y, v).to_bits(), dh.ln_trans(2, y, v).to_bits());
        }
        assert!((b1.system.observation_mean(x) - dh.system.observation_mean(x) - dt).abs() < 1e-15);
        let (tm, ts) = (b1.system.transition_mean(3, x), b1.system.transition_sd(x));
        let q = trapezoid(&|v| b1.ln_trans(3, v, x).exp(), tm - 12.0 * ts, tm + 12.0 * ts, 20_000);
        assert!((q - 1.0).abs() < 1e-6);
    }
}
