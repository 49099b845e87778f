//! Parameter records and Euler–Maruyama simulators.
//!
//! Each simulator draws its Brownian increments from the `DIFFUSION` child of
//! the supplied source and its jump randomness from separate children, so a
//! jump model with jumps switched off consumes exactly the same diffusion
//! draws as its jump-free counterpart.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::path::Path;
use crate::random::RandomSource;
use crate::stats::normal_cdf;

pub(crate) const DIFFUSION: u64 = 0;
pub(crate) const JUMP_TRIGGER: u64 = 1;
pub(crate) const JUMP_SIZE: u64 = 2;
pub(crate) const JUMP_COUNT: u64 = 3;

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be finite, got {v}")))
    }
}

/// dX = θ(μ − X)dt + σ dW.
///
/// `theta = 0` and `sigma = 0` are accepted so degenerate (deterministic or
/// random-walk) cases can be simulated; densities still require `sigma > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuParams {
    pub theta: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl OuParams {
    pub fn new(theta: f64, mu: f64, sigma: f64) -> Result<Self> {
        finite("theta", theta)?;
        finite("mu", mu)?;
        finite("sigma", sigma)?;
        if theta < 0.0 || sigma < 0.0 {
            return Err(Error::domain(format!(
                "OU requires theta >= 0 and sigma >= 0 (theta={theta}, sigma={sigma})"
            )));
        }
        Ok(Self { theta, mu, sigma })
    }
}

/// Gaussian jump `N(mu_j, sigma_j²)` fired when a standard normal trigger falls
/// below a threshold derived from `lambda_j` (see [`JumpConvention`]).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpParams {
    pub lambda_j: f64,
    pub mu_j: f64,
    pub sigma_j: f64,
}

impl JumpParams {
    /// `lambda_j = +inf` is allowed and means a jump on every step.
    pub fn new(lambda_j: f64, mu_j: f64, sigma_j: f64) -> Result<Self> {
        finite("mu_j", mu_j)?;
        finite("sigma_j", sigma_j)?;
        if lambda_j.is_nan() || lambda_j < 0.0 || sigma_j < 0.0 {
            return Err(Error::domain(format!(
                "jump requires lambda_j >= 0 and sigma_j >= 0 (lambda_j={lambda_j}, sigma_j={sigma_j})"
            )));
        }
        Ok(Self { lambda_j, mu_j, sigma_j })
    }
}

/// How the jump trigger level maps to a per-step jump probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JumpConvention {
    /// Jump when γ < λ_j·dt, i.e. probability Φ(λ_j·dt). Matches the mixture density.
    #[default]
    CdfDt,
    /// Jump when γ < λ_j, i.e. probability Φ(λ_j).
    CdfRaw,
}

impl JumpConvention {
    pub fn threshold(self, lambda_j: f64, dt: f64) -> f64 {
        match self {
            JumpConvention::CdfDt => lambda_j * dt,
            JumpConvention::CdfRaw => lambda_j,
        }
    }

    pub fn trigger_probability(self, lambda_j: f64, dt: f64) -> f64 {
        normal_cdf(self.threshold(lambda_j, dt))
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "cdf_dt" => Some(JumpConvention::CdfDt),
            "cdf_raw" => Some(JumpConvention::CdfRaw),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            JumpConvention::CdfDt => "cdf_dt",
            JumpConvention::CdfRaw => "cdf_raw",
        }
    }
}

/// d ln r = (θ − α ln r)dt + σ dW.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BkParams {
    pub theta: f64,
    pub alpha: f64,
    pub sigma: f64,
}

impl BkParams {
    pub fn new(theta: f64, alpha: f64, sigma: f64) -> Result<Self> {
        finite("theta", theta)?;
        finite("alpha", alpha)?;
        finite("sigma", sigma)?;
        if !(alpha > 0.0) || sigma < 0.0 {
            return Err(Error::domain(format!(
                "B-K requires alpha > 0 and sigma >= 0 (alpha={alpha}, sigma={sigma})"
            )));
        }
        Ok(Self { theta, alpha, sigma })
    }
}

/// Heston dynamics: d ln S = (μ_s − v/2)dt + √v dW¹, dv = κ(θ_v − v)dt + ξ√v dW².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HestonParams {
    pub mu_s: f64,
    pub kappa: f64,
    pub theta_v: f64,
    pub xi: f64,
    pub rho: f64,
}

impl HestonParams {
    pub fn new(mu_s: f64, kappa: f64, theta_v: f64, xi: f64, rho: f64) -> Result<Self> {
        for (n, v) in [("mu_s", mu_s), ("kappa", kappa), ("theta_v", theta_v), ("xi", xi), ("rho", rho)] {
            finite(n, v)?;
        }
        if !(kappa > 0.0 && theta_v > 0.0 && xi > 0.0) {
            return Err(Error::domain(format!(
                "Heston requires kappa, theta_v, xi > 0 (kappa={kappa}, theta_v={theta_v}, xi={xi})"
            )));
        }
        if rho.abs() > 1.0 {
            return Err(Error::domain(format!("Heston requires |rho| <= 1, got {rho}")));
        }
        Ok(Self { mu_s, kappa, theta_v, xi, rho })
    }

    /// 2κθ_v / ξ² > 1.
    pub fn feller_ok(&self) -> bool {
        2.0 * self.kappa * self.theta_v / (self.xi * self.xi) > 1.0
    }
}

/// Heston plus Poisson jumps of fixed fractional size `j` in the asset price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatesParams {
    pub heston: HestonParams,
    pub lambda: f64,
    pub j: f64,
}

impl BatesParams {
    pub fn new(heston: HestonParams, lambda: f64, j: f64) -> Result<Self> {
        finite("lambda", lambda)?;
        finite("j", j)?;
        if lambda < 0.0 || !(0.0..1.0).contains(&j) {
            return Err(Error::domain(format!(
                "Bates requires lambda >= 0 and 0 <= j < 1 (lambda={lambda}, j={j})"
            )));
        }
        Ok(Self { heston, lambda, j })
    }

    /// Drift μ_s + λ·j used wherever the Heston drift appears.
    pub fn effective_drift(&self) -> f64 {
        self.heston.mu_s + self.lambda * self.j
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelTag {
    Ou,
    OuJump,
    Bk,
    Heston,
    Bates,
}

impl ModelTag {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ou" => Some(ModelTag::Ou),
            "ou_jump" => Some(ModelTag::OuJump),
            "bk" => Some(ModelTag::Bk),
            "heston" => Some(ModelTag::Heston),
            "bates" => Some(ModelTag::Bates),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelTag::Ou => "ou",
            ModelTag::OuJump => "ou_jump",
            ModelTag::Bk => "bk",
            ModelTag::Heston => "heston",
            ModelTag::Bates => "bates",
        }
    }

    /// Parameter names in vector order.
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            ModelTag::Ou => &["theta", "mu", "sigma"],
            ModelTag::OuJump => &["theta", "mu", "sigma", "lambda_j", "mu_j", "sigma_j"],
            ModelTag::Bk => &["theta", "alpha", "sigma"],
            ModelTag::Heston => &["mu_s", "kappa", "theta_v", "xi", "rho"],
            ModelTag::Bates => &["mu_s", "kappa", "theta_v", "xi", "rho", "lambda", "j"],
        }
    }

    pub fn is_stochastic_volatility(self) -> bool {
        matches!(self, ModelTag::Heston | ModelTag::Bates)
    }
}

/// One parameter record per model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelParams {
    Ou(OuParams),
    OuJump(OuParams, JumpParams),
    Bk(BkParams),
    Heston(HestonParams),
    Bates(BatesParams),
}

impl ModelParams {
    pub fn tag(&self) -> ModelTag {
        match self {
            ModelParams::Ou(_) => ModelTag::Ou,
            ModelParams::OuJump(..) => ModelTag::OuJump,
            ModelParams::Bk(_) => ModelTag::Bk,
            ModelParams::Heston(_) => ModelTag::Heston,
            ModelParams::Bates(_) => ModelTag::Bates,
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            ModelParams::Ou(p) => vec![p.theta, p.mu, p.sigma],
            ModelParams::OuJump(p, j) => vec![p.theta, p.mu, p.sigma, j.lambda_j, j.mu_j, j.sigma_j],
            ModelParams::Bk(p) => vec![p.theta, p.alpha, p.sigma],
            ModelParams::Heston(h) => vec![h.mu_s, h.kappa, h.theta_v, h.xi, h.rho],
            ModelParams::Bates(b) => {
                let h = b.heston;
                vec![h.mu_s, h.kappa, h.theta_v, h.xi, h.rho, b.lambda, b.j]
            }
        }
    }

    pub fn from_vec(tag: ModelTag, v: &[f64]) -> Result<Self> {
        let want = tag.param_names().len();
        if v.len() != want {
            return Err(Error::shape(format!(
                "{} expects {want} parameters, got {}",
                tag.as_str(),
                v.len()
            )));
        }
        Ok(match tag {
            ModelTag::Ou => ModelParams::Ou(OuParams::new(v[0], v[1], v[2])?),
            ModelTag::OuJump => ModelParams::OuJump(
                OuParams::new(v[0], v[1], v[2])?,
                JumpParams::new(v[3], v[4], v[5])?,
            ),
            ModelTag::Bk => ModelParams::Bk(BkParams::new(v[0], v[1], v[2])?),
            ModelTag::Heston => ModelParams::Heston(HestonParams::new(v[0], v[1], v[2], v[3], v[4])?),
            ModelTag::Bates => ModelParams::Bates(BatesParams::new(
                HestonParams::new(v[0], v[1], v[2], v[3], v[4])?,
                v[5],
                v[6],
            )?),
        })
    }
}

fn check_grid(dt: f64, n: usize) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::domain(format!("dt must be > 0, got {dt}")));
    }
    if n == 0 {
        return Err(Error::domain("number of steps must be >= 1"));
    }
    Ok(())
}

/// OU path of `n + 1` points starting at `x0`.
pub fn simulate_ou(p: &OuParams, x0: f64, dt: f64, n: usize, src: &RandomSource) -> Result<Path> {
    check_grid(dt, n)?;
    finite("x0", x0)?;
    let mut rng = src.derive(DIFFUSION).rng();
    let sd = p.sigma * dt.sqrt();
    let mut xs = Vec::with_capacity(n + 1);
    let mut x = x0;
    xs.push(x);
    for _ in 0..n {
        let z: f64 = rng.sample(StandardNormal);
        x = x + p.theta * (p.mu - x) * dt + sd * z;
        xs.push(x);
    }
    Ok(Path::scalar(0.0, dt, xs)?.with_seed(*src))
}

/// Simulated OU-with-jump path together with the steps at which a jump fired.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpPath {
    pub path: Path,
    /// Indices `k ≥ 1` of path entries whose increment contains a jump.
    pub jump_steps: Vec<usize>,
}

pub fn simulate_ou_jump(
    p: &OuParams,
    jp: &JumpParams,
    convention: JumpConvention,
    x0: f64,
    dt: f64,
    n: usize,
    src: &RandomSource,
) -> Result<JumpPath> {
    check_grid(dt, n)?;
    finite("x0", x0)?;
    let mut diffusion = src.derive(DIFFUSION).rng();
    let mut trigger = src.derive(JUMP_TRIGGER).rng();
    let mut size = src.derive(JUMP_SIZE).rng();
    let threshold = convention.threshold(jp.lambda_j, dt);
    let sd = p.sigma * dt.sqrt();
    let mut xs = Vec::with_capacity(n + 1);
    let mut jump_steps = Vec::new();
    let mut x = x0;
    xs.push(x);
    for k in 1..=n {
        let z: f64 = diffusion.sample(StandardNormal);
        let gamma: f64 = trigger.sample(StandardNormal);
        let zeta: f64 = size.sample(StandardNormal);
        let mut next = x + p.theta * (p.mu - x) * dt + sd * z;
        if gamma < threshold {
            next += jp.mu_j + jp.sigma_j * zeta;
            jump_steps.push(k);
        }
        x = next;
        xs.push(x);
    }
    Ok(JumpPath { path: Path::scalar(0.0, dt, xs)?.with_seed(*src), jump_steps })
}

/// Black–Karasinski short rate path; the Euler step acts on ln r.
pub fn simulate_bk(p: &BkParams, r0: f64, dt: f64, n: usize, src: &RandomSource) -> Result<Path> {
    check_grid(dt, n)?;
    if !(r0 > 0.0) || !r0.is_finite() {
        return Err(Error::domain(format!("B-K initial rate must be > 0, got {r0}")));
    }
    let mut rng = src.derive(DIFFUSION).rng();
    let sd = p.sigma * dt.sqrt();
    let mut y = r0.ln();
    let mut rs = Vec::with_capacity(n + 1);
    rs.push(r0);
    for _ in 0..n {
        let z: f64 = rng.sample(StandardNormal);
        y += (p.theta - p.alpha * y) * dt + sd * z;
        rs.push(y.exp());
    }
    Ok(Path::scalar(0.0, dt, rs)?.with_seed(*src))
}

/// Output of the stochastic-volatility simulators.
#[derive(Debug, Clone, PartialEq)]
pub struct VolPaths {
    pub log_price: Path,
    /// Truncated variance max(v, 0) at each grid point.
    pub variance: Path,
    pub feller_ok: bool,
    pub warnings: Vec<String>,
    /// Total number of Poisson jumps (always 0 for Heston).
    pub jump_count: u64,
}

impl VolPaths {
    /// Columns (log_price, variance) as one 2-dim path.
    pub fn joint(&self) -> Path {
        Path::zip(
            self.log_price.t0(),
            self.log_price.dt(),
            self.log_price.flat(),
            self.variance.flat(),
        )
        .expect("components share a grid")
    }
}

/// Second Brownian driver with correlation ρ to the first.
#[inline]
pub(crate) fn correlated(z1: f64, z2: f64, rho: f64) -> f64 {
    rho * z1 + (1.0 - rho * rho).max(0.0).sqrt() * z2
}

fn simulate_sv(
    h: &HestonParams,
    jumps: Option<(f64, f64)>,
    s0: f64,
    v0: f64,
    dt: f64,
    n: usize,
    src: &RandomSource,
) -> Result<VolPaths> {
    check_grid(dt, n)?;
    if !(s0 > 0.0) || !s0.is_finite() || !(v0 > 0.0) || !v0.is_finite() {
        return Err(Error::domain(format!("need s0 > 0 and v0 > 0 (s0={s0}, v0={v0})")));
    }
    let mut diffusion = src.derive(DIFFUSION).rng();
    let mut counter = src.derive(JUMP_COUNT).rng();
    let poisson = match jumps {
        Some((lambda, _)) if lambda > 0.0 => Some(
            Poisson::new(lambda * dt).map_err(|e| Error::domain(format!("jump intensity: {e}")))?,
        ),
        _ => None,
    };
    let (drift_extra, log_jump) = match jumps {
        Some((lambda, j)) => (lambda * j, (1.0 - j).ln()),
        None => (0.0, 0.0),
    };
    let sqdt = dt.sqrt();
    let mut ln_s = s0.ln();
    let mut v_raw = v0;
    let mut lp = Vec::with_capacity(n + 1);
    let mut vs = Vec::with_capacity(n + 1);
    let mut jump_count = 0u64;
    lp.push(ln_s);
    vs.push(v0);
    for _ in 0..n {
        let z1: f64 = diffusion.sample(StandardNormal);
        let z2: f64 = diffusion.sample(StandardNormal);
        let w2 = correlated(z1, z2, h.rho);
        let vp = v_raw.max(0.0);
        let sv = vp.sqrt();
        ln_s += (h.mu_s + drift_extra - 0.5 * vp) * dt + sv * sqdt * z1;
        if let Some(pois) = &poisson {
            let k: f64 = pois.sample(&mut counter);
            if k > 0.0 {
                ln_s += k * log_jump;
                jump_count += k as u64;
            }
        }
        v_raw += h.kappa * (h.theta_v - vp) * dt + h.xi * sv * sqdt * w2;
        lp.push(ln_s);
        vs.push(v_raw.max(0.0));
    }
    let feller_ok = h.feller_ok();
    let mut warnings = Vec::new();
    if !feller_ok {
        warnings.push(format!(
            "Feller condition violated: 2*kappa*theta_v/xi^2 = {:.4} <= 1",
            2.0 * h.kappa * h.theta_v / (h.xi * h.xi)
        ));
    }
    Ok(VolPaths {
        log_price: Path::scalar(0.0, dt, lp)?.with_seed(*src),
        variance: Path::scalar(0.0, dt, vs)?.with_seed(*src),
        feller_ok,
        warnings,
        jump_count,
    })
}

/// Heston log-price and variance paths, full truncation for the variance.
pub fn simulate_heston(
    p: &HestonParams,
    s0: f64,
    v0: f64,
    dt: f64,
    n: usize,
    src: &RandomSource,
) -> Result<VolPaths> {
    simulate_sv(p, None, s0, v0, dt, n, src)
}

/// Bates paths: Heston plus drift λj and Poisson-counted jumps ln(1 − j) in ln S.
pub fn simulate_bates(
    p: &BatesParams,
    s0: f64,
    v0: f64,
    dt: f64,
    n: usize,
    src: &RandomSource,
) -> Result<VolPaths> {
    simulate_sv(&p.heston, Some((p.lambda, p.j)), s0, v0, dt, n, src)
}
