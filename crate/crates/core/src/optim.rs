//! Bounded minimisation: projected L-BFGS with central finite-difference
//! gradients, falling back to a clamped Nelder–Mead simplex when the line
//! search cannot make progress.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::shape("bounds: lower and upper differ in length"));
        }
        if let Some(i) = (0..lower.len()).find(|&i| !(lower[i] < upper[i])) {
            return Err(Error::domain(format!(
                "bounds: lower[{i}] = {} must be < upper[{i}] = {}",
                lower[i], upper[i]
            )));
        }
        Ok(Self { lower, upper })
    }

    /// The same interval for every one of `n` parameters.
    pub fn uniform(n: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower; n], vec![upper; n])
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.len() && x.iter().enumerate().all(|(i, &v)| v >= self.lower[i] && v <= self.upper[i])
    }

    pub fn project(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[i], self.upper[i]);
        }
    }
}

#[derive(Debug, Clone)]
pub struct MinimizeOptions {
    pub max_iterations: usize,
    /// Number of correction pairs kept by L-BFGS.
    pub memory: usize,
    /// Convergence threshold on the sup-norm of the projected gradient.
    pub grad_tol: f64,
    /// Convergence threshold on the relative decrease of the objective.
    pub f_tol: f64,
    /// Relative finite-difference step.
    pub fd_step: f64,
    pub max_simplex_evaluations: usize,
    pub record_trace: bool,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            memory: 10,
            grad_tol: 1e-6,
            f_tol: 1e-12,
            fd_step: 1e-5,
            max_simplex_evaluations: 4000,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    QuasiNewton,
    SimplexFallback,
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub stage: Stage,
    pub trace: Vec<(Vec<f64>, f64)>,
}

struct Counted<'a, F> {
    f: &'a F,
    evaluations: usize,
}

impl<F: Fn(&[f64]) -> f64> Counted<'_, F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evaluations += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn gradient<F: Fn(&[f64]) -> f64>(
    obj: &mut Counted<'_, F>,
    x: &[f64],
    fx: f64,
    bounds: &Bounds,
    rel_step: f64,
) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let h = rel_step * x[i].abs().max(1.0);
        let up = x[i] + h <= bounds.upper[i];
        let down = x[i] - h >= bounds.lower[i];
        g[i] = if up && down {
            probe[i] = x[i] + h;
            let fp = obj.eval(&probe);
            probe[i] = x[i] - h;
            let fm = obj.eval(&probe);
            (fp - fm) / (2.0 * h)
        } else if up {
            probe[i] = x[i] + h;
            (obj.eval(&probe) - fx) / h
        } else {
            probe[i] = x[i] - h;
            (fx - obj.eval(&probe)) / h
        };
        if !g[i].is_finite() {
            g[i] = 0.0;
        }
        probe[i] = x[i];
    }
    g
}

/// Variables pinned at a bound with the gradient pushing outward.
fn active_set(x: &[f64], g: &[f64], bounds: &Bounds) -> Vec<bool> {
    (0..x.len())
        .map(|i| (x[i] <= bounds.lower[i] && g[i] > 0.0) || (x[i] >= bounds.upper[i] && g[i] < 0.0))
        .collect()
}

fn two_loop(g: &[f64], free: &[bool], history: &VecDeque<(Vec<f64>, Vec<f64>)>) -> Vec<f64> {
    let mask = |v: &[f64]| -> Vec<f64> { v.iter().zip(free).map(|(x, &f)| if f { *x } else { 0.0 }).collect() };
    let mut q = mask(g);
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y) in history.iter().rev() {
        let (s, y) = (mask(s), mask(y));
        let sy = dot(&s, &y);
        if sy <= 1e-300 {
            alphas.push(0.0);
            continue;
        }
        let a = dot(&s, &q) / sy;
        q.iter_mut().zip(&y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    let gamma = history
        .back()
        .map(|(s, y)| {
            let (s, y) = (mask(s), mask(y));
            let yy = dot(&y, &y);
            if yy > 0.0 && dot(&s, &y) > 0.0 {
                dot(&s, &y) / yy
            } else {
                1.0
            }
        })
        .unwrap_or(1.0);
    q.iter_mut().for_each(|v| *v *= gamma);
    for ((s, y), a) in history.iter().zip(alphas.iter().rev()) {
        let (s, y) = (mask(s), mask(y));
        let sy = dot(&s, &y);
        if sy <= 1e-300 {
            continue;
        }
        let b = dot(&y, &q) / sy;
        q.iter_mut().zip(&s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Minimise `f` within `bounds` starting from `x0`.
pub fn minimize<F: Fn(&[f64]) -> f64>(
    f: F,
    x0: &[f64],
    bounds: &Bounds,
    opts: &MinimizeOptions,
) -> Result<Minimum> {
    if x0.len() != bounds.len() {
        return Err(Error::shape("minimize: start point and bounds differ in length"));
    }
    if !bounds.contains(x0) {
        return Err(Error::Init(format!("start point {x0:?} lies outside the bounds")));
    }
    let mut obj = Counted { f: &f, evaluations: 0 };
    let mut x = x0.to_vec();
    let mut fx = obj.eval(&x);
    if !fx.is_finite() {
        return Err(Error::Init(format!("objective is not finite at the start point {x0:?}")));
    }
    let mut trace = Vec::new();
    if opts.record_trace {
        trace.push((x.clone(), fx));
    }
    let mut history: VecDeque<(Vec<f64>, Vec<f64>)> = VecDeque::with_capacity(opts.memory);
    let mut g = gradient(&mut obj, &x, fx, bounds, opts.fd_step);
    let mut converged = false;
    let mut stalled = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        let active = active_set(&x, &g, bounds);
        let pg_norm = g
            .iter()
            .zip(&active)
            .map(|(gi, &a)| if a { 0.0 } else { gi.abs() })
            .fold(0.0, f64::max);
        if pg_norm < opts.grad_tol {
            converged = true;
            break;
        }
        iterations += 1;
        let free: Vec<bool> = active.iter().map(|a| !a).collect();
        let mut d = two_loop(&g, &free, &history);
        if dot(&d, &g) >= 0.0 {
            history.clear();
            d = g.iter().zip(&free).map(|(gi, &fr)| if fr { -gi } else { 0.0 }).collect();
        }
        let mut step = if history.is_empty() {
            let dn = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            (1.0 / dn).min(1.0)
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..60 {
            let mut trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            bounds.project(&mut trial);
            let moved: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            let decrease = dot(&g, &moved);
            if moved.iter().all(|m| *m == 0.0) {
                break;
            }
            let ft = obj.eval(&trial);
            if ft.is_finite() && ft <= fx + 1e-4 * decrease.min(0.0) && ft <= fx {
                accepted = Some((trial, ft));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            stalled = true;
            break;
        };
        let g_new = gradient(&mut obj, &x_new, f_new, bounds, opts.fd_step);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        if dot(&s, &y) > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y));
        }
        let rel = (fx - f_new).abs() / fx.abs().max(1.0);
        x = x_new;
        fx = f_new;
        g = g_new;
        if opts.record_trace {
            trace.push((x.clone(), fx));
        }
        if rel < opts.f_tol {
            converged = true;
            break;
        }
    }

    let mut stage = Stage::QuasiNewton;
    if stalled && !converged {
        // A stalled line search at a point with non-negligible gradient: polish with the simplex.
        let polished = nelder_mead(&mut obj, &x, fx, bounds, opts.max_simplex_evaluations);
        if polished.1 <= fx {
            x = polished.0;
            fx = polished.1;
        }
        converged = polished.2;
        stage = Stage::SimplexFallback;
        if opts.record_trace {
            trace.push((x.clone(), fx));
        }
    }

    Ok(Minimum { x, f: fx, iterations, evaluations: obj.evaluations, converged, stage, trace })
}

fn nelder_mead<F: Fn(&[f64]) -> f64>(
    obj: &mut Counted<'_, F>,
    x0: &[f64],
    f0: f64,
    bounds: &Bounds,
    max_evals: usize,
) -> (Vec<f64>, f64, bool) {
    let n = x0.len();
    let start = obj.evaluations;
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(x0.to_vec(), f0)];
    for i in 0..n {
        let mut v = x0.to_vec();
        let width = bounds.upper[i] - bounds.lower[i];
        let h = (0.05 * x0[i].abs().max(1e-3)).min(0.25 * width);
        v[i] = if v[i] + h <= bounds.upper[i] { v[i] + h } else { v[i] - h };
        let fv = obj.eval(&v);
        simplex.push((v, fv));
    }
    let clamp = |mut v: Vec<f64>| {
        bounds.project(&mut v);
        v
    };
    let mut converged = false;
    while obj.evaluations - start < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if (worst - best).abs() <= 1e-12 * best.abs().max(1.0) {
            converged = true;
            break;
        }
        let centroid: Vec<f64> =
            (0..n).map(|j| simplex[..n].iter().map(|(v, _)| v[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> {
            clamp(centroid.iter().zip(&simplex[n].0).map(|(c, w)| c + t * (c - w)).collect())
        };
        let xr = along(1.0);
        let fr = obj.eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = obj.eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst {
                let xc = along(0.5);
                let fc = obj.eval(&xc);
                (xc, fc)
            } else {
                let xc = along(-0.5);
                let fc = obj.eval(&xc);
                (xc, fc)
            };
            if fc < worst.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let b = simplex[0].0.clone();
                for item in simplex.iter_mut().skip(1) {
                    let v = clamp(b.iter().zip(&item.0).map(|(bi, vi)| bi + 0.5 * (vi - bi)).collect());
                    let fv = obj.eval(&v);
                    *item = (v, fv);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, f) = simplex.swap_remove(0);
    (x, f, converged)
}
