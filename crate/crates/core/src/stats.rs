//! Gaussian densities and error metrics.

use crate::error::{Error, Result};
use crate::path::Path;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Density of N(m, s²) at `x`.
pub fn normal_pdf(x: f64, m: f64, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::domain(format!("normal_pdf: standard deviation must be > 0, got {s}")));
    }
    let z = (x - m) / s;
    Ok((-0.5 * z * z).exp() / (s * (2.0 * std::f64::consts::PI).sqrt()))
}

/// Log-density of N(m, s²) at `x`. Caller guarantees `s > 0`.
#[inline]
pub fn ln_normal_pdf(x: f64, m: f64, s: f64) -> f64 {
    let z = (x - m) / s;
    -0.5 * z * z - s.ln() - LN_SQRT_2PI
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Root mean square of elementwise differences between two paths of equal shape.
pub fn rmse(a: &Path, b: &Path) -> Result<f64> {
    if a.len() != b.len() || a.dim() != b.dim() {
        return Err(Error::shape(format!(
            "rmse: paths differ in shape ({}x{} vs {}x{})",
            a.len(),
            a.dim(),
            b.len(),
            b.dim()
        )));
    }
    rmse_slices(a.flat(), b.flat())
}

pub fn rmse_slices(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape(format!("rmse: lengths {} and {} differ", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::shape("rmse: empty input"));
    }
    let ss: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((ss / a.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let inner: f64 = (1..n).map(|i| f(a + i as f64 * h)).sum();
        h * (0.5 * (f(a) + f(b)) + inner)
    }

    #[test]
    fn pdf_at_mode() {
        let v = normal_pdf(0.0, 0.0, 1.0).unwrap();
        assert!((v - 0.398_942_3).abs() < 1e-7);
        for &(m, s) in &[(3.0, 0.5), (-2.0, 7.0)] {
            let v = normal_pdf(m, m, s).unwrap();
            assert!((v - 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * s)).abs() < 1e-15);
        }
    }

    #[test]
    fn pdf_rejects_bad_scale() {
        assert!(matches!(normal_pdf(0.0, 0.0, 0.0), Err(Error::Domain(_))));
        assert!(normal_pdf(0.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn pdf_integrates_to_one() {
        let v = trapezoid(|x| normal_pdf(x, 0.0, 2.0).unwrap(), -20.0, 20.0, 20_000);
        assert!((v - 1.0).abs() < 1e-6, "{v}");
        for &(m, s) in &[(0.3, 0.1), (-4.0, 3.0), (10.0, 0.7), (1.0, 12.0), (-0.5, 1.5)] {
            let v = trapezoid(|x| normal_pdf(x, m, s).unwrap(), m - 10.0 * s, m + 10.0 * s, 20_000);
            assert!((v - 1.0).abs() < 1e-6, "m={m} s={s} -> {v}");
        }
    }

    #[test]
    fn ln_pdf_matches_pdf() {
        let a = ln_normal_pdf(1.3, -0.2, 0.8);
        let b = normal_pdf(1.3, -0.2, 0.8).unwrap().ln();
        assert!((a - b).abs() < 1e-13);
    }

    #[test]
    fn cdf_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        // quadrature of the density from -12 to 1.96
        let q = trapezoid(|x| normal_pdf(x, 0.0, 1.0).unwrap(), -12.0, 1.96, 200_000);
        assert!((q - 0.975_002_1).abs() < 1e-6, "{q}");
        assert!((normal_cdf(1.96) - q).abs() < 1e-7);
    }

    #[test]
    fn cdf_symmetry_and_monotonicity() {
        let mut prev = 0.0;
        let mut x = -8.0;
        while x <= 8.0 {
            let c = normal_cdf(x);
            assert!(c >= prev);
            assert!((c - (1.0 - normal_cdf(-x))).abs() < 1e-12);
            prev = c;
            x += 1e-3;
        }
    }

    #[test]
    fn rmse_examples() {
        let p = Path::scalar(0.0, 1.0, vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(rmse(&p, &p).unwrap(), 0.0);
        let z = Path::scalar(0.0, 1.0, vec![0.0; 3]).unwrap();
        let o = Path::scalar(0.0, 1.0, vec![1.0; 3]).unwrap();
        assert_eq!(rmse(&z, &o).unwrap(), 1.0);
        let a = Path::scalar(0.0, 1.0, vec![0.0, 0.0]).unwrap();
        let b = Path::scalar(0.0, 1.0, vec![3.0, 4.0]).unwrap();
        assert!((rmse(&a, &b).unwrap() - (12.5f64).sqrt()).abs() < 1e-15);
        assert!(matches!(rmse(&a, &p), Err(Error::Shape(_))));
    }

    proptest! {
        #[test]
        fn rmse_symmetric_nonnegative(a in prop::collection::vec(-1e3..1e3f64, 1..50), shift in -5.0..5.0f64) {
            let b: Vec<f64> = a.iter().enumerate().map(|(i, x)| x + shift * (i % 3) as f64).collect();
            let ab = rmse_slices(&a, &b).unwrap();
            let ba = rmse_slices(&b, &a).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab == 0.0, a == b);
        }
    }
}
