//! Scalar numerics: special functions, adaptive quadrature and a
//! golden-section maximizer.
//!
//! Gamma-family functions come from `statrs`; the rest is small enough to
//! keep local.

use crate::error::{Error, Result};

pub use statrs::consts::EULER_MASCHERONI;
pub use statrs::function::gamma::{digamma, ln_gamma};

/// `ln(n!)`.
pub fn ln_factorial(n: usize) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

/// Result of a numerical integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub abs_error: f64,
}

/// Adaptive Simpson integration of `f` over the finite interval `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Quadrature {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut err = 0.0;
    let value = simpson_step(&f, a, b, fa, fm, fb, whole, tol, 50, &mut err);
    Quadrature {
        value,
        abs_error: err,
    }
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    err: &mut f64,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        *err += delta.abs() / 15.0;
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, err)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, err)
}

/// Integrates `f` over `[a, ∞)` through the map `x = a + u / (1 - u)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, tol: f64) -> Quadrature {
    let g = |u: f64| {
        if u >= 1.0 {
            return 0.0;
        }
        let w = 1.0 - u;
        let v = f(a + u / w) / (w * w);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate(g, 0.0, 1.0, tol)
}

/// Location and value of a maximum found by golden-section search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum {
    pub argmax: f64,
    pub value: f64,
    pub iterations: usize,
}

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
///
/// Stops once the bracket is narrower than `x_tol` and the bracketing
/// function values agree to within `f_tol`.
pub fn golden_section_max<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    x_tol: f64,
    f_tol: f64,
    max_iter: usize,
) -> Result<Maximum> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "golden-section bracket [{lo}, {hi}] is empty"
        )));
    }
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for it in 0..max_iter {
        if (b - a).abs() < x_tol && (fc - fd).abs() < f_tol {
            let (argmax, value) = if fc >= fd { (c, fc) } else { (d, fd) };
            return Ok(Maximum {
                argmax,
                value,
                iterations: it,
            });
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    Err(Error::NonConvergence(format!(
        "golden-section bracket [{a:e}, {b:e}] after {max_iter} iterations, f = ({fc}, {fd})"
    )))
}

/// Largest root of `u / k = ln u` for `k > e`, by bisection on the branch
/// `u > k` where `u / k - ln u` is increasing. Returns the right end of the
/// final bracket, so the function is non-negative at the returned point.
pub(crate) fn upper_root_exp_vs_identity(k: f64) -> Option<f64> {
    let g = |u: f64| u / k - u.ln();
    let mut lo = k;
    if g(lo) >= 0.0 {
        return None;
    }
    let mut hi = 2.0 * k;
    while g(hi) <= 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn simpson_polynomial_and_gaussian() {
        let q = integrate(|x| x * x, 0.0, 3.0, 1e-12);
        assert_abs_diff_eq!(q.value, 9.0, epsilon = 1e-10);
        let q = integrate_to_infinity(|x| (-x * x).exp(), 0.0, 1e-10);
        assert_abs_diff_eq!(q.value, std::f64::consts::PI.sqrt() / 2.0, epsilon = 1e-8);
    }

    #[test]
    fn log_exponential_integral_is_minus_gamma() {
        // ∫_0^∞ ln v e^{-v} dv = -γ
        let q = integrate_to_infinity(|v| v.ln() * (-v).exp(), 0.0, 1e-10);
        assert_abs_diff_eq!(q.value, -EULER_MASCHERONI, epsilon = 1e-6);
    }

    #[test]
    fn golden_section_finds_parabola_peak() {
        let m = golden_section_max(|x| -(x - 1.3).powi(2) + 2.0, -5.0, 5.0, 1e-9, 1e-12, 500)
            .unwrap();
        assert_abs_diff_eq!(m.argmax, 1.3, epsilon = 1e-6);
        assert_abs_diff_eq!(m.value, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn golden_section_rejects_empty_bracket() {
        assert!(golden_section_max(|x| x, 1.0, 1.0, 1e-6, 1e-6, 10).is_err());
    }

    #[test]
    fn upper_root_matches_definition() {
        assert!(upper_root_exp_vs_identity(2.0).is_none());
        let u = upper_root_exp_vs_identity(6.0).unwrap();
        assert!((u / 6.0).exp() >= u);
        assert_abs_diff_eq!((u / 6.0).exp(), u, epsilon = 1e-9);
        assert!(u > 16.0 && u < 18.0);
    }

    #[test]
    fn gamma_family_spot_values() {
        assert_abs_diff_eq!(digamma(1.0), -EULER_MASCHERONI, epsilon = 1e-12);
        assert_abs_diff_eq!(digamma(2.0), 1.0 - EULER_MASCHERONI, epsilon = 1e-12);
        assert_abs_diff_eq!(ln_factorial(5), 120f64.ln(), epsilon = 1e-12);
    }
}
