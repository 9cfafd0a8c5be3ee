//! Utility functions and the closed-form per-slot congestion controller.

use crate::{Error, Result};

/// A concave utility over a rate expressed in utility units.
pub trait Utility: Send + Sync {
    fn value(&self, a: f64) -> f64;
    fn derivative(&self, a: f64) -> f64;
    fn second_derivative(&self, a: f64) -> f64;
    /// Inverse of the derivative. May return `f64::INFINITY` for
    /// arguments at or below the derivative's infimum.
    fn inverse_derivative(&self, y: f64) -> f64;
}

/// Proportional-fairness utility `ln(offset + a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogUtility {
    pub offset: f64,
}

impl Default for LogUtility {
    fn default() -> Self {
        Self { offset: 0.001 }
    }
}

impl Utility for LogUtility {
    fn value(&self, a: f64) -> f64 {
        (self.offset + a).ln()
    }

    fn derivative(&self, a: f64) -> f64 {
        1.0 / (self.offset + a)
    }

    fn second_derivative(&self, a: f64) -> f64 {
        -1.0 / (self.offset + a).powi(2)
    }

    fn inverse_derivative(&self, y: f64) -> f64 {
        if y <= 0.0 {
            f64::INFINITY
        } else {
            1.0 / y - self.offset
        }
    }
}

/// Per-slot congestion controller.
///
/// Rates and queues are converted into utility units (`unit` bits/s per
/// utility unit, `unit` bits per queue unit) before applying the
/// closed form, so the controller maximizes
/// `phi U(a/unit) - (qhat/unit)/tau * a/unit` over `[0, a_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CongestionController {
    pub phi: f64,
    pub tau: f64,
    pub a_max: f64,
    pub unit: f64,
}

impl CongestionController {
    pub fn optimal_rate<U: Utility + ?Sized>(&self, utility: &U, qhat: f64) -> f64 {
        let price = qhat / self.unit / (self.phi * self.tau);
        let a = optimal_rate(price, self.a_max / self.unit, utility);
        a * self.unit
    }
}

/// `min(U'^-1(price), a_max)` clamped at zero, all in utility units.
pub fn optimal_rate<U: Utility + ?Sized>(price: f64, a_max: f64, utility: &U) -> f64 {
    utility.inverse_derivative(price).min(a_max).max(0.0)
}

/// Numerical min and max of `-U''` over an evenly spaced grid of
/// `[lo, hi]`, by central differences.
pub fn curvature_bounds<U: Utility + ?Sized>(
    utility: &U,
    lo: f64,
    hi: f64,
    points: usize,
) -> Result<(f64, f64)> {
    if points < 2 || !(hi > lo) {
        return Err(Error::domain("curvature grid needs >= 2 points on a nonempty interval"));
    }
    let mut psi = f64::INFINITY;
    let mut big_psi = f64::NEG_INFINITY;
    for i in 0..points {
        let a = lo + (hi - lo) * i as f64 / (points - 1) as f64;
        let h = 1e-5 * a.abs().max(1.0);
        let c = -(utility.value(a + h) - 2.0 * utility.value(a) + utility.value(a - h)) / (h * h);
        // rounding floor of the second difference
        let tol = 16.0 * f64::EPSILON * utility.value(a).abs().max(1.0) / (h * h);
        if !(c > tol) {
            return Err(Error::NotConcave { at: a, curvature: c });
        }
        psi = psi.min(c);
        big_psi = big_psi.max(c);
    }
    Ok((psi, big_psi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    struct Quadratic;
    impl Utility for Quadratic {
        fn value(&self, a: f64) -> f64 {
            -0.5 * a * a
        }
        fn derivative(&self, a: f64) -> f64 {
            -a
        }
        fn second_derivative(&self, _: f64) -> f64 {
            -1.0
        }
        fn inverse_derivative(&self, y: f64) -> f64 {
            -y
        }
    }

    struct Linear;
    impl Utility for Linear {
        fn value(&self, a: f64) -> f64 {
            2.0 * a + 1.0
        }
        fn derivative(&self, _: f64) -> f64 {
            2.0
        }
        fn second_derivative(&self, _: f64) -> f64 {
            0.0
        }
        fn inverse_derivative(&self, _: f64) -> f64 {
            f64::NAN
        }
    }

    #[test]
    fn optimal_rate_cases() {
        let u = LogUtility::default();
        assert_eq!(optimal_rate(0.0, 3.0, &u), 3.0);
        assert!((optimal_rate(2.0, 3.0, &u) - 0.499).abs() < 1e-12);
        assert_eq!(optimal_rate(1e6, 3.0, &u), 0.0);
        assert!(optimal_rate(999.0, 3.0, &u) < 1e-5);
    }

    #[test]
    fn controller_scales_units() {
        let c = CongestionController {
            phi: 5.0,
            tau: 1e-3,
            a_max: 3e9,
            unit: 1e9,
        };
        let u = LogUtility::default();
        assert_eq!(c.optimal_rate(&u, 0.0), 3e9);
        // qhat/unit/(phi tau) = 2  =>  a = 0.499 units
        let qhat = 2.0 * 5.0 * 1e-3 * 1e9;
        assert!((c.optimal_rate(&u, qhat) - 0.499e9).abs() < 1e-3);
    }

    #[test]
    fn curvature_bounds_cases() {
        let (lo, hi) = curvature_bounds(&Quadratic, -1.0, 1.0, 11).unwrap();
        assert!((lo - 1.0).abs() < 1e-4 && (hi - 1.0).abs() < 1e-4);

        let (psi, big_psi) = curvature_bounds(&LogUtility::default(), 0.0, 1.0, 101).unwrap();
        assert!((big_psi / 1e6 - 1.0).abs() < 1e-3, "Psi = {big_psi}");
        assert!((psi - 1.0 / 1.001f64.powi(2)).abs() < 1e-3, "psi = {psi}");

        assert!(matches!(
            curvature_bounds(&Linear, 0.0, 1.0, 5),
            Err(Error::NotConcave { .. })
        ));
        assert!(curvature_bounds(&Quadratic, 0.0, 1.0, 1).is_err());
    }

    #[test]
    fn log_utility_satisfies_assumptions() {
        let u = LogUtility::default();
        for i in 0..50 {
            let a = i as f64 * 0.06;
            assert!(u.derivative(a) > 0.0 && u.second_derivative(a) < 0.0);
            let h = 1e-6;
            let fd = (u.value(a + h) - u.value(a - h)) / (2.0 * h);
            assert!((fd / u.derivative(a) - 1.0).abs() < 1e-6);
            let back = u.inverse_derivative(u.derivative(a));
            assert!((back - a).abs() <= 1e-9 * a.max(1e-3));
        }
    }

    proptest! {
        #[test]
        fn closed_form_beats_grid_search(price in 0.0f64..2000.0, phi in 0.5f64..50.0) {
            let u = LogUtility::default();
            let a_max = 3.0;
            // phi U(a) - (phi * price) a, so the optimum is U'^-1(price)
            let obj = |a: f64| phi * u.value(a) - phi * price * a;
            let star = optimal_rate(price, a_max, &u);
            let n = 20_000;
            let best = (0..=n)
                .map(|i| obj(a_max * i as f64 / n as f64))
                .fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(obj(star) >= best - 1e-6);
        }

        #[test]
        fn monotone_in_queue_and_phi(q1 in 0.0f64..1e8, dq in 0.0f64..1e8, phi in 0.5f64..40.0, dphi in 0.0f64..40.0) {
            let u = LogUtility::default();
            let c = CongestionController { phi, tau: 1e-3, a_max: 3e9, unit: 1e9 };
            prop_assert!(c.optimal_rate(&u, q1 + dq) <= c.optimal_rate(&u, q1));
            let c2 = CongestionController { phi: phi + dphi, ..c };
            prop_assert!(c2.optimal_rate(&u, q1) >= c.optimal_rate(&u, q1));
        }
    }
}
