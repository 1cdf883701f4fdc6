//! Standard normal density and tail functions with full relative accuracy in both tails.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Φ(x).
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// 1 − Φ(x), computed without cancellation.
pub fn sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Φ(b) − Φ(a) for a ≤ b, choosing the tail that avoids cancellation.
pub fn mass(a: f64, b: f64) -> f64 {
    debug_assert!(a <= b);
    if a >= 0.0 {
        sf(a) - sf(b)
    } else if b <= 0.0 {
        cdf(b) - cdf(a)
    } else {
        1.0 - sf(b) - cdf(a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tails_are_complementary() {
        for &x in &[-3.0, -0.5, 0.0, 0.7, 2.5] {
            assert!((cdf(x) + sf(x) - 1.0).abs() < 1e-15);
        }
        assert_eq!(cdf(0.0), 0.5);
    }

    #[test]
    fn far_tail_keeps_relative_accuracy() {
        // Mills ratio asymptote: sf(x) ≈ pdf(x)/x · (1 − 1/x² + 3/x⁴)
        let x = 20.0;
        let approx = pdf(x) / x * (1.0 - 1.0 / (x * x) + 3.0 / x.powi(4) - 15.0 / x.powi(6));
        assert!((sf(x) / approx - 1.0).abs() < 1e-6);
        assert!(sf(x) > 0.0);
    }

    #[test]
    fn interval_mass_matches_difference() {
        assert!((mass(-1.0, 1.0) - 0.682_689_492_137_085_9).abs() < 1e-15);
        assert!((mass(9.0, 9.5) - (sf(9.0) - sf(9.5))).abs() < 1e-30);
        assert!(mass(9.0, 9.5) > 0.0);
    }
}
