//! Special functions used by the first-passage laws.

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// Inverse of `erfc` on (0, 2), by safeguarded Newton iteration.
pub fn erfc_inv(y: f64) -> f64 {
    assert!(y > 0.0 && y < 2.0, "erfc_inv domain is (0, 2), got {y}");
    // bracket: erfc is decreasing
    let (mut lo, mut hi) = (-10.0_f64, 10.0_f64);
    let mut x = 0.0;
    for _ in 0..200 {
        let f = erfc(x) - y;
        if f > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = -2.0 / std::f64::consts::PI.sqrt() * (-x * x).exp();
        let mut next = x - f / d;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-16 * (1.0 + x.abs()) {
            return next;
        }
        x = next;
    }
    x
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erfc_inverse_round_trip() {
        for &y in &[1e-6, 0.01, 0.5, 1.0, 1.5, 1.99] {
            let x = erfc_inv(y);
            assert!((erfc(x) - y).abs() < 1e-14 * y.max(1e-3), "y={y}");
        }
        assert!((erfc_inv(0.5) - 0.476_936_276_204_47).abs() < 1e-12);
    }
}
