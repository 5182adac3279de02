//! Scalar special functions.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF, accurate in both tails.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Inverse logit.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn log1p_exp(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else if x < -35.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// `E[max(0, mu + sigma Z)]` for standard normal `Z`.
pub fn relu_gaussian_mean(mu: f64, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return mu.max(0.0);
    }
    let t = mu / sigma;
    sigma * norm_pdf(t) + mu * norm_cdf(t)
}

pub(crate) const TWO_PI: f64 = 2.0 * PI;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_reference_values() {
        assert_eq!(norm_cdf(0.0), 0.5);
        assert!((norm_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-15);
        // Far tail keeps relative accuracy.
        let tail = norm_cdf(-10.0);
        assert!((tail / 7.619_853_024_160_527e-24 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn logistic_is_symmetric_and_bounded() {
        for &x in &[-800.0, -30.0, -1.0, 0.0, 2.5, 40.0, 800.0] {
            let p = logistic(x);
            assert!((0.0..=1.0).contains(&p));
            assert!((p + logistic(-x) - 1.0).abs() < 1e-15);
        }
        assert!((logistic(3f64.ln()) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn relu_mean_matches_half_normal() {
        assert!((relu_gaussian_mean(0.0, 1.0) - FRAC_1_SQRT_2PI).abs() < 1e-16);
        assert_eq!(relu_gaussian_mean(2.0, 0.0), 2.0);
        assert_eq!(relu_gaussian_mean(-2.0, 0.0), 0.0);
    }
}
