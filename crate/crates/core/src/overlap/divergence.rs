use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::link::{Assumption, LinkKind, LinkSpec};
use super::owens_t::owens_t;
use crate::error::{Error, Result};
use crate::quadrature::{gauss_hermite, gaussian_expectation_adaptive};
use crate::special::norm_cdf;

/// Largest inner propensity mean admitted under the propensity reading.
pub const PROPENSITY_CLAMP: f64 = 1.0 - 1e-12;
/// Above this `|b|` kinked links switch the outer integral from
/// Gauss-Hermite to adaptive Gauss-Kronrod split at the kinks.
const KINK_SWITCH: f64 = 0.9;
const ADAPTIVE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig {
    pub outer_nodes: usize,
    pub inner_nodes: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            outer_nodes: 128,
            inner_nodes: 128,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.outer_nodes >= 8 && self.inner_nodes >= 8 {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "quadrature needs at least 8 nodes per level, got {} x {}",
                self.outer_nodes, self.inner_nodes
            )))
        }
    }
}

/// A quadrature divergence together with the number of outer nodes whose
/// inner propensity mean had to be clamped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceEval {
    pub value: f64,
    pub clamped: usize,
}

fn check_b(b: f64) -> Result<f64> {
    if b.is_finite() && b.abs() <= 1.0 + 1e-12 {
        Ok(b.abs().min(1.0))
    } else {
        Err(Error::invalid(format!("b must lie in [-1, 1], got {b}")))
    }
}

/// `O(gamma'X)` for `b = beta'gamma` as the nested expectation
/// `g(|b|) = E_Z[f(E_Z'[h(|b| Z + sqrt(1 - b^2) Z')])]`.
///
/// Under the density-ratio reading `h` is divided by `E[h(Z)]` and
/// `f(t) = t^2`; under the propensity reading
/// `f(t) = (1 - pi1) / pi1^2 * t^2 / (1 - t)`. `pi1` is ignored for the
/// density-ratio reading.
pub fn overlap_divergence_quadrature(b: f64, link: &LinkSpec, pi1: f64, quad: &QuadratureConfig) -> Result<f64> {
    let eval = overlap_divergence_quadrature_counted(b, link, pi1, quad)?;
    if eval.clamped > 0 {
        log::warn!(
            "{} inner propensity means clamped at 1 - 1e-12 (b = {b})",
            eval.clamped
        );
    }
    Ok(eval.value)
}

pub fn overlap_divergence_quadrature_counted(
    b: f64,
    link: &LinkSpec,
    pi1: f64,
    quad: &QuadratureConfig,
) -> Result<DivergenceEval> {
    link.validate_ratio()?;
    quad.validate()?;
    let u = check_b(b)?;
    let sigma = (1.0 - u * u).max(0.0).sqrt();
        let (norm, scale) = match link.assumption {
        Assumption::DensityRatio => (link.standard_mean(), 0.0),
        Assumption::Propensity => {
            if !(pi1 > 0.0 && pi1 < 1.0) {
                return Err(Error::invalid(format!("pi1 must lie in (0, 1), got {pi1}")));
            }
            (1.0, (1.0 - pi1) / (pi1 * pi1))
        }
    };
    let mut clamped = 0usize;
    let mut f = |z: f64| {
        let t = link.gaussian_mean(u * z, sigma, quad.inner_nodes) / norm;
        match link.assumption {
            Assumption::DensityRatio => t * t,
            Assumption::Propensity => {
                let t = if t > PROPENSITY_CLAMP {
                    clamped += 1;
                    PROPENSITY_CLAMP
                } else {
                    t
                };
                scale * t * t / (1.0 - t)
            }
        }
    };
    let value = if !link.is_smooth() && u > KINK_SWITCH {
        let breaks: Vec<f64> = link.kinks().iter().map(|k| k / u).collect();
        gaussian_expectation_adaptive(&mut f, &breaks, ADAPTIVE_TOL)
    } else {
        gauss_hermite(quad.outer_nodes).expect(&mut f)
    };
    Ok(DivergenceEval { value, clamped })
}

/// Indicator link `1{z <= z0}`:
/// `(Phi(z0) - 2 T(z0, sqrt((1 - b^2) / (1 + b^2)))) / Phi(z0)^2`.
pub fn overlap_divergence_indicator(z0: f64, b: f64) -> f64 {
    let w = (b * b).min(1.0);
    let phi = norm_cdf(z0);
    (phi - 2.0 * owens_t(z0, ((1.0 - w) / (1.0 + w)).sqrt())) / (phi * phi)
}

/// ReLU link: `sqrt(1 - w^2) + (pi / 2) w + w asin(w)` with `w = b^2`.
pub fn overlap_divergence_relu(b: f64) -> f64 {
    let w = (b * b).min(1.0);
    (1.0 - w * w).sqrt() + FRAC_PI_2 * w + w * w.asin()
}

/// Exponential tilt `exp(s z)`: `exp(b^2 s^2)`.
pub fn overlap_divergence_exp_tilt(s: f64, b: f64) -> f64 {
    (b * b * s * s).exp()
}

/// Closed form for the density-ratio links that have one.
pub fn overlap_divergence_closed_form(b: f64, link: &LinkSpec) -> Option<f64> {
    if link.assumption != Assumption::DensityRatio {
        return None;
    }
    match link.kind {
        LinkKind::Indicator { z0 } => Some(overlap_divergence_indicator(z0, b)),
        LinkKind::Relu => Some(overlap_divergence_relu(b)),
        LinkKind::ExpTilt { s } => Some(overlap_divergence_exp_tilt(s, b)),
        _ => None,
    }
}

/// Histogram estimate of `E_control[(dP_treated / dP_control)^2]` on
/// `bins` equal-mass bins of the control sample, the outer two open-ended.
/// Returns `+inf` when no treated score falls inside the control range.
pub fn overlap_divergence_empirical(control: &[f64], treated: &[f64], bins: usize) -> Result<f64> {
    if control.is_empty() || treated.is_empty() {
        return Err(Error::invalid("both samples must be nonempty"));
    }
    if bins < 1 {
        return Err(Error::invalid("at least one bin is required"));
    }
    if control.iter().chain(treated).any(|v| !v.is_finite()) {
        return Err(Error::invalid("scores must be finite"));
    }
    let mut sorted = control.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    if treated.iter().all(|&t| t < lo || t > hi) {
        return Ok(f64::INFINITY);
    }
    let n0 = sorted.len();
    let mut edges: Vec<f64> = (1..bins).map(|k| sorted[(k * n0 / bins).min(n0 - 1)]).collect();
    edges.dedup();
    // Bin k holds (edges[k-1], edges[k]].
    let bin_of = |v: f64| edges.partition_point(|&e| e < v);
    let mut c = vec![0.0; edges.len() + 1];
    let mut t = vec![0.0; edges.len() + 1];
    for &v in control {
        c[bin_of(v)] += 1.0;
    }
    for &v in treated {
        t[bin_of(v)] += 1.0;
    }
    let last = c.len() - 1;
    if c[last] == 0.0 && last > 0 {
        t[last - 1] += t[last];
        t[last] = 0.0;
    }
    let (nc, nt) = (n0 as f64, treated.len() as f64);
    let mut total = 0.0;
    for k in 0..c.len() {
        if c[k] > 0.0 {
            let (pc, pt) = (c[k] / nc, t[k] / nt);
            total += pt * pt / pc;
        } else if t[k] > 0.0 {
            return Ok(f64::INFINITY);
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid() -> Vec<f64> {
        (0..=10).map(|k| k as f64 / 10.0).collect()
    }

    #[test]
    fn indicator_closed_form_values() {
        assert!((overlap_divergence_indicator(0.0, 0.0) - 1.0).abs() < 1e-14);
        assert!((overlap_divergence_indicator(0.0, 1.0) - 2.0).abs() < 1e-14);
        assert!((overlap_divergence_indicator(0.0, 0.5f64.sqrt()) - 4.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn relu_closed_form_values() {
        assert!((overlap_divergence_relu(0.0) - 1.0).abs() < 1e-15);
        assert!((overlap_divergence_relu(1.0) - PI).abs() < 1e-15);
        let expect = 0.75f64.sqrt() + PI / 4.0 + 0.5 * 0.5f64.asin();
        assert!((overlap_divergence_relu(0.5f64.sqrt()) - expect).abs() < 1e-15);
        assert!((expect - 1.913_223_0).abs() < 1e-7);
    }

    #[test]
    fn quadrature_matches_closed_forms() {
        let q = QuadratureConfig::default();
        for link in [LinkSpec::indicator(0.0), LinkSpec::indicator(-0.7), LinkSpec::relu(), LinkSpec::exp_tilt(1.0)] {
            for b in grid() {
                let quad = overlap_divergence_quadrature(b, &link, 0.5, &q).unwrap();
                let closed = overlap_divergence_closed_form(b, &link).unwrap();
                assert!((quad - closed).abs() < 1e-8, "{link:?} b={b}: {quad} vs {closed}");
            }
        }
        let v = overlap_divergence_quadrature(0.5, &LinkSpec::exp_tilt(1.0), 0.5, &q).unwrap();
        assert!((v - 1.284_025_416_687_741_5).abs() < 1e-8);
    }

    #[test]
    fn perfect_overlap_endpoint() {
        let q = QuadratureConfig::default();
        for link in [LinkSpec::indicator(0.3), LinkSpec::relu(), LinkSpec::exp_tilt(2.0), LinkSpec::logistic().with_assumption(Assumption::DensityRatio)] {
            assert!((overlap_divergence_quadrature(0.0, &link, 0.5, &q).unwrap() - 1.0).abs() < 1e-12);
        }
        for (a, s) in [(0.0, 1.0), (0.8, 2.5), (-1.0, 4.0)] {
            let link = LinkSpec::logistic_affine(a, s, Assumption::Propensity);
            let pi1 = link.standard_mean();
            let v = overlap_divergence_quadrature(0.0, &link, pi1, &q).unwrap();
            assert!((v - 1.0).abs() < 1e-10, "{a} {s}: {v}");
        }
    }

    #[test]
    fn symmetric_and_increasing() {
        let q = QuadratureConfig::default();
        let logistic = LinkSpec::logistic();
        let pi1 = logistic.standard_mean();
        for link in [logistic, LinkSpec::indicator(0.0), LinkSpec::relu(), LinkSpec::exp_tilt(1.0)] {
            let vals: Vec<f64> = grid()
                .iter()
                .map(|&b| overlap_divergence_quadrature(b, &link, pi1, &q).unwrap())
                .collect();
            for b in grid() {
                let plus = overlap_divergence_quadrature(b, &link, pi1, &q).unwrap();
                let minus = overlap_divergence_quadrature(-b, &link, pi1, &q).unwrap();
                assert_eq!(plus, minus);
            }
            for k in 1..vals.len() {
                assert!(vals[k] - vals[k - 1] > 1e-9, "{link:?} at {k}: {vals:?}");
            }
        }
    }

    #[test]
    fn inadmissible_pairs_are_rejected() {
        let q = QuadratureConfig::default();
        let bad = LinkSpec::relu().with_assumption(Assumption::Propensity);
        assert!(matches!(overlap_divergence_quadrature(0.3, &bad, 0.5, &q), Err(Error::InvalidLink(_))));
        assert!(overlap_divergence_quadrature(0.3, &LinkSpec::logistic(), 1.0, &q).is_err());
        assert!(overlap_divergence_quadrature(1.5, &LinkSpec::relu(), 0.5, &q).is_err());
        assert!(overlap_divergence_quadrature(0.3, &LinkSpec::relu(), 0.5, &QuadratureConfig { outer_nodes: 4, inner_nodes: 8 }).is_err());
    }

    #[test]
    fn propensity_clamp_is_counted() {
        let q = QuadratureConfig { outer_nodes: 64, inner_nodes: 16 };
        let link = LinkSpec::logistic_affine(0.0, 60.0, Assumption::Propensity);
        let e = overlap_divergence_quadrature_counted(1.0, &link, 0.5, &q).unwrap();
        assert!(e.clamped > 0);
        assert!(e.value.is_finite());
    }

    #[test]
    fn empirical_examples() {
        let a: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin()).collect();
        let v = overlap_divergence_empirical(&a, &a, 50).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let far: Vec<f64> = a.iter().map(|x| x + 10.0).collect();
        assert_eq!(overlap_divergence_empirical(&a, &far, 50).unwrap(), f64::INFINITY);
        assert!(overlap_divergence_empirical(&[], &a, 50).is_err());
        let ties = vec![1.0; 20];
        assert!((overlap_divergence_empirical(&ties, &[1.0, 1.0], 5).unwrap() - 1.0).abs() < 1e-12);
    }
}
