use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::divergence::{overlap_divergence_quadrature, QuadratureConfig};
use super::link::{Assumption, LinkSpec};
use super::oracle::{batch_mean_estimate, batch_sums, McConfig};
use crate::dgp::{coefficients_for, CoefficientPair, DgpConfig};
use crate::error::{Error, Result};
use crate::glm::design::dot;
use crate::quadrature::{gaussian_trapezoid, trapezoid_step};
use crate::special::logistic;

const TILT_NODES: usize = 64;
const DEGENERATE_VAR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyBound {
    pub estimate: f64,
    pub stderr: f64,
    /// Marginal treated fraction.
    pub pi1: f64,
    /// Adjusted estimand for the representation.
    pub tau_z: f64,
}

fn propensity_link(dgp: &DgpConfig) -> LinkSpec {
    LinkSpec::logistic_affine(dgp.beta0, dgp.s_t, Assumption::Propensity)
}

fn check_gamma(gamma: &[f64], p: usize) -> Result<()> {
    if gamma.len() != p {
        return Err(Error::invalid(format!("gamma has length {}, expected {p}", gamma.len())));
    }
    let norm = dot(gamma, gamma).sqrt();
    if !((norm - 1.0).abs() < 1e-8) {
        return Err(Error::invalid(format!("gamma must be a unit vector (norm {norm})")));
    }
    Ok(())
}

/// Efficiency bound for the design with coefficients drawn from `dgp.seed`.
pub fn efficiency_bound_gaussian(dgp: &DgpConfig, gamma: Option<&[f64]>, mc: &McConfig) -> Result<EfficiencyBound> {
    let coeffs = coefficients_for(dgp, dgp.seed)?;
    efficiency_bound_with_coefficients(dgp, &coeffs, gamma, mc)
}

/// Efficiency bound of the ATT adjusted for `gamma'X` (for `X` itself when
/// `gamma` is absent) under the linear-Gaussian design with coefficients
/// `coeffs`.
///
/// Given `Z = gamma'X`, `B = beta'X` is `N(bZ, 1 - b^2)` and treatment tilts
/// only `B`, so the arm-specific conditional moments of `A = alpha'X` are
/// obtained from the tilted law of `B` by a trapezoid rule. The
/// outer expectation over `Z` is Monte Carlo.
pub fn efficiency_bound_with_coefficients(
    dgp: &DgpConfig,
    coeffs: &CoefficientPair,
    gamma: Option<&[f64]>,
    mc: &McConfig,
) -> Result<EfficiencyBound> {
    dgp.validate()?;
    mc.validate()?;
    if coeffs.alpha.len() != dgp.p || coeffs.beta.len() != dgp.p {
        return Err(Error::invalid("coefficient length does not match p"));
    }
    let link = propensity_link(dgp);
    let pi1 = link.standard_mean();
    if !(pi1 > 0.0 && pi1 < 1.0) {
        return Err(Error::invalid(format!("treated fraction {pi1} is degenerate")));
    }
    let (beta0, s_t, s_y, tau) = (dgp.beta0, dgp.s_t, dgp.s_y, dgp.tau);

    // Per draw: [e Var1 + e^2 Var0 / (1 - e), e, e dm, e dm^2].
    let sums = match gamma {
        None => batch_sums(mc, |rng| {
            let b: f64 = rng.sample(StandardNormal);
            let e = logistic(beta0 + s_t * b);
            [e + e * e / (1.0 - e), e, e * tau, e * tau * tau]
        }),
        Some(g) => {
            check_gamma(g, dgp.p)?;
            let a = dot(&coeffs.alpha, g);
            let b = dot(&coeffs.beta, g);
            let c = dot(&coeffs.alpha, &coeffs.beta);
            let vb = (1.0 - b * b).max(0.0);
            let sb = vb.sqrt();
            let kappa = if vb > DEGENERATE_VAR { (c - a * b) / vb } else { 0.0 };
            let var_res = (1.0 - a * a - kappa * kappa * vb).max(0.0);
            let pole = std::f64::consts::PI / (s_t * sb);
            let (nodes, weights) = gaussian_trapezoid(trapezoid_step(pole, TILT_NODES));
            batch_sums(mc, move |rng| {
                let z: f64 = rng.sample(StandardNormal);
                let mu = b * z;
                let (mut s0, mut s1) = (0.0, 0.0);
                let (mut m0, mut m1, mut q0, mut q1) = (0.0, 0.0, 0.0, 0.0);
                for (&x, &w) in nodes.iter().zip(&weights) {
                    let bk = mu + sb * x;
                    let ek = logistic(beta0 + s_t * bk);
                    let (w1, w0) = (w * ek, w * (1.0 - ek));
                    s1 += w1;
                    s0 += w0;
                    m1 += w1 * bk;
                    m0 += w0 * bk;
                    q1 += w1 * bk * bk;
                    q0 += w0 * bk * bk;
                }
                let e = s1 / (s0 + s1);
                let (mb1, mb0) = (m1 / s1, m0 / s0);
                let vb1 = (q1 / s1 - mb1 * mb1).max(0.0);
                let vb0 = (q0 / s0 - mb0 * mb0).max(0.0);
                let var1 = 1.0 + s_y * s_y * (var_res + kappa * kappa * vb1);
                let var0 = 1.0 + s_y * s_y * (var_res + kappa * kappa * vb0);
                let dm = tau + s_y * kappa * (mb1 - mb0);
                [e * var1 + e * e * var0 / (1.0 - e), e, e * dm, e * dm * dm]
            })
        }
    };
    let tot = sums.iter().fold([0.0; 4], |mut acc, (_, s)| {
        acc.iter_mut().zip(s).for_each(|(a, x)| *a += x);
        acc
    });
    let tau_z = tot[2] / tot[1];
    let scale = pi1 * pi1;
    let per_batch: Vec<(usize, f64)> = sums
        .iter()
        .map(|&(n, s)| (n, (s[0] + s[3] - 2.0 * tau_z * s[2] + tau_z * tau_z * s[1]) / scale))
        .collect();
    let est = batch_mean_estimate(&per_batch);
    Ok(EfficiencyBound {
        estimate: est.estimate,
        stderr: est.stderr,
        pi1,
        tau_z,
    })
}

/// `O(gamma'X) / (1 - pi1)`, the lower bound on the efficiency bound when
/// `Var(Y | X, T = 0) >= 1`.
pub fn lemma2_lower_bound(
    dgp: &DgpConfig,
    coeffs: &CoefficientPair,
    gamma: &[f64],
    quad: &QuadratureConfig,
) -> Result<f64> {
    dgp.validate()?;
    check_gamma(gamma, dgp.p)?;
    let link = propensity_link(dgp);
    let pi1 = link.standard_mean();
    let b = dot(&coeffs.beta, gamma).clamp(-1.0, 1.0);
    Ok(overlap_divergence_quadrature(b, &link, pi1, quad)? / (1.0 - pi1))
}
