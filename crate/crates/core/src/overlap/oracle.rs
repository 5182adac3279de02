use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::divergence::{overlap_divergence_quadrature, QuadratureConfig};
use super::link::{Assumption, LinkSpec};
use crate::error::{Error, Result};
use crate::glm::design::dot;
use crate::rng::batch_rng;

const CONDITIONAL_NODES: usize = 64;

/// Monte Carlo size and seed. `batch = 0` uses `round(sqrt(samples))`
/// batches for the batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
    pub batch: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            samples: 1_000_000,
            seed: 0,
            batch: 0,
        }
    }
}

impl McConfig {
    pub fn new(samples: usize, seed: u64) -> Self {
        McConfig { samples, seed, batch: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples < 1000 {
            return Err(Error::Config(format!("Monte Carlo needs at least 1000 samples, got {}", self.samples)));
        }
        if self.batch == 1 || self.batch > self.samples {
            return Err(Error::Config(format!("batch count {} is not usable", self.batch)));
        }
        Ok(())
    }

    pub fn batches(&self) -> usize {
        if self.batch == 0 {
            ((self.samples as f64).sqrt().round() as usize).max(2)
        } else {
            self.batch
        }
    }

    fn batch_size(&self, k: usize) -> usize {
        let nb = self.batches();
        self.samples / nb + usize::from(k < self.samples % nb)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
}

/// Deviations at or below this are rounding, not Monte Carlo error.
pub const ROUNDOFF: f64 = 1e-12;

impl McEstimate {
    /// `|estimate - target| / stderr`, zero for deviations within [`ROUNDOFF`].
    pub fn z_score(&self, target: f64) -> f64 {
        deviation_z(self.estimate - target, self.stderr)
    }
}

/// `|diff| / stderr`, zero for deviations within [`ROUNDOFF`].
pub fn deviation_z(diff: f64, stderr: f64) -> f64 {
    if diff.abs() <= ROUNDOFF {
        0.0
    } else {
        diff.abs() / stderr
    }
}

/// Per-batch sums of `K` statistics; batch `k` draws from its own stream,
/// so results do not depend on the worker count.
pub(crate) fn batch_sums<const K: usize>(
    mc: &McConfig,
    draw: impl Fn(&mut ChaCha8Rng) -> [f64; K] + Sync,
) -> Vec<(usize, [f64; K])> {
    (0..mc.batches())
        .into_par_iter()
        .map(|k| {
            let mut rng = batch_rng(mc.seed, k as u64);
            let size = mc.batch_size(k);
            let mut acc = [0.0; K];
            for _ in 0..size {
                let v = draw(&mut rng);
                for (a, x) in acc.iter_mut().zip(v) {
                    *a += x;
                }
            }
            (size, acc)
        })
        .collect()
}

/// Batch-means estimate from per-batch `(size, value_sum)` pairs.
pub(crate) fn batch_mean_estimate(batches: &[(usize, f64)]) -> McEstimate {
    let total: usize = batches.iter().map(|b| b.0).sum();
    let estimate = batches.iter().map(|b| b.1).sum::<f64>() / total as f64;
    let nb = batches.len() as f64;
    let var = batches
        .iter()
        .map(|&(n, s)| (s / n as f64 - estimate).powi(2))
        .sum::<f64>()
        / (nb - 1.0);
    McEstimate {
        estimate,
        stderr: (var / nb).sqrt(),
    }
}

fn check_unit(v: &[f64], name: &str, p: usize) -> Result<()> {
    if v.len() != p {
        return Err(Error::invalid(format!("{name} has length {}, expected {p}", v.len())));
    }
    let norm = dot(v, v).sqrt();
    if !((norm - 1.0).abs() < 1e-8) {
        return Err(Error::invalid(format!("{name} must be a unit vector (norm {norm})")));
    }
    Ok(())
}

fn cond_sd(r: f64) -> f64 {
    (1.0 - r * r).max(0.0).sqrt()
}

/// Monte Carlo estimate of `E[Cov(m(alpha'X), r(beta'X) | gamma'X)]` for
/// `X ~ N(0, I_p)`, with `r = h / E[h]` the density ratio. Both
/// conditional means are computed from the Gaussian conditional law.
pub fn confounding_bias_oracle(
    alpha: &[f64],
    beta: &[f64],
    gamma: &[f64],
    m_link: &LinkSpec,
    h_link: &LinkSpec,
    mc: &McConfig,
) -> Result<McEstimate> {
    let p = alpha.len();
    if p < 2 {
        return Err(Error::invalid("the oracle needs p >= 2"));
    }
    check_unit(alpha, "alpha", p)?;
    check_unit(beta, "beta", p)?;
    check_unit(gamma, "gamma", p)?;
    m_link.validate_outcome()?;
    h_link.validate_ratio()?;
    mc.validate()?;
    let (a, b) = (dot(alpha, gamma), dot(beta, gamma));
    let (sa, sb) = (cond_sd(a), cond_sd(b));
    let norm = h_link.standard_mean();
    let sums = batch_sums(mc, |rng| {
        let (mut xa, mut xb, mut xg) = (0.0, 0.0, 0.0);
        for k in 0..p {
            let x: f64 = rng.sample(StandardNormal);
            xa += alpha[k] * x;
            xb += beta[k] * x;
            xg += gamma[k] * x;
        }
        let m_cond = m_link.gaussian_mean(a * xg, sa, CONDITIONAL_NODES);
        let r_cond = h_link.gaussian_mean(b * xg, sb, CONDITIONAL_NODES) / norm;
        [(m_link.eval(xa) - m_cond) * (h_link.eval(xb) / norm - r_cond)]
    });
    let flat: Vec<(usize, f64)> = sums.into_iter().map(|(n, s)| (n, s[0])).collect();
    Ok(batch_mean_estimate(&flat))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma3Check {
    /// `O(X) - O(gamma'X)` by quadrature.
    pub lhs: f64,
    /// Monte Carlo `E[Var(r(beta'X) | gamma'X)]`.
    pub rhs: f64,
    pub stderr: f64,
}

/// Both sides of `O(X) - O(gamma'X) = E[Var(r(beta'X) | gamma'X)]`.
pub fn lemma3_check(
    beta: &[f64],
    gamma: &[f64],
    h_link: &LinkSpec,
    quad: &QuadratureConfig,
    mc: &McConfig,
) -> Result<Lemma3Check> {
    if h_link.assumption != Assumption::DensityRatio {
        return Err(Error::InvalidLink(
            "the overlap identity needs a density-ratio link".into(),
        ));
    }
    h_link.validate_ratio()?;
    let p = beta.len();
    check_unit(beta, "beta", p)?;
    check_unit(gamma, "gamma", p)?;
    mc.validate()?;
    let b = dot(beta, gamma).clamp(-1.0, 1.0);
    let full = overlap_divergence_quadrature(1.0, h_link, 0.5, quad)?;
    let reduced = overlap_divergence_quadrature(b, h_link, 0.5, quad)?;
    let sb = cond_sd(b);
    let norm = h_link.standard_mean();
    let sums = batch_sums(mc, |rng| {
        let z: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let r = h_link.eval(b * z + sb * z2) / norm;
        let r_cond = h_link.gaussian_mean(b * z, sb, CONDITIONAL_NODES) / norm;
        [(r - r_cond).powi(2)]
    });
    let flat: Vec<(usize, f64)> = sums.into_iter().map(|(n, s)| (n, s[0])).collect();
    let est = batch_mean_estimate(&flat);
    Ok(Lemma3Check {
        lhs: full - reduced,
        rhs: est.estimate,
        stderr: est.stderr,
    })
}
