//! The linear-Gaussian simulation design and ground-truth utilities.
//!
//! `X ~ N(0, I_p)`, `T ~ Bernoulli(logistic(beta0 + s_T X'beta))` and
//! `Y ~ N(alpha0 + s_Y X'alpha + tau T, 1)`, with unit `alpha`, `beta`
//! sharing a support and satisfying `alpha'beta = K`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::Dataset;
use crate::glm::design::dot;
use crate::glm::DesignMatrix;
use crate::rng::{stream_rng, Stream};
use crate::special::logistic;

const MAX_REDRAWS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DgpConfig {
    pub n: usize,
    pub p: usize,
    pub s_t: f64,
    pub s_y: f64,
    pub tau: f64,
    pub alpha0: f64,
    pub beta0: f64,
    pub support_size: usize,
    pub k: f64,
    pub seed: u64,
}

impl Default for DgpConfig {
    fn default() -> Self {
        DgpConfig {
            n: 500,
            p: 1000,
            s_t: 1.0,
            s_y: 2.0,
            tau: 0.0,
            alpha0: 0.0,
            beta0: 0.0,
            support_size: 20,
            k: 0.75,
            seed: 0,
        }
    }
}

impl DgpConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(m));
        if self.n < 2 {
            return bad(format!("n must be at least 2, got {}", self.n));
        }
        if self.support_size < 2 || self.support_size > self.p {
            return bad(format!(
                "support size must lie in [2, p = {}], got {}",
                self.p, self.support_size
            ));
        }
        if !(self.k.is_finite() && self.k.abs() < 1.0) {
            return bad(format!("K must lie in (-1, 1), got {}", self.k));
        }
        for (name, v) in [("s_T", self.s_t), ("s_Y", self.s_y)] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and nonnegative, got {v}"));
            }
        }
        for (name, v) in [("tau", self.tau), ("alpha0", self.alpha0), ("beta0", self.beta0)] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        Ok(())
    }

    /// Indices `0..support_size`.
    pub fn support(&self) -> Vec<usize> {
        (0..self.support_size).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientPair {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

fn normalize(v: &mut [f64]) {
    let norm = dot(v, v).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
}

/// Gaussian `alpha` on `support`, then `beta = K alpha + sqrt(1 - K^2) v`
/// with `v` the normalized Gram-Schmidt residual of a second Gaussian draw.
pub fn generate_coefficients(p: usize, support: &[usize], k: f64, seed: u64) -> Result<CoefficientPair> {
    if support.len() < 2 {
        return Err(Error::invalid("support needs at least two indices"));
    }
    let mut seen = vec![false; p];
    for &j in support {
        if j >= p || seen[j] {
            return Err(Error::invalid(format!("support index {j} is out of range or repeated")));
        }
        seen[j] = true;
    }
    if !(k.is_finite() && k.abs() < 1.0) {
        return Err(Error::invalid(format!("K must lie in (-1, 1), got {k}")));
    }
    let mut rng = stream_rng(seed, Stream::Coefficients);
    let mut alpha = vec![0.0; p];
    for &j in support {
        alpha[j] = rng.sample(StandardNormal);
    }
    normalize(&mut alpha);
    let mut v = vec![0.0; p];
    loop {
        for &j in support {
            v[j] = rng.sample(StandardNormal);
        }
        for _ in 0..2 {
            let proj = dot(&alpha, &v);
            v.iter_mut().zip(&alpha).for_each(|(x, a)| *x -= proj * a);
        }
        if dot(&v, &v) > 1e-20 {
            break;
        }
    }
    normalize(&mut v);
    let s = (1.0 - k * k).sqrt();
    let beta = alpha.iter().zip(&v).map(|(a, b)| k * a + s * b).collect();
    Ok(CoefficientPair { alpha, beta })
}

pub fn coefficients_for(cfg: &DgpConfig, seed: u64) -> Result<CoefficientPair> {
    cfg.validate()?;
    generate_coefficients(cfg.p, &cfg.support(), cfg.k, seed)
}

/// Draws `cfg.n` units from the design seeded by `cfg.seed`, redrawing the
/// whole sample while either arm is empty.
pub fn simulate_dataset(cfg: &DgpConfig, coeffs: &CoefficientPair) -> Result<Dataset> {
    cfg.validate()?;
    if coeffs.alpha.len() != cfg.p || coeffs.beta.len() != cfg.p {
        return Err(Error::invalid("coefficient length does not match p"));
    }
    let (n, p) = (cfg.n, cfg.p);
    let mut rng = stream_rng(cfg.seed, Stream::Data);
    for attempt in 0..MAX_REDRAWS {
        let mut data = Vec::with_capacity(n * p);
        for _ in 0..n * p {
            data.push(rng.sample::<f64, _>(StandardNormal));
        }
        let x = DesignMatrix::from_column_major(n, p, data)?;
        let xa = x.mul_vec(&coeffs.alpha)?;
        let xb = x.mul_vec(&coeffs.beta)?;
        let e: Vec<f64> = xb.iter().map(|b| logistic(cfg.beta0 + cfg.s_t * b)).collect();
        let t: Vec<f64> = e
            .iter()
            .map(|&ei| if rng.random::<f64>() < ei { 1.0 } else { 0.0 })
            .collect();
        let m0: Vec<f64> = xa.iter().map(|a| cfg.alpha0 + cfg.s_y * a).collect();
        let m1: Vec<f64> = m0.iter().map(|m| m + cfg.tau).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| m0[i] + cfg.tau * t[i] + rng.sample::<f64, _>(StandardNormal))
            .collect();
        match Dataset::new(x, t, y, Some(m0), Some(m1)) {
            Ok(ds) => return ds.with_oracle_propensity(e),
            Err(Error::DegenerateTreatmentArm(_)) => {
                log::debug!("redrawing single-arm sample (attempt {})", attempt + 1);
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::DegenerateDesign(format!(
        "{MAX_REDRAWS} consecutive draws left a treatment arm empty"
    )))
}

/// The ATT of the constant-effect design.
pub fn true_att(cfg: &DgpConfig) -> f64 {
    cfg.tau
}

/// Treated average of `m1 - m0`.
pub fn sample_att_semisynthetic(m1: &[f64], m0: &[f64], treatment: &[f64]) -> Result<f64> {
    if m1.len() != m0.len() || m0.len() != treatment.len() {
        return Err(Error::invalid("oracle surfaces and treatment differ in length"));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..treatment.len() {
        if treatment[i] == 1.0 {
            num += m1[i] - m0[i];
            den += 1.0;
        }
    }
    if den == 0.0 {
        return Err(Error::DegenerateTreatmentArm("no treated units".into()));
    }
    Ok(num / den)
}
