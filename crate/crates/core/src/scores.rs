//! The hyperbola family of linear deconfounding scores.
//!
//! For unit prognostic and propensity directions `alpha`, `beta` with
//! `c = alpha.beta >= 0`, every unit `gamma` with
//! `(alpha.gamma)(beta.gamma) = c` is a deconfounding score. The family is
//! traversed by a scalar `w` in `[-1, 1]`: `w = -1` gives `alpha`,
//! `w = 1` gives `beta`, and `w = 0` the equiangular member.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::design::dot;
use crate::glm::DesignMatrix;
use crate::rng::{stream_rng, Stream};

/// Sup-norm below which a fitted coefficient vector counts as zero.
pub const ZERO_THRESHOLD: f64 = 1e-10;
/// `c` above `1 - COLLINEAR_TOL` collapses the family.
pub const COLLINEAR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Degeneracy {
    Ok,
    NearZeroCoefficients,
    NearCollinear,
}

/// Unit, sign-aligned directions and their inner product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreFamily {
    alpha: Vec<f64>,
    beta: Vec<f64>,
    c: f64,
    degenerate: Degeneracy,
}

impl ScoreFamily {
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn degenerate(&self) -> Degeneracy {
        self.degenerate
    }

    pub fn p(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_ok(&self) -> bool {
        self.degenerate == Degeneracy::Ok
    }
}

/// A scalar position on the family; `|w| <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct WCoordinate(f64);

impl WCoordinate {
    pub fn new(w: f64) -> Result<Self> {
        if w.is_finite() && w.abs() <= 1.0 {
            Ok(WCoordinate(w))
        } else {
            Err(Error::invalid(format!("w must lie in [-1, 1], got {w}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// One member of the family. `ortho` holds the scaled orthogonal part, so
/// `gamma = w1 u1 + w2 u2 + ortho` with `u1, u2` the normalized sum and
/// difference of `alpha` and `beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeconfoundingScore {
    pub gamma: Vec<f64>,
    pub w: f64,
    pub w1: f64,
    pub w2: f64,
    pub ortho: Vec<f64>,
    pub c: f64,
}

fn check_finite(v: &[f64], what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} has non-finite entries")))
    }
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn unit(v: &[f64]) -> Vec<f64> {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        v.iter().map(|x| x / norm).collect()
    } else {
        v.to_vec()
    }
}

pub fn normalize_and_align(alpha_raw: &[f64], beta_raw: &[f64], zero_threshold: f64) -> Result<ScoreFamily> {
    if alpha_raw.len() != beta_raw.len() || alpha_raw.is_empty() {
        return Err(Error::invalid(format!(
            "coefficient vectors have lengths {} and {}",
            alpha_raw.len(),
            beta_raw.len()
        )));
    }
    check_finite(alpha_raw, "alpha")?;
    check_finite(beta_raw, "beta")?;
    let alpha = unit(alpha_raw);
    let mut beta = unit(beta_raw);
    if sup_norm(alpha_raw) < zero_threshold || sup_norm(beta_raw) < zero_threshold {
        return Ok(ScoreFamily {
            alpha,
            beta,
            c: 0.0,
            degenerate: Degeneracy::NearZeroCoefficients,
        });
    }
    let mut c = dot(&alpha, &beta);
    if c < 0.0 {
        beta.iter_mut().for_each(|b| *b = -*b);
        c = -c;
    }
    let c = c.min(1.0);
    let degenerate = if c > 1.0 - COLLINEAR_TOL {
        Degeneracy::NearCollinear
    } else {
        Degeneracy::Ok
    };
    Ok(ScoreFamily {
        alpha,
        beta,
        c,
        degenerate,
    })
}

/// Orthonormal basis of `span(alpha, beta)`; requires `c < 1`.
fn span_basis(family: &ScoreFamily) -> (Vec<f64>, Vec<f64>) {
    let c = family.c;
    let s = (1.0 - c * c).sqrt();
    let e2: Vec<f64> = family
        .beta
        .iter()
        .zip(&family.alpha)
        .map(|(b, a)| (b - c * a) / s)
        .collect();
    (family.alpha.clone(), unit(&e2))
}

fn project_out(v: &mut [f64], basis: &[&[f64]]) {
    for _ in 0..2 {
        for e in basis {
            let k = dot(v, e);
            v.iter_mut().zip(e.iter()).for_each(|(x, y)| *x -= k * y);
        }
    }
}

/// Uniform unit vector on the orthogonal complement of `span(alpha, beta)`;
/// the zero vector when `p <= 2`.
pub fn sample_orthocomplement(family: &ScoreFamily, seed: u64) -> Result<Vec<f64>> {
    if !family.is_ok() {
        return Err(Error::DegenerateFamily(format!(
            "orthogonal component requested for a {:?} family",
            family.degenerate
        )));
    }
    let p = family.p();
    if p <= 2 {
        return Ok(vec![0.0; p]);
    }
    let (e1, e2) = span_basis(family);
    let mut rng = stream_rng(seed, Stream::Orthogonal);
    loop {
        let mut v: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        project_out(&mut v, &[&e1, &e2]);
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            return Ok(v);
        }
    }
}

/// Builds `gamma(w)`. A near-collinear family yields `alpha` for every `w`.
pub fn gamma_from_w(family: &ScoreFamily, ortho: &[f64], w: WCoordinate) -> Result<DeconfoundingScore> {
    let p = family.p();
    let w = w.value();
    match family.degenerate {
        Degeneracy::NearZeroCoefficients => {
            return Err(Error::DegenerateFamily(
                "coefficient vector below the zero threshold".into(),
            ))
        }
        Degeneracy::NearCollinear => {
            return Ok(DeconfoundingScore {
                gamma: family.alpha.clone(),
                w,
                w1: 1.0,
                w2: 0.0,
                ortho: vec![0.0; p],
                c: family.c,
            })
        }
        Degeneracy::Ok => {}
    }
    if ortho.len() != p {
        return Err(Error::invalid(format!(
            "orthogonal component has length {}, expected {p}",
            ortho.len()
        )));
    }
    let c = family.c;
    let w2 = -((1.0 - c) / 2.0).sqrt() * w;
    let w1 = ((2.0 * c + (1.0 - c) * (1.0 - c) * w * w / 2.0) / (1.0 + c)).sqrt();
    let rest = ((1.0 - c) / (1.0 + c) * (1.0 - w * w)).max(0.0).sqrt();
    let on = dot(ortho, ortho).sqrt();
    if rest > 0.0 && on == 0.0 {
        return Err(Error::NullSpaceEmpty { required_norm: rest });
    }
    if rest > 0.0 {
        let tol = 1e-8;
        if (on - 1.0).abs() > tol
            || dot(ortho, &family.alpha).abs() > tol
            || dot(ortho, &family.beta).abs() > tol
        {
            return Err(Error::invalid(
                "orthogonal component must be a unit vector orthogonal to alpha and beta",
            ));
        }
    }
    let s1 = 1.0 / (2.0 + 2.0 * c).sqrt();
    let s2 = 1.0 / (2.0 - 2.0 * c).sqrt();
    let mut gamma = Vec::with_capacity(p);
    let mut scaled = Vec::with_capacity(p);
    for k in 0..p {
        let (a, b) = (family.alpha[k], family.beta[k]);
        let o = rest * ortho[k];
        scaled.push(o);
        gamma.push(w1 * (a + b) * s1 + w2 * (a - b) * s2 + o);
    }
    Ok(DeconfoundingScore {
        gamma,
        w,
        w1,
        w2,
        ortho: scaled,
        c,
    })
}

/// `(alpha.gamma)(beta.gamma) - alpha.beta`; zero on the family.
pub fn hyperbola_residual(gamma: &[f64], alpha: &[f64], beta: &[f64]) -> f64 {
    dot(alpha, gamma) * dot(beta, gamma) - dot(alpha, beta)
}

/// `X gamma`.
pub fn project_score(gamma: &[f64], design: &DesignMatrix) -> Result<Vec<f64>> {
    design.mul_vec(gamma)
}

/// The default grid `{-1, -0.9, ..., 1}`.
pub fn default_w_grid() -> Vec<f64> {
    (-10..=10).map(|k| k as f64 / 10.0).collect()
}
