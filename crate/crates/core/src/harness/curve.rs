use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::report::write_atomically;
use crate::error::{Error, Result};
use crate::glm::design::dot;
use crate::overlap::{
    overlap_divergence_closed_form, overlap_divergence_quadrature, Assumption, LinkSpec, QuadratureConfig,
};
use crate::scores::{gamma_from_w, normalize_and_align, WCoordinate, ZERO_THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveMethod {
    Quadrature,
    ClosedForm,
    Empirical,
}

impl CurveMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            CurveMethod::Quadrature => "quadrature",
            CurveMethod::ClosedForm => "closed_form",
            CurveMethod::Empirical => "empirical",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub w: f64,
    pub b: f64,
    pub divergence: f64,
    pub method: CurveMethod,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OverlapCurve {
    pub points: Vec<CurvePoint>,
}

impl OverlapCurve {
    pub fn values(&self, method: CurveMethod) -> Vec<f64> {
        self.points.iter().filter(|p| p.method == method).map(|p| p.divergence).collect()
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = Vec::new();
        writeln!(out, "w,b,divergence,method").expect("writing to memory");
        for p in &self.points {
            writeln!(out, "{},{},{},{}", p.w, p.b, p.divergence, p.method.as_str()).expect("writing to memory");
        }
        String::from_utf8(out).expect("ascii output")
    }

    pub fn emit_csv(&self, path: &Path) -> Result<()> {
        write_atomically(path, self.to_csv_string().as_bytes())
    }
}

/// `b = beta.gamma(w)` for unit directions with inner product `c`.
pub fn b_of_w(c: f64, w: f64) -> Result<f64> {
    if !(c.is_finite() && c.abs() <= 1.0) {
        return Err(Error::invalid(format!("c must lie in [-1, 1], got {c}")));
    }
    let alpha = [1.0, 0.0, 0.0];
    let beta = [c, (1.0 - c * c).max(0.0).sqrt(), 0.0];
    let family = normalize_and_align(&alpha, &beta, ZERO_THRESHOLD)?;
    let ortho = [0.0, 0.0, 1.0];
    let score = gamma_from_w(&family, &ortho, WCoordinate::new(w)?)?;
    Ok(dot(family.beta(), &score.gamma).clamp(-1.0, 1.0))
}

/// Overlap divergence of `gamma(w)'X` along the family with inner product
/// `c`. Closed-form points follow the quadrature point when available.
/// `pi1` defaults to the link's treated fraction for propensity links.
pub fn run_overlap_curve(
    link: &LinkSpec,
    c: f64,
    w_grid: &[f64],
    pi1: Option<f64>,
    quad: &QuadratureConfig,
) -> Result<OverlapCurve> {
    link.validate_ratio()?;
    let pi1 = match (link.assumption, pi1) {
        (_, Some(p)) => p,
        (Assumption::Propensity, None) => link.standard_mean(),
        (Assumption::DensityRatio, None) => 0.5,
    };
    let mut points = Vec::with_capacity(2 * w_grid.len());
    for &w in w_grid {
        let b = b_of_w(c, w)?;
        points.push(CurvePoint {
            w,
            b,
            divergence: overlap_divergence_quadrature(b, link, pi1, quad)?,
            method: CurveMethod::Quadrature,
        });
        if let Some(v) = overlap_divergence_closed_form(b, link) {
            points.push(CurvePoint {
                w,
                b,
                divergence: v,
                method: CurveMethod::ClosedForm,
            });
        }
    }
    Ok(OverlapCurve { points })
}
