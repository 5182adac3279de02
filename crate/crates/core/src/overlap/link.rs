use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{gaussian_expectation_adaptive, gaussian_expectation_trapezoid, trapezoid_step};
use crate::special::{logistic, norm_cdf, relu_gaussian_mean};

const MEAN_NODES: usize = 128;

fn one() -> f64 {
    1.0
}

/// Shape of a scalar link `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LinkKind {
    /// `logistic(intercept + slope z)`.
    Logistic {
        #[serde(default)]
        intercept: f64,
        #[serde(default = "one")]
        slope: f64,
    },
    /// `1{z <= z0}`.
    Indicator { z0: f64 },
    /// `max(0, z)`.
    Relu,
    /// `exp(s z)`.
    ExpTilt { s: f64 },
    /// `intercept + slope z`; outcome links only.
    Identity {
        #[serde(default)]
        intercept: f64,
        #[serde(default = "one")]
        slope: f64,
    },
}

/// Which role the link plays for the treated/control density ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assumption {
    /// `h` is proportional to the density ratio itself.
    DensityRatio,
    /// `h` is the propensity score, valued in `[0, 1)`.
    Propensity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    #[serde(flatten)]
    pub kind: LinkKind,
    pub assumption: Assumption,
}

impl LinkSpec {
    pub fn logistic() -> Self {
        Self::logistic_affine(0.0, 1.0, Assumption::Propensity)
    }

    pub fn logistic_affine(intercept: f64, slope: f64, assumption: Assumption) -> Self {
        LinkSpec {
            kind: LinkKind::Logistic { intercept, slope },
            assumption,
        }
    }

    pub fn indicator(z0: f64) -> Self {
        LinkSpec {
            kind: LinkKind::Indicator { z0 },
            assumption: Assumption::DensityRatio,
        }
    }

    pub fn relu() -> Self {
        LinkSpec {
            kind: LinkKind::Relu,
            assumption: Assumption::DensityRatio,
        }
    }

    pub fn exp_tilt(s: f64) -> Self {
        LinkSpec {
            kind: LinkKind::ExpTilt { s },
            assumption: Assumption::DensityRatio,
        }
    }

    pub fn identity() -> Self {
        Self::affine(0.0, 1.0)
    }

    pub fn affine(intercept: f64, slope: f64) -> Self {
        LinkSpec {
            kind: LinkKind::Identity { intercept, slope },
            assumption: Assumption::DensityRatio,
        }
    }

    pub fn with_assumption(mut self, assumption: Assumption) -> Self {
        self.assumption = assumption;
        self
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            LinkKind::Logistic { .. } => "logistic",
            LinkKind::Indicator { .. } => "indicator",
            LinkKind::Relu => "relu",
            LinkKind::ExpTilt { .. } => "exp_tilt",
            LinkKind::Identity { .. } => "identity",
        }
    }

    fn params_finite(&self) -> bool {
        match self.kind {
            LinkKind::Logistic { intercept, slope } | LinkKind::Identity { intercept, slope } => {
                intercept.is_finite() && slope.is_finite()
            }
            LinkKind::Indicator { z0 } => z0.is_finite(),
            LinkKind::Relu => true,
            LinkKind::ExpTilt { s } => s.is_finite(),
        }
    }

    /// Accepts links usable as an outcome regression `m`.
    pub fn validate_outcome(&self) -> Result<()> {
        if self.params_finite() {
            Ok(())
        } else {
            Err(Error::InvalidLink(format!("{} link has non-finite parameters", self.name())))
        }
    }

    /// Accepts links usable as `h`: nonnegative under the density-ratio
    /// reading, logistic under the propensity reading.
    pub fn validate_ratio(&self) -> Result<()> {
        self.validate_outcome()?;
        match (self.assumption, self.kind) {
            (_, LinkKind::Identity { .. }) => Err(Error::InvalidLink(
                "identity link can be negative and cannot define a density ratio".into(),
            )),
            (Assumption::Propensity, LinkKind::Logistic { .. }) | (Assumption::DensityRatio, _) => {
                if let LinkKind::Indicator { z0 } = self.kind {
                    if norm_cdf(z0) <= 0.0 {
                        return Err(Error::InvalidLink(format!("indicator threshold {z0} has zero mass")));
                    }
                }
                Ok(())
            }
            (Assumption::Propensity, _) => Err(Error::InvalidLink(format!(
                "{} link is not a propensity score valued in [0, 1)",
                self.name()
            ))),
        }
    }

    pub fn eval(&self, z: f64) -> f64 {
        match self.kind {
            LinkKind::Logistic { intercept, slope } => logistic(intercept + slope * z),
            LinkKind::Indicator { z0 } => {
                if z <= z0 {
                    1.0
                } else {
                    0.0
                }
            }
            LinkKind::Relu => z.max(0.0),
            LinkKind::ExpTilt { s } => (s * z).exp(),
            LinkKind::Identity { intercept, slope } => intercept + slope * z,
        }
    }

    /// `E[h(mu + sigma Z)]`, exact except for the logistic link, which uses a
    /// trapezoid rule with at least `nodes` nodes, refined to the distance of
    /// the nearest pole of the integrand.
    pub fn gaussian_mean(&self, mu: f64, sigma: f64, nodes: usize) -> f64 {
        match self.kind {
            LinkKind::Logistic { slope, .. } => {
                let spread = (slope * sigma).abs();
                if spread == 0.0 {
                    self.eval(mu)
                } else {
                    let h = trapezoid_step(std::f64::consts::PI / spread, nodes);
                    gaussian_expectation_trapezoid(|z| self.eval(z), mu, sigma, h)
                }
            }
            LinkKind::Indicator { z0 } => {
                if sigma == 0.0 {
                    self.eval(mu)
                } else {
                    norm_cdf((z0 - mu) / sigma)
                }
            }
            LinkKind::Relu => relu_gaussian_mean(mu, sigma),
            LinkKind::ExpTilt { s } => (s * mu + 0.5 * s * s * sigma * sigma).exp(),
            LinkKind::Identity { intercept, slope } => intercept + slope * mu,
        }
    }

    /// `E[h(Z)]` for standard normal `Z`.
    pub fn standard_mean(&self) -> f64 {
        match self.kind {
            LinkKind::Logistic { intercept, slope } => {
                if slope == 0.0 {
                    logistic(intercept)
                } else {
                    gaussian_expectation_adaptive(|z| self.eval(z), &[], 1e-14)
                }
            }
            _ => self.gaussian_mean(0.0, 1.0, MEAN_NODES),
        }
    }

    /// Points where `h` is not smooth.
    pub fn kinks(&self) -> Vec<f64> {
        match self.kind {
            LinkKind::Indicator { z0 } => vec![z0],
            LinkKind::Relu => vec![0.0],
            _ => Vec::new(),
        }
    }

    pub fn is_smooth(&self) -> bool {
        self.kinks().is_empty()
    }
}
