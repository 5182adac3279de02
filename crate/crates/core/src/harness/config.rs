use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dgp::DgpConfig;
use crate::error::{Error, Result};
use crate::estimators::{Method, Normalization, TrimConfig};
use crate::glm::{CvSpec, Penalty};
use crate::scores::default_w_grid;

/// Outcome and propensity penalties for one block of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub outcome: Penalty,
    pub propensity: Penalty,
}

impl ModelSpec {
    pub const fn new(outcome: Penalty, propensity: Penalty) -> Self {
        ModelSpec { outcome, propensity }
    }
}

/// One `(s_T, s_Y)` design setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Setting {
    pub s_t: f64,
    pub s_y: f64,
}

impl Setting {
    /// Identifier used in the `setting` report column.
    pub fn id(&self) -> String {
        format!("s_t={};s_y={}", self.s_t, self.s_y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Simulation design; `seed` is ignored because data seeds are derived
    /// from `master_seed`.
    pub dgp: DgpConfig,
    /// Semi-synthetic CSV dataset used instead of the simulation design.
    pub dataset: Option<PathBuf>,
    /// `(s_T, s_Y)` pairs overriding the design; empty means the design's own.
    pub settings: Vec<Setting>,
    pub model_grid: Vec<ModelSpec>,
    pub w_grid: Vec<f64>,
    pub estimators: Vec<Method>,
    pub replications: usize,
    pub master_seed: u64,
    pub trim: TrimConfig,
    pub output_path: Option<PathBuf>,
    /// Worker count; 0 means the caller's default.
    pub threads: usize,
    /// Use the true `m0` and `e` instead of fitted nuisance models.
    pub oracle: bool,
    pub cv: CvSpec,
    pub normalization: Normalization,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dgp: DgpConfig::default(),
            dataset: None,
            settings: Vec::new(),
            model_grid: vec![ModelSpec::new(Penalty::Lasso, Penalty::Lasso)],
            w_grid: default_w_grid(),
            estimators: Method::ALL.to_vec(),
            replications: 100,
            master_seed: 0,
            trim: TrimConfig::default(),
            output_path: None,
            threads: 0,
            oracle: false,
            cv: CvSpec::default(),
            normalization: Normalization::Hajek,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        if self.estimators.is_empty() {
            return bad("at least one estimator is required".into());
        }
        if let Some(w) = self.w_grid.iter().find(|w| !(w.is_finite() && w.abs() <= 1.0)) {
            return bad(format!("w grid value {w} lies outside [-1, 1]"));
        }
        if !self.oracle && self.model_grid.is_empty() {
            return bad("model grid is empty".into());
        }
        if self.oracle && self.dataset.is_some() {
            return bad("oracle mode needs the simulation design".into());
        }
        if let Some(s) = self.settings.iter().find(|s| !(s.s_t.is_finite() && s.s_y.is_finite() && s.s_t >= 0.0 && s.s_y >= 0.0)) {
            return bad(format!("setting {s:?} needs finite nonnegative strengths"));
        }
        self.trim.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.dataset.is_none() {
            for s in self.resolved_settings() {
                self.design_for(&s).validate().map_err(|e| Error::Config(e.to_string()))?;
            }
        }
        self.cv.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    /// The settings to run, defaulting to the design's own strengths.
    pub fn resolved_settings(&self) -> Vec<Setting> {
        if self.settings.is_empty() {
            vec![Setting {
                s_t: self.dgp.s_t,
                s_y: self.dgp.s_y,
            }]
        } else {
            self.settings.clone()
        }
    }

    pub fn design_for(&self, s: &Setting) -> DgpConfig {
        DgpConfig {
            s_t: s.s_t,
            s_y: s.s_y,
            ..self.dgp.clone()
        }
    }
}
