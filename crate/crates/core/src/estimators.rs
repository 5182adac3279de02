//! ATT estimators: outcome regression, IPW and AIPW, with propensity
//! trimming and the fallbacks used when a score cannot be formed.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::{self, DesignMatrix, Family, FittedGlm, LambdaSpec, Penalty};
use crate::scores::{project_score, Degeneracy, DeconfoundingScore};
use crate::special::logistic;

/// Default trimming threshold, the double-precision machine epsilon.
pub const DEFAULT_EPSILON: f64 = 2.220446e-16;
/// Largest slope magnitude a one-dimensional logistic refit may reach.
pub const SLOPE_CAP: f64 = 30.0;
const NEWTON_TOL: f64 = 1e-10;
const NEWTON_MAX_ITER: usize = 100;

/// Covariates, binary treatment, outcome and optional oracle surfaces.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    design: DesignMatrix,
    treatment: Vec<f64>,
    outcome: Vec<f64>,
    oracle_m0: Option<Vec<f64>>,
    oracle_m1: Option<Vec<f64>>,
    oracle_propensity: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(
        design: DesignMatrix,
        treatment: Vec<f64>,
        outcome: Vec<f64>,
        oracle_m0: Option<Vec<f64>>,
        oracle_m1: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = design.n();
        for (name, len) in [
            ("treatment", Some(treatment.len())),
            ("outcome", Some(outcome.len())),
            ("mu0", oracle_m0.as_ref().map(Vec::len)),
            ("mu1", oracle_m1.as_ref().map(Vec::len)),
        ] {
            if let Some(len) = len {
                if len != n {
                    return Err(Error::invalid(format!("{name} has length {len}, design has {n} rows")));
                }
            }
        }
        if let Some(i) = treatment.iter().position(|&t| t != 0.0 && t != 1.0) {
            return Err(Error::invalid(format!("treatment at row {i} is not 0 or 1")));
        }
        for (name, v) in [
            ("outcome", Some(&outcome)),
            ("mu0", oracle_m0.as_ref()),
            ("mu1", oracle_m1.as_ref()),
        ] {
            if let Some(i) = v.and_then(|v| v.iter().position(|x| !x.is_finite())) {
                return Err(Error::invalid(format!("non-finite {name} at row {i}")));
            }
        }
        let treated = treatment.iter().filter(|&&t| t == 1.0).count();
        if treated == 0 || treated == n {
            return Err(Error::DegenerateTreatmentArm(format!(
                "{treated} treated out of {n} units"
            )));
        }
        Ok(Dataset {
            design,
            treatment,
            outcome,
            oracle_m0,
            oracle_m1,
            oracle_propensity: None,
        })
    }

    /// Attaches the true propensity `e(X)`.
    pub fn with_oracle_propensity(mut self, e: Vec<f64>) -> Result<Self> {
        if e.len() != self.n() || e.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("oracle propensity must have one entry in [0, 1] per row"));
        }
        self.oracle_propensity = Some(e);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.design.n()
    }

    pub fn p(&self) -> usize {
        self.design.p()
    }

    pub fn design(&self) -> &DesignMatrix {
        &self.design
    }

    pub fn treatment(&self) -> &[f64] {
        &self.treatment
    }

    pub fn outcome(&self) -> &[f64] {
        &self.outcome
    }

    pub fn oracle_m0(&self) -> Option<&[f64]> {
        self.oracle_m0.as_deref()
    }

    pub fn oracle_m1(&self) -> Option<&[f64]> {
        self.oracle_m1.as_deref()
    }

    pub fn oracle_propensity(&self) -> Option<&[f64]> {
        self.oracle_propensity.as_deref()
    }

    pub fn treated_count(&self) -> usize {
        self.treatment.iter().filter(|&&t| t == 1.0).count()
    }

    pub fn control_rows(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.treatment[i] == 0.0).collect()
    }

    /// Same data with every outcome mapped through `f`.
    pub fn map_outcome(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        out.outcome.iter_mut().for_each(|y| *y = f(*y));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrimConfig {
    pub epsilon: f64,
}

impl Default for TrimConfig {
    fn default() -> Self {
        TrimConfig {
            epsilon: DEFAULT_EPSILON,
        }
    }
}

impl TrimConfig {
    pub fn new(epsilon: f64) -> Result<Self> {
        let cfg = TrimConfig { epsilon };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilon > 0.0 && self.epsilon < 0.5 {
            Ok(())
        } else {
            Err(Error::Config(format!("trim epsilon must lie in (0, 0.5), got {}", self.epsilon)))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Regr,
    Ipw,
    Aipw,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Regr, Method::Ipw, Method::Aipw];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Regr => "regr",
            Method::Ipw => "ipw",
            Method::Aipw => "aipw",
        }
    }

    fn needs_outcome_model(self) -> bool {
        self != Method::Ipw
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "regr" => Ok(Method::Regr),
            "ipw" => Ok(Method::Ipw),
            "aipw" => Ok(Method::Aipw),
            other => Err(Error::Config(format!("unknown estimator `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    None,
    ZeroCoefficients,
    ZeroVariance,
}

/// Normalization of the weighted control mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Divide by the sum of control weights.
    #[default]
    Hajek,
    /// Divide by the number of treated units.
    Unnormalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorResult {
    pub tau_hat: f64,
    pub method: Method,
    pub score_label: String,
    pub fallback: Fallback,
    pub trim_count: usize,
}

pub fn att_regression(dataset: &Dataset, m0_hat: &[f64]) -> Result<f64> {
    check_len(dataset, m0_hat, "m0_hat")?;
    let t = dataset.treatment();
    let y = dataset.outcome();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..dataset.n() {
        num += t[i] * (y[i] - m0_hat[i]);
        den += t[i];
    }
    if den == 0.0 {
        return Err(Error::DegenerateTreatmentArm("no treated units".into()));
    }
    Ok(num / den)
}

/// Replaces entries with `1 - e < epsilon` by `1 - epsilon`.
pub fn trim_propensity(e_hat: &[f64], cfg: &TrimConfig) -> (Vec<f64>, usize) {
    let mut count = 0;
    let out = e_hat
        .iter()
        .map(|&e| {
            if 1.0 - e < cfg.epsilon {
                count += 1;
                1.0 - cfg.epsilon
            } else {
                e
            }
        })
        .collect();
    (out, count)
}

fn check_len(dataset: &Dataset, v: &[f64], name: &str) -> Result<()> {
    if v.len() != dataset.n() {
        return Err(Error::invalid(format!(
            "{name} has length {}, dataset has {} rows",
            v.len(),
            dataset.n()
        )));
    }
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::invalid(format!("non-finite {name} at row {i}")));
    }
    Ok(())
}

/// Shared body of IPW (`m0 = None`) and AIPW, returning the estimate and the
/// number of trimmed propensities.
fn weighted_att(
    dataset: &Dataset,
    e_hat: &[f64],
    m0_hat: Option<&[f64]>,
    cfg: &TrimConfig,
    norm: Normalization,
) -> Result<(f64, usize)> {
    check_len(dataset, e_hat, "e_hat")?;
    if let Some(i) = e_hat.iter().position(|e| !(0.0..=1.0).contains(e)) {
        return Err(Error::invalid(format!("propensity at row {i} lies outside [0, 1]")));
    }
    if let Some(m) = m0_hat {
        check_len(dataset, m, "m0_hat")?;
    }
    let (e, trimmed) = trim_propensity(e_hat, cfg);
    let t = dataset.treatment();
    let y = dataset.outcome();
    let (mut tr_sum, mut tr_n, mut c_sum, mut c_w) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..dataset.n() {
        let resid = y[i] - m0_hat.map_or(0.0, |m| m[i]);
        if t[i] == 1.0 {
            tr_sum += resid;
            tr_n += 1.0;
        } else {
            let w = e[i] / (1.0 - e[i]);
            c_sum += w * resid;
            c_w += w;
        }
    }
    if tr_n == 0.0 || tr_n == dataset.n() as f64 {
        return Err(Error::DegenerateTreatmentArm("both arms must be nonempty".into()));
    }
    let control = match norm {
        Normalization::Hajek => {
            if c_w == 0.0 {
                return Err(Error::DegenerateWeights("all control weights are zero".into()));
            }
            c_sum / c_w
        }
        Normalization::Unnormalized => c_sum / tr_n,
    };
    Ok((tr_sum / tr_n - control, trimmed))
}

pub fn att_ipw_hajek(dataset: &Dataset, e_hat: &[f64], cfg: &TrimConfig) -> Result<f64> {
    weighted_att(dataset, e_hat, None, cfg, Normalization::Hajek).map(|r| r.0)
}

pub fn att_aipw_hajek(dataset: &Dataset, e_hat: &[f64], m0_hat: &[f64], cfg: &TrimConfig) -> Result<f64> {
    weighted_att(dataset, e_hat, Some(m0_hat), cfg, Normalization::Hajek).map(|r| r.0)
}

/// IPW with the control sum divided by the treated count.
pub fn att_ipw_unnormalized(dataset: &Dataset, e_hat: &[f64], cfg: &TrimConfig) -> Result<f64> {
    weighted_att(dataset, e_hat, None, cfg, Normalization::Unnormalized).map(|r| r.0)
}

/// AIPW with the control sum divided by the treated count.
pub fn att_aipw_unnormalized(dataset: &Dataset, e_hat: &[f64], m0_hat: &[f64], cfg: &TrimConfig) -> Result<f64> {
    weighted_att(dataset, e_hat, Some(m0_hat), cfg, Normalization::Unnormalized).map(|r| r.0)
}

/// Applies `method` to fitted nuisance vectors.
pub fn apply_method(
    dataset: &Dataset,
    method: Method,
    m0_hat: &[f64],
    e_hat: &[f64],
    trim: &TrimConfig,
    norm: Normalization,
) -> Result<(f64, usize)> {
    match method {
        Method::Regr => att_regression(dataset, m0_hat).map(|v| (v, 0)),
        Method::Ipw => weighted_att(dataset, e_hat, None, trim, norm),
        Method::Aipw => weighted_att(dataset, e_hat, Some(m0_hat), trim, norm),
    }
}

/// Nuisance-model settings for covariate-level fits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GlmConfig {
    pub outcome_penalty: Penalty,
    pub propensity_penalty: Penalty,
    pub lambda: LambdaSpec,
    pub normalization: Normalization,
    pub slope_cap: f64,
}

impl Default for GlmConfig {
    fn default() -> Self {
        GlmConfig {
            outcome_penalty: Penalty::Lasso,
            propensity_penalty: Penalty::Lasso,
            lambda: LambdaSpec::Cv(glm::CvSpec::default()),
            normalization: Normalization::Hajek,
            slope_cap: SLOPE_CAP,
        }
    }
}

/// Covariate-level nuisance fits, shared by every score of a replication.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateFits {
    pub m0_hat: Vec<f64>,
    pub e_hat: Vec<f64>,
    pub outcome: Option<FittedGlm>,
    pub propensity: Option<FittedGlm>,
}

impl CovariateFits {
    /// Prognostic direction estimate (zero for oracle fits).
    pub fn alpha_raw(&self) -> Vec<f64> {
        self.outcome.as_ref().map(|m| m.coefficients.clone()).unwrap_or_default()
    }

    /// Propensity direction estimate (zero for oracle fits).
    pub fn beta_raw(&self) -> Vec<f64> {
        self.propensity.as_ref().map(|m| m.coefficients.clone()).unwrap_or_default()
    }
}

/// Outcome model on controls, propensity model on all units.
pub fn fit_covariate_models(dataset: &Dataset, cfg: &GlmConfig) -> Result<CovariateFits> {
    let propensity = fit_propensity(dataset, cfg)?;
    fit_covariate_models_given(dataset, cfg, propensity)
}

/// Propensity model on all units.
pub fn fit_propensity(dataset: &Dataset, cfg: &GlmConfig) -> Result<FittedGlm> {
    let fit = glm::fit_glm(
        dataset.design(),
        dataset.treatment(),
        Family::Logistic,
        cfg.propensity_penalty,
        &cfg.lambda,
    )?;
    if !fit.converged {
        log::warn!("propensity fit hit its iteration cap");
    }
    Ok(fit)
}

/// Outcome model on controls next to an already fitted propensity model.
pub fn fit_covariate_models_given(dataset: &Dataset, cfg: &GlmConfig, propensity: FittedGlm) -> Result<CovariateFits> {
    if propensity.coefficients.len() != dataset.p() || propensity.family != Family::Logistic {
        return Err(Error::invalid("propensity model does not match the dataset"));
    }
    let controls = dataset.control_rows();
    let xc = dataset.design().select_rows(&controls);
    let yc: Vec<f64> = controls.iter().map(|&i| dataset.outcome()[i]).collect();
    let outcome = glm::fit_glm(&xc, &yc, Family::Linear, cfg.outcome_penalty, &cfg.lambda)?;
    if !outcome.converged {
        log::warn!("outcome fit hit its iteration cap");
    }
    Ok(CovariateFits {
        m0_hat: glm::predict(&outcome, dataset.design())?,
        e_hat: glm::predict(&propensity, dataset.design())?,
        outcome: Some(outcome),
        propensity: Some(propensity),
    })
}

/// Uses the attached oracle surfaces as the fitted models.
pub fn oracle_fits(dataset: &Dataset) -> Result<CovariateFits> {
    match (dataset.oracle_m0(), dataset.oracle_propensity()) {
        (Some(m0), Some(e)) => Ok(CovariateFits {
            m0_hat: m0.to_vec(),
            e_hat: e.to_vec(),
            outcome: None,
            propensity: None,
        }),
        _ => Err(Error::invalid("oracle fits need mu0 and the true propensity")),
    }
}

pub fn estimate_on_covariates(
    dataset: &Dataset,
    fits: &CovariateFits,
    method: Method,
    trim: &TrimConfig,
    norm: Normalization,
) -> Result<EstimatorResult> {
    let (tau_hat, trim_count) = apply_method(dataset, method, &fits.m0_hat, &fits.e_hat, trim, norm)?;
    Ok(EstimatorResult {
        tau_hat,
        method,
        score_label: "X".into(),
        fallback: Fallback::None,
        trim_count,
    })
}

/// A score to adjust for, with the degeneracy of the family it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreInput {
    pub label: String,
    pub degenerate: Degeneracy,
    pub gamma: Option<Vec<f64>>,
}

impl ScoreInput {
    pub fn from_score(label: impl Into<String>, score: &DeconfoundingScore) -> Self {
        ScoreInput {
            label: label.into(),
            degenerate: Degeneracy::Ok,
            gamma: Some(score.gamma.clone()),
        }
    }

    pub fn degenerate(label: impl Into<String>, degenerate: Degeneracy) -> Self {
        ScoreInput {
            label: label.into(),
            degenerate,
            gamma: None,
        }
    }
}

/// Unpenalized one-dimensional fits on a scalar score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreFits {
    pub m0_hat: Option<Vec<f64>>,
    pub e_hat: Vec<f64>,
    pub slope_capped: bool,
}

fn is_constant(v: &[f64]) -> bool {
    if v.is_empty() {
        return true;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    var.sqrt() <= 1e-12 * (1.0 + scale)
}

/// OLS of `y` on `(1, s)`.
pub fn ols_1d(s: &[f64], y: &[f64]) -> (f64, f64) {
    let n = s.len() as f64;
    let ms = s.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in s.iter().zip(y) {
        sxy += (a - ms) * (b - my);
        sxx += (a - ms) * (a - ms);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - slope * ms, slope)
}

fn logistic_nll(s: &[f64], t: &[f64], a: f64, b: f64) -> f64 {
    s.iter()
        .zip(t)
        .map(|(&x, &y)| {
            let eta = a + b * x;
            crate::special::log1p_exp(eta) - y * eta
        })
        .sum()
}

fn intercept_only_newton(s: &[f64], t: &[f64], b: f64, a0: f64) -> f64 {
    let mut a = a0;
    for _ in 0..NEWTON_MAX_ITER {
        let (mut g, mut h) = (0.0, 0.0);
        for (&x, &y) in s.iter().zip(t) {
            let p = logistic(a + b * x);
            g += y - p;
            h += p * (1.0 - p);
        }
        if h <= 0.0 {
            break;
        }
        let step = g / h;
        a += step;
        if step.abs() < NEWTON_TOL {
            break;
        }
    }
    a
}

/// Maximum-likelihood logistic regression of `t` on `(1, s)` by Newton's
/// method with step halving. Returns `(intercept, slope, capped)`; when the
/// slope would exceed `cap` it is pinned there and the intercept refitted.
pub fn logistic_1d(s: &[f64], t: &[f64], cap: f64) -> (f64, f64, bool) {
    let n = s.len() as f64;
    let pbar = (t.iter().sum::<f64>() / n).clamp(1e-12, 1.0 - 1e-12);
    let (mut a, mut b) = ((pbar / (1.0 - pbar)).ln(), 0.0);
    let mut nll = logistic_nll(s, t, a, b);
    for _ in 0..NEWTON_MAX_ITER {
        let (mut g0, mut g1, mut h00, mut h01, mut h11) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&x, &y) in s.iter().zip(t) {
            let p = logistic(a + b * x);
            let w = p * (1.0 - p);
            g0 += y - p;
            g1 += (y - p) * x;
            h00 += w;
            h01 += w * x;
            h11 += w * x * x;
        }
        let det = h00 * h11 - h01 * h01;
        if !(det > 1e-300) {
            break;
        }
        let da = (h11 * g0 - h01 * g1) / det;
        let db = (h00 * g1 - h01 * g0) / det;
        let mut step = 1.0;
        let (mut na, mut nb, mut nn);
        loop {
            na = a + step * da;
            nb = b + step * db;
            nn = logistic_nll(s, t, na, nb);
            if nn <= nll || step < 1e-10 {
                break;
            }
            step *= 0.5;
        }
        let change = (na - a).abs().max((nb - b).abs());
        a = na;
        b = nb;
        nll = nn;
        if b.abs() > cap {
            let pinned = cap.copysign(b);
            return (intercept_only_newton(s, t, pinned, a), pinned, true);
        }
        if change < NEWTON_TOL {
            break;
        }
    }
    (a, b, false)
}

/// Fits the score-level nuisance models, or reports which fallback applies.
pub fn fit_score_models(
    dataset: &Dataset,
    score: &[f64],
    need_outcome: bool,
    slope_cap: f64,
) -> std::result::Result<ScoreFits, Fallback> {
    if is_constant(score) {
        return Err(Fallback::ZeroVariance);
    }
    let controls = dataset.control_rows();
    let m0_hat = if need_outcome {
        let sc: Vec<f64> = controls.iter().map(|&i| score[i]).collect();
        if is_constant(&sc) {
            return Err(Fallback::ZeroVariance);
        }
        let yc: Vec<f64> = controls.iter().map(|&i| dataset.outcome()[i]).collect();
        let (a, b) = ols_1d(&sc, &yc);
        Some(score.iter().map(|s| a + b * s).collect())
    } else {
        None
    };
    let (a, b, slope_capped) = logistic_1d(score, dataset.treatment(), slope_cap);
    if slope_capped {
        log::debug!("one-dimensional propensity slope capped at {slope_cap}");
    }
    let e_hat = score.iter().map(|s| logistic(a + b * s)).collect();
    Ok(ScoreFits {
        m0_hat,
        e_hat,
        slope_capped,
    })
}

/// Runs each method on a score, falling back to the covariate estimates
/// when the family is degenerate or the score has no variance.
pub fn estimate_methods_with_score(
    dataset: &Dataset,
    score: &ScoreInput,
    methods: &[Method],
    covariate: &CovariateFits,
    trim: &TrimConfig,
    glm_cfg: &GlmConfig,
) -> Result<Vec<EstimatorResult>> {
    let fallback_all = |kind: Fallback| -> Result<Vec<EstimatorResult>> {
        methods
            .iter()
            .map(|&m| {
                let mut r = estimate_on_covariates(dataset, covariate, m, trim, glm_cfg.normalization)?;
                r.score_label = score.label.clone();
                r.fallback = kind;
                Ok(r)
            })
            .collect()
    };
    let gamma = match (&score.gamma, score.degenerate) {
        (_, Degeneracy::NearZeroCoefficients) | (None, _) => return fallback_all(Fallback::ZeroCoefficients),
        (Some(g), _) => g,
    };
    let s = project_score(gamma, dataset.design())?;
    let need_outcome = methods.iter().any(|m| m.needs_outcome_model());
    let fits = match fit_score_models(dataset, &s, need_outcome, glm_cfg.slope_cap) {
        Ok(f) => f,
        Err(kind) => return fallback_all(kind),
    };
    methods
        .iter()
        .map(|&m| {
            let m0 = fits.m0_hat.as_deref().unwrap_or(&[]);
            let (tau_hat, trim_count) = match m {
                Method::Regr => (att_regression(dataset, m0)?, 0),
                _ => apply_method(dataset, m, m0, &fits.e_hat, trim, glm_cfg.normalization)?,
            };
            Ok(EstimatorResult {
                tau_hat,
                method: m,
                score_label: score.label.clone(),
                fallback: Fallback::None,
                trim_count,
            })
        })
        .collect()
}

/// Single-method entry point. Without a score the penalized covariate
/// models are used; `covariate` supplies precomputed fits, otherwise they
/// are fitted here.
pub fn estimate_att_with_score(
    dataset: &Dataset,
    score: Option<&ScoreInput>,
    method: Method,
    glm_cfg: &GlmConfig,
    trim: &TrimConfig,
    covariate: Option<&CovariateFits>,
) -> Result<EstimatorResult> {
    let owned;
    let fits = match covariate {
        Some(f) => f,
        None => {
            owned = fit_covariate_models(dataset, glm_cfg)?;
            &owned
        }
    };
    match score {
        None => estimate_on_covariates(dataset, fits, method, trim, glm_cfg.normalization),
        Some(s) => Ok(estimate_methods_with_score(dataset, s, &[method], fits, trim, glm_cfg)?.remove(0)),
    }
}
