use serde::{Deserialize, Serialize};

use super::curve::{run_overlap_curve, CurveMethod};
use crate::dgp::{generate_coefficients, CoefficientPair, DgpConfig};
use crate::error::Result;
use crate::glm::design::dot;
use crate::overlap::{
    confounding_bias_oracle, deviation_z, efficiency_bound_gaussian, efficiency_bound_with_coefficients, lemma2_lower_bound,
    lemma3_check, overlap_divergence_closed_form, overlap_divergence_indicator, overlap_divergence_quadrature,
    overlap_divergence_relu, owens_t, Assumption, LinkSpec, McConfig, QuadratureConfig,
};
use crate::scores::{
    default_w_grid, gamma_from_w, hyperbola_residual, normalize_and_align, sample_orthocomplement, ScoreFamily,
    WCoordinate, ZERO_THRESHOLD,
};

/// Monte Carlo sizes of the suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Draws for the bias oracle, the overlap identity and the randomized
    /// efficiency bound.
    pub samples: usize,
    /// Draws per grid point of the efficiency lower-bound sweep.
    pub sweep_samples: usize,
}

impl VerifyConfig {
    pub fn new(seed: u64) -> Self {
        VerifyConfig {
            seed,
            samples: 1_000_000,
            sweep_samples: 100_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        McConfig::new(self.samples, self.seed).validate()?;
        McConfig::new(self.sweep_samples, self.seed).validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// The statistic compared against `threshold`.
    pub observed: f64,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl VerificationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

struct Checks(Vec<CheckResult>);

impl Checks {
    /// Passes when `observed <= threshold`.
    fn at_most(&mut self, name: &str, observed: f64, threshold: f64, detail: String) {
        self.0.push(CheckResult {
            name: name.into(),
            passed: observed <= threshold,
            observed,
            threshold,
            detail,
        });
    }

    /// Passes when `observed >= threshold`.
    fn at_least(&mut self, name: &str, observed: f64, threshold: f64, detail: String) {
        self.0.push(CheckResult {
            name: name.into(),
            passed: observed >= threshold,
            observed,
            threshold,
            detail,
        });
    }

    fn failed(&mut self, name: &str, err: crate::error::Error) {
        self.0.push(CheckResult {
            name: name.into(),
            passed: false,
            observed: f64::NAN,
            threshold: f64::NAN,
            detail: format!("error: {err}"),
        });
    }
}

fn family(p: usize, c: f64, seed: u64) -> Result<(CoefficientPair, ScoreFamily, Vec<f64>)> {
    let support: Vec<usize> = (0..p).collect();
    let coeffs = generate_coefficients(p, &support, c, seed)?;
    let fam = normalize_and_align(&coeffs.alpha, &coeffs.beta, ZERO_THRESHOLD)?;
    let ortho = sample_orthocomplement(&fam, seed)?;
    Ok((coeffs, fam, ortho))
}

fn b_grid() -> Vec<f64> {
    (0..=10).map(|k| k as f64 / 10.0).collect()
}

fn hyperbola_checks(out: &mut Checks, seed: u64) -> Result<()> {
    let mut worst_res: f64 = 0.0;
    let mut worst_norm: f64 = 0.0;
    let mut worst_end: f64 = 0.0;
    for c in [0.25, 0.5, 0.75] {
        let (_, fam, ortho) = family(8, c, seed)?;
        for w in default_w_grid() {
            let g = gamma_from_w(&fam, &ortho, WCoordinate::new(w)?)?.gamma;
            worst_res = worst_res.max(hyperbola_residual(&g, fam.alpha(), fam.beta()).abs());
            worst_norm = worst_norm.max((dot(&g, &g).sqrt() - 1.0).abs());
            let end = match w {
                w if w == -1.0 => Some(fam.alpha()),
                w if w == 1.0 => Some(fam.beta()),
                _ => None,
            };
            if let Some(e) = end {
                worst_end = worst_end.max(g.iter().zip(e).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
            }
        }
    }
    let detail = "21 grid w values, c in {0.25, 0.5, 0.75}".to_string();
    out.at_most("hyperbola_residual", worst_res, 1e-12, detail.clone());
    out.at_most("score_unit_norm", worst_norm, 1e-12, detail.clone());
    out.at_most("score_endpoints", worst_end, 1e-12, detail);
    Ok(())
}

fn bias_checks(out: &mut Checks, cfg: &VerifyConfig) -> Result<()> {
    let (coeffs, fam, ortho) = family(5, 0.75, cfg.seed)?;
    let mc = McConfig::new(cfg.samples, cfg.seed);
    let m = LinkSpec::identity();
    let h = LinkSpec::logistic();
    let mut worst: f64 = 0.0;
    for w in default_w_grid() {
        let g = gamma_from_w(&fam, &ortho, WCoordinate::new(w)?)?.gamma;
        let est = confounding_bias_oracle(fam.alpha(), fam.beta(), &g, &m, &h, &mc)?;
        worst = worst.max(est.z_score(0.0));
    }
    out.at_most(
        "confounding_bias_zero_on_family",
        worst,
        4.0,
        "max |estimate| / stderr over 21 grid w, c = 0.75, p = 5".into(),
    );
    let mut u1: Vec<f64> = coeffs.alpha.iter().zip(&coeffs.beta).map(|(a, b)| a + b).collect();
    let norm = dot(&u1, &u1).sqrt();
    u1.iter_mut().for_each(|x| *x /= norm);
    let est = confounding_bias_oracle(fam.alpha(), fam.beta(), &u1, &m, &h, &mc)?;
    out.at_least(
        "confounding_bias_detected_off_family",
        est.z_score(0.0),
        6.0,
        format!("gamma = (alpha + beta) / |alpha + beta|, estimate {}", est.estimate),
    );

    let h5 = h.with_assumption(Assumption::DensityRatio);
    let quad = QuadratureConfig::default();
    let mut worst_cs = f64::NEG_INFINITY;
    for w in [-0.5, 0.0, 0.5] {
        let g = gamma_from_w(&fam, &ortho, WCoordinate::new(w)?)?.gamma;
        let mut perturbed: Vec<f64> = g.iter().zip(&u1).map(|(a, b)| a + 0.5 * b).collect();
        let n = dot(&perturbed, &perturbed).sqrt();
        perturbed.iter_mut().for_each(|x| *x /= n);
        let est = confounding_bias_oracle(fam.alpha(), fam.beta(), &perturbed, &m, &h5, &mc)?;
        let l3 = lemma3_check(fam.beta(), &perturbed, &h5, &quad, &mc)?;
        let a = dot(fam.alpha(), &perturbed);
        let bound = (1.0 - a * a).sqrt() * l3.lhs.max(0.0).sqrt();
        worst_cs = worst_cs.max((est.estimate.abs() - 4.0 * est.stderr) - bound);
    }
    out.at_most(
        "cauchy_schwarz_bias_bound",
        worst_cs,
        0.0,
        "max(|bias| - 4 SE - bound) over three off-family directions".into(),
    );
    Ok(())
}

fn divergence_checks(out: &mut Checks, cfg: &VerifyConfig) -> Result<()> {
    let quad = QuadratureConfig::default();
    let s = 0.5f64.sqrt();
    let indicator = [
        (overlap_divergence_indicator(0.0, 0.0), 1.0),
        (overlap_divergence_indicator(0.0, s), 4.0 / 3.0),
        (overlap_divergence_indicator(0.0, 1.0), 2.0),
    ];
    let relu = [
        (overlap_divergence_relu(0.0), 1.0),
        (overlap_divergence_relu(s), 0.75f64.sqrt() + std::f64::consts::FRAC_PI_4 + 0.5 * 0.5f64.asin()),
        (overlap_divergence_relu(1.0), std::f64::consts::PI),
    ];
    let dev = |v: &[(f64, f64)]| v.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    out.at_most("indicator_closed_form", dev(&indicator), 1e-10, "z0 = 0 at b in {0, sqrt(0.5), 1}".into());
    out.at_most("relu_closed_form", dev(&relu), 1e-10, "b in {0, sqrt(0.5), 1}".into());
    let owen = [(owens_t(0.0, 1.0), 0.125), (owens_t(0.0, 1.0 / 3f64.sqrt()), 1.0 / 12.0), (owens_t(1.3, 0.0), 0.0)];
    out.at_most("owens_t_identities", dev(&owen), 1e-13, "T(0,1), T(0,1/sqrt 3), T(h,0)".into());

    for (name, link) in [
        ("indicator_quadrature_vs_closed_form", LinkSpec::indicator(0.0)),
        ("relu_quadrature_vs_closed_form", LinkSpec::relu()),
        ("exp_tilt_quadrature_vs_closed_form", LinkSpec::exp_tilt(1.0)),
    ] {
        let mut worst: f64 = 0.0;
        for b in b_grid() {
            let q = overlap_divergence_quadrature(b, &link, 0.5, &quad)?;
            let c = overlap_divergence_closed_form(b, &link).expect("closed form exists");
            worst = worst.max((q - c).abs());
        }
        out.at_most(name, worst, 1e-6, "b in {0, 0.1, ..., 1}".into());
    }

    let logistic = LinkSpec::logistic();
    let links = [
        ("logistic", logistic, logistic.standard_mean()),
        ("exp_tilt", LinkSpec::exp_tilt(1.0), 0.5),
        ("indicator", LinkSpec::indicator(0.0), 0.5),
        ("relu", LinkSpec::relu(), 0.5),
    ];
    for (name, link, pi1) in links {
        let mut values = Vec::new();
        let mut asym: f64 = 0.0;
        for b in b_grid() {
            let v = overlap_divergence_quadrature(b, &link, pi1, &quad)?;
            asym = asym.max((v - overlap_divergence_quadrature(-b, &link, pi1, &quad)?).abs());
            values.push(v);
        }
        let min_step = values.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        out.at_least(&format!("{name}_strictly_increasing"), min_step, 1e-9, "smallest step over the b grid".into());
        out.at_most(&format!("{name}_symmetric"), asym, 0.0, "max |O(b) - O(-b)|".into());
    }

    let mc = McConfig::new(cfg.samples, cfg.seed);
    let beta = [1.0, 0.0];
    let mut worst_z: f64 = 0.0;
    let mut min_lhs = f64::INFINITY;
    for b in [0.0f64, 0.5, 1.0] {
        let gamma = [b, (1.0 - b * b).sqrt()];
        let r = lemma3_check(&beta, &gamma, &LinkSpec::exp_tilt(1.0), &quad, &mc)?;
        let z = deviation_z(r.lhs - r.rhs, r.stderr);
        worst_z = worst_z.max(z);
        min_lhs = min_lhs.min(r.lhs);
    }
    out.at_most("overlap_identity_exp_tilt", worst_z, 4.0, "max |lhs - rhs| / SE at b in {0, 0.5, 1}".into());
    for link in [LinkSpec::relu(), LinkSpec::indicator(0.0), LinkSpec::logistic().with_assumption(Assumption::DensityRatio)] {
        let full = overlap_divergence_quadrature(1.0, &link, 0.5, &quad)?;
        for b in b_grid() {
            min_lhs = min_lhs.min(full - overlap_divergence_quadrature(b, &link, 0.5, &quad)?);
        }
    }
    out.at_least("overlap_identity_nonnegative", min_lhs, -1e-9, "min lhs over links and b".into());

    let mut worst_gap = f64::NEG_INFINITY;
    for c in [0.25, 0.5, 0.75] {
        let curve = run_overlap_curve(&logistic, c, &default_w_grid(), None, &quad)?;
        let v = curve.values(CurveMethod::Quadrature);
        let min_rest = v[1..].iter().cloned().fold(f64::INFINITY, f64::min);
        worst_gap = worst_gap.max(v[0] - min_rest);
    }
    out.at_most("prognostic_end_minimizes_divergence", worst_gap, 0.0, "O(w = -1) - min over other w, c in {0.25, 0.5, 0.75}".into());
    Ok(())
}

fn efficiency_checks(out: &mut Checks, cfg: &VerifyConfig) -> Result<()> {
    let randomized = DgpConfig {
        s_t: 0.0,
        beta0: 0.0,
        seed: cfg.seed,
        ..DgpConfig::default()
    };
    let r = efficiency_bound_gaussian(&randomized, None, &McConfig::new(cfg.samples, cfg.seed))?;
    let z = deviation_z(r.estimate - 4.0, r.stderr);
    out.at_most("efficiency_bound_randomized", z, 4.0, format!("estimate {}", r.estimate));

    let quad = QuadratureConfig::default();
    let mut worst = f64::NEG_INFINITY;
    for s_t in [1.0, 4.0] {
        let dgp = DgpConfig {
            s_t,
            seed: cfg.seed,
            ..DgpConfig::default()
        };
        let coeffs = generate_coefficients(dgp.p, &dgp.support(), dgp.k, cfg.seed)?;
        let fam = normalize_and_align(&coeffs.alpha, &coeffs.beta, ZERO_THRESHOLD)?;
        let ortho = sample_orthocomplement(&fam, cfg.seed)?;
        for w in default_w_grid() {
            let g = gamma_from_w(&fam, &ortho, WCoordinate::new(w)?)?.gamma;
            let v = efficiency_bound_with_coefficients(&dgp, &coeffs, Some(&g), &McConfig::new(cfg.sweep_samples, cfg.seed))?;
            let lower = lemma2_lower_bound(&dgp, &coeffs, &g, &quad)?;
            worst = worst.max(lower - (v.estimate + 4.0 * v.stderr));
        }
    }
    out.at_most("efficiency_lower_bound", worst, 0.0, "max(bound - (V + 4 SE)) over 21 grid w, s_T in {1, 4}".into());
    Ok(())
}

/// Runs every check at the default Monte Carlo sizes.
pub fn run_verification_suite(seed: u64) -> VerificationReport {
    run_verification_suite_with(&VerifyConfig::new(seed))
}

pub fn run_verification_suite_with(cfg: &VerifyConfig) -> VerificationReport {
    let mut out = Checks(Vec::new());
    if let Err(e) = hyperbola_checks(&mut out, cfg.seed) {
        out.failed("hyperbola_family", e);
    }
    if let Err(e) = bias_checks(&mut out, cfg) {
        out.failed("confounding_bias_oracle", e);
    }
    if let Err(e) = divergence_checks(&mut out, cfg) {
        out.failed("overlap_divergence", e);
    }
    if let Err(e) = efficiency_checks(&mut out, cfg) {
        out.failed("efficiency_bound", e);
    }
    VerificationReport {
        seed: cfg.seed,
        checks: out.0,
    }
}
