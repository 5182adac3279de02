//! Penalized linear and logistic regression.
//!
//! Features are standardized internally and coefficients are reported on the
//! original scale. The intercept is never penalized. Lasso problems are solved
//! by coordinate descent with sequential strong-rule screening and a KKT
//! re-check; ridge and unpenalized problems are first rotated onto the row
//! space of the design. The logistic family wraps the same inner solvers in
//! iteratively reweighted least squares.

mod cv;
pub mod design;
mod ridge;
mod solver;
pub mod standardize;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use cv::{fold_assignment, CvCurve};
pub use design::DesignMatrix;
pub use standardize::Standardizer;

use crate::error::{Error, Result};
use crate::special::logistic;
use ridge::Rotation;
use solver::{Problem, Reg, Solution, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Linear,
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Penalty {
    Lasso,
    Ridge,
    None,
}

impl fmt::Display for Penalty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Penalty::Lasso => "lasso",
            Penalty::Ridge => "ridge",
            Penalty::None => "none",
        })
    }
}

impl FromStr for Penalty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lasso" => Ok(Penalty::Lasso),
            "ridge" => Ok(Penalty::Ridge),
            "none" => Ok(Penalty::None),
            other => Err(Error::Config(format!("unknown penalty `{other}`"))),
        }
    }
}

/// How the cross-validated curve picks its lambda.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvRule {
    /// Minimum mean held-out deviance.
    #[default]
    Min,
    /// Largest lambda within one standard error of the minimum.
    OneSe,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvSpec {
    pub folds: usize,
    pub grid_size: usize,
    /// `None` picks 0.01 when `n < p` and 1e-4 otherwise.
    pub grid_min_ratio: Option<f64>,
    pub seed: u64,
    pub rule: CvRule,
}

impl Default for CvSpec {
    fn default() -> Self {
        CvSpec {
            folds: 10,
            grid_size: 100,
            grid_min_ratio: None,
            seed: 0,
            rule: CvRule::Min,
        }
    }
}

impl CvSpec {
    /// Checks that do not depend on the data.
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::invalid(format!("folds must be at least 2, got {}", self.folds)));
        }
        if self.grid_size < 2 {
            return Err(Error::invalid("lambda grid needs at least 2 values"));
        }
        if let Some(r) = self.grid_min_ratio {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::invalid(format!("grid_min_ratio must lie in (0, 1), got {r}")));
            }
        }
        Ok(())
    }

    fn validate_for(&self, n: usize) -> Result<()> {
        self.validate()?;
        if self.folds > n {
            return Err(Error::invalid(format!("folds must lie in [2, {n}], got {}", self.folds)));
        }
        Ok(())
    }

    fn ratio(&self, n: usize, p: usize) -> f64 {
        self.grid_min_ratio
            .unwrap_or(if n < p { 0.01 } else { 1e-4 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaSpec {
    Fixed(f64),
    Cv(CvSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedGlm {
    pub family: Family,
    pub penalty: Penalty,
    pub lambda: f64,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub converged: bool,
    /// Coordinate sweeps (linear) or IRLS steps (logistic).
    pub iterations: usize,
    /// Training deviance (residual sum of squares for linear).
    pub deviance: f64,
}

impl FittedGlm {
    pub fn p(&self) -> usize {
        self.coefficients.len()
    }
}

fn validate_response(design: &DesignMatrix, y: &[f64], family: Family) -> Result<()> {
    if y.len() != design.n() {
        return Err(Error::invalid(format!(
            "response has length {}, design has {} rows",
            y.len(),
            design.n()
        )));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite response at row {i}")));
    }
    if family == Family::Logistic {
        if let Some(i) = y.iter().position(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::invalid(format!(
                "logistic response must be 0 or 1, row {i} has {}",
                y[i]
            )));
        }
        let ones = y.iter().filter(|&&v| v == 1.0).count();
        if ones == 0 || ones == y.len() {
            return Err(Error::DegenerateResponse(
                "logistic response contains a single class".into(),
            ));
        }
    }
    Ok(())
}

/// Standardized design plus, for quadratic penalties, its row-space rotation.
pub(crate) struct Prepared {
    pub std: Standardizer,
    pub xs: DesignMatrix,
    rotation: Option<Rotation>,
}

impl Prepared {
    pub fn new(design: &DesignMatrix, penalty: Penalty) -> Self {
        let std = Standardizer::fit(design);
        let xs = std.transform(design);
        let rotation = match penalty {
            Penalty::Lasso => None,
            Penalty::Ridge | Penalty::None => Some(Rotation::new(&xs)),
        };
        Prepared { std, xs, rotation }
    }

    pub fn lambda_max(&self, y: &[f64], family: Family) -> f64 {
        let prob = Problem {
            x: &self.xs,
            y,
            family,
            reg: Reg::L1,
            pinned: &self.std.constant,
            tol: Tolerance::Strict,
        };
        prob.lambda_max()
    }

    /// Standardized-scale solutions along `lambdas`. `tol` applies to the
    /// L1 problem; the rotated quadratic problems are always solved strictly.
    pub fn path(&self, y: &[f64], family: Family, lambdas: &[f64], truncate: bool, tol: Tolerance) -> Vec<Solution> {
        match &self.rotation {
            None => self.lasso(y, family, tol).path(lambdas, truncate),
            Some(rot) => {
                let pinned = vec![false; rot.r.p()];
                let prob = Problem {
                    x: &rot.r,
                    y,
                    family,
                    reg: Reg::L2,
                    pinned: &pinned,
                    tol: Tolerance::Strict,
                };
                prob.path(lambdas, truncate)
                    .into_iter()
                    .map(|mut s| {
                        s.coef = rot.back(&s.coef);
                        s
                    })
                    .collect()
            }
        }
    }

    fn lasso<'a>(&'a self, y: &'a [f64], family: Family, tol: Tolerance) -> Problem<'a> {
        Problem {
            x: &self.xs,
            y,
            family,
            reg: Reg::L1,
            pinned: &self.std.constant,
            tol,
        }
    }

    /// Brings a path solution to the strict tolerance.
    pub fn refine(&self, y: &[f64], family: Family, sol: Solution) -> Solution {
        match &self.rotation {
            None => self.lasso(y, family, Tolerance::Strict).refine(&sol),
            Some(_) => sol,
        }
    }

    fn finish(&self, sol: Solution, family: Family, penalty: Penalty) -> FittedGlm {
        let (intercept, coefficients) = self.std.to_original(sol.intercept, &sol.coef);
        FittedGlm {
            family,
            penalty,
            lambda: sol.lambda,
            intercept,
            coefficients,
            converged: sol.converged,
            iterations: sol.iterations,
            deviance: sol.deviance,
        }
    }
}

/// Geometric grid from `lambda_max` down to `ratio * lambda_max`.
pub(crate) fn lambda_grid(lambda_max: f64, size: usize, ratio: f64) -> Vec<f64> {
    let top = if lambda_max > 0.0 { lambda_max } else { f64::MIN_POSITIVE };
    (0..size)
        .map(|k| top * ratio.powf(k as f64 / (size - 1) as f64))
        .collect()
}

pub fn fit_glm(
    design: &DesignMatrix,
    response: &[f64],
    family: Family,
    penalty: Penalty,
    lambda_spec: &LambdaSpec,
) -> Result<FittedGlm> {
    validate_response(design, response, family)?;
    match (penalty, lambda_spec) {
        (Penalty::None, _) => {
            let prep = Prepared::new(design, penalty);
            let sol = prep.path(response, family, &[0.0], false, Tolerance::Strict).remove(0);
            Ok(prep.finish(sol, family, penalty))
        }
        (_, LambdaSpec::Fixed(lambda)) => {
            if !(lambda.is_finite() && *lambda >= 0.0) {
                return Err(Error::invalid(format!("lambda must be finite and nonnegative, got {lambda}")));
            }
            let prep = Prepared::new(design, penalty);
            let sol = match &prep.rotation {
                None => prep.lasso(response, family, Tolerance::Strict).solve_single(*lambda, None),
                Some(_) => prep.path(response, family, &[*lambda], false, Tolerance::Strict).remove(0),
            };
            Ok(prep.finish(sol, family, penalty))
        }
        (_, LambdaSpec::Cv(spec)) => {
            let (curve, prep, mut path) = cv::run(design, response, family, penalty, spec)?;
            let sol = prep.refine(response, family, path.swap_remove(curve.selected));
            Ok(prep.finish(sol, family, penalty))
        }
    }
}

/// Lambda chosen by k-fold cross-validation over the geometric grid.
pub fn cv_lambda(
    design: &DesignMatrix,
    response: &[f64],
    family: Family,
    penalty: Penalty,
    spec: &CvSpec,
) -> Result<f64> {
    let curve = cv_curve(design, response, family, penalty, spec)?;
    Ok(curve.lambdas[curve.selected])
}

/// The full cross-validation curve behind [`cv_lambda`].
pub fn cv_curve(
    design: &DesignMatrix,
    response: &[f64],
    family: Family,
    penalty: Penalty,
    spec: &CvSpec,
) -> Result<CvCurve> {
    validate_response(design, response, family)?;
    Ok(cv::run(design, response, family, penalty, spec)?.0)
}

pub fn predict(model: &FittedGlm, design: &DesignMatrix) -> Result<Vec<f64>> {
    if design.p() != model.p() {
        return Err(Error::invalid(format!(
            "design has {} columns, model has {}",
            design.p(),
            model.p()
        )));
    }
    let mut eta = design.mul_vec(&model.coefficients)?;
    eta.iter_mut().for_each(|e| *e += model.intercept);
    if model.family == Family::Logistic {
        for e in eta.iter_mut() {
            *e = logistic(*e).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
        }
    }
    Ok(eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian_design(n: usize, p: usize, seed: u64) -> DesignMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DesignMatrix::from_fn(n, p, |_, j| rng.sample::<f64, _>(StandardNormal) * (1.0 + j as f64) + j as f64).unwrap()
    }

    #[test]
    fn ridge_zero_lambda_is_ols() {
        let x = DesignMatrix::from_rows(&[[1.0], [2.0], [3.0]]).unwrap();
        let m = fit_glm(&x, &[2.0, 4.0, 6.0], Family::Linear, Penalty::Ridge, &LambdaSpec::Fixed(0.0)).unwrap();
        assert!(m.intercept.abs() < 1e-12);
        assert!((m.coefficients[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn huge_ridge_penalty_returns_mean() {
        let x = gaussian_design(30, 4, 1);
        let y: Vec<f64> = (0..30).map(|i| x.get(i, 0) + i as f64 * 0.1).collect();
        let m = fit_glm(&x, &y, Family::Linear, Penalty::Ridge, &LambdaSpec::Fixed(1e9)).unwrap();
        let ybar = y.iter().sum::<f64>() / 30.0;
        assert!(m.coefficients.iter().all(|b| b.abs() < 1e-7));
        let pred = predict(&m, &x).unwrap();
        assert!(pred.iter().all(|v| (v - ybar).abs() < 1e-6));
    }

    #[test]
    fn orthonormal_lasso_is_soft_thresholded_ols() {
        // Centered orthogonal columns with unit population variance.
        let n = 8;
        let h = |i: usize, j: usize| -> f64 {
            let bits = (i & (j + 1)).count_ones();
            if bits % 2 == 0 { 1.0 } else { -1.0 }
        };
        let x = DesignMatrix::from_fn(n, 3, |i, j| h(i, [0usize, 1, 3][j])).unwrap();
        for j in 0..3 {
            assert!(x.col(j).iter().sum::<f64>().abs() < 1e-12);
        }
        let y: Vec<f64> = (0..n).map(|i| 1.0 + 2.0 * x.get(i, 0) - 0.3 * x.get(i, 1) + 0.05 * (i as f64 - 3.5)).collect();
        let ols = fit_glm(&x, &y, Family::Linear, Penalty::None, &LambdaSpec::Fixed(0.0)).unwrap();
        let lambda = 0.25;
        let m = fit_glm(&x, &y, Family::Linear, Penalty::Lasso, &LambdaSpec::Fixed(lambda)).unwrap();
        for j in 0..3 {
            let b = ols.coefficients[j];
            let expect = b.signum() * (b.abs() - lambda).max(0.0);
            assert!((m.coefficients[j] - expect).abs() < 1e-7, "j={j}: {} vs {expect}", m.coefficients[j]);
        }
    }

    #[test]
    fn ridge_matches_direct_solve_on_standardized_data() {
        for (n, p) in [(40, 6), (15, 25)] {
            let x = gaussian_design(n, p, 7);
            let y: Vec<f64> = (0..n).map(|i| x.get(i, 0) - 2.0 * x.get(i, p - 1) + (i % 3) as f64).collect();
            let lambda = 0.37;
            let m = fit_glm(&x, &y, Family::Linear, Penalty::Ridge, &LambdaSpec::Fixed(lambda)).unwrap();
            let std = Standardizer::fit(&x);
            let xs = std.transform(&x);
            let xm = nalgebra::DMatrix::from_column_slice(n, p, xs.as_column_major());
            let yv = nalgebra::DVector::from_column_slice(&y);
            let a = xm.tr_mul(&xm) / n as f64 + nalgebra::DMatrix::identity(p, p) * lambda;
            let rhs = xm.tr_mul(&yv) / n as f64;
            let direct = a.lu().solve(&rhs).unwrap();
            for j in 0..p {
                let std_coef = m.coefficients[j] * std.scales[j];
                assert!((std_coef - direct[j]).abs() < 1e-8, "({n},{p}) j={j}");
            }
        }
    }

    #[test]
    fn standardization_round_trip() {
        let (n, p) = (50, 8);
        let x = gaussian_design(n, p, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let y: Vec<f64> = (0..n).map(|i| 0.5 * x.get(i, 2) + rng.sample::<f64, _>(StandardNormal)).collect();
        let yb: Vec<f64> = y.iter().map(|&v| if v > 1.0 { 1.0 } else { 0.0 }).collect();
        for (family, resp) in [(Family::Linear, &y), (Family::Logistic, &yb)] {
            for penalty in [Penalty::Lasso, Penalty::Ridge] {
                let prep = Prepared::new(&x, penalty);
                let lambda = 0.05 * prep.lambda_max(resp, family);
                let sol = prep.path(resp, family, &[lambda], false, Tolerance::Strict).remove(0);
                let internal: Vec<f64> = prep
                    .xs
                    .mul_vec(&sol.coef)
                    .unwrap()
                    .into_iter()
                    .map(|e| e + sol.intercept)
                    .collect();
                let model = prep.finish(sol, family, penalty);
                let mut outer = x.mul_vec(&model.coefficients).unwrap();
                outer.iter_mut().for_each(|e| *e += model.intercept);
                for (a, b) in internal.iter().zip(&outer) {
                    assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0), "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn predict_contract() {
        let zero = FittedGlm {
            family: Family::Logistic,
            penalty: Penalty::None,
            lambda: 0.0,
            intercept: 0.0,
            coefficients: vec![0.0, 0.0],
            converged: true,
            iterations: 0,
            deviance: 0.0,
        };
        let x = DesignMatrix::from_rows(&[[1.0, 2.0], [3.0, -4.0]]).unwrap();
        assert_eq!(predict(&zero, &x).unwrap(), vec![0.5, 0.5]);
        let lin = FittedGlm {
            family: Family::Linear,
            intercept: 1.0,
            coefficients: vec![2.0],
            ..zero.clone()
        };
        let x1 = DesignMatrix::from_rows(&[[3.0], [0.0]]).unwrap();
        assert_eq!(predict(&lin, &x1).unwrap()[0], 7.0);
        let lg = FittedGlm {
            intercept: 0.0,
            coefficients: vec![1.0],
            ..zero.clone()
        };
        let x3 = DesignMatrix::from_rows(&[[3f64.ln()], [800.0]]).unwrap();
        let pr = predict(&lg, &x3).unwrap();
        assert!((pr[0] - 0.75).abs() < 1e-15);
        assert!(pr[1] < 1.0);
        assert!(predict(&lg, &x).is_err());
    }

    #[test]
    fn input_validation() {
        let x = DesignMatrix::from_rows(&[[1.0], [2.0], [3.0]]).unwrap();
        let fixed = LambdaSpec::Fixed(0.1);
        assert!(matches!(
            fit_glm(&x, &[1.0, 1.0, 1.0], Family::Logistic, Penalty::Lasso, &fixed),
            Err(Error::DegenerateResponse(_))
        ));
        assert!(matches!(
            fit_glm(&x, &[1.0, f64::NAN, 1.0], Family::Linear, Penalty::Lasso, &fixed),
            Err(Error::InvalidInput(_))
        ));
        assert!(fit_glm(&x, &[1.0, 2.0], Family::Linear, Penalty::Lasso, &fixed).is_err());
        assert!(fit_glm(&x, &[1.0, 2.0, 0.5], Family::Logistic, Penalty::Lasso, &fixed).is_err());
        let none = fit_glm(&x, &[1.0, 2.0, 2.5], Family::Linear, Penalty::None, &fixed).unwrap();
        assert_eq!(none.lambda, 0.0);
    }

    #[test]
    fn logistic_fit_recovers_signal() {
        let (n, p) = (400, 3);
        let x = gaussian_design(n, p, 21);
        let std = Standardizer::fit(&x);
        let xs = std.transform(&x);
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let pr = logistic(1.5 * xs.get(i, 0));
                if rng.random::<f64>() < pr { 1.0 } else { 0.0 }
            })
            .collect();
        let m = fit_glm(&x, &y, Family::Logistic, Penalty::None, &LambdaSpec::Fixed(0.0)).unwrap();
        assert!(m.converged);
        let slope = m.coefficients[0] * std.scales[0];
        assert!((slope - 1.5).abs() < 0.5, "slope {slope}");
        let pr = predict(&m, &x).unwrap();
        assert!(pr.iter().all(|&v| v > 0.0 && v < 1.0));
    }
}
