use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::design::DesignMatrix;
use super::solver::{Solution, Tolerance};
use super::{lambda_grid, CvRule, CvSpec, Family, Penalty, Prepared};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

const DEVIANCE_PROB_CLAMP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCurve {
    pub lambdas: Vec<f64>,
    pub mean_deviance: Vec<f64>,
    pub se_deviance: Vec<f64>,
    pub selected: usize,
}

/// Fold label per row. Logistic responses are stratified so every class is
/// spread round-robin across folds; each training set then holds both
/// classes whenever each class has at least two members.
pub fn fold_assignment(y: &[f64], family: Family, folds: usize, seed: u64) -> Result<Vec<usize>> {
    let n = y.len();
    if folds < 2 || folds > n {
        return Err(Error::invalid(format!("folds must lie in [2, {n}], got {folds}")));
    }
    let mut rng = stream_rng(seed, Stream::Folds);
    let mut labels = vec![0usize; n];
    match family {
        Family::Linear => {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            for (pos, &i) in idx.iter().enumerate() {
                labels[i] = pos % folds;
            }
        }
        Family::Logistic => {
            let mut zeros: Vec<usize> = (0..n).filter(|&i| y[i] == 0.0).collect();
            let mut ones: Vec<usize> = (0..n).filter(|&i| y[i] != 0.0).collect();
            if zeros.len() < 2 || ones.len() < 2 {
                return Err(Error::DegenerateResponse(format!(
                    "cannot stratify {} controls and {} cases so every training fold sees both classes",
                    zeros.len(),
                    ones.len()
                )));
            }
            zeros.shuffle(&mut rng);
            ones.shuffle(&mut rng);
            for (pos, &i) in zeros.iter().chain(ones.iter()).enumerate() {
                labels[i] = pos % folds;
            }
        }
    }
    Ok(labels)
}

fn pointwise_deviance(family: Family, y: f64, pred: f64) -> f64 {
    match family {
        Family::Linear => (y - pred) * (y - pred),
        Family::Logistic => {
            let p = pred.clamp(DEVIANCE_PROB_CLAMP, 1.0 - DEVIANCE_PROB_CLAMP);
            -2.0 * (y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        }
    }
}

/// Full-data path plus the cross-validation curve over its lambdas.
pub(crate) fn run(
    design: &DesignMatrix,
    y: &[f64],
    family: Family,
    penalty: Penalty,
    spec: &CvSpec,
) -> Result<(CvCurve, Prepared, Vec<Solution>)> {
    let (n, p) = (design.n(), design.p());
    spec.validate_for(n)?;
    let labels = fold_assignment(y, family, spec.folds, spec.seed)?;
    let prep = Prepared::new(design, penalty);
    let lmax = prep.lambda_max(y, family);
    let grid = lambda_grid(lmax, spec.grid_size, spec.ratio(n, p));
    let full = prep.path(y, family, &grid, true, Tolerance::Path);
    let lambdas: Vec<f64> = full.iter().map(|s| s.lambda).collect();
    let nl = lambdas.len();

    let mut fold_dev = vec![vec![0.0; nl]; spec.folds];
    let mut fold_size = vec![0usize; spec.folds];
    for (f, dev) in fold_dev.iter_mut().enumerate() {
        let train: Vec<usize> = (0..n).filter(|&i| labels[i] != f).collect();
        let test: Vec<usize> = (0..n).filter(|&i| labels[i] == f).collect();
        fold_size[f] = test.len();
        let xt = design.select_rows(&train);
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let xv = design.select_rows(&test);
        let fold_prep = Prepared::new(&xt, penalty);
        let path = fold_prep.path(&yt, family, &lambdas, false, Tolerance::Path);
        for (l, sol) in path.into_iter().enumerate() {
            let model = fold_prep.finish(sol, family, penalty);
            let eta = xv.mul_vec(&model.coefficients)?;
            let total: f64 = test
                .iter()
                .zip(&eta)
                .map(|(&i, &e)| {
                    let pred = match family {
                        Family::Linear => e + model.intercept,
                        Family::Logistic => crate::special::logistic(e + model.intercept),
                    };
                    pointwise_deviance(family, y[i], pred)
                })
                .sum();
            dev[l] = total / test.len() as f64;
        }
    }

    let nf = n as f64;
    let k = spec.folds as f64;
    let mut mean = vec![0.0; nl];
    let mut se = vec![0.0; nl];
    for l in 0..nl {
        let m: f64 = (0..spec.folds).map(|f| fold_size[f] as f64 * fold_dev[f][l]).sum::<f64>() / nf;
        let v: f64 = (0..spec.folds)
            .map(|f| fold_size[f] as f64 * (fold_dev[f][l] - m).powi(2))
            .sum::<f64>()
            / nf;
        mean[l] = m;
        se[l] = (v / (k - 1.0)).sqrt();
    }
    let best = (0..nl).fold(0, |b, l| if mean[l] < mean[b] { l } else { b });
    let selected = match spec.rule {
        CvRule::Min => best,
        CvRule::OneSe => (0..=best)
            .find(|&l| mean[l] <= mean[best] + se[best])
            .unwrap_or(best),
    };
    Ok((
        CvCurve {
            lambdas,
            mean_deviance: mean,
            se_deviance: se,
            selected,
        },
        prep,
        full,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::{cv_lambda, fit_glm, LambdaSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn folds_partition_evenly() {
        let y = vec![0.0; 100];
        let labels = fold_assignment(&y, Family::Linear, 10, 3).unwrap();
        for f in 0..10 {
            assert_eq!(labels.iter().filter(|&&l| l == f).count(), 10);
        }
    }

    #[test]
    fn stratified_folds_keep_both_classes_in_training() {
        let y: Vec<f64> = (0..37).map(|i| if i % 9 == 0 { 1.0 } else { 0.0 }).collect();
        let labels = fold_assignment(&y, Family::Logistic, 10, 8).unwrap();
        for f in 0..10 {
            let ones = (0..37).filter(|&i| labels[i] != f && y[i] == 1.0).count();
            let zeros = (0..37).filter(|&i| labels[i] != f && y[i] == 0.0).count();
            assert!(ones > 0 && zeros > 0);
        }
        let mut lone = vec![0.0; 20];
        lone[4] = 1.0;
        assert!(matches!(
            fold_assignment(&lone, Family::Logistic, 5, 1),
            Err(Error::DegenerateResponse(_))
        ));
    }

    #[test]
    fn cv_is_deterministic_and_on_grid() {
        let (n, p) = (60, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = DesignMatrix::from_fn(n, p, |_, _| rng.sample(StandardNormal)).unwrap();
        let y: Vec<f64> = (0..n).map(|i| x.get(i, 0) + 0.5 * rng.sample::<f64, _>(StandardNormal)).collect();
        let spec = CvSpec { folds: 5, grid_size: 30, seed: 17, ..CvSpec::default() };
        let a = cv_lambda(&x, &y, Family::Linear, Penalty::Lasso, &spec).unwrap();
        let b = cv_lambda(&x, &y, Family::Linear, Penalty::Lasso, &spec).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        let (curve, _, _) = run(&x, &y, Family::Linear, Penalty::Lasso, &spec).unwrap();
        assert!(curve.lambdas.contains(&a));
        let one_se = CvSpec { rule: CvRule::OneSe, ..spec };
        assert!(cv_lambda(&x, &y, Family::Linear, Penalty::Lasso, &one_se).unwrap() >= a);
        let m = fit_glm(&x, &y, Family::Linear, Penalty::Lasso, &LambdaSpec::Cv(spec)).unwrap();
        assert_eq!(m.lambda, a);
        assert!(m.coefficients[0] > 0.5);
    }

    #[test]
    fn cv_rejects_bad_specs() {
        let x = DesignMatrix::from_fn(10, 2, |i, j| (i * (j + 1)) as f64).unwrap();
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        for spec in [
            CvSpec { folds: 1, ..CvSpec::default() },
            CvSpec { folds: 11, ..CvSpec::default() },
            CvSpec { folds: 2, grid_size: 1, ..CvSpec::default() },
            CvSpec { folds: 2, grid_min_ratio: Some(1.0), ..CvSpec::default() },
        ] {
            assert!(cv_lambda(&x, &y, Family::Linear, Penalty::Lasso, &spec).is_err());
        }
    }
}
