use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ModelSpec, Setting};
use super::dataset::{load_dataset_csv, CsvSchema};
use super::report::{CellRecord, ErrorMetrics, ExperimentReport};
use crate::dgp::{coefficients_for, sample_att_semisynthetic, simulate_dataset, true_att, CoefficientPair};
use crate::error::{Error, Result};
use crate::estimators::{
    estimate_methods_with_score, estimate_on_covariates, fit_covariate_models, fit_covariate_models_given,
    fit_propensity, oracle_fits, CovariateFits, Dataset,
    EstimatorResult, Fallback, GlmConfig, Method, ScoreInput, TrimConfig,
};
use crate::glm::{CvSpec, FittedGlm, LambdaSpec, Penalty};
use crate::rng::derive_seed;
use crate::scores::{gamma_from_w, normalize_and_align, sample_orthocomplement, Degeneracy, WCoordinate, ZERO_THRESHOLD};

pub const COVARIATE_LABEL: &str = "X";
const ORACLE_LABEL: &str = "oracle";
const DATASET_SETTING: &str = "dataset";

/// Report label of the score at `w`.
pub fn score_label(w: f64) -> String {
    format!("w={:+.2}", w + 0.0)
}

/// Where the nuisance models come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Nuisance {
    Fitted(GlmConfig),
    /// True `m0`, `e`, `alpha` and `beta`.
    Oracle(CoefficientPair),
}

/// Covariate estimates followed by each score's estimates, methods in the
/// order given.
pub fn estimate_dataset(
    dataset: &Dataset,
    nuisance: &Nuisance,
    w_grid: &[f64],
    methods: &[Method],
    trim: &TrimConfig,
    seed: u64,
) -> Result<Vec<EstimatorResult>> {
    estimate_dataset_with(dataset, nuisance, None, w_grid, methods, trim, seed)
}

/// As [`estimate_dataset`], reusing `propensity` in place of a fresh propensity fit.
fn estimate_dataset_with(
    dataset: &Dataset,
    nuisance: &Nuisance,
    propensity: Option<FittedGlm>,
    w_grid: &[f64],
    methods: &[Method],
    trim: &TrimConfig,
    seed: u64,
) -> Result<Vec<EstimatorResult>> {
    let (fits, alpha_raw, beta_raw, glm_cfg): (CovariateFits, Vec<f64>, Vec<f64>, GlmConfig) = match nuisance {
        Nuisance::Fitted(cfg) => {
            let fits = match propensity {
                Some(e) => fit_covariate_models_given(dataset, cfg, e)?,
                None => fit_covariate_models(dataset, cfg)?,
            };
            let (a, b) = (fits.alpha_raw(), fits.beta_raw());
            (fits, a, b, *cfg)
        }
        Nuisance::Oracle(c) => (
            oracle_fits(dataset)?,
            c.alpha.clone(),
            c.beta.clone(),
            GlmConfig::default(),
        ),
    };
    let mut out = Vec::with_capacity(methods.len() * (1 + w_grid.len()));
    for &m in methods {
        out.push(estimate_on_covariates(dataset, &fits, m, trim, glm_cfg.normalization)?);
    }
    let family = normalize_and_align(&alpha_raw, &beta_raw, ZERO_THRESHOLD)?;
    let ortho = match family.degenerate() {
        Degeneracy::Ok => Some(sample_orthocomplement(&family, seed)?),
        Degeneracy::NearCollinear => Some(vec![0.0; family.p()]),
        Degeneracy::NearZeroCoefficients => None,
    };
    for &w in w_grid {
        let label = score_label(w);
        let input = match &ortho {
            Some(o) => ScoreInput::from_score(label, &gamma_from_w(&family, o, WCoordinate::new(w)?)?),
            None => ScoreInput::degenerate(label, family.degenerate()),
        };
        out.extend(estimate_methods_with_score(dataset, &input, methods, &fits, trim, &glm_cfg)?);
    }
    Ok(out)
}

/// Propensity fits of one replication, reused while the treatment vector is unchanged.
///
/// Covariates and treatment are drawn before the outcome, so settings sharing a
/// treatment slope share them.
#[derive(Default)]
struct PropensityCache {
    fits: HashMap<Penalty, (Vec<f64>, FittedGlm)>,
}

impl PropensityCache {
    fn get(&self, penalty: Penalty, treatment: &[f64]) -> Option<FittedGlm> {
        self.fits.get(&penalty).filter(|(t, _)| t == treatment).map(|(_, f)| f.clone())
    }

    fn insert(&mut self, penalty: Penalty, treatment: &[f64], fit: FittedGlm) {
        self.fits.insert(penalty, (treatment.to_vec(), fit));
    }
}

/// One estimate's contribution to its cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub error: f64,
    pub fallback: bool,
    pub trim_count: usize,
}

struct Block {
    setting: String,
    outcome: String,
    propensity: String,
    labels: Vec<(String, String)>,
}

fn glm_config(cfg: &ExperimentConfig, spec: ModelSpec, seed: u64) -> GlmConfig {
    GlmConfig {
        outcome_penalty: spec.outcome,
        propensity_penalty: spec.propensity,
        lambda: LambdaSpec::Cv(CvSpec { seed, ..cfg.cv }),
        normalization: cfg.normalization,
        ..GlmConfig::default()
    }
}

fn nuisances(cfg: &ExperimentConfig, coeffs: Option<&CoefficientPair>, seed: u64) -> Vec<(String, String, Nuisance)> {
    match (cfg.oracle, coeffs) {
        (true, Some(c)) => vec![(ORACLE_LABEL.into(), ORACLE_LABEL.into(), Nuisance::Oracle(c.clone()))],
        _ => cfg
            .model_grid
            .iter()
            .map(|&m| (m.outcome.to_string(), m.propensity.to_string(), Nuisance::Fitted(glm_config(cfg, m, seed))))
            .collect(),
    }
}

/// Errors of every estimate of one replication in one setting, in block order.
fn run_replication(
    cfg: &ExperimentConfig,
    setting: Option<&Setting>,
    coeffs: Option<&CoefficientPair>,
    fixed: Option<&Dataset>,
    rep: usize,
    cache: &mut PropensityCache,
) -> Result<Vec<f64>> {
    let seed = derive_seed(cfg.master_seed, rep as u64);
    let (owned, target);
    let dataset = match (setting, fixed) {
        (_, Some(ds)) => {
            let (m1, m0) = match (ds.oracle_m1(), ds.oracle_m0()) {
                (Some(m1), Some(m0)) => (m1, m0),
                _ => return Err(Error::invalid("the dataset needs mu0 and mu1 columns for a simulation")),
            };
            target = sample_att_semisynthetic(m1, m0, ds.treatment())?;
            ds
        }
        (Some(s), None) => {
            let design = crate::dgp::DgpConfig {
                seed,
                ..cfg.design_for(s)
            };
            owned = simulate_dataset(&design, coeffs.expect("simulation needs coefficients"))?;
            target = true_att(&design);
            &owned
        }
        (None, None) => unreachable!("a replication needs a setting or a dataset"),
    };
    let mut flat = Vec::new();
    for (_, _, nuisance) in nuisances(cfg, coeffs, seed) {
        let propensity = match &nuisance {
            Nuisance::Fitted(g) => Some(match cache.get(g.propensity_penalty, dataset.treatment()) {
                Some(fit) => fit,
                None => {
                    let fit = fit_propensity(dataset, g)?;
                    cache.insert(g.propensity_penalty, dataset.treatment(), fit.clone());
                    fit
                }
            }),
            Nuisance::Oracle(_) => None,
        };
        let results = estimate_dataset_with(
            dataset,
            &nuisance,
            propensity,
            &cfg.w_grid,
            &cfg.estimators,
            &cfg.trim,
            seed,
        )?;
        for r in results {
            flat.push(r.tau_hat - target);
            flat.push(f64::from(u8::from(r.fallback != Fallback::None)));
            flat.push(r.trim_count as f64);
        }
    }
    log::debug!("replication {rep} done");
    Ok(flat)
}

fn blocks(cfg: &ExperimentConfig, setting_ids: &[String], coeffs: Option<&CoefficientPair>) -> Vec<Block> {
    let mut labels = Vec::new();
    for label in std::iter::once(COVARIATE_LABEL.to_string()).chain(cfg.w_grid.iter().map(|&w| score_label(w))) {
        for m in &cfg.estimators {
            labels.push((m.as_str().to_string(), label.clone()));
        }
    }
    let mut out = Vec::new();
    for s in setting_ids {
        for (outcome, propensity, _) in nuisances(cfg, coeffs, 0) {
            out.push(Block {
                setting: s.clone(),
                outcome,
                propensity,
                labels: labels.clone(),
            });
        }
    }
    out
}

/// Worker pool of `threads` workers, or rayon's default for 0.
pub fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {threads} workers: {e}")))
}

/// Per-replication errors for every cell, each list in replication order.
pub fn run_simulation_runs(cfg: &ExperimentConfig) -> Result<Vec<(CellRecord, Vec<RunRecord>)>> {
    cfg.validate()?;
    let fixed = match &cfg.dataset {
        Some(p) => Some(load_dataset_csv(p, &CsvSchema::default())?),
        None => None,
    };
    let settings = if fixed.is_some() { Vec::new() } else { cfg.resolved_settings() };
    let coeffs = if fixed.is_none() {
        Some(coefficients_for(&cfg.dgp, cfg.master_seed)?)
    } else {
        None
    };
    let setting_ids: Vec<String> = if fixed.is_some() {
        vec![DATASET_SETTING.into()]
    } else {
        settings.iter().map(Setting::id).collect()
    };
    // Settings sharing a treatment slope run in one job so their propensity fits are shared.
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for s in 0..setting_ids.len() {
        let slope = settings.get(s).map(|x| x.s_t.to_bits());
        match groups.iter_mut().find(|g| settings.get(g[0]).map(|x| x.s_t.to_bits()) == slope) {
            Some(g) => g.push(s),
            None => groups.push(vec![s]),
        }
    }
    let jobs: Vec<(usize, usize)> = (0..groups.len())
        .flat_map(|g| (0..cfg.replications).map(move |r| (g, r)))
        .collect();
    let pool = thread_pool(cfg.threads)?;
    let grouped: Vec<Vec<(usize, Vec<f64>)>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(g, r)| {
                let mut cache = PropensityCache::default();
                groups[g]
                    .iter()
                    .map(|&s| {
                        run_replication(cfg, settings.get(s), coeffs.as_ref(), fixed.as_ref(), r, &mut cache)
                            .map(|flat| (s * cfg.replications + r, flat))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut results = vec![Vec::new(); setting_ids.len() * cfg.replications];
    for (i, flat) in grouped.into_iter().flatten() {
        results[i] = flat;
    }

    let blocks = blocks(cfg, &setting_ids, coeffs.as_ref());
    let per_setting = blocks.len() / setting_ids.len();
    let mut cells = Vec::new();
    for (b_idx, block) in blocks.iter().enumerate() {
        let s = b_idx / per_setting;
        let within = b_idx % per_setting;
        let offset = within * block.labels.len();
        for (k, (estimator, label)) in block.labels.iter().enumerate() {
            let runs: Vec<RunRecord> = (0..cfg.replications)
                .map(|r| {
                    let flat = &results[s * cfg.replications + r];
                    let i = 3 * (offset + k);
                    RunRecord {
                        error: flat[i],
                        fallback: flat[i + 1] != 0.0,
                        trim_count: flat[i + 2] as usize,
                    }
                })
                .collect();
            let errors: Vec<f64> = runs.iter().map(|r| r.error).collect();
            let m = ErrorMetrics::from_errors(&errors)?;
            let cell = CellRecord {
                setting: block.setting.clone(),
                outcome_penalty: block.outcome.clone(),
                propensity_penalty: block.propensity.clone(),
                estimator: estimator.clone(),
                score_label: label.clone(),
                rmse: m.rmse,
                abs_bias: m.abs_bias,
                sd: m.sd,
                n_runs: runs.len(),
                fallback_count: runs.iter().filter(|r| r.fallback).count(),
                trim_total: runs.iter().map(|r| r.trim_count).sum(),
            };
            cells.push((cell, runs));
        }
    }
    Ok(cells)
}

pub fn run_simulation_grid(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    Ok(ExperimentReport::new(
        run_simulation_runs(cfg)?.into_iter().map(|(c, _)| c).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::DgpConfig;
    use crate::glm::Penalty;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            dgp: DgpConfig {
                n: 120,
                p: 30,
                support_size: 5,
                ..DgpConfig::default()
            },
            w_grid: vec![-1.0, 0.0, 1.0],
            replications: 2,
            master_seed: 5,
            cv: CvSpec {
                folds: 3,
                grid_size: 20,
                ..CvSpec::default()
            },
            threads: 1,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn labels() {
        assert_eq!(score_label(-1.0), "w=-1.00");
        assert_eq!(score_label(-0.0), "w=+0.00");
        assert_eq!(score_label(0.3), "w=+0.30");
    }

    #[test]
    fn grid_arithmetic() {
        let cfg = ExperimentConfig {
            replications: 1,
            ..small()
        };
        let report = run_simulation_grid(&cfg).unwrap();
        assert_eq!(report.cells.len(), 3 * (1 + 3));
        assert!(report.cells.iter().all(|c| c.n_runs == 1 && c.sd == 0.0));
        let two = ExperimentConfig {
            model_grid: vec![
                ModelSpec::new(Penalty::Lasso, Penalty::Lasso),
                ModelSpec::new(Penalty::Ridge, Penalty::Lasso),
            ],
            settings: vec![Setting { s_t: 1.0, s_y: 2.0 }, Setting { s_t: 4.0, s_y: 5.0 }],
            ..cfg
        };
        assert_eq!(run_simulation_grid(&two).unwrap().cells.len(), 2 * 2 * 12);
    }

    #[test]
    fn covariate_cells_never_fall_back_and_degenerate_scores_copy_them() {
        let cfg = small();
        let runs = run_simulation_runs(&cfg).unwrap();
        for (cell, r) in &runs {
            if cell.score_label == COVARIATE_LABEL {
                assert_eq!(cell.fallback_count, 0);
            }
            assert_eq!(r.len(), cfg.replications);
        }
        for (cell, r) in &runs {
            for (rep, run) in r.iter().enumerate() {
                if run.fallback {
                    let x = runs
                        .iter()
                        .find(|(c, _)| {
                            c.setting == cell.setting
                                && c.outcome_penalty == cell.outcome_penalty
                                && c.estimator == cell.estimator
                                && c.score_label == COVARIATE_LABEL
                        })
                        .unwrap();
                    assert_eq!(x.1[rep].error, run.error);
                }
            }
        }
    }

    #[test]
    fn thread_count_does_not_change_the_report() {
        let one = run_simulation_grid(&small()).unwrap().to_csv_string().unwrap();
        let three = run_simulation_grid(&ExperimentConfig { threads: 3, ..small() })
            .unwrap()
            .to_csv_string()
            .unwrap();
        assert_eq!(one, three);
    }

    #[test]
    fn shared_propensity_fits_match_separate_runs() {
        let pair = [Setting { s_t: 1.0, s_y: 2.0 }, Setting { s_t: 1.0, s_y: 5.0 }];
        let models = vec![
            ModelSpec::new(Penalty::Lasso, Penalty::Lasso),
            ModelSpec::new(Penalty::Ridge, Penalty::Lasso),
        ];
        let joint = run_simulation_grid(&ExperimentConfig {
            settings: pair.to_vec(),
            model_grid: models.clone(),
            ..small()
        })
        .unwrap();
        for s in pair {
            for m in &models {
                let alone = run_simulation_grid(&ExperimentConfig {
                    settings: vec![s],
                    model_grid: vec![*m],
                    ..small()
                })
                .unwrap();
                for cell in &alone.cells {
                    assert!(joint.cells.contains(cell), "{cell:?}");
                }
            }
        }
    }

    #[test]
    fn oracle_mode_labels_and_runs() {
        let cfg = ExperimentConfig {
            oracle: true,
            ..small()
        };
        let report = run_simulation_grid(&cfg).unwrap();
        assert_eq!(report.cells.len(), 12);
        assert!(report.cells.iter().all(|c| c.outcome_penalty == "oracle"));
    }
}
