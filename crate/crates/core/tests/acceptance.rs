//! Acceptance criteria 1 to 9. Each test prints one PASS/FAIL line to the
//! real stdout and fails when its criterion does not hold. The tests share a
//! lock so the runtime budgets are measured one criterion at a time.

use std::f64::consts::{FRAC_PI_4, PI};
use std::io::Write;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use deconfound::dgp::{generate_coefficients, DgpConfig};
use deconfound::estimators::{att_aipw_hajek, att_ipw_hajek, att_regression, Dataset, TrimConfig};
use deconfound::glm::{DesignMatrix, Penalty};
use deconfound::harness::{run_simulation_grid, score_label, ExperimentConfig, ExperimentReport, ModelSpec, Setting};
use deconfound::overlap::{
    confounding_bias_oracle, deviation_z, efficiency_bound_gaussian, efficiency_bound_with_coefficients, lemma2_lower_bound,
    lemma3_check, overlap_divergence_closed_form, overlap_divergence_indicator, overlap_divergence_quadrature,
    overlap_divergence_relu, LinkSpec, McConfig, QuadratureConfig,
};
use deconfound::scores::{
    default_w_grid, gamma_from_w, hyperbola_residual, normalize_and_align, sample_orthocomplement, ScoreFamily,
    WCoordinate, ZERO_THRESHOLD,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

static SERIAL: Mutex<()> = Mutex::new(());

const SEED: u64 = 20_240_601;
const MC_SAMPLES: usize = 1_000_000;
const SWEEP_SAMPLES: usize = 100_000;
const Z_LIMIT: f64 = 4.0;
const Z_DETECT: f64 = 6.0;

struct Outcome {
    passed: bool,
    detail: String,
}

/// Runs `check` under the lock, prints its line and fails the test on FAIL.
fn criterion(id: u32, name: &str, budget: Option<Duration>, check: impl FnOnce() -> Outcome) {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let out = check();
    let elapsed = start.elapsed();
    let in_budget = budget.is_none_or(|b| elapsed <= b);
    let passed = out.passed && in_budget;
    let budget_note = budget.map(|b| format!(", budget {:.0?}", b)).unwrap_or_default();
    let line = format!(
        "criterion {id} {}: {name}: {} ({:.1?}{budget_note})\n",
        if passed { "PASS" } else { "FAIL" },
        out.detail,
        elapsed
    );
    // Bypasses the test harness capture so the line always appears.
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
    assert!(passed, "{}", line.trim_end());
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn family(p: usize, c: f64, seed: u64) -> (ScoreFamily, Vec<f64>) {
    let support: Vec<usize> = (0..p).collect();
    let co = generate_coefficients(p, &support, c, seed).unwrap();
    let fam = normalize_and_align(&co.alpha, &co.beta, ZERO_THRESHOLD).unwrap();
    let ortho = sample_orthocomplement(&fam, seed).unwrap();
    (fam, ortho)
}

fn gamma(fam: &ScoreFamily, ortho: &[f64], w: f64) -> Vec<f64> {
    gamma_from_w(fam, ortho, WCoordinate::new(w).unwrap()).unwrap().gamma
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn criterion_1_hyperbola_exactness() {
    criterion(1, "hyperbola exactness", Some(Duration::from_secs(1)), || {
        let mut worst: f64 = 0.0;
        for c in [0.0, 0.25, 0.5, 0.75, 0.95] {
            let (fam, ortho) = family(10, c, SEED);
            for w in default_w_grid() {
                let g = gamma(&fam, &ortho, w);
                worst = worst.max((dot(&g, &g).sqrt() - 1.0).abs());
                worst = worst.max(hyperbola_residual(&g, fam.alpha(), fam.beta()).abs());
            }
            worst = worst.max(max_abs_diff(&gamma(&fam, &ortho, 1.0), fam.beta()));
            worst = worst.max(max_abs_diff(&gamma(&fam, &ortho, -1.0), fam.alpha()));
        }
        Outcome {
            passed: worst < 1e-12,
            detail: format!("max deviation {worst:.2e} < 1e-12 over 5 c values and 21 w"),
        }
    });
}

#[test]
fn criterion_2_zero_bias_on_the_family() {
    criterion(2, "confounding bias oracle", Some(Duration::from_secs(60)), || {
        let (fam, ortho) = family(5, 0.75, SEED);
        let mc = McConfig::new(MC_SAMPLES, SEED);
        let (m, h) = (LinkSpec::identity(), LinkSpec::logistic());
        let mut worst_z: f64 = 0.0;
        for w in default_w_grid() {
            let est = confounding_bias_oracle(fam.alpha(), fam.beta(), &gamma(&fam, &ortho, w), &m, &h, &mc).unwrap();
            worst_z = worst_z.max(est.z_score(0.0));
        }
        let mut u: Vec<f64> = fam.alpha().iter().zip(fam.beta()).map(|(a, b)| a + b).collect();
        let norm = dot(&u, &u).sqrt();
        u.iter_mut().for_each(|x| *x /= norm);
        let off = confounding_bias_oracle(fam.alpha(), fam.beta(), &u, &m, &h, &mc).unwrap().z_score(0.0);
        Outcome {
            passed: worst_z < Z_LIMIT && off > Z_DETECT,
            detail: format!("max |z| on family {worst_z:.2} < {Z_LIMIT}; |z| at (alpha+beta) {off:.1} > {Z_DETECT}"),
        }
    });
}

#[test]
fn criterion_3_divergence_closed_forms() {
    criterion(3, "overlap divergence closed forms", Some(Duration::from_secs(10)), || {
        let s = 0.5f64.sqrt();
        let pinned = [
            (overlap_divergence_indicator(0.0, 0.0), 1.0),
            (overlap_divergence_indicator(0.0, s), 4.0 / 3.0),
            (overlap_divergence_indicator(0.0, 1.0), 2.0),
            (overlap_divergence_relu(0.0), 1.0),
            (overlap_divergence_relu(s), 0.75f64.sqrt() + FRAC_PI_4 + 0.5 * 0.5f64.asin()),
            (overlap_divergence_relu(1.0), PI),
        ];
        let closed = pinned.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let quad = QuadratureConfig::default();
        let b_grid: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
        let mut route: f64 = 0.0;
        for link in [LinkSpec::indicator(0.0), LinkSpec::relu(), LinkSpec::exp_tilt(1.0)] {
            for &b in &b_grid {
                let q = overlap_divergence_quadrature(b, &link, 0.5, &quad).unwrap();
                route = route.max((q - overlap_divergence_closed_form(b, &link).unwrap()).abs());
            }
        }
        let logistic = LinkSpec::logistic();
        let mut min_step = f64::INFINITY;
        for (link, pi1) in [
            (logistic, logistic.standard_mean()),
            (LinkSpec::indicator(0.0), 0.5),
            (LinkSpec::relu(), 0.5),
            (LinkSpec::exp_tilt(1.0), 0.5),
        ] {
            let v: Vec<f64> =
                b_grid.iter().map(|&b| overlap_divergence_quadrature(b, &link, pi1, &quad).unwrap()).collect();
            min_step = min_step.min(v.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min));
        }
        Outcome {
            passed: closed < 1e-10 && route < 1e-6 && min_step > 0.0,
            detail: format!(
                "closed forms off by {closed:.1e} < 1e-10; quadrature vs closed form {route:.1e} < 1e-6; \
                 smallest increment over 4 links {min_step:.2e} > 0"
            ),
        }
    });
}

#[test]
fn criterion_4_overlap_identity() {
    criterion(4, "overlap improvement identity", Some(Duration::from_secs(60)), || {
        let quad = QuadratureConfig::default();
        let mc = McConfig::new(MC_SAMPLES, SEED);
        let beta = [1.0, 0.0];
        let (mut worst_z, mut worst_lhs): (f64, f64) = (0.0, 0.0);
        let mut lhs_at_zero = f64::NAN;
        for b in [0.0f64, 0.5, 1.0] {
            let g = [b, (1.0 - b * b).sqrt()];
            let r = lemma3_check(&beta, &g, &LinkSpec::exp_tilt(1.0), &quad, &mc).unwrap();
            let closed = 1.0f64.exp() - (b * b).exp();
            worst_lhs = worst_lhs.max((r.lhs - closed).abs());
            worst_z = worst_z.max(deviation_z(closed - r.rhs, r.stderr));
            if b == 0.0 {
                lhs_at_zero = r.lhs;
            }
        }
        let e_minus_1 = (lhs_at_zero - (1.0f64.exp() - 1.0)).abs();
        Outcome {
            passed: worst_z < Z_LIMIT && worst_lhs < 1e-8 && e_minus_1 < 1e-8,
            detail: format!(
                "max |lhs - rhs| / SE {worst_z:.2} < {Z_LIMIT}; quadrature lhs vs closed form {worst_lhs:.1e}; \
                 lhs(b=0) - (e-1) = {e_minus_1:.1e} < 1e-8"
            ),
        }
    });
}

#[test]
fn criterion_5_efficiency_bound() {
    criterion(5, "efficiency bound sanity", Some(Duration::from_secs(120)), || {
        let randomized = DgpConfig { s_t: 0.0, beta0: 0.0, seed: SEED, ..DgpConfig::default() };
        let v = efficiency_bound_gaussian(&randomized, None, &McConfig::new(MC_SAMPLES, SEED)).unwrap();
        let z = deviation_z(v.estimate - 4.0, v.stderr);
        let quad = QuadratureConfig::default();
        let mut worst_gap = f64::NEG_INFINITY;
        for s_t in [1.0, 4.0] {
            let dgp = DgpConfig { s_t, seed: SEED, ..DgpConfig::default() };
            let co = generate_coefficients(dgp.p, &dgp.support(), dgp.k, SEED).unwrap();
            let fam = normalize_and_align(&co.alpha, &co.beta, ZERO_THRESHOLD).unwrap();
            let ortho = sample_orthocomplement(&fam, SEED).unwrap();
            for w in default_w_grid() {
                let g = gamma(&fam, &ortho, w);
                let mc = McConfig::new(SWEEP_SAMPLES, SEED);
                let bound = efficiency_bound_with_coefficients(&dgp, &co, Some(&g), &mc).unwrap();
                let lower = lemma2_lower_bound(&dgp, &co, &g, &quad).unwrap();
                worst_gap = worst_gap.max((lower - bound.estimate) / bound.stderr);
            }
        }
        Outcome {
            passed: z < Z_LIMIT && worst_gap < Z_LIMIT,
            detail: format!(
                "randomized V = {:.4} (|z| vs 4 = {z:.2} < {Z_LIMIT}); max (lower - V) / SE over 42 points \
                 {worst_gap:.2} < {Z_LIMIT}",
                v.estimate
            ),
        }
    });
}

fn dataset(t: &[f64], y: &[f64]) -> Dataset {
    let x = DesignMatrix::from_column_major(t.len(), 1, (0..t.len()).map(|i| i as f64).collect()).unwrap();
    Dataset::new(x, t.to_vec(), y.to_vec(), None, None).unwrap()
}

#[test]
fn criterion_6_estimator_hand_checks() {
    criterion(6, "estimator hand checks", Some(Duration::from_secs(1)), || {
        let trim = TrimConfig::default();
        let regr = att_regression(&dataset(&[1.0, 1.0, 0.0], &[2.0, 4.0, 1.0]), &[1.0, 2.0, 1.0]).unwrap();
        let ipw = att_ipw_hajek(&dataset(&[1.0, 0.0, 0.0], &[3.0, 1.0, 2.0]), &[0.5, 0.5, 0.25], &trim).unwrap();
        let aipw = att_aipw_hajek(&dataset(&[1.0, 0.0], &[2.0, 1.0]), &[0.5, 0.5], &[1.0, 1.0], &trim).unwrap();
        let hand = regr == 1.5 && ipw == 1.75 && aipw == 1.0;

        let mut rng = ChaCha8Rng::seed_from_u64(SEED);
        let mut identical = 0;
        for _ in 0..100 {
            let n = rng.random_range(4..60);
            let mut t: Vec<f64> = (0..n).map(|_| f64::from(u8::from(rng.random::<bool>()))).collect();
            t[0] = 1.0;
            t[1] = 0.0;
            let y: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) * 3.0).collect();
            let e: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..0.99)).collect();
            let ds = dataset(&t, &y);
            let a = att_aipw_hajek(&ds, &e, &vec![0.0; n], &trim).unwrap();
            let i = att_ipw_hajek(&ds, &e, &trim).unwrap();
            identical += usize::from(a.to_bits() == i.to_bits());
        }
        Outcome {
            passed: hand && identical == 100,
            detail: format!("regr {regr}, ipw {ipw}, aipw {aipw} (want 1.5, 1.75, 1); AIPW(m0=0) == IPW bitwise on {identical}/100"),
        }
    });
}

const TABLE_SETTINGS: [(f64, f64); 4] = [(1.0, 2.0), (1.0, 5.0), (4.0, 2.0), (4.0, 5.0)];
const PROGNOSTIC_RMSE_BAND: (f64, f64) = (0.4, 1.8);
const SPEARMAN_MIN: f64 = 0.5;

fn cell(report: &ExperimentReport, s: &Setting, estimator: &str, label: &str) -> f64 {
    report.find(&s.id(), estimator, label).unwrap_or_else(|| panic!("missing cell {} {estimator} {label}", s.id())).rmse
}

#[test]
fn criterion_7_table_reproduction() {
    criterion(7, "LASSO/LASSO table, 100 replications", None, || {
        let settings: Vec<Setting> = TABLE_SETTINGS.iter().map(|&(s_t, s_y)| Setting { s_t, s_y }).collect();
        let cfg = ExperimentConfig {
            settings: settings.clone(),
            model_grid: vec![ModelSpec::new(Penalty::Lasso, Penalty::Lasso)],
            replications: 100,
            master_seed: SEED,
            ..ExperimentConfig::default()
        };
        let report = run_simulation_grid(&cfg).unwrap();
        let prognostic = score_label(-1.0);
        let (mut a, mut b) = (true, true);
        let mut parts = Vec::new();
        for s in &settings {
            let (regr, regr_alpha) = (cell(&report, s, "regr", "X"), cell(&report, s, "regr", &prognostic));
            let (ipw, ipw_alpha) = (cell(&report, s, "ipw", "X"), cell(&report, s, "ipw", &prognostic));
            a &= regr_alpha < regr;
            b &= ipw_alpha < ipw;
            parts.push(format!(
                "({},{}) regr {regr:.3} vs {regr_alpha:.3}, ipw {ipw:.3} vs {ipw_alpha:.3}",
                s.s_t, s.s_y
            ));
        }
        let high = cell(&report, &settings[3], "regr", &prognostic);
        let c = (PROGNOSTIC_RMSE_BAND.0..=PROGNOSTIC_RMSE_BAND.1).contains(&high);
        Outcome {
            passed: a && b && c,
            detail: format!("(a) {a} (b) {b} (c) {c} with Regr-alpha at (4,5) = {high:.3}; {}", parts.join("; ")),
        }
    });
}

/// Spearman rank correlation; the inputs carry no ties here.
fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let ranks = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        for (rank, &i) in idx.iter().enumerate() {
            r[i] = rank as f64;
        }
        r
    };
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

#[test]
fn criterion_8_sd_shrinks_toward_the_prognostic_end() {
    criterion(8, "IPW SD along w, ridge outcome", None, || {
        let setting = Setting { s_t: 4.0, s_y: 5.0 };
        let cfg = ExperimentConfig {
            settings: vec![setting],
            model_grid: vec![ModelSpec::new(Penalty::Ridge, Penalty::Lasso)],
            replications: 100,
            master_seed: SEED,
            ..ExperimentConfig::default()
        };
        let report = run_simulation_grid(&cfg).unwrap();
        let grid = default_w_grid();
        let sds: Vec<f64> = grid
            .iter()
            .map(|&w| report.find(&setting.id(), "ipw", &score_label(w)).expect("ipw cell").sd)
            .collect();
        let rho = spearman(&grid, &sds);
        Outcome {
            passed: rho > SPEARMAN_MIN,
            detail: format!("Spearman(SD, w) = {rho:.3} > {SPEARMAN_MIN}; SD at w=-1 {:.3}, w=+1 {:.3}", sds[0], sds[20]),
        }
    });
}

#[test]
fn criterion_9_thread_count_invariance() {
    criterion(9, "thread-count determinism", None, || {
        let base = ExperimentConfig {
            settings: vec![Setting { s_t: 1.0, s_y: 2.0 }, Setting { s_t: 4.0, s_y: 5.0 }],
            replications: 4,
            master_seed: SEED,
            ..ExperimentConfig::default()
        };
        let one = run_simulation_grid(&ExperimentConfig { threads: 1, ..base.clone() }).unwrap().to_csv_string().unwrap();
        let eight = run_simulation_grid(&ExperimentConfig { threads: 8, ..base }).unwrap().to_csv_string().unwrap();
        Outcome {
            passed: one.as_bytes() == eight.as_bytes(),
            detail: format!("threads 1 vs 8: {} bytes, identical = {}", one.len(), one == eight),
        }
    });
}
