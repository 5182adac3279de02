//! Quadrature rules: Gauss-Hermite for Gaussian expectations and adaptive
//! Gauss-Kronrod for finite intervals.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use crate::special::norm_pdf;

/// Gauss-Hermite rule rescaled to the standard normal weight, so that
/// `E[f(Z)] ~= sum_i weights[i] * f(nodes[i])` for `Z ~ N(0, 1)`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Builds an `n`-point rule by Newton iteration on the orthonormal
    /// Hermite recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Hermite rule needs at least one node");
        let pim4 = PI.powf(-0.25);
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let nf = n as f64;
        let m = n.div_ceil(2);
        let mut z = 0.0f64;
        for i in 0..m {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let (p1, p2) = hermite_orthonormal(n, z, pim4);
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    let (_, p2) = hermite_orthonormal(n, z, pim4);
                    pp = (2.0 * nf).sqrt() * p2;
                    break;
                }
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        if n % 2 == 1 {
            x[n / 2] = 0.0;
        }
        // Physicists' weight e^{-x^2} -> standard normal.
        let sqrt_pi = PI.sqrt();
        let nodes = x.iter().rev().map(|xi| xi * std::f64::consts::SQRT_2).collect();
        let weights = w.iter().rev().map(|wi| wi / sqrt_pi).collect();
        GaussHermite { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E[f(Z)]` for `Z ~ N(0, 1)`.
    pub fn expect(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * f(z))
            .sum()
    }

    /// `E[f(mu + sigma Z)]`.
    pub fn expect_shifted(&self, mu: f64, sigma: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.expect(|z| f(mu + sigma * z))
    }
}

/// Shared `n`-node rule, built once per process.
pub fn gauss_hermite(n: usize) -> Arc<GaussHermite> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussHermite>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry(n)
        .or_insert_with(|| Arc::new(GaussHermite::new(n)))
        .clone()
}

/// Returns `(p_n(z), p_{n-1}(z))` of the orthonormal Hermite polynomials.
fn hermite_orthonormal(n: usize, z: f64, pim4: f64) -> (f64, f64) {
    let mut p1 = pim4;
    let mut p2 = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
    }
    (p1, p2)
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS_K: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const GK_WEIGHTS_G: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = GK_WEIGHTS_K[7] * fc;
    let mut g = GK_WEIGHTS_G[3] * fc;
    for i in 0..7 {
        let dx = h * GK_NODES[i];
        let s = f(c - dx) + f(c + dx);
        k += GK_WEIGHTS_K[i] * s;
        if i % 2 == 1 {
            g += GK_WEIGHTS_G[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive 7/15-point Gauss-Kronrod on `[a, b]` to absolute tolerance `tol`.
pub fn integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    integrate_with_breaks(&mut f, &[a, b], tol)
}

/// Like [`integrate`] but starts from the panels delimited by the sorted
/// `points`, which should include every kink or jump of `f`.
pub fn integrate_with_breaks(f: &mut impl FnMut(f64) -> f64, points: &[f64], tol: f64) -> f64 {
    let mut stack: Vec<(f64, f64, f64, u32)> = points
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| (w[0], w[1], tol / (points.len() - 1) as f64, 0))
        .collect();
    let mut total = 0.0;
    while let Some((a, b, t, depth)) = stack.pop() {
        let (v, err) = gk15(f, a, b);
        if err <= t.max(1e-300) || depth >= 48 || (b - a).abs() < 1e-14 * (a.abs() + b.abs()) {
            total += v;
        } else {
            let m = 0.5 * (a + b);
            stack.push((a, m, 0.5 * t, depth + 1));
            stack.push((m, b, 0.5 * t, depth + 1));
        }
    }
    total
}

/// `E[f(Z)]` for `Z ~ N(0, 1)` by adaptive Gauss-Kronrod on `[-40, 40]`,
/// split at `breaks` (points where `f` is not smooth).
pub fn gaussian_expectation_adaptive(
    mut f: impl FnMut(f64) -> f64,
    breaks: &[f64],
    tol: f64,
) -> f64 {
    const LIMIT: f64 = 40.0;
    let mut points = vec![-LIMIT, -8.0, 8.0, LIMIT];
    points.extend(breaks.iter().copied().filter(|b| b.is_finite() && b.abs() < LIMIT));
    points.sort_by(f64::total_cmp);
    points.dedup();
    let mut g = |z: f64| f(z) * norm_pdf(z);
    integrate_with_breaks(&mut g, &points, tol)
}

const TRAPEZOID_LIMIT: f64 = 9.5;

/// Step of a trapezoid rule for `E[f(Z)]` when `f` is analytic in the strip
/// `|Im z| < pole_distance`: at most `2 * 9.5 / min_nodes` and small enough
/// that the discretization error is below `exp(-12 pi)`.
pub fn trapezoid_step(pole_distance: f64, min_nodes: usize) -> f64 {
    let coarse = 2.0 * TRAPEZOID_LIMIT / min_nodes.max(2) as f64;
    if pole_distance.is_finite() {
        coarse.min(pole_distance / 6.0)
    } else {
        coarse
    }
}

/// Nodes and weights of the trapezoid rule for `E[f(Z)]`, `Z ~ N(0, 1)`, on
/// `[-9.5, 9.5]` with step `h`.
pub fn gaussian_trapezoid(h: f64) -> (Vec<f64>, Vec<f64>) {
    let k = (TRAPEZOID_LIMIT / h).floor() as i64;
    (-k..=k)
        .map(|j| {
            let x = j as f64 * h;
            (x, h * norm_pdf(x))
        })
        .unzip()
}

/// `E[f(mu + sigma Z)]` by [`gaussian_trapezoid`].
pub fn gaussian_expectation_trapezoid(mut f: impl FnMut(f64) -> f64, mu: f64, sigma: f64, h: f64) -> f64 {
    let k = (TRAPEZOID_LIMIT / h).floor() as i64;
    (-k..=k)
        .map(|j| {
            let x = j as f64 * h;
            h * norm_pdf(x) * f(mu + sigma * x)
        })
        .sum()
}
