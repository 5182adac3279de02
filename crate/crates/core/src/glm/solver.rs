//! Coordinate descent on a centered design, shared by the linear and
//! logistic families and by both penalties.

use super::design::{axpy, dot, dot3, DesignMatrix};
use super::Family;
use crate::special::logistic;

pub(crate) const TOL: f64 = 1e-7;
pub(crate) const MAX_SWEEPS: usize = 100_000;
pub(crate) const MAX_IRLS: usize = 100;
pub(crate) const WEIGHT_FLOOR: f64 = 1e-5;
pub(crate) const PROB_CLAMP: f64 = 1e-10;
const DEV_RATIO_MAX: f64 = 0.999;
const DEV_CHANGE_MIN: f64 = 1e-5;
const MIN_PATH_LEN: usize = 5;
/// Path-mode threshold on `h_j d_j^2`, relative to the null deviance per
/// observation.
pub(crate) const PATH_THRESH: f64 = 1e-7;

/// When coordinate descent stops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Tolerance {
    /// Every coordinate moves by less than `TOL`.
    Strict,
    /// `Objective(PATH_THRESH * null deviance / n)`, resolved per problem.
    Path,
    /// Every coordinate changes the quadratic objective by less than the
    /// given amount.
    Objective(f64),
}

impl Tolerance {
    #[inline]
    fn done(self, abs_change: f64, obj_change: f64) -> bool {
        match self {
            Tolerance::Strict | Tolerance::Path => abs_change < TOL,
            Tolerance::Objective(t) => obj_change < t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Reg {
    L1,
    L2,
}

#[derive(Debug, Clone)]
pub(crate) struct Solution {
    pub lambda: f64,
    pub intercept: f64,
    pub coef: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub deviance: f64,
}

/// A penalized problem on a design whose columns are centered.
/// Columns flagged `pinned` keep a zero coefficient.
#[derive(Clone, Copy)]
pub(crate) struct Problem<'a> {
    pub x: &'a DesignMatrix,
    pub y: &'a [f64],
    pub family: Family,
    pub reg: Reg,
    pub pinned: &'a [bool],
    pub tol: Tolerance,
}

struct State {
    b0: f64,
    b: Vec<f64>,
    eta: Vec<f64>,
    grad: Vec<f64>,
    ever_active: Vec<bool>,
}

/// Curvatures `sum_i w_i x_ij^2 / n`, filled lazily.
struct Curvature {
    h: Vec<f64>,
}

impl Curvature {
    fn new(p: usize) -> Self {
        Curvature { h: vec![f64::NAN; p] }
    }

    fn reset(&mut self) {
        self.h.iter_mut().for_each(|v| *v = f64::NAN);
    }

    #[inline]
    fn get(&mut self, x: &DesignMatrix, w: Option<&[f64]>, j: usize) -> f64 {
        let v = self.h[j];
        if !v.is_nan() {
            return v;
        }
        let c = x.col(j);
        let n = x.n() as f64;
        let v = match w {
            None => dot(c, c) / n,
            Some(w) => dot3(c, c, w) / n,
        };
        self.h[j] = v;
        v
    }
}

#[inline]
fn soft_threshold(u: f64, t: f64) -> f64 {
    if u > t {
        u - t
    } else if u < -t {
        u + t
    } else {
        0.0
    }
}

/// Quadratic subproblem `(1/2n) sum w_i (z_i - b0 - x_i b)^2 + pen(b)`,
/// carried through the residual `r = z - b0 - X b`.
struct Quad<'a> {
    x: &'a DesignMatrix,
    w: Option<&'a [f64]>,
    sum_w: f64,
    reg: Reg,
    lambda: f64,
    tol: Tolerance,
}

impl Quad<'_> {
    /// One pass over `set`; returns the largest coordinate move and the
    /// largest `h d^2`.
    fn sweep(
        &self,
        set: &[usize],
        curv: &mut Curvature,
        b0: &mut f64,
        b: &mut [f64],
        r: &mut [f64],
    ) -> (f64, f64) {
        let n = self.x.n() as f64;
        let d0 = match self.w {
            None => r.iter().sum::<f64>() / n,
            Some(w) => dot(w, r) / self.sum_w,
        };
        let mut max_change = 0.0f64;
        let mut max_obj = 0.0f64;
        if d0 != 0.0 {
            *b0 += d0;
            r.iter_mut().for_each(|v| *v -= d0);
            max_change = d0.abs();
            max_obj = self.sum_w / n * d0 * d0;
        }
        for &j in set {
            let h = curv.get(self.x, self.w, j);
            if h <= 0.0 {
                continue;
            }
            let xj = self.x.col(j);
            let g = match self.w {
                None => dot(xj, r) / n,
                Some(w) => dot3(xj, w, r) / n,
            };
            let old = b[j];
            let u = g + h * old;
            let new = match self.reg {
                Reg::L1 => soft_threshold(u, self.lambda) / h,
                Reg::L2 => u / (h + self.lambda),
            };
            let d = new - old;
            if d != 0.0 {
                b[j] = new;
                axpy(-d, xj, r);
                max_change = max_change.max(d.abs());
                max_obj = max_obj.max(h * d * d);
            }
        }
        (max_change, max_obj)
    }

    fn objective(&self, b: &[f64], r: &[f64]) -> f64 {
        let n = self.x.n() as f64;
        let loss = match self.w {
            None => dot(r, r),
            Some(w) => dot3(r, r, w),
        } / (2.0 * n);
        let pen = match self.reg {
            Reg::L1 => self.lambda * b.iter().map(|v| v.abs()).sum::<f64>(),
            Reg::L2 => 0.5 * self.lambda * dot(b, b),
        };
        loss + pen
    }

    /// Full sweeps over `set` alternate with sweeps over its nonzero subset
    /// until a full sweep meets the tolerance.
    #[allow(clippy::too_many_arguments)]
    fn solve(
        &self,
        set: &[usize],
        curv: &mut Curvature,
        b0: &mut f64,
        b: &mut [f64],
        r: &mut [f64],
        sweeps: &mut usize,
        mut trace: Option<&mut Vec<f64>>,
    ) -> bool {
        let mut active = Vec::with_capacity(set.len());
        loop {
            let (mc, mo) = self.sweep(set, curv, b0, b, r);
            *sweeps += 1;
            if let Some(t) = trace.as_deref_mut() {
                t.push(self.objective(b, r));
            }
            if self.tol.done(mc, mo) {
                return true;
            }
            if *sweeps >= MAX_SWEEPS {
                return false;
            }
            active.clear();
            active.extend(set.iter().copied().filter(|&j| b[j] != 0.0));
            loop {
                let (mc, mo) = self.sweep(&active, curv, b0, b, r);
                *sweeps += 1;
                if let Some(t) = trace.as_deref_mut() {
                    t.push(self.objective(b, r));
                }
                if self.tol.done(mc, mo) {
                    break;
                }
                if *sweeps >= MAX_SWEEPS {
                    return false;
                }
            }
        }
    }
}

#[inline]
fn clamped_prob(eta: f64) -> f64 {
    logistic(eta).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

impl<'a> Problem<'a> {
    fn n(&self) -> usize {
        self.x.n()
    }

    fn p(&self) -> usize {
        self.x.p()
    }

    fn mean_y(&self) -> f64 {
        self.y.iter().sum::<f64>() / self.n() as f64
    }

    /// Smallest lambda at which the L1 solution is all zero.
    pub fn lambda_max(&self) -> f64 {
        let ybar = self.mean_y();
        let centered: Vec<f64> = self.y.iter().map(|v| v - ybar).collect();
        let n = self.n() as f64;
        (0..self.p())
            .filter(|&j| !self.pinned[j])
            .map(|j| (dot(self.x.col(j), &centered) / n).abs())
            .fold(0.0, f64::max)
    }

    pub fn deviance(&self, eta: &[f64]) -> f64 {
        match self.family {
            Family::Linear => self.y.iter().zip(eta).map(|(y, e)| (y - e) * (y - e)).sum(),
            Family::Logistic => {
                2.0 * self
                    .y
                    .iter()
                    .zip(eta)
                    .map(|(&y, &e)| crate::special::log1p_exp(e) - y * e)
                    .sum::<f64>()
            }
        }
    }

    fn null_deviance(&self) -> f64 {
        let ybar = self.mean_y();
        let eta0 = match self.family {
            Family::Linear => ybar,
            Family::Logistic => (ybar / (1.0 - ybar)).ln(),
        };
        self.deviance(&vec![eta0; self.n()])
    }

    fn initial_state(&self) -> State {
        let ybar = self.mean_y();
        let b0 = match self.family {
            Family::Linear => ybar,
            Family::Logistic => (ybar / (1.0 - ybar)).ln(),
        };
        let mut st = State {
            b0,
            b: vec![0.0; self.p()],
            eta: vec![b0; self.n()],
            grad: vec![0.0; self.p()],
            ever_active: vec![false; self.p()],
        };
        self.refresh_gradient(&mut st);
        st
    }

    /// Negative gradient of the smooth loss per coordinate: `x_j'(y - mu)/n`.
    fn refresh_gradient(&self, st: &mut State) {
        let resid = self.response_residual(&st.eta);
        let n = self.n() as f64;
        for j in 0..self.p() {
            st.grad[j] = if self.pinned[j] {
                0.0
            } else {
                dot(self.x.col(j), &resid) / n
            };
        }
    }

    fn response_residual(&self, eta: &[f64]) -> Vec<f64> {
        match self.family {
            Family::Linear => self.y.iter().zip(eta).map(|(y, e)| y - e).collect(),
            Family::Logistic => self
                .y
                .iter()
                .zip(eta)
                .map(|(y, &e)| y - logistic(e))
                .collect(),
        }
    }

    fn kkt_violations(&self, st: &State, lambda: f64, in_set: &[bool]) -> Vec<usize> {
        if self.reg == Reg::L2 {
            return Vec::new();
        }
        (0..self.p())
            .filter(|&j| !in_set[j] && !self.pinned[j] && st.grad[j].abs() > lambda)
            .collect()
    }

    fn solve_at(
        &self,
        st: &mut State,
        lambda: f64,
        lambda_prev: f64,
        curv: &mut Curvature,
        trace: Option<&mut Vec<f64>>,
    ) -> (bool, usize) {
        // The intercept-only model solves the lasso exactly at and above lambda_max.
        if self.reg == Reg::L1 && !self.pinned.contains(&true) && lambda >= self.lambda_max() {
            *st = self.initial_state();
            return (true, 0);
        }
        let p = self.p();
        let mut in_set = vec![false; p];
        for j in 0..p {
            if self.pinned[j] {
                continue;
            }
            in_set[j] = match self.reg {
                Reg::L2 => true,
                Reg::L1 => st.ever_active[j] || st.grad[j].abs() >= 2.0 * lambda - lambda_prev,
            };
        }
        let mut trace = trace;
        let mut converged;
        let mut iterations = 0;
        loop {
            let set: Vec<usize> = (0..p).filter(|&j| in_set[j]).collect();
            converged = match self.family {
                Family::Linear => self.solve_linear(st, lambda, &set, curv, &mut iterations, trace.as_deref_mut()),
                Family::Logistic => self.solve_logistic(st, lambda, &set, &mut iterations, trace.as_deref_mut()),
            };
            self.refresh_gradient(st);
            let viol = self.kkt_violations(st, lambda, &in_set);
            if viol.is_empty() || !converged {
                break;
            }
            for j in viol {
                in_set[j] = true;
            }
        }
        for j in 0..p {
            if st.b[j] != 0.0 {
                st.ever_active[j] = true;
            }
        }
        (converged, iterations)
    }

    fn solve_linear(
        &self,
        st: &mut State,
        lambda: f64,
        set: &[usize],
        curv: &mut Curvature,
        sweeps: &mut usize,
        trace: Option<&mut Vec<f64>>,
    ) -> bool {
        let q = Quad {
            x: self.x,
            w: None,
            sum_w: self.n() as f64,
            reg: self.reg,
            lambda,
            tol: self.tol,
        };
        let mut r: Vec<f64> = self.y.iter().zip(&st.eta).map(|(y, e)| y - e).collect();
        let ok = q.solve(set, curv, &mut st.b0, &mut st.b, &mut r, sweeps, trace);
        for ((e, y), ri) in st.eta.iter_mut().zip(self.y).zip(&r) {
            *e = y - ri;
        }
        ok
    }

    fn solve_logistic(
        &self,
        st: &mut State,
        lambda: f64,
        set: &[usize],
        outer: &mut usize,
        mut trace: Option<&mut Vec<f64>>,
    ) -> bool {
        let n = self.n();
        let mut w = vec![0.0; n];
        let mut r = vec![0.0; n];
        let mut curv = Curvature::new(self.p());
        let mut sweeps = 0usize;
        let mut old = st.b.clone();
        for _ in 0..MAX_IRLS {
            *outer += 1;
            for i in 0..n {
                let pr = clamped_prob(st.eta[i]);
                w[i] = (pr * (1.0 - pr)).max(WEIGHT_FLOOR);
                r[i] = (self.y[i] - pr) / w[i];
            }
            let sum_w: f64 = w.iter().sum();
            let q = Quad {
                x: self.x,
                w: Some(&w),
                sum_w,
                reg: self.reg,
                lambda,
                tol: self.tol,
            };
            curv.reset();
            old.copy_from_slice(&st.b);
            let old_b0 = st.b0;
            let ok = q.solve(set, &mut curv, &mut st.b0, &mut st.b, &mut r, &mut sweeps, trace.as_deref_mut());
            // eta_new = z - r_new, with z = eta_old + r_old.
            let z: Vec<f64> = st
                .eta
                .iter()
                .zip(&w)
                .zip(self.y)
                .map(|((&e, &wi), &y)| e + (y - clamped_prob(e)) / wi)
                .collect();
            for i in 0..n {
                st.eta[i] = z[i] - r[i];
            }
            let d0 = st.b0 - old_b0;
            let mut change = d0.abs();
            let mut obj = sum_w / n as f64 * d0 * d0;
            for &j in set {
                let d = st.b[j] - old[j];
                change = change.max(d.abs());
                if d != 0.0 {
                    obj = obj.max(curv.get(self.x, Some(&w), j) * d * d);
                }
            }
            if !ok {
                return false;
            }
            if self.tol.done(change, obj) {
                return true;
            }
        }
        false
    }

    /// Solutions along a decreasing lambda sequence with warm starts.
    /// With `truncate`, stops once the deviance ratio saturates.
    pub fn path(&self, lambdas: &[f64], truncate: bool) -> Vec<Solution> {
        if self.tol == Tolerance::Path {
            let thr = PATH_THRESH * self.null_deviance() / self.n() as f64;
            return Problem { tol: Tolerance::Objective(thr), ..*self }.path(lambdas, truncate);
        }
        let mut st = self.initial_state();
        let mut curv = Curvature::new(self.p());
        let null_dev = self.null_deviance();
        let lmax = self.lambda_max();
        let mut out = Vec::with_capacity(lambdas.len());
        let mut prev_ratio = 0.0;
        let mut lambda_prev = lmax.max(lambdas.first().copied().unwrap_or(0.0));
        for (k, &lambda) in lambdas.iter().enumerate() {
            let (converged, iterations) = self.solve_at(&mut st, lambda, lambda_prev, &mut curv, None);
            lambda_prev = lambda;
            let deviance = self.deviance(&st.eta);
            out.push(Solution {
                lambda,
                intercept: st.b0,
                coef: st.b.clone(),
                converged,
                iterations,
                deviance,
            });
            if truncate && null_dev > 0.0 && k + 1 >= MIN_PATH_LEN {
                let ratio = 1.0 - deviance / null_dev;
                if ratio > DEV_RATIO_MAX || ratio - prev_ratio < DEV_CHANGE_MIN * ratio {
                    break;
                }
                prev_ratio = ratio;
            } else if null_dev > 0.0 {
                prev_ratio = 1.0 - deviance / null_dev;
            }
        }
        out
    }

    /// Re-solves at `sol.lambda` to the strict tolerance, warm-started from
    /// `sol`.
    pub fn refine(&self, sol: &Solution) -> Solution {
        let mut st = self.initial_state();
        st.b0 = sol.intercept;
        st.b.copy_from_slice(&sol.coef);
        st.eta = self.x.mul_vec(&st.b).expect("coefficient length matches the design");
        st.eta.iter_mut().for_each(|e| *e += sol.intercept);
        for j in 0..self.p() {
            st.ever_active[j] = st.b[j] != 0.0;
        }
        self.refresh_gradient(&mut st);
        let strict = Problem { tol: Tolerance::Strict, ..*self };
        let mut curv = Curvature::new(self.p());
        let (converged, iterations) = strict.solve_at(&mut st, sol.lambda, sol.lambda, &mut curv, None);
        let deviance = self.deviance(&st.eta);
        Solution {
            lambda: sol.lambda,
            intercept: st.b0,
            coef: st.b,
            converged,
            iterations: sol.iterations + iterations,
            deviance,
        }
    }

    /// Single-lambda solve, optionally recording the subproblem objective
    /// after every coordinate sweep.
    pub fn solve_single(&self, lambda: f64, trace: Option<&mut Vec<f64>>) -> Solution {
        let mut st = self.initial_state();
        let mut curv = Curvature::new(self.p());
        let lmax = self.lambda_max().max(lambda);
        let (converged, iterations) = self.solve_at(&mut st, lambda, lmax, &mut curv, trace);
        let deviance = self.deviance(&st.eta);
        Solution {
            lambda,
            intercept: st.b0,
            coef: st.b,
            converged,
            iterations,
            deviance,
        }
    }
}
