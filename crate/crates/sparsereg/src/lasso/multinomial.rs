//! ℓ1-penalized multinomial logistic regression.
//!
//! The penalty is applied to every class column, which breaks the usual
//! reference-class identification, so coefficients live in the symmetric
//! parameterization: each predictor's row of class coefficients sums to
//! zero, as do the intercepts. The solver is block coordinate descent over
//! predictor rows. Each row update minimizes a majorizing quadratic (the
//! class-space curvature bound (1/2)(I - 11'/K) makes the surrogate exact
//! up to a factor) plus the ℓ1 penalty, constrained to the zero-sum
//! subspace; that subproblem is a soft-threshold shifted by a scalar
//! multiplier found from the sorted breakpoints. The majorization makes
//! every accepted update decrease the penalized objective, and rows whose
//! gradient spread is inside the threshold band come out exactly zero.

use super::{
    cv_engine, lambda_grid, sparse_rows, CvResult, Design, Family, LassoPath, PathConfig,
    PathPoint, SweepGuard,
};
use crate::data::{CategoricalOutcome, Dataset, FoldAssignment};
use crate::error::{Error, Result};
use crate::report::to_json_bytes;
use serde::Serialize;
use std::collections::BTreeSet;

/// Numerically stable softmax of per-class logits for one observation.
pub fn softmax_probs(intercepts: &[f64], coefficients: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    assert_eq!(coefficients.len(), x.len(), "one coefficient row per predictor");
    let k = intercepts.len();
    let mut logits = intercepts.to_vec();
    for (row, &xv) in coefficients.iter().zip(x) {
        assert_eq!(row.len(), k, "coefficient rows must have one entry per class");
        for (l, &c) in logits.iter_mut().zip(row) {
            *l += xv * c;
        }
    }
    softmax_in_place(&mut logits);
    logits
}

fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for l in logits.iter_mut() {
        *l = (*l - max).exp();
        sum += *l;
    }
    for l in logits.iter_mut() {
        *l /= sum;
    }
}

/// Mean negative log-likelihood of the multinomial model, for gradient
/// verification: predictors column-major, class codes in 0..k.
pub fn multinomial_nll(
    x: &[Vec<f64>],
    codes: &[usize],
    intercepts: &[f64],
    coefficients: &[Vec<f64>],
) -> f64 {
    let n = codes.len();
    let k = intercepts.len();
    let mut total = 0.0;
    let mut logits = vec![0.0; k];
    for i in 0..n {
        logits.copy_from_slice(intercepts);
        for (row, col) in coefficients.iter().zip(x) {
            let xv = col[i];
            for (l, &c) in logits.iter_mut().zip(row) {
                *l += xv * c;
            }
        }
        softmax_in_place(&mut logits);
        total -= logits[codes[i]].max(1e-300).ln();
    }
    total / n as f64
}

/// Analytic gradient of [`multinomial_nll`]: (intercept gradient, one
/// gradient row per predictor).
pub fn multinomial_nll_gradient(
    x: &[Vec<f64>],
    codes: &[usize],
    intercepts: &[f64],
    coefficients: &[Vec<f64>],
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = codes.len();
    let k = intercepts.len();
    let p = x.len();
    let mut g0 = vec![0.0; k];
    let mut g = vec![vec![0.0; k]; p];
    let mut logits = vec![0.0; k];
    for i in 0..n {
        logits.copy_from_slice(intercepts);
        for (row, col) in coefficients.iter().zip(x) {
            let xv = col[i];
            for (l, &c) in logits.iter_mut().zip(row) {
                *l += xv * c;
            }
        }
        softmax_in_place(&mut logits);
        logits[codes[i]] -= 1.0; // now the per-observation residual p - y
        for (gk, &r) in g0.iter_mut().zip(&logits) {
            *gk += r;
        }
        for (gj, col) in g.iter_mut().zip(x) {
            let xv = col[i];
            for (gk, &r) in gj.iter_mut().zip(&logits) {
                *gk += xv * r;
            }
        }
    }
    let scale = 1.0 / n as f64;
    for v in &mut g0 {
        *v *= scale;
    }
    for row in &mut g {
        for v in row {
            *v *= scale;
        }
    }
    (g0, g)
}

/// Solves min_c (1/2)||c - u||^2 + tau ||c||_1 subject to sum(c) = 0.
/// The minimizer is c_k = soft(u_k - mu, tau) with mu chosen so the
/// entries sum to zero; the zero vector results exactly when the spread of
/// u fits inside a 2*tau band.
pub(crate) fn l1_prox_zero_sum(u: &[f64], tau: f64) -> Vec<f64> {
    let k = u.len();
    let (min, max) = u
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if max - min <= 2.0 * tau {
        return vec![0.0; k];
    }
    // h(mu) = sum_k soft(u_k - mu, tau) is continuous, piecewise linear,
    // and non-increasing, with slope -(number of entries outside the band)
    let mut bps: Vec<f64> = Vec::with_capacity(2 * k);
    for &v in u {
        bps.push(v - tau);
        bps.push(v + tau);
    }
    bps.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    let h = |mu: f64| -> f64 {
        u.iter()
            .map(|&v| super::gaussian::soft_threshold(v - mu, tau))
            .sum()
    };
    // find the breakpoint interval where h crosses zero
    let mut lo = bps[0];
    let mut h_lo = h(lo);
    let mut mu = lo;
    if h_lo <= 0.0 {
        // can only happen through ties at the first breakpoint
        mu = lo;
    } else {
        for &bp in &bps[1..] {
            let h_bp = h(bp);
            if h_bp <= 0.0 {
                let slope_count = u
                    .iter()
                    .filter(|&&v| {
                        let mid = 0.5 * (lo + bp);
                        (v - mid).abs() > tau
                    })
                    .count();
                debug_assert!(slope_count > 0);
                mu = lo + h_lo / slope_count as f64;
                break;
            }
            lo = bp;
            h_lo = h_bp;
            mu = bp;
        }
    }
    u.iter()
        .map(|&v| super::gaussian::soft_threshold(v - mu, tau))
        .collect()
}

struct MultinomialSolver<'a> {
    x: &'a [Vec<f64>],
    constant: &'a [bool],
    codes: &'a [usize],
    n: usize,
    k: usize,
    /// logits, row-major n x k, kept in sync with the coefficients
    z: Vec<f64>,
    /// softmax probabilities, row-major n x k
    p: Vec<f64>,
}

impl<'a> MultinomialSolver<'a> {
    fn new(design: &'a Design, codes: &'a [usize], k: usize, intercepts: &[f64]) -> Self {
        let n = design.n;
        let mut z = vec![0.0; n * k];
        for i in 0..n {
            z[i * k..(i + 1) * k].copy_from_slice(intercepts);
        }
        let mut solver = MultinomialSolver {
            x: &design.x,
            constant: &design.constant,
            codes,
            n,
            k,
            z,
            p: vec![0.0; n * k],
        };
        for i in 0..n {
            solver.refresh_row(i);
        }
        solver
    }

    fn refresh_row(&mut self, i: usize) {
        let k = self.k;
        let row = &mut self.p[i * k..(i + 1) * k];
        row.copy_from_slice(&self.z[i * k..(i + 1) * k]);
        softmax_in_place(row);
    }

    /// (1/N) sum_i x_ij (p_i - y_i), the gradient row for predictor j
    fn gradient_row(&self, j: usize) -> Vec<f64> {
        let k = self.k;
        let mut g = vec![0.0; k];
        let col = &self.x[j];
        for i in 0..self.n {
            let xv = col[i];
            let base = i * k;
            for (gk, &pk) in g.iter_mut().zip(&self.p[base..base + k]) {
                *gk += xv * pk;
            }
            g[self.codes[i]] -= xv;
        }
        let scale = 1.0 / self.n as f64;
        for v in &mut g {
            *v *= scale;
        }
        g
    }

    fn gradient_intercept(&self) -> Vec<f64> {
        let k = self.k;
        let mut g = vec![0.0; k];
        for i in 0..self.n {
            let base = i * k;
            for (gk, &pk) in g.iter_mut().zip(&self.p[base..base + k]) {
                *gk += pk;
            }
            g[self.codes[i]] -= 1.0;
        }
        let scale = 1.0 / self.n as f64;
        for v in &mut g {
            *v *= scale;
        }
        g
    }

    fn apply_row(&mut self, j: usize, delta: &[f64]) {
        let k = self.k;
        let col = &self.x[j];
        for i in 0..self.n {
            let xv = col[i];
            let base = i * k;
            for (zk, &dk) in self.z[base..base + k].iter_mut().zip(delta) {
                *zk += xv * dk;
            }
            self.refresh_row(i);
        }
    }

    fn apply_intercept(&mut self, delta: &[f64]) {
        let k = self.k;
        for i in 0..self.n {
            let base = i * k;
            for (zk, &dk) in self.z[base..base + k].iter_mut().zip(delta) {
                *zk += dk;
            }
            self.refresh_row(i);
        }
    }

    /// mean NLL from the maintained probabilities
    fn mean_nll(&self) -> f64 {
        let k = self.k;
        let mut total = 0.0;
        for (i, &c) in self.codes.iter().enumerate() {
            total -= self.p[i * k + c].max(1e-300).ln();
        }
        total / self.n as f64
    }

    /// One majorize-minimize update of predictor row j, extended by an
    /// expanding line search along the update direction; returns the max
    /// absolute coefficient movement.
    ///
    /// The curvature bound behind the MM step is global; where the true
    /// curvature is much flatter (saturated probabilities) the plain step
    /// crawls. The objective restricted to the update ray is convex, so
    /// doubling the step while it keeps descending brackets the ray optimum
    /// within a factor of two — every accepted move still decreases the
    /// penalized objective, which keeps the sweep-level descent guarantee.
    fn update_row(&mut self, j: usize, b: &mut [Vec<f64>], lambda: f64) -> f64 {
        let g = self.gradient_row(j);
        let u: Vec<f64> = b[j].iter().zip(&g).map(|(bk, gk)| bk - 2.0 * gk).collect();
        let new = l1_prox_zero_sum(&u, 2.0 * lambda);
        let mut max_move = 0.0f64;
        let delta: Vec<f64> = new
            .iter()
            .zip(&b[j])
            .map(|(nk, bk)| {
                let d = nk - bk;
                max_move = max_move.max(d.abs());
                d
            })
            .collect();
        if max_move == 0.0 {
            return 0.0;
        }
        let penalty = |row: &[f64]| -> f64 { row.iter().map(|v| v.abs()).sum::<f64>() * lambda };
        self.apply_row(j, &delta);
        let mut accepted: Vec<f64> = new;
        let mut f_best = self.mean_nll() + penalty(&accepted);
        // expand: double the total step while the objective decrease is
        // clearly above rounding noise; the noise floor stops runaway walks
        // along the saturated plateau of the likelihood
        let mut t = 1.0f64;
        for _ in 0..40 {
            let floor = 1e-13 * (1.0 + f_best.abs());
            let extra: Vec<f64> = delta.iter().map(|d| d * t).collect();
            self.apply_row(j, &extra);
            let candidate: Vec<f64> = accepted.iter().zip(&extra).map(|(a, e)| a + e).collect();
            let f = self.mean_nll() + penalty(&candidate);
            if f < f_best - floor {
                f_best = f;
                accepted = candidate;
                t *= 2.0;
            } else {
                let back: Vec<f64> = extra.iter().map(|e| -e).collect();
                self.apply_row(j, &back);
                break;
            }
        }
        max_move = accepted
            .iter()
            .zip(&b[j])
            .fold(0.0f64, |m, (a, bk)| m.max((a - bk).abs()));
        b[j] = accepted;
        max_move
    }

    fn update_intercept(&mut self, b0: &mut [f64]) -> f64 {
        let g = self.gradient_intercept();
        let delta: Vec<f64> = g.iter().map(|gk| -2.0 * gk).collect();
        let step = delta.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        if step == 0.0 {
            return 0.0;
        }
        self.apply_intercept(&delta);
        let mut total: Vec<f64> = delta.clone();
        let mut f_best = self.mean_nll();
        let mut t = 1.0f64;
        for _ in 0..40 {
            let floor = 1e-13 * (1.0 + f_best.abs());
            let extra: Vec<f64> = delta.iter().map(|d| d * t).collect();
            self.apply_intercept(&extra);
            let f = self.mean_nll();
            if f < f_best - floor {
                f_best = f;
                for (tot, e) in total.iter_mut().zip(&extra) {
                    *tot += e;
                }
                t *= 2.0;
            } else {
                let back: Vec<f64> = extra.iter().map(|e| -e).collect();
                self.apply_intercept(&back);
                break;
            }
        }
        let max_move = total.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        for (bk, dk) in b0.iter_mut().zip(&total) {
            *bk += dk;
        }
        max_move
    }

    fn solve_at(
        &mut self,
        lambda: f64,
        b0: &mut [f64],
        b: &mut [Vec<f64>],
        config: &PathConfig,
        trace: Option<&mut Vec<f64>>,
    ) -> Result<()> {
        let coords: Vec<usize> = (0..self.x.len()).filter(|&j| !self.constant[j]).collect();
        let mut guard = SweepGuard::new(config.max_sweeps, lambda);
        let mut local_trace = trace;
        let penalty =
            |b: &[Vec<f64>]| -> f64 { b.iter().flatten().map(|v| v.abs()).sum::<f64>() };
        loop {
            guard.tick()?;
            let mut max_change = self.update_intercept(b0);
            for &j in &coords {
                max_change = max_change.max(self.update_row(j, b, lambda));
            }
            if let Some(t) = local_trace.as_deref_mut() {
                t.push(self.mean_nll() + lambda * penalty(b));
            }
            if max_change < config.tol {
                return Ok(());
            }
            let active: Vec<usize> = coords
                .iter()
                .copied()
                .filter(|&j| b[j].iter().any(|&v| v != 0.0))
                .collect();
            loop {
                guard.tick()?;
                let mut mc = self.update_intercept(b0);
                for &j in &active {
                    mc = mc.max(self.update_row(j, b, lambda));
                }
                if let Some(t) = local_trace.as_deref_mut() {
                    t.push(self.mean_nll() + lambda * penalty(b));
                }
                if mc < config.tol {
                    break;
                }
            }
        }
    }
}

/// ℓ1-penalized multinomial path over the standard log-spaced grid.
/// Coefficients are reported on the original predictor scale in the
/// zero-sum parameterization; `response_names` carries the class labels.
pub fn fit_multinomial_path(
    d: &Dataset,
    outcome: &CategoricalOutcome,
    predictors: &[String],
    config: &PathConfig,
) -> Result<LassoPath> {
    if outcome.len() != d.n_rows() {
        return Err(Error::InvalidInput(
            "outcome length does not match dataset rows".into(),
        ));
    }
    let design = Design::from_dataset(d, predictors)?;
    fit_multinomial_internal(&design, outcome, config)
}

pub(crate) fn fit_multinomial_internal(
    design: &Design,
    outcome: &CategoricalOutcome,
    config: &PathConfig,
) -> Result<LassoPath> {
    let k = outcome.n_levels();
    if k < 2 {
        return Err(Error::InvalidInput(
            "multinomial outcome needs at least 2 classes".into(),
        ));
    }
    outcome.require_min_count(2)?;
    let n = design.n;
    let codes = outcome.codes();

    // intercept-only start: centered log class proportions
    let counts = outcome.counts();
    let log_props: Vec<f64> = counts
        .iter()
        .map(|&c| (c as f64 / n as f64).ln())
        .collect();
    let mean_lp = log_props.iter().sum::<f64>() / k as f64;
    let mut b0: Vec<f64> = log_props.iter().map(|lp| lp - mean_lp).collect();

    let p = design.p();
    let mut b: Vec<Vec<f64>> = vec![vec![0.0; k]; p];
    let mut solver = MultinomialSolver::new(design, codes, k, &b0);

    let lambda_max = (0..p)
        .filter(|&j| !design.constant[j])
        .map(|j| {
            solver
                .gradient_row(j)
                .iter()
                .fold(0.0f64, |m, g| m.max(g.abs()))
        })
        .fold(0.0f64, f64::max);
    let grid = lambda_grid(lambda_max, n, p, config);
    let degenerate = lambda_max <= 0.0;

    let mut points = Vec::with_capacity(grid.len());
    for &lambda in &grid {
        let mut trace = config.track_objective.then(Vec::new);
        solver.solve_at(lambda, &mut b0, &mut b, config, trace.as_mut())?;
        let rows = sparse_rows(p, k, |j| {
            if b[j].iter().any(|&v| v != 0.0) {
                Some(b[j].iter().map(|v| v / design.scale[j]).collect())
            } else {
                None
            }
        });
        // shift intercepts to the original predictor scale
        let mut intercepts = b0.clone();
        for (j, values) in &rows {
            for (ik, vk) in intercepts.iter_mut().zip(values) {
                *ik -= vk * design.center[*j];
            }
        }
        points.push(PathPoint {
            lambda,
            intercepts,
            n_nonzero: rows.len(),
            rows,
            objective_trace: trace,
        });
    }

    Ok(LassoPath {
        family: Family::Multinomial,
        predictor_names: design.names.clone(),
        response_names: outcome.labels().to_vec(),
        lambdas: grid,
        points,
        excluded_constant: design.excluded_names(),
        degenerate,
        n,
        x_center: design.center.clone(),
        x_scale: design.scale.clone(),
        y_center: vec![0.0; k],
        y_scale: vec![1.0; k],
    })
}

/// A single multinomial solution lifted out of a path.
#[derive(Clone, Debug, Serialize)]
pub struct MultinomialFit {
    pub class_labels: Vec<String>,
    pub lambda: f64,
    pub intercepts: Vec<f64>,
    pub predictor_names: Vec<String>,
    /// Sparse coefficient triplets (predictor, class, value), ordered by
    /// predictor then class.
    pub coefficients: Vec<(String, String, f64)>,
}

impl MultinomialFit {
    pub fn from_path(path: &LassoPath, lambda: f64) -> Result<MultinomialFit> {
        if path.family != Family::Multinomial {
            return Err(Error::InvalidInput("path family is not multinomial".into()));
        }
        let point = path.point_at(lambda)?;
        let mut coefficients = Vec::new();
        for (j, values) in &point.rows {
            for (kk, &v) in values.iter().enumerate() {
                if v != 0.0 {
                    coefficients.push((
                        path.predictor_names[*j].clone(),
                        path.response_names[kk].clone(),
                        v,
                    ));
                }
            }
        }
        Ok(MultinomialFit {
            class_labels: path.response_names.clone(),
            lambda,
            intercepts: point.intercepts.clone(),
            predictor_names: path.predictor_names.clone(),
            coefficients,
        })
    }

    /// Class probabilities for one original-scale predictor vector ordered
    /// like `predictor_names`.
    pub fn predict_probs(&self, x: &std::collections::BTreeMap<String, f64>) -> Result<Vec<f64>> {
        let mut logits = self.intercepts.clone();
        let class_index: Vec<&String> = self.class_labels.iter().collect();
        for (pred, class, value) in &self.coefficients {
            let xv = *x.get(pred).ok_or_else(|| {
                Error::InvalidInput(format!("missing predictor '{}' in input", pred))
            })?;
            let kk = class_index
                .iter()
                .position(|c| *c == class)
                .expect("class label from fit");
            logits[kk] += xv * value;
        }
        softmax_in_place(&mut logits);
        Ok(logits)
    }

    /// Names with a nonzero coefficient for each class, in class order.
    pub fn per_class_nonzero(&self) -> Vec<BTreeSet<String>> {
        let mut sets = vec![BTreeSet::new(); self.class_labels.len()];
        for (pred, class, _) in &self.coefficients {
            let kk = self
                .class_labels
                .iter()
                .position(|c| c == class)
                .expect("class label from fit");
            sets[kk].insert(pred.clone());
        }
        sets
    }

    pub fn to_json_bytes(&self) -> Result<Vec<u8>> {
        to_json_bytes(self)
    }
}

/// -2 log-likelihood of the observations under a path point.
pub fn multinomial_deviance(
    path: &LassoPath,
    lambda: f64,
    d: &Dataset,
    outcome: &CategoricalOutcome,
    rows: &[usize],
) -> Result<f64> {
    let point = path.point_at(lambda)?;
    let losses = heldout_mean_deviance_point(path, point, d, outcome, rows)?;
    Ok(losses * rows.len() as f64)
}

/// Per-observation mean deviance 2 * mean(-log p_hat) on the given rows.
fn heldout_mean_deviance_point(
    path: &LassoPath,
    point: &PathPoint,
    d: &Dataset,
    outcome: &CategoricalOutcome,
    rows: &[usize],
) -> Result<f64> {
    let cols: Vec<(&[f64], &[bool])> = path
        .predictor_names
        .iter()
        .map(|name| d.numeric(name))
        .collect::<Result<Vec<_>>>()?;
    let codes = outcome.codes();
    if outcome.n_levels() != path.response_names.len() {
        return Err(Error::InvalidInput(
            "outcome levels do not match the fitted classes".into(),
        ));
    }
    let p = path.predictor_names.len();
    let mut x_row = vec![0.0; p];
    let mut total = 0.0;
    for &i in rows {
        for (j, (col, _)) in cols.iter().enumerate() {
            x_row[j] = col[i];
        }
        let mut logits = path.predict_linear(point, &x_row);
        softmax_in_place(&mut logits);
        total -= 2.0 * logits[codes[i]].max(1e-300).ln();
    }
    Ok(total / rows.len() as f64)
}

/// Cross-validated multinomial path; held-out loss is per-observation
/// mean deviance.
pub fn cv_multinomial(
    d: &Dataset,
    outcome: &CategoricalOutcome,
    predictors: &[String],
    folds: &FoldAssignment,
    config: &PathConfig,
) -> Result<CvResult> {
    if folds.n() != d.n_rows() {
        return Err(Error::InvalidInput(
            "fold assignment does not match dataset rows".into(),
        ));
    }
    let full = fit_multinomial_path(d, outcome, predictors, config)?;
    let master = full.lambdas.clone();
    let fold_config = PathConfig {
        lambdas: Some(master.clone()),
        ..config.clone()
    };
    let (cv_mean, cv_se, lambda_min, lambda_1se) = cv_engine(
        folds,
        &master,
        |train| {
            let sub = d.subset_rows(train)?;
            let sub_outcome = outcome.subset(train);
            fit_multinomial_path(&sub, &sub_outcome, predictors, &fold_config)
        },
        |path, test| {
            path.points
                .iter()
                .map(|point| heldout_mean_deviance_point(path, point, d, outcome, test))
                .collect()
        },
    )?;
    Ok(CvResult {
        k: folds.k(),
        lambdas: master,
        cv_mean,
        cv_se,
        lambda_min,
        lambda_1se,
        path: full,
    })
}

/// Exact union and intersection of nonzero-name sets.
pub fn gene_sets(sets: &[BTreeSet<String>]) -> Result<(BTreeSet<String>, BTreeSet<String>)> {
    let first = sets
        .first()
        .ok_or_else(|| Error::InvalidInput("need at least one gene set".into()))?;
    let mut union = first.clone();
    let mut intersection = first.clone();
    for s in &sets[1..] {
        union.extend(s.iter().cloned());
        intersection = intersection.intersection(s).cloned().collect();
    }
    Ok((union, intersection))
}

/// Sorted newline-delimited rendering for diff-stable set reports.
pub fn gene_set_text(set: &BTreeSet<String>) -> String {
    let mut out = String::new();
    for name in set {
        out.push_str(name);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_folds, Column, Role};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn softmax_examples() {
        let probs = softmax_probs(&[0.3, 0.3, 0.3], &[], &[]);
        for p in &probs {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
        let probs = softmax_probs(&[0.0, 3f64.ln()], &[], &[]);
        assert!((probs[0] - 0.25).abs() < 1e-12);
        assert!((probs[1] - 0.75).abs() < 1e-12);
        // shift invariance
        let a = softmax_probs(&[1.0, 2.0, -0.5], &[], &[]);
        let b = softmax_probs(&[101.0, 102.0, 99.5], &[], &[]);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha20Rng::seed_from_u64(41);
        for _ in 0..5 {
            let n = 30;
            let p = 4;
            let k = 3;
            let x: Vec<Vec<f64>> = (0..p)
                .map(|_| (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
                .collect();
            let codes: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
            let b0: Vec<f64> = (0..k).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let b: Vec<Vec<f64>> = (0..p)
                .map(|_| (0..k).map(|_| rng.gen_range(-0.5..0.5)).collect())
                .collect();
            let (g0, g) = multinomial_nll_gradient(&x, &codes, &b0, &b);
            let h = 1e-5;
            for kk in 0..k {
                let mut up = b0.clone();
                up[kk] += h;
                let mut dn = b0.clone();
                dn[kk] -= h;
                let fd = (multinomial_nll(&x, &codes, &up, &b)
                    - multinomial_nll(&x, &codes, &dn, &b))
                    / (2.0 * h);
                assert!(
                    (g0[kk] - fd).abs() / fd.abs().max(1.0) < 1e-4,
                    "intercept {kk}: {} vs {}",
                    g0[kk],
                    fd
                );
            }
            for j in 0..p {
                for kk in 0..k {
                    let mut up = b.clone();
                    up[j][kk] += h;
                    let mut dn = b.clone();
                    dn[j][kk] -= h;
                    let fd = (multinomial_nll(&x, &codes, &b0, &up)
                        - multinomial_nll(&x, &codes, &b0, &dn))
                        / (2.0 * h);
                    assert!(
                        (g[j][kk] - fd).abs() / fd.abs().max(1.0) < 1e-4,
                        "({j},{kk}): {} vs {}",
                        g[j][kk],
                        fd
                    );
                }
            }
        }
    }

    #[test]
    fn prox_zero_sum_properties() {
        // inside the band: exact zero
        let c = l1_prox_zero_sum(&[0.3, 0.1, -0.2], 0.4);
        assert!(c.iter().all(|&v| v == 0.0));
        // outside: zero-sum and shrunk
        let u = [2.0, -1.0, 0.2, -0.6];
        let c = l1_prox_zero_sum(&u, 0.5);
        assert!((c.iter().sum::<f64>()).abs() < 1e-12, "{c:?}");
        assert!(c.iter().any(|&v| v != 0.0));
        // verify optimality by local perturbation in the zero-sum plane
        let obj = |c: &[f64]| -> f64 {
            0.5 * c.iter().zip(&u).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
                + 0.5 * c.iter().map(|v| v.abs()).sum::<f64>()
        };
        let base = obj(&c);
        for a in 0..4 {
            for b in 0..4 {
                if a == b {
                    continue;
                }
                for eps in [1e-4, -1e-4] {
                    let mut per = c.clone();
                    per[a] += eps;
                    per[b] -= eps;
                    assert!(obj(&per) >= base - 1e-12);
                }
            }
        }
    }

    fn three_class_data(
        seed: u64,
        n: usize,
        noise_p: usize,
    ) -> (Dataset, CategoricalOutcome, Vec<String>) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(n), Vec::with_capacity(n)];
        let mut codes = Vec::with_capacity(n);
        for i in 0..n {
            let class = i % 3;
            let (mx, my) = match class {
                0 => (-2.0, 0.0),
                1 => (2.0, 0.0),
                _ => (0.0, 2.5),
            };
            cols[0].push(mx + rng.sample::<f64, _>(StandardNormal) * 0.6);
            cols[1].push(my + rng.sample::<f64, _>(StandardNormal) * 0.6);
            codes.push(class);
        }
        let mut columns = vec![
            Column::numeric("sig_a", Role::Predictor, cols[0].clone()),
            Column::numeric("sig_b", Role::Predictor, cols[1].clone()),
        ];
        let mut names = vec!["sig_a".to_string(), "sig_b".to_string()];
        for j in 0..noise_p {
            let col: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let name = format!("noise{:02}", j);
            columns.push(Column::numeric(name.clone(), Role::Predictor, col));
            names.push(name);
        }
        let d = Dataset::from_columns(columns).unwrap();
        let outcome = CategoricalOutcome::from_codes(
            codes,
            vec!["a".to_string(), "b".to_string(), "c".to_string()],
        )
        .unwrap();
        (d, outcome, names)
    }

    #[test]
    fn anchor_is_intercept_only_with_class_proportions() {
        let (d, outcome, names) = three_class_data(10, 120, 3);
        let path = fit_multinomial_path(&d, &outcome, &names, &PathConfig::default()).unwrap();
        let first = &path.points[0];
        assert_eq!(first.n_nonzero, 0);
        // intercept softmax equals class proportions
        let mut logits = first.intercepts.clone();
        softmax_in_place(&mut logits);
        let counts = outcome.counts();
        for (kk, &c) in counts.iter().enumerate() {
            let prop = c as f64 / outcome.len() as f64;
            assert!((logits[kk] - prop).abs() < 1e-8, "{} vs {}", logits[kk], prop);
        }
        // zero-sum identification
        assert!(first.intercepts.iter().sum::<f64>().abs() < 1e-8);
    }

    #[test]
    fn rows_sum_to_zero_and_training_accuracy_high() {
        let (d, outcome, names) = three_class_data(11, 300, 2);
        let path = fit_multinomial_path(&d, &outcome, &names, &PathConfig::default()).unwrap();
        let point = path.points.last().unwrap();
        assert!(point.n_nonzero >= 2);
        for (_, values) in &point.rows {
            assert!(values.iter().sum::<f64>().abs() < 1e-8);
        }
        // training accuracy at the smallest penalty
        let cols: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let mut correct = 0usize;
        for i in 0..d.n_rows() {
            let x: Vec<f64> = cols.iter().map(|c| d.numeric(c).unwrap().0[i]).collect();
            let mut logits = path.predict_linear(point, &x);
            softmax_in_place(&mut logits);
            let arg = logits
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            correct += usize::from(arg == outcome.codes()[i]);
        }
        let accuracy = correct as f64 / d.n_rows() as f64;
        assert!(accuracy >= 0.95, "training accuracy {}", accuracy);
    }

    #[test]
    fn intercept_only_deviance_is_entropy() {
        // balanced binary outcome, no usable predictors at the anchor
        let n = 100;
        let codes: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let noise: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let d = Dataset::from_columns(vec![Column::numeric("x", Role::Predictor, noise)]).unwrap();
        let outcome = CategoricalOutcome::from_codes(
            codes,
            vec!["a".to_string(), "b".to_string()],
        )
        .unwrap();
        let path =
            fit_multinomial_path(&d, &outcome, &["x".to_string()], &PathConfig::default())
                .unwrap();
        let rows: Vec<usize> = (0..n).collect();
        let dev = multinomial_deviance(&path, path.lambdas[0], &d, &outcome, &rows).unwrap();
        let expect = 2.0 * n as f64 * 2f64.ln();
        assert!((dev - expect).abs() < 1e-3, "{dev} vs {expect}");
    }

    #[test]
    fn train_deviance_decreases_with_lambda() {
        let (d, outcome, names) = three_class_data(12, 150, 2);
        let path = fit_multinomial_path(&d, &outcome, &names, &PathConfig::default()).unwrap();
        let rows: Vec<usize> = (0..d.n_rows()).collect();
        let first =
            multinomial_deviance(&path, path.lambdas[0], &d, &outcome, &rows).unwrap();
        let mid =
            multinomial_deviance(&path, path.lambdas[50], &d, &outcome, &rows).unwrap();
        let last = multinomial_deviance(&path, *path.lambdas.last().unwrap(), &d, &outcome, &rows)
            .unwrap();
        assert!(mid <= first + 1e-9);
        assert!(last <= mid + 1e-9);
    }

    #[test]
    fn class_relabeling_permutes_columns() {
        let (d, outcome, names) = three_class_data(13, 90, 1);
        let path = fit_multinomial_path(&d, &outcome, &names, &PathConfig::default()).unwrap();
        // permute classes (a,b,c) -> (c,a,b): new code = old 0->1, 1->2, 2->0
        let perm = [1usize, 2, 0];
        let permuted_codes: Vec<usize> = outcome.codes().iter().map(|&c| perm[c]).collect();
        let permuted = CategoricalOutcome::from_codes(
            permuted_codes,
            vec!["c".to_string(), "a".to_string(), "b".to_string()],
        )
        .unwrap();
        let path2 = fit_multinomial_path(&d, &permuted, &names, &PathConfig::default()).unwrap();
        assert_eq!(path.lambdas, path2.lambdas);
        let a = path.points.last().unwrap();
        let b = path2.points.last().unwrap();
        for kk in 0..3 {
            assert!(
                (a.intercepts[kk] - b.intercepts[perm[kk]]).abs() < 1e-8,
                "intercept {kk}: {} vs {}",
                a.intercepts[kk],
                b.intercepts[perm[kk]]
            );
        }
        assert_eq!(a.rows.len(), b.rows.len());
        for ((ja, va), (jb, vb)) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ja, jb);
            for kk in 0..3 {
                assert!(
                    (va[kk] - vb[perm[kk]]).abs() < 1e-8,
                    "row {ja} class {kk}: {} vs {}",
                    va[kk],
                    vb[perm[kk]]
                );
            }
        }
    }

    #[test]
    fn cv_multinomial_is_deterministic_and_sane() {
        let (d, outcome, names) = three_class_data(14, 120, 2);
        let folds = make_folds(120, 5, 3).unwrap();
        let cv =
            cv_multinomial(&d, &outcome, &names, &folds, &PathConfig::default()).unwrap();
        assert!(cv.lambda_1se >= cv.lambda_min);
        let cv2 =
            cv_multinomial(&d, &outcome, &names, &folds, &PathConfig::default()).unwrap();
        assert_eq!(cv.cv_mean, cv2.cv_mean);
        // informative predictors are selected at lambda_min
        let fit = MultinomialFit::from_path(&cv.path, cv.lambda_min).unwrap();
        let sets = fit.per_class_nonzero();
        let (union, _) = gene_sets(&sets).unwrap();
        assert!(union.contains("sig_a"));
        assert!(union.contains("sig_b"));
    }

    #[test]
    fn gene_set_algebra() {
        let s1: BTreeSet<String> = ["A", "B"].iter().map(|s| s.to_string()).collect();
        let s2: BTreeSet<String> = ["B", "C"].iter().map(|s| s.to_string()).collect();
        let (u, i) = gene_sets(&[s1.clone(), s2.clone()]).unwrap();
        assert_eq!(u.len(), 3);
        assert_eq!(i.len(), 1);
        assert!(i.contains("B"));
        let (u1, i1) = gene_sets(&[s1.clone()]).unwrap();
        assert_eq!(u1, s1);
        assert_eq!(i1, s1);
        let s3: BTreeSet<String> = ["Z"].iter().map(|s| s.to_string()).collect();
        let (_, empty) = gene_sets(&[s1, s3]).unwrap();
        assert!(empty.is_empty());
        assert!(gene_sets(&[]).is_err());
        let text = gene_set_text(&u);
        assert_eq!(text, "A\nB\nC\n");
    }

    #[test]
    fn fit_json_has_sparse_triplets() {
        let (d, outcome, names) = three_class_data(15, 90, 1);
        let path = fit_multinomial_path(&d, &outcome, &names, &PathConfig::default()).unwrap();
        let lambda = *path.lambdas.last().unwrap();
        let fit = MultinomialFit::from_path(&path, lambda).unwrap();
        let json = fit.to_json_bytes().unwrap();
        let parsed: serde_json::Value = serde_json::from_slice(&json).unwrap();
        assert_eq!(parsed["lambda"], serde_json::json!(lambda));
        assert!(parsed["coefficients"].as_array().unwrap().len() >= 2);
        assert_eq!(parsed["class_labels"].as_array().unwrap().len(), 3);
    }
}
