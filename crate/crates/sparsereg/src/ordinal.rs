//! Proportional-odds ordinal regression.
//!
//! The model puts `logit P(Y <= j) = theta_j - x'beta`, so a positive slope
//! pushes probability mass toward higher categories. Fitting is Newton with
//! step halving. The threshold vector is optimized through an unconstrained
//! reparameterization (first threshold free, each later one adding the
//! exponential of a free parameter) so the cutpoints stay strictly
//! increasing at every iterate. Standard errors come from the inverse
//! observed information in the original parameterization.

use crate::data::{CategoricalOutcome, Dataset};
use crate::error::{Error, Result};
use crate::linear::wald_ci;
use crate::report::{fmt_g6, TsvTable};
use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, Normal};

#[derive(Clone, Debug)]
pub struct OrdinalOptions {
    pub max_iter: usize,
    /// Max-norm bound on the score vector at which the fit counts as converged.
    pub grad_tol: f64,
    /// Alternative exit on relative log-likelihood change.
    pub ll_tol: f64,
    /// Slope norm past which an improving likelihood is called separation.
    pub separation_norm: f64,
}

impl Default for OrdinalOptions {
    fn default() -> Self {
        OrdinalOptions {
            max_iter: 100,
            grad_tol: 1e-8,
            ll_tol: 1e-10,
            separation_norm: 1e3,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OrdinalFit {
    pub labels: Vec<String>,
    pub predictor_names: Vec<String>,
    /// Strictly increasing cutpoints, J-1 of them.
    pub thresholds: Vec<f64>,
    pub slopes: Vec<f64>,
    pub threshold_std_errors: Vec<f64>,
    pub slope_std_errors: Vec<f64>,
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Design and outcome for the likelihood computations, predictors stored
/// column-major. Useful directly in tests that difference the likelihood.
pub struct OrdinalData {
    x: Vec<Vec<f64>>,
    y: Vec<usize>,
    n_levels: usize,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl OrdinalData {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<usize>, n_levels: usize) -> Result<OrdinalData> {
        if n_levels < 2 {
            return Err(Error::InvalidInput("need at least 2 levels".into()));
        }
        let n = y.len();
        if n == 0 {
            return Err(Error::InvalidInput("no observations".into()));
        }
        for col in &x {
            if col.len() != n {
                return Err(Error::InvalidInput("predictor length mismatch".into()));
            }
        }
        let mut counts = vec![0usize; n_levels];
        for &c in &y {
            if c >= n_levels {
                return Err(Error::InvalidInput(format!("code {} out of range", c)));
            }
            counts[c] += 1;
        }
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            return Err(Error::InvalidInput(format!(
                "category {} is never observed",
                empty
            )));
        }
        Ok(OrdinalData { x, y, n_levels })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn n_predictors(&self) -> usize {
        self.x.len()
    }

    pub fn n_levels(&self) -> usize {
        self.n_levels
    }

    fn eta(&self, slopes: &[f64]) -> Vec<f64> {
        let mut eta = vec![0.0; self.n()];
        for (col, &b) in self.x.iter().zip(slopes) {
            for (e, &v) in eta.iter_mut().zip(col) {
                *e += b * v;
            }
        }
        eta
    }

    /// Per-observation category probability bounds. Returns (upper sigmoid,
    /// lower sigmoid, probability) for the observed category.
    fn cell(&self, thresholds: &[f64], eta: f64, code: usize) -> (f64, f64, f64) {
        let j = self.n_levels - 1;
        let upper = if code == j { 1.0 } else { sigmoid(thresholds[code] - eta) };
        let lower = if code == 0 { 0.0 } else { sigmoid(thresholds[code - 1] - eta) };
        (upper, lower, upper - lower)
    }

    pub fn log_likelihood(&self, thresholds: &[f64], slopes: &[f64]) -> f64 {
        assert_eq!(thresholds.len(), self.n_levels - 1);
        assert_eq!(slopes.len(), self.x.len());
        let eta = self.eta(slopes);
        self.y
            .iter()
            .zip(&eta)
            .map(|(&c, &e)| {
                let (_, _, p) = self.cell(thresholds, e, c);
                p.max(1e-300).ln()
            })
            .sum()
    }

    /// Score vector, thresholds first then slopes.
    pub fn gradient(&self, thresholds: &[f64], slopes: &[f64]) -> Vec<f64> {
        let jm1 = self.n_levels - 1;
        let p = self.x.len();
        let eta = self.eta(slopes);
        let mut grad = vec![0.0; jm1 + p];
        for (i, (&c, &e)) in self.y.iter().zip(&eta).enumerate() {
            let (a, b, prob) = self.cell(thresholds, e, c);
            let prob = prob.max(1e-300);
            let da = a * (1.0 - a);
            let db = b * (1.0 - b);
            if c < jm1 {
                grad[c] += da / prob;
            }
            if c > 0 {
                grad[c - 1] -= db / prob;
            }
            let g_eta = (db - da) / prob;
            for (k, col) in self.x.iter().enumerate() {
                grad[jm1 + k] += g_eta * col[i];
            }
        }
        grad
    }

    /// Observed Hessian of the log likelihood, thresholds first then slopes.
    pub fn hessian(&self, thresholds: &[f64], slopes: &[f64]) -> DMatrix<f64> {
        let jm1 = self.n_levels - 1;
        let p = self.x.len();
        let m = jm1 + p;
        let eta = self.eta(slopes);
        let mut h = DMatrix::zeros(m, m);
        for (i, (&c, &e)) in self.y.iter().zip(&eta).enumerate() {
            let (a, b, prob) = self.cell(thresholds, e, c);
            let prob = prob.max(1e-300);
            let da = a * (1.0 - a);
            let db = b * (1.0 - b);
            let dda = da * (1.0 - 2.0 * a);
            let ddb = db * (1.0 - 2.0 * b);
            let inv = 1.0 / prob;
            let inv2 = inv * inv;

            if c < jm1 {
                h[(c, c)] += dda * inv - da * da * inv2;
            }
            if c > 0 {
                let t = c - 1;
                h[(t, t)] += -ddb * inv - db * db * inv2;
            }
            if c < jm1 && c > 0 {
                let t = c - 1;
                let cross = da * db * inv2;
                h[(c, t)] += cross;
                h[(t, c)] += cross;
            }

            // slope block and threshold-slope cross terms
            let g_eta = (db - da) * inv;
            let h_eta = (dda - ddb) * inv - g_eta * g_eta;
            for (k, colk) in self.x.iter().enumerate() {
                let xk = colk[i];
                if c < jm1 {
                    let v = (-dda * inv + da * (da - db) * inv2) * xk;
                    h[(c, jm1 + k)] += v;
                    h[(jm1 + k, c)] += v;
                }
                if c > 0 {
                    let t = c - 1;
                    let v = (ddb * inv + db * (db - da) * inv2) * xk;
                    h[(t, jm1 + k)] += v;
                    h[(jm1 + k, t)] += v;
                }
                for (l, coll) in self.x.iter().enumerate().take(k + 1) {
                    let v = h_eta * xk * coll[i];
                    h[(jm1 + k, jm1 + l)] += v;
                    if l != k {
                        h[(jm1 + l, jm1 + k)] += v;
                    }
                }
            }
        }
        h
    }
}

/// Maps free parameters to strictly increasing thresholds.
fn phi_to_theta(phi: &[f64], jm1: usize) -> Vec<f64> {
    let mut theta = Vec::with_capacity(jm1);
    let mut cur = phi[0];
    theta.push(cur);
    for f in phi.iter().take(jm1).skip(1) {
        cur += f.exp();
        theta.push(cur);
    }
    theta
}

pub fn fit_ordinal(
    d: &Dataset,
    outcome: &CategoricalOutcome,
    predictors: &[String],
) -> Result<OrdinalFit> {
    fit_ordinal_with(d, outcome, predictors, &OrdinalOptions::default())
}

pub fn fit_ordinal_with(
    d: &Dataset,
    outcome: &CategoricalOutcome,
    predictors: &[String],
    opts: &OrdinalOptions,
) -> Result<OrdinalFit> {
    if outcome.len() != d.n_rows() {
        return Err(Error::InvalidInput(
            "outcome length does not match dataset rows".into(),
        ));
    }
    let x = d.numeric_matrix(predictors)?;
    let data = OrdinalData::new(x, outcome.codes().to_vec(), outcome.n_levels())?;
    let core = fit_ordinal_data(&data, opts)?;
    Ok(OrdinalFit {
        labels: outcome.labels().to_vec(),
        predictor_names: predictors.to_vec(),
        ..core
    })
}

pub fn fit_ordinal_data(data: &OrdinalData, opts: &OrdinalOptions) -> Result<OrdinalFit> {
    let jm1 = data.n_levels() - 1;
    let p = data.n_predictors();
    let n = data.n();
    let m = jm1 + p;

    // start at the intercept-only solution: cumulative-proportion logits
    let mut counts = vec![0usize; data.n_levels()];
    for &c in &data.y {
        counts[c] += 1;
    }
    let mut phi = vec![0.0; m];
    {
        let mut cum = 0usize;
        let mut theta_prev = 0.0;
        for j in 0..jm1 {
            cum += counts[j];
            let frac = cum as f64 / n as f64;
            let theta_j = (frac / (1.0 - frac)).ln();
            if j == 0 {
                phi[0] = theta_j;
            } else {
                phi[j] = (theta_j - theta_prev).max(1e-8).ln();
            }
            theta_prev = theta_j;
        }
    }

    let eval = |phi: &[f64]| -> (Vec<f64>, Vec<f64>, f64) {
        let theta = phi_to_theta(phi, jm1);
        let slopes = phi[jm1..].to_vec();
        let ll = data.log_likelihood(&theta, &slopes);
        (theta, slopes, ll)
    };

    let (_, _, mut ll) = eval(&phi);
    let mut converged = false;
    let mut iterations = 0;
    // Slope movement in the most recent accepted step. An interior optimum
    // is approached quadratically, so the step preceding a sub-tolerance
    // gradient is minuscule; under separation the gradient decays to zero
    // along a runaway direction while the slopes keep marching outward by
    // roughly constant increments. A material last step at the moment the
    // tolerances are met is therefore the practical divergence signal.
    const SEPARATION_STEP: f64 = 1e-2;
    let mut last_slope_step = 0.0;

    for iter in 1..=opts.max_iter {
        iterations = iter;
        let theta = phi_to_theta(&phi, jm1);
        let slopes = &phi[jm1..];
        let grad_orig = data.gradient(&theta, slopes);
        let slope_norm = slopes.iter().map(|b| b * b).sum::<f64>().sqrt();
        if slope_norm > opts.separation_norm {
            return Err(Error::Separation(format!(
                "slope norm {:.3e} with improving likelihood",
                slope_norm
            )));
        }
        if grad_orig.iter().all(|g| g.abs() < opts.grad_tol) {
            if last_slope_step > SEPARATION_STEP {
                return Err(Error::Separation(format!(
                    "slope norm {:.3e} still growing (last step {:.3e}) with improving likelihood",
                    slope_norm, last_slope_step
                )));
            }
            converged = true;
            break;
        }

        // chain rule into the unconstrained space
        let h_orig = data.hessian(&theta, slopes);
        let mut t = DMatrix::zeros(m, m);
        for j in 0..jm1 {
            t[(j, 0)] = 1.0;
            for k in 1..=j {
                t[(j, k)] = phi[k].exp();
            }
        }
        for k in 0..p {
            t[(jm1 + k, jm1 + k)] = 1.0;
        }
        let g_vec = DVector::from_column_slice(&grad_orig);
        let g_phi = t.transpose() * &g_vec;
        let mut h_phi = t.transpose() * &h_orig * &t;
        for k in 1..jm1 {
            let curvature: f64 = (k..jm1).map(|j| grad_orig[j]).sum::<f64>() * phi[k].exp();
            h_phi[(k, k)] += curvature;
        }

        let step = h_phi
            .lu()
            .solve(&(-&g_phi))
            .ok_or_else(|| Error::NoConvergence("singular Hessian in Newton step".into()))?;

        // step halving keeps the likelihood monotone
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = phi
                .iter()
                .zip(step.iter())
                .map(|(v, s)| v + scale * s)
                .collect();
            let (_, _, trial_ll) = eval(&trial);
            if trial_ll.is_finite() && trial_ll > ll - 1e-12 {
                let moved: f64 = step
                    .iter()
                    .skip(jm1)
                    .map(|s| (scale * s) * (scale * s))
                    .sum::<f64>()
                    .sqrt();
                last_slope_step = moved;
                phi = trial;
                let improved = trial_ll - ll;
                ll = trial_ll;
                accepted = true;
                if improved.abs() < opts.ll_tol * (1.0 + ll.abs()) {
                    if moved > SEPARATION_STEP && improved > 0.0 {
                        let slope_norm =
                            phi[jm1..].iter().map(|b| b * b).sum::<f64>().sqrt();
                        return Err(Error::Separation(format!(
                            "slope norm {:.3e} still growing (last step {:.3e}) with improving likelihood",
                            slope_norm, moved
                        )));
                    }
                    converged = true;
                }
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence(
                "step halving failed to improve the likelihood".into(),
            ));
        }
        if converged {
            break;
        }
    }

    if !converged {
        return Err(Error::NoConvergence(format!(
            "no convergence in {} iterations",
            opts.max_iter
        )));
    }

    let thresholds = phi_to_theta(&phi, jm1);
    let slopes = phi[jm1..].to_vec();
    let info = -data.hessian(&thresholds, &slopes);
    let cov = info.try_inverse().ok_or_else(|| {
        Error::NoConvergence("observed information is singular at the optimum".into())
    })?;
    let se: Vec<f64> = (0..m).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();

    Ok(OrdinalFit {
        labels: Vec::new(),
        predictor_names: Vec::new(),
        thresholds,
        slopes,
        threshold_std_errors: se[..jm1].to_vec(),
        slope_std_errors: se[jm1..].to_vec(),
        log_likelihood: ll,
        converged,
        iterations,
    })
}

/// Category probabilities at a single predictor vector. The cells are
/// differences of adjacent cumulative sigmoids, so they are non-negative
/// and sum to one by construction.
pub fn predict_category_probs(fit: &OrdinalFit, x: &[f64]) -> Vec<f64> {
    assert_eq!(
        x.len(),
        fit.slopes.len(),
        "predictor vector length must match the fitted slopes"
    );
    let eta: f64 = x.iter().zip(&fit.slopes).map(|(a, b)| a * b).sum();
    let j = fit.thresholds.len() + 1;
    let mut probs = Vec::with_capacity(j);
    let mut prev = 0.0;
    for t in &fit.thresholds {
        let cur = sigmoid(t - eta);
        probs.push(cur - prev);
        prev = cur;
    }
    probs.push(1.0 - prev);
    probs
}

#[derive(Clone, Debug)]
pub struct ForestRow {
    pub term: String,
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
    pub p_value: f64,
}

/// Slope summaries for a forest plot: per-term log odds with a
/// normal-approximation interval and two-sided p-value.
pub fn forest_data(fit: &OrdinalFit, level: f64) -> Result<Vec<ForestRow>> {
    if !fit.converged {
        return Err(Error::InvalidInput("fit did not converge".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!(
            "confidence level must lie in (0, 1), got {}",
            level
        )));
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let rows = fit
        .slopes
        .iter()
        .enumerate()
        .map(|(k, &b)| {
            let se = fit.slope_std_errors[k];
            let (lo, hi) = wald_ci(b, se, level);
            let p = if se > 0.0 {
                2.0 * (1.0 - normal.cdf((b / se).abs()))
            } else if b == 0.0 {
                1.0
            } else {
                0.0
            };
            ForestRow {
                term: fit
                    .predictor_names
                    .get(k)
                    .cloned()
                    .unwrap_or_else(|| format!("x{}", k + 1)),
                estimate: b,
                lo,
                hi,
                p_value: p,
            }
        })
        .collect();
    Ok(rows)
}

pub fn forest_tsv(rows: &[ForestRow]) -> String {
    let mut table = TsvTable::new(vec!["term", "estimate", "lo", "hi", "p"]);
    for r in rows {
        table.push(vec![
            r.term.clone(),
            fmt_g6(r.estimate),
            fmt_g6(r.lo),
            fmt_g6(r.hi),
            fmt_g6(r.p_value),
        ]);
    }
    table.to_tsv()
}
