//! Multi-response Gaussian regression with a group-lasso row penalty.
//!
//! Every predictor's coefficient row (one entry per response) is penalized
//! through its Euclidean norm, so a predictor is either in the model for
//! all responses or out for all of them. Blockwise coordinate descent with
//! the group soft-threshold produces exact zero rows; sparsity is never a
//! post-hoc epsilon cut. Responses are centered, and by default scaled to
//! unit variance so no single response dominates the shared penalty;
//! coefficients are reported on the original scale either way.

use super::{
    cv_engine, lambda_grid, population_mean_sd, sparse_rows, CvResult, Design, Family, LassoPath,
    PathConfig, PathPoint, SweepGuard,
};
use crate::data::{Dataset, FoldAssignment};
use crate::error::{Error, Result};
use crate::report::{fmt_g6, to_json_bytes, TsvTable};
use serde::Serialize;

/// v scaled by max(1 - gamma/||v||, 0); the zero vector when ||v|| <= gamma.
pub fn group_soft_threshold(v: &[f64], gamma: f64) -> Vec<f64> {
    debug_assert!(gamma >= 0.0);
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm <= gamma {
        return vec![0.0; v.len()];
    }
    let scale = 1.0 - gamma / norm;
    v.iter().map(|a| a * scale).collect()
}

struct MultiTaskSolver<'a> {
    x: &'a [Vec<f64>],
    constant: &'a [bool],
    n: usize,
    m: usize,
    /// residual columns, one per response
    r: Vec<Vec<f64>>,
}

impl<'a> MultiTaskSolver<'a> {
    fn new(design: &'a Design, y: &[Vec<f64>]) -> Self {
        MultiTaskSolver {
            x: &design.x,
            constant: &design.constant,
            n: design.n,
            m: y.len(),
            r: y.to_vec(),
        }
    }

    /// x_j'R / n as a length-m vector
    fn gradient_row(&self, j: usize) -> Vec<f64> {
        let col = &self.x[j];
        let n = self.n as f64;
        self.r
            .iter()
            .map(|rm| rm.iter().zip(col).map(|(a, b)| a * b).sum::<f64>() / n)
            .collect()
    }

    fn update_row(&mut self, j: usize, b: &mut [Vec<f64>], gamma: f64) -> f64 {
        let g = self.gradient_row(j);
        let u: Vec<f64> = b[j].iter().zip(&g).map(|(bm, gm)| bm + gm).collect();
        let new = group_soft_threshold(&u, gamma);
        let mut max_move = 0.0f64;
        for m in 0..self.m {
            let delta = new[m] - b[j][m];
            if delta != 0.0 {
                max_move = max_move.max(delta.abs());
                let col = &self.x[j];
                for (rv, xv) in self.r[m].iter_mut().zip(col) {
                    *rv -= delta * xv;
                }
            }
        }
        if max_move > 0.0 {
            b[j] = new;
        }
        max_move
    }

    fn objective(&self, b: &[Vec<f64>], gamma: f64) -> f64 {
        let rss: f64 = self
            .r
            .iter()
            .map(|rm| rm.iter().map(|v| v * v).sum::<f64>())
            .sum();
        let penalty: f64 = b
            .iter()
            .map(|row| row.iter().map(|v| v * v).sum::<f64>().sqrt())
            .sum();
        rss / (2.0 * self.n as f64) + gamma * penalty
    }

    fn solve_at(
        &mut self,
        gamma: f64,
        b: &mut [Vec<f64>],
        config: &PathConfig,
        trace: Option<&mut Vec<f64>>,
    ) -> Result<()> {
        let coords: Vec<usize> = (0..self.x.len()).filter(|&j| !self.constant[j]).collect();
        let mut guard = SweepGuard::new(config.max_sweeps, gamma);
        let mut local_trace = trace;
        loop {
            guard.tick()?;
            let mut max_change = 0.0f64;
            for &j in &coords {
                max_change = max_change.max(self.update_row(j, b, gamma));
            }
            if let Some(t) = local_trace.as_deref_mut() {
                t.push(self.objective(b, gamma));
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
                let mut mc = 0.0f64;
                for &j in &active {
                    mc = mc.max(self.update_row(j, b, gamma));
                }
                if let Some(t) = local_trace.as_deref_mut() {
                    t.push(self.objective(b, gamma));
                }
                if mc < config.tol {
                    break;
                }
            }
        }
    }
}

/// Group-lasso path over m responses. The penalty weight is 1 per row, or
/// sqrt(m) with `sqrt_m_weighting`; `standardize_responses` (default on)
/// scales each response to unit variance during the fit.
pub fn fit_multitask_path(
    d: &Dataset,
    outcomes: &[String],
    predictors: &[String],
    config: &PathConfig,
) -> Result<LassoPath> {
    if outcomes.is_empty() {
        return Err(Error::InvalidInput("need at least one response column".into()));
    }
    let design = Design::from_dataset(d, predictors)?;
    let raw = d.numeric_matrix(outcomes)?;
    fit_multitask_internal(&design, outcomes, &raw, config)
}

pub(crate) fn fit_multitask_internal(
    design: &Design,
    outcome_names: &[String],
    y_raw: &[Vec<f64>],
    config: &PathConfig,
) -> Result<LassoPath> {
    let n = design.n;
    let m = y_raw.len();
    let mut y_center = Vec::with_capacity(m);
    let mut y_scale = Vec::with_capacity(m);
    let mut y = Vec::with_capacity(m);
    for (name, col) in outcome_names.iter().zip(y_raw) {
        if col.len() != n {
            return Err(Error::InvalidInput(
                "response length does not match predictor rows".into(),
            ));
        }
        let (mean, sd) = population_mean_sd(col);
        if config.standardize_responses {
            if sd <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "response '{}' is constant and cannot be scaled",
                    name
                )));
            }
            y.push(col.iter().map(|v| (v - mean) / sd).collect::<Vec<f64>>());
            y_scale.push(sd);
        } else {
            y.push(col.iter().map(|v| v - mean).collect::<Vec<f64>>());
            y_scale.push(1.0);
        }
        y_center.push(mean);
    }

    let weight = if config.sqrt_m_weighting {
        (m as f64).sqrt()
    } else {
        1.0
    };

    let mut solver = MultiTaskSolver::new(design, &y);
    let p = design.p();
    let lambda_max = (0..p)
        .filter(|&j| !design.constant[j])
        .map(|j| {
            let g = solver.gradient_row(j);
            g.iter().map(|v| v * v).sum::<f64>().sqrt() / weight
        })
        .fold(0.0f64, f64::max);
    let grid = lambda_grid(lambda_max, n, p, config);
    let degenerate = lambda_max <= 0.0;

    let mut b: Vec<Vec<f64>> = vec![vec![0.0; m]; p];
    let mut points = Vec::with_capacity(grid.len());
    for &lambda in &grid {
        let mut trace = config.track_objective.then(Vec::new);
        solver.solve_at(lambda * weight, &mut b, config, trace.as_mut())?;
        let rows = sparse_rows(p, m, |j| {
            if b[j].iter().any(|&v| v != 0.0) {
                Some(
                    b[j].iter()
                        .enumerate()
                        .map(|(mm, v)| v * y_scale[mm] / design.scale[j])
                        .collect(),
                )
            } else {
                None
            }
        });
        let mut intercepts = y_center.clone();
        for (j, values) in &rows {
            for (im, vm) in intercepts.iter_mut().zip(values) {
                *im -= vm * design.center[*j];
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
        family: Family::Multitask,
        predictor_names: design.names.clone(),
        response_names: outcome_names.to_vec(),
        lambdas: grid,
        points,
        excluded_constant: design.excluded_names(),
        degenerate,
        n,
        x_center: design.center.clone(),
        x_scale: design.scale.clone(),
        y_center,
        y_scale,
    })
}

/// Mean squared held-out residual over all response cells.
fn heldout_frobenius_mse(
    path: &LassoPath,
    d: &Dataset,
    outcomes: &[String],
    rows: &[usize],
) -> Result<Vec<f64>> {
    let y: Vec<(&[f64], &[bool])> = outcomes
        .iter()
        .map(|name| d.numeric(name))
        .collect::<Result<Vec<_>>>()?;
    let cols: Vec<(&[f64], &[bool])> = path
        .predictor_names
        .iter()
        .map(|name| d.numeric(name))
        .collect::<Result<Vec<_>>>()?;
    let p = path.predictor_names.len();
    let m = outcomes.len();
    let mut x_row = vec![0.0; p];
    let mut out = Vec::with_capacity(path.points.len());
    for point in &path.points {
        let mut sse = 0.0;
        for &i in rows {
            for (j, (col, _)) in cols.iter().enumerate() {
                x_row[j] = col[i];
            }
            let pred = path.predict_linear(point, &x_row);
            for (mm, (ycol, _)) in y.iter().enumerate() {
                let e = ycol[i] - pred[mm];
                sse += e * e;
            }
        }
        out.push(sse / (rows.len() * m) as f64);
    }
    Ok(out)
}

/// Cross-validated multi-response path; held-out loss is the mean squared
/// residual across every (row, response) cell on the original scale.
pub fn cv_multitask(
    d: &Dataset,
    outcomes: &[String],
    predictors: &[String],
    folds: &FoldAssignment,
    config: &PathConfig,
) -> Result<CvResult> {
    if folds.n() != d.n_rows() {
        return Err(Error::InvalidInput(
            "fold assignment does not match dataset rows".into(),
        ));
    }
    let full = fit_multitask_path(d, outcomes, predictors, config)?;
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
            fit_multitask_path(&sub, outcomes, predictors, &fold_config)
        },
        |path, test| heldout_frobenius_mse(path, d, outcomes, test),
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

/// One multi-response solution lifted out of a path.
#[derive(Clone, Debug, Serialize)]
pub struct MultiTaskFit {
    pub response_names: Vec<String>,
    pub lambda: f64,
    pub intercepts: Vec<f64>,
    pub predictor_names: Vec<String>,
    /// Active rows as (predictor, per-response coefficients).
    pub rows: Vec<(String, Vec<f64>)>,
}

impl MultiTaskFit {
    pub fn from_path(path: &LassoPath, lambda: f64) -> Result<MultiTaskFit> {
        if path.family != Family::Multitask {
            return Err(Error::InvalidInput("path family is not multitask".into()));
        }
        let point = path.point_at(lambda)?;
        Ok(MultiTaskFit {
            response_names: path.response_names.clone(),
            lambda,
            intercepts: point.intercepts.clone(),
            predictor_names: path.predictor_names.clone(),
            rows: point
                .rows
                .iter()
                .map(|(j, v)| (path.predictor_names[*j].clone(), v.clone()))
                .collect(),
        })
    }

    pub fn active_rows(&self) -> Vec<&str> {
        self.rows.iter().map(|(name, _)| name.as_str()).collect()
    }

    pub fn to_json_bytes(&self) -> Result<Vec<u8>> {
        to_json_bytes(self)
    }
}

/// Active predictor rows ranked by Euclidean row norm, at most `top_k`.
pub fn rank_rows(fit: &MultiTaskFit, top_k: usize) -> Vec<(String, f64)> {
    let mut ranked: Vec<(String, f64)> = fit
        .rows
        .iter()
        .map(|(name, values)| {
            let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
            (name.clone(), norm)
        })
        .collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
    ranked.truncate(top_k);
    ranked
}

pub fn rank_rows_tsv(ranked: &[(String, f64)]) -> String {
    let mut table = TsvTable::new(vec!["rank", "name", "row_norm"]);
    for (i, (name, norm)) in ranked.iter().enumerate() {
        table.push(vec![(i + 1).to_string(), name.clone(), fmt_g6(*norm)]);
    }
    table.to_tsv()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_folds, Column, Role};
    use crate::lasso::gaussian::fit_lasso_path;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn group_soft_threshold_examples() {
        assert_eq!(group_soft_threshold(&[3.0, 4.0], 5.0), vec![0.0, 0.0]);
        let v = group_soft_threshold(&[3.0, 4.0], 2.5);
        assert!((v[0] - 1.5).abs() < 1e-12);
        assert!((v[1] - 2.0).abs() < 1e-12);
        let w = [0.3, -0.8, 2.0];
        assert_eq!(group_soft_threshold(&w, 0.0), w.to_vec());
    }

    fn multi_data(seed: u64, n: usize, p: usize, m: usize) -> (Dataset, Vec<String>, Vec<String>) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let cols: Vec<Vec<f64>> = (0..p)
            .map(|_| (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        // first two predictors drive every response
        let mut columns = Vec::new();
        let mut ynames = Vec::new();
        for mm in 0..m {
            let y: Vec<f64> = (0..n)
                .map(|i| {
                    1.0 + (mm as f64 + 1.0) * 0.8 * cols[0][i] - 0.9 * cols[1][i]
                        + 0.4 * rng.sample::<f64, _>(StandardNormal)
                })
                .collect();
            let name = format!("resp{}", mm);
            columns.push(Column::numeric(name.clone(), Role::Outcome, y));
            ynames.push(name);
        }
        let mut xnames = Vec::new();
        for (j, col) in cols.into_iter().enumerate() {
            let name = format!("x{:03}", j);
            columns.push(Column::numeric(name.clone(), Role::Predictor, col));
            xnames.push(name);
        }
        (Dataset::from_columns(columns).unwrap(), ynames, xnames)
    }

    #[test]
    fn anchor_rows_zero_intercepts_are_means() {
        let (d, ynames, xnames) = multi_data(21, 80, 6, 3);
        let path = fit_multitask_path(&d, &ynames, &xnames, &PathConfig::default()).unwrap();
        let first = &path.points[0];
        assert_eq!(first.n_nonzero, 0);
        for (mm, name) in ynames.iter().enumerate() {
            let (y, _) = d.numeric(name).unwrap();
            let mean = y.iter().sum::<f64>() / y.len() as f64;
            assert!((first.intercepts[mm] - mean).abs() < 1e-10);
        }
    }

    #[test]
    fn rows_are_bitwise_zero_or_fully_active() {
        let (d, ynames, xnames) = multi_data(22, 70, 8, 2);
        let path = fit_multitask_path(&d, &ynames, &xnames, &PathConfig::default()).unwrap();
        for point in &path.points {
            for (_, values) in &point.rows {
                // stored rows are the active ones; their norm must be positive
                let norm: f64 = values.iter().map(|v| v * v).sum();
                assert!(norm > 0.0);
            }
            assert_eq!(point.n_nonzero, point.rows.len());
        }
        // signal rows active at the path end
        let last = path.points.last().unwrap();
        let active: Vec<usize> = last.rows.iter().map(|(j, _)| *j).collect();
        assert!(active.contains(&0));
        assert!(active.contains(&1));
    }

    #[test]
    fn single_response_matches_gaussian_lasso() {
        let (d, ynames, xnames) = multi_data(23, 90, 7, 1);
        let config = PathConfig::default();
        let multi = fit_multitask_path(&d, &ynames, &xnames, &config).unwrap();
        let single = fit_lasso_path(&d, &ynames[0], &xnames, &config).unwrap();
        assert_eq!(multi.lambdas.len(), single.lambdas.len());
        for (pm, ps) in multi.points.iter().zip(&single.points) {
            assert_eq!(pm.n_nonzero, ps.n_nonzero, "at lambda index mismatch");
            assert!((pm.intercepts[0] - ps.intercepts[0]).abs() < 1e-6);
            for ((jm, vm), (js, vs)) in pm.rows.iter().zip(&ps.rows) {
                assert_eq!(jm, js);
                assert!(
                    (vm[0] - vs[0]).abs() < 1e-6,
                    "row {}: {} vs {}",
                    jm,
                    vm[0],
                    vs[0]
                );
            }
        }
    }

    #[test]
    fn response_permutation_equivariance() {
        let (d, ynames, xnames) = multi_data(24, 60, 5, 3);
        let config = PathConfig::default();
        let path = fit_multitask_path(&d, &ynames, &xnames, &config).unwrap();
        let permuted: Vec<String> = vec![ynames[2].clone(), ynames[0].clone(), ynames[1].clone()];
        let path2 = fit_multitask_path(&d, &permuted, &xnames, &config).unwrap();
        assert_eq!(path.lambdas, path2.lambdas);
        let a = path.points.last().unwrap();
        let b = path2.points.last().unwrap();
        assert_eq!(a.rows.len(), b.rows.len());
        // response mm of the original sits at permuted position
        let position = [1usize, 2, 0];
        for ((ja, va), (jb, vb)) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ja, jb);
            for mm in 0..3 {
                assert!((va[mm] - vb[position[mm]]).abs() < 1e-8);
            }
        }
        for mm in 0..3 {
            assert!((a.intercepts[mm] - b.intercepts[position[mm]]).abs() < 1e-10);
        }
    }

    #[test]
    fn cv_multitask_runs_fourfold_and_is_deterministic() {
        let (d, ynames, xnames) = multi_data(25, 104, 10, 3);
        let folds = make_folds(104, 4, 11).unwrap();
        let cv = cv_multitask(&d, &ynames, &xnames, &folds, &PathConfig::default()).unwrap();
        assert!(cv.lambda_1se >= cv.lambda_min);
        assert!(cv.path.lambda_index(cv.lambda_min).is_ok());
        let cv2 = cv_multitask(&d, &ynames, &xnames, &folds, &PathConfig::default()).unwrap();
        assert_eq!(cv.cv_mean, cv2.cv_mean);
        assert_eq!(cv.lambda_min, cv2.lambda_min);
        let fit = MultiTaskFit::from_path(&cv.path, cv.lambda_min).unwrap();
        let names = fit.active_rows();
        assert!(names.contains(&"x000"));
        assert!(names.contains(&"x001"));
    }

    #[test]
    fn rank_rows_sorts_and_truncates() {
        let fit = MultiTaskFit {
            response_names: vec!["a".into(), "b".into()],
            lambda: 0.1,
            intercepts: vec![0.0, 0.0],
            predictor_names: vec!["p".into(), "q".into(), "r".into()],
            rows: vec![
                ("p".into(), vec![0.1, 0.1]),
                ("q".into(), vec![3.0, 4.0]),
                ("r".into(), vec![1.0, 0.0]),
            ],
        };
        let ranked = rank_rows(&fit, 2);
        assert_eq!(ranked.len(), 2);
        assert_eq!(ranked[0].0, "q");
        assert!((ranked[0].1 - 5.0).abs() < 1e-12);
        assert_eq!(ranked[1].0, "r");
        let tsv = rank_rows_tsv(&ranked);
        assert!(tsv.starts_with("rank\tname\trow_norm\n"));

        let empty = MultiTaskFit {
            response_names: vec!["a".into()],
            lambda: 1.0,
            intercepts: vec![0.0],
            predictor_names: vec![],
            rows: vec![],
        };
        assert!(rank_rows(&empty, 50).is_empty());
    }

    #[test]
    fn constant_response_is_rejected_when_scaling() {
        let d = Dataset::from_columns(vec![
            Column::numeric("y", Role::Outcome, vec![2.0, 2.0, 2.0]),
            Column::numeric("x", Role::Predictor, vec![1.0, 2.0, 3.0]),
        ])
        .unwrap();
        let err = fit_multitask_path(
            &d,
            &["y".to_string()],
            &["x".to_string()],
            &PathConfig::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("constant"));
    }
}
