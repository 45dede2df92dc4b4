//! ℓ1-penalized least squares along a warm-started path.
//!
//! Coordinate descent in the standardized space where every column has
//! squared norm n, so each coordinate update is a single soft-threshold.
//! Two residual-bookkeeping engines exist: naive updates that carry the
//! residual vector, and covariance updates that carry all p gradients plus
//! lazily computed Gram columns (profitable once p is large). Both produce
//! identical solutions; the choice is automatic above 500 predictors.

use super::{
    cv_engine, lambda_grid, sparse_rows, CvResult, Design, Family, LassoPath, PathConfig,
    PathPoint, SweepGuard,
};
use crate::data::{Dataset, FoldAssignment};
use crate::error::{Error, Result};
use crate::report::{fmt_g6, TsvTable};

/// sign(z) * max(|z| - gamma, 0)
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    debug_assert!(gamma >= 0.0);
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Path anchor max_j |x_j'y| / n for standardized predictor columns and a
/// centered outcome. Zero when the outcome is orthogonal to every column.
pub fn lambda_max_gaussian(x: &[Vec<f64>], y: &[f64]) -> f64 {
    let n = y.len() as f64;
    x.iter()
        .map(|col| {
            let dot: f64 = col.iter().zip(y).map(|(a, b)| a * b).sum();
            (dot / n).abs()
        })
        .fold(0.0, f64::max)
}

/// Residual bookkeeping strategy; `Auto` switches to covariance updates
/// when p exceeds 500. The certificate tests pin both engines to the same
/// solutions, so this is purely a performance knob.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CdEngine {
    #[default]
    Auto,
    Naive,
    Covariance,
}

enum State {
    Naive {
        r: Vec<f64>,
    },
    Covariance {
        g: Vec<f64>,
        xty: Vec<f64>,
        gram: Vec<Option<Vec<f64>>>,
        yty: f64,
    },
}

struct Solver<'a> {
    x: &'a [Vec<f64>],
    constant: &'a [bool],
    n: usize,
    state: State,
}

impl<'a> Solver<'a> {
    fn new(design: &'a Design, y: &[f64], engine: CdEngine) -> Solver<'a> {
        let p = design.p();
        let use_cov = match engine {
            CdEngine::Auto => p > 500,
            CdEngine::Naive => false,
            CdEngine::Covariance => true,
        };
        let n = design.n as f64;
        let state = if use_cov {
            let xty: Vec<f64> = design
                .x
                .iter()
                .map(|col| col.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / n)
                .collect();
            State::Covariance {
                g: xty.clone(),
                xty,
                gram: vec![None; p],
                yty: y.iter().map(|v| v * v).sum(),
            }
        } else {
            State::Naive { r: y.to_vec() }
        };
        Solver {
            x: &design.x,
            constant: &design.constant,
            n: design.n,
            state,
        }
    }

    fn grad(&self, j: usize) -> f64 {
        match &self.state {
            State::Naive { r } => {
                let dot: f64 = self.x[j].iter().zip(r).map(|(a, b)| a * b).sum();
                dot / self.n as f64
            }
            State::Covariance { g, .. } => g[j],
        }
    }

    fn apply(&mut self, j: usize, delta: f64) {
        match &mut self.state {
            State::Naive { r } => {
                for (ri, xi) in r.iter_mut().zip(&self.x[j]) {
                    *ri -= delta * xi;
                }
            }
            State::Covariance { g, gram, .. } => {
                if gram[j].is_none() {
                    let n = self.n as f64;
                    let col_j = &self.x[j];
                    let column: Vec<f64> = self
                        .x
                        .iter()
                        .map(|col| col.iter().zip(col_j).map(|(a, b)| a * b).sum::<f64>() / n)
                        .collect();
                    gram[j] = Some(column);
                }
                let column = gram[j].as_ref().expect("gram column just ensured");
                for (gk, ck) in g.iter_mut().zip(column) {
                    *gk -= ck * delta;
                }
            }
        }
    }

    fn lambda_max(&self) -> f64 {
        (0..self.x.len())
            .filter(|&j| !self.constant[j])
            .map(|j| self.grad(j).abs())
            .fold(0.0, f64::max)
    }

    /// (1/2n) ||y - Xb||^2 + lambda ||b||_1 in the standardized space.
    fn objective(&self, b: &[f64], lambda: f64) -> f64 {
        let rss = match &self.state {
            State::Naive { r } => r.iter().map(|v| v * v).sum::<f64>(),
            State::Covariance { g, xty, yty, .. } => {
                let n = self.n as f64;
                let bxty: f64 = b.iter().zip(xty).map(|(a, c)| a * c).sum();
                let bg: f64 = b.iter().zip(g).map(|(a, c)| a * c).sum();
                yty - n * (bxty + bg)
            }
        };
        rss / (2.0 * self.n as f64) + lambda * b.iter().map(|v| v.abs()).sum::<f64>()
    }

    fn update(&mut self, j: usize, b: &mut [f64], lambda: f64) -> f64 {
        let u = b[j] + self.grad(j);
        let new = soft_threshold(u, lambda);
        let delta = new - b[j];
        if delta != 0.0 {
            self.apply(j, delta);
            b[j] = new;
        }
        delta.abs()
    }

    fn solve_at(
        &mut self,
        lambda: f64,
        b: &mut [f64],
        config: &PathConfig,
        trace: Option<&mut Vec<f64>>,
    ) -> Result<()> {
        let coords: Vec<usize> = (0..self.x.len()).filter(|&j| !self.constant[j]).collect();
        let mut guard = SweepGuard::new(config.max_sweeps, lambda);
        let mut local_trace = trace;
        loop {
            // full sweep over every coordinate, catching activations
            guard.tick()?;
            let mut max_change = 0.0f64;
            for &j in &coords {
                max_change = max_change.max(self.update(j, b, lambda));
            }
            if let Some(t) = local_trace.as_deref_mut() {
                t.push(self.objective(b, lambda));
            }
            if max_change < config.tol {
                return Ok(());
            }
            // iterate the current active set until it settles
            let active: Vec<usize> = coords.iter().copied().filter(|&j| b[j] != 0.0).collect();
            loop {
                guard.tick()?;
                let mut mc = 0.0f64;
                for &j in &active {
                    mc = mc.max(self.update(j, b, lambda));
                }
                if let Some(t) = local_trace.as_deref_mut() {
                    t.push(self.objective(b, lambda));
                }
                if mc < config.tol {
                    break;
                }
            }
        }
    }
}

pub(crate) fn fit_gaussian_internal(
    design: &Design,
    y_raw: &[f64],
    outcome: &str,
    config: &PathConfig,
    engine: CdEngine,
) -> Result<LassoPath> {
    let n = design.n;
    if y_raw.len() != n {
        return Err(Error::InvalidInput(
            "outcome length does not match predictor rows".into(),
        ));
    }
    if n < 2 {
        return Err(Error::InvalidInput("need at least 2 rows".into()));
    }
    let y_mean = y_raw.iter().sum::<f64>() / n as f64;
    let y: Vec<f64> = y_raw.iter().map(|v| v - y_mean).collect();
    if config.lambdas.is_none() && y.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidInput(
            "outcome is constant; nothing to fit".into(),
        ));
    }

    let mut solver = Solver::new(design, &y, engine);
    let lambda_max = solver.lambda_max();
    let grid = lambda_grid(lambda_max, n, design.p(), config);
    let degenerate = lambda_max <= 0.0;

    let p = design.p();
    let mut b = vec![0.0f64; p];
    let mut points = Vec::with_capacity(grid.len());
    for &lambda in &grid {
        let mut trace = config.track_objective.then(Vec::new);
        solver.solve_at(lambda, &mut b, config, trace.as_mut())?;
        let rows = sparse_rows(p, 1, |j| {
            if b[j] != 0.0 {
                Some(vec![b[j] / design.scale[j]])
            } else {
                None
            }
        });
        let intercept = y_mean
            - rows
                .iter()
                .map(|(j, v)| v[0] * design.center[*j])
                .sum::<f64>();
        points.push(PathPoint {
            lambda,
            intercepts: vec![intercept],
            n_nonzero: rows.len(),
            rows,
            objective_trace: trace,
        });
    }

    Ok(LassoPath {
        family: Family::Gaussian,
        predictor_names: design.names.clone(),
        response_names: vec![outcome.to_string()],
        lambdas: grid,
        points,
        excluded_constant: design.excluded_names(),
        degenerate,
        n,
        x_center: design.center.clone(),
        x_scale: design.scale.clone(),
        y_center: vec![y_mean],
        y_scale: vec![1.0],
    })
}

/// Full regularization path for one continuous outcome.
pub fn fit_lasso_path(
    d: &Dataset,
    outcome: &str,
    predictors: &[String],
    config: &PathConfig,
) -> Result<LassoPath> {
    fit_lasso_path_with(d, outcome, predictors, config, CdEngine::Auto)
}

pub fn fit_lasso_path_with(
    d: &Dataset,
    outcome: &str,
    predictors: &[String],
    config: &PathConfig,
    engine: CdEngine,
) -> Result<LassoPath> {
    let design = Design::from_dataset(d, predictors)?;
    let (y, missing) = d.numeric(outcome)?;
    if missing.iter().any(|&m| m) {
        return Err(Error::InvalidInput(format!(
            "outcome '{}' has missing values",
            outcome
        )));
    }
    let mut distinct = y.to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).expect("finite outcome values"));
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "outcome '{}' needs at least 2 distinct values",
            outcome
        )));
    }
    fit_gaussian_internal(&design, y, outcome, config, engine)
}

/// Mean squared held-out error per grid point.
fn heldout_mse(path: &LassoPath, d: &Dataset, outcome: &str, rows: &[usize]) -> Result<Vec<f64>> {
    let (y, _) = d.numeric(outcome)?;
    let p = path.predictor_names.len();
    let cols: Vec<(&[f64], &[bool])> = path
        .predictor_names
        .iter()
        .map(|name| d.numeric(name))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(path.points.len());
    let mut x_row = vec![0.0f64; p];
    for point in &path.points {
        let mut sse = 0.0;
        for &i in rows {
            for (j, (col, _)) in cols.iter().enumerate() {
                x_row[j] = col[i];
            }
            let pred = path.predict_linear(point, &x_row)[0];
            let e = y[i] - pred;
            sse += e * e;
        }
        out.push(sse / rows.len() as f64);
    }
    Ok(out)
}

/// 10-fold style cross-validation: the master grid comes from the full
/// data, each fold refits on it, and the stored path is the full-data fit
/// whose points at `lambda_min` / `lambda_1se` are the selected models.
pub fn cv_lasso(
    d: &Dataset,
    outcome: &str,
    predictors: &[String],
    folds: &FoldAssignment,
    config: &PathConfig,
) -> Result<CvResult> {
    if folds.n() != d.n_rows() {
        return Err(Error::InvalidInput(
            "fold assignment does not match dataset rows".into(),
        ));
    }
    let full = fit_lasso_path(d, outcome, predictors, config)?;
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
            fit_lasso_path(&sub, outcome, predictors, &fold_config)
        },
        |path, test| heldout_mse(path, d, outcome, test),
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

/// Nonzero coefficients at a path member, largest magnitude first, at most
/// `top_k` rows. This is the data layer behind the word-cloud style gene
/// reports.
pub fn nonzero_report(
    path: &LassoPath,
    lambda: f64,
    top_k: usize,
) -> Result<Vec<(String, f64)>> {
    let point = path.point_at(lambda)?;
    let mut entries: Vec<(String, f64)> = point
        .rows
        .iter()
        .map(|(j, v)| (path.predictor_names[*j].clone(), v[0]))
        .collect();
    entries.sort_by(|a, b| {
        b.1.abs()
            .partial_cmp(&a.1.abs())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    entries.truncate(top_k);
    Ok(entries)
}

pub fn nonzero_report_tsv(report: &[(String, f64)]) -> String {
    let mut table = TsvTable::new(vec!["rank", "name", "coefficient", "abs_weight"]);
    for (i, (name, coef)) in report.iter().enumerate() {
        table.push(vec![
            (i + 1).to_string(),
            name.clone(),
            fmt_g6(*coef),
            fmt_g6(coef.abs()),
        ]);
    }
    table.to_tsv()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Column, Role};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-0.5, 1.0), 0.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        for z in [-2.5, -0.1, 0.0, 0.7, 9.0] {
            assert_eq!(soft_threshold(z, 0.0), z);
        }
    }

    #[test]
    fn lambda_max_examples() {
        // orthogonal outcome
        let x = vec![vec![1.0, -1.0, 1.0, -1.0]];
        let y = vec![1.0, 1.0, -1.0, -1.0];
        assert_eq!(lambda_max_gaussian(&x, &y), 0.0);

        // perfectly correlated, unit population sd on both sides
        let x = vec![vec![1.0, -1.0]];
        let y = vec![1.0, -1.0];
        assert!((lambda_max_gaussian(&x, &y) - 1.0).abs() < 1e-15);

        // duplicating a predictor changes nothing
        let x2 = vec![x[0].clone(), x[0].clone()];
        assert_eq!(lambda_max_gaussian(&x2, &y), lambda_max_gaussian(&x, &y));
    }

    fn toy(seed: u64, n: usize, p: usize, signal: &[(usize, f64)], sd: f64) -> Dataset {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let cols: Vec<Vec<f64>> = (0..p)
            .map(|_| (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let mut v = 0.5;
                for &(j, beta) in signal {
                    v += beta * cols[j][i];
                }
                v + sd * rng.sample::<f64, _>(StandardNormal)
            })
            .collect();
        let mut columns = vec![Column::numeric("y", Role::Outcome, y)];
        for (j, col) in cols.into_iter().enumerate() {
            columns.push(Column::numeric(format!("x{:03}", j), Role::Predictor, col));
        }
        Dataset::from_columns(columns).unwrap()
    }

    fn predictor_names(p: usize) -> Vec<String> {
        (0..p).map(|j| format!("x{:03}", j)).collect()
    }

    #[test]
    fn path_anchor_is_exactly_zero() {
        let d = toy(1, 80, 10, &[(0, 1.0), (3, -0.7)], 0.5);
        let path = fit_lasso_path(&d, "y", &predictor_names(10), &PathConfig::default()).unwrap();
        assert_eq!(path.points[0].n_nonzero, 0);
        assert!(path.points[0].rows.is_empty());
        assert!(path.points.last().unwrap().n_nonzero >= 2);
        // strictly decreasing grid
        for w in path.lambdas.windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn engines_agree_exactly_enough() {
        let d = toy(2, 60, 30, &[(1, 1.2), (5, -0.8), (9, 0.5)], 0.7);
        let names = predictor_names(30);
        let config = PathConfig::default();
        let naive = fit_lasso_path_with(&d, "y", &names, &config, CdEngine::Naive).unwrap();
        let cov = fit_lasso_path_with(&d, "y", &names, &config, CdEngine::Covariance).unwrap();
        assert_eq!(naive.lambdas, cov.lambdas);
        for (a, b) in naive.points.iter().zip(&cov.points) {
            assert_eq!(a.n_nonzero, b.n_nonzero);
            for ((ja, va), (jb, vb)) in a.rows.iter().zip(&b.rows) {
                assert_eq!(ja, jb);
                assert!((va[0] - vb[0]).abs() < 1e-9, "{} vs {}", va[0], vb[0]);
            }
        }
    }

    #[test]
    fn constant_outcome_is_an_error() {
        let d = Dataset::from_columns(vec![
            Column::numeric("y", Role::Outcome, vec![3.0, 3.0, 3.0, 3.0]),
            Column::numeric("x", Role::Predictor, vec![1.0, 2.0, 3.0, 4.0]),
        ])
        .unwrap();
        assert!(fit_lasso_path(&d, "y", &["x".to_string()], &PathConfig::default()).is_err());
    }

    #[test]
    fn orthogonal_outcome_degenerates_gracefully() {
        let d = Dataset::from_columns(vec![
            Column::numeric("y", Role::Outcome, vec![1.0, 1.0, -1.0, -1.0]),
            Column::numeric("x", Role::Predictor, vec![1.0, -1.0, 1.0, -1.0]),
        ])
        .unwrap();
        let path = fit_lasso_path(&d, "y", &["x".to_string()], &PathConfig::default()).unwrap();
        assert!(path.degenerate);
        assert_eq!(path.lambdas, vec![0.0]);
    }

    #[test]
    fn report_ranks_and_truncates() {
        let d = toy(3, 100, 8, &[(0, 2.0), (2, -1.0), (4, 0.4)], 0.3);
        let names = predictor_names(8);
        let path = fit_lasso_path(&d, "y", &names, &PathConfig::default()).unwrap();
        let lambda = *path.lambdas.last().unwrap();
        let report = nonzero_report(&path, lambda, 2).unwrap();
        assert_eq!(report.len(), 2);
        assert_eq!(report[0].0, "x000");
        assert_eq!(report[1].0, "x002");
        assert!(report[0].1.abs() >= report[1].1.abs());

        let empty = nonzero_report(&path, path.lambdas[0], 75).unwrap();
        assert!(empty.is_empty());

        assert!(nonzero_report(&path, 123.456, 5).is_err());

        let tsv = nonzero_report_tsv(&report);
        assert!(tsv.starts_with("rank\tname\tcoefficient\tabs_weight\n"));
        assert_eq!(tsv.lines().count(), 3);
    }

    #[test]
    fn cv_runs_and_selects_members() {
        let d = toy(4, 90, 12, &[(0, 1.5)], 0.6);
        let folds = crate::data::make_folds(90, 5, 7).unwrap();
        let cv = cv_lasso(&d, "y", &predictor_names(12), &folds, &PathConfig::default()).unwrap();
        assert!(cv.lambda_1se >= cv.lambda_min);
        assert!(cv.path.lambda_index(cv.lambda_min).is_ok());
        assert!(cv.path.lambda_index(cv.lambda_1se).is_ok());
        assert_eq!(cv.cv_mean.len(), cv.lambdas.len());
        // the signal predictor is active at lambda_min
        let report = nonzero_report(&cv.path, cv.lambda_min, 12).unwrap();
        assert!(report.iter().any(|(n, _)| n == "x000"));
        // determinism: same folds, same result
        let cv2 = cv_lasso(&d, "y", &predictor_names(12), &folds, &PathConfig::default()).unwrap();
        assert_eq!(cv.cv_mean, cv2.cv_mean);
        assert_eq!(cv.lambda_min, cv2.lambda_min);
    }
}
