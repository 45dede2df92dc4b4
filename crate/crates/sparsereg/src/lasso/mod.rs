//! Shared machinery for the penalized-regression families: the
//! regularization path representation, the log-spaced lambda grid, internal
//! standardization, and the k-fold cross-validation engine.
//!
//! All solvers work on internally standardized predictors (population
//! standard deviation, so each column has squared norm n) and report
//! coefficients on the original scale. Paths are fitted from the largest
//! penalty down with warm starts; the first grid point is the smallest
//! penalty at which every coefficient is exactly zero.

pub mod gaussian;
pub mod multinomial;
pub mod multitask;

use crate::data::{Dataset, FoldAssignment};
use crate::error::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gaussian,
    Multinomial,
    Multitask,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Multinomial => "multinomial",
            Family::Multitask => "multitask",
        }
    }
}

/// Which cross-validated penalty a downstream consumer should use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LambdaRule {
    Min,
    OneSe,
}

impl LambdaRule {
    pub fn as_str(self) -> &'static str {
        match self {
            LambdaRule::Min => "min",
            LambdaRule::OneSe => "1se",
        }
    }
}

impl std::str::FromStr for LambdaRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<LambdaRule> {
        match s {
            "min" => Ok(LambdaRule::Min),
            "1se" => Ok(LambdaRule::OneSe),
            other => Err(Error::Config(format!(
                "unknown lambda rule '{}'; expected 'min' or '1se'",
                other
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PathConfig {
    /// Grid length when no explicit grid is given.
    pub n_lambda: usize,
    /// Ratio of the smallest to the largest grid value. `None` picks 1e-3
    /// when n > p and 1e-2 otherwise.
    pub eps: Option<f64>,
    /// Explicit decreasing grid, overriding the computed one. Cross
    /// validation uses this to refit folds on the master grid.
    pub lambdas: Option<Vec<f64>>,
    /// Coordinate-sweep budget per grid point.
    pub max_sweeps: usize,
    /// Sweep-to-sweep max absolute coefficient change at which a solution
    /// counts as converged.
    pub tol: f64,
    /// Scale responses to unit variance before the multi-response fit
    /// (coefficients are reported on the original scale either way).
    pub standardize_responses: bool,
    /// Weight each row penalty by sqrt(m) in the multi-response family.
    pub sqrt_m_weighting: bool,
    /// Record the internal objective after every sweep for each grid point.
    pub track_objective: bool,
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig {
            n_lambda: 100,
            eps: None,
            lambdas: None,
            max_sweeps: 100_000,
            tol: 1e-7,
            standardize_responses: true,
            sqrt_m_weighting: false,
            track_objective: false,
        }
    }
}

/// One solution along the path, coefficients on the original data scale.
/// `rows` holds the nonzero coefficient rows sorted by predictor index;
/// each entry carries one value per response (a single value for the
/// Gaussian family, K class values for the multinomial, m for multitask).
#[derive(Clone, Debug, Serialize)]
pub struct PathPoint {
    pub lambda: f64,
    pub intercepts: Vec<f64>,
    pub rows: Vec<(usize, Vec<f64>)>,
    pub n_nonzero: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective_trace: Option<Vec<f64>>,
}

impl PathPoint {
    /// Dense original-scale coefficient row for predictor `j`.
    pub fn row(&self, j: usize, width: usize) -> Vec<f64> {
        match self.rows.binary_search_by_key(&j, |(idx, _)| *idx) {
            Ok(pos) => self.rows[pos].1.clone(),
            Err(_) => vec![0.0; width],
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LassoPath {
    pub family: Family,
    pub predictor_names: Vec<String>,
    /// Outcome name (Gaussian), class labels (multinomial), or response
    /// names (multitask).
    pub response_names: Vec<String>,
    pub lambdas: Vec<f64>,
    pub points: Vec<PathPoint>,
    /// Constant predictor columns, carried with zero coefficients.
    pub excluded_constant: Vec<String>,
    /// Set when the path anchor was zero (degenerate outcome variance).
    pub degenerate: bool,
    pub n: usize,
    pub x_center: Vec<f64>,
    pub x_scale: Vec<f64>,
    pub y_center: Vec<f64>,
    pub y_scale: Vec<f64>,
}

impl LassoPath {
    pub fn n_responses(&self) -> usize {
        self.y_center.len()
    }

    pub fn lambda_index(&self, lambda: f64) -> Result<usize> {
        self.lambdas
            .iter()
            .position(|&l| (l - lambda).abs() <= 1e-12 * l.abs().max(lambda.abs()).max(1e-300))
            .ok_or_else(|| {
                Error::InvalidInput(format!("lambda {} is not on the fitted path", lambda))
            })
    }

    pub fn point_at(&self, lambda: f64) -> Result<&PathPoint> {
        Ok(&self.points[self.lambda_index(lambda)?])
    }

    pub fn to_json_bytes(&self) -> Result<Vec<u8>> {
        crate::report::to_json_bytes(self)
    }

    /// Linear predictor rows for the given original-scale observation.
    pub fn predict_linear(&self, point: &PathPoint, x: &[f64]) -> Vec<f64> {
        let m = point.intercepts.len();
        let mut out = point.intercepts.clone();
        for (j, values) in &point.rows {
            let xv = x[*j];
            for (o, v) in out.iter_mut().zip(values) {
                *o += xv * v;
            }
        }
        debug_assert_eq!(out.len(), m);
        out
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CvResult {
    pub k: usize,
    pub lambdas: Vec<f64>,
    pub cv_mean: Vec<f64>,
    pub cv_se: Vec<f64>,
    pub lambda_min: f64,
    pub lambda_1se: f64,
    /// Full-data path on the same grid; the fit at `lambda_min` or
    /// `lambda_1se` is the selected model.
    pub path: LassoPath,
}

impl CvResult {
    pub fn selected_lambda(&self, rule: LambdaRule) -> f64 {
        match rule {
            LambdaRule::Min => self.lambda_min,
            LambdaRule::OneSe => self.lambda_1se,
        }
    }

    pub fn selected_point(&self, rule: LambdaRule) -> &PathPoint {
        let lambda = self.selected_lambda(rule);
        self.path
            .point_at(lambda)
            .expect("selected lambda is a member of the path by construction")
    }

    pub fn to_json_bytes(&self) -> Result<Vec<u8>> {
        crate::report::to_json_bytes(self)
    }
}

/// Log-spaced decreasing grid from `lambda_max` down to `eps * lambda_max`.
/// A non-positive anchor degenerates to the single point 0.
pub fn lambda_grid(lambda_max: f64, n: usize, p: usize, config: &PathConfig) -> Vec<f64> {
    if let Some(grid) = &config.lambdas {
        return grid.clone();
    }
    if !(lambda_max > 0.0) {
        return vec![0.0];
    }
    let eps = config.eps.unwrap_or(if n > p { 1e-3 } else { 1e-2 });
    let l = config.n_lambda.max(2);
    let top = lambda_max.ln();
    let bottom = (eps * lambda_max).ln();
    let mut grid: Vec<f64> = (0..l)
        .map(|i| (top + (bottom - top) * i as f64 / (l - 1) as f64).exp())
        .collect();
    grid[0] = lambda_max;
    grid
}

fn validated_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config("empty lambda grid".into()));
    }
    for w in grid.windows(2) {
        if !(w[1] < w[0]) {
            return Err(Error::Config(format!(
                "lambda grid must be strictly decreasing, got {} then {}",
                w[0], w[1]
            )));
        }
    }
    if grid.iter().any(|l| !l.is_finite() || *l < 0.0) {
        return Err(Error::Config("lambda grid values must be finite and nonnegative".into()));
    }
    Ok(())
}

pub(crate) fn population_mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Internally standardized design: columns centered and scaled by the
/// population standard deviation so each non-constant column has squared
/// norm exactly n. Constant columns are kept at zero so indexing stays
/// aligned but never enter the penalty or the active set.
pub(crate) struct Design {
    pub names: Vec<String>,
    pub x: Vec<Vec<f64>>,
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
    pub constant: Vec<bool>,
    pub n: usize,
}

impl Design {
    pub fn from_dataset(d: &Dataset, predictors: &[String]) -> Result<Design> {
        if predictors.is_empty() {
            return Err(Error::InvalidInput("no predictor columns given".into()));
        }
        let raw = d.numeric_matrix(predictors)?;
        Ok(Design::from_columns(predictors.to_vec(), raw))
    }

    pub fn from_columns(names: Vec<String>, raw: Vec<Vec<f64>>) -> Design {
        let n = raw.first().map_or(0, |c| c.len());
        let p = raw.len();
        let mut x = Vec::with_capacity(p);
        let mut center = Vec::with_capacity(p);
        let mut scale = Vec::with_capacity(p);
        let mut constant = Vec::with_capacity(p);
        for col in raw {
            let (mean, sd) = population_mean_sd(&col);
            if sd > 0.0 {
                x.push(col.iter().map(|v| (v - mean) / sd).collect());
                center.push(mean);
                scale.push(sd);
                constant.push(false);
            } else {
                x.push(vec![0.0; n]);
                center.push(mean);
                scale.push(1.0);
                constant.push(true);
            }
        }
        Design {
            names,
            x,
            center,
            scale,
            constant,
            n,
        }
    }

    pub fn p(&self) -> usize {
        self.x.len()
    }

    pub fn excluded_names(&self) -> Vec<String> {
        self.names
            .iter()
            .zip(&self.constant)
            .filter(|(_, &c)| c)
            .map(|(n, _)| n.clone())
            .collect()
    }
}

/// Builds the per-grid-point report from internal-scale solutions.
/// `coefs[j]` is the internal coefficient row for predictor j; the closure
/// receives (j, internal row) and returns the original-scale row.
pub(crate) fn sparse_rows<F>(p: usize, width: usize, mut orig: F) -> Vec<(usize, Vec<f64>)>
where
    F: FnMut(usize) -> Option<Vec<f64>>,
{
    let mut rows = Vec::new();
    for j in 0..p {
        if let Some(values) = orig(j) {
            debug_assert_eq!(values.len(), width);
            rows.push((j, values));
        }
    }
    rows
}

/// Cross-validation driver shared by the three families. `fit` trains a
/// path on the given training rows with the master grid; `loss` scores a
/// fitted path on held-out rows, returning one mean loss per grid point.
/// Folds run concurrently; the reduction is by fold index, so results do
/// not depend on scheduling.
pub(crate) fn cv_engine<Fit, Loss>(
    folds: &FoldAssignment,
    lambdas: &[f64],
    fit: Fit,
    loss: Loss,
) -> Result<(Vec<f64>, Vec<f64>, f64, f64)>
where
    Fit: Fn(&[usize]) -> Result<LassoPath> + Sync,
    Loss: Fn(&LassoPath, &[usize]) -> Result<Vec<f64>> + Sync,
{
    validated_grid(lambdas)?;
    let k = folds.k();
    let fold_losses: Vec<Vec<f64>> = (0..k)
        .into_par_iter()
        .map(|f| {
            let (train, test) = folds.split(f);
            if train.len() < 2 {
                return Err(Error::InvalidInput(format!(
                    "fold {} leaves {} training row(s); need at least 2",
                    f,
                    train.len()
                )));
            }
            let path = fit(&train)?;
            let per_lambda = loss(&path, &test)?;
            if per_lambda.len() != lambdas.len() {
                return Err(Error::InvalidInput(
                    "internal: held-out loss length does not match the grid".into(),
                ));
            }
            Ok(per_lambda)
        })
        .collect::<Result<Vec<_>>>()?;

    let l = lambdas.len();
    let mut cv_mean = vec![0.0; l];
    let mut cv_se = vec![0.0; l];
    for i in 0..l {
        let mean = fold_losses.iter().map(|fl| fl[i]).sum::<f64>() / k as f64;
        let var = fold_losses
            .iter()
            .map(|fl| (fl[i] - mean) * (fl[i] - mean))
            .sum::<f64>()
            / (k - 1) as f64;
        cv_mean[i] = mean;
        cv_se[i] = (var / k as f64).sqrt();
    }

    // grid is decreasing, so the first minimum is the largest such lambda
    let mut min_idx = 0;
    for i in 1..l {
        if cv_mean[i] < cv_mean[min_idx] {
            min_idx = i;
        }
    }
    let threshold = cv_mean[min_idx] + cv_se[min_idx];
    let one_se_idx = (0..l)
        .find(|&i| cv_mean[i] <= threshold)
        .unwrap_or(min_idx);
    Ok((cv_mean, cv_se, lambdas[min_idx], lambdas[one_se_idx]))
}

/// Scans sweep-to-sweep coefficient movement and enforces the sweep budget.
pub(crate) struct SweepGuard {
    budget: usize,
    used: usize,
    lambda: f64,
}

impl SweepGuard {
    pub fn new(budget: usize, lambda: f64) -> SweepGuard {
        SweepGuard {
            budget,
            used: 0,
            lambda,
        }
    }

    pub fn tick(&mut self) -> Result<()> {
        self.used += 1;
        if self.used > self.budget {
            return Err(Error::NoConvergence(format!(
                "coordinate descent exceeded {} sweeps at lambda {}",
                self.budget, self.lambda
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_log_spaced_and_anchored() {
        let config = PathConfig::default();
        let grid = lambda_grid(2.0, 100, 10, &config);
        assert_eq!(grid.len(), 100);
        assert_eq!(grid[0], 2.0);
        assert!((grid[99] - 2.0 * 1e-3).abs() < 1e-12);
        // consecutive ratios constant
        let r0 = grid[1] / grid[0];
        for w in grid.windows(2) {
            assert!((w[1] / w[0] - r0).abs() < 1e-12);
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn grid_epsilon_depends_on_shape() {
        let config = PathConfig::default();
        let tall = lambda_grid(1.0, 200, 50, &config);
        assert!((tall[99] - 1e-3).abs() < 1e-12);
        let wide = lambda_grid(1.0, 50, 200, &config);
        assert!((wide[99] - 1e-2).abs() < 1e-12);
    }

    #[test]
    fn degenerate_anchor_gives_single_zero() {
        let grid = lambda_grid(0.0, 100, 10, &PathConfig::default());
        assert_eq!(grid, vec![0.0]);
    }

    #[test]
    fn explicit_grid_passes_through() {
        let config = PathConfig {
            lambdas: Some(vec![5.0, 1.0, 0.1]),
            ..PathConfig::default()
        };
        assert_eq!(lambda_grid(99.0, 10, 10, &config), vec![5.0, 1.0, 0.1]);
    }

    #[test]
    fn constant_columns_are_flagged_not_dropped() {
        let design = Design::from_columns(
            vec!["a".into(), "flat".into()],
            vec![vec![1.0, 2.0, 3.0], vec![7.0, 7.0, 7.0]],
        );
        assert_eq!(design.p(), 2);
        assert!(!design.constant[0]);
        assert!(design.constant[1]);
        assert_eq!(design.excluded_names(), vec!["flat".to_string()]);
        // population scaling: squared norm equals n
        let ss: f64 = design.x[0].iter().map(|v| v * v).sum();
        assert!((ss - 3.0).abs() < 1e-12);
        assert!(design.x[1].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lambda_rule_parses() {
        assert_eq!("min".parse::<LambdaRule>().unwrap(), LambdaRule::Min);
        assert_eq!("1se".parse::<LambdaRule>().unwrap(), LambdaRule::OneSe);
        assert!("best".parse::<LambdaRule>().is_err());
    }
}
