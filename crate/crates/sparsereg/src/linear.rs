//! Ordinary least squares with the usual inferential summaries.
//!
//! The solve is QR based. A column-pivoted factorization first screens the
//! design for rank deficiency, naming the dependent columns in the error,
//! so callers get a diagnosable failure instead of a garbage fit.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::report::{fmt_g6, TsvTable};
use nalgebra::DMatrix;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

#[derive(Clone, Debug)]
pub struct OlsFit {
    /// Term names, `(intercept)` first.
    pub terms: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_values: Vec<f64>,
    /// Two-sided p-values from the t distribution on `residual_df`.
    pub p_values: Vec<f64>,
    pub residual_df: usize,
    pub r_squared: f64,
    pub adjusted_r_squared: f64,
    pub residuals: Vec<f64>,
    pub n: usize,
}

/// Relative tolerance on the pivoted R diagonal used to call a column
/// numerically dependent. Duplicated columns fall many orders of magnitude
/// below this; correlated-but-distinct columns stay far above it.
const RANK_TOL: f64 = 1e-10;

pub fn fit_ols(d: &Dataset, outcome: &str, predictors: &[String]) -> Result<OlsFit> {
    let y = d.numeric_matrix(std::slice::from_ref(&outcome.to_string()))?;
    let y = &y[0];
    let x_cols = d.numeric_matrix(predictors)?;
    fit_ols_raw(y, &x_cols, predictors)
}

/// Same fit on raw vectors; `predictors` only supplies names for reporting.
pub fn fit_ols_raw(y: &[f64], x_cols: &[Vec<f64>], predictors: &[String]) -> Result<OlsFit> {
    let n = y.len();
    let p = x_cols.len();
    for (name, col) in predictors.iter().zip(x_cols) {
        if col.len() != n {
            return Err(Error::InvalidInput(format!(
                "predictor `{}` has {} rows, outcome has {}",
                name,
                col.len(),
                n
            )));
        }
    }
    if n <= p + 1 {
        return Err(Error::InvalidInput(format!(
            "need more than {} rows to fit {} predictors with an intercept, got {}",
            p + 1,
            p,
            n
        )));
    }

    let mut terms = vec!["(intercept)".to_string()];
    terms.extend(predictors.iter().cloned());
    let m = p + 1;
    let x = DMatrix::from_fn(n, m, |r, c| if c == 0 { 1.0 } else { x_cols[c - 1][r] });

    // rank screen with column pivoting
    let piv = x.clone().col_piv_qr();
    let diag: Vec<f64> = (0..m).map(|i| piv.r().index((i, i)).abs()).collect();
    let d0 = diag[0].max(f64::MIN_POSITIVE);
    let rank = diag.iter().take_while(|&&v| v > RANK_TOL * d0).count();
    if rank < m {
        // recover the pivot order: position j of the pivoted design holds
        // original column idx[j], and columns past `rank` are the dependent ones
        let mut idx = DMatrix::from_fn(1usize, m, |_, c| c as f64);
        piv.p().permute_columns(&mut idx);
        let mut offenders: Vec<String> = (rank..m)
            .map(|j| terms[idx[(0, j)] as usize].clone())
            .collect();
        offenders.sort();
        return Err(Error::RankDeficient { columns: offenders });
    }

    let qr = x.clone().qr();
    let r = qr.r();
    let q = qr.q();
    let yv = DMatrix::from_column_slice(n, 1, y);
    let qty = q.transpose() * &yv;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::NoConvergence("triangular solve failed".into()))?;
    let coefficients: Vec<f64> = beta.column(0).iter().copied().collect();

    let fitted = &x * &beta;
    let residuals: Vec<f64> = y.iter().zip(fitted.column(0).iter()).map(|(a, b)| a - b).collect();
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum();
    if tss == 0.0 {
        return Err(Error::InvalidInput("outcome is constant".into()));
    }
    let residual_df = n - p - 1;
    let sigma2 = rss / residual_df as f64;

    // diag of (X'X)^{-1} from the inverse of R: row norms of R^{-1}
    let r_inv = r
        .try_inverse()
        .ok_or_else(|| Error::NoConvergence("R inverse failed".into()))?;
    let xtx_inv_diag: Vec<f64> = (0..m)
        .map(|i| (0..m).map(|j| r_inv[(i, j)] * r_inv[(i, j)]).sum())
        .collect();

    let t_dist = StudentsT::new(0.0, 1.0, residual_df as f64)
        .map_err(|e| Error::InvalidInput(format!("t distribution: {}", e)))?;
    let mut std_errors = Vec::with_capacity(m);
    let mut t_values = Vec::with_capacity(m);
    let mut p_values = Vec::with_capacity(m);
    for (coef, v) in coefficients.iter().zip(&xtx_inv_diag) {
        let se = (sigma2 * v).max(0.0).sqrt();
        std_errors.push(se);
        let (t, pv) = if se > 0.0 {
            let t = coef / se;
            (t, 2.0 * (1.0 - t_dist.cdf(t.abs())))
        } else if *coef == 0.0 {
            (0.0, 1.0)
        } else {
            (coef.signum() * f64::INFINITY, 0.0)
        };
        t_values.push(t);
        p_values.push(pv);
    }

    let r_squared = 1.0 - rss / tss;
    let adjusted_r_squared =
        1.0 - (1.0 - r_squared) * (n as f64 - 1.0) / (residual_df as f64);

    Ok(OlsFit {
        terms,
        coefficients,
        std_errors,
        t_values,
        p_values,
        residual_df,
        r_squared,
        adjusted_r_squared,
        residuals,
        n,
    })
}

impl OlsFit {
    /// Coefficient table in the fixed report layout.
    pub fn to_tsv(&self) -> String {
        let mut table = TsvTable::new(vec!["term", "estimate", "std_error", "t_value", "p_value"]);
        for i in 0..self.terms.len() {
            table.push(vec![
                self.terms[i].clone(),
                fmt_g6(self.coefficients[i]),
                fmt_g6(self.std_errors[i]),
                fmt_g6(self.t_values[i]),
                fmt_g6(self.p_values[i]),
            ]);
        }
        table.to_tsv()
    }
}

/// Greedy collinearity filter. Walks predictors in column order and drops
/// any whose absolute Pearson correlation with an already retained
/// predictor exceeds `threshold`. Constant columns correlate with nothing;
/// they are retained and flagged.
#[derive(Clone, Debug)]
pub struct CorrelationFilter {
    pub retained: Vec<String>,
    pub dropped: Vec<DroppedColumn>,
    pub constant: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct DroppedColumn {
    pub name: String,
    pub correlated_with: String,
    pub correlation: f64,
}

pub fn correlation_filter(
    d: &Dataset,
    predictors: &[String],
    threshold: f64,
) -> Result<CorrelationFilter> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Config(format!(
            "correlation threshold must lie in (0, 1], got {}",
            threshold
        )));
    }
    let cols = d.numeric_matrix(predictors)?;
    let mut retained: Vec<usize> = Vec::new();
    let mut result = CorrelationFilter {
        retained: Vec::new(),
        dropped: Vec::new(),
        constant: Vec::new(),
    };
    for (j, name) in predictors.iter().enumerate() {
        if is_constant(&cols[j]) {
            result.constant.push(name.clone());
            result.retained.push(name.clone());
            retained.push(j);
            continue;
        }
        let mut drop: Option<(usize, f64)> = None;
        for &k in &retained {
            if is_constant(&cols[k]) {
                continue;
            }
            let r = pearson(&cols[j], &cols[k]);
            if r.abs() > threshold {
                drop = Some((k, r));
                break;
            }
        }
        match drop {
            Some((k, r)) => result.dropped.push(DroppedColumn {
                name: name.clone(),
                correlated_with: predictors[k].clone(),
                correlation: r,
            }),
            None => {
                result.retained.push(name.clone());
                retained.push(j);
            }
        }
    }
    Ok(result)
}

fn is_constant(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] == w[1])
}

pub(crate) fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        let dx = x - ma;
        let dy = y - mb;
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}

/// Normal-approximation confidence interval `estimate ± z * std_error`.
///
/// Panics if `level` is outside (0, 1) or `std_error` is negative; those are
/// caller bugs, not data conditions.
pub fn wald_ci(estimate: f64, std_error: f64, level: f64) -> (f64, f64) {
    assert!(level > 0.0 && level < 1.0, "confidence level must lie in (0, 1)");
    assert!(std_error >= 0.0, "standard error must be non-negative");
    let z = Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(0.5 + level / 2.0);
    (estimate - z * std_error, estimate + z * std_error)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Column, Role};

    #[test]
    fn hand_solved_three_points() {
        // normal equations solved by hand for (0,1), (1,1), (2,4)
        let y = vec![1.0, 1.0, 4.0];
        let x = vec![vec![0.0, 1.0, 2.0]];
        let fit = fit_ols_raw(&y, &x, &["x".to_string()]).unwrap();
        assert!((fit.coefficients[0] - 0.5).abs() < 1e-12);
        assert!((fit.coefficients[1] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn exact_fit() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let fit = fit_ols_raw(&y, &[x], &["x".to_string()]).unwrap();
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn residuals_orthogonal_to_design() {
        let x1: Vec<f64> = (0..40).map(|i| (i as f64 * 0.7).sin()).collect();
        let x2: Vec<f64> = (0..40).map(|i| (i as f64 * 0.3).cos()).collect();
        let y: Vec<f64> = (0..40)
            .map(|i| 1.0 + 2.0 * x1[i] - x2[i] + ((i * 37 % 11) as f64 - 5.0) * 0.1)
            .collect();
        let fit = fit_ols_raw(&y, &[x1.clone(), x2.clone()], &["a".into(), "b".into()]).unwrap();
        for col in [&x1, &x2] {
            let dot: f64 = col.iter().zip(&fit.residuals).map(|(a, b)| a * b).sum();
            let nx: f64 = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            let ne: f64 = fit.residuals.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(dot.abs() <= 1e-8 * nx * ne.max(1.0));
        }
    }

    #[test]
    fn duplicate_column_is_rank_deficient() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y: Vec<f64> = (0..20).map(|i| (i % 5) as f64).collect();
        let err = fit_ols_raw(&y, &[x.clone(), x], &["a".into(), "a_copy".into()]).unwrap_err();
        match err {
            Error::RankDeficient { columns } => {
                assert!(!columns.is_empty());
                assert!(columns.iter().any(|c| c == "a" || c == "a_copy"));
            }
            other => panic!("expected rank deficiency, got {other}"),
        }
    }

    #[test]
    fn correlated_but_distinct_columns_pass_rank_screen() {
        let x1: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let x2: Vec<f64> = x1.iter().enumerate().map(|(i, v)| v + ((i * 13 % 7) as f64) * 0.5).collect();
        let y: Vec<f64> = (0..30).map(|i| (i * 29 % 13) as f64).collect();
        assert!(fit_ols_raw(&y, &[x1, x2], &["a".into(), "b".into()]).is_ok());
    }

    #[test]
    fn adjusted_r2_identity() {
        let x: Vec<f64> = (0..25).map(|i| (i as f64).sqrt()).collect();
        let y: Vec<f64> = (0..25).map(|i| x[i] + ((i * 7 % 5) as f64) * 0.3).collect();
        let fit = fit_ols_raw(&y, &[x], &["x".to_string()]).unwrap();
        let n = 25.0;
        let expect = 1.0 - (1.0 - fit.r_squared) * (n - 1.0) / (n - 2.0);
        assert!((fit.adjusted_r_squared - expect).abs() < 1e-12);
    }

    #[test]
    fn too_few_rows_rejected() {
        let y = vec![1.0, 2.0];
        let x = vec![vec![0.0, 1.0]];
        assert!(fit_ols_raw(&y, &x, &["x".to_string()]).is_err());
    }

    #[test]
    fn wald_known_quantiles() {
        let (lo, hi) = wald_ci(0.0, 1.0, 0.95);
        assert!((hi - 1.959964).abs() < 1e-5);
        assert!((lo + 1.959964).abs() < 1e-5);
        let (_, hi99) = wald_ci(0.0, 1.0, 0.99);
        assert!((hi99 - 2.575829).abs() < 1e-5);
        let (lo, hi) = wald_ci(3.0, 0.5, 0.95);
        assert!((lo - (3.0 - 0.5 * 1.959964)).abs() < 1e-5);
        assert!((hi - (3.0 + 0.5 * 1.959964)).abs() < 1e-5);
    }

    #[test]
    fn filter_drops_high_correlation_in_column_order() {
        let ptau: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin() * 10.0 + 28.0).collect();
        let tau: Vec<f64> = ptau.iter().map(|v| 8.3 * v + 0.01 * (v * 7.0).cos()).collect();
        let other: Vec<f64> = (0..50).map(|i| (i as f64 * 1.7).cos()).collect();
        let d = Dataset::from_columns(vec![
            Column::numeric("ptau", Role::Predictor, ptau),
            Column::numeric("tau", Role::Predictor, tau),
            Column::numeric("other", Role::Predictor, other),
        ])
        .unwrap();
        let names: Vec<String> = ["ptau", "tau", "other"].iter().map(|s| s.to_string()).collect();
        let f = correlation_filter(&d, &names, 0.98).unwrap();
        assert_eq!(f.retained, vec!["ptau".to_string(), "other".to_string()]);
        assert_eq!(f.dropped.len(), 1);
        assert_eq!(f.dropped[0].name, "tau");
        assert_eq!(f.dropped[0].correlated_with, "ptau");
        assert!(f.dropped[0].correlation.abs() > 0.98);
    }

    #[test]
    fn filter_keeps_and_flags_constants() {
        let d = Dataset::from_columns(vec![
            Column::numeric("c", Role::Predictor, vec![1.0; 10]),
            Column::numeric("x", Role::Predictor, (0..10).map(|i| i as f64).collect()),
        ])
        .unwrap();
        let names: Vec<String> = ["c", "x"].iter().map(|s| s.to_string()).collect();
        let f = correlation_filter(&d, &names, 0.9).unwrap();
        assert_eq!(f.retained.len(), 2);
        assert_eq!(f.constant, vec!["c".to_string()]);
    }

    #[test]
    fn filter_rejects_bad_threshold() {
        let d = Dataset::from_columns(vec![Column::numeric(
            "x",
            Role::Predictor,
            vec![1.0, 2.0],
        )])
        .unwrap();
        assert!(correlation_filter(&d, &["x".to_string()], 0.0).is_err());
        assert!(correlation_filter(&d, &["x".to_string()], 1.5).is_err());
    }
}
