//! Sure independence screening: single-pass marginal ranking of predictors.
//!
//! Continuous outcomes rank by absolute Pearson correlation, binary outcomes
//! by the pooled two-sample t statistic, and multi-response outcomes by the
//! root mean square of the per-response correlations. Multi-category
//! outcomes are handled as all unordered pairwise binary screens, one per
//! level pair, because the marginal ranking has no multinomial analogue.

use crate::data::{CategoricalOutcome, Dataset};
use crate::error::{Error, Result};
use crate::linear::pearson;
use crate::report::{fmt_g6, TsvTable};
use rayon::prelude::*;
use std::cmp::Ordering;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScreenMethod {
    Correlation,
    MarginalMle,
}

impl ScreenMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            ScreenMethod::Correlation => "correlation",
            ScreenMethod::MarginalMle => "marginal_mle",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ScreenResult {
    pub method: ScreenMethod,
    /// All predictors ordered by |score| non-increasing, ties kept in
    /// column order.
    pub ranked: Vec<(String, f64)>,
    /// The first `d` names of `ranked`.
    pub kept: Vec<String>,
    pub d: usize,
    /// Set when the requested retention size exceeded the number of
    /// predictors and was clamped.
    pub clamped: bool,
}

impl ScreenResult {
    fn from_scores(
        names: &[String],
        scores: Vec<f64>,
        d_keep: usize,
        method: ScreenMethod,
    ) -> Result<ScreenResult> {
        if d_keep == 0 {
            return Err(Error::InvalidInput("d_keep must be at least 1".into()));
        }
        debug_assert_eq!(names.len(), scores.len());
        if scores.iter().any(|s| s.is_nan()) {
            return Err(Error::InvalidInput(
                "marginal score is NaN; check predictor columns".into(),
            ));
        }
        let mut ranked: Vec<(String, f64)> = names
            .iter()
            .cloned()
            .zip(scores)
            .collect();
        // stable sort keeps ties in column order
        ranked.sort_by(|a, b| {
            b.1.abs()
                .partial_cmp(&a.1.abs())
                .unwrap_or(Ordering::Equal)
        });
        let clamped = d_keep > ranked.len();
        let d = d_keep.min(ranked.len());
        let kept = ranked.iter().take(d).map(|(n, _)| n.clone()).collect();
        Ok(ScreenResult {
            method,
            ranked,
            kept,
            d,
            clamped,
        })
    }

    pub fn to_tsv(&self) -> String {
        let mut table = TsvTable::new(vec!["rank", "name", "score"]);
        for (i, (name, score)) in self.ranked.iter().enumerate() {
            table.push(vec![(i + 1).to_string(), name.clone(), fmt_g6(*score)]);
        }
        table.to_tsv()
    }
}

/// Canonical retention size, the ceiling of n over its natural log.
pub fn default_d_keep(n: usize) -> usize {
    assert!(n >= 2, "retention size needs at least 2 observations");
    let d = (n as f64 / (n as f64).ln()).ceil() as usize;
    d.max(1)
}

fn numeric_complete(d: &Dataset, name: &str) -> Result<Vec<f64>> {
    let (values, missing) = d.numeric(name)?;
    if missing.iter().any(|&m| m) {
        return Err(Error::InvalidInput(format!(
            "column '{}' has missing values; screening needs complete columns",
            name
        )));
    }
    Ok(values.to_vec())
}

/// Marginal correlation screen for a continuous outcome. Scores are
/// absolute Pearson correlations, so constants score 0.
pub fn sis_screen(
    d: &Dataset,
    outcome: &str,
    predictors: &[String],
    d_keep: usize,
) -> Result<ScreenResult> {
    let y = numeric_complete(d, outcome)?;
    let scores = predictors
        .par_iter()
        .map(|name| {
            let x = numeric_complete(d, name)?;
            Ok(pearson(&x, &y).abs())
        })
        .collect::<Result<Vec<f64>>>()?;
    ScreenResult::from_scores(predictors, scores, d_keep, ScreenMethod::Correlation)
}

/// Screen against several continuous responses at once; the score is the
/// root mean square of the per-response correlations, so a predictor tied
/// to any single response still ranks well.
pub fn sis_screen_multi(
    d: &Dataset,
    outcomes: &[String],
    predictors: &[String],
    d_keep: usize,
) -> Result<ScreenResult> {
    if outcomes.is_empty() {
        return Err(Error::InvalidInput("no outcome columns given".into()));
    }
    let ys = outcomes
        .iter()
        .map(|name| numeric_complete(d, name))
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let scores = predictors
        .par_iter()
        .map(|name| {
            let x = numeric_complete(d, name)?;
            let mean_sq = ys
                .iter()
                .map(|y| {
                    let r = pearson(&x, y);
                    r * r
                })
                .sum::<f64>()
                / ys.len() as f64;
            Ok(mean_sq.sqrt())
        })
        .collect::<Result<Vec<f64>>>()?;
    ScreenResult::from_scores(predictors, scores, d_keep, ScreenMethod::Correlation)
}

fn pooled_t(x: &[f64], codes: &[usize]) -> f64 {
    let mut n = [0usize; 2];
    let mut sum = [0.0f64; 2];
    for (&v, &c) in x.iter().zip(codes) {
        n[c] += 1;
        sum[c] += v;
    }
    let mean = [sum[0] / n[0] as f64, sum[1] / n[1] as f64];
    let mut ss = [0.0f64; 2];
    for (&v, &c) in x.iter().zip(codes) {
        let dev = v - mean[c];
        ss[c] += dev * dev;
    }
    let df = (n[0] + n[1] - 2) as f64;
    let pooled_var = (ss[0] + ss[1]) / df;
    let diff = mean[1] - mean[0];
    if pooled_var <= 0.0 {
        return if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        };
    }
    let se = (pooled_var * (1.0 / n[0] as f64 + 1.0 / n[1] as f64)).sqrt();
    diff / se
}

/// Marginal two-sample t screen for a binary outcome. The t statistic is
/// signed (second level minus first); ranking uses its magnitude, which is
/// a monotone function of the point-biserial correlation.
pub fn sis_screen_binary(
    d: &Dataset,
    outcome: &CategoricalOutcome,
    predictors: &[String],
    d_keep: usize,
) -> Result<ScreenResult> {
    if outcome.n_levels() != 2 {
        return Err(Error::InvalidInput(format!(
            "binary screen needs exactly 2 levels, got {}",
            outcome.n_levels()
        )));
    }
    if outcome.len() != d.n_rows() {
        return Err(Error::InvalidInput(
            "outcome length does not match dataset rows".into(),
        ));
    }
    let counts = outcome.counts();
    for (label, &c) in outcome.labels().iter().zip(&counts) {
        if c < 2 {
            return Err(Error::InvalidInput(format!(
                "group '{}' has {} observation(s); need at least 2",
                label, c
            )));
        }
    }
    let codes = outcome.codes();
    let scores = predictors
        .par_iter()
        .map(|name| {
            let x = numeric_complete(d, name)?;
            Ok(pooled_t(&x, codes))
        })
        .collect::<Result<Vec<f64>>>()?;
    ScreenResult::from_scores(predictors, scores, d_keep, ScreenMethod::MarginalMle)
}

/// One binary screen per unordered level pair, J(J-1)/2 in all, each on
/// the row subset belonging to its two levels. `d_keep` of `None` sizes
/// each screen by [`default_d_keep`] of its own subset.
pub fn pairwise_screens(
    d: &Dataset,
    outcome: &CategoricalOutcome,
    predictors: &[String],
    d_keep: Option<usize>,
) -> Result<Vec<((String, String), ScreenResult)>> {
    let j = outcome.n_levels();
    if j < 2 {
        return Err(Error::InvalidInput(
            "pairwise screening needs at least 2 levels".into(),
        ));
    }
    if outcome.len() != d.n_rows() {
        return Err(Error::InvalidInput(
            "outcome length does not match dataset rows".into(),
        ));
    }
    let labels = outcome.labels();
    let mut out = Vec::with_capacity(j * (j - 1) / 2);
    for a in 0..j {
        for b in (a + 1)..j {
            let pair = (labels[a].clone(), labels[b].clone());
            let rows: Vec<usize> = outcome
                .codes()
                .iter()
                .enumerate()
                .filter(|(_, &c)| c == a || c == b)
                .map(|(i, _)| i)
                .collect();
            let wrap = |e: Error| {
                Error::InvalidInput(format!("pair ({}, {}): {}", pair.0, pair.1, e))
            };
            if rows.is_empty() {
                return Err(wrap(Error::InvalidInput("no observations".into())));
            }
            let sub = d.subset_rows(&rows)?;
            let codes: Vec<usize> = rows
                .iter()
                .map(|&i| usize::from(outcome.codes()[i] == b))
                .collect();
            let sub_outcome = CategoricalOutcome::from_codes(
                codes,
                vec![labels[a].clone(), labels[b].clone()],
            )
            .map_err(wrap)?;
            let keep = d_keep.unwrap_or_else(|| default_d_keep(rows.len().max(2)));
            let screen =
                sis_screen_binary(&sub, &sub_outcome, predictors, keep).map_err(wrap)?;
            out.push((pair, screen));
        }
    }
    Ok(out)
}
