use super::{ColumnValues, Dataset, Role};
use crate::error::{Error, Result};
use crate::report::{fmt_g6, TsvTable};
use std::collections::BTreeSet;

/// Descriptive statistics stratified by a categorical column. Numeric
/// columns report mean and sample standard deviation per stratum; text
/// columns report counts with percentages that sum to 100 within each
/// stratum.
#[derive(Clone, Debug)]
pub struct CohortSummary {
    /// Stratum labels with group sizes, in order of first appearance.
    pub strata: Vec<(String, usize)>,
    pub rows: Vec<SummaryRow>,
}

#[derive(Clone, Debug)]
pub enum SummaryRow {
    /// Per-stratum (mean, sd) over non-missing values; None when a stratum
    /// has no data for the column.
    Numeric {
        column: String,
        stats: Vec<Option<(f64, f64)>>,
    },
    /// One row per observed level of a text column: per-stratum count and
    /// percentage of the stratum's non-missing values.
    Level {
        column: String,
        level: String,
        counts: Vec<(usize, f64)>,
    },
}

pub fn summarize_cohort(d: &Dataset, stratum: &str) -> Result<CohortSummary> {
    let stratum_col = d.column(stratum)?;
    if stratum_col.role != Role::Stratum {
        return Err(Error::InvalidInput(format!(
            "column `{}` does not have the stratum role",
            stratum
        )));
    }
    let (labels, label_missing) = d.text(stratum)?;

    let mut strata: Vec<String> = Vec::new();
    for (l, &m) in labels.iter().zip(label_missing) {
        if !m && !strata.contains(l) {
            strata.push(l.clone());
        }
    }
    if strata.is_empty() {
        return Err(Error::InvalidInput("stratum column has no observed levels".into()));
    }
    let member: Vec<Option<usize>> = labels
        .iter()
        .zip(label_missing)
        .map(|(l, &m)| {
            if m {
                None
            } else {
                strata.iter().position(|s| s == l)
            }
        })
        .collect();
    let sizes: Vec<usize> = (0..strata.len())
        .map(|s| member.iter().filter(|&&g| g == Some(s)).count())
        .collect();

    let mut rows = Vec::new();
    for col in d.columns() {
        if col.name == stratum || col.role == Role::Id {
            continue;
        }
        match &col.data {
            ColumnValues::Numeric { values, missing } => {
                let stats = (0..strata.len())
                    .map(|s| {
                        let group: Vec<f64> = values
                            .iter()
                            .zip(missing)
                            .zip(&member)
                            .filter(|((_, &m), &g)| !m && g == Some(s))
                            .map(|((v, _), _)| *v)
                            .collect();
                        if group.is_empty() {
                            return None;
                        }
                        let mean = group.iter().sum::<f64>() / group.len() as f64;
                        let sd = if group.len() < 2 {
                            0.0
                        } else {
                            (group.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                                / (group.len() - 1) as f64)
                                .sqrt()
                        };
                        Some((mean, sd))
                    })
                    .collect();
                rows.push(SummaryRow::Numeric {
                    column: col.name.clone(),
                    stats,
                });
            }
            ColumnValues::Text { values, missing } => {
                let mut levels: Vec<String> = Vec::new();
                let mut seen = BTreeSet::new();
                for (v, &m) in values.iter().zip(missing) {
                    if !m && seen.insert(v.clone()) {
                        levels.push(v.clone());
                    }
                }
                let totals: Vec<usize> = (0..strata.len())
                    .map(|s| {
                        values
                            .iter()
                            .zip(missing)
                            .zip(&member)
                            .filter(|((_, &m), &g)| !m && g == Some(s))
                            .count()
                    })
                    .collect();
                for level in levels {
                    let counts = (0..strata.len())
                        .map(|s| {
                            let n = values
                                .iter()
                                .zip(missing)
                                .zip(&member)
                                .filter(|((v, &m), &g)| !m && g == Some(s) && **v == level)
                                .count();
                            let pct = if totals[s] == 0 {
                                0.0
                            } else {
                                100.0 * n as f64 / totals[s] as f64
                            };
                            (n, pct)
                        })
                        .collect();
                    rows.push(SummaryRow::Level {
                        column: col.name.clone(),
                        level,
                        counts,
                    });
                }
            }
        }
    }

    Ok(CohortSummary {
        strata: strata.into_iter().zip(sizes).collect(),
        rows,
    })
}

impl CohortSummary {
    pub fn to_tsv(&self) -> String {
        let mut header = vec!["characteristic".to_string()];
        for (label, n) in &self.strata {
            header.push(format!("{} (n={})", label, n));
        }
        let mut table = TsvTable::new(header);
        for row in &self.rows {
            match row {
                SummaryRow::Numeric { column, stats } => {
                    let mut cells = vec![format!("{}, mean (sd)", column)];
                    for s in stats {
                        cells.push(match s {
                            Some((mean, sd)) => format!("{} ({})", fmt_g6(*mean), fmt_g6(*sd)),
                            None => "NA".to_string(),
                        });
                    }
                    table.push(cells);
                }
                SummaryRow::Level {
                    column,
                    level,
                    counts,
                } => {
                    let mut cells = vec![format!("{} = {}, n (%)", column, level)];
                    for (n, pct) in counts {
                        cells.push(format!("{} ({})", n, fmt_g6(*pct)));
                    }
                    table.push(cells);
                }
            }
        }
        table.to_tsv()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Column;

    fn cohort(sizes: &[usize]) -> Dataset {
        let labels = ["CN", "EMCI", "LMCI", "AD"];
        let mut dx = Vec::new();
        let mut age = Vec::new();
        for (g, &n) in sizes.iter().enumerate() {
            for i in 0..n {
                dx.push(labels[g].to_string());
                age.push(60.0 + g as f64 * 5.0 + (i % 7) as f64);
            }
        }
        Dataset::from_columns(vec![
            Column::text("dx", Role::Stratum, dx),
            Column::numeric("age", Role::Predictor, age),
        ])
        .unwrap()
    }

    #[test]
    fn counts_echo_group_sizes() {
        let d = cohort(&[417, 310, 562, 342]);
        let s = summarize_cohort(&d, "dx").unwrap();
        let sizes: Vec<usize> = s.strata.iter().map(|(_, n)| *n).collect();
        assert_eq!(sizes, vec![417, 310, 562, 342]);
        assert_eq!(s.strata[0].0, "CN");
    }

    #[test]
    fn numeric_mean_sd() {
        let d = Dataset::from_columns(vec![
            Column::text("g", Role::Stratum, vec!["a".into(), "a".into(), "a".into()]),
            Column::numeric("x", Role::Predictor, vec![1.0, 2.0, 3.0]),
        ])
        .unwrap();
        let s = summarize_cohort(&d, "g").unwrap();
        match &s.rows[0] {
            SummaryRow::Numeric { stats, .. } => {
                let (mean, sd) = stats[0].unwrap();
                assert!((mean - 2.0).abs() < 1e-12);
                assert!((sd - 1.0).abs() < 1e-12);
            }
            _ => panic!("expected numeric row"),
        }
    }

    #[test]
    fn percents_sum_to_100() {
        let labels: Vec<String> = (0..30)
            .map(|i| if i % 3 == 0 { "x" } else { "y" }.to_string())
            .collect();
        let strata: Vec<String> = (0..30)
            .map(|i| if i < 14 { "a" } else { "b" }.to_string())
            .collect();
        let d = Dataset::from_columns(vec![
            Column::text("g", Role::Stratum, strata),
            Column::text("lvl", Role::Stratum, labels),
        ])
        .unwrap();
        let s = summarize_cohort(&d, "g").unwrap();
        for stratum in 0..2 {
            let total: f64 = s
                .rows
                .iter()
                .map(|r| match r {
                    SummaryRow::Level { counts, .. } => counts[stratum].1,
                    _ => 0.0,
                })
                .sum();
            assert!((total - 100.0).abs() < 0.01, "stratum {} sums to {}", stratum, total);
        }
    }

    #[test]
    fn rejects_non_stratum_column() {
        let d = cohort(&[3, 3, 3, 3]);
        assert!(summarize_cohort(&d, "age").is_err());
    }
}
