//! Tabular cohort data: typed columns, CSV ingestion, missingness handling,
//! standardization, fold assignment, and the synthetic cohort generator.
//!
//! A [`Dataset`] is a named collection of equal-length columns. Outcome and
//! predictor columns hold numeric values with an explicit missing mask; id
//! and stratum columns hold raw text so that subject identifiers and
//! categorical group labels survive ingestion untouched.

mod folds;
mod simulate;
mod summary;

pub use folds::{make_folds, FoldAssignment};
pub use simulate::{
    dataset_to_csv, gene_name, simulate_cohort, EffectSpec, GeneratorSpec, GroundTruth,
    CLINICAL_COLUMNS, DISEASE_LEVELS, FA_REGION_PREFIXES,
};
pub use summary::{summarize_cohort, CohortSummary, SummaryRow};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Outcome,
    Predictor,
    Id,
    Stratum,
}

/// Column payload. Numeric columns carry a parallel missing mask; text
/// columns (ids and strata) keep the raw cell with empty/"NA" marked missing.
#[derive(Clone, Debug)]
pub enum ColumnValues {
    Numeric { values: Vec<f64>, missing: Vec<bool> },
    Text { values: Vec<String>, missing: Vec<bool> },
}

impl ColumnValues {
    fn len(&self) -> usize {
        match self {
            ColumnValues::Numeric { values, .. } => values.len(),
            ColumnValues::Text { values, .. } => values.len(),
        }
    }

    fn missing_mask(&self) -> &[bool] {
        match self {
            ColumnValues::Numeric { missing, .. } => missing,
            ColumnValues::Text { missing, .. } => missing,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Column {
    pub name: String,
    pub role: Role,
    pub data: ColumnValues,
}

impl Column {
    pub fn numeric<S: Into<String>>(name: S, role: Role, values: Vec<f64>) -> Column {
        let missing = vec![false; values.len()];
        Column {
            name: name.into(),
            role,
            data: ColumnValues::Numeric { values, missing },
        }
    }

    pub fn numeric_with_missing<S: Into<String>>(
        name: S,
        role: Role,
        values: Vec<f64>,
        missing: Vec<bool>,
    ) -> Column {
        assert_eq!(values.len(), missing.len());
        Column {
            name: name.into(),
            role,
            data: ColumnValues::Numeric { values, missing },
        }
    }

    pub fn text<S: Into<String>>(name: S, role: Role, values: Vec<String>) -> Column {
        let missing = values.iter().map(|v| is_missing_token(v)).collect();
        Column {
            name: name.into(),
            role,
            data: ColumnValues::Text { values, missing },
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self.data, ColumnValues::Numeric { .. })
    }
}

fn is_missing_token(cell: &str) -> bool {
    cell.is_empty() || cell == "NA"
}

/// Role assignment for CSV ingestion. Columns absent from `roles` default to
/// predictor. The file is JSON with a mandatory `spec_version` of 1:
///
/// ```json
/// { "spec_version": 1, "roles": { "subject": "id", "dx": "stratum", "mmse": "outcome" } }
/// ```
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Schema {
    pub spec_version: u32,
    #[serde(default)]
    pub roles: BTreeMap<String, Role>,
}

impl Schema {
    pub fn empty() -> Schema {
        Schema {
            spec_version: 1,
            roles: BTreeMap::new(),
        }
    }

    pub fn with_role<S: Into<String>>(mut self, column: S, role: Role) -> Schema {
        self.roles.insert(column.into(), role);
        self
    }

    pub fn parse_json(bytes: &[u8]) -> Result<Schema> {
        let schema: Schema =
            serde_json::from_slice(bytes).map_err(|e| Error::Schema(e.to_string()))?;
        if schema.spec_version != 1 {
            return Err(Error::Schema(format!(
                "unsupported spec_version {}, expected 1",
                schema.spec_version
            )));
        }
        Ok(schema)
    }

    pub fn load(path: &Path) -> Result<Schema> {
        let bytes = std::fs::read(path)
            .map_err(|e| Error::Schema(format!("cannot read {}: {}", path.display(), e)))?;
        Schema::parse_json(&bytes)
    }
}

#[derive(Clone, Debug)]
pub struct Dataset {
    n_rows: usize,
    columns: Vec<Column>,
    index: BTreeMap<String, usize>,
}

impl Dataset {
    /// Builds a dataset from columns, enforcing unique names and equal lengths.
    pub fn from_columns(columns: Vec<Column>) -> Result<Dataset> {
        if columns.is_empty() {
            return Err(Error::InvalidInput("dataset needs at least one column".into()));
        }
        let n_rows = columns[0].data.len();
        let mut index = BTreeMap::new();
        for (i, col) in columns.iter().enumerate() {
            if col.data.len() != n_rows {
                return Err(Error::InvalidInput(format!(
                    "column `{}` has {} rows, expected {}",
                    col.name,
                    col.data.len(),
                    n_rows
                )));
            }
            if index.insert(col.name.clone(), i).is_some() {
                return Err(Error::InvalidInput(format!(
                    "duplicate column name `{}`",
                    col.name
                )));
            }
        }
        Ok(Dataset {
            n_rows,
            columns,
            index,
        })
    }

    /// Parses CSV from any reader. The header row is mandatory; cells in
    /// outcome/predictor columns are parsed as floats with empty, `NA`, and
    /// unparseable (or non-finite) cells recorded as missing. Id and stratum
    /// columns keep the raw text.
    pub fn from_csv_reader<R: Read>(reader: R, schema: &Schema) -> Result<Dataset> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
            return Err(Error::Csv("empty header row".into()));
        }
        let mut seen = BTreeSet::new();
        for h in headers.iter() {
            if !seen.insert(h.to_string()) {
                return Err(Error::Csv(format!("duplicate column name `{}`", h)));
            }
        }
        for name in schema.roles.keys() {
            if !seen.contains(name) {
                return Err(Error::Schema(format!(
                    "schema names column `{}` absent from the csv header",
                    name
                )));
            }
        }

        let roles: Vec<Role> = headers
            .iter()
            .map(|h| schema.roles.get(h).copied().unwrap_or(Role::Predictor))
            .collect();
        let n_cols = headers.len();
        let mut numeric: Vec<Vec<f64>> = vec![Vec::new(); n_cols];
        let mut text: Vec<Vec<String>> = vec![Vec::new(); n_cols];
        let mut missing: Vec<Vec<bool>> = vec![Vec::new(); n_cols];

        for record in rdr.records() {
            let record = record?;
            if record.len() != n_cols {
                return Err(Error::Csv(format!(
                    "row {} has {} fields, expected {}",
                    numeric[0].len() + 2,
                    record.len(),
                    n_cols
                )));
            }
            for (c, cell) in record.iter().enumerate() {
                match roles[c] {
                    Role::Id | Role::Stratum => {
                        missing[c].push(is_missing_token(cell));
                        text[c].push(cell.to_string());
                    }
                    Role::Outcome | Role::Predictor => {
                        let parsed = if is_missing_token(cell) {
                            None
                        } else {
                            cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
                        };
                        missing[c].push(parsed.is_none());
                        numeric[c].push(parsed.unwrap_or(0.0));
                    }
                }
            }
        }
        if numeric.iter().all(|v| v.is_empty()) && text.iter().all(|v| v.is_empty()) {
            return Err(Error::Csv("csv contains no data rows".into()));
        }

        let mut columns = Vec::with_capacity(n_cols);
        for (c, name) in headers.iter().enumerate() {
            let data = match roles[c] {
                Role::Id | Role::Stratum => ColumnValues::Text {
                    values: std::mem::take(&mut text[c]),
                    missing: std::mem::take(&mut missing[c]),
                },
                Role::Outcome | Role::Predictor => ColumnValues::Numeric {
                    values: std::mem::take(&mut numeric[c]),
                    missing: std::mem::take(&mut missing[c]),
                },
            };
            columns.push(Column {
                name: name.to_string(),
                role: roles[c],
                data,
            });
        }
        Dataset::from_columns(columns)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.index
            .get(name)
            .map(|&i| &self.columns[i])
            .ok_or_else(|| Error::InvalidInput(format!("no column named `{}`", name)))
    }

    /// Numeric values and missing mask for a column; errors on text columns.
    pub fn numeric(&self, name: &str) -> Result<(&[f64], &[bool])> {
        match &self.column(name)?.data {
            ColumnValues::Numeric { values, missing } => Ok((values, missing)),
            ColumnValues::Text { .. } => Err(Error::InvalidInput(format!(
                "column `{}` is not numeric",
                name
            ))),
        }
    }

    pub fn text(&self, name: &str) -> Result<(&[String], &[bool])> {
        match &self.column(name)?.data {
            ColumnValues::Text { values, missing } => Ok((values, missing)),
            ColumnValues::Numeric { .. } => Err(Error::InvalidInput(format!(
                "column `{}` is not text",
                name
            ))),
        }
    }

    /// Column names sharing a prefix, in declaration order.
    pub fn names_with_prefix(&self, prefix: &str) -> Vec<String> {
        self.columns
            .iter()
            .filter(|c| c.name.starts_with(prefix))
            .map(|c| c.name.clone())
            .collect()
    }

    /// Indices of rows with no missing value in any of the named columns.
    pub fn complete_rows(&self, names: &[String]) -> Result<Vec<usize>> {
        let mut keep = vec![true; self.n_rows];
        for name in names {
            let col = self.column(name)?;
            for (i, &m) in col.data.missing_mask().iter().enumerate() {
                if m {
                    keep[i] = false;
                }
            }
        }
        Ok((0..self.n_rows).filter(|&i| keep[i]).collect())
    }

    pub fn subset_rows(&self, rows: &[usize]) -> Result<Dataset> {
        for &r in rows {
            if r >= self.n_rows {
                return Err(Error::InvalidInput(format!(
                    "row index {} out of range ({} rows)",
                    r, self.n_rows
                )));
            }
        }
        let columns = self
            .columns
            .iter()
            .map(|c| {
                let data = match &c.data {
                    ColumnValues::Numeric { values, missing } => ColumnValues::Numeric {
                        values: rows.iter().map(|&r| values[r]).collect(),
                        missing: rows.iter().map(|&r| missing[r]).collect(),
                    },
                    ColumnValues::Text { values, missing } => ColumnValues::Text {
                        values: rows.iter().map(|&r| values[r].clone()).collect(),
                        missing: rows.iter().map(|&r| missing[r]).collect(),
                    },
                };
                Column {
                    name: c.name.clone(),
                    role: c.role,
                    data,
                }
            })
            .collect();
        let mut d = Dataset::from_columns(columns)?;
        d.n_rows = rows.len();
        Ok(d)
    }

    /// Extracts complete numeric columns as dense vectors, erroring on any
    /// missing value. Solvers call this so they never see holes.
    pub fn numeric_matrix(&self, names: &[String]) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(names.len());
        for name in names {
            let (values, missing) = self.numeric(name)?;
            if missing.iter().any(|&m| m) {
                return Err(Error::InvalidInput(format!(
                    "column `{}` contains missing values",
                    name
                )));
            }
            out.push(values.to_vec());
        }
        Ok(out)
    }
}

pub fn load_csv(path: &Path, schema: &Schema) -> Result<Dataset> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::InvalidInput(format!("cannot open {}: {}", path.display(), e)))?;
    Dataset::from_csv_reader(std::io::BufReader::new(file), schema)
}

/// Removes every row with a missing value in any of the named columns.
/// A result with zero rows is legal; downstream fits will reject it.
pub fn drop_incomplete(d: &Dataset, required: &[String]) -> Result<Dataset> {
    let rows = d.complete_rows(required)?;
    let mut out = d.subset_rows(&rows)?;
    out.n_rows = rows.len();
    Ok(out)
}

/// Per-column location and scale recorded by [`standardize`].
#[derive(Clone, Debug, Serialize)]
pub struct ColumnStats {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    /// False for constant columns, which are passed through untouched.
    pub scaled: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct StandardizationInfo {
    pub columns: Vec<ColumnStats>,
}

impl StandardizationInfo {
    /// Maps a standardized dataset back to the original scale. Round-trips
    /// with [`standardize`] to within 1e-12.
    pub fn invert(&self, d: &Dataset) -> Result<Dataset> {
        let mut columns = d.columns.to_vec();
        for stats in &self.columns {
            let idx = *d
                .index
                .get(&stats.name)
                .ok_or_else(|| Error::InvalidInput(format!("no column named `{}`", stats.name)))?;
            if let ColumnValues::Numeric { values, missing } = &mut columns[idx].data {
                for (v, &m) in values.iter_mut().zip(missing.iter()) {
                    if !m && stats.scaled {
                        *v = *v * stats.sd + stats.mean;
                    }
                }
            }
        }
        Dataset::from_columns(columns)
    }
}

/// Mean and sample standard deviation over non-missing entries.
pub(crate) fn mean_sd(values: &[f64], missing: &[bool]) -> (f64, f64, usize) {
    let mut n = 0usize;
    let mut sum = 0.0;
    for (v, &m) in values.iter().zip(missing) {
        if !m {
            n += 1;
            sum += v;
        }
    }
    if n == 0 {
        return (f64::NAN, f64::NAN, 0);
    }
    let mean = sum / n as f64;
    if n < 2 {
        return (mean, 0.0, n);
    }
    let ss: f64 = values
        .iter()
        .zip(missing)
        .filter(|(_, &m)| !m)
        .map(|(v, _)| (v - mean) * (v - mean))
        .sum();
    (mean, (ss / (n - 1) as f64).sqrt(), n)
}

/// Centers and scales the named numeric columns to sample mean 0 and sample
/// standard deviation 1. Constant columns are flagged and left alone.
pub fn standardize(d: &Dataset, names: &[String]) -> Result<(Dataset, StandardizationInfo)> {
    let mut columns = d.columns.to_vec();
    let mut stats = Vec::with_capacity(names.len());
    for name in names {
        let idx = *d
            .index
            .get(name)
            .ok_or_else(|| Error::InvalidInput(format!("no column named `{}`", name)))?;
        let col = &mut columns[idx];
        match &mut col.data {
            ColumnValues::Numeric { values, missing } => {
                let (mean, sd, _) = mean_sd(values, missing);
                let scaled = sd > 0.0;
                if scaled {
                    for (v, &m) in values.iter_mut().zip(missing.iter()) {
                        if !m {
                            *v = (*v - mean) / sd;
                        }
                    }
                }
                stats.push(ColumnStats {
                    name: name.clone(),
                    mean,
                    sd,
                    scaled,
                });
            }
            ColumnValues::Text { .. } => {
                return Err(Error::InvalidInput(format!(
                    "column `{}` is not numeric",
                    name
                )))
            }
        }
    }
    let out = Dataset::from_columns(columns)?;
    Ok((out, StandardizationInfo { columns: stats }))
}

/// An ordered categorical outcome: labels in declared order, one code per
/// row, codes running 0..J-1. Construction requires complete data, so the
/// solvers downstream never see a missing category.
#[derive(Clone, Debug)]
pub struct CategoricalOutcome {
    labels: Vec<String>,
    codes: Vec<usize>,
}

impl CategoricalOutcome {
    pub fn from_codes(codes: Vec<usize>, labels: Vec<String>) -> Result<CategoricalOutcome> {
        if labels.len() < 2 {
            return Err(Error::InvalidInput("need at least two category labels".into()));
        }
        let mut seen = BTreeSet::new();
        for l in &labels {
            if !seen.insert(l) {
                return Err(Error::InvalidInput(format!("duplicate label `{}`", l)));
            }
        }
        if let Some(&bad) = codes.iter().find(|&&c| c >= labels.len()) {
            return Err(Error::InvalidInput(format!(
                "code {} out of range for {} labels",
                bad,
                labels.len()
            )));
        }
        Ok(CategoricalOutcome { labels, codes })
    }

    /// Reads a text column, mapping each cell to its position in `levels`.
    /// Cells that are missing or outside `levels` are errors; filter rows
    /// with [`drop_incomplete`] first.
    pub fn from_text_column(d: &Dataset, column: &str, levels: &[String]) -> Result<CategoricalOutcome> {
        let (values, missing) = d.text(column)?;
        let lookup: BTreeMap<&str, usize> = levels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i))
            .collect();
        if lookup.len() != levels.len() {
            return Err(Error::InvalidInput("duplicate level in level list".into()));
        }
        let mut codes = Vec::with_capacity(values.len());
        for (i, (v, &m)) in values.iter().zip(missing).enumerate() {
            if m {
                return Err(Error::InvalidInput(format!(
                    "column `{}` has a missing value at row {}",
                    column, i
                )));
            }
            match lookup.get(v.as_str()) {
                Some(&c) => codes.push(c),
                None => {
                    return Err(Error::InvalidInput(format!(
                        "value `{}` in column `{}` is not one of the declared levels",
                        v, column
                    )))
                }
            }
        }
        CategoricalOutcome::from_codes(codes, levels.to_vec())
    }

    pub fn n_levels(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn codes(&self) -> &[usize] {
        &self.codes
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    /// Observation count per level, in label order.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.labels.len()];
        for &c in &self.codes {
            counts[c] += 1;
        }
        counts
    }

    pub fn require_min_count(&self, min: usize) -> Result<()> {
        for (label, &n) in self.labels.iter().zip(self.counts().iter()) {
            if n < min {
                return Err(Error::InvalidInput(format!(
                    "category `{}` observed {} times, need at least {}",
                    label, n, min
                )));
            }
        }
        Ok(())
    }

    pub fn subset(&self, rows: &[usize]) -> CategoricalOutcome {
        CategoricalOutcome {
            labels: self.labels.clone(),
            codes: rows.iter().map(|&r| self.codes[r]).collect(),
        }
    }

    /// Same data with the category order flipped.
    pub fn reversed(&self) -> CategoricalOutcome {
        let j = self.labels.len();
        CategoricalOutcome {
            labels: self.labels.iter().rev().cloned().collect(),
            codes: self.codes.iter().map(|&c| j - 1 - c).collect(),
        }
    }

    /// 0/1 indicator columns for every level except `reference`, named
    /// `<column>_<level>`.
    pub fn dummy_columns(&self, column: &str, reference: &str) -> Result<Vec<(String, Vec<f64>)>> {
        let ref_idx = self
            .labels
            .iter()
            .position(|l| l == reference)
            .ok_or_else(|| {
                Error::InvalidInput(format!("reference level `{}` not among labels", reference))
            })?;
        let mut out = Vec::new();
        for (i, label) in self.labels.iter().enumerate() {
            if i == ref_idx {
                continue;
            }
            let values = self
                .codes
                .iter()
                .map(|&c| if c == i { 1.0 } else { 0.0 })
                .collect();
            out.push((format!("{}_{}", column, label), values));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_csv() -> &'static str {
        "subject,dx,age,mmse\ns1,CN,70,29\ns2,AD,NA,20\ns3,EMCI,80.5,27\n"
    }

    fn toy_schema() -> Schema {
        Schema::empty()
            .with_role("subject", Role::Id)
            .with_role("dx", Role::Stratum)
            .with_role("mmse", Role::Outcome)
    }

    #[test]
    fn csv_roundtrip_roles() {
        let d = Dataset::from_csv_reader(toy_csv().as_bytes(), &toy_schema()).unwrap();
        assert_eq!(d.n_rows(), 3);
        let (age, miss) = d.numeric("age").unwrap();
        assert_eq!(age[0], 70.0);
        assert!(miss[1]);
        assert_eq!(age[2], 80.5);
        let (dx, _) = d.text("dx").unwrap();
        assert_eq!(dx[1], "AD");
        assert!(d.numeric("dx").is_err());
    }

    #[test]
    fn csv_rejects_duplicate_headers() {
        let err = Dataset::from_csv_reader("a,a\n1,2\n".as_bytes(), &Schema::empty()).unwrap_err();
        assert!(matches!(err, Error::Csv(_)), "{err}");
    }

    #[test]
    fn csv_rejects_schema_with_unknown_column() {
        let schema = Schema::empty().with_role("nope", Role::Outcome);
        let err = Dataset::from_csv_reader("a,b\n1,2\n".as_bytes(), &schema).unwrap_err();
        assert!(matches!(err, Error::Schema(_)), "{err}");
    }

    #[test]
    fn csv_rejects_empty_and_headerless() {
        assert!(Dataset::from_csv_reader("".as_bytes(), &Schema::empty()).is_err());
        assert!(Dataset::from_csv_reader("a,b\n".as_bytes(), &Schema::empty()).is_err());
    }

    #[test]
    fn unparseable_cells_become_missing() {
        let d = Dataset::from_csv_reader("x\n1.5\nabc\ninf\n".as_bytes(), &Schema::empty()).unwrap();
        let (v, m) = d.numeric("x").unwrap();
        assert_eq!(v[0], 1.5);
        assert!(m[1]);
        assert!(m[2], "non-finite values are treated as missing");
    }

    #[test]
    fn drop_incomplete_listwise() {
        let d = Dataset::from_csv_reader(toy_csv().as_bytes(), &toy_schema()).unwrap();
        let kept = drop_incomplete(&d, &["age".to_string(), "mmse".to_string()]).unwrap();
        assert_eq!(kept.n_rows(), 2);
        let (dx, _) = kept.text("dx").unwrap();
        assert_eq!(dx, &["CN".to_string(), "EMCI".to_string()]);
    }

    #[test]
    fn drop_incomplete_all_missing_gives_zero_rows() {
        let d = Dataset::from_csv_reader("x,y\nNA,1\nNA,2\n".as_bytes(), &Schema::empty()).unwrap();
        let kept = drop_incomplete(&d, &["x".to_string()]).unwrap();
        assert_eq!(kept.n_rows(), 0);
    }

    #[test]
    fn standardize_example() {
        let d = Dataset::from_columns(vec![Column::numeric(
            "x",
            Role::Predictor,
            vec![1.0, 2.0, 3.0],
        )])
        .unwrap();
        let (s, info) = standardize(&d, &["x".to_string()]).unwrap();
        let (v, _) = s.numeric("x").unwrap();
        let mean: f64 = v.iter().sum::<f64>() / 3.0;
        let sd = (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 2.0).sqrt();
        assert!(mean.abs() < 1e-10);
        assert!((sd - 1.0).abs() < 1e-10);
        assert_eq!(info.columns[0].mean, 2.0);
        assert!((info.columns[0].sd - 1.0).abs() < 1e-12);
    }

    #[test]
    fn standardize_constant_flagged() {
        let d = Dataset::from_columns(vec![Column::numeric(
            "c",
            Role::Predictor,
            vec![5.0, 5.0, 5.0],
        )])
        .unwrap();
        let (s, info) = standardize(&d, &["c".to_string()]).unwrap();
        assert!(!info.columns[0].scaled);
        let (v, _) = s.numeric("c").unwrap();
        assert_eq!(v, &[5.0, 5.0, 5.0]);
    }

    #[test]
    fn categorical_reversal() {
        let y = CategoricalOutcome::from_codes(
            vec![0, 2, 1],
            vec!["a".into(), "b".into(), "c".into()],
        )
        .unwrap();
        let r = y.reversed();
        assert_eq!(r.codes(), &[2, 0, 1]);
        assert_eq!(r.labels()[0], "c");
    }

    #[test]
    fn dummy_columns_reference() {
        let y = CategoricalOutcome::from_codes(
            vec![0, 1, 2, 0],
            vec!["CN".into(), "EMCI".into(), "AD".into()],
        )
        .unwrap();
        let dummies = y.dummy_columns("dx", "CN").unwrap();
        assert_eq!(dummies.len(), 2);
        assert_eq!(dummies[0].0, "dx_EMCI");
        assert_eq!(dummies[0].1, vec![0.0, 1.0, 0.0, 0.0]);
        assert_eq!(dummies[1].1, vec![0.0, 0.0, 1.0, 0.0]);
    }
}
