//! Three-stage cohort analysis as one reproducible, configured run.
//!
//! The pipeline chains the crate's estimators the way the motivating
//! workflow does: classical low-dimensional regressions on the full cohort,
//! then three penalized gene-selection stages — cognitive scores (Gaussian
//! lasso), disease state (multinomial lasso over pairwise-screened genes),
//! and region-partitioned imaging responses (multi-task group lasso on
//! logit-transformed values). Each stage derives its fold seed from the
//! master seed and a fixed stage salt, so stages are isolated: changing the
//! imaging configuration cannot move the cognitive stage's folds.
//!
//! A run produces an in-memory report tree (relative path → bytes) with a
//! `manifest.json` of SHA-256 content hashes and a `metadata.json` that
//! echoes the full configuration; rerunning with the same data, config, and
//! seed reproduces every byte. [`PipelineReport::write_to`] materializes the
//! tree atomically — the output directory appears complete or not at all.

use crate::data::{
    make_folds, summarize_cohort, CategoricalOutcome, Column, ColumnValues, Dataset, Role,
};
use crate::error::{Error, Result};
use crate::lasso::gaussian::{cv_lasso, nonzero_report, nonzero_report_tsv};
use crate::lasso::multinomial::{cv_multinomial, gene_sets, MultinomialFit};
use crate::lasso::multitask::{cv_multitask, rank_rows, rank_rows_tsv, MultiTaskFit};
use crate::lasso::{CvResult, LambdaRule, PathConfig};
use crate::linear::{correlation_filter, fit_ols_raw, CorrelationFilter, OlsFit};
use crate::ordinal::{fit_ordinal, forest_data, forest_tsv, ForestRow, OrdinalFit};
use crate::report::{fmt_g6, sha256_hex, to_json_bytes, TsvTable};
use crate::screening::{
    default_d_keep, pairwise_screens, sis_screen, sis_screen_multi, ScreenResult,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;

/// The three response territories of the imaging stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Region {
    LeftHemisphere,
    CorpusCallosum,
    RightHemisphere,
}

impl Region {
    pub const ALL: [Region; 3] = [
        Region::LeftHemisphere,
        Region::CorpusCallosum,
        Region::RightHemisphere,
    ];

    /// Canonical label used in partition files.
    pub fn canonical(self) -> &'static str {
        match self {
            Region::LeftHemisphere => "LeftHemisphere",
            Region::CorpusCallosum => "CorpusCallosum",
            Region::RightHemisphere => "RightHemisphere",
        }
    }

    /// Lowercase form used in report paths.
    pub fn slug(self) -> &'static str {
        match self {
            Region::LeftHemisphere => "left_hemisphere",
            Region::CorpusCallosum => "corpus_callosum",
            Region::RightHemisphere => "right_hemisphere",
        }
    }

    pub fn parse(s: &str) -> Result<Region> {
        for r in Region::ALL {
            if s == r.canonical() || s == r.slug() {
                return Ok(r);
            }
        }
        Err(Error::Config(format!(
            "unknown region '{}'; expected LeftHemisphere, CorpusCallosum, or RightHemisphere",
            s
        )))
    }
}

/// Expected per-region response counts for the reference cohort layout.
pub const REFERENCE_REGION_COUNTS: [usize; 3] = [23, 11, 23];

/// Assignment of imaging response columns to the three regions.
///
/// Built from a two-column CSV (`response,region`, header mandatory). The
/// reference layout has 23 left-hemisphere, 11 corpus-callosum, and 23
/// right-hemisphere responses; other layouts need `allow_custom`.
#[derive(Clone, Debug)]
pub struct RegionPartition {
    entries: Vec<(String, Region)>,
}

impl RegionPartition {
    pub fn new(entries: Vec<(String, Region)>, allow_custom: bool) -> Result<RegionPartition> {
        let mut seen = BTreeSet::new();
        for (name, _) in &entries {
            if name.is_empty() {
                return Err(Error::Config("partition has an empty response name".into()));
            }
            if name.chars().any(|c| c == ',' || c == '"' || c.is_control()) {
                return Err(Error::Config(format!(
                    "response name {:?} contains characters not allowed in column names",
                    name
                )));
            }
            if !seen.insert(name.clone()) {
                return Err(Error::Config(format!(
                    "response '{}' appears more than once in the partition",
                    name
                )));
            }
        }
        let partition = RegionPartition { entries };
        let counts = partition.counts();
        if allow_custom {
            for (region, count) in Region::ALL.iter().zip(counts) {
                if count == 0 {
                    return Err(Error::Config(format!(
                        "partition assigns no responses to {}",
                        region.canonical()
                    )));
                }
            }
        } else if counts != REFERENCE_REGION_COUNTS {
            return Err(Error::Config(format!(
                "partition counts ({}, {}, {}) do not match the reference layout \
                 ({}, {}, {}); pass allow_custom to accept other layouts",
                counts[0],
                counts[1],
                counts[2],
                REFERENCE_REGION_COUNTS[0],
                REFERENCE_REGION_COUNTS[1],
                REFERENCE_REGION_COUNTS[2]
            )));
        }
        Ok(partition)
    }

    /// Parses the two-column `response,region` CSV. The header row is
    /// required; region labels accept canonical (`LeftHemisphere`) or slug
    /// (`left_hemisphere`) spellings.
    pub fn parse_csv(bytes: &[u8], allow_custom: bool) -> Result<RegionPartition> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(bytes);
        let headers = reader.headers().map_err(Error::from)?.clone();
        if headers.len() != 2 || &headers[0] != "response" || &headers[1] != "region" {
            return Err(Error::Config(format!(
                "partition header must be exactly 'response,region', got '{}'",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut entries = Vec::new();
        for record in reader.records() {
            let record = record.map_err(Error::from)?;
            if record.len() != 2 {
                return Err(Error::Config(format!(
                    "partition row {} has {} fields, expected 2",
                    entries.len() + 2,
                    record.len()
                )));
            }
            entries.push((record[0].to_string(), Region::parse(&record[1])?));
        }
        if entries.is_empty() {
            return Err(Error::Config("partition file has no data rows".into()));
        }
        RegionPartition::new(entries, allow_custom)
    }

    /// Builds a partition by assigning the first `counts[0]` names to the
    /// left hemisphere, the next `counts[1]` to the corpus callosum, and the
    /// last `counts[2]` to the right hemisphere.
    pub fn from_ordered_names(
        names: &[String],
        counts: [usize; 3],
        allow_custom: bool,
    ) -> Result<RegionPartition> {
        if names.len() != counts.iter().sum::<usize>() {
            return Err(Error::Config(format!(
                "{} response names do not fill region counts summing to {}",
                names.len(),
                counts.iter().sum::<usize>()
            )));
        }
        let mut entries = Vec::with_capacity(names.len());
        let mut iter = names.iter();
        for (region, &count) in Region::ALL.iter().zip(&counts) {
            for _ in 0..count {
                entries.push((iter.next().expect("length checked").clone(), *region));
            }
        }
        RegionPartition::new(entries, allow_custom)
    }

    pub fn counts(&self) -> [usize; 3] {
        let mut counts = [0usize; 3];
        for (_, region) in &self.entries {
            let idx = Region::ALL.iter().position(|r| r == region).expect("member");
            counts[idx] += 1;
        }
        counts
    }

    /// Responses of one region, in partition order.
    pub fn responses(&self, region: Region) -> Vec<String> {
        self.entries
            .iter()
            .filter(|(_, r)| *r == region)
            .map(|(n, _)| n.clone())
            .collect()
    }

    /// All responses, in partition order.
    pub fn all_responses(&self) -> Vec<String> {
        self.entries.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// response → canonical region name, for metadata echoes.
    pub fn as_map(&self) -> BTreeMap<String, String> {
        self.entries
            .iter()
            .map(|(n, r)| (n.clone(), r.canonical().to_string()))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("response,region\n");
        for (name, region) in &self.entries {
            out.push_str(name);
            out.push(',');
            out.push_str(region.canonical());
            out.push('\n');
        }
        out
    }
}

fn default_true() -> bool {
    true
}

/// Which of the four stages a run executes. All default to on.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StageToggles {
    #[serde(default = "default_true")]
    pub low_dim: bool,
    #[serde(default = "default_true")]
    pub cognitive: bool,
    #[serde(default = "default_true")]
    pub disease: bool,
    #[serde(default = "default_true")]
    pub imaging: bool,
}

impl Default for StageToggles {
    fn default() -> Self {
        StageToggles {
            low_dim: true,
            cognitive: true,
            disease: true,
            imaging: true,
        }
    }
}

fn default_folds() -> usize {
    10
}
fn default_imaging_folds() -> usize {
    4
}
fn default_top_k_cognitive() -> usize {
    75
}
fn default_top_k_imaging() -> usize {
    50
}
fn default_logit_epsilon() -> f64 {
    1e-6
}
fn default_correlation_threshold() -> f64 {
    0.98
}
fn default_lambda_rule() -> String {
    "min".into()
}
fn default_merge() -> String {
    "union".into()
}
fn default_disease_levels() -> Vec<String> {
    ["CN", "EMCI", "LMCI", "AD"].map(String::from).to_vec()
}
fn default_reference_level() -> String {
    "CN".into()
}
fn default_cognitive_outcomes() -> Vec<String> {
    vec!["mmse".into(), "cdrsb".into()]
}
fn default_disease_column() -> String {
    "dx".into()
}
fn default_gene_prefix() -> String {
    "gene_".into()
}
fn default_clinical_predictors() -> Vec<String> {
    ["age", "educ", "apoe4", "abeta", "tau", "ptau"]
        .map(String::from)
        .to_vec()
}

/// Full pipeline configuration. JSON documents carry `spec_version: 1`;
/// every field except `spec_version` and `seed` has a default.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub spec_version: u32,
    /// Master seed; each stage folds it with a fixed salt.
    pub seed: u64,
    #[serde(default)]
    pub stages: StageToggles,
    /// Cross-validation folds for the gene stages (cognitive, disease).
    #[serde(default = "default_folds")]
    pub folds: usize,
    /// Cross-validation folds for the imaging stage, where rows are scarce.
    #[serde(default = "default_imaging_folds")]
    pub imaging_folds: usize,
    #[serde(default = "default_top_k_cognitive")]
    pub top_k_cognitive: usize,
    #[serde(default = "default_top_k_imaging")]
    pub top_k_imaging: usize,
    /// Screening retention size; `null` means ⌈n/ln n⌉ per stage subset.
    #[serde(default)]
    pub d_keep: Option<usize>,
    /// Penalty choice after cross-validation: "min" or "1se".
    #[serde(default = "default_lambda_rule")]
    pub lambda_rule: String,
    /// Optional per-stage overrides of `lambda_rule`.
    #[serde(default)]
    pub cognitive_lambda_rule: Option<String>,
    #[serde(default)]
    pub disease_lambda_rule: Option<String>,
    #[serde(default)]
    pub imaging_lambda_rule: Option<String>,
    /// How the six pairwise screened sets merge before the multinomial fit:
    /// "union" or "intersection".
    #[serde(default = "default_merge")]
    pub merge: String,
    /// Screen genes per region (default) or once across all responses.
    #[serde(default = "default_true")]
    pub per_region_screening: bool,
    #[serde(default = "default_logit_epsilon")]
    pub logit_epsilon: f64,
    #[serde(default = "default_correlation_threshold")]
    pub correlation_threshold: f64,
    /// Ordered disease-state labels, mildest first.
    #[serde(default = "default_disease_levels")]
    pub disease_levels: Vec<String>,
    /// Reference category for disease-state dummy coding. Stated
    /// explicitly rather than guessed from label order.
    #[serde(default = "default_reference_level")]
    pub reference_level: String,
    #[serde(default = "default_cognitive_outcomes")]
    pub cognitive_outcomes: Vec<String>,
    #[serde(default = "default_disease_column")]
    pub disease_column: String,
    /// Prefix that identifies gene-expression predictor columns.
    #[serde(default = "default_gene_prefix")]
    pub gene_prefix: String,
    /// Clinical covariates for the low-dimensional regressions.
    #[serde(default = "default_clinical_predictors")]
    pub clinical_predictors: Vec<String>,
}

impl PipelineConfig {
    /// Configuration with every optional field at its default.
    pub fn with_seed(seed: u64) -> PipelineConfig {
        PipelineConfig {
            spec_version: 1,
            seed,
            stages: StageToggles::default(),
            folds: default_folds(),
            imaging_folds: default_imaging_folds(),
            top_k_cognitive: default_top_k_cognitive(),
            top_k_imaging: default_top_k_imaging(),
            d_keep: None,
            lambda_rule: default_lambda_rule(),
            cognitive_lambda_rule: None,
            disease_lambda_rule: None,
            imaging_lambda_rule: None,
            merge: default_merge(),
            per_region_screening: true,
            logit_epsilon: default_logit_epsilon(),
            correlation_threshold: default_correlation_threshold(),
            disease_levels: default_disease_levels(),
            reference_level: default_reference_level(),
            cognitive_outcomes: default_cognitive_outcomes(),
            disease_column: default_disease_column(),
            gene_prefix: default_gene_prefix(),
            clinical_predictors: default_clinical_predictors(),
        }
    }

    pub fn parse_json(bytes: &[u8]) -> Result<PipelineConfig> {
        let config: PipelineConfig =
            serde_json::from_slice(bytes).map_err(|e| Error::Config(e.to_string()))?;
        if config.spec_version != 1 {
            return Err(Error::Config(format!(
                "unsupported spec_version {}, expected 1",
                config.spec_version
            )));
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.spec_version != 1 {
            return Err(Error::Config(format!(
                "unsupported spec_version {}, expected 1",
                self.spec_version
            )));
        }
        if self.folds < 2 {
            return Err(Error::Config("folds must be at least 2".into()));
        }
        if self.imaging_folds < 2 {
            return Err(Error::Config("imaging_folds must be at least 2".into()));
        }
        if self.top_k_cognitive == 0 || self.top_k_imaging == 0 {
            return Err(Error::Config("top-k values must be at least 1".into()));
        }
        if self.d_keep == Some(0) {
            return Err(Error::Config("d_keep must be at least 1 when set".into()));
        }
        LambdaRule::from_str(&self.lambda_rule)?;
        for (label, rule) in [
            ("cognitive_lambda_rule", &self.cognitive_lambda_rule),
            ("disease_lambda_rule", &self.disease_lambda_rule),
            ("imaging_lambda_rule", &self.imaging_lambda_rule),
        ] {
            if let Some(rule) = rule {
                LambdaRule::from_str(rule)
                    .map_err(|_| Error::Config(format!("{}: unknown rule '{}'", label, rule)))?;
            }
        }
        if self.merge != "union" && self.merge != "intersection" {
            return Err(Error::Config(format!(
                "merge must be 'union' or 'intersection', got '{}'",
                self.merge
            )));
        }
        if !(self.logit_epsilon > 0.0 && self.logit_epsilon < 0.5) {
            return Err(Error::Config(format!(
                "logit_epsilon must lie in (0, 0.5), got {}",
                self.logit_epsilon
            )));
        }
        if !(self.correlation_threshold > 0.0 && self.correlation_threshold <= 1.0) {
            return Err(Error::Config(format!(
                "correlation_threshold must lie in (0, 1], got {}",
                self.correlation_threshold
            )));
        }
        if self.disease_levels.len() < 2 {
            return Err(Error::Config("need at least 2 disease levels".into()));
        }
        let distinct: BTreeSet<&String> = self.disease_levels.iter().collect();
        if distinct.len() != self.disease_levels.len() {
            return Err(Error::Config("disease levels repeat".into()));
        }
        if !self.disease_levels.contains(&self.reference_level) {
            return Err(Error::Config(format!(
                "reference_level '{}' is not among the disease levels",
                self.reference_level
            )));
        }
        if self.cognitive_outcomes.is_empty() {
            return Err(Error::Config("need at least one cognitive outcome".into()));
        }
        let distinct: BTreeSet<&String> = self.cognitive_outcomes.iter().collect();
        if distinct.len() != self.cognitive_outcomes.len() {
            return Err(Error::Config("cognitive outcomes repeat".into()));
        }
        if self.gene_prefix.is_empty() {
            return Err(Error::Config("gene_prefix must be non-empty".into()));
        }
        Ok(())
    }

    fn rule(&self) -> LambdaRule {
        LambdaRule::from_str(&self.lambda_rule).expect("validated")
    }

    fn stage_rule(&self, over: &Option<String>) -> LambdaRule {
        match over {
            Some(s) => LambdaRule::from_str(s).expect("validated"),
            None => self.rule(),
        }
    }
}

/// ln(v/(1−v)) with v clamped into [epsilon, 1−epsilon]. Strictly
/// increasing on the clamped domain; boundary values 0 and 1 are absorbed
/// by the clamp instead of producing infinities.
pub fn logit_transform(v: f64, epsilon: f64) -> f64 {
    let c = v.max(epsilon).min(1.0 - epsilon);
    (c / (1.0 - c)).ln()
}

/// Stage seeds derive from the master seed and a fixed salt, so stage
/// randomness is independent and stable under configuration changes
/// elsewhere in the run.
pub fn derive_seed(master: u64, salt: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(salt.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Returns a dataset with the named columns replaced by their logit
/// transforms. Values must lie in [0, 1]; the clamp handles the boundary.
fn logit_dataset(d: &Dataset, names: &[String], epsilon: f64) -> Result<Dataset> {
    let targets: BTreeSet<&String> = names.iter().collect();
    let mut columns = Vec::with_capacity(d.columns().len());
    for col in d.columns() {
        if !targets.contains(&col.name) {
            columns.push(col.clone());
            continue;
        }
        let (values, missing) = match &col.data {
            ColumnValues::Numeric { values, missing } => (values, missing),
            ColumnValues::Text { .. } => {
                return Err(Error::InvalidInput(format!(
                    "imaging response '{}' is not numeric",
                    col.name
                )))
            }
        };
        let mut transformed = Vec::with_capacity(values.len());
        for (i, (&v, &m)) in values.iter().zip(missing).enumerate() {
            if m {
                transformed.push(f64::NAN);
                continue;
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidInput(format!(
                    "imaging response '{}' has value {} at row {} outside [0, 1]",
                    col.name, v, i
                )));
            }
            transformed.push(logit_transform(v, epsilon));
        }
        columns.push(Column::numeric_with_missing(
            col.name.clone(),
            col.role,
            transformed,
            missing.clone(),
        ));
    }
    Dataset::from_columns(columns)
}

/// Cross-validated penalty bookkeeping for one fitted model.
#[derive(Clone, Debug, Serialize)]
pub struct LambdaChoice {
    pub rule: String,
    pub lambda_min: f64,
    pub lambda_1se: f64,
    pub selected: f64,
    pub n_nonzero: usize,
}

fn lambda_choice(cv: &CvResult, rule: LambdaRule) -> LambdaChoice {
    LambdaChoice {
        rule: rule.as_str().to_string(),
        lambda_min: cv.lambda_min,
        lambda_1se: cv.lambda_1se,
        selected: cv.selected_lambda(rule),
        n_nonzero: cv.selected_point(rule).n_nonzero,
    }
}

/// Output of the classical low-dimensional stage.
#[derive(Clone, Debug)]
pub struct LowDimStage {
    /// Stratified cohort table, present when the disease column carries the
    /// stratum role.
    pub summary_tsv: Option<String>,
    pub filter: CorrelationFilter,
    /// Clinical covariates that actually entered the regressions: retained
    /// by the filter and not constant.
    pub clinical_used: Vec<String>,
    pub ols: Vec<(String, OlsFit)>,
    pub ordinal: OrdinalFit,
    pub forest: Vec<ForestRow>,
    pub n_rows: usize,
}

/// Screen → lasso → report chain for one cognitive outcome.
#[derive(Clone, Debug)]
pub struct OutcomeSelection {
    pub outcome: String,
    pub n_rows: usize,
    pub d_keep: usize,
    pub screen: ScreenResult,
    pub lambda: LambdaChoice,
    /// Nonzero genes at the selected penalty, largest |coefficient| first,
    /// truncated to the configured top-k.
    pub top_genes: Vec<(String, f64)>,
}

#[derive(Clone, Debug)]
pub struct CognitiveStage {
    pub selections: Vec<OutcomeSelection>,
    /// Genes selected for every configured outcome.
    pub intersection: BTreeSet<String>,
}

#[derive(Clone, Debug)]
pub struct DiseaseStage {
    pub n_rows: usize,
    pub screens: Vec<((String, String), ScreenResult)>,
    /// Merged screened set (union by default) that entered the multinomial
    /// fit, in name order.
    pub merged: Vec<String>,
    pub lambda: LambdaChoice,
    pub fit: MultinomialFit,
    /// Per-class nonzero coefficients, largest |coefficient| first.
    pub per_class: Vec<(String, Vec<(String, f64)>)>,
    pub union: BTreeSet<String>,
    pub intersection: BTreeSet<String>,
}

#[derive(Clone, Debug)]
pub struct RegionSummary {
    pub region: Region,
    pub responses: Vec<String>,
    pub d_keep: usize,
    pub screen: ScreenResult,
    pub lambda: LambdaChoice,
    /// Row-norm ranking of nonzero genes, truncated to the configured top-k.
    pub top_genes: Vec<(String, f64)>,
}

#[derive(Clone, Debug)]
pub struct ImagingStage {
    pub n_rows: usize,
    pub regions: Vec<RegionSummary>,
    /// Pairwise and three-way intersections of the regions' top-gene sets,
    /// labeled by '&'-joined region slugs.
    pub intersections: Vec<(String, BTreeSet<String>)>,
}

/// Run description stored as `metadata.json`: everything needed to rerun
/// bit-identically (with the same input data), and nothing machine-local.
#[derive(Clone, Debug, Serialize)]
pub struct RunMetadata {
    pub spec_version: u32,
    pub toolkit: String,
    pub toolkit_version: String,
    pub config: PipelineConfig,
    pub config_sha256: String,
    pub stages_run: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partition: Option<BTreeMap<String, String>>,
    pub lambda_choices: BTreeMap<String, LambdaChoice>,
}

/// Everything a finished run produced: structured stage outputs plus the
/// rendered report tree (relative path → bytes, `manifest.json` included).
#[derive(Debug)]
pub struct PipelineReport {
    pub metadata: RunMetadata,
    pub low_dim: Option<LowDimStage>,
    pub cognitive: Option<CognitiveStage>,
    pub disease: Option<DiseaseStage>,
    pub imaging: Option<ImagingStage>,
    pub files: BTreeMap<String, Vec<u8>>,
}

impl PipelineReport {
    /// Relative path → SHA-256 content hash for every file except the
    /// manifest itself.
    pub fn manifest(&self) -> BTreeMap<String, String> {
        self.files
            .iter()
            .filter(|(path, _)| path.as_str() != "manifest.json")
            .map(|(path, bytes)| (path.clone(), sha256_hex(bytes)))
            .collect()
    }

    /// Writes the report tree to `dir` atomically: files land in a hidden
    /// sibling directory first, which is renamed into place only once every
    /// byte is on disk. `dir` must not already exist.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        if dir.exists() {
            return Err(Error::InvalidInput(format!(
                "output path '{}' already exists",
                dir.display()
            )));
        }
        let name = dir
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "output path '{}' has no usable directory name",
                    dir.display()
                ))
            })?;
        let parent = dir.parent().unwrap_or_else(|| Path::new(""));
        let staging = parent.join(format!(".{}.partial", name));
        if staging.exists() {
            std::fs::remove_dir_all(&staging)?;
        }
        let write_all = || -> Result<()> {
            std::fs::create_dir_all(&staging)?;
            for (rel, bytes) in &self.files {
                let path = staging.join(rel);
                if let Some(p) = path.parent() {
                    std::fs::create_dir_all(p)?;
                }
                std::fs::write(&path, bytes)?;
            }
            std::fs::rename(&staging, dir)?;
            Ok(())
        };
        let outcome = write_all();
        if outcome.is_err() {
            let _ = std::fs::remove_dir_all(&staging);
        }
        outcome
    }
}

fn gene_columns(d: &Dataset, config: &PipelineConfig) -> Result<Vec<String>> {
    let genes = d.names_with_prefix(&config.gene_prefix);
    if genes.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no predictor columns start with '{}'",
            config.gene_prefix
        )));
    }
    Ok(genes)
}

fn intersect_all(sets: &[BTreeSet<String>]) -> BTreeSet<String> {
    let mut iter = sets.iter();
    let mut acc = match iter.next() {
        Some(first) => first.clone(),
        None => return BTreeSet::new(),
    };
    for s in iter {
        acc = acc.intersection(s).cloned().collect();
    }
    acc
}

/// Classical regressions on the complete-case cohort: the stratified
/// summary table, the collinearity filter over clinical covariates, one OLS
/// fit per cognitive outcome (clinical covariates plus disease-state
/// dummies against the declared reference), and the proportional-odds fit
/// of disease state on cognitive scores and clinical covariates.
pub fn run_low_dim_stage(d: &Dataset, config: &PipelineConfig) -> Result<LowDimStage> {
    low_dim_inner(d, config).map_err(|e| e.in_stage("low_dim"))
}

fn low_dim_inner(d: &Dataset, config: &PipelineConfig) -> Result<LowDimStage> {
    let mut required = config.cognitive_outcomes.clone();
    required.extend(config.clinical_predictors.iter().cloned());
    required.push(config.disease_column.clone());
    let rows = d.complete_rows(&required)?;
    let p_low = config.clinical_predictors.len() + config.disease_levels.len() - 1;
    if rows.len() < p_low + 3 {
        return Err(Error::InvalidInput(format!(
            "{} complete rows cannot support {} low-dimensional terms",
            rows.len(),
            p_low
        )));
    }
    let sub = d.subset_rows(&rows)?;

    let summary_tsv = if sub.column(&config.disease_column)?.role == Role::Stratum {
        Some(summarize_cohort(&sub, &config.disease_column)?.to_tsv())
    } else {
        None
    };

    let filter = correlation_filter(&sub, &config.clinical_predictors, config.correlation_threshold)?;
    // constants stay in the filter report but cannot enter a design that
    // already has an intercept
    let clinical_used: Vec<String> = filter
        .retained
        .iter()
        .filter(|n| !filter.constant.contains(n))
        .cloned()
        .collect();

    let outcome_cat =
        CategoricalOutcome::from_text_column(&sub, &config.disease_column, &config.disease_levels)?;
    outcome_cat.require_min_count(1)?;
    let dummies = outcome_cat.dummy_columns(&config.disease_column, &config.reference_level)?;

    let mut ols = Vec::with_capacity(config.cognitive_outcomes.len());
    for outcome in &config.cognitive_outcomes {
        let (y, _) = sub.numeric(outcome)?;
        let mut x_cols = sub.numeric_matrix(&clinical_used)?;
        let mut names = clinical_used.clone();
        for (dname, dvalues) in &dummies {
            names.push(dname.clone());
            x_cols.push(dvalues.clone());
        }
        let fit = fit_ols_raw(y, &x_cols, &names)?;
        ols.push((outcome.clone(), fit));
    }

    let mut ordinal_predictors = config.cognitive_outcomes.clone();
    ordinal_predictors.extend(clinical_used.iter().cloned());
    let ordinal = fit_ordinal(&sub, &outcome_cat, &ordinal_predictors)?;
    let forest = forest_data(&ordinal, 0.95)?;

    Ok(LowDimStage {
        summary_tsv,
        filter,
        clinical_used,
        ols,
        ordinal,
        forest,
        n_rows: sub.n_rows(),
    })
}

/// Gene selection for each cognitive outcome: marginal screen, 10-fold
/// cross-validated Gaussian lasso, top-k nonzero report, and the
/// intersection of the selected sets across outcomes.
pub fn run_cognitive_stage(d: &Dataset, config: &PipelineConfig) -> Result<CognitiveStage> {
    cognitive_inner(d, config).map_err(|e| e.in_stage("cognitive"))
}

fn cognitive_inner(d: &Dataset, config: &PipelineConfig) -> Result<CognitiveStage> {
    let genes = gene_columns(d, config)?;
    let rule = config.stage_rule(&config.cognitive_lambda_rule);
    let mut selections = Vec::with_capacity(config.cognitive_outcomes.len());
    let mut selected_sets: Vec<BTreeSet<String>> = Vec::new();
    for outcome in &config.cognitive_outcomes {
        let mut required = vec![outcome.clone()];
        required.extend(genes.iter().cloned());
        let rows = d.complete_rows(&required)?;
        if rows.len() < config.folds.max(3) {
            return Err(Error::InvalidInput(format!(
                "outcome '{}': {} complete rows are too few for {}-fold selection",
                outcome,
                rows.len(),
                config.folds
            )));
        }
        let sub = d.subset_rows(&rows)?;
        let n_sub = sub.n_rows();
        let d_keep = config.d_keep.unwrap_or_else(|| default_d_keep(n_sub));
        let screen = sis_screen(&sub, outcome, &genes, d_keep)?;
        let folds = make_folds(
            n_sub,
            config.folds,
            derive_seed(config.seed, &format!("cognitive/{}", outcome)),
        )?;
        let cv = cv_lasso(&sub, outcome, &screen.kept, &folds, &PathConfig::default())?;
        let selected = cv.selected_lambda(rule);
        let top_genes = nonzero_report(&cv.path, selected, config.top_k_cognitive)?;
        selected_sets.push(top_genes.iter().map(|(n, _)| n.clone()).collect());
        selections.push(OutcomeSelection {
            outcome: outcome.clone(),
            n_rows: n_sub,
            d_keep,
            screen,
            lambda: lambda_choice(&cv, rule),
            top_genes,
        });
    }
    let intersection = intersect_all(&selected_sets);
    Ok(CognitiveStage {
        selections,
        intersection,
    })
}

/// Gene selection across disease states: all pairwise two-sample screens,
/// merge of the kept sets, one cross-validated multinomial fit on the
/// merged set, and the union/intersection of per-class nonzero patterns.
pub fn run_disease_stage(d: &Dataset, config: &PipelineConfig) -> Result<DiseaseStage> {
    disease_inner(d, config).map_err(|e| e.in_stage("disease"))
}

fn disease_inner(d: &Dataset, config: &PipelineConfig) -> Result<DiseaseStage> {
    let genes = gene_columns(d, config)?;
    let mut required = genes.clone();
    required.push(config.disease_column.clone());
    let rows = d.complete_rows(&required)?;
    if rows.len() < config.folds.max(3) {
        return Err(Error::InvalidInput(format!(
            "{} complete rows are too few for {}-fold selection",
            rows.len(),
            config.folds
        )));
    }
    let sub = d.subset_rows(&rows)?;
    let outcome =
        CategoricalOutcome::from_text_column(&sub, &config.disease_column, &config.disease_levels)?;
    outcome.require_min_count(2)?;

    let screens = pairwise_screens(&sub, &outcome, &genes, config.d_keep)?;
    let mut merged_set: Option<BTreeSet<String>> = None;
    for (_, screen) in &screens {
        let kept: BTreeSet<String> = screen.kept.iter().cloned().collect();
        merged_set = Some(match merged_set {
            None => kept,
            Some(acc) => {
                if config.merge == "union" {
                    acc.union(&kept).cloned().collect()
                } else {
                    acc.intersection(&kept).cloned().collect()
                }
            }
        });
    }
    let merged_set = merged_set.unwrap_or_default();
    if merged_set.is_empty() {
        return Err(Error::InvalidInput(format!(
            "pairwise screening produced an empty {} of kept genes",
            config.merge
        ))
        .in_stage("screening"));
    }
    let merged: Vec<String> = merged_set.into_iter().collect();

    let folds = make_folds(
        sub.n_rows(),
        config.folds,
        derive_seed(config.seed, "disease"),
    )?;
    let cv = cv_multinomial(&sub, &outcome, &merged, &folds, &PathConfig::default())?;
    let rule = config.stage_rule(&config.disease_lambda_rule);
    let fit = MultinomialFit::from_path(&cv.path, cv.selected_lambda(rule))?;
    let class_sets = fit.per_class_nonzero();
    let (union, intersection) = gene_sets(&class_sets)?;

    let mut per_class = Vec::with_capacity(fit.class_labels.len());
    for label in &fit.class_labels {
        let mut rows: Vec<(String, f64)> = fit
            .coefficients
            .iter()
            .filter(|(_, class, _)| class == label)
            .map(|(pred, _, value)| (pred.clone(), *value))
            .collect();
        rows.sort_by(|a, b| {
            b.1.abs()
                .partial_cmp(&a.1.abs())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.0.cmp(&b.0))
        });
        per_class.push((label.clone(), rows));
    }

    Ok(DiseaseStage {
        n_rows: sub.n_rows(),
        screens,
        merged,
        lambda: lambda_choice(&cv, rule),
        fit,
        per_class,
        union,
        intersection,
    })
}

/// Region-partitioned imaging genetics: logit-transform the responses,
/// screen genes per region, fit a cross-validated multi-task group lasso
/// per region with the (smaller) imaging fold count, rank gene rows, and
/// intersect the regional top-k sets pairwise and three ways.
pub fn run_imaging_stage(
    d: &Dataset,
    partition: &RegionPartition,
    config: &PipelineConfig,
) -> Result<ImagingStage> {
    imaging_inner(d, partition, config).map_err(|e| e.in_stage("imaging"))
}

fn imaging_inner(
    d: &Dataset,
    partition: &RegionPartition,
    config: &PipelineConfig,
) -> Result<ImagingStage> {
    let genes = gene_columns(d, config)?;
    let fa_names = partition.all_responses();
    for name in &fa_names {
        if !d.has_column(name) {
            return Err(Error::InvalidInput(format!(
                "partition response '{}' is not a dataset column",
                name
            )));
        }
    }
    let mut required = genes.clone();
    required.extend(fa_names.iter().cloned());
    let rows = d.complete_rows(&required)?;
    if rows.len() < config.imaging_folds.max(3) {
        return Err(Error::InvalidInput(format!(
            "{} complete imaging rows are too few for {}-fold selection",
            rows.len(),
            config.imaging_folds
        )));
    }
    let sub = d.subset_rows(&rows)?;
    let logit = logit_dataset(&sub, &fa_names, config.logit_epsilon)?;
    let n_sub = logit.n_rows();
    let d_keep = config.d_keep.unwrap_or_else(|| default_d_keep(n_sub));
    let rule = config.stage_rule(&config.imaging_lambda_rule);

    let shared_screen = if config.per_region_screening {
        None
    } else {
        Some(sis_screen_multi(&logit, &fa_names, &genes, d_keep)?)
    };

    let mut regions = Vec::with_capacity(Region::ALL.len());
    for region in Region::ALL {
        let responses = partition.responses(region);
        let screen = match &shared_screen {
            Some(s) => s.clone(),
            None => sis_screen_multi(&logit, &responses, &genes, d_keep)?,
        };
        let folds = make_folds(
            n_sub,
            config.imaging_folds,
            derive_seed(config.seed, &format!("imaging/{}", region.slug())),
        )?;
        let cv = cv_multitask(&logit, &responses, &screen.kept, &folds, &PathConfig::default())?;
        let fit = MultiTaskFit::from_path(&cv.path, cv.selected_lambda(rule))?;
        let top_genes = rank_rows(&fit, config.top_k_imaging);
        regions.push(RegionSummary {
            region,
            responses,
            d_keep,
            screen,
            lambda: lambda_choice(&cv, rule),
            top_genes,
        });
    }

    let sets: Vec<BTreeSet<String>> = regions
        .iter()
        .map(|r| r.top_genes.iter().map(|(n, _)| n.clone()).collect())
        .collect();
    let label = |idx: &[usize]| -> String {
        idx.iter()
            .map(|&i| Region::ALL[i].slug())
            .collect::<Vec<_>>()
            .join("&")
    };
    let pick = |idx: &[usize]| -> BTreeSet<String> {
        let chosen: Vec<BTreeSet<String>> = idx.iter().map(|&i| sets[i].clone()).collect();
        intersect_all(&chosen)
    };
    let intersections = vec![
        (label(&[0, 1]), pick(&[0, 1])),
        (label(&[0, 2]), pick(&[0, 2])),
        (label(&[1, 2]), pick(&[1, 2])),
        (label(&[0, 1, 2]), pick(&[0, 1, 2])),
    ];

    Ok(ImagingStage {
        n_rows: n_sub,
        regions,
        intersections,
    })
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn gene_list_bytes(set: &BTreeSet<String>) -> Vec<u8> {
    let mut out = String::new();
    for name in set {
        out.push_str(name);
        out.push('\n');
    }
    out.into_bytes()
}

fn emit_low_dim(files: &mut BTreeMap<String, Vec<u8>>, stage: &LowDimStage) {
    if let Some(summary) = &stage.summary_tsv {
        files.insert("low_dim/cohort_summary.tsv".into(), summary.clone().into_bytes());
    }
    let mut filter_table = TsvTable::new(vec!["name", "status", "correlated_with", "correlation"]);
    for name in stage
        .filter
        .retained
        .iter()
        .chain(stage.filter.dropped.iter().map(|d| &d.name))
    {
        if let Some(dropped) = stage.filter.dropped.iter().find(|d| &d.name == name) {
            filter_table.push(vec![
                name.clone(),
                "dropped".into(),
                dropped.correlated_with.clone(),
                fmt_g6(dropped.correlation),
            ]);
        } else if stage.filter.constant.contains(name) {
            filter_table.push(vec![name.clone(), "constant".into(), String::new(), String::new()]);
        } else {
            filter_table.push(vec![name.clone(), "retained".into(), String::new(), String::new()]);
        }
    }
    files.insert(
        "low_dim/correlation_filter.tsv".into(),
        filter_table.to_tsv().into_bytes(),
    );
    let mut stats = TsvTable::new(vec!["model", "statistic", "value"]);
    for (outcome, fit) in &stage.ols {
        files.insert(
            format!("low_dim/ols_{}.tsv", sanitize(outcome)),
            fit.to_tsv().into_bytes(),
        );
        let model = format!("ols_{}", sanitize(outcome));
        stats.push(vec![model.clone(), "n".into(), stage.n_rows.to_string()]);
        stats.push(vec![model.clone(), "r_squared".into(), fmt_g6(fit.r_squared)]);
        stats.push(vec![
            model.clone(),
            "adjusted_r_squared".into(),
            fmt_g6(fit.adjusted_r_squared),
        ]);
        stats.push(vec![
            model,
            "residual_df".into(),
            fit.residual_df.to_string(),
        ]);
    }
    stats.push(vec![
        "ordinal".into(),
        "log_likelihood".into(),
        fmt_g6(stage.ordinal.log_likelihood),
    ]);
    stats.push(vec![
        "ordinal".into(),
        "iterations".into(),
        stage.ordinal.iterations.to_string(),
    ]);
    files.insert("low_dim/fit_stats.tsv".into(), stats.to_tsv().into_bytes());
    files.insert(
        "low_dim/ordinal_forest.tsv".into(),
        forest_tsv(&stage.forest).into_bytes(),
    );
}

fn emit_cognitive(files: &mut BTreeMap<String, Vec<u8>>, stage: &CognitiveStage) {
    for sel in &stage.selections {
        let slug = sanitize(&sel.outcome);
        files.insert(
            format!("cognitive/screen_{}.tsv", slug),
            sel.screen.to_tsv().into_bytes(),
        );
        files.insert(
            format!("cognitive/top_genes_{}.tsv", slug),
            nonzero_report_tsv(&sel.top_genes).into_bytes(),
        );
    }
    files.insert(
        "cognitive/intersection.txt".into(),
        gene_list_bytes(&stage.intersection),
    );
}

fn emit_disease(files: &mut BTreeMap<String, Vec<u8>>, stage: &DiseaseStage) {
    for ((a, b), screen) in &stage.screens {
        files.insert(
            format!("disease/screen_{}_vs_{}.tsv", sanitize(a), sanitize(b)),
            screen.to_tsv().into_bytes(),
        );
    }
    files.insert(
        "disease/merged_genes.txt".into(),
        gene_list_bytes(&stage.merged.iter().cloned().collect()),
    );
    for (label, rows) in &stage.per_class {
        let mut table = TsvTable::new(vec!["rank", "name", "coefficient"]);
        for (i, (name, coef)) in rows.iter().enumerate() {
            table.push(vec![(i + 1).to_string(), name.clone(), fmt_g6(*coef)]);
        }
        files.insert(
            format!("disease/class_{}.tsv", sanitize(label)),
            table.to_tsv().into_bytes(),
        );
    }
    files.insert("disease/union.txt".into(), gene_list_bytes(&stage.union));
    files.insert(
        "disease/intersection.txt".into(),
        gene_list_bytes(&stage.intersection),
    );
}

fn emit_imaging(files: &mut BTreeMap<String, Vec<u8>>, stage: &ImagingStage) {
    for region in &stage.regions {
        let slug = region.region.slug();
        files.insert(
            format!("imaging/{}/screen.tsv", slug),
            region.screen.to_tsv().into_bytes(),
        );
        files.insert(
            format!("imaging/{}/top_genes.tsv", slug),
            rank_rows_tsv(&region.top_genes).into_bytes(),
        );
    }
    let mut table = TsvTable::new(vec!["regions", "count", "genes"]);
    for (label, set) in &stage.intersections {
        let genes: Vec<&str> = set.iter().map(|s| s.as_str()).collect();
        table.push(vec![
            label.clone(),
            set.len().to_string(),
            genes.join(","),
        ]);
    }
    files.insert(
        "imaging/intersections.tsv".into(),
        table.to_tsv().into_bytes(),
    );
}

/// Runs the enabled stages in order and assembles the report tree. Nothing
/// touches the filesystem here; pair with [`PipelineReport::write_to`].
pub fn run_full_pipeline(
    d: &Dataset,
    partition: Option<&RegionPartition>,
    config: &PipelineConfig,
) -> Result<PipelineReport> {
    config.validate()?;
    if config.stages.imaging && partition.is_none() {
        return Err(Error::Config(
            "imaging stage is enabled but no region partition was provided".into(),
        ));
    }

    let low_dim = if config.stages.low_dim {
        Some(run_low_dim_stage(d, config)?)
    } else {
        None
    };
    let cognitive = if config.stages.cognitive {
        Some(run_cognitive_stage(d, config)?)
    } else {
        None
    };
    let disease = if config.stages.disease {
        Some(run_disease_stage(d, config)?)
    } else {
        None
    };
    let imaging = if config.stages.imaging {
        Some(run_imaging_stage(
            d,
            partition.expect("checked above"),
            config,
        )?)
    } else {
        None
    };

    let mut lambda_choices = BTreeMap::new();
    if let Some(stage) = &cognitive {
        for sel in &stage.selections {
            lambda_choices.insert(
                format!("cognitive/{}", sanitize(&sel.outcome)),
                sel.lambda.clone(),
            );
        }
    }
    if let Some(stage) = &disease {
        lambda_choices.insert("disease/multinomial".into(), stage.lambda.clone());
    }
    if let Some(stage) = &imaging {
        for region in &stage.regions {
            lambda_choices.insert(
                format!("imaging/{}", region.region.slug()),
                region.lambda.clone(),
            );
        }
    }

    let mut stages_run = Vec::new();
    for (name, on) in [
        ("low_dim", config.stages.low_dim),
        ("cognitive", config.stages.cognitive),
        ("disease", config.stages.disease),
        ("imaging", config.stages.imaging),
    ] {
        if on {
            stages_run.push(name.to_string());
        }
    }

    let config_bytes = to_json_bytes(config)?;
    let metadata = RunMetadata {
        spec_version: 1,
        toolkit: "sparsereg".into(),
        toolkit_version: env!("CARGO_PKG_VERSION").into(),
        config: config.clone(),
        config_sha256: sha256_hex(&config_bytes),
        stages_run,
        partition: partition.map(|p| p.as_map()),
        lambda_choices,
    };

    let mut files = BTreeMap::new();
    if let Some(stage) = &low_dim {
        emit_low_dim(&mut files, stage);
    }
    if let Some(stage) = &cognitive {
        emit_cognitive(&mut files, stage);
    }
    if let Some(stage) = &disease {
        emit_disease(&mut files, stage);
    }
    if let Some(stage) = &imaging {
        emit_imaging(&mut files, stage);
    }
    files.insert("metadata.json".into(), to_json_bytes(&metadata)?);

    let mut report = PipelineReport {
        metadata,
        low_dim,
        cognitive,
        disease,
        imaging,
        files,
    };
    let manifest = report.manifest();
    report
        .files
        .insert("manifest.json".into(), to_json_bytes(&manifest)?);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{simulate_cohort, GeneratorSpec};

    #[test]
    fn logit_examples() {
        assert_eq!(logit_transform(0.5, 1e-6), 0.0);
        assert!((logit_transform(0.75, 1e-6) - 3.0_f64.ln()).abs() < 1e-6);
        let clamped = logit_transform(1.0, 1e-6);
        let expected = ((1.0 - 1e-6) / 1e-6_f64).ln();
        assert!((clamped - expected).abs() < 1e-9);
        assert!((clamped - 13.8155).abs() < 1e-3);
    }

    #[test]
    fn logit_is_strictly_monotone_on_clamped_domain() {
        let eps = 1e-4;
        let mut prev = f64::NEG_INFINITY;
        for i in 1..100 {
            let v = i as f64 / 100.0;
            let t = logit_transform(v, eps);
            assert!(t > prev);
            prev = t;
        }
    }

    #[test]
    fn derive_seed_is_stable_and_salted() {
        assert_eq!(derive_seed(7, "disease"), derive_seed(7, "disease"));
        assert_ne!(derive_seed(7, "disease"), derive_seed(8, "disease"));
        assert_ne!(derive_seed(7, "disease"), derive_seed(7, "cognitive/mmse"));
    }

    #[test]
    fn partition_reference_counts_enforced() {
        let names: Vec<String> = (1..=57).map(|i| format!("r{:02}", i)).collect();
        let ok = RegionPartition::from_ordered_names(&names, [23, 11, 23], false).unwrap();
        assert_eq!(ok.counts(), [23, 11, 23]);
        assert_eq!(ok.responses(Region::CorpusCallosum).len(), 11);

        let short: Vec<String> = (1..=6).map(|i| format!("r{}", i)).collect();
        assert!(RegionPartition::from_ordered_names(&short, [2, 2, 2], false).is_err());
        let custom = RegionPartition::from_ordered_names(&short, [2, 2, 2], true).unwrap();
        assert_eq!(custom.counts(), [2, 2, 2]);
    }

    #[test]
    fn partition_csv_roundtrip_and_errors() {
        let names: Vec<String> = (1..=57).map(|i| format!("fa{:02}", i)).collect();
        let part = RegionPartition::from_ordered_names(&names, [23, 11, 23], false).unwrap();
        let csv = part.to_csv();
        let back = RegionPartition::parse_csv(csv.as_bytes(), false).unwrap();
        assert_eq!(back.to_csv(), csv);

        assert!(RegionPartition::parse_csv(b"response,region\n", false).is_err());
        assert!(RegionPartition::parse_csv(b"a,b\nx,LeftHemisphere\n", false).is_err());
        assert!(
            RegionPartition::parse_csv(b"response,region\nx,Cerebellum\n", true).is_err(),
            "unknown region label must fail"
        );
        assert!(
            RegionPartition::parse_csv(
                b"response,region\nx,LeftHemisphere\nx,CorpusCallosum\ny,RightHemisphere\n",
                true
            )
            .is_err(),
            "duplicate response must fail"
        );
    }

    #[test]
    fn config_defaults_and_validation() {
        let config = PipelineConfig::parse_json(br#"{"spec_version":1,"seed":7}"#).unwrap();
        assert_eq!(config.folds, 10);
        assert_eq!(config.imaging_folds, 4);
        assert_eq!(config.top_k_cognitive, 75);
        assert_eq!(config.top_k_imaging, 50);
        assert_eq!(config.lambda_rule, "min");
        assert_eq!(config.merge, "union");
        assert_eq!(config.logit_epsilon, 1e-6);
        assert!(config.stages.imaging);

        assert!(PipelineConfig::parse_json(br#"{"spec_version":2,"seed":7}"#).is_err());
        assert!(
            PipelineConfig::parse_json(br#"{"spec_version":1,"seed":7,"merge":"both"}"#).is_err()
        );
        assert!(PipelineConfig::parse_json(
            br#"{"spec_version":1,"seed":7,"lambda_rule":"best"}"#
        )
        .is_err());
        assert!(PipelineConfig::parse_json(
            br#"{"spec_version":1,"seed":7,"reference_level":"XX"}"#
        )
        .is_err());
    }

    fn small_cohort(seed: u64) -> (Dataset, RegionPartition, PipelineConfig) {
        let mut spec = GeneratorSpec::small_shape(seed);
        spec.n = 150;
        spec.n_gene_rows = 120;
        spec.n_imaging_rows = 60;
        let (d, _) = simulate_cohort(&spec, seed).unwrap();
        let partition =
            RegionPartition::from_ordered_names(&spec.fa_names(), spec.fa_region_counts, false)
                .unwrap();
        let mut config = PipelineConfig::with_seed(seed);
        config.folds = 4;
        config.imaging_folds = 3;
        config.d_keep = Some(12);
        (d, partition, config)
    }

    #[test]
    fn full_run_is_deterministic_and_complete() {
        let (d, partition, config) = small_cohort(11);
        let a = run_full_pipeline(&d, Some(&partition), &config).unwrap();
        let b = run_full_pipeline(&d, Some(&partition), &config).unwrap();
        assert_eq!(a.files, b.files, "same data, config, seed → same bytes");

        for path in [
            "manifest.json",
            "metadata.json",
            "low_dim/ols_mmse.tsv",
            "low_dim/ordinal_forest.tsv",
            "cognitive/intersection.txt",
            "disease/union.txt",
            "disease/intersection.txt",
            "imaging/left_hemisphere/top_genes.tsv",
            "imaging/corpus_callosum/screen.tsv",
            "imaging/intersections.tsv",
        ] {
            assert!(a.files.contains_key(path), "missing {}", path);
        }
        assert_eq!(
            a.disease.as_ref().unwrap().screens.len(),
            6,
            "4 levels → 6 pairwise screens"
        );

        let disease = a.disease.as_ref().unwrap();
        assert!(disease.union.is_superset(&disease.intersection));

        let imaging = a.imaging.as_ref().unwrap();
        let three_way = &imaging.intersections.last().unwrap().1;
        for region in &imaging.regions {
            let top: BTreeSet<String> =
                region.top_genes.iter().map(|(n, _)| n.clone()).collect();
            assert!(three_way.is_subset(&top));
        }

        let manifest = a.manifest();
        assert_eq!(manifest.len(), a.files.len() - 1);
        for (path, hash) in &manifest {
            assert_eq!(hash, &sha256_hex(&a.files[path]));
        }
    }

    #[test]
    fn stage_isolation_and_toggles() {
        let (d, partition, config) = small_cohort(13);
        let full = run_full_pipeline(&d, Some(&partition), &config).unwrap();

        let mut tweaked = config.clone();
        tweaked.imaging_folds = 2;
        tweaked.top_k_imaging = 5;
        let moved = run_full_pipeline(&d, Some(&partition), &tweaked).unwrap();
        for (path, bytes) in &full.files {
            if path.starts_with("cognitive/") || path.starts_with("disease/") || path.starts_with("low_dim/") {
                assert_eq!(
                    Some(bytes),
                    moved.files.get(path),
                    "imaging config must not move {}",
                    path
                );
            }
        }

        let mut no_imaging = config.clone();
        no_imaging.stages.imaging = false;
        let partial = run_full_pipeline(&d, None, &no_imaging).unwrap();
        assert!(partial.imaging.is_none());
        assert!(!partial.files.keys().any(|p| p.starts_with("imaging/")));
        for (path, bytes) in &full.files {
            if path.starts_with("cognitive/") || path.starts_with("disease/") || path.starts_with("low_dim/") {
                assert_eq!(Some(bytes), partial.files.get(path));
            }
        }
    }

    #[test]
    fn imaging_without_partition_is_config_error() {
        let (d, _, config) = small_cohort(17);
        let err = run_full_pipeline(&d, None, &config).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(!err.is_modeling_failure());
    }

    #[test]
    fn write_to_is_atomic_and_refuses_existing() {
        let (d, partition, mut config) = small_cohort(19);
        config.stages.low_dim = false;
        config.stages.disease = false;
        config.stages.imaging = false;
        let report = run_full_pipeline(&d, Some(&partition), &config).unwrap();

        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("report");
        report.write_to(&out).unwrap();
        assert!(out.join("manifest.json").exists());
        assert!(out.join("cognitive/intersection.txt").exists());
        let staging = tmp.path().join(".report.partial");
        assert!(!staging.exists(), "staging directory must not survive");

        let again = report.write_to(&out);
        assert!(again.is_err(), "existing target must be refused");
    }

    #[test]
    fn intersection_members_appear_in_union() {
        let (d, partition, config) = small_cohort(23);
        let report = run_full_pipeline(&d, Some(&partition), &config).unwrap();
        let disease = report.disease.as_ref().unwrap();
        for gene in &disease.intersection {
            assert!(disease.union.contains(gene));
        }
        let merged: BTreeSet<String> = disease.merged.iter().cloned().collect();
        for gene in &disease.union {
            assert!(merged.contains(gene), "selected genes come from the screen");
        }
    }
}
