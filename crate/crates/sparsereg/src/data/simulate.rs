use super::{Column, Dataset, Role, Schema};
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Planted effect coefficients, one map per outcome family. Keys name the
/// driving column: a clinical column, a `gene_*` column, or a disease-state
/// dummy such as `dx_AD`. Coefficients apply to the raw column values.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct EffectSpec {
    #[serde(default)]
    pub mmse: BTreeMap<String, f64>,
    #[serde(default)]
    pub cdrsb: BTreeMap<String, f64>,
    /// Effects on the latent disease scale; the observed 4-level state is
    /// the latent plus standard logistic noise cut at the thresholds.
    #[serde(default)]
    pub disease: BTreeMap<String, f64>,
    #[serde(default)]
    pub fa_left: BTreeMap<String, f64>,
    #[serde(default)]
    pub fa_cc: BTreeMap<String, f64>,
    #[serde(default)]
    pub fa_right: BTreeMap<String, f64>,
}

/// Configuration for [`simulate_cohort`]. JSON documents carry
/// `spec_version: 1`.
///
/// The emitted table mimics a staged cohort: every row has clinical
/// covariates and cognitive scores, the first `n_gene_rows` rows have gene
/// expression values, and the first `n_imaging_rows` of those also have
/// fractional anisotropy (FA) responses, strictly inside (0, 1).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub spec_version: u32,
    pub seed: u64,
    pub n: usize,
    pub n_gene_rows: usize,
    pub n_imaging_rows: usize,
    pub p_genes: usize,
    #[serde(default)]
    pub p_clinical_extra: usize,
    pub noise_sd_mmse: f64,
    pub noise_sd_cdrsb: f64,
    pub fa_noise_sd: f64,
    /// Strictly increasing cutpoints on the latent disease scale, J-1 values
    /// for a J-level state.
    pub ordinal_thresholds: Vec<f64>,
    #[serde(default)]
    pub clinical_missing_rate: f64,
    #[serde(default = "default_true")]
    pub include_fa: bool,
    #[serde(default = "default_fa_counts")]
    pub fa_region_counts: [usize; 3],
    #[serde(default = "default_mmse_baseline")]
    pub mmse_baseline: f64,
    #[serde(default = "default_cdrsb_baseline")]
    pub cdrsb_baseline: f64,
    #[serde(default)]
    pub effects: EffectSpec,
}

fn default_true() -> bool {
    true
}

fn default_fa_counts() -> [usize; 3] {
    [23, 11, 23]
}

fn default_mmse_baseline() -> f64 {
    28.0
}

fn default_cdrsb_baseline() -> f64 {
    1.5
}

pub const DISEASE_LEVELS: [&str; 4] = ["CN", "EMCI", "LMCI", "AD"];
pub const CLINICAL_COLUMNS: [&str; 6] = ["age", "educ", "apoe4", "abeta", "tau", "ptau"];
pub const FA_REGION_PREFIXES: [&str; 3] = ["fa_left_", "fa_cc_", "fa_right_"];

impl GeneratorSpec {
    pub fn parse_json(bytes: &[u8]) -> Result<GeneratorSpec> {
        let spec: GeneratorSpec =
            serde_json::from_slice(bytes).map_err(|e| Error::Config(e.to_string()))?;
        if spec.spec_version != 1 {
            return Err(Error::Config(format!(
                "unsupported spec_version {}, expected 1",
                spec.spec_version
            )));
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be positive".into()));
        }
        if self.n_gene_rows > self.n {
            return Err(Error::Config("n_gene_rows exceeds n".into()));
        }
        if self.n_imaging_rows > self.n_gene_rows {
            return Err(Error::Config(
                "n_imaging_rows exceeds n_gene_rows; imaging rows must be nested in gene rows"
                    .into(),
            ));
        }
        if self.p_genes == 0 {
            return Err(Error::Config("p_genes must be positive".into()));
        }
        if self.ordinal_thresholds.is_empty() {
            return Err(Error::Config("ordinal_thresholds must be non-empty".into()));
        }
        for w in self.ordinal_thresholds.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Config(format!(
                    "ordinal_thresholds must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        for (label, sd) in [
            ("noise_sd_mmse", self.noise_sd_mmse),
            ("noise_sd_cdrsb", self.noise_sd_cdrsb),
            ("fa_noise_sd", self.fa_noise_sd),
        ] {
            if !(sd >= 0.0 && sd.is_finite()) {
                return Err(Error::Config(format!("{} must be a finite non-negative number", label)));
            }
        }
        if !(0.0..1.0).contains(&self.clinical_missing_rate) {
            return Err(Error::Config("clinical_missing_rate must lie in [0, 1)".into()));
        }
        if self.include_fa && self.fa_region_counts.iter().any(|&c| c == 0) {
            return Err(Error::Config("fa_region_counts entries must be positive".into()));
        }
        let valid = self.valid_effect_keys();
        for (family, map) in [
            ("mmse", &self.effects.mmse),
            ("cdrsb", &self.effects.cdrsb),
            ("disease", &self.effects.disease),
            ("fa_left", &self.effects.fa_left),
            ("fa_cc", &self.effects.fa_cc),
            ("fa_right", &self.effects.fa_right),
        ] {
            for (key, value) in map {
                if !valid.contains(key.as_str()) {
                    return Err(Error::Config(format!(
                        "effects.{} names unknown column `{}`",
                        family, key
                    )));
                }
                if !value.is_finite() {
                    return Err(Error::Config(format!(
                        "effects.{}.{} must be finite",
                        family, key
                    )));
                }
            }
        }
        Ok(())
    }

    fn valid_effect_keys(&self) -> BTreeSet<String> {
        let mut keys: BTreeSet<String> = CLINICAL_COLUMNS.iter().map(|s| s.to_string()).collect();
        for i in 0..self.p_clinical_extra {
            keys.insert(format!("clin_extra_{:02}", i + 1));
        }
        for g in 1..=self.p_genes {
            keys.insert(gene_name(g, self.p_genes));
        }
        for level in &DISEASE_LEVELS[1..] {
            keys.insert(format!("dx_{}", level));
        }
        keys
    }

    pub fn gene_names(&self) -> Vec<String> {
        (1..=self.p_genes).map(|g| gene_name(g, self.p_genes)).collect()
    }

    pub fn fa_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for (prefix, &count) in FA_REGION_PREFIXES.iter().zip(&self.fa_region_counts) {
            for i in 1..=count {
                names.push(format!("{}{:02}", prefix, i));
            }
        }
        names
    }

    /// Role schema matching the emitted table.
    pub fn schema(&self) -> Schema {
        let mut schema = Schema::empty()
            .with_role("subject", Role::Id)
            .with_role("dx", Role::Stratum)
            .with_role("mmse", Role::Outcome)
            .with_role("cdrsb", Role::Outcome);
        if self.include_fa {
            for name in self.fa_names() {
                schema = schema.with_role(name, Role::Outcome);
            }
        }
        schema
    }

    /// Cohort with the dimensions of the motivating study: 1631 rows, 468
    /// with genes, 104 with a 57-column FA block split 23/11/23, and planted
    /// sparse gene effects on every outcome family.
    pub fn reference_shape(seed: u64) -> GeneratorSpec {
        let p = 2000;
        let mut effects = EffectSpec::default();
        for level_effects in [
            ("dx_EMCI", -1.0, 0.6),
            ("dx_LMCI", -2.5, 1.5),
            ("dx_AD", -6.0, 4.0),
        ] {
            effects.mmse.insert(level_effects.0.into(), level_effects.1);
            effects.cdrsb.insert(level_effects.0.into(), level_effects.2);
        }
        effects.mmse.insert("age".into(), -0.03);
        effects.mmse.insert("apoe4".into(), -0.4);
        effects.cdrsb.insert("apoe4".into(), 0.3);
        effects.disease.insert("age".into(), 0.02);
        effects.disease.insert("apoe4".into(), 0.8);
        effects.disease.insert("ptau".into(), 0.02);
        effects.disease.insert("abeta".into(), -0.0005);
        // genes driving both cognitive scores
        for g in 1..=5 {
            effects.mmse.insert(gene_name(g, p), -1.2);
            effects.cdrsb.insert(gene_name(g, p), 0.7);
        }
        // single-score genes
        for g in 11..=13 {
            effects.mmse.insert(gene_name(g, p), -0.9);
        }
        for g in 21..=23 {
            effects.cdrsb.insert(gene_name(g, p), 0.55);
        }
        // genes separating the disease states
        for g in 101..=106 {
            effects.disease.insert(gene_name(g, p), 0.7);
        }
        // imaging genes: all regions, hemispheres only, one region only
        for g in 31..=34 {
            for map in [
                &mut effects.fa_left,
                &mut effects.fa_cc,
                &mut effects.fa_right,
            ] {
                map.insert(gene_name(g, p), -0.35);
            }
        }
        for g in 41..=42 {
            effects.fa_left.insert(gene_name(g, p), -0.4);
            effects.fa_right.insert(gene_name(g, p), -0.4);
        }
        effects.fa_left.insert(gene_name(51, p), -0.45);
        effects.fa_cc.insert(gene_name(61, p), -0.45);
        effects.fa_right.insert(gene_name(71, p), -0.45);

        GeneratorSpec {
            spec_version: 1,
            seed,
            n: 1631,
            n_gene_rows: 468,
            n_imaging_rows: 104,
            p_genes: p,
            p_clinical_extra: 0,
            noise_sd_mmse: 2.0,
            noise_sd_cdrsb: 1.2,
            fa_noise_sd: 0.35,
            ordinal_thresholds: vec![-1.07, -0.22, 1.33],
            clinical_missing_rate: 0.0,
            include_fa: true,
            fa_region_counts: [23, 11, 23],
            mmse_baseline: 28.0,
            cdrsb_baseline: 1.5,
            effects,
        }
    }

    /// Small cohort for quick end-to-end runs and CLI tests.
    pub fn small_shape(seed: u64) -> GeneratorSpec {
        let mut spec = GeneratorSpec::reference_shape(seed);
        spec.n = 240;
        spec.n_gene_rows = 160;
        spec.n_imaging_rows = 104;
        spec.p_genes = 120;
        let remap = |map: BTreeMap<String, f64>| -> BTreeMap<String, f64> {
            map.into_iter()
                .map(|(k, v)| {
                    if let Some(idx) = k.strip_prefix("gene_") {
                        let g: usize = idx.parse().expect("gene index");
                        (gene_name(g, 120), v)
                    } else {
                        (k, v)
                    }
                })
                .collect()
        };
        spec.effects.mmse = remap(spec.effects.mmse);
        spec.effects.cdrsb = remap(spec.effects.cdrsb);
        spec.effects.disease = remap(spec.effects.disease);
        spec.effects.fa_left = remap(spec.effects.fa_left);
        spec.effects.fa_cc = remap(spec.effects.fa_cc);
        spec.effects.fa_right = remap(spec.effects.fa_right);
        spec
    }
}

pub fn gene_name(index: usize, p_genes: usize) -> String {
    let width = p_genes.to_string().len().max(4);
    format!("gene_{:0width$}", index, width = width)
}

/// Everything a test oracle needs to score recovery: the planted effect
/// maps plus derived gene sets per recovery question.
#[derive(Clone, Debug, Serialize)]
pub struct GroundTruth {
    pub spec_version: u32,
    pub seed: u64,
    pub effects: EffectSpec,
    pub ordinal_thresholds: Vec<f64>,
    pub cross_outcome_genes: Vec<String>,
    pub mmse_only_genes: Vec<String>,
    pub cdrsb_only_genes: Vec<String>,
    pub disease_genes: Vec<String>,
    pub fa_all_region_genes: Vec<String>,
    pub fa_hemisphere_only_genes: Vec<String>,
    pub fa_left_genes: Vec<String>,
    pub fa_cc_genes: Vec<String>,
    pub fa_right_genes: Vec<String>,
}

fn gene_keys(map: &BTreeMap<String, f64>) -> BTreeSet<String> {
    map.keys()
        .filter(|k| k.starts_with("gene_"))
        .cloned()
        .collect()
}

impl GroundTruth {
    fn derive(spec: &GeneratorSpec) -> GroundTruth {
        let mmse = gene_keys(&spec.effects.mmse);
        let cdrsb = gene_keys(&spec.effects.cdrsb);
        let left = gene_keys(&spec.effects.fa_left);
        let cc = gene_keys(&spec.effects.fa_cc);
        let right = gene_keys(&spec.effects.fa_right);
        let cross: Vec<String> = mmse.intersection(&cdrsb).cloned().collect();
        let hemi: Vec<String> = left
            .intersection(&right)
            .filter(|g| !cc.contains(*g))
            .cloned()
            .collect();
        let all_region: Vec<String> = left
            .intersection(&cc)
            .cloned()
            .collect::<BTreeSet<_>>()
            .intersection(&right)
            .cloned()
            .collect();
        GroundTruth {
            spec_version: 1,
            seed: spec.seed,
            effects: spec.effects.clone(),
            ordinal_thresholds: spec.ordinal_thresholds.clone(),
            cross_outcome_genes: cross,
            mmse_only_genes: mmse.difference(&cdrsb).cloned().collect(),
            cdrsb_only_genes: cdrsb.difference(&mmse).cloned().collect(),
            disease_genes: gene_keys(&spec.effects.disease).into_iter().collect(),
            fa_all_region_genes: all_region,
            fa_hemisphere_only_genes: hemi,
            fa_left_genes: left.into_iter().collect(),
            fa_cc_genes: cc.into_iter().collect(),
            fa_right_genes: right.into_iter().collect(),
        }
    }
}

fn logistic_noise<R: Rng>(rng: &mut R) -> f64 {
    let u: f64 = rng.gen_range(1e-12..(1.0 - 1e-12));
    (u / (1.0 - u)).ln()
}

fn inv_logit(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Draws a cohort from the spec. Bit-identical output for a fixed
/// `(spec, seed)` pair; the seed argument overrides `spec.seed`.
pub fn simulate_cohort(spec: &GeneratorSpec, seed: u64) -> Result<(Dataset, GroundTruth)> {
    spec.validate()?;
    let n = spec.n;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut features: BTreeMap<String, Vec<f64>> = BTreeMap::new();

    let normal_vec = |rng: &mut ChaCha20Rng, n: usize, mean: f64, sd: f64| -> Vec<f64> {
        (0..n)
            .map(|_| mean + sd * rng.sample::<f64, _>(StandardNormal))
            .collect()
    };

    // clinical block, drawn in a fixed order
    let age = normal_vec(&mut rng, n, 73.0, 7.0);
    let educ = normal_vec(&mut rng, n, 16.0, 2.7);
    let apoe4: Vec<f64> = (0..n)
        .map(|_| if rng.gen::<f64>() < 0.45 { 1.0 } else { 0.0 })
        .collect();
    let abeta = normal_vec(&mut rng, n, 1000.0, 500.0);
    let ptau = normal_vec(&mut rng, n, 28.0, 14.0);
    // tau tracks ptau with a small independent component; the correlation
    // sits near 0.985 so a 0.98 collinearity filter reliably drops it
    let tau: Vec<f64> = ptau
        .iter()
        .map(|&p| 8.3 * p + 20.0 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    features.insert("age".into(), age);
    features.insert("educ".into(), educ);
    features.insert("apoe4".into(), apoe4);
    features.insert("abeta".into(), abeta);
    features.insert("tau".into(), tau);
    features.insert("ptau".into(), ptau);
    for i in 0..spec.p_clinical_extra {
        features.insert(
            format!("clin_extra_{:02}", i + 1),
            normal_vec(&mut rng, n, 0.0, 1.0),
        );
    }

    let gene_names = spec.gene_names();
    for name in &gene_names {
        features.insert(name.clone(), normal_vec(&mut rng, n, 0.0, 1.0));
    }

    let weighted_sum = |features: &BTreeMap<String, Vec<f64>>,
                        effects: &BTreeMap<String, f64>|
     -> Result<Vec<f64>> {
        let mut acc = vec![0.0; n];
        for (key, &coef) in effects {
            let col = features.get(key).ok_or_else(|| {
                Error::Config(format!("effect references `{}` before it exists", key))
            })?;
            for (a, &v) in acc.iter_mut().zip(col) {
                *a += coef * v;
            }
        }
        Ok(acc)
    };

    // latent disease state, observed through J-1 cutpoints
    let disease_signal = weighted_sum(&features, &spec.effects.disease)?;
    let dx_codes: Vec<usize> = disease_signal
        .iter()
        .map(|&s| {
            let latent = s + logistic_noise(&mut rng);
            spec.ordinal_thresholds
                .iter()
                .position(|&t| latent <= t)
                .unwrap_or(spec.ordinal_thresholds.len())
        })
        .collect();
    let n_levels = spec.ordinal_thresholds.len() + 1;
    if n_levels > DISEASE_LEVELS.len() {
        return Err(Error::Config(format!(
            "at most {} disease levels supported, thresholds imply {}",
            DISEASE_LEVELS.len(),
            n_levels
        )));
    }
    let dx_labels: Vec<String> = dx_codes
        .iter()
        .map(|&c| DISEASE_LEVELS[c].to_string())
        .collect();
    for (i, level) in DISEASE_LEVELS.iter().enumerate().skip(1) {
        features.insert(
            format!("dx_{}", level),
            dx_codes
                .iter()
                .map(|&c| if c == i { 1.0 } else { 0.0 })
                .collect(),
        );
    }

    let mut mmse = weighted_sum(&features, &spec.effects.mmse)?;
    for v in mmse.iter_mut() {
        *v += spec.mmse_baseline + spec.noise_sd_mmse * rng.sample::<f64, _>(StandardNormal);
    }
    let mut cdrsb = weighted_sum(&features, &spec.effects.cdrsb)?;
    for v in cdrsb.iter_mut() {
        *v += spec.cdrsb_baseline + spec.noise_sd_cdrsb * rng.sample::<f64, _>(StandardNormal);
    }

    // FA block: region-wide gene signal, response-specific baseline, cell noise
    let mut fa_columns: Vec<(String, Vec<f64>)> = Vec::new();
    if spec.include_fa {
        let region_effects = [
            &spec.effects.fa_left,
            &spec.effects.fa_cc,
            &spec.effects.fa_right,
        ];
        for (r, (prefix, &count)) in FA_REGION_PREFIXES
            .iter()
            .zip(&spec.fa_region_counts)
            .enumerate()
        {
            let signal = weighted_sum(&features, region_effects[r])?;
            for i in 1..=count {
                let baseline = 1.0 + 0.3 * rng.sample::<f64, _>(StandardNormal);
                let values: Vec<f64> = signal
                    .iter()
                    .map(|&s| {
                        inv_logit(baseline + s + spec.fa_noise_sd * rng.sample::<f64, _>(StandardNormal))
                    })
                    .collect();
                fa_columns.push((format!("{}{:02}", prefix, i), values));
            }
        }
    }

    // missingness masks come last so draws above stay aligned across specs
    let gene_missing: Vec<bool> = (0..n).map(|i| i >= spec.n_gene_rows).collect();
    let fa_missing: Vec<bool> = (0..n).map(|i| i >= spec.n_imaging_rows).collect();
    let csf_missing: Vec<bool> = (0..n)
        .map(|_| {
            let draw: f64 = rng.gen();
            draw < spec.clinical_missing_rate
        })
        .collect();

    let subject: Vec<String> = (1..=n).map(|i| format!("subj_{:05}", i)).collect();
    let mut columns = vec![Column::text("subject", Role::Id, subject)];
    for name in CLINICAL_COLUMNS {
        let values = features.remove(name).expect("clinical column generated");
        if matches!(name, "abeta" | "tau" | "ptau") && spec.clinical_missing_rate > 0.0 {
            columns.push(Column::numeric_with_missing(
                name,
                Role::Predictor,
                values,
                csf_missing.clone(),
            ));
        } else {
            columns.push(Column::numeric(name, Role::Predictor, values));
        }
    }
    for i in 0..spec.p_clinical_extra {
        let name = format!("clin_extra_{:02}", i + 1);
        let values = features.remove(&name).expect("extra clinical generated");
        columns.push(Column::numeric(name, Role::Predictor, values));
    }
    columns.push(Column::text("dx", Role::Stratum, dx_labels));
    columns.push(Column::numeric("mmse", Role::Outcome, mmse));
    columns.push(Column::numeric("cdrsb", Role::Outcome, cdrsb));
    for name in &gene_names {
        let values = features.remove(name).expect("gene column generated");
        columns.push(Column::numeric_with_missing(
            name.clone(),
            Role::Predictor,
            values,
            gene_missing.clone(),
        ));
    }
    for (name, values) in fa_columns {
        columns.push(Column::numeric_with_missing(
            name,
            Role::Outcome,
            values,
            fa_missing.clone(),
        ));
    }

    let dataset = Dataset::from_columns(columns)?;
    Ok((dataset, GroundTruth::derive(spec)))
}

/// Writes a dataset as CSV with shortest round-trip float formatting and
/// `NA` for missing cells.
pub fn dataset_to_csv(d: &Dataset) -> String {
    let mut out = String::new();
    let names: Vec<&str> = d.columns().iter().map(|c| c.name.as_str()).collect();
    out.push_str(&names.join(","));
    out.push('\n');
    for row in 0..d.n_rows() {
        let mut cells = Vec::with_capacity(names.len());
        for col in d.columns() {
            match &col.data {
                super::ColumnValues::Numeric { values, missing } => {
                    cells.push(if missing[row] {
                        "NA".to_string()
                    } else {
                        format!("{}", values[row])
                    });
                }
                super::ColumnValues::Text { values, missing } => {
                    cells.push(if missing[row] {
                        "NA".to_string()
                    } else {
                        values[row].clone()
                    });
                }
            }
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec() -> GeneratorSpec {
        let mut spec = GeneratorSpec::reference_shape(1);
        spec.n = 60;
        spec.n_gene_rows = 40;
        spec.n_imaging_rows = 20;
        spec.p_genes = 30;
        spec.effects = EffectSpec::default();
        spec.effects.mmse.insert(gene_name(1, 30), -1.0);
        spec
    }

    #[test]
    fn deterministic_for_seed() {
        let spec = tiny_spec();
        let (a, _) = simulate_cohort(&spec, 9).unwrap();
        let (b, _) = simulate_cohort(&spec, 9).unwrap();
        assert_eq!(dataset_to_csv(&a), dataset_to_csv(&b));
        let (c, _) = simulate_cohort(&spec, 10).unwrap();
        assert_ne!(dataset_to_csv(&a), dataset_to_csv(&c));
    }

    #[test]
    fn missingness_is_nested() {
        let spec = tiny_spec();
        let (d, _) = simulate_cohort(&spec, 3).unwrap();
        let (_, gene_missing) = d.numeric(&gene_name(5, 30)).unwrap();
        assert!(!gene_missing[39]);
        assert!(gene_missing[40]);
        let (_, fa_missing) = d.numeric("fa_cc_01").unwrap();
        assert!(!fa_missing[19]);
        assert!(fa_missing[20]);
    }

    #[test]
    fn fa_values_strictly_inside_unit_interval() {
        let spec = tiny_spec();
        let (d, _) = simulate_cohort(&spec, 4).unwrap();
        for name in spec.fa_names() {
            let (values, missing) = d.numeric(&name).unwrap();
            for (v, &m) in values.iter().zip(missing) {
                if !m {
                    assert!(*v > 0.0 && *v < 1.0, "{} = {}", name, v);
                }
            }
        }
    }

    #[test]
    fn ground_truth_sets() {
        let spec = GeneratorSpec::reference_shape(0);
        let (_, truth) = simulate_cohort(&spec, 0).unwrap();
        assert_eq!(truth.cross_outcome_genes.len(), 5);
        assert_eq!(truth.fa_hemisphere_only_genes.len(), 2);
        assert_eq!(truth.fa_all_region_genes.len(), 4);
        assert!(truth.fa_left_genes.contains(&gene_name(51, 2000)));
        assert!(!truth.fa_cc_genes.contains(&gene_name(41, 2000)));
    }

    #[test]
    fn rejects_bad_thresholds() {
        let mut spec = tiny_spec();
        spec.ordinal_thresholds = vec![0.0, 0.0];
        assert!(simulate_cohort(&spec, 0).is_err());
    }

    #[test]
    fn rejects_unknown_effect_key() {
        let mut spec = tiny_spec();
        spec.effects.mmse.insert("gene_9999".into(), 1.0);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn csv_roundtrip_preserves_values() {
        let spec = tiny_spec();
        let (d, _) = simulate_cohort(&spec, 5).unwrap();
        let csv = dataset_to_csv(&d);
        let parsed = Dataset::from_csv_reader(csv.as_bytes(), &spec.schema()).unwrap();
        let (orig, _) = d.numeric("mmse").unwrap();
        let (back, _) = parsed.numeric("mmse").unwrap();
        assert_eq!(orig, back, "shortest float formatting round-trips exactly");
    }
}
