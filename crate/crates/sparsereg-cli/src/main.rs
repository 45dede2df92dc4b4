//! Command-line surface for the sparsereg toolkit.
//!
//! One binary, four subcommands: `simulate` writes a synthetic cohort,
//! `fit` runs a single estimator, `pipeline` runs the staged analysis, and
//! `summarize` prints a stratified cohort table. Exit codes form a
//! machine-checkable contract: 0 on success, 1 when a model fails to fit
//! (non-convergence, separation, rank deficiency), 2 on usage or
//! configuration errors. All randomness flows from `--seed`; outputs are
//! byte-identical across reruns with the same inputs and flags.

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use sparsereg::data::{
    dataset_to_csv, make_folds, simulate_cohort, summarize_cohort, CategoricalOutcome, Dataset,
    GeneratorSpec, Schema,
};
use sparsereg::lasso::gaussian::{cv_lasso, nonzero_report, nonzero_report_tsv};
use sparsereg::lasso::multinomial::{cv_multinomial, gene_sets, MultinomialFit};
use sparsereg::lasso::multitask::{cv_multitask, rank_rows, rank_rows_tsv, MultiTaskFit};
use sparsereg::lasso::{CvResult, LambdaRule, PathConfig};
use sparsereg::linear::fit_ols;
use sparsereg::ordinal::{fit_ordinal, forest_data, forest_tsv, OrdinalFit};
use sparsereg::pipeline::{run_full_pipeline, PipelineConfig, RegionPartition};
use sparsereg::report::{fmt_g6, to_json_bytes, TsvTable};
use sparsereg::{Error, Result};
use std::collections::BTreeSet;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

#[derive(Parser, Debug)]
#[command(
    name = "sparsereg",
    version,
    about = "Penalized regression and feature screening for cohort studies",
    long_about = "Penalized regression and feature screening for cohort studies.\n\
                  Exit codes: 0 success, 1 modeling failure (non-convergence, \
                  separation, rank deficiency), 2 usage or configuration error.\n\
                  Set SPARSEREG_NO_COLOR to disable terminal styling."
)]
struct Cli {
    /// Cap worker threads for cross-validation folds (default: all cores;
    /// results are identical for any value)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic cohort: CSV, schema, region partition, ground truth
    Simulate(SimulateArgs),
    /// Fit one model on a cohort CSV and write its report files
    #[command(subcommand)]
    Fit(FitCommand),
    /// Run the staged analysis end to end into an atomic report directory
    Pipeline(PipelineArgs),
    /// Print a stratified cohort summary table
    Summarize(SummarizeArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Generator configuration JSON (spec_version 1); omit to use --shape
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in cohort shape when no --config is given: 'reference'
    /// (1631 rows, 2000 genes) or 'small' (240 rows, 120 genes)
    #[arg(long, default_value = "small")]
    shape: String,
    /// Master seed; overrides the configuration's seed (default 0)
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, created if absent
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Cohort CSV with a header row
    #[arg(long)]
    input: PathBuf,
    /// Column-role schema JSON; omitted columns default to predictor roles
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Output directory for report files; primary table goes to stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CvArgs {
    /// Cross-validation folds (default 10)
    #[arg(long, default_value_t = 10)]
    folds: usize,
    /// Penalty selection rule after cross-validation: min | 1se (default min)
    #[arg(long, default_value = "min")]
    lambda_rule: String,
    /// Fold-assignment seed (default 0)
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand, Debug)]
enum FitCommand {
    /// Ordinary least squares with classical standard errors and p-values
    Ols {
        #[command(flatten)]
        io: InputArgs,
        /// Outcome column
        #[arg(long)]
        outcome: String,
        /// Comma-separated predictor columns; 'prefix*' expands by prefix
        #[arg(long)]
        predictors: String,
    },
    /// Proportional-odds ordinal regression of an ordered categorical outcome
    Ordinal {
        #[command(flatten)]
        io: InputArgs,
        /// Outcome column holding the category labels
        #[arg(long)]
        outcome: String,
        /// Ordered category labels, mildest first, comma-separated
        #[arg(long)]
        levels: String,
        /// Comma-separated predictor columns; 'prefix*' expands by prefix
        #[arg(long)]
        predictors: String,
    },
    /// Cross-validated Gaussian lasso over a regularization path
    Lasso {
        #[command(flatten)]
        io: InputArgs,
        #[command(flatten)]
        cv: CvArgs,
        /// Outcome column
        #[arg(long)]
        outcome: String,
        /// Comma-separated predictor columns; 'prefix*' expands by prefix
        #[arg(long)]
        predictors: String,
        /// Nonzero coefficients reported, largest magnitude first (default 75)
        #[arg(long, default_value_t = 75)]
        top_k: usize,
    },
    /// Cross-validated multinomial lasso for a categorical outcome
    Multinomial {
        #[command(flatten)]
        io: InputArgs,
        #[command(flatten)]
        cv: CvArgs,
        /// Outcome column holding the category labels
        #[arg(long)]
        outcome: String,
        /// Category labels, comma-separated
        #[arg(long)]
        levels: String,
        /// Comma-separated predictor columns; 'prefix*' expands by prefix
        #[arg(long)]
        predictors: String,
    },
    /// Cross-validated multi-task group lasso over several numeric responses
    Multitask {
        #[command(flatten)]
        io: InputArgs,
        #[command(flatten)]
        cv: CvArgs,
        /// Comma-separated response columns; 'prefix*' expands by prefix
        #[arg(long)]
        responses: String,
        /// Comma-separated predictor columns; 'prefix*' expands by prefix
        #[arg(long)]
        predictors: String,
        /// Rows reported by descending coefficient-row norm (default 50)
        #[arg(long, default_value_t = 50)]
        top_k: usize,
    },
}

#[derive(Args, Debug)]
struct PipelineArgs {
    /// Cohort CSV with a header row
    #[arg(long)]
    input: PathBuf,
    /// Column-role schema JSON; omitted columns default to predictor roles
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Pipeline configuration JSON (spec_version 1); flags below override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Region partition CSV (response,region) for the imaging stage
    #[arg(long)]
    partition: Option<PathBuf>,
    /// Accept partitions whose region counts differ from 23/11/23
    #[arg(long)]
    allow_custom_partition: bool,
    /// Stages to run, comma-separated subset of
    /// low_dim,cognitive,disease,imaging (default: all)
    #[arg(long)]
    stages: Option<String>,
    /// Cross-validation folds for the gene stages (default 10)
    #[arg(long)]
    folds: Option<usize>,
    /// Cross-validation folds for the imaging stage (default 4)
    #[arg(long)]
    imaging_folds: Option<usize>,
    /// Genes reported per cognitive outcome (default 75)
    #[arg(long)]
    top_k: Option<usize>,
    /// Genes reported per imaging region (default 50)
    #[arg(long)]
    top_k_imaging: Option<usize>,
    /// Penalty selection rule: min | 1se (default min)
    #[arg(long)]
    lambda_rule: Option<String>,
    /// Clamp width for the logit transform of imaging responses (default 1e-6)
    #[arg(long)]
    epsilon: Option<f64>,
    /// Master seed; stages derive their own seeds from it (default 0)
    #[arg(long)]
    seed: Option<u64>,
    /// Report directory; must not already exist (written atomically)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SummarizeArgs {
    /// Cohort CSV with a header row
    #[arg(long)]
    input: PathBuf,
    /// Column-role schema JSON
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Stratifying column (default dx); must carry the stratum role
    #[arg(long, default_value = "dx")]
    stratum: String,
    /// Write the table here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let mut cmd = Cli::command();
    if std::env::var_os("SPARSEREG_NO_COLOR").is_some() {
        cmd = cmd
            .styles(clap::builder::Styles::plain())
            .color(clap::ColorChoice::Never);
    }
    let matches = match cmd.try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(2);
        }
    };
    if let Some(threads) = cli.threads {
        // Ignore failure: a global pool can only be installed once, and a
        // second attempt means parallelism is already configured.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(if e.is_modeling_failure() { 1 } else { 2 })
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Fit(fit) => cmd_fit(fit),
        Command::Pipeline(args) => cmd_pipeline(args),
        Command::Summarize(args) => cmd_summarize(args),
    }
}

fn load_dataset(input: &Path, schema: Option<&Path>) -> Result<Dataset> {
    let schema = match schema {
        Some(path) => Schema::load(path)?,
        None => Schema::empty(),
    };
    let file = std::fs::File::open(input)
        .map_err(|e| Error::InvalidInput(format!("cannot open {}: {}", input.display(), e)))?;
    Dataset::from_csv_reader(file, &schema)
}

/// Comma-separated column names; an entry ending in '*' expands to every
/// column with that prefix, in dataset order.
fn expand_columns(d: &Dataset, raw: &str) -> Result<Vec<String>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for part in raw.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some(prefix) = part.strip_suffix('*') {
            let matches = d.names_with_prefix(prefix);
            if matches.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "no columns start with '{}'",
                    prefix
                )));
            }
            for m in matches {
                if seen.insert(m.clone()) {
                    out.push(m);
                }
            }
        } else {
            if !d.has_column(part) {
                return Err(Error::InvalidInput(format!("unknown column '{}'", part)));
            }
            if seen.insert(part.to_string()) {
                out.push(part.to_string());
            }
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidInput("no columns named".into()));
    }
    Ok(out)
}

fn split_levels(raw: &str) -> Result<Vec<String>> {
    let levels: Vec<String> = raw
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(String::from)
        .collect();
    if levels.len() < 2 {
        return Err(Error::InvalidInput(
            "need at least 2 comma-separated levels".into(),
        ));
    }
    Ok(levels)
}

/// Complete-case subset over the named columns, mirroring how the staged
/// pipeline prepares each model's rows.
fn complete_subset(d: &Dataset, names: &[String]) -> Result<Dataset> {
    let rows = d.complete_rows(names)?;
    if rows.is_empty() {
        return Err(Error::InvalidInput(
            "no rows are complete on the requested columns".into(),
        ));
    }
    d.subset_rows(&rows)
}

/// Writes named files into `out`, or the primary (first) file to stdout
/// when no directory was given.
fn emit(out: Option<&Path>, files: Vec<(String, Vec<u8>)>) -> Result<()> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            for (name, bytes) in files {
                std::fs::write(dir.join(name), bytes)?;
            }
            Ok(())
        }
        None => {
            let (_, bytes) = files.into_iter().next().expect("at least one file");
            std::io::stdout().write_all(&bytes)?;
            Ok(())
        }
    }
}

fn cv_tables(cv: &CvResult, rule: LambdaRule) -> (String, String) {
    let mut grid = TsvTable::new(vec!["lambda", "cv_mean", "cv_se"]);
    for (i, lambda) in cv.lambdas.iter().enumerate() {
        grid.push(vec![
            fmt_g6(*lambda),
            fmt_g6(cv.cv_mean[i]),
            fmt_g6(cv.cv_se[i]),
        ]);
    }
    let mut selected = TsvTable::new(vec![
        "rule",
        "lambda_min",
        "lambda_1se",
        "selected",
        "n_nonzero",
    ]);
    selected.push(vec![
        rule.as_str().to_string(),
        fmt_g6(cv.lambda_min),
        fmt_g6(cv.lambda_1se),
        fmt_g6(cv.selected_lambda(rule)),
        cv.selected_point(rule).n_nonzero.to_string(),
    ]);
    (grid.to_tsv(), selected.to_tsv())
}

fn ordinal_coefficients_tsv(fit: &OrdinalFit) -> String {
    let mut table = TsvTable::new(vec!["term", "estimate", "std_error"]);
    for (j, (t, se)) in fit
        .thresholds
        .iter()
        .zip(&fit.threshold_std_errors)
        .enumerate()
    {
        table.push(vec![
            format!("cut_{}|{}", fit.labels[j], fit.labels[j + 1]),
            fmt_g6(*t),
            fmt_g6(*se),
        ]);
    }
    for (k, (b, se)) in fit.slopes.iter().zip(&fit.slope_std_errors).enumerate() {
        table.push(vec![
            fit.predictor_names[k].clone(),
            fmt_g6(*b),
            fmt_g6(*se),
        ]);
    }
    table.to_tsv()
}

fn gene_list_bytes(set: &BTreeSet<String>) -> Vec<u8> {
    let mut out = String::new();
    for name in set {
        out.push_str(name);
        out.push('\n');
    }
    out.into_bytes()
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let mut spec = match &args.config {
        Some(path) => {
            let bytes = std::fs::read(path).map_err(|e| {
                Error::Config(format!("cannot read {}: {}", path.display(), e))
            })?;
            GeneratorSpec::parse_json(&bytes)?
        }
        None => match args.shape.as_str() {
            "reference" => GeneratorSpec::reference_shape(args.seed.unwrap_or(0)),
            "small" => GeneratorSpec::small_shape(args.seed.unwrap_or(0)),
            other => {
                return Err(Error::Config(format!(
                    "unknown shape '{}'; expected 'reference' or 'small'",
                    other
                )))
            }
        },
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let (dataset, truth) = simulate_cohort(&spec, spec.seed)?;

    let mut files: Vec<(String, Vec<u8>)> = vec![
        ("cohort.csv".into(), dataset_to_csv(&dataset).into_bytes()),
        ("schema.json".into(), to_json_bytes(&spec.schema())?),
        ("generator.json".into(), to_json_bytes(&spec)?),
        ("ground_truth.json".into(), to_json_bytes(&truth)?),
    ];
    if spec.include_fa {
        let partition = RegionPartition::from_ordered_names(
            &spec.fa_names(),
            spec.fa_region_counts,
            spec.fa_region_counts != sparsereg::pipeline::REFERENCE_REGION_COUNTS,
        )?;
        files.push(("partition.csv".into(), partition.to_csv().into_bytes()));
    }
    std::fs::create_dir_all(&args.out)?;
    for (name, bytes) in files {
        std::fs::write(args.out.join(name), bytes)?;
    }
    Ok(())
}

fn cmd_fit(fit: FitCommand) -> Result<()> {
    match fit {
        FitCommand::Ols {
            io,
            outcome,
            predictors,
        } => {
            let d = load_dataset(&io.input, io.schema.as_deref())?;
            let predictors = expand_columns(&d, &predictors)?;
            let mut required = vec![outcome.clone()];
            required.extend(predictors.iter().cloned());
            let sub = complete_subset(&d, &required)?;
            let fit = fit_ols(&sub, &outcome, &predictors)?;
            let mut stats = TsvTable::new(vec!["statistic", "value"]);
            stats.push(vec!["n".into(), sub.n_rows().to_string()]);
            stats.push(vec!["r_squared".into(), fmt_g6(fit.r_squared)]);
            stats.push(vec![
                "adjusted_r_squared".into(),
                fmt_g6(fit.adjusted_r_squared),
            ]);
            stats.push(vec!["residual_df".into(), fit.residual_df.to_string()]);
            emit(
                io.out.as_deref(),
                vec![
                    ("coefficients.tsv".into(), fit.to_tsv().into_bytes()),
                    ("stats.tsv".into(), stats.to_tsv().into_bytes()),
                ],
            )
        }
        FitCommand::Ordinal {
            io,
            outcome,
            levels,
            predictors,
        } => {
            let d = load_dataset(&io.input, io.schema.as_deref())?;
            let levels = split_levels(&levels)?;
            let predictors = expand_columns(&d, &predictors)?;
            let mut required = vec![outcome.clone()];
            required.extend(predictors.iter().cloned());
            let sub = complete_subset(&d, &required)?;
            let cat = CategoricalOutcome::from_text_column(&sub, &outcome, &levels)?;
            cat.require_min_count(1)?;
            let fit = fit_ordinal(&sub, &cat, &predictors)?;
            let forest = forest_data(&fit, 0.95)?;
            let mut stats = TsvTable::new(vec!["statistic", "value"]);
            stats.push(vec!["n".into(), sub.n_rows().to_string()]);
            stats.push(vec![
                "log_likelihood".into(),
                fmt_g6(fit.log_likelihood),
            ]);
            stats.push(vec!["iterations".into(), fit.iterations.to_string()]);
            stats.push(vec!["converged".into(), fit.converged.to_string()]);
            emit(
                io.out.as_deref(),
                vec![
                    (
                        "coefficients.tsv".into(),
                        ordinal_coefficients_tsv(&fit).into_bytes(),
                    ),
                    ("forest.tsv".into(), forest_tsv(&forest).into_bytes()),
                    ("stats.tsv".into(), stats.to_tsv().into_bytes()),
                ],
            )
        }
        FitCommand::Lasso {
            io,
            cv,
            outcome,
            predictors,
            top_k,
        } => {
            let d = load_dataset(&io.input, io.schema.as_deref())?;
            let rule = LambdaRule::from_str(&cv.lambda_rule)?;
            let predictors = expand_columns(&d, &predictors)?;
            let mut required = vec![outcome.clone()];
            required.extend(predictors.iter().cloned());
            let sub = complete_subset(&d, &required)?;
            let folds = make_folds(sub.n_rows(), cv.folds, cv.seed)?;
            let result = cv_lasso(&sub, &outcome, &predictors, &folds, &PathConfig::default())?;
            let top = nonzero_report(&result.path, result.selected_lambda(rule), top_k)?;
            let (grid, selected) = cv_tables(&result, rule);
            emit(
                io.out.as_deref(),
                vec![
                    ("top_genes.tsv".into(), nonzero_report_tsv(&top).into_bytes()),
                    ("selected.tsv".into(), selected.into_bytes()),
                    ("cv.tsv".into(), grid.into_bytes()),
                    ("path.json".into(), result.path.to_json_bytes()?),
                ],
            )
        }
        FitCommand::Multinomial {
            io,
            cv,
            outcome,
            levels,
            predictors,
        } => {
            let d = load_dataset(&io.input, io.schema.as_deref())?;
            let rule = LambdaRule::from_str(&cv.lambda_rule)?;
            let levels = split_levels(&levels)?;
            let predictors = expand_columns(&d, &predictors)?;
            let mut required = vec![outcome.clone()];
            required.extend(predictors.iter().cloned());
            let sub = complete_subset(&d, &required)?;
            let cat = CategoricalOutcome::from_text_column(&sub, &outcome, &levels)?;
            cat.require_min_count(2)?;
            let folds = make_folds(sub.n_rows(), cv.folds, cv.seed)?;
            let result = cv_multinomial(&sub, &cat, &predictors, &folds, &PathConfig::default())?;
            let fit = MultinomialFit::from_path(&result.path, result.selected_lambda(rule))?;
            let (union, intersection) = gene_sets(&fit.per_class_nonzero())?;
            let mut coef = TsvTable::new(vec!["predictor", "class", "coefficient"]);
            for (pred, class, value) in &fit.coefficients {
                coef.push(vec![pred.clone(), class.clone(), fmt_g6(*value)]);
            }
            let (grid, selected) = cv_tables(&result, rule);
            emit(
                io.out.as_deref(),
                vec![
                    ("coefficients.tsv".into(), coef.to_tsv().into_bytes()),
                    ("selected.tsv".into(), selected.into_bytes()),
                    ("cv.tsv".into(), grid.into_bytes()),
                    ("union.txt".into(), gene_list_bytes(&union)),
                    ("intersection.txt".into(), gene_list_bytes(&intersection)),
                    ("path.json".into(), result.path.to_json_bytes()?),
                ],
            )
        }
        FitCommand::Multitask {
            io,
            cv,
            responses,
            predictors,
            top_k,
        } => {
            let d = load_dataset(&io.input, io.schema.as_deref())?;
            let rule = LambdaRule::from_str(&cv.lambda_rule)?;
            let responses = expand_columns(&d, &responses)?;
            let predictors = expand_columns(&d, &predictors)?;
            let mut required = responses.clone();
            required.extend(predictors.iter().cloned());
            let sub = complete_subset(&d, &required)?;
            let folds = make_folds(sub.n_rows(), cv.folds, cv.seed)?;
            let result =
                cv_multitask(&sub, &responses, &predictors, &folds, &PathConfig::default())?;
            let fit = MultiTaskFit::from_path(&result.path, result.selected_lambda(rule))?;
            let top = rank_rows(&fit, top_k);
            let (grid, selected) = cv_tables(&result, rule);
            emit(
                io.out.as_deref(),
                vec![
                    ("top_genes.tsv".into(), rank_rows_tsv(&top).into_bytes()),
                    ("selected.tsv".into(), selected.into_bytes()),
                    ("cv.tsv".into(), grid.into_bytes()),
                    ("path.json".into(), result.path.to_json_bytes()?),
                ],
            )
        }
    }
}

fn cmd_pipeline(args: PipelineArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => {
            let bytes = std::fs::read(path).map_err(|e| {
                Error::Config(format!("cannot read {}: {}", path.display(), e))
            })?;
            PipelineConfig::parse_json(&bytes)?
        }
        None => PipelineConfig::with_seed(0),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(folds) = args.folds {
        config.folds = folds;
    }
    if let Some(folds) = args.imaging_folds {
        config.imaging_folds = folds;
    }
    if let Some(k) = args.top_k {
        config.top_k_cognitive = k;
    }
    if let Some(k) = args.top_k_imaging {
        config.top_k_imaging = k;
    }
    if let Some(rule) = &args.lambda_rule {
        config.lambda_rule = rule.clone();
    }
    if let Some(eps) = args.epsilon {
        config.logit_epsilon = eps;
    }
    if let Some(stages) = &args.stages {
        config.stages.low_dim = false;
        config.stages.cognitive = false;
        config.stages.disease = false;
        config.stages.imaging = false;
        for part in stages.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "low_dim" => config.stages.low_dim = true,
                "cognitive" => config.stages.cognitive = true,
                "disease" => config.stages.disease = true,
                "imaging" => config.stages.imaging = true,
                other => {
                    return Err(Error::Config(format!(
                        "unknown stage '{}'; expected low_dim, cognitive, disease, imaging",
                        other
                    )))
                }
            }
        }
    }
    config.validate()?;

    let d = load_dataset(&args.input, args.schema.as_deref())?;
    let partition = match &args.partition {
        Some(path) => {
            let bytes = std::fs::read(path).map_err(|e| {
                Error::Config(format!("cannot read {}: {}", path.display(), e))
            })?;
            Some(RegionPartition::parse_csv(
                &bytes,
                args.allow_custom_partition,
            )?)
        }
        None => None,
    };

    let report = run_full_pipeline(&d, partition.as_ref(), &config)?;
    report.write_to(&args.out)?;
    println!("report written to {}", args.out.display());
    Ok(())
}

fn cmd_summarize(args: SummarizeArgs) -> Result<()> {
    let d = load_dataset(&args.input, args.schema.as_deref())?;
    let summary = summarize_cohort(&d, &args.stratum)?;
    let tsv = summary.to_tsv();
    match &args.out {
        Some(path) => {
            std::fs::write(path, tsv.as_bytes())?;
            Ok(())
        }
        None => {
            std::io::stdout().write_all(tsv.as_bytes())?;
            Ok(())
        }
    }
}
