//! Command-line entry point.
//!
//! Each subcommand reads its inputs, writes its outputs under `--out` and
//! finishes with a `<subcommand>_manifest.json` [`RunManifest`].

mod manifest;

pub use manifest::{Run, RunManifest};

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::explain::{ensemble, explain_matrix, export_beeswarm, rank_mean_abs, write_importance};
use crate::metrics::{threshold_curve, uniform_grid, write_curve_csv, MetricBundle};
use crate::pipeline::{
    plan_folds, predict, run_stage2, train_pipeline, CvReport, PipelineConfig, PipelineModel, Stage2Settings,
};
use crate::qc::{evaluate_batch, summary_table, verdicts_to_jsonl, BatchConfig, UuidRegistry};
use crate::records::{
    clean, encode, encode_labels, harmonize, parse_records, screen_outliers, stratified_split, write_records,
    AliasDictionary, Column, ColumnKind, ColumnSchema, FeatureMatrix, FeatureSchema, FieldRecord, Labels,
    PlausibilityBounds, PTC_COLUMN,
};
use crate::rng::derive_seed;
use crate::stats::compare_models;
use crate::synth::{generate, SynthConfig};
use crate::trees::{predict_proba, LearnerConfig};

/// Print a line to stdout, ignoring a closed pipe.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

#[derive(Parser)]
#[command(
    name = "wqscreen",
    version,
    about = "Field QC and two-stage E. coli screening for household water surveys",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON configuration for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed; overrides any seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (`synth` also accepts a `.csv` file path).
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Triage survey records as OK / REVIEW / ALERT; exits 2 on any ALERT.
    Qc(QcArgs),
    /// Harmonize labels and units, drop implausible records and outliers.
    Clean(CleanArgs),
    /// Encode records into a feature matrix and labels.
    Encode(EncodeArgs),
    /// Generate a synthetic survey fixture with its ground truth.
    Synth,
    /// Cross-validate and fit the two-stage pipeline.
    Train(RowsArgs),
    /// Score rows with a fitted pipeline.
    Predict(ModelRowsArgs),
    /// Metrics and threshold curve; exits 2 when an --assert fails.
    Evaluate(EvaluateArgs),
    /// Paired comparison of cross-validation reports.
    Compare(CompareArgs),
    /// Per-row SHAP attributions and mean |SHAP| ranking.
    Explain(ExplainArgs),
    /// Train on feature subsets, with a logistic baseline per subset.
    Ablate(AblateArgs),
}

#[derive(Args)]
struct RecordsArgs {
    /// Survey records CSV.
    #[arg(long)]
    records: PathBuf,
    /// Column-name mapping JSON for the records CSV.
    #[arg(long)]
    schema: Option<PathBuf>,
}

#[derive(Args)]
struct QcArgs {
    #[command(flatten)]
    input: RecordsArgs,
    /// Plausibility bounds JSON, e.g. {"ph":[0,14]}.
    #[arg(long)]
    bounds: Option<PathBuf>,
}

#[derive(Args)]
struct CleanArgs {
    #[command(flatten)]
    input: RecordsArgs,
    #[arg(long)]
    bounds: Option<PathBuf>,
    /// Alias dictionary JSON.
    #[arg(long)]
    dictionary: Option<PathBuf>,
}

#[derive(Args)]
struct EncodeArgs {
    #[command(flatten)]
    input: RecordsArgs,
}

/// Rows given either as survey records or as an encoded matrix.
#[derive(Args)]
struct RowsArgs {
    /// Survey records CSV, encoded on the fly.
    #[arg(long, conflicts_with_all = ["matrix", "labels"])]
    records: Option<PathBuf>,
    /// Column-name mapping JSON for --records.
    #[arg(long, requires = "records")]
    schema: Option<PathBuf>,
    /// Encoded feature CSV (`uuid` first).
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Labels CSV (`uuid,tc,ec`) aligned with --matrix.
    #[arg(long, requires = "matrix")]
    labels: Option<PathBuf>,
}

#[derive(Args)]
struct ModelRowsArgs {
    /// Pipeline model JSON written by `train`.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    rows: RowsArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Cross-validation report JSON; scores its pooled out-of-fold predictions.
    #[arg(long, conflicts_with = "model")]
    report: Option<PathBuf>,
    /// Pipeline model JSON; scores labelled rows at the model's threshold.
    #[arg(long)]
    model: Option<PathBuf>,
    #[command(flatten)]
    rows: RowsArgs,
    /// Condition on a metric such as `roc_auc>=0.6`; repeatable.
    #[arg(long = "assert", value_name = "CONDITION")]
    assertions: Vec<String>,
}

#[derive(Args)]
struct CompareArgs {
    /// Reference cross-validation report JSON.
    #[arg(long)]
    reference: PathBuf,
    /// Challenger report JSON; repeatable.
    #[arg(long, required = true)]
    challenger: Vec<PathBuf>,
}

#[derive(Args)]
struct ExplainArgs {
    #[command(flatten)]
    input: ModelRowsArgs,
    /// Which stage model to explain.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=2))]
    stage: u8,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    rows: RowsArgs,
    /// Feature subsets to run; repeatable. Defaults to all three.
    #[arg(long, value_enum)]
    features: Vec<Subset>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Subset {
    All,
    Contextual,
    Physico,
}

impl Subset {
    fn name(self) -> &'static str {
        match self {
            Subset::All => "all",
            Subset::Contextual => "contextual",
            Subset::Physico => "physico",
        }
    }

    fn select(self, matrix: &FeatureMatrix) -> FeatureMatrix {
        match self {
            Subset::All => matrix.clone(),
            Subset::Contextual => matrix.filter_kinds(|k| k == ColumnKind::Contextual),
            Subset::Physico => matrix.filter_kinds(|k| k == ColumnKind::Physicochemical),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CleanConfig {
    z_threshold: f64,
}

impl Default for CleanConfig {
    fn default() -> Self {
        CleanConfig { z_threshold: 4.0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct EncodeConfig {
    /// When set, also write an EC-stratified train/test split.
    test_fraction: Option<f64>,
    seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct EvaluateConfig {
    grid_steps: usize,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        EvaluateConfig { grid_steps: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CompareConfig {
    n_boot: usize,
    seed: u64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig { n_boot: 2000, seed: 0 }
    }
}

/// Parse `argv` (program name first), run one subcommand and return the exit
/// code: 0 on success, 1 on usage or runtime error, 2 on a QC ALERT or a
/// failed `evaluate --assert`.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Qc(args) => qc(cli, args),
        Command::Clean(args) => clean_cmd(cli, args),
        Command::Encode(args) => encode_cmd(cli, args),
        Command::Synth => synth(cli),
        Command::Train(args) => train(cli, args),
        Command::Predict(args) => predict_cmd(cli, args),
        Command::Evaluate(args) => evaluate(cli, args),
        Command::Compare(args) => compare(cli, args),
        Command::Explain(args) => explain(cli, args),
        Command::Ablate(args) => ablate(cli, args),
    }
}

fn load_config<T: DeserializeOwned + Default>(run: &mut Run, path: Option<&Path>) -> Result<T> {
    match path {
        Some(p) => {
            let text = run.read_string(p)?;
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
        }
        None => Ok(T::default()),
    }
}

fn load_bounds(run: &mut Run, path: Option<&Path>) -> Result<PlausibilityBounds> {
    match path {
        Some(p) => Ok(PlausibilityBounds::from_json(&run.read_string(p)?)?),
        None => Ok(PlausibilityBounds::default()),
    }
}

fn load_records(run: &mut Run, path: &Path, schema: Option<&Path>) -> Result<Vec<FieldRecord>> {
    let schema = match schema {
        Some(p) => ColumnSchema::from_json(&run.read_string(p)?)?,
        None => ColumnSchema::default(),
    };
    let bytes = run.read(path)?;
    let parsed = parse_records(bytes.as_slice(), &schema).with_context(|| format!("parsing {}", path.display()))?;
    for w in &parsed.warnings {
        eprintln!("warning: row {} column {}: {} ({:?})", w.row, w.column, w.message, w.value);
    }
    Ok(parsed.records)
}

/// Load rows; `layout` fixes the encoded columns when reading records.
fn load_rows(
    run: &mut Run,
    args: &RowsArgs,
    layout: Option<&[String]>,
    need_labels: bool,
) -> Result<(FeatureMatrix, Option<Labels>)> {
    if let Some(path) = &args.records {
        let records = load_records(run, path, args.schema.as_deref())?;
        let matrix = match layout {
            Some(names) => FeatureSchema { columns: names.iter().map(Column::new).collect() }.encode(&records)?,
            None => encode(&records)?.0,
        };
        let labels = if need_labels { Some(encode_labels(&records)?) } else { None };
        return Ok((matrix, labels));
    }
    let Some(path) = &args.matrix else {
        bail!("rows are required: pass --records or --matrix");
    };
    let matrix = FeatureMatrix::read_csv(run.read(path)?.as_slice())
        .with_context(|| format!("reading features {}", path.display()))?;
    let labels = match &args.labels {
        Some(p) => {
            let (ids, labels) = Labels::read_csv(run.read(p)?.as_slice())?;
            if ids != matrix.row_ids() {
                bail!("labels {} are not aligned with the feature rows", p.display());
            }
            Some(labels)
        }
        None if need_labels => bail!("labels are required: pass --labels with --matrix"),
        None => None,
    };
    Ok((matrix, labels))
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> crate::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    Ok((serde_json::to_string_pretty(value)? + "\n").into_bytes())
}

fn qc(cli: &Cli, args: &QcArgs) -> Result<i32> {
    let mut run = Run::new("qc", cli.out.clone());
    let config: BatchConfig = load_config(&mut run, cli.config.as_deref())?;
    config.validate()?;
    run.set_config(&config, cli.seed.unwrap_or(0))?;
    let bounds = load_bounds(&mut run, args.bounds.as_deref())?;
    let records = load_records(&mut run, &args.input.records, args.input.schema.as_deref())?;
    let (verdicts, flags) = evaluate_batch(&records, &config, &bounds, &mut UuidRegistry::new());
    run.write("qc_verdicts.jsonl", verdicts_to_jsonl(&verdicts)?.as_bytes())?;
    let summary = summary_table(&flags);
    run.write("qc_summary.csv", summary.as_bytes())?;
    say!("{}", summary.trim_end());
    run.finish()?;
    Ok(if flags.any_alert() { 2 } else { 0 })
}

fn clean_cmd(cli: &Cli, args: &CleanArgs) -> Result<i32> {
    let mut run = Run::new("clean", cli.out.clone());
    let config: CleanConfig = load_config(&mut run, cli.config.as_deref())?;
    run.set_config(&config, cli.seed.unwrap_or(0))?;
    let bounds = load_bounds(&mut run, args.bounds.as_deref())?;
    let dictionary = match &args.dictionary {
        Some(p) => AliasDictionary::from_json(&run.read_string(p)?)?,
        None => AliasDictionary::new(),
    };
    let records = load_records(&mut run, &args.input.records, args.input.schema.as_deref())?;
    let harmonized = harmonize(&records, &dictionary);
    let (plausible, first) = clean(&harmonized, &bounds);
    let (kept, second) = screen_outliers(&plausible, config.z_threshold)?;
    let log = first.then(&second);
    run.write("clean_records.csv", &csv_bytes(|b| write_records(&kept, b))?)?;
    run.write("clean_log.jsonl", log.to_jsonl().as_bytes())?;
    say!("kept {} of {} records", log.kept_count, log.input_count());
    run.finish()?;
    Ok(0)
}

fn encode_cmd(cli: &Cli, args: &EncodeArgs) -> Result<i32> {
    let mut run = Run::new("encode", cli.out.clone());
    let mut config: EncodeConfig = load_config(&mut run, cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    run.set_config(&config, config.seed)?;
    let records = load_records(&mut run, &args.input.records, args.input.schema.as_deref())?;
    let (matrix, labels) = encode(&records)?;
    run.write("features.csv", &csv_bytes(|b| matrix.write_csv(b))?)?;
    run.write("labels.csv", &csv_bytes(|b| labels.write_csv(matrix.row_ids(), b))?)?;
    if let Some(fraction) = config.test_fraction {
        let (train_rows, test_rows) = stratified_split(&labels.ec, fraction, config.seed)?;
        for (name, rows) in [("train", &train_rows), ("test", &test_rows)] {
            let part = matrix.select_rows(rows);
            let part_labels = labels.select(rows);
            run.write(&format!("features_{name}.csv"), &csv_bytes(|b| part.write_csv(b))?)?;
            run.write(&format!("labels_{name}.csv"), &csv_bytes(|b| part_labels.write_csv(part.row_ids(), b))?)?;
        }
        say!("split {} / {}", train_rows.len(), test_rows.len());
    }
    say!("encoded {} rows x {} columns", matrix.n_rows(), matrix.n_cols());
    run.finish()?;
    Ok(0)
}

fn synth(cli: &Cli) -> Result<i32> {
    let is_file = cli.out.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let (dir, fixture, truth) = if is_file {
        let dir = cli.out.parent().map(Path::to_path_buf).unwrap_or_default();
        let stem = cli.out.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        let name = cli.out.file_name().unwrap_or_default().to_string_lossy().into_owned();
        (dir, name, format!("{stem}_truth.json"))
    } else {
        (cli.out.clone(), "fixture.csv".to_string(), "truth.json".to_string())
    };
    let mut run = Run::new("synth", dir);
    let mut config: SynthConfig = load_config(&mut run, cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    run.set_config(&config, config.seed)?;
    let (records, truth_doc) = generate(&config)?;
    run.write(&fixture, &csv_bytes(|b| write_records(&records, b))?)?;
    run.write(&truth, (serde_json::to_string(&truth_doc)? + "\n").as_bytes())?;
    say!(
        "{} records, TC prevalence {:.3}, EC prevalence {:.3}",
        records.len(),
        truth_doc.empirical_tc_prevalence,
        truth_doc.empirical_ec_prevalence
    );
    run.finish()?;
    Ok(0)
}

fn pipeline_config(run: &mut Run, cli: &Cli) -> Result<PipelineConfig> {
    let mut config: PipelineConfig = load_config(run, cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    config.validate()?;
    run.set_config(&config, config.seed)?;
    Ok(config)
}

fn report_line(report: &CvReport) -> String {
    format!(
        "{}: roc_auc {:.4}, pr_auc {:.4}, brier {:.4}, mean fold F{} {:.4}",
        report.name, report.metrics.roc_auc, report.metrics.pr_auc, report.metrics.brier, report.beta, report.mean_fold_fbeta
    )
}

fn train(cli: &Cli, args: &RowsArgs) -> Result<i32> {
    let mut run = Run::new("train", cli.out.clone());
    let config = pipeline_config(&mut run, cli)?;
    let (matrix, labels) = load_rows(&mut run, args, None, true)?;
    let labels = labels.expect("labels requested");
    let training = train_pipeline(&matrix, &labels.tc, &labels.ec, &config)?;
    let plan = plan_folds(&labels.ec, config.k, config.inner_fraction, config.seed)?;
    let baseline = run_stage2(&matrix, None, &labels.ec, &plan, &config.stage2_settings())?;
    run.write("model.json", (training.model.to_json()? + "\n").as_bytes())?;
    run.write("cv_report.json", (training.report.to_json()? + "\n").as_bytes())?;
    run.write("cv_report_baseline.json", (baseline.to_json()? + "\n").as_bytes())?;
    let ptc = csv_bytes(|b| {
        let mut w = csv::Writer::from_writer(b);
        w.write_record(["uuid", "ptc"])?;
        for (id, v) in matrix.row_ids().iter().zip(&training.ptc.values) {
            w.write_record([id.as_str(), &v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    })?;
    run.write("ptc.csv", &ptc)?;
    say!("stage-1 TC roc_auc {:.4}", training.ptc.stage1_auc);
    say!("{}", report_line(&training.report));
    say!("{}", report_line(&baseline));
    say!("t* {:.4}", training.model.t_star);
    run.finish()?;
    Ok(0)
}

fn load_model(run: &mut Run, path: &Path) -> Result<PipelineModel> {
    PipelineModel::from_json(&run.read_string(path)?).with_context(|| format!("loading model {}", path.display()))
}

fn predict_cmd(cli: &Cli, args: &ModelRowsArgs) -> Result<i32> {
    let mut run = Run::new("predict", cli.out.clone());
    run.set_config(&serde_json::Value::Null, cli.seed.unwrap_or(0))?;
    let model = load_model(&mut run, &args.model)?;
    let (matrix, _) = load_rows(&mut run, &args.rows, Some(&model.feature_names), false)?;
    let predictions = predict(&model, &matrix)?;
    let bytes = csv_bytes(|b| {
        let mut w = csv::Writer::from_writer(b);
        w.write_record(["uuid", "ptc", "probability", "decision"])?;
        for (id, p) in matrix.row_ids().iter().zip(&predictions) {
            w.write_record([id.as_str(), &p.ptc.to_string(), &p.probability.to_string(), if p.decision { "1" } else { "0" }])?;
        }
        w.flush()?;
        Ok(())
    })?;
    run.write("predictions.csv", &bytes)?;
    say!("{} rows, {} flagged", predictions.len(), predictions.iter().filter(|p| p.decision).count());
    run.finish()?;
    Ok(0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Comparison {
    Ge,
    Le,
    Gt,
    Lt,
}

fn parse_assertion(text: &str) -> Result<(String, Comparison, f64)> {
    let Some(pos) = text.find(['<', '>']) else {
        bail!("assertion '{text}' needs one of >=, <=, >, <");
    };
    let (metric, rest) = text.split_at(pos);
    let (op, value) = match (rest.as_bytes()[0], rest.as_bytes().get(1)) {
        (b'>', Some(b'=')) => (Comparison::Ge, &rest[2..]),
        (b'<', Some(b'=')) => (Comparison::Le, &rest[2..]),
        (b'>', _) => (Comparison::Gt, &rest[1..]),
        _ => (Comparison::Lt, &rest[1..]),
    };
    let value: f64 = value.trim().parse().with_context(|| format!("assertion '{text}': bad number"))?;
    Ok((metric.trim().to_string(), op, value))
}

fn check_assertion(bundle: &MetricBundle, text: &str) -> Result<bool> {
    let (metric, op, bound) = parse_assertion(text)?;
    let doc = serde_json::to_value(bundle)?;
    let Some(actual) = doc.get(&metric).and_then(|v| v.as_f64()) else {
        bail!("assertion '{text}': unknown metric '{metric}'");
    };
    let ok = match op {
        Comparison::Ge => actual >= bound,
        Comparison::Le => actual <= bound,
        Comparison::Gt => actual > bound,
        Comparison::Lt => actual < bound,
    };
    say!("{} {text} (actual {actual})", if ok { "PASS" } else { "FAIL" });
    Ok(ok)
}

fn evaluate(cli: &Cli, args: &EvaluateArgs) -> Result<i32> {
    let mut run = Run::new("evaluate", cli.out.clone());
    let config: EvaluateConfig = load_config(&mut run, cli.config.as_deref())?;
    if config.grid_steps == 0 {
        bail!("grid_steps must be positive");
    }
    run.set_config(&config, cli.seed.unwrap_or(0))?;
    let (probs, labels, bundle) = if let Some(path) = &args.report {
        let report = CvReport::from_json(&run.read_string(path)?)?;
        (report.oof_calibrated, report.labels, report.metrics)
    } else if let Some(path) = &args.model {
        let model = load_model(&mut run, path)?;
        let (matrix, labels) = load_rows(&mut run, &args.rows, Some(&model.feature_names), true)?;
        let labels = labels.expect("labels requested").ec;
        let probs: Vec<f64> = predict(&model, &matrix)?.into_iter().map(|p| p.probability).collect();
        let bundle = MetricBundle::at_threshold(&probs, &labels, model.t_star)?;
        (probs, labels, bundle)
    } else {
        bail!("evaluate needs --report or --model");
    };
    let curve = threshold_curve(&probs, &labels, &uniform_grid(config.grid_steps), 2.0)?;
    run.write("metrics.json", &json_bytes(&bundle)?)?;
    run.write("threshold_curve.csv", &csv_bytes(|b| write_curve_csv(&curve, b))?)?;
    let mut failed = false;
    for a in &args.assertions {
        failed |= !check_assertion(&bundle, a)?;
    }
    say!(
        "roc_auc {:.4}, pr_auc {:.4}, brier {:.4}, f2 {:.4}",
        bundle.roc_auc, bundle.pr_auc, bundle.brier, bundle.f2
    );
    run.finish()?;
    Ok(if failed { 2 } else { 0 })
}

fn compare(cli: &Cli, args: &CompareArgs) -> Result<i32> {
    let mut run = Run::new("compare", cli.out.clone());
    let mut config: CompareConfig = load_config(&mut run, cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    run.set_config(&config, config.seed)?;
    let reference = CvReport::from_json(&run.read_string(&args.reference)?)?;
    let challengers = args
        .challenger
        .iter()
        .map(|p| Ok(CvReport::from_json(&run.read_string(p)?)?))
        .collect::<Result<Vec<_>>>()?;
    let report = compare_models(&reference, &challengers, config.n_boot, config.seed)?;
    run.write("comparison.json", &json_bytes(&report)?)?;
    run.write("comparison.csv", &csv_bytes(|b| report.write_csv(b))?)?;
    for row in &report.deltas {
        let r = &row.result;
        say!(
            "{} {}: delta {:+.4} [{:.4}, {:.4}] p {:.4} q {:.4}",
            row.challenger,
            r.metric.as_str(),
            r.delta,
            r.ci_low,
            r.ci_high,
            r.p_value,
            r.q_value.unwrap_or(f64::NAN)
        );
    }
    run.finish()?;
    Ok(0)
}

fn explain(cli: &Cli, args: &ExplainArgs) -> Result<i32> {
    let mut run = Run::new("explain", cli.out.clone());
    run.set_config(&serde_json::json!({ "stage": args.stage }), cli.seed.unwrap_or(0))?;
    let model = load_model(&mut run, &args.input.model)?;
    let (matrix, _) = load_rows(&mut run, &args.input.rows, Some(&model.feature_names), false)?;
    let raw = matrix.select_columns(&model.feature_names)?;
    let scaled = model.scaler.transform(&raw)?;
    let (target, scored, shown) = if args.stage == 1 {
        (&model.stage1, scaled, raw)
    } else {
        let cells: Vec<Option<f64>> = predict_proba(&model.stage1, &scaled)?.into_iter().map(Some).collect();
        (
            &model.stage2,
            scaled.with_column(Column::new(PTC_COLUMN), &cells)?,
            raw.with_column(Column::new(PTC_COLUMN), &cells)?,
        )
    };
    let trees = ensemble(target)?;
    let attributions = explain_matrix(trees, &scored)?;
    let ranked = rank_mean_abs(&trees.feature_names, &attributions);
    run.write(
        "beeswarm.csv",
        &csv_bytes(|b| export_beeswarm(&attributions, &trees.feature_names, &shown, b))?,
    )?;
    run.write("importance.csv", &csv_bytes(|b| write_importance(&ranked, b))?)?;
    for (name, v) in ranked.iter().take(10) {
        say!("{name}: {v:.4}");
    }
    run.finish()?;
    Ok(0)
}

fn ablate(cli: &Cli, args: &AblateArgs) -> Result<i32> {
    let mut run = Run::new("ablate", cli.out.clone());
    let config = pipeline_config(&mut run, cli)?;
    let (matrix, labels) = load_rows(&mut run, &args.rows, None, true)?;
    let labels = labels.expect("labels requested");
    let subsets = if args.features.is_empty() {
        vec![Subset::All, Subset::Contextual, Subset::Physico]
    } else {
        args.features.clone()
    };
    let plan = plan_folds(&labels.ec, config.k, config.inner_fraction, config.seed)?;
    let logistic = Stage2Settings {
        learner: LearnerConfig::logistic().with_seed(derive_seed(config.seed, "ablate_logistic", 0)),
        ..config.stage2_settings()
    };
    let mut table = csv::Writer::from_writer(Vec::new());
    table.write_record([
        "subset", "model", "n_features", "roc_auc", "pr_auc", "brier", "f2", "mcc", "mean_fold_fbeta", "stage1_auc",
    ])?;
    for subset in subsets {
        let part = subset.select(&matrix);
        if part.n_cols() == 0 {
            bail!("feature subset '{}' has no columns", subset.name());
        }
        let mut two_stage = train_pipeline(&part, &labels.tc, &labels.ec, &config)?.report;
        two_stage.name = format!("{}_two_stage", subset.name());
        let mut baseline = run_stage2(&part, None, &labels.ec, &plan, &logistic)?;
        baseline.name = format!("{}_logistic", subset.name());
        for report in [&two_stage, &baseline] {
            run.write(&format!("ablation_{}.json", report.name), (report.to_json()? + "\n").as_bytes())?;
            let m = &report.metrics;
            table.write_record([
                subset.name().to_string(),
                report.name.clone(),
                part.n_cols().to_string(),
                m.roc_auc.to_string(),
                m.pr_auc.to_string(),
                m.brier.to_string(),
                m.f2.to_string(),
                m.mcc.to_string(),
                report.mean_fold_fbeta.to_string(),
                report.stage1_auc.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
            say!("{}", report_line(report));
        }
    }
    let bytes = table.into_inner().map_err(|e| anyhow::anyhow!("{}", e.error()))?;
    run.write("ablation.csv", &bytes)?;
    run.finish()?;
    Ok(0)
}
