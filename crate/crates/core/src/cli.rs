//! Command-line front end. Exit codes: 0 success, 2 usage, 3 I/O,
//! 4 data validation.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::error::Error;
use crate::eval::bootstrap::{metric_on, DEFAULT_BOOTSTRAP};
use crate::eval::{bootstrap_many, mean_rank, significance_matrix, EvalRecord, Metric, MetricTable};
use crate::io::{self, format_f64, Manifest, ManifestRow, ScoreTable};
use crate::map::FeatureVector;
use crate::meta_gmm::{fit_meta_report, EmConfig, FeatureMatrix, FeatureSetSpec, GmmModel, MetaConfig, Variant};
use crate::strategy::{parse_list, Strategy};
use crate::synth::{gen_benchmark, BenchmarkSpec, Pattern, RiskModel, SynthSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_DATA: i32 = 4;

const DEFAULTS: &str = "\
Defaults:
  eds edge threshold tau = 0.2, ent bin count b = 4
  gmm-fit: epsilon = 0.001, K_max = 10, restarts = 5, max_iter = 500,
           tol = 1e-6 (relative log-likelihood change), ridge = 1e-6, seed = 0
  eval: bootstrap B = 500, seed = 0
  rank: alpha = 0.05
Exit codes: 0 success, 2 usage error, 3 I/O error, 4 data validation error";

const STRATEGY_HELP: &str = "Comma-separated strategies: avg, plm:<patch>, ata:<T>, aqa:<q>, bca, ica, qfr, \
mor, eds[:<tau>] (tau defaults to 0.2), ent[:<b>] (b defaults to 4), gmm:<model.json>";

#[derive(Debug, Parser)]
#[command(name = "uncagg", version, about = "Aggregate pixel-wise uncertainty maps into image-level scores", after_help = DEFAULTS)]
struct Cli {
    /// Worker threads; 0 uses every available core. Output does not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute one score per strategy for every manifest row.
    Aggregate(AggregateArgs),
    /// Fit a Gaussian-mixture meta-aggregator on in-distribution scores.
    GmmFit(GmmFitArgs),
    /// Append the meta-aggregator's negative log-likelihood as an `nll` column.
    GmmScore(GmmScoreArgs),
    /// Bootstrap AUROC (OoD detection) or E-AURC (failure detection) per strategy.
    Eval(EvalArgs),
    /// Rank strategies across per-dataset metric tables.
    Rank(RankArgs),
    /// Write a synthetic benchmark: NPY maps plus a manifest.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct AggregateArgs {
    /// CSV with sample_id, map_path and optional mask_path, ood_label, risk.
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, help = STRATEGY_HELP)]
    strategies: String,
    /// Output score table.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GmmFitArgs {
    /// Score table with one column per strategy.
    #[arg(long)]
    features: PathBuf,
    /// Feature set: all, int, spa or custom.
    #[arg(long, default_value = "all")]
    variant: String,
    /// Strategy list for the custom variant.
    #[arg(long)]
    strategies: Option<String>,
    /// Largest number of mixture components considered.
    #[arg(long, default_value_t = 10)]
    kmax: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Rescaling margin: features are mapped onto [epsilon, 1 - epsilon].
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    /// EM restarts per K.
    #[arg(long, default_value_t = 5)]
    restarts: usize,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    /// Relative log-likelihood change that stops EM.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Added to covariance diagonals.
    #[arg(long, default_value_t = 1e-6)]
    ridge: f64,
    /// Output model JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GmmScoreArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// ood (AUROC on ood_label) or fd (E-AURC on risk, confidence = -score).
    #[arg(long)]
    task: String,
    /// Bootstrap resamples B.
    #[arg(long, default_value_t = DEFAULT_BOOTSTRAP)]
    bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Score columns to evaluate; defaults to every column.
    #[arg(long)]
    columns: Option<String>,
    /// Writes <prefix>_metrics.csv, <prefix>_bootstrap.csv and <prefix>_pvalues.csv.
    #[arg(long)]
    out_prefix: PathBuf,
}

#[derive(Debug, Args)]
struct RankArgs {
    /// Metric tables written by `eval`, one per dataset.
    #[arg(long, num_args = 1.., required = true)]
    inputs: Vec<PathBuf>,
    /// auroc (higher is better) or eaurc (lower is better).
    #[arg(long, default_value = "auroc")]
    metric: String,
    /// Significance level of the one-sided Wilcoxon tests.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Writes <prefix>_ranks.csv and <prefix>_pvalues.csv.
    #[arg(long)]
    out_prefix: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Benchmark JSON; replaces the pattern flags below.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 50)]
    n_iid: usize,
    #[arg(long, default_value_t = 50)]
    n_ood: usize,
    /// In-distribution archetype: constant, noise, blob, ring or checkerboard.
    #[arg(long, default_value = "noise")]
    iid: String,
    /// Shifted archetype.
    #[arg(long, default_value = "blob")]
    ood: String,
    #[arg(long, default_value_t = 64)]
    height: usize,
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Relative per-sample jitter.
    #[arg(long, default_value_t = 0.1)]
    jitter: f64,
    /// Rescale sample i of both populations to a shared target mean drawn from "lo,hi".
    #[arg(long)]
    matched_mean: Option<String>,
    /// Comma-separated shift intensities in [0, 1].
    #[arg(long)]
    ladder: Option<String>,
    /// Also write masks `u >= threshold`.
    #[arg(long)]
    mask_threshold: Option<f64>,
    #[arg(long, default_value_t = 0.8)]
    risk_beta: f64,
    #[arg(long, default_value_t = 0.05)]
    risk_noise: f64,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Lib(Error),
    Context(String, Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Lib(e) | CliError::Context(_, e) => {
                let io = match e {
                    Error::Io { .. } => true,
                    Error::Csv(c) => c.is_io_error(),
                    _ => false,
                };
                if io {
                    EXIT_IO
                } else {
                    EXIT_DATA
                }
            }
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Context(c, e) => write!(f, "{c}: {e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(e: impl fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::new()
        .filter_level(log::LevelFilter::Warn)
        .format_target(false)
        .format_timestamp(None)
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    match pool.install(|| dispatch(cli.command)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Aggregate(a) => aggregate(a),
        Command::GmmFit(a) => gmm_fit(a),
        Command::GmmScore(a) => gmm_score(a),
        Command::Eval(a) => eval(a),
        Command::Rank(a) => rank(a),
        Command::Synth(a) => synth(a),
    }
}

enum Column {
    Plain(Strategy),
    Gmm {
        name: String,
        model: Box<GmmModel>,
        features: Vec<Strategy>,
    },
}

impl Column {
    fn name(&self) -> String {
        match self {
            Column::Plain(s) => s.to_string(),
            Column::Gmm { name, .. } => name.clone(),
        }
    }

    fn needs_mask(&self) -> bool {
        match self {
            Column::Plain(s) => s.needs_mask(),
            Column::Gmm { features, .. } => features.iter().any(Strategy::needs_mask),
        }
    }
}

fn parse_columns(list: &str) -> CliResult<Vec<Column>> {
    let mut plain = Vec::new();
    let mut columns = Vec::new();
    for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some(path) = item.strip_prefix("gmm:") {
            let model = GmmModel::load(path).map_err(|e| CliError::Context(format!("model `{path}`"), e))?;
            let features = model.feature_spec.parsed().map_err(|e| {
                CliError::Context(format!("model `{path}` uses features that cannot be computed from a map"), e)
            })?;
            columns.push(Column::Gmm {
                name: item.to_string(),
                model: Box::new(model),
                features,
            });
        } else {
            let s: Strategy = item.parse().map_err(usage)?;
            plain.push(s);
            columns.push(Column::Plain(s));
        }
    }
    if columns.is_empty() {
        return Err(usage("no strategies given"));
    }
    // duplicate check after canonicalization
    let names: Vec<String> = columns.iter().map(Column::name).collect();
    for (i, n) in names.iter().enumerate() {
        if names[..i].contains(n) {
            return Err(usage(Error::DuplicateStrategy(n.clone())));
        }
    }
    if !plain.is_empty() {
        let joined: Vec<String> = plain.iter().map(Strategy::to_string).collect();
        parse_list(&joined.join(",")).map_err(usage)?;
    }
    Ok(columns)
}

fn aggregate_row(row: &ManifestRow, columns: &[Column]) -> CliResult<(Vec<Option<f64>>, Vec<String>)> {
    let ctx = |what: &str, e: Error| CliError::Context(format!("sample `{}`{what}", row.sample_id), e);
    let map = io::read_map(&row.map_path).map_err(|e| ctx("", e))?;
    let mask = row
        .mask_path
        .as_ref()
        .map(io::read_mask)
        .transpose()
        .map_err(|e| ctx("", e))?;
    let mut values = Vec::with_capacity(columns.len());
    let mut warnings = Vec::new();
    for col in columns {
        let result = match col {
            Column::Plain(s) => s.compute(&map, mask.as_ref()),
            Column::Gmm { model, features, .. } => features
                .iter()
                .map(|s| s.compute(&map, mask.as_ref()))
                .collect::<crate::Result<Vec<f64>>>()
                .and_then(|v| FeatureVector::new(model.feature_spec.strategies.clone(), v))
                .and_then(|fv| model.score(&fv)),
        };
        match result {
            Ok(v) => values.push(Some(v)),
            Err(Error::NoForeground) => {
                warnings.push(format!(
                    "sample `{}`, strategy `{}`: mask has no foreground; cell left empty",
                    row.sample_id,
                    col.name()
                ));
                values.push(None);
            }
            Err(e) => return Err(ctx(&format!(", strategy `{}`", col.name()), e)),
        }
    }
    Ok((values, warnings))
}

fn aggregate(a: AggregateArgs) -> CliResult<()> {
    let columns = parse_columns(&a.strategies)?;
    let manifest = io::read_manifest(&a.manifest)?;
    if let Some(col) = columns.iter().find(|c| c.needs_mask()) {
        if let Some(row) = manifest.rows.iter().find(|r| r.mask_path.is_none()) {
            return Err(CliError::Context(
                format!("sample `{}`", row.sample_id),
                Error::MaskRequired(col.name()),
            ));
        }
    }
    let results: Vec<CliResult<(Vec<Option<f64>>, Vec<String>)>> =
        manifest.rows.par_iter().map(|r| aggregate_row(r, &columns)).collect();
    let mut table = ScoreTable::new(columns.iter().map(Column::name).collect());
    let mut warnings = 0usize;
    for (row, result) in manifest.rows.iter().zip(results) {
        let (values, w) = result?;
        for line in &w {
            log::warn!("{line}");
        }
        warnings += w.len();
        table.push_row(row.sample_id.clone(), values)?;
    }
    io::write_scores(&a.out, &table)?;
    eprintln!(
        "aggregated {} samples x {} strategies, {warnings} warnings",
        table.len(),
        table.columns.len()
    );
    Ok(())
}

/// Renames parseable headers to their canonical strategy ids.
fn canonicalize(mut table: ScoreTable) -> CliResult<ScoreTable> {
    for i in 0..table.columns.len() {
        if let Ok(s) = table.columns[i].parse::<Strategy>() {
            let canon = s.to_string();
            if (table.columns[..i].contains(&canon) || table.columns[i + 1..].contains(&canon))
                && table.columns[i] != canon {
                    return Err(CliError::Lib(Error::DuplicateStrategy(canon)));
                }
            table.columns[i] = canon;
        }
    }
    Ok(table)
}

fn canonical_names(names: &[String]) -> Vec<String> {
    names
        .iter()
        .map(|n| n.parse::<Strategy>().map(|s| s.to_string()).unwrap_or_else(|_| n.clone()))
        .collect()
}

fn feature_spec(variant: &str, strategies: Option<&str>) -> CliResult<FeatureSetSpec> {
    let variant: Variant = variant.parse().map_err(usage)?;
    match (variant, strategies) {
        (Variant::Custom, Some(list)) => {
            let names: Vec<String> = list.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect();
            FeatureSetSpec::custom(canonical_names(&names)).map_err(usage)
        }
        (Variant::Custom, None) => Err(usage("--variant custom requires --strategies")),
        (v, None) => Ok(FeatureSetSpec::for_variant(v).expect("named variant")),
        (_, Some(_)) => Err(usage("--strategies is only valid with --variant custom")),
    }
}

fn gmm_fit(a: GmmFitArgs) -> CliResult<()> {
    let spec = feature_spec(&a.variant, a.strategies.as_deref())?;
    if a.kmax == 0 {
        return Err(usage("--kmax must be >= 1"));
    }
    if a.restarts == 0 || a.max_iter == 0 {
        return Err(usage("--restarts and --max-iter must be >= 1"));
    }
    if !(a.tol > 0.0 && a.ridge >= 0.0) {
        return Err(usage("--tol must be > 0 and --ridge >= 0"));
    }
    if !(a.epsilon > 0.0 && a.epsilon < 0.5) {
        return Err(usage(Error::InvalidEpsilon(a.epsilon)));
    }
    let table = canonicalize(io::read_scores(&a.features)?)?;
    let idx: Vec<usize> = spec
        .strategies
        .iter()
        .map(|s| table.column_index(s))
        .collect::<crate::Result<_>>()?;
    let mut rows = Vec::new();
    for (id, values) in table.ids.iter().zip(&table.values) {
        match idx.iter().map(|&j| values[j]).collect::<Option<Vec<f64>>>() {
            Some(r) => rows.push(r),
            None => log::warn!("sample `{id}`: missing feature value; row skipped"),
        }
    }
    let features = FeatureMatrix::from_rows(spec.strategies.clone(), &rows)?;
    let cfg = MetaConfig {
        epsilon: a.epsilon,
        k_max: a.kmax,
        em: EmConfig {
            seed: a.seed,
            restarts: a.restarts,
            max_iter: a.max_iter,
            tol: a.tol,
            ridge: a.ridge,
        },
    };
    let (model, candidates) = fit_meta_report(&features, &spec, &cfg)?;
    for c in &candidates {
        eprintln!("K={} bic={} loglik={}", c.k, format_f64(c.bic), format_f64(c.loglik));
    }
    model.save(&a.out)?;
    println!(
        "selected K={} BIC={} loglik={} (d={}, n={})",
        model.k,
        format_f64(model.bic),
        format_f64(model.loglik),
        model.dim(),
        model.n_train
    );
    Ok(())
}

fn gmm_score(a: GmmScoreArgs) -> CliResult<()> {
    let model = GmmModel::load(&a.model)?;
    let mut table = canonicalize(io::read_scores(&a.features)?)?;
    let names = &model.feature_spec.strategies;
    let idx: Vec<usize> = names.iter().map(|s| table.column_index(s)).collect::<crate::Result<_>>()?;
    let nll = table
        .ids
        .par_iter()
        .zip(&table.values)
        .map(|(id, values)| match idx.iter().map(|&j| values[j]).collect::<Option<Vec<f64>>>() {
            Some(v) => FeatureVector::new(names.clone(), v)
                .and_then(|fv| model.score(&fv))
                .map(Some)
                .map_err(|e| CliError::Context(format!("sample `{id}`"), e)),
            None => Ok(None),
        })
        .collect::<CliResult<Vec<Option<f64>>>>()?;
    let missing = nll.iter().filter(|v| v.is_none()).count();
    if missing > 0 {
        log::warn!("{missing} rows lack a feature value; their nll cell is empty");
    }
    table.push_column("nll".into(), nll)?;
    io::write_scores(&a.out, &table)?;
    Ok(())
}

fn eval_records(scores: &ScoreTable, manifest: &Manifest, columns: &[String], metric: Metric) -> CliResult<Vec<EvalRecord>> {
    let by_id: HashMap<&str, &ManifestRow> = manifest.rows.iter().map(|r| (r.sample_id.as_str(), r)).collect();
    let idx: Vec<usize> = columns.iter().map(|c| scores.column_index(c)).collect::<crate::Result<_>>()?;
    let mut records = Vec::new();
    let mut dropped = 0;
    for (id, values) in scores.ids.iter().zip(&scores.values) {
        let row = by_id.get(id.as_str()).ok_or_else(|| {
            CliError::Lib(Error::FeatureMismatch(format!("sample `{id}` is not in the manifest")))
        })?;
        let Some(v) = idx.iter().map(|&j| values[j]).collect::<Option<Vec<f64>>>() else {
            dropped += 1;
            continue;
        };
        let missing = |c: &str| CliError::Lib(Error::MissingColumn(format!("{c} (sample `{id}`)")));
        match metric {
            Metric::Auroc if row.ood_label.is_none() => return Err(missing("ood_label")),
            Metric::Eaurc if row.risk.is_none() => return Err(missing("risk")),
            _ => {}
        }
        records.push(EvalRecord {
            sample_id: id.clone(),
            scores: FeatureVector::new(columns.to_vec(), v)?,
            ood_label: row.ood_label,
            risk: row.risk,
        });
    }
    if dropped > 0 {
        log::warn!("{dropped} samples with empty score cells were excluded");
    }
    Ok(records)
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn csv_writer(path: &Path) -> CliResult<csv::Writer<fs::File>> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

fn finish(mut w: csv::Writer<fs::File>, path: &Path) -> CliResult<()> {
    w.flush().map_err(|e| CliError::Lib(Error::io(path, e)))
}

fn write_pvalues(path: &Path, names: &[String], p: &[Vec<f64>]) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["strategy".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header).map_err(Error::from)?;
    for (n, row) in names.iter().zip(p) {
        let mut rec = vec![n.clone()];
        rec.extend(row.iter().map(|&v| format_f64(v)));
        w.write_record(&rec).map_err(Error::from)?;
    }
    finish(w, path)
}

fn eval(a: EvalArgs) -> CliResult<()> {
    let metric = match a.task.to_ascii_lowercase().as_str() {
        "ood" => Metric::Auroc,
        "fd" => Metric::Eaurc,
        other => return Err(usage(format!("unknown task `{other}` (expected ood or fd)"))),
    };
    if a.bootstrap == 0 {
        return Err(usage("--bootstrap must be >= 1"));
    }
    let scores = io::read_scores(&a.scores)?;
    let manifest = io::read_manifest(&a.manifest)?;
    let columns: Vec<String> = match &a.columns {
        Some(list) => list.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect(),
        None => scores.columns.clone(),
    };
    if columns.is_empty() {
        return Err(usage("no score columns to evaluate"));
    }
    let records = eval_records(&scores, &manifest, &columns, metric)?;
    let all: Vec<usize> = (0..records.len()).collect();
    let estimates = columns
        .iter()
        .map(|c| metric_on(&records, &all, c, metric))
        .collect::<crate::Result<Vec<f64>>>()?;
    let boot = bootstrap_many(&records, &columns, metric, a.bootstrap, a.seed)?;

    let metrics_path = with_suffix(&a.out_prefix, "_metrics.csv");
    let mut w = csv_writer(&metrics_path)?;
    w.write_record(["strategy", "metric", "estimate", "mean", "std"]).map_err(Error::from)?;
    println!("strategy\t{metric}\tmean\tstd");
    for ((c, est), b) in columns.iter().zip(&estimates).zip(&boot) {
        w.write_record([c.clone(), metric.to_string(), format_f64(*est), format_f64(b.mean), format_f64(b.std)])
            .map_err(Error::from)?;
        println!("{c}\t{est:.4}\t{:.4}\t{:.4}", b.mean, b.std);
    }
    finish(w, &metrics_path)?;

    let boot_path = with_suffix(&a.out_prefix, "_bootstrap.csv");
    let mut w = csv_writer(&boot_path)?;
    let mut header = vec!["iteration".to_string()];
    header.extend(columns.iter().cloned());
    w.write_record(&header).map_err(Error::from)?;
    for i in 0..a.bootstrap {
        let mut rec = vec![i.to_string()];
        rec.extend(boot.iter().map(|b| format_f64(b.samples[i])));
        w.write_record(&rec).map_err(Error::from)?;
    }
    finish(w, &boot_path)?;

    let samples: Vec<Vec<f64>> = boot.into_iter().map(|b| b.samples).collect();
    let p = significance_matrix(&samples, metric.direction())?;
    write_pvalues(&with_suffix(&a.out_prefix, "_pvalues.csv"), &columns, &p)?;
    Ok(())
}

/// Reads one `eval` metric table as strategy → bootstrap mean.
fn read_metric_table(path: &Path, metric: Metric) -> CliResult<MetricTable> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(f);
    let headers = r.headers().map_err(Error::from)?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Lib(Error::MissingColumn(name.to_string())))
    };
    let (s_col, m_col, mean_col) = (col("strategy")?, col("metric")?, col("mean")?);
    let mut table = MetricTable::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(Error::from)?;
        let parse_err = |column: &str, message: String| Error::Parse {
            row: i + 1,
            column: column.into(),
            message,
        };
        let m: Metric = rec[m_col].parse().map_err(|e: Error| parse_err("metric", e.to_string()))?;
        if m != metric {
            continue;
        }
        let v: f64 = rec[mean_col]
            .parse()
            .map_err(|_| parse_err("mean", format!("`{}` is not a number", &rec[mean_col])))?;
        if table.insert(rec[s_col].to_string(), v).is_some() {
            return Err(CliError::Lib(Error::DuplicateId(rec[s_col].to_string())));
        }
    }
    if table.is_empty() {
        return Err(CliError::Context(
            path.display().to_string(),
            Error::MissingColumn(format!("rows for metric {metric}")),
        ));
    }
    Ok(table)
}

fn rank(a: RankArgs) -> CliResult<()> {
    let metric: Metric = a.metric.parse().map_err(usage)?;
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(usage("--alpha must lie in (0, 1)"));
    }
    let tables = a
        .inputs
        .iter()
        .map(|p| read_metric_table(p, metric).map_err(|e| match e {
            CliError::Lib(inner) => CliError::Context(p.display().to_string(), inner),
            other => other,
        }))
        .collect::<CliResult<Vec<MetricTable>>>()?;
    let ranks = mean_rank(&tables, metric.direction())?;
    // paired across datasets, in rank order
    let names: Vec<String> = ranks.iter().map(|(n, _)| n.clone()).collect();
    let per_strategy: Vec<Vec<f64>> = names.iter().map(|n| tables.iter().map(|t| t[n]).collect()).collect();
    let p = significance_matrix(&per_strategy, metric.direction())?;
    let wins: Vec<usize> = p.iter().map(|row| row.iter().filter(|&&v| v < a.alpha).count()).collect();

    println!("strategy\tmean_rank\tsignificant_wins");
    for ((n, r), w) in ranks.iter().zip(&wins) {
        println!("{n}\t{r:.3}\t{w}");
    }
    if let Some(prefix) = &a.out_prefix {
        let path = with_suffix(prefix, "_ranks.csv");
        let mut w = csv_writer(&path)?;
        w.write_record(["strategy", "mean_rank", "significant_wins"]).map_err(Error::from)?;
        for ((n, r), k) in ranks.iter().zip(&wins) {
            w.write_record([n.clone(), format_f64(*r), k.to_string()]).map_err(Error::from)?;
        }
        finish(w, &path)?;
        write_pvalues(&with_suffix(prefix, "_pvalues.csv"), &names, &p)?;
    }
    Ok(())
}

fn parse_f64_list(text: &str, flag: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| usage(format!("{flag}: `{t}` is not a number"))))
        .collect()
}

fn synth_spec(a: &SynthArgs) -> CliResult<BenchmarkSpec> {
    if let Some(path) = &a.spec {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        return Ok(serde_json::from_str(&text).map_err(Error::from)?);
    }
    let pattern = |name: &str| Pattern::archetype(name, a.height, a.width).map_err(usage);
    let iid = SynthSpec::new(pattern(&a.iid)?, a.height, a.width, 0);
    let ood = SynthSpec::new(pattern(&a.ood)?, a.height, a.width, 0);
    let mut spec = BenchmarkSpec::new(a.n_iid, a.n_ood, iid, ood, a.seed);
    spec.jitter = a.jitter;
    spec.matched_mean = match &a.matched_mean {
        Some(t) => match parse_f64_list(t, "--matched-mean")?.as_slice() {
            [lo, hi] => Some((*lo, *hi)),
            _ => return Err(usage("--matched-mean expects lo,hi")),
        },
        None => None,
    };
    spec.ladder = a.ladder.as_deref().map(|t| parse_f64_list(t, "--ladder")).transpose()?;
    spec.mask_threshold = a.mask_threshold;
    spec.risk = RiskModel {
        beta: a.risk_beta,
        noise: a.risk_noise,
    };
    Ok(spec)
}

fn synth(a: SynthArgs) -> CliResult<()> {
    let spec = synth_spec(&a)?;
    let samples = gen_benchmark(&spec).map_err(|e| match e {
        Error::InvalidSpec(_) if a.spec.is_none() => usage(e),
        e => CliError::Lib(e),
    })?;
    let maps = a.out_dir.join("maps");
    fs::create_dir_all(&maps).map_err(|e| Error::io(&maps, e))?;
    let masks = a.out_dir.join("masks");
    if spec.mask_threshold.is_some() {
        fs::create_dir_all(&masks).map_err(|e| Error::io(&masks, e))?;
    }
    samples
        .par_iter()
        .map(|s| {
            io::write_map(maps.join(format!("{}.npy", s.id)), &s.map)?;
            if let Some(m) = &s.mask {
                io::write_mask(masks.join(format!("{}.npy", s.id)), m)?;
            }
            Ok(())
        })
        .collect::<crate::Result<Vec<()>>>()?;
    let manifest = Manifest {
        rows: samples
            .iter()
            .map(|s| ManifestRow {
                sample_id: s.id.clone(),
                map_path: PathBuf::from(format!("maps/{}.npy", s.id)),
                mask_path: s.mask.as_ref().map(|_| PathBuf::from(format!("masks/{}.npy", s.id))),
                ood_label: Some(s.ood_label),
                risk: Some(s.risk),
            })
            .collect(),
    };
    io::write_manifest(a.out_dir.join("manifest.csv"), &manifest)?;
    eprintln!("wrote {} maps to {}", samples.len(), a.out_dir.display());
    Ok(())
}
