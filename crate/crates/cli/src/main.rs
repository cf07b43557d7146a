//! `rankrobust` command-line pipeline.
//!
//! Exit status: 0 on success, 1 on invalid input or usage, 2 on internal failure.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use rankrobust::ensemble::{series_from_datasets, smoothed_vs_single};
use rankrobust::ingest::{
    filter_week, parse_log_file, read_dataset_dir, split_by_week, write_dataset_dir,
    DatasetCollection, FilterParams, FilteredWeek,
};
use rankrobust::metrics::RdsResult;
use rankrobust::normalize::{normalize_query, StemmerKind};
use rankrobust::pairs::{
    evaluate_pair, evaluation_row, parse_evaluation_row, read_pairs, sort_canonical, topk_pairs,
    tps_pairs, write_pairs, SimScoreTable, DEFAULT_TOP_K,
};
use rankrobust::report::{correlate, trend, HistogramBuilder, HistogramReport};
use rankrobust::synth::{gen_log, LogSpec, NoiseModel};
use rankrobust::taxonomy::classify_corpus;
use rankrobust::{NormalizationConfig, QueryPair};

const SCORE_CHUNK: usize = 1 << 16;
const EVALUATION_HEADER: &str = "# q1\tq2\tsource\tsim_score\tweek\traw\tnormalized\tsimilarity";

#[derive(Debug)]
enum Failure {
    Input(anyhow::Error),
    Internal(anyhow::Error),
}

impl From<rankrobust::Error> for Failure {
    fn from(e: rankrobust::Error) -> Self {
        Failure::Input(e.into())
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn input_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Input(e.into())
}

fn internal(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Internal(e.into())
}

#[derive(Parser, Debug)]
#[command(
    name = "rankrobust",
    version,
    about = "Ranking robustness analysis over search logs"
)]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    /// Increase log verbosity on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Filter a raw log into a weekly dataset directory, or print TPS keys of queries.
    Normalize(NormalizeArgs),
    /// Build query pairs from TPS keys or from similarity scores.
    Pairs(PairsArgs),
    /// Compute RDS for every pair.
    Score(ScoreArgs),
    /// Histogram of normalized RDS from a score file.
    Histogram(HistogramArgs),
    /// Per-bin mean and STD across weekly histograms.
    Trend(TrendArgs),
    /// Label pairs with their surface-difference category.
    Taxonomy(TaxonomyArgs),
    /// Compare RDS with and without snapshot ensembling.
    Ensemble(EnsembleArgs),
    /// Pearson correlation between similarity scores and normalized RDS.
    Correlate(CorrelateArgs),
    /// Generate a synthetic log with ground truth.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
struct ConfigArgs {
    /// Normalization config file (stemmer/stopword/abbrev/plural directives).
    #[arg(long, env = "RANKROBUST_NORM_CONFIG")]
    config: Option<PathBuf>,

    /// Override the stemmer: snowball, plural or none.
    #[arg(long)]
    stemmer: Option<StemmerKind>,
}

impl ConfigArgs {
    fn load(&self) -> CliResult<NormalizationConfig> {
        let cfg = match &self.config {
            Some(path) => NormalizationConfig::from_file(path)
                .with_context(|| format!("reading config {}", path.display()))
                .map_err(input_err)?,
            None => NormalizationConfig::default(),
        };
        Ok(match self.stemmer {
            Some(s) => cfg.with_stemmer(s),
            None => cfg,
        })
    }
}

#[derive(Args, Debug)]
struct NormalizeArgs {
    /// Raw log TSV: week, locale, query, item, avg_position, frequency.
    #[arg(long, conflicts_with = "queries", required_unless_present_any = ["queries", "print_default_config"])]
    log: Option<PathBuf>,

    /// Output dataset directory.
    #[arg(long, required_unless_present_any = ["queries", "print_default_config"], env = "RANKROBUST_DATASET")]
    out: Option<PathBuf>,

    /// Print `query<TAB>key` for each line of this file (`-` for stdin).
    #[arg(long)]
    queries: Option<PathBuf>,

    /// Print the built-in normalization config and exit.
    #[arg(long)]
    print_default_config: bool,

    /// Allowed locale; repeat for several.
    #[arg(long = "locale", default_values_t = ["en-US".to_owned()])]
    locales: Vec<String>,

    /// Fraction of low-frequency records dropped per week.
    #[arg(long, default_value_t = 0.20)]
    bottom_cut: f64,

    /// Minimum ranked-list length; longer lists are truncated.
    #[arg(long, default_value_t = 20)]
    min_len: usize,

    /// Queries kept per TPS group.
    #[arg(long, default_value_t = 3)]
    top_k: usize,

    /// Fail on the first malformed log line instead of skipping it.
    #[arg(long)]
    strict: bool,

    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args, Debug)]
struct PairsArgs {
    /// Dataset directory written by `normalize`.
    #[arg(long, env = "RANKROBUST_DATASET")]
    dataset: Option<PathBuf>,

    /// Similarity score TSV (query_a, query_b, score); switches to top-k pairing.
    #[arg(long, requires = "week")]
    sim: Option<PathBuf>,

    /// Week for SIM pairs; restricts TPS pairing to one week.
    #[arg(long)]
    week: Option<NaiveDate>,

    /// Partners kept per query in SIM mode.
    #[arg(long, default_value_t = DEFAULT_TOP_K)]
    k: usize,

    /// Minimum similarity score in SIM mode.
    #[arg(long, default_value_t = 0.0)]
    min_score: f64,

    /// Output pairs TSV (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,

    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    /// Pairs TSV.
    #[arg(long)]
    pairs: PathBuf,

    /// Dataset directory.
    #[arg(long, env = "RANKROBUST_DATASET")]
    dataset: PathBuf,

    /// Output score TSV (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct HistogramArgs {
    /// Score TSV from `score` (`-` for stdin).
    #[arg(long = "in")]
    input: PathBuf,

    /// Bin width; must divide [0, 1] evenly.
    #[arg(long = "bin", default_value_t = 0.1)]
    bin_width: f64,

    /// Week to record; inferred when the input covers a single week.
    #[arg(long)]
    week: Option<NaiveDate>,

    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,

    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrendArgs {
    /// Weekly histogram JSON files.
    #[arg(long = "in", num_args = 2.., required = true)]
    inputs: Vec<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,

    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TaxonomyArgs {
    /// Pairs TSV.
    #[arg(long)]
    pairs: PathBuf,

    /// Label table CSV (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Write unclassified pairs here for manual review.
    #[arg(long)]
    overflow: Option<PathBuf>,

    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args, Debug)]
struct EnsembleArgs {
    /// Pairs TSV.
    #[arg(long)]
    pairs: PathBuf,

    /// Dataset directory with several weeks.
    #[arg(long, env = "RANKROBUST_DATASET")]
    dataset: PathBuf,

    /// Single-snapshot week to compare against (default: latest week).
    #[arg(long)]
    week: Option<NaiveDate>,

    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CorrelateArgs {
    /// Score TSV from `score`; only SIM rows are used.
    #[arg(long = "in")]
    input: PathBuf,

    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,

    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Query groups; each group shares a TPS key and a true ranking.
    #[arg(long, default_value_t = 100)]
    queries: usize,

    #[arg(long, default_value_t = 5)]
    weeks: usize,

    /// identity, shuffle, jitter[:MIN:MAX], dropout[:MIN:MAX], adjacent_swap:J,
    /// top_swap, tail_replace:M, truncate:M or permute.
    #[arg(long, default_value = "identity")]
    noise: NoiseModel,

    #[arg(long, default_value_t = 20)]
    list_len: usize,

    /// Output directory for log.tsv and truth.tsv.
    #[arg(long, env = "RANKROBUST_SYNTH_OUT")]
    out: PathBuf,
}

fn open_input(path: &Path) -> CliResult<Box<dyn BufRead>> {
    if path.as_os_str() == "-" {
        return Ok(Box::new(BufReader::new(io::stdin())));
    }
    let f = File::open(path)
        .with_context(|| format!("opening {}", path.display()))
        .map_err(input_err)?;
    Ok(Box::new(BufReader::new(f)))
}

fn open_output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    match path {
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(parent)
                    .with_context(|| format!("creating {}", parent.display()))
                    .map_err(internal)?;
            }
            let f = File::create(p)
                .with_context(|| format!("creating {}", p.display()))
                .map_err(internal)?;
            Ok(Box::new(BufWriter::new(f)))
        }
    }
}

fn emit(path: Option<&Path>, text: &str) -> CliResult {
    let mut w = open_output(path)?;
    w.write_all(text.as_bytes()).map_err(internal)?;
    w.flush().map_err(internal)
}

fn load_dataset(dir: &Path) -> CliResult<DatasetCollection> {
    read_dataset_dir(dir)
        .with_context(|| format!("reading dataset {}", dir.display()))
        .map_err(input_err)
}

fn load_pairs(path: &Path) -> CliResult<Vec<QueryPair>> {
    Ok(read_pairs(open_input(path)?)?)
}

fn run_normalize(a: &NormalizeArgs) -> CliResult {
    let cfg = a.config.load()?;
    if a.print_default_config {
        return emit(None, &cfg.to_directives());
    }
    if let Some(qpath) = &a.queries {
        let mut out = open_output(None)?;
        for line in open_input(qpath)?.lines() {
            let q = line.map_err(input_err)?;
            let q = q.trim();
            if q.is_empty() {
                continue;
            }
            let key = match normalize_query(q, &cfg) {
                Ok(k) => k.key(),
                Err(rankrobust::Error::EmptyKey(_)) => String::new(),
                Err(e) => return Err(e.into()),
            };
            writeln!(out, "{q}\t{key}").map_err(internal)?;
        }
        return out.flush().map_err(internal);
    }
    let log_path = a
        .log
        .as_ref()
        .ok_or_else(|| input_err(anyhow!("--log is required")))?;
    let out_dir = a
        .out
        .as_ref()
        .ok_or_else(|| input_err(anyhow!("--out is required")))?;
    let params = FilterParams {
        locale_allow: a.locales.iter().cloned().collect::<BTreeSet<_>>(),
        bottom_cut: a.bottom_cut,
        min_len: a.min_len,
        top_k_queries_per_tps: a.top_k,
    };
    params.validate()?;
    let parsed = parse_log_file(log_path, a.strict)
        .with_context(|| format!("reading log {}", log_path.display()))
        .map_err(input_err)?;
    if parsed.malformed > 0 {
        log::warn!("skipped {} malformed lines", parsed.malformed);
    }
    let weeks: Vec<_> = split_by_week(parsed.records).into_values().collect();
    let filtered: Vec<FilteredWeek> = weeks
        .par_iter()
        .map(|recs| filter_week(recs, &params, &cfg))
        .collect::<Result<_, _>>()?;
    for fw in &filtered {
        log::info!(
            "{}: {} queries from {} records",
            fw.dataset.week,
            fw.dataset.lists.len(),
            fw.stats.input_records
        );
    }
    write_dataset_dir(out_dir, &filtered, &params, parsed.malformed).map_err(internal)?;
    Ok(())
}

fn run_pairs(a: &PairsArgs) -> CliResult {
    let mut pairs = if let Some(sim) = &a.sim {
        let week = a.week.expect("clap enforces --week");
        let table = SimScoreTable::read_tsv(open_input(sim)?)?;
        topk_pairs(&table, a.k, a.min_score, week)?
    } else {
        let dir = a
            .dataset
            .as_ref()
            .ok_or_else(|| input_err(anyhow!("--dataset or --sim is required")))?;
        let cfg = a.config.load()?;
        let data = load_dataset(dir)?;
        let mut all = Vec::new();
        for ds in data.iter().filter(|ds| a.week.is_none_or(|w| w == ds.week)) {
            all.extend(tps_pairs(ds, &cfg));
        }
        all
    };
    sort_canonical(&mut pairs);
    log::info!("{} pairs", pairs.len());
    let mut w = open_output(a.out.as_deref())?;
    write_pairs(&mut w, &pairs).map_err(internal)?;
    w.flush().map_err(internal)
}

fn run_score(a: &ScoreArgs) -> CliResult {
    let data = load_dataset(&a.dataset)?;
    let mut reader = open_input(&a.pairs)?;
    let mut out = open_output(a.out.as_deref())?;
    writeln!(out, "{EVALUATION_HEADER}").map_err(internal)?;
    let (mut scored, mut skipped, mut line_no) = (0usize, 0usize, 0usize);
    let mut chunk: Vec<QueryPair> = Vec::with_capacity(SCORE_CHUNK);
    let mut line = String::new();
    loop {
        line.clear();
        let eof = reader.read_line(&mut line).map_err(input_err)? == 0;
        if !eof {
            line_no += 1;
            let text = line.trim_end_matches(['\n', '\r']);
            if !text.trim().is_empty() && !text.starts_with('#') {
                chunk.push(QueryPair::parse_tsv(text, line_no)?);
            }
        }
        if chunk.len() == SCORE_CHUNK || (eof && !chunk.is_empty()) {
            let results: Vec<Option<RdsResult>> =
                chunk.par_iter().map(|p| evaluate_pair(p, &data)).collect();
            for (p, r) in chunk.iter().zip(results) {
                match r {
                    Some(r) => {
                        writeln!(out, "{}", evaluation_row(p, &r)).map_err(internal)?;
                        scored += 1;
                    }
                    None => skipped += 1,
                }
            }
            chunk.clear();
        }
        if eof {
            break;
        }
    }
    out.flush().map_err(internal)?;
    log::info!("scored {scored} pairs, skipped {skipped} without lists");
    Ok(())
}

/// Streams `(pair, result)` rows of a score file.
fn for_each_score(path: &Path, mut f: impl FnMut(QueryPair, RdsResult) -> CliResult) -> CliResult {
    for (idx, line) in open_input(path)?.lines().enumerate() {
        let line = line.map_err(input_err)?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (pair, r) = parse_evaluation_row(&line, idx + 1)?;
        f(pair, r)?;
    }
    Ok(())
}

fn write_report(
    path: Option<&Path>,
    format: Format,
    csv: String,
    json: impl FnOnce() -> rankrobust::Result<String>,
) -> CliResult {
    match format {
        Format::Csv => emit(path, &csv),
        Format::Json => emit(path, &json().map_err(internal)?),
    }
}

fn run_histogram(a: &HistogramArgs) -> CliResult {
    let mut builder = HistogramBuilder::new(a.bin_width)?;
    let mut weeks = BTreeSet::new();
    for_each_score(&a.input, |pair, r| {
        weeks.insert(pair.week);
        Ok(builder.push(r.normalized)?)
    })?;
    let week = a
        .week
        .or_else(|| (weeks.len() == 1).then(|| *weeks.first().unwrap()));
    let report = builder.with_week(week).finish();
    write_report(a.out.as_deref(), a.format, report.to_csv(), || {
        report.to_json()
    })
}

fn run_trend(a: &TrendArgs) -> CliResult {
    let reports = a
        .inputs
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p)
                .with_context(|| format!("reading {}", p.display()))
                .map_err(input_err)?;
            HistogramReport::from_json(&text)
                .with_context(|| format!("parsing {}", p.display()))
                .map_err(input_err)
        })
        .collect::<CliResult<Vec<_>>>()?;
    let t = trend(&reports)?;
    write_report(a.out.as_deref(), a.format, t.to_csv(), || t.to_json())
}

fn run_taxonomy(a: &TaxonomyArgs) -> CliResult {
    let cfg = a.config.load()?;
    let pairs = load_pairs(&a.pairs)?;
    let table = classify_corpus(&pairs, &cfg)?;
    if let Some(path) = &a.overflow {
        let mut w = open_output(Some(path))?;
        write_pairs(&mut w, &table.overflow).map_err(internal)?;
        w.flush().map_err(internal)?;
    }
    emit(a.out.as_deref(), &table.to_csv())
}

fn run_ensemble(a: &EnsembleArgs) -> CliResult {
    let data = load_dataset(&a.dataset)?;
    let week = match a.week {
        Some(w) => w,
        None => *data
            .weeks
            .keys()
            .next_back()
            .ok_or_else(|| input_err(anyhow!("dataset has no weeks")))?,
    };
    let pairs = load_pairs(&a.pairs)?;
    let series = series_from_datasets(&data);
    let cmp = smoothed_vs_single(&pairs, &series, week)?;
    log::info!("compared {} pairs, skipped {}", cmp.evaluated, cmp.skipped);
    emit(a.out.as_deref(), &cmp.to_csv())
}

fn run_correlate(a: &CorrelateArgs) -> CliResult {
    let mut points = Vec::new();
    let mut ignored = 0usize;
    for_each_score(&a.input, |pair, r| {
        match pair.sim_score {
            Some(s) => points.push((s, r.normalized)),
            None => ignored += 1,
        }
        Ok(())
    })?;
    if ignored > 0 {
        log::info!("ignored {ignored} rows without a similarity score");
    }
    let rep = correlate(&points);
    if !rep.is_defined() {
        log::warn!("correlation undefined for {} points", rep.n);
    }
    write_report(a.out.as_deref(), a.format, rep.to_csv(), || rep.to_json())
}

fn run_synth(a: &SynthArgs) -> CliResult {
    let spec = LogSpec {
        queries: a.queries,
        weeks: a.weeks,
        list_len: a.list_len,
        noise: a.noise,
        seed: a.seed,
        ..LogSpec::default()
    };
    spec.validate()?;
    fs::create_dir_all(&a.out)
        .with_context(|| format!("creating {}", a.out.display()))
        .map_err(internal)?;
    let log_w = open_output(Some(&a.out.join("log.tsv")))?;
    let truth_w = open_output(Some(&a.out.join("truth.tsv")))?;
    let summary = gen_log(&spec, log_w, truth_w).map_err(internal)?;
    log::info!(
        "{} groups, {} queries, {} records",
        summary.groups,
        summary.queries,
        summary.records + summary.foreign_records
    );
    Ok(())
}

fn dispatch(cmd: &Command) -> CliResult {
    match cmd {
        Command::Normalize(a) => run_normalize(a),
        Command::Pairs(a) => run_pairs(a),
        Command::Score(a) => run_score(a),
        Command::Histogram(a) => run_histogram(a),
        Command::Trend(a) => run_trend(a),
        Command::Taxonomy(a) => run_taxonomy(a),
        Command::Ensemble(a) => run_ensemble(a),
        Command::Correlate(a) => run_correlate(a),
        Command::Synth(a) => run_synth(a),
    }
}

fn run(cli: Cli) -> CliResult {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(input_err(anyhow!("--jobs must be at least 1")));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(internal)?;
    pool.install(|| dispatch(&cli.command))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();

    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(Failure::Input(e))) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Ok(Err(Failure::Internal(e))) => {
            eprintln!("internal error: {e:#}");
            ExitCode::from(2)
        }
        Err(_) => ExitCode::from(2),
    }
}
