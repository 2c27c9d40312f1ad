//! `sepidx` command-line front end.
//!
//! Each subcommand is a thin adapter over `sepidx_core`. Exit codes: 0 on
//! success, 2 for usage, parse and validation errors, 1 for internal faults.
//! Results go to stdout, errors to stderr.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use sepidx_core::formats::{self, CsvError, ManifestError, SidxError};
use sepidx_core::model::{InputDigest, RunMetadata};
use sepidx_core::ranking::RankingError;
use sepidx_core::reporting::{self, CorrelationSummary, ReportingError};
use sepidx_core::stability::StabilityError;
use sepidx_core::{engine, rank_candidates, stability_study, RankingReport, StabilityOptions};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(name = "sepidx", version, about = "Separation Index scoring and ranking of feature extractors")]
pub struct Cli {
    /// Worker threads (default: hardware parallelism). Results do not depend on it.
    #[arg(long, global = true, env = "SEPIDX_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the SI of one embedding file.
    Si(SiArgs),
    /// Rank and reject candidates listed in a manifest.
    Rank(RankArgs),
    /// Re-score candidates on random subsamples of the target set.
    Stability(StabilityArgs),
    /// Correlate a ranking report with measured accuracies.
    Correlate(CorrelateArgs),
}

#[derive(Debug, Args)]
pub struct SiArgs {
    /// SIDX file, or CSV with --csv (or a .csv extension).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub csv: bool,
    #[arg(long, default_value = formats::manifest::DEFAULT_LABEL_COLUMN)]
    pub label_column: String,
    /// Print the full score as JSON instead of the bare value.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Zero timestamps so the report is byte-reproducible.
    #[arg(long)]
    pub canonical: bool,
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Comma-separated subsample fractions in (0, 1].
    #[arg(long, value_delimiter = ',', default_value = "1.0,0.75,0.5")]
    pub fractions: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    pub trials: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sample each class in proportion to its size.
    #[arg(long)]
    pub stratified: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub canonical: bool,
}

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    /// Ranking report written by `sepidx rank`.
    #[arg(long)]
    pub report: PathBuf,
    /// JSON object mapping candidate name to accuracy.
    #[arg(long)]
    pub accuracies: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub canonical: bool,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Input { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Sidx(#[from] SidxError),
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Ranking(#[from] RankingError),
    #[error(transparent)]
    Stability(#[from] StabilityError),
    #[error(transparent)]
    Reporting(#[from] ReportingError),
    #[error("cannot write {}: {source}", path.display())]
    Output { path: PathBuf, source: std::io::Error },
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Output { .. } | CliError::Internal(_) => 1,
            _ => 2,
        }
    }
}

fn read_input(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|source| CliError::Input {
        path: path.to_path_buf(),
        source,
    })
}

fn write_output(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|source| CliError::Output {
        path: path.to_path_buf(),
        source,
    })
}

fn digest(role: impl Into<String>, path: &Path, shown: impl Into<String>) -> Result<InputDigest, CliError> {
    let bytes = read_input(path)?;
    Ok(InputDigest {
        role: role.into(),
        path: shown.into(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

fn metadata(canonical: bool) -> RunMetadata {
    let generated_unix = if canonical {
        0
    } else {
        SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
    };
    RunMetadata {
        generated_unix,
        ..RunMetadata::default()
    }
}

fn manifest_digests(manifest_path: &Path, manifest: &formats::RunManifest) -> Result<Vec<InputDigest>, CliError> {
    let mut inputs = vec![digest("manifest", manifest_path, manifest_path.display().to_string())?];
    for (role, file) in manifest.files() {
        inputs.push(digest(role, &file.resolved, file.declared.clone())?);
    }
    Ok(inputs)
}

fn cmd_si(args: &SiArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let is_csv = args.csv || args.input.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let fs = if is_csv {
        formats::read_csv(&args.input, &args.label_column)?
    } else {
        formats::read_sidx(&args.input)?
    };
    let score = engine::separation_index(&fs);
    let text = if args.json {
        String::from_utf8(reporting::to_canonical_json(&score)?).expect("canonical JSON is UTF-8")
    } else {
        format!("{:.6}\n", score.si_value)
    };
    emit(out, &text)
}

/// Human-readable ranking table, in report order.
pub fn ranking_table(report: &RankingReport) -> String {
    let width = report
        .all_scores()
        .map(|s| s.candidate_name.chars().count())
        .max()
        .unwrap_or(0)
        .max("candidate".len());
    let mut text = format!("{:<4}  {:<width$}  {:>8}  status\n", "rank", "candidate", "SI");
    for (i, s) in report.accepted.iter().enumerate() {
        let _ = writeln!(text, "{:<4}  {:<width$}  {:>8.6}  ACCEPTED", i + 1, s.candidate_name, s.si_value);
    }
    for s in &report.rejected {
        let _ = writeln!(text, "{:<4}  {:<width$}  {:>8.6}  REJECTED", "-", s.candidate_name, s.si_value);
    }
    let _ = writeln!(
        text,
        "baseline SI {:.6}; accepted {}, rejected {}",
        report.baseline_si,
        report.accepted.len(),
        report.rejected.len()
    );
    text
}

fn cmd_rank(args: &RankArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let manifest = formats::load_manifest(&args.manifest)?;
    let inputs = manifest.load_inputs()?;
    let mut report = rank_candidates(&inputs.baseline, &inputs.candidates)?;
    let fixture_mode = report.metadata.fixture_mode;
    let accuracies = std::mem::take(&mut report.metadata.reported_accuracies);
    let mut notes = std::mem::take(&mut report.metadata.notes);
    notes.extend(inputs.notes);
    report.metadata = RunMetadata {
        fixture_mode,
        inputs: manifest_digests(&args.manifest, &manifest)?,
        reported_accuracies: accuracies,
        notes,
        ..metadata(args.canonical)
    };
    write_output(&args.out, &reporting::emit_json(&report))?;
    emit(out, &ranking_table(&report))
}

fn cmd_stability(args: &StabilityArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let manifest = formats::load_manifest(&args.manifest)?;
    let inputs = manifest.load_inputs()?;
    let options = StabilityOptions {
        fractions: args.fractions.clone(),
        trials: args.trials,
        seed: args.seed,
        stratified: args.stratified,
    };
    let mut report = stability_study(&inputs.baseline, &inputs.candidates, &options)?;
    report.metadata = RunMetadata {
        inputs: manifest_digests(&args.manifest, &manifest)?,
        notes: inputs.notes,
        ..metadata(args.canonical)
    };
    write_output(&args.out, &reporting::emit_json(&report))?;

    let mut text = String::from("candidate");
    for f in &report.fractions {
        let _ = write!(text, "\t{f}");
    }
    text.push('\n');
    for c in &report.candidates {
        text.push_str(&c.candidate_name);
        for m in &c.mean_si {
            let _ = write!(text, "\t{m:.6}");
        }
        text.push('\n');
    }
    text.push_str("rank agreement");
    for a in &report.rank_agreement {
        let _ = write!(text, "\t{a}");
    }
    text.push('\n');
    emit(out, &text)
}

fn parse_accuracies(bytes: &[u8]) -> Result<BTreeMap<String, f64>, CliError> {
    let value: serde_json::Value = serde_json::from_slice(bytes).map_err(|e| ReportingError::Json(e.to_string()))?;
    let map = value
        .as_object()
        .ok_or_else(|| ReportingError::Schema("accuracies must be a JSON object of name -> number".into()))?;
    map.iter()
        .map(|(name, v)| {
            v.as_f64()
                .filter(|x| x.is_finite())
                .map(|x| (name.clone(), x))
                .ok_or_else(|| ReportingError::Schema(format!("/{name}: expected a finite number")).into())
        })
        .collect()
}

fn cmd_correlate(args: &CorrelateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let report: RankingReport = reporting::parse_report(&read_input(&args.report)?)?;
    let accuracies = parse_accuracies(&read_input(&args.accuracies)?)?;
    let mut summary: CorrelationSummary = reporting::correlation_report(&report, &accuracies)?;
    summary.metadata = RunMetadata {
        fixture_mode: summary.metadata.fixture_mode,
        inputs: vec![
            digest("report", &args.report, args.report.display().to_string())?,
            digest("accuracies", &args.accuracies, args.accuracies.display().to_string())?,
        ],
        ..metadata(args.canonical)
    };
    write_output(&args.out, &reporting::emit_json(&summary))?;

    let mut text = format!(
        "pairs {}\nspearman {}\npearson {}\nviolations {}\n",
        summary.points.len(),
        summary.spearman,
        summary.pearson,
        summary.violations.len()
    );
    for v in &summary.violations {
        let _ = writeln!(text, "  {} > {} by SI, reversed by accuracy", v.higher_si, v.lower_si);
    }
    emit(out, &text)
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::Internal(format!("cannot write to stdout: {e}")))
}

/// Runs a parsed command on a pool of the requested size.
pub fn execute(cli: &Cli, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let threads = cli.threads.unwrap_or(0);
    let run = || match &cli.command {
        Command::Si(a) => cmd_si(a, out),
        Command::Rank(a) => cmd_rank(a, out),
        Command::Stability(a) => cmd_stability(a, out),
        Command::Correlate(a) => cmd_correlate(a, out),
    };
    engine::with_threads(threads, run).map_err(|e| CliError::Internal(format!("thread pool: {e}")))?
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I, out: &mut (dyn Write + Send), err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = err.write_all(text.as_bytes());
            } else {
                let _ = out.write_all(text.as_bytes());
            }
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
