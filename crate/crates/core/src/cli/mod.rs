//! `popbias` command line: synth | ingest | audit | report.
//!
//! Exit status is 0 on success, 1 for usage or configuration errors, 2 for
//! unreadable or unusable data, and 3 when the experiment itself fails.

use std::ffi::OsString;
use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dataset::{apply_filters, read_interactions, read_users, sample_items, DatasetError};
use crate::harness::{run_experiment, write_outputs, ExperimentConfig, HarnessError};
use crate::metrics::{build_report, read_per_user, BiasReport};
use crate::popularity::{build_decile_bins, PopularityIndex};
use crate::synth::SyntheticSpec;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_EXPERIMENT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "popbias", version, about = "Per-user popularity bias audit for collaborative-filtering recommenders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Tsv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic long-tail dataset (interactions.tsv, users.tsv).
    Synth(SynthArgs),
    /// Filter (and optionally sample) a dataset and write the result with its filter report.
    Ingest(IngestArgs),
    /// Run the cross-validated experiment and write report.tsv, report.json, per_user.tsv, provenance.json.
    Audit(AuditArgs),
    /// Rebuild the report from a per_user.tsv dump.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long, default_value = "synthetic")]
    output: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 2000)]
    users: usize,
    #[arg(long, default_value_t = 5000)]
    items: usize,
    /// Power-law exponent of item popularity by rank.
    #[arg(long, default_value_t = 1.0)]
    exponent: f64,
    /// Mean number of distinct items per user.
    #[arg(long, default_value_t = 40.0)]
    mean_history: f64,
    /// Upper end of the per-user uniform-sampling share.
    #[arg(long, default_value_t = 0.5)]
    spread: f64,
    /// Fraction of users labelled female.
    #[arg(long, default_value_t = 0.25)]
    gender_ratio: f64,
    #[arg(long, default_value_t = 20)]
    clusters: usize,
    #[arg(long, default_value_t = 0.8)]
    cluster_affinity: f64,
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Experiment config; its [data] and [filter] sections are used.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Interactions TSV (overrides the config).
    #[arg(long)]
    interactions: Option<PathBuf>,
    /// Users TSV (overrides the config).
    #[arg(long)]
    users: Option<PathBuf>,
    /// Seed for item sampling (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "filtered")]
    output: PathBuf,
    /// Format of the filter report printed on stdout.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Debug, Args)]
struct AuditArgs {
    /// Experiment config (TOML). Without one every default applies.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for the split and for model training (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides the config).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Format of the report printed on stdout.
    #[arg(long, value_enum, default_value_t = Format::Tsv)]
    format: Format,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// per_user.tsv written by `audit`.
    per_user: PathBuf,
    /// Also write report.tsv and report.json into this directory.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Tsv)]
    format: Format,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        Failure { code: e.exit_code(), message: e.to_string() }
    }
}

impl From<DatasetError> for Failure {
    fn from(e: DatasetError) -> Self {
        Failure { code: EXIT_DATA, message: e.to_string() }
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure { code: EXIT_DATA, message: format!("{}: {e}", path.display()) }
}

/// Entry point for the binary: parses the process arguments, initializes
/// logging, and returns the exit status.
pub fn main() -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).try_init();
    run(std::env::args_os(), &mut io::stdout().lock(), &mut io::stderr().lock())
}

/// Runs the command line `args` (program name first), writing results to
/// `out` and diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    let result = match cli.command {
        Command::Synth(a) => synth(a, out),
        Command::Ingest(a) => ingest(a, out),
        Command::Audit(a) => audit(a, out),
        Command::Report(a) => report(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| io_failure(path, e))
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), Failure> {
    out.write_all(text.as_bytes()).map_err(|e| Failure { code: EXIT_DATA, message: format!("stdout: {e}") })
}

fn synth(a: SynthArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let spec = SyntheticSpec {
        n_users: a.users,
        n_items: a.items,
        exponent: a.exponent,
        mean_history: a.mean_history,
        mainstreaminess_spread: a.spread,
        gender_ratio: a.gender_ratio,
        clusters: a.clusters,
        cluster_affinity: a.cluster_affinity,
        seed: a.seed,
    };
    let data = spec.generate().map_err(|e| Failure { code: EXIT_USAGE, message: e.to_string() })?;
    create_dir(&a.output)?;
    let (inter, users) = (a.output.join("interactions.tsv"), a.output.join("users.tsv"));
    data.write(&inter, &users).map_err(|e| io_failure(&a.output, e))?;
    emit(out, &format!("wrote {} interactions for {} users to {}\n", data.interactions.len(), data.users.len(), a.output.display()))
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig, Failure> {
    Ok(match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    })
}

fn ingest(a: IngestArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let mut config = load_config(a.config.as_deref())?;
    if let Some(p) = a.interactions {
        config.data.interactions = p;
    }
    if let Some(p) = a.users {
        config.data.users = p;
    }
    if let Some(s) = a.seed {
        config.data.sample_seed = s;
    }
    let parsed = read_interactions(&config.data.interactions)?;
    let users = read_users(&config.data.users)?;
    let (mut dataset, filter_report) = apply_filters(&parsed.interactions, &users, &config.filter)?;
    if let Some(n) = config.data.sample_items {
        dataset = sample_items(&dataset, n, config.data.sample_seed)?;
    }
    let bins = match build_decile_bins(&PopularityIndex::compute(&dataset)) {
        Ok(b) => Some(b),
        Err(e) => {
            log::warn!("skipping bins.tsv: {e}");
            None
        }
    };

    create_dir(&a.output)?;
    let mut buf = Vec::new();
    dataset.write_interactions(&mut buf).expect("writing to memory");
    write_file(&a.output.join("interactions.tsv"), &buf)?;
    buf.clear();
    dataset.write_users(&mut buf).expect("writing to memory");
    write_file(&a.output.join("users.tsv"), &buf)?;
    let json = filter_report.to_json();
    write_file(&a.output.join("filter_report.json"), &json)?;
    if let Some(bins) = bins {
        buf.clear();
        bins.write_tsv(&mut buf).expect("writing to memory");
        write_file(&a.output.join("bins.tsv"), &buf)?;
    }

    match a.format {
        Format::Json => emit(out, &format!("{json}\n")),
        Format::Tsv => {
            let mut text = String::from("stage\tusers\titems\tinteractions\n");
            for (name, c) in &filter_report.stages {
                text.push_str(&format!("{name}\t{}\t{}\t{}\n", c.users, c.items, c.interactions));
            }
            emit(out, &text)
        }
    }
}

fn render(report: &BiasReport, format: Format) -> String {
    match format {
        Format::Tsv => report.to_tsv(),
        Format::Json => report.to_json() + "\n",
    }
}

fn audit(a: AuditArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let mut config = load_config(a.config.as_deref())?;
    if let Some(s) = a.seed {
        config.split.seed = s;
        config.algorithms.seed = s;
    }
    if let Some(dir) = a.output {
        config.output.dir = dir;
    }
    let result = run_experiment(&config)?;
    write_outputs(&result, &config, &config.output.dir)?;
    if !result.failures.is_empty() {
        log::warn!("{} user evaluations failed; see failures.tsv", result.failures.len());
    }
    emit(out, &render(&result.report, a.format))
}

fn report(a: ReportArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let file = fs::File::open(&a.per_user).map_err(|e| io_failure(&a.per_user, e))?;
    let records = read_per_user(BufReader::new(file))
        .map_err(|e| Failure { code: EXIT_DATA, message: format!("{}: {e}", a.per_user.display()) })?;
    let report = build_report(&records).map_err(|e| Failure { code: EXIT_DATA, message: e.to_string() })?;
    if let Some(dir) = &a.output {
        create_dir(dir)?;
        write_file(&dir.join("report.tsv"), report.to_tsv())?;
        write_file(&dir.join("report.json"), report.to_json())?;
    }
    emit(out, &render(&report, a.format))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(std::iter::once("popbias").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn help_and_usage_errors() {
        let (code, out, _) = call(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("audit"));
        let (code, out, _) = call(&["synth", "--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("[default: 2000]"), "{out}");
        assert_eq!(call(&[]).0, EXIT_USAGE);
        assert_eq!(call(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(call(&["audit", "--format", "xml"]).0, EXIT_USAGE);
    }

    #[test]
    fn bad_synthetic_spec_is_a_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        assert_eq!(call(&["synth", "--output", out, "--items", "5"]).0, EXIT_USAGE);
    }

    #[test]
    fn missing_data_is_a_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("nope.tsv");
        let (code, _, err) = call(&["report", missing.to_str().unwrap()]);
        assert_eq!(code, EXIT_DATA);
        assert!(err.contains("nope.tsv"));
        let (code, _, _) = call(&[
            "ingest",
            "--interactions",
            missing.to_str().unwrap(),
            "--users",
            missing.to_str().unwrap(),
            "--output",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_DATA);
    }

    #[test]
    fn broken_config_is_a_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("bad.toml");
        fs::write(&cfg, "[als]\nfactorz = 3\n").unwrap();
        assert_eq!(call(&["audit", "--config", cfg.to_str().unwrap()]).0, EXIT_USAGE);
    }
}
