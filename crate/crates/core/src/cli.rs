//! The `docval` command line. [`run`] parses arguments, dispatches to the
//! pipeline and maps failures to exit codes: 0 on success, 1 when inputs or
//! outputs cannot be processed, 2 on usage errors.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::parser::ValueSource;
use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use serde::Serialize;

use crate::error::Error;
use crate::model::{split_dataset, ConvergenceConfig, ValidatorConfig};
use crate::pipeline::io::{
    load_examples, load_predictions, open_input, open_output, read_examples, read_predictions, write_json,
    write_json_line, write_jsonl,
};
use crate::pipeline::{
    convergence_check, default_jobs, evaluate, filter_stream, generate_fixtures, run_refinement_loop,
    synthetic_student, verify_batch,
};

#[derive(Debug, Parser)]
#[command(name = "docval", version, about = "Validate and filter document VQA predictions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stream example/prediction pairs and keep those above the quality threshold
    Filter(FilterArgs),
    /// Write a feedback report for every prediction plus corpus metrics
    Verify(VerifyArgs),
    /// Print corpus metrics (mAP, IoU@0.5, IoU@0.75, ANLS, mean Q)
    Eval(EvalArgs),
    /// Run the refinement loop against a synthetic student
    RefineSim(RefineSimArgs),
    /// Shuffle examples into train, refine and test files
    Split(SplitArgs),
    /// Generate synthetic examples and their ground-truth predictions
    GenFixtures(GenFixturesArgs),
    /// Check an mAP history for convergence
    ConvergeCheck(ConvergeCheckArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ScoringArgs {
    /// Acceptance threshold; a prediction passes when Q is strictly above it
    #[arg(long, default_value_t = 0.85)]
    pub q_min: f64,
    /// Weight of the answer score in Q
    #[arg(long, default_value_t = 0.4)]
    pub alpha_ans: f64,
    /// Weight of the bbox score in Q
    #[arg(long, default_value_t = 0.4)]
    pub alpha_bbox: f64,
    /// Weight of the reasoning score in Q
    #[arg(long, default_value_t = 0.2)]
    pub alpha_reason: f64,
    /// ANLS threshold below which similarity counts as zero
    #[arg(long, default_value_t = 0.5)]
    pub anls_threshold: f64,
    /// Pixel slack before the coordinate-consistency score drops
    #[arg(long, default_value_t = 5)]
    pub coord_tolerance: i64,
    /// Pixels past the slack at which the coordinate score reaches zero
    #[arg(long, default_value_t = 50)]
    pub coord_penalty_scale: i64,
}

#[derive(Debug, Clone, Args)]
pub struct ConvergenceArgs {
    /// Number of recent mAP gains inspected
    #[arg(long, default_value_t = 3)]
    pub window: usize,
    /// Mean gain (percentage points) below which the loop has converged
    #[arg(long, default_value_t = 0.2)]
    pub eps_mean: f64,
    /// Largest gain (percentage points) allowed inside the window
    #[arg(long, default_value_t = 0.4)]
    pub eps_max: f64,
    /// Upper bound on refinement iterations
    #[arg(long, default_value_t = 20)]
    pub max_iterations: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// key=value file of config overrides; explicit flags win over it
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub scoring: ScoringArgs,
    #[command(flatten)]
    pub convergence: ConvergenceArgs,
}

#[derive(Debug, Clone, Args)]
pub struct JobsArg {
    /// Worker threads [default: available parallelism]
    #[arg(long, env = "DOCVAL_JOBS")]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    /// Examples JSONL (`-` for stdin)
    #[arg(long)]
    pub examples: PathBuf,
    /// Predictions JSONL (`-` for stdin)
    #[arg(long)]
    pub predictions: PathBuf,
    /// Accepted records JSONL
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
    /// Filter statistics JSON; printed to stderr when omitted
    #[arg(long)]
    pub stats: Option<PathBuf>,
    #[command(flatten)]
    pub jobs: JobsArg,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub examples: PathBuf,
    #[arg(long)]
    pub predictions: PathBuf,
    /// Feedback reports JSONL
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
    /// Corpus metrics JSON; printed to stderr when omitted
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[command(flatten)]
    pub jobs: JobsArg,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub examples: PathBuf,
    #[arg(long)]
    pub predictions: PathBuf,
    /// Corpus metrics JSON
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
    #[command(flatten)]
    pub jobs: JobsArg,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct RefineSimArgs {
    /// Refinement set JSONL; synthetic fixtures are generated when omitted
    #[arg(long)]
    pub examples: Option<PathBuf>,
    /// Number of generated fixtures
    #[arg(long, default_value_t = 200)]
    pub fixtures: usize,
    /// Regions per generated document
    #[arg(long, default_value_t = 15)]
    pub regions: usize,
    /// Seed for fixtures and the student
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fraction of each correction the student applies
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    /// Uniform noise, in pixels, added to every corrected coordinate
    #[arg(long, default_value_t = 0)]
    pub noise: i64,
    /// Refinement history JSON
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
    #[command(flatten)]
    pub jobs: JobsArg,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Examples JSONL
    #[arg(long)]
    pub input: PathBuf,
    /// train,refine,test fractions summing to 1
    #[arg(long, default_value = "0.8,0.1,0.1", value_parser = parse_ratios)]
    pub ratios: [f64; 3],
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory receiving train.jsonl, refine.jsonl and test.jsonl
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenFixturesArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of documents
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Regions per document
    #[arg(long, default_value_t = 15)]
    pub regions: usize,
    /// Examples JSONL
    #[arg(long)]
    pub examples: PathBuf,
    /// Ground-truth predictions JSONL
    #[arg(long)]
    pub predictions: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConvergeCheckArgs {
    /// Comma-separated mAP values in percentage points, oldest first
    #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
    pub history: Vec<f64>,
    /// key=value file of config overrides; explicit flags win over it
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub convergence: ConvergenceArgs,
}

fn parse_ratios(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    parts
        .try_into()
        .map_err(|v: Vec<f64>| format!("expected three values, got {}", v.len()))
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => f.write_str(m),
            Failure::Runtime(e) => write!(f, "{e}"),
        }
    }
}

type CliResult = Result<(), Failure>;

fn explicit(m: &ArgMatches, id: &str) -> bool {
    matches!(m.try_get_raw(id), Ok(Some(_))) && m.value_source(id) == Some(ValueSource::CommandLine)
}

fn read_config_file(path: &Path, cfg: &mut ValidatorConfig) -> Result<(), Failure> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    cfg.apply_overrides(&text).map_err(|e| {
        Failure::Runtime(Error::InvalidConfig(format!("{}: {e}", path.display())))
    })
}

fn apply_convergence(c: &ConvergenceArgs, m: &ArgMatches, cfg: &mut ConvergenceConfig) {
    if explicit(m, "window") {
        cfg.window = c.window;
    }
    if explicit(m, "eps_mean") {
        cfg.eps_mean = c.eps_mean;
    }
    if explicit(m, "eps_max") {
        cfg.eps_max = c.eps_max;
    }
    if explicit(m, "max_iterations") {
        cfg.max_iterations = c.max_iterations;
    }
}

/// Defaults, then the `--config` file, then flags given on the command line.
fn resolve_config(args: &ConfigArgs, m: &ArgMatches) -> Result<ValidatorConfig, Failure> {
    let mut cfg = ValidatorConfig::default();
    if let Some(path) = &args.config {
        read_config_file(path, &mut cfg)?;
    }
    let s = &args.scoring;
    if explicit(m, "q_min") {
        cfg.q_min = s.q_min;
    }
    if explicit(m, "alpha_ans") {
        cfg.alpha_ans = s.alpha_ans;
    }
    if explicit(m, "alpha_bbox") {
        cfg.alpha_bbox = s.alpha_bbox;
    }
    if explicit(m, "alpha_reason") {
        cfg.alpha_reason = s.alpha_reason;
    }
    if explicit(m, "anls_threshold") {
        cfg.anls_threshold = s.anls_threshold;
    }
    if explicit(m, "coord_tolerance") {
        cfg.coord_tolerance = s.coord_tolerance;
    }
    if explicit(m, "coord_penalty_scale") {
        cfg.coord_penalty_scale = s.coord_penalty_scale;
    }
    apply_convergence(&args.convergence, m, &mut cfg.convergence);
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(cfg)
}

fn jobs(arg: &JobsArg) -> Result<usize, Failure> {
    match arg.jobs {
        Some(0) => Err(Failure::Usage("--jobs must be at least 1".into())),
        Some(n) => Ok(n),
        None => Ok(default_jobs()),
    }
}

fn both_stdin(a: &Path, b: &Path) -> Result<(), Failure> {
    if a == Path::new("-") && b == Path::new("-") {
        return Err(Failure::Usage("--examples and --predictions cannot both read stdin".into()));
    }
    Ok(())
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn report<T: Serialize>(path: Option<&Path>, value: &T) -> CliResult {
    match path {
        Some(p) => write_json(p, value)?,
        None => {
            let line = serde_json::to_string(value).map_err(|e| Error::InvalidConfig(e.to_string()))?;
            eprintln!("{line}");
        }
    }
    Ok(())
}

fn cmd_filter(a: &FilterArgs, m: &ArgMatches) -> CliResult {
    let cfg = resolve_config(&a.config, m)?;
    let jobs = jobs(&a.jobs)?;
    both_stdin(&a.examples, &a.predictions)?;
    let examples = read_examples(open_input(&a.examples)?, &a.examples);
    let predictions = read_predictions(open_input(&a.predictions)?, &a.predictions);
    let mut out = open_output(&a.out)?;
    let stats = filter_stream(examples, predictions, &cfg, jobs, |rec| {
        write_json_line(&mut *out, &rec, &a.out)
    })?;
    out.flush().map_err(io_err(&a.out))?;
    report(a.stats.as_deref(), &stats)
}

fn cmd_verify(a: &VerifyArgs, m: &ArgMatches) -> CliResult {
    let cfg = resolve_config(&a.config, m)?;
    let jobs = jobs(&a.jobs)?;
    both_stdin(&a.examples, &a.predictions)?;
    let examples = load_examples(&a.examples)?;
    let predictions = load_predictions(&a.predictions)?;
    let outcome = verify_batch(&examples, &predictions, &cfg, jobs)?;
    write_jsonl(&a.out, &outcome.reports)?;
    report(a.summary.as_deref(), &outcome.summary)
}

fn cmd_eval(a: &EvalArgs, m: &ArgMatches) -> CliResult {
    let cfg = resolve_config(&a.config, m)?;
    let jobs = jobs(&a.jobs)?;
    both_stdin(&a.examples, &a.predictions)?;
    let examples = load_examples(&a.examples)?;
    let predictions = load_predictions(&a.predictions)?;
    let summary = evaluate(&examples, &predictions, &cfg, jobs)?;
    write_json(&a.out, &summary)?;
    Ok(())
}

fn cmd_refine_sim(a: &RefineSimArgs, m: &ArgMatches) -> CliResult {
    let cfg = resolve_config(&a.config, m)?;
    let jobs = jobs(&a.jobs)?;
    let set = match &a.examples {
        Some(path) => load_examples(path)?,
        None => generate_fixtures(a.seed, a.fixtures, a.regions)?.examples,
    };
    let mut student = synthetic_student(a.seed, a.rho, a.noise, &set).map_err(|e| Failure::Usage(e.to_string()))?;
    match run_refinement_loop(&mut student, &set, &cfg, jobs) {
        Ok(history) => {
            write_json(&a.out, &history)?;
            Ok(())
        }
        Err(e) => {
            write_json(&a.out, &e.history)?;
            Err(Failure::Runtime(e.source))
        }
    }
}

fn cmd_split(a: &SplitArgs) -> CliResult {
    let examples = load_examples(&a.input)?;
    let split = split_dataset(&examples, a.ratios, a.seed).map_err(|e| match e {
        Error::BadRatios(_) => Failure::Usage(e.to_string()),
        other => Failure::Runtime(other),
    })?;
    fs::create_dir_all(&a.out_dir).map_err(io_err(&a.out_dir))?;
    for (name, part) in [("train", &split.train), ("refine", &split.refine), ("test", &split.test)] {
        write_jsonl(&a.out_dir.join(format!("{name}.jsonl")), part)?;
    }
    println!(
        "train={} refine={} test={}",
        split.train.len(),
        split.refine.len(),
        split.test.len()
    );
    Ok(())
}

fn cmd_gen_fixtures(a: &GenFixturesArgs) -> CliResult {
    let fx = generate_fixtures(a.seed, a.n, a.regions).map_err(|e| Failure::Usage(e.to_string()))?;
    write_jsonl(&a.examples, &fx.examples)?;
    write_jsonl(&a.predictions, &fx.predictions)?;
    Ok(())
}

fn cmd_converge_check(a: &ConvergeCheckArgs, m: &ArgMatches) -> CliResult {
    let mut cfg = ValidatorConfig::default();
    if let Some(path) = &a.config {
        read_config_file(path, &mut cfg)?;
    }
    apply_convergence(&a.convergence, m, &mut cfg.convergence);
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let status = convergence_check(&a.history, &cfg.convergence);
    let fmt3 = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.3}"));
    println!(
        "converged={} mean={} max={}",
        status.converged,
        fmt3(status.mean_delta),
        fmt3(status.max_delta)
    );
    Ok(())
}

fn dispatch(cli: &Cli, m: &ArgMatches) -> CliResult {
    match &cli.command {
        Command::Filter(a) => cmd_filter(a, m),
        Command::Verify(a) => cmd_verify(a, m),
        Command::Eval(a) => cmd_eval(a, m),
        Command::RefineSim(a) => cmd_refine_sim(a, m),
        Command::Split(a) => cmd_split(a),
        Command::GenFixtures(a) => cmd_gen_fixtures(a),
        Command::ConvergeCheck(a) => cmd_converge_check(a, m),
    }
}

/// Runs the command line `args` (program name first) and returns the exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match Cli::command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return 2;
        }
    };
    let sub = matches.subcommand().map(|(_, m)| m).unwrap_or(&matches);
    match dispatch(&cli, sub) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("docval: error: {f}");
            match f {
                Failure::Usage(_) => 2,
                Failure::Runtime(_) => 1,
            }
        }
    }
}
