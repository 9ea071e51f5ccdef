//! Command-line front end.
//!
//! Every command writes to caller-supplied sinks and returns a process exit
//! code: 0 on success, 1 when a verification finds violations, 2 for usage,
//! parse and I/O errors, and 3 when a dimension exceeds the enumeration
//! limit.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use thiserror::Error;

use crate::bounds::{bk_sequence, delta1_closed_form, evaluate_bounds, tv_bracket, RegimePolicy};
use crate::enumerate::{full_slice_report, EnumConfig, DEFAULT_ENUM_LIMIT};
use crate::error::Error;
use crate::params::{classify_regime, l1_distance, l2_distance, ParamPair, ParamVec};
use crate::verify::{run_verification, sample_pair, trial_rng, SamplingRegime, TheoremId, VerifyConfig, VerifyRun};

pub const ENUM_LIMIT_ENV: &str = "BERNOULLI_TV_ENUM_LIMIT";

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATIONS: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DIMENSION: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{field}: {message}")]
    Input { field: String, message: String },

    #[error(transparent)]
    Core(#[from] Error),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },

    #[error("write failed: {0}")]
    Output(#[from] io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(Error::DimensionTooLarge { .. }) => EXIT_DIMENSION,
            _ => EXIT_USAGE,
        }
    }

    fn input(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Input {
            field: field.into(),
            message: message.into(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "bernoulli-tv",
    version,
    about = "Total variation between Bernoulli product measures"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact TV, regime and applicable bounds for one pair.
    Tv(TvArgs),
    /// Per-slice discrepancies as CSV.
    Slices(SlicesArgs),
    /// Seeded randomized verification of the bounds and identities.
    Verify(VerifyArgs),
    /// The B_k(n) coefficients by recurrence and closed form, as CSV.
    Bk(BkArgs),
    /// Random pairs from one regime with TV and its comparison quantities, as CSV.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TvMode {
    /// Exact enumeration only; fails above the enumeration limit.
    Exact,
    /// Closed-form bracket only; no enumeration.
    Bounds,
    /// Both, skipping enumeration above the limit.
    All,
}

#[derive(Debug, Args)]
pub struct TvArgs {
    /// JSON document {"p": [...], "q": [...], "label": "..."} or a two-row CSV.
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    pub mode: TvMode,
    /// Shorthand for `--mode exact`.
    #[arg(long, conflicts_with_all = ["mode", "bounds"])]
    pub exact: bool,
    /// Shorthand for `--mode bounds`.
    #[arg(long, conflicts_with = "mode")]
    pub bounds: bool,
    /// Evaluate every regime bound, flagging those whose hypotheses fail.
    #[arg(long)]
    pub force: bool,
    #[arg(long)]
    pub enum_limit: Option<usize>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SlicesArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub enum_limit: Option<usize>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, required_unless_present = "all", conflicts_with = "all")]
    pub theorem: Option<TheoremId>,
    /// Run every theorem; `--n-min` is raised to each theorem's minimum.
    #[arg(long)]
    pub all: bool,
    /// Defaults to the theorem's smallest admissible n.
    #[arg(long)]
    pub n_min: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub n_max: usize,
    /// Trials per value of n.
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub boundary_biased: bool,
    /// Sample from this box instead of the theorem's own.
    #[arg(long)]
    pub sampling: Option<SamplingRegime>,
    /// Print the summary as CSV instead of a table.
    #[arg(long)]
    pub csv: bool,
    /// Also write the CSV summary to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub enum_limit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BkArgs {
    #[arg(long)]
    pub n: usize,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub regime: SamplingRegime,
    /// Comma-separated dimensions, e.g. 2,4,8.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n_list: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long)]
    pub seed: u64,
    /// Write the CSV here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub boundary_biased: bool,
    #[arg(long)]
    pub enum_limit: Option<usize>,
}

/// A parsed input document.
#[derive(Debug, Clone, PartialEq)]
pub struct InputDocument {
    pub pair: ParamPair,
    pub label: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    p: Vec<f64>,
    q: Vec<f64>,
    label: Option<String>,
}

fn build_pair(p: Vec<f64>, q: Vec<f64>) -> CliResult<ParamPair> {
    let vec = |field: &str, v: Vec<f64>| ParamVec::new(v).map_err(|e| CliError::input(field, e.to_string()));
    if p.len() != q.len() {
        return Err(CliError::input(
            "q",
            format!("length {} differs from length {} of p", q.len(), p.len()),
        ));
    }
    Ok(ParamPair::new(vec("p", p)?, vec("q", q)?)?)
}

/// Parses a JSON document, or a CSV with one row for `p` and one for `q`
/// (each row optionally led by its name).
pub fn parse_input(text: &str) -> CliResult<InputDocument> {
    if text.trim_start().starts_with('{') {
        let raw: RawDocument = serde_json::from_str(text).map_err(|e| CliError::input("input", e.to_string()))?;
        return Ok(InputDocument {
            pair: build_pair(raw.p, raw.q)?,
            label: raw.label,
        });
    }

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        rows.push(record);
    }
    if rows.len() != 2 {
        return Err(CliError::input(
            "input",
            format!("expected 2 CSV rows, found {}", rows.len()),
        ));
    }
    let mut parsed = Vec::with_capacity(2);
    for (record, field) in rows.iter().zip(["p", "q"]) {
        let mut cells: Vec<&str> = record.iter().collect();
        if cells.first().is_some_and(|c| c.eq_ignore_ascii_case(field)) {
            cells.remove(0);
        }
        let values = cells
            .iter()
            .enumerate()
            .map(|(i, c)| {
                c.parse::<f64>()
                    .map_err(|_| CliError::input(field, format!("entry {i} '{c}' is not a number")))
            })
            .collect::<CliResult<Vec<f64>>>()?;
        parsed.push(values);
    }
    let q = parsed.pop().unwrap();
    let p = parsed.pop().unwrap();
    Ok(InputDocument {
        pair: build_pair(p, q)?,
        label: None,
    })
}

fn read_input(path: &Path) -> CliResult<InputDocument> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_input(&text)
}

/// Flag, then environment, then the built-in default.
fn resolve_enum_limit(flag: Option<usize>) -> CliResult<usize> {
    if let Some(limit) = flag {
        return Ok(limit);
    }
    match std::env::var(ENUM_LIMIT_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{ENUM_LIMIT_ENV}: '{v}' is not a non-negative integer"))),
        Err(_) => Ok(DEFAULT_ENUM_LIMIT),
    }
}

fn enum_config(limit: Option<usize>, workers: Option<usize>) -> CliResult<EnumConfig> {
    let cfg = EnumConfig::default().with_limit(resolve_enum_limit(limit)?);
    Ok(match workers {
        Some(w) => cfg.with_workers(w),
        None => cfg,
    })
}

/// Shortest decimal that parses back to the same `f64` (at most 17
/// significant digits), so `0.6` prints as `0.6`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn open_out(path: &Path) -> CliResult<fs::File> {
    fs::File::create(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = sink.write_all(rendered.as_bytes());
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command, out: &mut dyn Write) -> CliResult<i32> {
    match command {
        Command::Tv(a) => cmd_tv(&a, out),
        Command::Slices(a) => cmd_slices(&a, out),
        Command::Verify(a) => cmd_verify(&a, out),
        Command::Bk(a) => cmd_bk(&a, out),
        Command::Sweep(a) => cmd_sweep(&a, out),
    }
}

pub fn cmd_tv(args: &TvArgs, out: &mut dyn Write) -> CliResult<i32> {
    let mode = if args.exact {
        TvMode::Exact
    } else if args.bounds {
        TvMode::Bounds
    } else {
        args.mode
    };
    let doc = read_input(&args.input)?;
    let pair = &doc.pair;
    let n = pair.n();
    let cfg = enum_config(args.enum_limit, args.workers)?;
    let regime = classify_regime(pair);

    let report = match mode {
        TvMode::Exact => Some(full_slice_report(pair, &cfg)?),
        TvMode::All if n <= cfg.limit => Some(full_slice_report(pair, &cfg)?),
        _ => None,
    };

    if let Some(label) = &doc.label {
        writeln!(out, "label      {label}")?;
    }
    writeln!(out, "n          {n}")?;
    writeln!(out, "regime     {}", regime.tag)?;
    match &report {
        Some(r) => {
            writeln!(out, "tv_exact   {}", fmt_f64(r.tv_exact))?;
            writeln!(out, "delta1     {}", fmt_f64(r.delta[1]))?;
        }
        None => {
            if mode == TvMode::All {
                writeln!(
                    out,
                    "tv_exact   skipped (n = {n} exceeds enumeration limit {})",
                    cfg.limit
                )?;
            }
            writeln!(out, "delta1     {}", fmt_f64(delta1_closed_form(pair)))?;
        }
    }
    writeln!(out, "l1         {}", fmt_f64(l1_distance(pair)))?;
    writeln!(out, "l2         {}", fmt_f64(l2_distance(pair)))?;

    if mode != TvMode::Exact {
        let b = tv_bracket(pair);
        writeln!(out, "tv_lower   {}  ({})", fmt_f64(b.lower), b.lower_source)?;
        writeln!(out, "tv_upper   {}  ({})", fmt_f64(b.upper), b.upper_source)?;
    }

    if let Some(r) = &report {
        let policy = if args.force {
            RegimePolicy::Force
        } else {
            RegimePolicy::Enforce
        };
        let bounds = evaluate_bounds(pair, r, policy)?;
        writeln!(out)?;
        writeln!(
            out,
            "{:<14} {:>24} {:>24} {:>24}  status",
            "bound", "lhs", "rhs", "margin"
        )?;
        for e in &bounds.entries {
            let status = match (e.satisfied, e.in_regime) {
                (true, true) => "ok",
                (false, true) => "VIOLATED",
                (true, false) => "ok (out of regime)",
                (false, false) => "fails (out of regime)",
            };
            writeln!(
                out,
                "{:<14} {:>24} {:>24} {:>24}  {status}",
                e.name,
                fmt_f64(e.lhs),
                fmt_f64(e.rhs),
                fmt_f64(e.margin)
            )?;
        }
    }
    Ok(EXIT_OK)
}

pub fn cmd_slices(args: &SlicesArgs, out: &mut dyn Write) -> CliResult<i32> {
    let doc = read_input(&args.input)?;
    let cfg = enum_config(args.enum_limit, args.workers)?;
    let r = full_slice_report(&doc.pair, &cfg)?;
    let mut w = csv::WriterBuilder::new().from_writer(out);
    w.write_record(["k", "delta_k"])?;
    for (k, d) in r.delta.iter().enumerate() {
        w.write_record([k.to_string(), fmt_f64(*d)])?;
    }
    w.write_record(["two_tv".to_string(), fmt_f64(2.0 * r.tv_exact)])?;
    w.write_record(["sum_delta".to_string(), fmt_f64(r.sum_delta())])?;
    w.write_record(["residual".to_string(), fmt_f64(r.identity_residual)])?;
    w.flush()?;
    Ok(EXIT_OK)
}

pub const VERIFY_CSV_HEADER: [&str; 12] = [
    "theorem",
    "n_min",
    "n_max",
    "trials_per_n",
    "total_trials",
    "seed",
    "boundary_biased",
    "sampling",
    "out_of_regime",
    "violations",
    "worst_margin",
    "worst_trial",
];

fn verify_record(run: &VerifyRun) -> Vec<String> {
    vec![
        run.theorem_id.to_string(),
        run.n_min.to_string(),
        run.n_max.to_string(),
        run.trials.to_string(),
        run.total_trials.to_string(),
        run.seed.to_string(),
        run.boundary_biased.to_string(),
        run.sampling.map_or_else(|| "default".to_string(), |s| s.to_string()),
        run.out_of_regime.to_string(),
        run.violations.to_string(),
        fmt_f64(run.worst_margin),
        run.worst_trial.map_or_else(String::new, |t| t.to_string()),
    ]
}

fn write_verify_csv(runs: &[VerifyRun], sink: &mut dyn Write) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(VERIFY_CSV_HEADER)?;
    for run in runs {
        w.write_record(verify_record(run))?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> CliResult<i32> {
    let theorems: Vec<TheoremId> = match args.theorem {
        Some(t) => vec![t],
        None => TheoremId::ALL.to_vec(),
    };
    let enum_limit = resolve_enum_limit(args.enum_limit)?;

    let mut runs = Vec::with_capacity(theorems.len());
    for &t in &theorems {
        let floor = t.min_n().max(args.sampling.map_or(1, SamplingRegime::min_n));
        let n_min = match args.n_min {
            Some(n) if args.all => n.max(floor),
            Some(n) => n,
            None => floor,
        };
        let mut cfg = VerifyConfig::new(t, n_min, args.n_max, args.trials, args.seed)
            .boundary_biased(args.boundary_biased)
            .enum_limit(enum_limit);
        // with --all, a pair sampling box only applies to the pair theorems
        if let Some(s) = args.sampling.filter(|_| !args.all || t.default_sampling().is_some()) {
            cfg = cfg.sampling(s);
        }
        if let Some(w) = args.workers {
            cfg = cfg.workers(w);
        }
        runs.push(run_verification(&cfg)?);
    }

    if args.csv {
        write_verify_csv(&runs, out)?;
    } else {
        writeln!(
            out,
            "{:<16} {:>7} {:>9} {:>10} {:>24}  status",
            "theorem", "n", "trials", "violations", "worst_margin"
        )?;
        for run in &runs {
            let status = match (run.passed(), run.out_of_regime) {
                (true, false) => "PASS",
                (false, false) => "FAIL",
                (true, true) => "pass (out of regime)",
                (false, true) => "violations (out of regime)",
            };
            writeln!(
                out,
                "{:<16} {:>7} {:>9} {:>10} {:>24}  {status}",
                run.theorem_id.name(),
                format!("{}..{}", run.n_min, run.n_max),
                run.total_trials,
                run.violations,
                fmt_f64(run.worst_margin)
            )?;
        }
    }
    if let Some(path) = &args.out {
        let mut file = open_out(path)?;
        write_verify_csv(&runs, &mut file)?;
    }

    Ok(if runs.iter().all(VerifyRun::passed) {
        EXIT_OK
    } else {
        EXIT_VIOLATIONS
    })
}

pub fn cmd_bk(args: &BkArgs, out: &mut dyn Write) -> CliResult<i32> {
    if args.n < 2 {
        return Err(CliError::Usage(format!("--n must be at least 2, got {}", args.n)));
    }
    let seq = bk_sequence(args.n)?;
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    w.write_record(["k", "B_k_recurrence", "B_k_closed_form"])?;
    for k in 1..=args.n {
        let closed = seq.closed_form(k).map_or_else(String::new, fmt_f64);
        w.write_record([k.to_string(), fmt_f64(seq.get(k)), closed])?;
    }
    let target = seq.sum_target();
    w.write_record([
        "sum_tail".to_string(),
        fmt_f64(seq.sum_tail),
        fmt_f64(target),
        fmt_f64((seq.sum_tail - target).abs()),
    ])?;
    w.flush()?;
    Ok(EXIT_OK)
}

pub const SWEEP_CSV_HEADER: [&str; 8] = [
    "n",
    "trial",
    "tv",
    "delta1",
    "l1",
    "l2",
    "ratio_tv_delta1",
    "ratio_tv_l1",
];

pub fn cmd_sweep(args: &SweepArgs, out: &mut dyn Write) -> CliResult<i32> {
    let cfg = enum_config(args.enum_limit, None)?;
    if let Some(&n) = args.n_list.iter().find(|&&n| n < args.regime.min_n()) {
        return Err(Error::NTooSmall {
            n,
            min: args.regime.min_n(),
        }
        .into());
    }
    if let Some(&n) = args.n_list.iter().find(|&&n| n > cfg.limit) {
        return Err(Error::DimensionTooLarge { n, limit: cfg.limit }.into());
    }

    let mut file;
    let sink: &mut dyn Write = match &args.out {
        Some(path) => {
            file = open_out(path)?;
            &mut file
        }
        None => out,
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(SWEEP_CSV_HEADER)?;
    let mut index = 0u64;
    for &n in &args.n_list {
        for trial in 0..args.trials {
            let mut rng = trial_rng(args.seed, index);
            index += 1;
            let pair = sample_pair(n, args.regime, args.boundary_biased, &mut rng)?;
            let r = full_slice_report(&pair, &cfg)?;
            let (tv, d1) = (r.tv_exact, r.delta[1]);
            let (l1, l2) = (l1_distance(&pair), l2_distance(&pair));
            w.write_record([
                n.to_string(),
                trial.to_string(),
                fmt_f64(tv),
                fmt_f64(d1),
                fmt_f64(l1),
                fmt_f64(l2),
                fmt_f64(tv / d1),
                fmt_f64(tv / l1),
            ])?;
        }
    }
    w.flush()?;
    Ok(EXIT_OK)
}
