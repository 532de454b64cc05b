//! Command-line front end: `generate`, `eval`, `stats` and `export-gt`.

pub mod config;
pub mod eval;
pub mod generate;
pub mod stats;

use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use bevkit::eval::report::{detection_table, segmentation_table};
use bevkit::eval::seg::SEG_SWEEP;
use bevkit::io::Split;
use bevkit::MatchMethod;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use config::RunConfig;
use generate::{cmd_generate, GenerateOptions};

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    /// Runtime failure, or some requested scenes failed.
    pub const FAILURE: u8 = 1;
    /// Bad arguments or configuration; no work was done.
    pub const USAGE: u8 = 2;
}

/// An error in the command line or configuration, reported before any work.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Parser)]
#[command(name = "bevkit", version, about = "Synthetic BEV dataset generation and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate (or resume, expand, repair) a dataset from a config file.
    Generate(GenerateArgs),
    /// Score predictions against a dataset's ground truth.
    Eval(EvalArgs),
    /// Summarize a dataset.
    Stats(StatsArgs),
    /// Write a dataset's ground truth in prediction format.
    ExportGt(ExportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Task {
    Det,
    Seg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Iou,
    Distance,
}

impl From<MethodArg> for MatchMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Iou => MatchMethod::Iou,
            MethodArg::Distance => MatchMethod::Distance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Val => Split::Val,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Dataset root; overrides `out` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides `seed` in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Scenes generated in parallel; overrides `jobs` in the config.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Regenerate this scene with a fresh seed. Repeatable.
    #[arg(long)]
    pub replace: Vec<String>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[arg(long, hide = true)]
    pub stop_after: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub dataset: PathBuf,
    /// JSON-lines file for `det`, directory of score grids for `seg`.
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long, value_enum)]
    pub task: Task,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Single segmentation threshold; without it the full sweep is reported.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, value_enum)]
    pub split: Option<SplitArg>,
    /// Directory for the JSON report and text table.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    pub dataset: PathBuf,
    /// Directory for `stats.json` and the histogram CSVs.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    pub dataset: PathBuf,
    #[arg(long, value_enum)]
    pub task: Task,
    /// Output file (`det`) or directory (`seg`).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub split: Option<SplitArg>,
}

/// True unless `NO_COLOR` is set to something non-empty or stderr is not a
/// terminal.
pub fn color_enabled() -> bool {
    let no_color = std::env::var_os("NO_COLOR").is_some_and(|v| !v.is_empty());
    !no_color && std::io::stderr().is_terminal()
}

pub fn report_error(err: &anyhow::Error) {
    let prefix = if color_enabled() { "\x1b[1;31merror\x1b[0m" } else { "error" };
    eprintln!("{prefix}: {err:#}");
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn print(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).context("writing to stdout")
}

/// Runs one command, writing results to `out`. Returns the exit code.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<u8> {
    match cli.command {
        Command::Generate(a) => run_generate(a, out),
        Command::Eval(a) => run_eval(a, out),
        Command::Stats(a) => run_stats(a, out),
        Command::ExportGt(a) => run_export(a, out),
    }
}

fn run_generate(a: GenerateArgs, out: &mut dyn Write) -> Result<u8> {
    if a.format == Format::Csv {
        return Err(usage("--format csv only applies to stats"));
    }
    let mut cfg = RunConfig::load(&a.config).map_err(|e| usage(format!("{e:#}")))?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(jobs) = a.jobs {
        cfg.jobs = jobs;
    }
    cfg.validate().map_err(|e| usage(format!("{e:#}")))?;
    let Some(root) = a.out.or_else(|| cfg.out.clone()) else {
        return Err(usage("no output root: pass --out or set `out` in the config"));
    };
    let opts = GenerateOptions {
        replace: a.replace,
        stop_after: a.stop_after,
    };
    let summary = cmd_generate(&cfg, &root, &opts)?;
    match a.format {
        Format::Json => print(out, &to_json(&summary))?,
        _ => print(
            out,
            &format!(
                "{}: {} scenes generated ({} frames), {} already complete\n",
                root.display(),
                summary.generated.len(),
                summary.frames,
                summary.already_complete
            ),
        )?,
    }
    if summary.failed.is_empty() {
        return Ok(exit::OK);
    }
    for f in &summary.failed {
        eprintln!("{}: {}", f.id, f.error);
    }
    let ids: Vec<&str> = summary.failed.iter().map(|f| f.id.as_str()).collect();
    eprintln!("failed scenes: {}", ids.join(", "));
    Ok(exit::FAILURE)
}

fn run_eval(a: EvalArgs, out: &mut dyn Write) -> Result<u8> {
    if a.format == Format::Csv {
        return Err(usage("--format csv only applies to stats"));
    }
    let split = a.split.map(Split::from);
    let (json, table, stem) = match a.task {
        Task::Det => {
            if a.threshold.is_some() {
                return Err(usage("--threshold applies to --task seg; detection uses fixed threshold sets"));
            }
            let method: MatchMethod = a.method.ok_or_else(|| usage("--task det needs --method iou|distance"))?.into();
            let r = eval::cmd_eval_det(&a.dataset, &a.predictions, method, split)?;
            (to_json(&r), detection_table(&r), format!("det_{}", method.name()))
        }
        Task::Seg => {
            if a.method.is_some() {
                return Err(usage("--method applies to --task det"));
            }
            let thresholds = match a.threshold {
                Some(t) if t > 0.0 && t < 1.0 => vec![t],
                Some(t) => return Err(usage(format!("segmentation threshold must be in (0, 1), got {t}"))),
                None => SEG_SWEEP.to_vec(),
            };
            let r = eval::cmd_eval_seg(&a.dataset, &a.predictions, thresholds, split)?;
            (to_json(&r), segmentation_table(&r), "seg".to_string())
        }
    };
    if let Some(dir) = &a.out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write_file(&dir.join(format!("{stem}.json")), &json)?;
        write_file(&dir.join(format!("{stem}.txt")), &table)?;
    }
    print(out, if a.format == Format::Json { &json } else { &table })?;
    Ok(exit::OK)
}

fn run_stats(a: StatsArgs, out: &mut dyn Write) -> Result<u8> {
    let report = stats::load(&a.dataset)?;
    let json = to_json(&report);
    if let Some(dir) = &a.out {
        stats::write_csvs(&report, dir)?;
        write_file(&dir.join("stats.json"), &json)?;
    }
    match a.format {
        Format::Json => print(out, &json)?,
        Format::Text => print(out, &stats::stats_text(&report))?,
        Format::Csv => {
            let dir = a.out.clone().unwrap_or_else(|| a.dataset.join("stats"));
            for p in stats::write_csvs(&report, &dir)? {
                print(out, &format!("{}\n", p.display()))?;
            }
        }
    }
    Ok(exit::OK)
}

fn run_export(a: ExportArgs, out: &mut dyn Write) -> Result<u8> {
    let split = a.split.map(Split::from);
    let n = match a.task {
        Task::Det => eval::cmd_export_det(&a.dataset, &a.out, split)?,
        Task::Seg => eval::cmd_export_seg(&a.dataset, &a.out, split)?,
    };
    print(out, &format!("exported {n} frames to {}\n", a.out.display()))?;
    Ok(exit::OK)
}

/// Maps an error to its exit code.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        exit::USAGE
    } else {
        exit::FAILURE
    }
}
