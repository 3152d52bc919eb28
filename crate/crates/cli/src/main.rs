//! `ponzi`: file-based investigation workflow over a Ponzi scheme's
//! Bitcoin transactions.

mod commands;
mod config;
mod output;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ponzi_core::coredata::DayRange;

#[derive(Parser, Debug)]
#[command(
    name = "ponzi",
    version,
    about = "Forensic metrics for Bitcoin Ponzi schemes"
)]
pub struct Cli {
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// TOML file: run settings, or the generator settings for `simulate`.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Restrict the analysis to START..END (inclusive UTC dates).
    #[arg(long, global = true, value_parser = parse_range)]
    pub day_range: Option<DayRange>,
    /// Format of tabular outputs.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

fn parse_range(s: &str) -> Result<DayRange, String> {
    s.parse().map_err(|e: ponzi_core::Error| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a roster from a profile corpus and address tags.
    Harvest(HarvestArgs),
    /// Type and clean transactions into a dataset directory.
    Ingest(IngestArgs),
    /// Daily metrics and the per-address ledger.
    Metrics(MetricsArgs),
    /// Lifecycle phases from daily volume.
    Phases(PhasesArgs),
    /// Likely scammers and the victim ratio series.
    Classify(ClassifyArgs),
    /// External-service shares and the country flow network.
    Flows(FlowsArgs),
    /// Generate a synthetic scheme with ground truth.
    Simulate,
    /// Combine the outputs of the other commands into one markdown report.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct HarvestArgs {
    /// Directory of profile documents with optional `.meta.json` sidecars.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// CSV of address tags (address,label,verified).
    #[arg(long)]
    pub tags: Option<PathBuf>,
    /// Wallet directory CSV used to drop service addresses.
    #[arg(long)]
    pub wallets: Option<PathBuf>,
    /// Also require valid address checksums.
    #[arg(long)]
    pub verify_checksums: bool,
    /// Substring marking a scheme link in a profile.
    #[arg(long)]
    pub member_substring: Option<String>,
    /// Substring marking a scheme tag label.
    #[arg(long)]
    pub tag_substring: Option<String>,
    /// Regex of tag labels to ignore; repeatable. Replaces the default list.
    #[arg(long = "tag-exclusion")]
    pub tag_exclusions: Vec<String>,
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    #[arg(long)]
    pub tx: Option<PathBuf>,
    #[arg(long)]
    pub roster: Option<PathBuf>,
    #[arg(long)]
    pub wallets: Option<PathBuf>,
    #[arg(long)]
    pub prices: Option<PathBuf>,
    /// Justify deposits and withdrawals with every ponzi transaction in the
    /// input, including self-change payments that cleaning removes.
    #[arg(long)]
    pub single_pass_clean: bool,
}

#[derive(Args, Debug, Clone)]
pub struct DatasetArg {
    /// Dataset directory written by `ingest`.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MetricsArgs {
    #[command(flatten)]
    pub dataset: DatasetArg,
    /// Phases JSON anchoring cumulative values; detected when absent.
    #[arg(long)]
    pub phases: Option<PathBuf>,
    /// Include every roster address in the daily Gini index.
    #[arg(long)]
    pub all_roster_gini: bool,
    /// Scan to the farthest threshold crossing when detecting phases.
    #[arg(long)]
    pub literal_scan: bool,
}

#[derive(Args, Debug)]
pub struct PhasesArgs {
    #[command(flatten)]
    pub dataset: DatasetArg,
    #[arg(long)]
    pub literal_scan: bool,
}

#[derive(Args, Debug)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub dataset: DatasetArg,
    #[arg(long)]
    pub phases: Option<PathBuf>,
    /// Divide victims by the roster size instead of active addresses.
    #[arg(long)]
    pub all_roster_cvr: bool,
    /// Count only calendar months entirely inside the phase.
    #[arg(long)]
    pub full_months: bool,
    /// Ranking depth.
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long)]
    pub literal_scan: bool,
}

#[derive(Args, Debug)]
pub struct FlowsArgs {
    #[command(flatten)]
    pub dataset: DatasetArg,
    /// Weight category shares by counterparty value.
    #[arg(long)]
    pub value_weighted_shares: bool,
    /// Keep intra-country edges in the exported graph.
    #[arg(long)]
    pub self_loops: bool,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Directory holding the other commands' outputs; defaults to --out.
    #[arg(long)]
    pub dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = std::panic::catch_unwind(|| commands::run(cli));
    match outcome {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(err)) => {
            let (kind, code) = classify_error(&err);
            let body = serde_json::json!({
                "error": kind,
                "message": format!("{err:#}"),
            });
            eprintln!("{body}");
            ExitCode::from(code)
        }
        Err(_) => {
            eprintln!(
                "{}",
                serde_json::json!({"error": "invariant", "message": "internal error"})
            );
            ExitCode::from(3)
        }
    }
}

fn classify_error(err: &anyhow::Error) -> (&'static str, u8) {
    match err.downcast_ref::<ponzi_core::Error>() {
        Some(e) if e.is_invariant() => (e.kind(), 3),
        Some(e) => (e.kind(), 2),
        None => ("input", 2),
    }
}
