use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "eigensector",
    version,
    about = "Sector and subsector structure of return cross-correlations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Correlation spectrum, Wishart bounds and significant modes.
    Analyze(AnalyzeArgs),
    /// Positive/negative subsector tables for the significant modes.
    Sectors(SectorsArgs),
    /// Subsector anti-correlation scan against a random baseline.
    Anticorr(AnticorrArgs),
    /// Generate a synthetic factor-model panel.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Long,
    Wide,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RangePolicyArg {
    #[default]
    Intersect,
    DropIncomplete,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    /// Price file; repeat to merge panels with disjoint assets.
    #[arg(long = "input", required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Long)]
    pub format: Format,
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
    /// Return horizon in rows of the date axis.
    #[arg(long = "delta-t", default_value_t = 1)]
    pub delta_t: usize,
    /// ASSETS:FROM:TO, e.g. `TLV1,TLV2:sun:fri`. Repeatable.
    #[arg(long = "shift-rule")]
    pub shift_rules: Vec<String>,
    #[arg(long = "range-policy", value_enum, default_value_t)]
    pub range_policy: RangePolicyArg,
    /// Drop constant-price assets instead of failing.
    #[arg(long = "drop-zero-variance")]
    pub drop_zero_variance: bool,
    /// `asset,category` file used for subsector labels.
    #[arg(long)]
    pub metadata: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    /// Detection threshold as a multiple of the Wishart upper edge.
    #[arg(long, default_value_t = 1.0)]
    pub margin: f64,
    #[arg(long = "out-dir", default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SectorsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 1.0)]
    pub margin: f64,
    /// Component threshold; repeatable. Defaults to 0.08 and 0.10.
    #[arg(long = "u-c")]
    pub u_c: Vec<f64>,
    #[arg(long = "out-dir", default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnticorrArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    /// Component threshold for the scan; a full-weight scan (0) is always added.
    #[arg(long = "u-c", default_value_t = 0.08)]
    pub u_c: f64,
    #[arg(long, default_value_t = eigensector::anticorr::DEFAULT_TRIALS)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "include-market-mode")]
    pub include_market_mode: bool,
    #[arg(long = "out-dir", default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    /// TOML market specification.
    #[arg(long)]
    pub spec: PathBuf,
    /// Overrides the seed in the specification.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "out-dir", default_value = "out")]
    pub out_dir: PathBuf,
}
