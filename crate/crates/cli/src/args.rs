//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "stratshap", version, about = "Shapley attributions with stratified references")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Attribute predictions for every row of a data file.
    Explain(ExplainArgs),
    /// Check the engine against the closed-form two-feature spline tables.
    OracleCheck(OracleCheckArgs),
    /// Sample the two-feature spline data set.
    Simulate(SimulateArgs),
    /// Pair two report files and fit per-feature slopes.
    Compare(CompareArgs),
    /// Error of permutation sampling against the exact values over a schedule of P.
    Convergence(ConvergenceArgs),
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Exact,
    Permutation,
    Asymmetric,
    Stratified,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValueArg {
    #[default]
    Marginal,
    Conditional,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirectionArg {
    /// The other features cause the stratum feature.
    Effect,
    /// The stratum feature causes the others.
    Cause,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormatArg {
    #[default]
    Csv,
    Json,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtrapolationArg {
    #[default]
    Linear,
    Constant,
}

/// Options for `explain`. Every field may also come from `--config`; flags win.
#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ExplainArgs {
    /// TOML or JSON file with any of these options.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// CSV of instances to explain.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Model JSON file.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Value function for exact, permutation and asymmetric runs.
    #[arg(long, value_enum)]
    pub value: Option<ValueArg>,
    /// Background CSV, or `analytic` for the closed-form spline expectations.
    #[arg(long)]
    pub background: Option<String>,
    /// Background rows kept per instance (per stratum for stratified runs).
    #[arg(long)]
    pub subsample: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Permutations for sampled estimates.
    #[arg(long)]
    pub permutations: Option<usize>,
    /// Disable antithetic pairing of permutations.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub no_antithetic: Option<bool>,
    /// Largest game solved by exact enumeration.
    #[arg(long)]
    pub cap: Option<usize>,
    /// Stratum feature, by name or zero-based index.
    #[arg(long)]
    pub stratum_feature: Option<String>,
    /// `identity`, `constant`, or `bucket:<width>[:<origin>]`.
    #[arg(long)]
    pub stratum_key: Option<String>,
    #[arg(long, value_enum)]
    pub direction: Option<DirectionArg>,
    /// Feature receiving the reference shift; defaults to the stratum feature.
    #[arg(long)]
    pub recipient: Option<String>,
    /// `global-mean`, `stratum-mean[=<label>]`, `explicit=<v>` or `representative=<row>`.
    #[arg(long)]
    pub xi: Option<String>,
    /// Causal groups, earliest first: `a,b;c;d`.
    #[arg(long)]
    pub ordering: Option<String>,
    /// Comma-separated categorical columns (matched exactly when conditioning).
    #[arg(long)]
    pub categorical: Option<String>,
    /// Column dropped from data and background; `y` by default when present.
    #[arg(long)]
    pub target: Option<String>,
    /// Report background-sampling standard errors where available.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub stderr: Option<bool>,
    /// Include every v(S) in JSON output.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub trace: Option<bool>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct OracleCheckArgs {
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
    /// Random (beta, x*) cases per table.
    #[arg(long, default_value_t = 1000)]
    pub cases: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the closed-form golden rows to this CSV.
    #[arg(long)]
    pub export: Option<PathBuf>,
    /// Adds this to gamma in the reference used by the equivalence check.
    #[arg(long, hide = true, default_value_t = 0.0, allow_hyphen_values = true)]
    pub perturb_gamma: f64,
}

#[derive(Args, Debug, Clone)]
pub struct SimulateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// `b0,b1,b12`.
    #[arg(long, default_value = "0,1,1", allow_hyphen_values = true)]
    pub beta: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the spline model JSON here.
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    /// Off-manifold behaviour of the written model.
    #[arg(long, value_enum, default_value_t = ExtrapolationArg::Linear)]
    pub extrapolation: ExtrapolationArg,
}

#[derive(Args, Debug, Clone)]
pub struct CompareArgs {
    /// Reference report CSV (e.g. standard attributions).
    #[arg(long)]
    pub a: PathBuf,
    /// Report CSV paired with `--a` (e.g. stratified attributions).
    #[arg(long)]
    pub b: PathBuf,
    /// Paired rows CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-feature fit CSV.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct ConvergenceArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Background CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Row of the background explained.
    #[arg(long, default_value_t = 0)]
    pub instance: usize,
    /// Comma-separated permutation counts.
    #[arg(long, default_value = "16,64,256,1024")]
    pub schedule: String,
    /// Comma-separated seeds; overrides `--runs`.
    #[arg(long)]
    pub seeds: Option<String>,
    /// Number of seeds, counting up from `--seed`.
    #[arg(long, default_value_t = 20)]
    pub runs: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ValueArg::Marginal)]
    pub value: ValueArg,
    #[arg(long)]
    pub subsample: Option<usize>,
    #[arg(long)]
    pub categorical: Option<String>,
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub no_antithetic: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
