use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "frogwalk",
    version,
    about = "Rumor spreading by independent random walks on grids, tori and rings",
    args_override_self = true,
    propagate_version = true
)]
pub struct Cli {
    /// Plain-text `key=value` file with flag defaults; flags on the command
    /// line take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one seeded trial and print its completion time.
    Simulate(SimulateArgs),
    /// Run every (n, m, trial) cell of a sweep and write sweep.csv.
    Sweep(SweepArgs),
    /// Exact chain computations and walk estimators.
    Oracle(OracleArgs),
    /// Run one recorded trial and write island, frontier and cell tables.
    Analyze(AnalyzeArgs),
    /// Fit a power law to sweep.csv and compare candidate scaling laws.
    Fit(FitArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TopologyArg {
    Grid,
    Torus,
    Ring,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    Broadcast,
    Gossip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlacementArg {
    Exact,
    Binomial,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Walk domain.
    #[arg(long, value_enum, default_value = "grid")]
    pub topology: TopologyArg,

    /// Node count (perfect square for grid and torus); comma-separated list
    /// for sweeps.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub n: Vec<u64>,

    /// Agent budget; comma-separated list for sweeps.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub m: Vec<u64>,

    /// Spreading process.
    #[arg(long, value_enum, default_value = "broadcast")]
    pub scenario: ScenarioArg,

    /// Initial placement model.
    #[arg(long, value_enum, default_value = "exact")]
    pub placement: PlacementArg,

    /// Probability that a move stays put (default: 0.2 for torus and ring
    /// gossip, 0 otherwise).
    #[arg(long, value_name = "P")]
    pub lazy: Option<f64>,

    /// Seed controlling all randomness.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Step horizon (default: ceil(8 n ln^2 n)).
    #[arg(long, value_name = "STEPS")]
    pub max_steps: Option<u64>,

    /// Trials per cell (sweep) or Monte Carlo trials (oracle).
    #[arg(long, default_value_t = 1)]
    pub trials: usize,

    /// Comma-separated subset of islands,frontier,cells,positions.
    #[arg(long, value_name = "LIST")]
    pub record: Option<String>,

    /// Record every STRIDE steps.
    #[arg(long, default_value_t = 1)]
    pub stride: u64,

    /// Island distance parameter (default: sqrt(n / (4 e^3 m))).
    #[arg(long)]
    pub gamma: Option<f64>,

    /// Tessellation cell side for the cells table.
    #[arg(long)]
    pub cell_side: Option<u32>,

    /// Output file (simulate, sweep, fit) or directory (analyze).
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Exit with status 1 when a sweep cell only timed out.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Record per-trial wall time in the wall_ms column (output is then no
    /// longer reproducible byte for byte).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleKind {
    /// Exact first-meeting probability of two walks from --a and --b.
    Meet,
    /// Monte Carlo estimate of the same quantity (--trials).
    MeetMc,
    /// Exact probability that a walk from --a visits --b.
    Visit,
    /// Expected co-locations R(a, b, T) of two walks.
    Collisions,
    /// Deviation and range statistics of a walk from --a over --T steps.
    Walk,
    /// Cover-time quantiles of a walk from a uniform start.
    Cover,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(value_enum)]
    pub kind: OracleKind,

    #[command(flatten)]
    pub common: CommonArgs,

    /// First start node, `x,y`.
    #[arg(long, value_name = "X,Y")]
    pub a: Option<String>,

    /// Second start node or target, `x,y`.
    #[arg(long, value_name = "X,Y")]
    pub b: Option<String>,

    /// Horizon in steps.
    #[arg(long = "T", value_name = "STEPS")]
    pub horizon: Option<usize>,

    /// Deviation multipliers for `walk`.
    #[arg(long, value_delimiter = ',', default_values_t = [2.0, 3.0, 4.0])]
    pub lambda: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// sweep.csv to fit.
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
}

#[cfg(test)]
impl Command {
    pub fn common(&self) -> &CommonArgs {
        match self {
            Command::Simulate(a) => &a.common,
            Command::Sweep(a) => &a.common,
            Command::Oracle(a) => &a.common,
            Command::Analyze(a) => &a.common,
            Command::Fit(a) => &a.common,
        }
    }
}

/// Turns `key=value` lines into `--key value` arguments. Blank lines and
/// lines starting with `#` are skipped; a bare `key` becomes a switch.
pub fn config_args(text: &str) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = match line.split_once('=') {
            Some((k, v)) => (k.trim(), Some(v.trim())),
            None => (line, None),
        };
        if key.is_empty() || key == "config" {
            return Err(format!("config line {}: invalid key `{key}`", lineno + 1));
        }
        let key = key.trim_start_matches("--").replace('_', "-");
        out.push(format!("--{key}"));
        if let Some(v) = value {
            out.push(v.to_owned());
        }
    }
    Ok(out)
}

/// Finds `--config PATH` or `--config=PATH` in raw arguments.
pub fn find_config(argv: &[String]) -> Option<PathBuf> {
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}
