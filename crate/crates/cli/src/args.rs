use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "coherence-forge",
    version,
    about = "Optimal diagonal quantum filters: synthesis, frontiers, checks"
)]
pub struct Cli {
    /// Flat key=value file; keys are long flag names, flags on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Comma-separated energy levels (default 0,1,1,2 for two qubits,
    /// excitation number for other qubit counts).
    #[arg(long, global = true, value_name = "E0,E1,...")]
    pub spectrum: Option<String>,

    /// Seed for sampled checks.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads (falls back to COHERENCE_FORGE_THREADS, then all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Logarithm base used when reporting coherence on stdout and in plots.
    #[arg(long, global = true, value_enum, default_value_t = LogBase::E)]
    pub log_base: LogBase,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LogBase {
    #[value(name = "e")]
    E,
    #[value(name = "2")]
    Two,
}

impl LogBase {
    pub fn unit(self) -> &'static str {
        match self {
            LogBase::E => "nats",
            LogBase::Two => "bits",
        }
    }

    pub fn convert(self, nats: f64) -> f64 {
        match self {
            LogBase::E => nats,
            LogBase::Two => nats / std::f64::consts::LN_2,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize one optimal filter.
    Filter(FilterArgs),
    /// Trace a trade-off curve and export CSV/SVG.
    Frontier(FrontierArgs),
    /// Optimize the a = 0 filter for mixed product inputs over a range of p.
    MixedScan(MixedScanArgs),
    /// Two-stage pairwise filtering and its sequential-measurement form.
    Iterate(IterateArgs),
    /// Choi matrix and process metrics of a two-qubit filter.
    Choi(ChoiArgs),
    /// Effective filter of the two-photon interferometer.
    Optics(OpticsArgs),
    /// Brute-force grid search compared against a synthesizer.
    Oracle(OracleArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Energy,
    Coherence,
    Tsallis,
}

impl From<Target> for coherence_forge::synthesis::FilterTarget {
    fn from(t: Target) -> Self {
        use coherence_forge::synthesis::FilterTarget;
        match t {
            Target::Energy => FilterTarget::Energy,
            Target::Coherence => FilterTarget::Coherence,
            Target::Tsallis => FilterTarget::CoherenceTsallis,
        }
    }
}

/// Input state: a product of identical qubits, or a JSON state file.
#[derive(Clone, Debug, Args)]
pub struct StateArgs {
    /// Excited-state population of each qubit.
    #[arg(long, required_unless_present = "state")]
    pub p: Option<f64>,
    /// Off-diagonal damping η (1 = pure).
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    /// Number of qubits in the product.
    #[arg(long, default_value_t = 2)]
    pub qubits: usize,
    /// JSON state file ({dim, re, im}); overrides --p/--eta/--qubits.
    #[arg(long, value_name = "FILE", conflicts_with = "p")]
    pub state: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Closed form for pure two-qubit products with p < 1/2, general otherwise.
    Auto,
    ClosedForm,
    General,
    Tsallis,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[command(flatten)]
    pub input: StateArgs,
    /// Required success probability.
    #[arg(long)]
    pub ps: f64,
    #[arg(long, value_enum, default_value_t = Target::Coherence)]
    pub target: Target,
    #[arg(long, value_enum, default_value_t = Mode::Auto)]
    pub mode: Mode,
    /// Write the filter as JSON.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Optimal,
    Factorized,
    Both,
}

#[derive(Debug, Args)]
pub struct FrontierArgs {
    #[command(flatten)]
    pub input: StateArgs,
    #[arg(long, value_enum, default_value_t = Target::Coherence)]
    pub target: Target,
    #[arg(long, value_enum, default_value_t = FamilyArg::Optimal)]
    pub family: FamilyArg,
    #[arg(long, default_value_t = 200)]
    pub grid: usize,
    /// CSV destination; printed to stdout when absent.
    #[arg(long, value_name = "FILE")]
    pub out_csv: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub out_svg: Option<PathBuf>,
    /// Re-check this many random frontier points with the grid oracle.
    #[arg(long, value_name = "N")]
    pub verify: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MixedScanArgs {
    #[arg(long)]
    pub eta: f64,
    #[arg(long, default_value_t = 0.05)]
    pub p_min: f64,
    #[arg(long, default_value_t = 0.45)]
    pub p_max: f64,
    #[arg(long, default_value_t = 9)]
    pub steps: usize,
    /// Also locate the plateau threshold in p.
    #[arg(long)]
    pub threshold: bool,
    /// CSV destination; printed to stdout when absent.
    #[arg(long, value_name = "FILE")]
    pub out_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IterateArgs {
    #[arg(long)]
    pub p: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    #[arg(long, default_value_t = 2)]
    pub stages: usize,
    /// Stage filter (a, b, b, 1).
    #[arg(long, default_value_t = 0.0)]
    pub a: f64,
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
    /// Second-stage filter; defaults to the first.
    #[arg(long)]
    pub a2: Option<f64>,
    #[arg(long)]
    pub b2: Option<f64>,
    /// Write the Kraus set and sequential measurement as JSON.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ChoiArgs {
    #[arg(long)]
    pub a: f64,
    #[arg(long)]
    pub b: f64,
    /// Phase per basis state in radians, e.g. 0,0.2,-0.1,0.
    #[arg(long, value_name = "P00,P01,P10,P11", allow_hyphen_values = true)]
    pub phases: Option<String>,
    /// Write χ as JSON.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OpticsArgs {
    /// Intensity transmittance of the A0/B0 coupler.
    #[arg(long, default_value_t = 1.0)]
    pub bs_transmittance: f64,
    /// Amplitude transmissions of A0,A1,B0,B1.
    #[arg(long, value_name = "A0,A1,B0,B1", default_value = "1,1,1,1")]
    pub attenuations: String,
    /// Partially polarizing splitter amplitudes t_H,t_V (replaces the coupler).
    #[arg(long, value_name = "T_H,T_V")]
    pub ppbs: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Synthesizer {
    Optimal,
    /// Always returns the identity; negative control.
    Identity,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub input: StateArgs,
    #[arg(long)]
    pub ps: f64,
    #[arg(long, value_enum, default_value_t = Target::Coherence)]
    pub target: Target,
    #[arg(long, default_value_t = 0.02)]
    pub grid_step: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub tolerance: f64,
    #[arg(long, value_enum, default_value_t = Synthesizer::Optimal)]
    pub synthesizer: Synthesizer,
}
