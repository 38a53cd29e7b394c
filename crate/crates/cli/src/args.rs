use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "qwk",
    version,
    about = "Compound wiretap capacities, random-code simulation and entanglement generation"
)]
pub struct Cli {
    /// Worker threads for the parallel kernels (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a capacity formula on a spec or channel family.
    Capacity(CapacityArgs),
    /// Sample a wiretap code and measure its error and leakage.
    Simulate(SimulateArgs),
    /// Build a τ-net of channels and report its cardinality bound.
    Net(NetArgs),
    /// Run the entanglement-generation protocol and audit its fidelities.
    Entangle(EntangleArgs),
    /// Run randomised inequality suites.
    Verify(VerifyArgs),
    /// Re-execute the command recorded in an output file.
    Rerun(RerunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write a per-state CSV table.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CapacityArgs {
    /// Spec file; entanglement formulas also take a family file.
    #[arg(long)]
    pub spec: PathBuf,
    /// Formula id or alias (b1, b1p, csi, nocsi, e1q, qnocsi, ent, ent_csi).
    #[arg(long)]
    pub formula: String,
    /// Block length of regularized formulas.
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long)]
    pub aux_card: Option<usize>,
    #[arg(long, default_value_t = 21)]
    pub grid: usize,
    #[arg(long, default_value_t = 200)]
    pub refine: usize,
    #[arg(long, default_value_t = 8)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long, default_value_t = 6)]
    pub n: usize,
    /// Number of messages, or `auto`.
    #[arg(long = "J", value_name = "J|auto")]
    pub messages: Option<String>,
    /// Randomisation depth: `auto`, one value, or one per state (comma separated).
    #[arg(long = "L", value_name = "L|auto")]
    pub depth: Option<String>,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long)]
    pub seed: u64,
    /// Codeword letter distribution, comma separated (default uniform).
    #[arg(long)]
    pub prior: Option<String>,
    /// Typicality slack of the codeword source.
    #[arg(long, default_value_t = 0.25)]
    pub delta: f64,
    /// Conditional-typicality slack of the decoder.
    #[arg(long, default_value_t = 0.1)]
    pub decoder_delta: f64,
    #[arg(long, default_value_t = 0.05)]
    pub mu: f64,
    #[arg(long, default_value_t = 0.05)]
    pub zeta: f64,
    /// Skip the conditional typical projectors in the cq decoder.
    #[arg(long)]
    pub no_sandwich: bool,
    /// Two-block protocol: send the state index first, then the message.
    #[arg(long)]
    pub protocol: bool,
    /// True channel state for `--protocol`, by name or index.
    #[arg(long, requires = "protocol")]
    pub t_true: Option<String>,
    #[arg(long, default_value_t = 8, requires = "protocol")]
    pub n1: usize,
    #[arg(long, default_value_t = 12, requires = "protocol")]
    pub n2: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct NetArgs {
    #[arg(long, default_value_t = 2)]
    pub d_in: usize,
    #[arg(long, default_value_t = 2)]
    pub d_out: usize,
    #[arg(long)]
    pub tau: f64,
    /// Maximum number of net elements to enumerate.
    #[arg(long, default_value_t = 256)]
    pub budget: usize,
    /// Write the JSON summary here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EntangleArgs {
    /// Family file, or a quantum spec whose legitimate channels form the family.
    #[arg(long)]
    pub family: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long = "J", default_value_t = 2)]
    pub messages: usize,
    #[arg(long = "L", default_value_t = 1)]
    pub depth: usize,
    #[arg(long, default_value_t = 0.5)]
    pub delta: f64,
    #[arg(long)]
    pub seed: u64,
    /// Input distribution, comma separated; overrides the family file.
    #[arg(long)]
    pub prior: Option<String>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// typicality, gentle, fannes, covering, fidelity or all.
    pub suite: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct RerunArgs {
    /// Output file holding the manifest to replay.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Compare the new report with the recorded one; exit 3 on any difference.
    #[arg(long)]
    pub check: bool,
}
