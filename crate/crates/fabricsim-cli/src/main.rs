//! Command-line front end: experiment configuration, presets, benchmark
//! and workload orchestration, CSV reports.
//!
//! Exit codes: 0 success, 1 configuration or schema error, 2 runtime
//! invariant violation (CFL bound, halo mismatch, deadlock, I/O).

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<fabricsim::netsim::SimError> for CliError {
    fn from(e: fabricsim::netsim::SimError) -> Self {
        use fabricsim::netsim::SimError::*;
        match e {
            Config(_) | UnknownPeer { .. } => CliError::Config(e.to_string()),
            NoRxBuffer { .. } | Deadlock(_) => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<fabricsim::beff::BeffError> for CliError {
    fn from(e: fabricsim::beff::BeffError) -> Self {
        use fabricsim::beff::BeffError::*;
        match e {
            Config(_) | EmptyTable => CliError::Config(e.to_string()),
            Sim(s) => s.into(),
        }
    }
}

impl From<fabricsim::mesh::MeshError> for CliError {
    fn from(e: fabricsim::mesh::MeshError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<fabricsim::swe::SweError> for CliError {
    fn from(e: fabricsim::swe::SweError) -> Self {
        use fabricsim::swe::SweError::*;
        match e {
            Config(_) => CliError::Config(e.to_string()),
            Mesh(m) => m.into(),
            Sim(s) => s.into(),
            CflViolation { .. } | NonFinite { .. } | HaloMismatch { .. } => {
                CliError::Runtime(e.to_string())
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("i/o error: {e}"))
    }
}

#[derive(Parser)]
#[command(
    name = "fabricsim",
    version,
    about = "Deterministic simulator and analytic models for accelerator communication fabrics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ring ping-ping benchmark over a message-size sweep
    Beff(BeffArgs),
    /// Shallow-water workload: solve or scaling experiments
    Swe {
        #[command(subcommand)]
        cmd: SweCmd,
    },
    /// Evaluate the closed-form latency/throughput models
    Model(ModelArgs),
    /// Generate, partition and inspect meshes
    Mesh {
        #[command(subcommand)]
        cmd: MeshCmd,
    },
}

/// Flags shared by every experiment command.
#[derive(Args, Clone, Default)]
struct CommonArgs {
    /// Experiment configuration file (TOML)
    #[arg(long)]
    config: Option<String>,
    /// Cluster preset (overrides the config file)
    #[arg(long)]
    preset: Option<String>,
    /// Directory for result files
    #[arg(long)]
    out_dir: Option<String>,
    /// Write the event trace to trace.log in the output directory
    #[arg(long)]
    trace: bool,
    /// Print the resolved configuration as TOML and exit
    #[arg(long)]
    dump_config: bool,
}

#[derive(Args)]
struct BeffArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Ring size (at least 2)
    #[arg(long)]
    nodes: Option<usize>,
    /// Rounds per message size
    #[arg(long)]
    repetitions: Option<u32>,
}

#[derive(Subcommand)]
enum SweCmd {
    /// Run the solver on a partitioned mesh through the simulated fabric
    Solve(SolveArgs),
    /// Weak or strong scaling over partition counts
    Scaling(ScalingArgs),
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Generated mesh width in cells
    #[arg(long)]
    nx: Option<u32>,
    /// Generated mesh height in cells
    #[arg(long)]
    ny: Option<u32>,
    /// Sea side of the generated mesh: north|south|east|west|closed
    #[arg(long)]
    sea_side: Option<String>,
    /// Mesh file (instead of generating)
    #[arg(long)]
    mesh: Option<String>,
    /// Partition count
    #[arg(long)]
    k: Option<u32>,
    /// Partitioner: bisection|greedy-bfs
    #[arg(long)]
    method: Option<String>,
    /// Time steps
    #[arg(long)]
    steps: Option<u64>,
    /// Time step length in seconds
    #[arg(long)]
    dt: Option<f64>,
    /// Write a state snapshot every N steps (0 = only the final state)
    #[arg(long)]
    snapshot_every: Option<u64>,
    /// Compare against the single-partition reference solver, bitwise
    #[arg(long)]
    check_oracle: bool,
}

#[derive(Args)]
struct ScalingArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// weak | strong
    #[arg(long)]
    kind: Option<String>,
    /// Comma-separated partition counts, e.g. 1,2,4,8
    #[arg(long)]
    k_list: Option<String>,
    /// Weak scaling: elements per partition
    #[arg(long)]
    elements_per_partition: Option<u64>,
    /// Strong scaling: total mesh elements
    #[arg(long)]
    mesh_elements: Option<u64>,
    /// Simulated steps per point
    #[arg(long)]
    steps: Option<u32>,
}

#[derive(Args)]
struct ModelArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Print the buffered-path peak throughput for MEM_BW and LINK_BW
    #[arg(long, num_args = 2, value_names = ["MEM_BW", "LINK_BW"])]
    buffered_peak: Option<Vec<f64>>,
    /// Comma-separated message sizes for the latency sweep
    #[arg(long)]
    sizes: Option<String>,
}

#[derive(Subcommand)]
enum MeshCmd {
    /// Generate a rectangular test mesh
    Generate {
        #[arg(long)]
        nx: u32,
        #[arg(long)]
        ny: u32,
        /// north|south|east|west|closed
        #[arg(long, default_value = "east")]
        sea_side: String,
        /// Output mesh file
        #[arg(long)]
        out: String,
    },
    /// Partition a mesh and export per-part statistics
    Partition {
        /// Mesh file
        #[arg(long)]
        mesh: String,
        #[arg(long)]
        k: u32,
        /// bisection|greedy-bfs
        #[arg(long, default_value = "bisection")]
        method: String,
        /// Statistics CSV output path
        #[arg(long)]
        out: String,
        /// Bytes per halo element for the size columns
        #[arg(long, default_value_t = 32)]
        bytes_per_element: u64,
    },
    /// Print a summary of a mesh file
    Inspect {
        #[arg(long)]
        mesh: String,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match cli.command {
        Command::Beff(args) => commands::beff(args),
        Command::Swe { cmd } => match cmd {
            SweCmd::Solve(args) => commands::swe_solve(args),
            SweCmd::Scaling(args) => commands::swe_scaling(args),
        },
        Command::Model(args) => commands::model(args),
        Command::Mesh { cmd } => commands::mesh(cmd),
    };
    match result {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
