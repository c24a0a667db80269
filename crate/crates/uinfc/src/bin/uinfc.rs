use std::path::PathBuf;

use clap::{Parser, Subcommand};

use uinfc::cli;
use uinfc::validate::ValidationHooks;

#[derive(Parser)]
#[command(name = "uinfc", version, about = "Inf-convolution sample-and-hold stabilization")]
struct Args {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one closed-loop simulation and write its trajectory CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a configuration for several values of one parameter.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// eps, eta, eps_and_eta, e_bar, q_bar or e_and_q.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        #[arg(long)]
        out_dir: PathBuf,
        /// Worker threads; defaults to the number of CPUs.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Compute the stabilizing parameter bounds for a configuration.
    Bounds {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the built-in property suite.
    Validate {
        /// Print the check names without running them.
        #[arg(long)]
        list: bool,
        /// Offset added to every proximal subgradient before checking it.
        #[arg(long, hide = true, default_value_t = 0.0)]
        corrupt_zeta: f64,
    },
}

fn main() {
    let args = Args::parse();
    let code = match args.cmd {
        Cmd::Simulate { config, out } => cli::run_simulate(&config, &out),
        Cmd::Sweep { config, param, values, out_dir, jobs } => cli::run_sweep(&config, &param, &values, &out_dir, jobs),
        Cmd::Bounds { config, out } => cli::run_bounds(&config, &out),
        Cmd::Validate { list, corrupt_zeta } => cli::run_validate(list, &ValidationHooks { zeta_offset: corrupt_zeta }),
    };
    std::process::exit(code);
}
