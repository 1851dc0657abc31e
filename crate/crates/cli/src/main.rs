mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Failure;

#[derive(Parser)]
#[command(
    name = "cyclenet",
    version,
    about = "Store, retrieve and analyse binary cycles in delayed networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Admissibility, rank, DFT profile, class and selected indices of a cycle.
    Admissible(commands::AdmissibleArgs),
    /// Transition graph of sgn(J x) over all sign patterns.
    Graph(commands::GraphArgs),
    /// Integrate the delayed network from a run configuration.
    Simulate(commands::SimulateArgs),
    /// Stability boundaries, pitchfork and Bogdanov-Takens points of a cycle's network.
    Curves(commands::CurvesArgs),
    /// Saddle-node curve of the derived system.
    SnCurve(commands::SnCurveArgs),
    /// Non-trivial equilibria of the excitatory ring.
    Ring(commands::RingArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Admissible(a) => commands::admissible(&a),
        Command::Graph(a) => commands::graph(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Curves(a) => commands::curves(&a),
        Command::SnCurve(a) => commands::sn_curve(&a),
        Command::Ring(a) => commands::ring(&a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure { code, message }) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
