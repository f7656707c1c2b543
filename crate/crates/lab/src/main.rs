use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qubus_lab::commands::{self, GateArgs, GrowthArgs, ScalingArgs};
use qubus_lab::verify::{self, VerifyArgs};

#[derive(Parser)]
#[command(name = "qubus", version, about = "Qubus gate, cluster-growth and scaling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Outcome table and error budget of one gate protocol
    Gate(GateArgs),
    /// Monte Carlo growth statistics against the closed forms
    Growth(GrowthArgs),
    /// Operation or time tables for the growth strategies and reference laws
    Scaling(ScalingArgs),
    /// Run the acceptance suite
    Verify(VerifyArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = std::io::stdout().lock();
    let result = match &cli.command {
        Command::Gate(a) => commands::cmd_gate(a, &mut out),
        Command::Growth(a) => commands::cmd_growth(a, &mut out),
        Command::Scaling(a) => commands::cmd_scaling(a, &mut out),
        Command::Verify(a) => verify::cmd_verify(a, &mut out),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
