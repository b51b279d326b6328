mod check;
mod cost;
mod gen;
mod inputs;
mod run;
mod tune;

use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::inputs::Mismatch;

#[derive(Parser)]
#[command(name = "sparsekit", version, about = "Sparse convolution dataflows, cost model and autotuner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a network on one point cloud.
    Run(run::RunArgs),
    /// Pick a dataflow per layer group by measured latency.
    Tune(tune::TuneArgs),
    /// Emit the modeled cost table as CSV.
    Cost(cost::CostArgs),
    /// Differential test of every dataflow against the reference.
    Check(check::CheckArgs),
    /// Generate clouds, weights or a toy network.
    #[command(subcommand)]
    Gen(gen::GenCommand),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Prec {
    F32,
    F64,
}

impl Prec {
    pub fn name(self) -> &'static str {
        match self {
            Prec::F32 => "f32",
            Prec::F64 => "f64",
        }
    }

    pub fn elem_bytes(self) -> u64 {
        match self {
            Prec::F32 => 4,
            Prec::F64 => 8,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run::cmd_run(&a),
        Command::Tune(a) => tune::cmd_tune(&a),
        Command::Cost(a) => cost::cmd_cost(&a),
        Command::Check(a) => check::cmd_check(&a),
        Command::Gen(g) => gen::cmd_gen(&g),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<Mismatch>() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
