use std::path::PathBuf;
use std::process::ExitCode;

use biwave::experiments::{cmd_converge, cmd_run, cmd_sweep, ConvergeMode};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "biwave", version, about = "Penalized biharmonic wave maps into spheres")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write diagnostics and the final snapshot.
    Run { config: PathBuf },
    /// Run the same data for a decreasing list of epsilons.
    Sweep {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true, value_parser = parse_real)]
        eps: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Refine dt or the grid and report observed convergence.
    Converge {
        config: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Dt,
    Grid,
}

fn parse_real(s: &str) -> Result<f64, String> {
    biwave::config::parse_real(s)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Some(n) = std::env::var("BIWAVE_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let code = match cli.command {
        Command::Run { config } => cmd_run(&config),
        Command::Sweep { config, eps, jobs } => cmd_sweep(&config, &eps, jobs),
        Command::Converge { config, mode } => cmd_converge(
            &config,
            match mode {
                Mode::Dt => ConvergeMode::Dt,
                Mode::Grid => ConvergeMode::Grid,
            },
        ),
    };
    ExitCode::from(code as u8)
}
