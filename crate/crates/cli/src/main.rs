use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use timoslip_cli::run::{run_converge, run_fit, run_simulate, run_sweep, Outcome};
use timoslip_cli::{parse_config, CliError};

/// Laminated beam with interfacial slip and viscoelastic memory.
#[derive(Parser)]
#[command(name = "timoslip", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Energy sampling stride in steps (overrides `output.stride`).
    #[arg(long)]
    stride: Option<usize>,
    /// Accepted and ignored: runs are deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Single run: energy trace and final state.
    Simulate(Common),
    /// Single run with the decrement identity checked at every step.
    Verify(Common),
    /// Self-convergence study over `[converge].levels`.
    Converge(Common),
    /// Kernel variants in parallel with decay fits.
    Sweep(Common),
    /// Decay fits of an existing energy trace.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Energy CSV; defaults to `<out>/energy.csv`.
        #[arg(long)]
        energy: Option<PathBuf>,
    },
}

fn execute(cmd: Command) -> Result<Outcome, CliError> {
    let common = match &cmd {
        Command::Simulate(c) | Command::Verify(c) | Command::Converge(c) | Command::Sweep(c) => c,
        Command::Fit { common, .. } => common,
    };
    let cfg = parse_config(&common.config)?;
    let out = common.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    let stride = common.stride.unwrap_or(cfg.output.stride);
    if stride == 0 {
        return Err(CliError::config("--stride must be >= 1"));
    }
    match cmd {
        Command::Simulate(_) => run_simulate(&cfg, &out, stride, false),
        Command::Verify(_) => run_simulate(&cfg, &out, 1, true),
        Command::Converge(_) => run_converge(&cfg, &out).map(|(o, _)| o),
        Command::Sweep(_) => run_sweep(&cfg, &out, stride).map(|(o, _)| o),
        Command::Fit { energy, .. } => {
            let path = energy.unwrap_or_else(|| out.join("energy.csv"));
            run_fit(&cfg, &path, &out)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let result = execute(cli.command);
    let code = match result {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{}", f.display());
            }
            if let Some(e) = &outcome.error {
                eprintln!("{}", e.line());
            }
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("{}", e.line());
            e.code as i32
        }
    };
    std::process::exit(code);
}
