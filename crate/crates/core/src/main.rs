use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spectral_closure::config::{parse_config, Mode, RunConfig};
use spectral_closure::error::{ConfigError, Error};
use spectral_closure::run::{exit_code, run};
use spectral_closure::verify::suite;

/// Two-time spectral closures and the random-oscillator testbed.
#[derive(Parser)]
#[command(name = "closurelab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closure solution of the random oscillator against the closed forms.
    Oscillator(RunArgs),
    /// Free decay of isotropic turbulence under one closure.
    Decay(RunArgs),
    /// Oscillator run plus the Monte-Carlo ensemble oracle.
    Oracle(RunArgs),
    /// Runs the built-in acceptance suite (takes a couple of minutes).
    Check {
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration; defaults apply to every missing key.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the Monte-Carlo oracle (overrides `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn set_threads(threads: Option<usize>) -> Result<(), Error> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(ConfigError::new("threads", "must be at least 1").into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Contract(e.to_string()))?;
    }
    Ok(())
}

fn load(mode: Mode, args: &RunArgs) -> Result<RunConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
            parse_config(&text, Some(mode))?
        }
        None => RunConfig::defaults(mode),
    };
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn execute(mode: Mode, args: RunArgs) -> i32 {
    let outcome = set_threads(args.threads)
        .and_then(|_| load(mode, &args))
        .and_then(|cfg| run(&cfg));
    match outcome {
        Ok(out) => {
            if let Some(b) = &out.manifest.blowup {
                eprintln!("blowup after row {}: {}", b.last_good_row, b.message);
            }
            println!("{} run {}: wrote {}", mode.name(), out.manifest.status.name(), out.dir.display());
            out.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let code = match Cli::parse().command {
        Command::Oscillator(args) => execute(Mode::Oscillator, args),
        Command::Decay(args) => execute(Mode::Decay, args),
        Command::Oracle(args) => execute(Mode::Oracle, args),
        Command::Check { threads } => match set_threads(threads) {
            Err(e) => {
                eprintln!("error: {e}");
                exit_code(&e)
            }
            Ok(()) => {
                let reports = suite::run_all();
                for r in &reports {
                    println!("{r}");
                }
                i32::from(reports.iter().any(|r| !r.passed))
            }
        },
    };
    ExitCode::from(code as u8)
}
