use clap::{Args, Parser, Subcommand as ClapSubcommand};
use smallcap_harness::config::{parse_config, ExperimentConfig, Subcommand};
use smallcap_harness::exit;
use smallcap_harness::run::{output_dir, reproduce, run};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "smallcap", version, about = "Run and reproduce exponential-sum and incidence experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(ClapSubcommand)]
enum Command {
    /// Moment scans of exponential sums
    Moments(RunArgs),
    /// Empirical decoupling constants
    Decouple(RunArgs),
    /// Tube and plate incidence counts
    Kakeya(RunArgs),
    /// Additive energy scans
    Energy(RunArgs),
    /// Zeta blocks against derivative bounds
    Vdc(RunArgs),
    /// Fast routines against their slow oracles
    OracleCheck(RunArgs),
    /// Rerun a recorded results.json and report the deviation
    Reproduce {
        results: PathBuf,
        /// Rerun under a different base seed
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON configuration (defaults are used when absent)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for results.json and results.dat
    #[arg(long)]
    out: Option<PathBuf>,
    /// Maximum worker threads
    #[arg(long)]
    workers: Option<usize>,
    /// Base seed (overrides the config)
    #[arg(long)]
    seed: Option<u64>,
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn run_subcommand(sub: Subcommand, args: RunArgs) -> ExitCode {
    let mut config = match &args.config {
        Some(path) => {
            let text = match std::fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("cannot read {}: {e}", path.display());
                    return code(exit::USAGE);
                }
            };
            match parse_config(&text, Some(sub)) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("{}: {e}", path.display());
                    return code(exit::USAGE);
                }
            }
        }
        None => ExperimentConfig::default_for(sub),
    };
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if args.workers == Some(0) {
        eprintln!("--workers must be at least 1");
        return code(exit::USAGE);
    }
    let dir = output_dir(&config, args.out.as_deref());
    match run(&config, &dir, args.workers) {
        Ok(rec) => {
            for (k, v) in &rec.summary {
                println!("{k} = {v}");
            }
            for c in &rec.checks {
                println!("{}", c.line());
            }
            println!("wrote {}", dir.display());
            code(if rec.passed { exit::PASS } else { exit::THRESHOLD_FAILED })
        }
        Err(e) => {
            eprintln!("{e}");
            code(exit::USAGE)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let sub = match cli.command {
        Command::Moments(a) => return run_subcommand(Subcommand::Moments, a),
        Command::Decouple(a) => return run_subcommand(Subcommand::Decouple, a),
        Command::Kakeya(a) => return run_subcommand(Subcommand::Kakeya, a),
        Command::Energy(a) => return run_subcommand(Subcommand::Energy, a),
        Command::Vdc(a) => return run_subcommand(Subcommand::Vdc, a),
        Command::OracleCheck(a) => return run_subcommand(Subcommand::OracleCheck, a),
        Command::Reproduce { results, seed, workers } => (results, seed, workers),
    };
    let (results, seed, workers) = sub;
    match reproduce(&results, seed, workers) {
        Ok((rec, dev)) => {
            println!("subcommand: {}", rec.subcommand.name());
            println!("compared values: {}", dev.cells);
            println!("max relative deviation: {:e}", dev.max_relative);
            if let Some(s) = dev.max_sigmas {
                println!("max deviation in standard errors: {s:.3}");
            }
            code(exit::PASS)
        }
        Err(e) => {
            eprintln!("{e}");
            code(exit::USAGE)
        }
    }
}
