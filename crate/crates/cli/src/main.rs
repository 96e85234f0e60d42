use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use levy_spde::report::{self, ExecuteOptions};

#[derive(Parser)]
#[command(name = "levy-spde", version, about = "Convergence-order studies for the stochastic heat equation with jumps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every study in a JSON config.
    Run {
        config: PathBuf,
        /// Output directory for CSV, plot data and manifest.json.
        #[arg(long)]
        out: PathBuf,
        /// Replace the seed of every study.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (all cores by default).
        #[arg(long, env = "LEVY_SPDE_THREADS")]
        threads: Option<usize>,
        /// Validate the config and print the plan without running it.
        #[arg(long)]
        dry_run: bool,
    },
}

const CONFIG_ERROR: u8 = 1;
const RUNTIME_ERROR: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(CONFIG_ERROR)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let Command::Run {
        config,
        out,
        seed,
        threads,
        dry_run,
    } = cli.command;

    if threads == Some(0) {
        eprintln!("error: --threads must be positive");
        return ExitCode::from(CONFIG_ERROR);
    }
    let mut plans = match report::parse_config(&config) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    if let Some(s) = seed {
        for p in &mut plans {
            p.seed = s;
        }
    }

    if dry_run {
        println!("config digest {}", report::config_digest(&plans));
        for p in &plans {
            println!(
                "{}: {:?} axis, {:?}, {} levels, p = {:?}, {} samples, seed {}",
                p.name,
                p.axis,
                p.scheme,
                p.levels.len(),
                p.p_list,
                p.samples,
                p.seed
            );
        }
        return ExitCode::SUCCESS;
    }

    let opts = ExecuteOptions {
        threads,
        seed_override: seed,
    };
    let manifest = match report::execute(&plans, &out, &opts) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(RUNTIME_ERROR);
        }
    };
    for s in &manifest.studies {
        let fits: Vec<String> = s.fits.iter().map(|f| format!("p={} order={:.3}±{:.3}", f.p, f.order, f.stderr)).collect();
        println!("{} [{:?}] {}", s.name, s.status, fits.join(", "));
        if let Some(e) = &s.error {
            println!("  error: {e}");
        }
        if !s.aborted.is_empty() {
            println!("  aborted samples: {:?}", s.aborted);
        }
    }
    println!("wrote {}", out.join(report::MANIFEST_FILE).display());
    if manifest.success() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(RUNTIME_ERROR)
    }
}
