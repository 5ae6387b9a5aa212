use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gaussloc::harness::{
    emit_summary, exit_code, init_workers, run, selftest, ExperimentConfig, Overrides, EXIT_ASSERTION,
};

/// Localization experiments for Gaussian disordered Gibbs measures.
#[derive(Parser)]
#[command(name = "gaussloc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config and write results.csv and summary.json.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replicas: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write plot.csv for a results directory.
    Summarize { dir: PathBuf },
    /// Run the built-in invariant suite.
    Selftest,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

fn dispatch(command: Command) -> gaussloc::Result<i32> {
    init_workers()?;
    match command {
        Command::Run {
            config,
            seed,
            replicas,
            out,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.apply(&Overrides { seed, replicas, out })?;
            let outcome = run(&cfg)?;
            for c in &outcome.output.checks {
                let tag = if c.pass { "PASS" } else { "FAIL" };
                println!("[{tag}] {}: {} (lhs {:.6e}, rhs {:.6e})", c.name, c.inequality, c.lhs, c.rhs);
            }
            println!("wrote {}", outcome.dir.display());
            if outcome.output.all_pass() {
                Ok(0)
            } else {
                for c in outcome.output.checks.iter().filter(|c| !c.pass) {
                    eprintln!("assertion failed: {}: {}", c.name, c.inequality);
                }
                Ok(EXIT_ASSERTION)
            }
        }
        Command::Summarize { dir } => {
            let path = emit_summary(&dir)?;
            println!("wrote {}", path.display());
            Ok(0)
        }
        Command::Selftest => {
            let checks = selftest()?;
            for c in &checks {
                println!("[{}] {}", if c.pass { "PASS" } else { "FAIL" }, c.name);
            }
            Ok(if checks.iter().all(|c| c.pass) { 0 } else { EXIT_ASSERTION })
        }
    }
}
