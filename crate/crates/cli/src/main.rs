use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gameda::analysis::cournot_hessian_fraction;
use gameda::engine::trial_rng;
use gameda::suites::run_suite;
use gameda_cli::document::parse_game_document;
use gameda_cli::harness;
use gameda_cli::CliError;

#[derive(Parser)]
#[command(name = "gameda", version, about = "Dual-averaging learning experiments for continuous games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the trial batch described by a config file.
    Run { config: PathBuf },
    /// Fraction of random Cournot slope vectors whose Hessian is negative definite.
    MontecarloHessian {
        #[arg(long, value_delimiter = ',', required = true)]
        n_list: Vec<usize>,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Force all slopes equal.
        #[arg(long)]
        symmetric: bool,
    },
    /// Run a property suite.
    Validate { suite: String },
    /// Parse a game document and describe it.
    ParseCheck { document: PathBuf },
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run { config } => {
            let report = harness::cmd_run(&config)?;
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            for a in &report.assertions {
                println!("{} {}: {}", if a.passed { "PASS" } else { "FAIL" }, a.name, a.detail);
            }
            if !report.passed() {
                let failed: Vec<&str> =
                    report.assertions.iter().filter(|a| !a.passed).map(|a| a.name.as_str()).collect();
                return Err(CliError::Assertion(failed.join(", ")));
            }
            Ok(())
        }
        Command::MontecarloHessian { n_list, samples, seed, symmetric } => {
            if samples == 0 {
                return Err(CliError::Config("--samples must be at least 1".into()));
            }
            if let Some(bad) = n_list.iter().find(|&&n| n == 0) {
                return Err(CliError::Config(format!("--n-list entries must be at least 1, got {bad}")));
            }
            println!("N,fraction_nd");
            for n in n_list {
                let mut rng = trial_rng(seed, n as u64);
                let fraction = cournot_hessian_fraction(n, samples, symmetric, &mut rng);
                println!("{n},{fraction:.6}");
            }
            Ok(())
        }
        Command::Validate { suite } => {
            let report = run_suite(&suite).map_err(|e| CliError::Config(e.to_string()))?;
            print!("{report}");
            if report.passed() {
                Ok(())
            } else {
                Err(CliError::Assertion(format!("suite {suite} has failing properties")))
            }
        }
        Command::ParseCheck { document } => {
            let doc = parse_game_document(&document).map_err(CliError::Config)?;
            println!("{}", doc.describe());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gameda: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
