use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rough_pme::harness::{self, Summary};
use rough_pme::{par, Error};

#[derive(Parser)]
#[command(name = "rough-pme", version, about = "Rough porous-medium experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named in a TOML config file.
    Run {
        config: PathBuf,
        /// Directory for artifacts and summary.json.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// List the available experiments.
    ListExperiments,
    /// Describe an experiment and print its default config.
    Describe { experiment: String },
}

fn print_summary(s: &Summary) {
    for a in &s.assertions {
        println!(
            "{} {}: {:.6e} {} {:.6e}",
            if a.passed { "PASS" } else { "FAIL" },
            a.name,
            a.measured,
            a.relation.symbol(),
            a.bound
        );
    }
    println!("{}: {}", s.experiment, if s.passed { "passed" } else { "FAILED" });
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::ListExperiments => {
            for info in harness::experiments() {
                println!("{}", info.name);
            }
            ExitCode::SUCCESS
        }
        Command::Describe { experiment } => match harness::describe(&experiment) {
            Ok(text) => {
                println!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
        Command::Run {
            config,
            out,
            seed,
            threads,
        } => {
            let mut cfg = match harness::load_config(&config) {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let outcome = par::with_threads(threads, || harness::run_experiment(&cfg, out.as_deref()));
            let code = harness::exit_code(&outcome);
            match &outcome {
                Ok(s) => print_summary(s),
                Err(e) => eprintln!("error: {e}"),
            }
            ExitCode::from(code as u8)
        }
    }
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(harness::error_code(e) as u8)
}
