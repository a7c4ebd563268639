use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use decohere::cli::{self, CliError, Engine};

#[derive(Parser)]
#[command(name = "decohere", version, about = "Spin measurement by a damped pointer: exact solutions and numerical oracles")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve a scenario and write series, fields and a summary.
    Run {
        config: PathBuf,
        /// Overrides `output.dir`.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Engines to run instead of the configured list (repeatable).
        #[arg(long, value_enum)]
        engine: Vec<Engine>,
        /// Points per grid axis.
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Print the derived constants of a scenario.
    Constants {
        config: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Check a scenario without running it.
    Validate { config: PathBuf },
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(args.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Run {
            config,
            output_dir,
            engine,
            grid,
        } => {
            let mut s = cli::load_scenario(&config)?;
            cli::apply_overrides(&mut s, output_dir, &engine, grid)?;
            let report = cli::run_scenario(&s)?;
            for f in &report.fits {
                match f.tau {
                    Some(tau) => println!("{}: fitted tau = {tau:.6e} (tau_D = {:.6e})", f.engine, f.tau_d),
                    None => println!("{}: no fit ({})", f.engine, f.error.as_deref().unwrap_or("")),
                }
            }
            println!("wrote {} files to {}", report.files.len() + 1, s.output.dir.display());
            Ok(())
        }
        Command::Constants { config, json } => {
            let s = cli::load_scenario(&config)?;
            let r = cli::constants_report(&s.params)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&r).expect("constants serialize"));
            } else {
                print!("{}", cli::format_constants(&r));
            }
            Ok(())
        }
        Command::Validate { config } => {
            let s = cli::load_scenario(&config)?;
            for w in decohere::validate(&s.params).warnings() {
                println!("warning: {}: {}", w.field, w.message);
            }
            println!("ok");
            Ok(())
        }
    }
}
