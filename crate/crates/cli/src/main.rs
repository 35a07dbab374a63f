use clap::{Parser, Subcommand};
use nilquant_cli::{describe, load, run};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "nilquant",
    version,
    about = "Runs deformation-quantization experiments from JSON configs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for sampled checks, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment and write the JSON report and CSV table.
    Run { config: PathBuf },
    /// Print the resolved plan without computing.
    Describe { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let code = match cli.command {
        Command::Describe { config } => {
            match load(&config, cli.out.as_deref(), cli.seed).and_then(|c| describe(&c)) {
                Ok(text) => {
                    print!("{text}");
                    0
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    e.exit_code()
                }
            }
        }
        Command::Run { config } => {
            match load(&config, cli.out.as_deref(), cli.seed).and_then(|c| run(&c)) {
                Ok(outcome) => match outcome.write() {
                    Ok((json, csv)) => {
                        for f in &outcome.report.failures {
                            eprintln!("threshold: {f}");
                        }
                        println!("{}", json.display());
                        println!("{}", csv.display());
                        outcome.exit_code()
                    }
                    Err(e) => {
                        eprintln!("error: {e}");
                        e.exit_code()
                    }
                },
                Err(e) => {
                    eprintln!("error: {e}");
                    e.exit_code()
                }
            }
        }
    };
    ExitCode::from(code as u8)
}
