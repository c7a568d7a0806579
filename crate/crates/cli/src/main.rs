use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use magflow_cli::error::CliError;
use magflow_cli::run::{self, RunSummary};
use magflow_cli::{acceptance, config::RunConfig, presets};

#[derive(Parser)]
#[command(name = "magflow", version, about = "Extrinsic magnetic harmonic map flow of closed loops")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML file.
    Run { config: PathBuf },
    /// Run a named preset, optionally overriding keys (`--set flow.t_end=2`).
    Preset {
        name: String,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run every config in a directory concurrently.
    Sweep { dir: PathBuf },
    /// List the preset catalog.
    ListPresets,
    /// Run the acceptance checks.
    Verify,
}

fn report(summary: &RunSummary) -> i32 {
    println!("{}: {}", summary.output_dir.display(), summary.report["status"].as_str().unwrap_or("?"));
    summary.status.exit_code()
}

fn fail(e: &CliError) -> i32 {
    eprintln!("error: {e}");
    e.exit_code()
}

fn dispatch(cli: Cli) -> i32 {
    match cli.command {
        Command::Run { config } => match RunConfig::load(&config).and_then(|c| run::execute(&c)) {
            Ok(s) => report(&s),
            Err(e) => fail(&e),
        },
        Command::Preset { name, set, output } => {
            let cfg = presets::load(&name, &set).map(|mut c| {
                if let Some(o) = output {
                    c.output_dir = o;
                }
                c
            });
            match cfg.and_then(|c| run::execute(&c)) {
                Ok(s) => report(&s),
                Err(e) => fail(&e),
            }
        }
        Command::Sweep { dir } => match run::sweep(&dir) {
            Ok(results) => {
                let mut code = 0;
                for (path, r) in results {
                    let c = match r {
                        Ok(s) => report(&s),
                        Err(e) => {
                            eprintln!("{}: {e}", path.display());
                            e.exit_code()
                        }
                    };
                    code = code.max(c);
                }
                code
            }
            Err(e) => fail(&e),
        },
        Command::ListPresets => {
            for p in presets::PRESETS {
                println!("{:<28} {}", p.name, p.summary);
            }
            0
        }
        Command::Verify => {
            let outcomes = acceptance::run_all();
            for o in &outcomes {
                println!("{o}");
            }
            if outcomes.iter().all(|o| o.passed) {
                0
            } else {
                3
            }
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(dispatch(Cli::parse()) as u8)
}
