use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cavity_ef_cli::{presets, run, RunConfig, RunError};

#[derive(Parser)]
#[command(
    name = "cavity-ef",
    version,
    about = "Emitter-cavity dynamics and exact-factorization surfaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration file.
    Run {
        config: PathBuf,
        /// Set `section.key=value` before the file is validated.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Write here instead of the configured output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// List or print the bundled configurations.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    Emit { name: String },
}

fn execute(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::Run {
            config,
            overrides,
            output,
        } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| RunError::Config(format!("{}: {e}", config.display())))?;
            let cfg = RunConfig::from_toml_with_overrides(&text, &overrides)?;
            let summary = run(&cfg, output.as_deref())?;
            println!("wrote {}", summary.dir.display());
            if !summary.violations.is_empty() {
                return Err(RunError::Physics(summary.violations.join("; ")));
            }
            Ok(())
        }
        Command::Presets { action } => {
            match action {
                PresetAction::List => {
                    for name in presets::NAMES {
                        println!("{name}");
                    }
                }
                PresetAction::Emit { name } => {
                    let text = presets::emit(&name)
                        .ok_or_else(|| RunError::Config(format!("unknown preset `{name}`")))?;
                    print!("{text}");
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
