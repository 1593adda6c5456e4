use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use heisenberg_obs::harness::{self, COMMANDS};

/// Runs one observability experiment from a TOML config.
#[derive(Debug, Parser)]
#[command(name = "heisenberg-obs", version)]
struct Cli {
    /// Experiment name, or `validate` for a dry run.
    #[arg(value_parser = command_names())]
    command: String,
    #[arg(long)]
    config: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory (default: the config's `out` key, else `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Experiment to validate against when the config has no `command` key.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(COMMANDS))]
    experiment: Option<String>,
}

fn command_names() -> clap::builder::PossibleValuesParser {
    let mut names: Vec<&'static str> = COMMANDS.to_vec();
    names.push("validate");
    clap::builder::PossibleValuesParser::new(names)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} threads: {e}");
            return ExitCode::from(4);
        }
    }
    if cli.command == "validate" {
        let report = match std::fs::read_to_string(&cli.config) {
            Ok(text) => harness::validate(cli.experiment.as_deref(), &text),
            Err(e) => harness::Validation { ok: false, command: None, diagnostics: vec![format!("cannot read config: {e}")], estimate: None },
        };
        emit(&serde_json::to_string_pretty(&report).expect("validation report serializes"));
        return ExitCode::SUCCESS;
    }
    match harness::run(Some(&cli.command), &cli.config, cli.out.as_deref()) {
        Ok(manifest) => {
            emit(&serde_json::to_string_pretty(&manifest).expect("manifest serializes"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn emit(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}
