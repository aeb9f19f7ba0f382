mod commands;
mod manifest;

use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use fmpl::error::Result;

use commands::Command;
use manifest::{digest_file, to_json, write_text, RunManifest, VERSION};

#[derive(Parser)]
#[command(
    name = "fmpl",
    version,
    about = "Gaussian graphical model structure learning by fractional marginal pseudo-likelihood"
)]
struct Cli {
    #[command(subcommand)]
    command: TopLevel,
}

#[derive(Subcommand)]
enum TopLevel {
    #[command(flatten)]
    Run(Command),
    /// Re-run the command recorded in a manifest.
    Replay {
        manifest: String,
        /// Write outputs under a different path or prefix.
        #[arg(long)]
        out: Option<String>,
    },
}

fn execute(command: &Command) -> Result<()> {
    let start = Instant::now();
    let outcome = command.run()?;
    let inputs = outcome.inputs.iter().map(|p| digest_file(p)).collect::<Result<Vec<_>>>()?;
    let manifest = RunManifest {
        version: VERSION.to_string(),
        command: command.name().to_string(),
        params: outcome.params,
        resolved: outcome.resolved,
        seed: outcome.seed,
        inputs,
        outputs: outcome.outputs,
        duration_seconds: start.elapsed().as_secs_f64(),
    };
    write_text(&outcome.manifest_path, &to_json(&manifest))
}

fn replay(path: &str, out: Option<String>) -> Result<()> {
    let manifest = RunManifest::load(path)?;
    manifest.verify_inputs()?;
    let mut command = manifest.params;
    if let Some(out) = out {
        command.set_out(out);
    }
    execute(&command)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        TopLevel::Run(command) => execute(&command),
        TopLevel::Replay { manifest, out } => replay(&manifest, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fmpl: error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
