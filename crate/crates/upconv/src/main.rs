//! Command-line entry point for the waveguide upconverter toolkit.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use upconv::cli::{run_command, CommandKind};
use upconv::config::load_config;

/// Model a quasi-phasematched sum-frequency waveguide converter:
/// guided modes, phasematching, tuning, and conversion dynamics.
#[derive(Parser)]
#[command(name = "upconv", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve guided modes: counts, effective indices, field maps.
    Modes(RunArgs),
    /// Phasematching summary: poling period, bandwidth, tuning slopes.
    Qpm(RunArgs),
    /// Sample the spectral phasematching curve.
    Curve(RunArgs),
    /// Sweep conversion and pump-depletion efficiencies over pump power.
    Dynamics(RunArgs),
    /// Run every stage and emit the combined report.
    Report(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the configured one).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Restrict the dynamics sweep to one loss preset
    /// (literature | estimated | lossless).
    #[arg(long)]
    loss_preset: Option<String>,
    /// Dotted-path configuration override, e.g. process.length_mm=19.2
    /// (repeatable).
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn run(kind: CommandKind, args: &RunArgs) -> upconv::Result<()> {
    let mut overrides = args.overrides.clone();
    if let Some(preset) = &args.loss_preset {
        overrides.push(format!("dynamics.loss_presets=[\"{preset}\"]"));
    }
    let config = load_config(&args.config, &overrides)?;
    let (report, report_path) = run_command(kind, config, args.out.as_deref())?;
    println!("{} -> {}", report.command, report_path.display());
    for (name, q) in &report.quantities {
        if q.unit == "1" {
            println!("  {name} = {}", q.value);
        } else {
            println!("  {name} = {} {}", q.value, q.unit);
        }
    }
    if let Some(c) = &report.counts {
        println!("  guided modes: input {}, pump {}, output {}", c.input, c.pump, c.output);
    }
    for entry in &report.files {
        println!("  wrote {} ({})", entry.path, entry.kind);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Modes(a) => (CommandKind::Modes, a),
        Command::Qpm(a) => (CommandKind::Qpm, a),
        Command::Curve(a) => (CommandKind::Curve, a),
        Command::Dynamics(a) => (CommandKind::Dynamics, a),
        Command::Report(a) => (CommandKind::Report, a),
    };
    match run(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}: {err}", kind.name());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
