use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use crossfuse::io::{read_config, RunConfig};
use crossfuse::pipeline::{self, RunDir};
use crossfuse::Error;

/// Overhead and ground point cloud co-registration, fusion, meshing and texturing.
#[derive(Parser)]
#[command(name = "crossfuse", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// key = value configuration file; missing keys keep their defaults
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// run directory read and written by every stage
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Generate a synthetic city with drifted ground data
    Gen,
    /// Extract overhead and ground building boundaries
    Extract,
    /// Register the ground cloud to the overhead data
    Register,
    /// Reconstruct the satellite-only and combined meshes
    Mesh,
    /// Texture the combined mesh
    Texture,
    /// Score the run directory against the synthetic truth
    Eval,
    /// Run every stage and write the report
    Pipeline,
}

fn run(cli: &Cli) -> Result<(), Error> {
    let cfg = match &cli.config {
        Some(p) => read_config(p)?,
        None => RunConfig::default(),
    };
    let dir = RunDir::new(&cli.out);
    match cli.command {
        Command::Gen => pipeline::stage_gen(&dir, &cfg, cli.seed)?,
        Command::Extract => {
            pipeline::stage_extract(&dir, &cfg)?;
        }
        Command::Register => {
            pipeline::stage_register(&dir, &cfg)?;
        }
        Command::Mesh => {
            pipeline::stage_mesh(&dir, &cfg, cli.seed)?;
        }
        Command::Texture => {
            pipeline::stage_texture(&dir, &cfg)?;
        }
        Command::Eval => {
            let report = pipeline::stage_eval(&dir, &cfg, cli.seed)?;
            pipeline::write_report(&dir, &report)?;
            print!("{}", report.to_text());
        }
        Command::Pipeline => {
            let (report, timings) = pipeline::run_pipeline(&dir, &cfg, cli.seed)?;
            print!("{}", report.to_text());
            for (stage, secs) in timings {
                eprintln!("runtime {stage:<8} {secs:8.2} s");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(64),
            };
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 3 })
        }
    }
}
