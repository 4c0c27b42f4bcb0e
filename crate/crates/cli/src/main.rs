//! `mech-wigner` command-line driver.

mod artifacts;
mod config;
mod error;
mod plotdata;
mod workflows;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use artifacts::{write_atomic, ArtifactDir};
use config::RunConfig;
use error::CliError;

pub const RESOLVED_CONFIG: &str = "resolved_config.toml";

#[derive(Parser)]
#[command(name = "mech-wigner", version, about = "Cantilever Wigner-function tomography workflows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coupling rates, matching and resonance for a device.
    Device(RunArgs),
    /// Large-intensity formula against exact two-mode evolution.
    DynamicsConvergence(RunArgs),
    /// Synthesize records, invert them and reconstruct the Wigner function.
    Tomography(RunArgs),
    /// Sequence of conditional measurements with per-step snapshots.
    Backaction(RunArgs),
    /// Convert an artifact to whitespace-separated columns.
    Plotdata {
        artifact: PathBuf,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration; all keys optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = auto); overrides the config.
    #[arg(long)]
    threads: Option<usize>,
}

fn load(args: &RunArgs) -> Result<RunConfig, CliError> {
    let (mut cfg, base) = match &args.config {
        Some(path) => (RunConfig::load(path)?, path.parent().map(Path::to_path_buf).unwrap_or_default()),
        None => (RunConfig::default(), PathBuf::from(".")),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = args.threads {
        cfg.threads = threads;
    }
    cfg.resolve(&base)
}

fn run(workflow: &str, args: &RunArgs) -> Result<(), CliError> {
    let cfg = load(args)?;
    if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("field `threads`: {e}")))?;
    }
    let mut out = ArtifactDir::create(&args.out)?;
    out.write(RESOLVED_CONFIG, cfg.to_toml().as_bytes())?;
    match workflow {
        "device" => workflows::device(&cfg, &mut out)?,
        "dynamics-convergence" => workflows::dynamics_convergence(&cfg, &mut out)?,
        "tomography" => {
            let rt = workflows::tomography(&cfg, &mut out)?;
            let verdict = if rt.within_tolerance { "within" } else { "exceeds" };
            eprintln!(
                "round trip max |ΔW| = {:.3e} ({verdict} tolerance {:.1e})",
                rt.max_abs_error, cfg.tomography.round_trip_tolerance
            );
        }
        "backaction" => workflows::backaction(&cfg, &mut out)?,
        _ => unreachable!("workflow names come from the subcommand"),
    }
    let manifest = out.finish(workflow)?;
    eprintln!("wrote {}", manifest.display());
    Ok(())
}

fn plotdata(artifact: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let text = plotdata::render(artifact)?;
    match out {
        Some(path) => write_atomic(path, text.as_bytes())?,
        None => match std::io::stdout().lock().write_all(text.as_bytes()) {
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
            other => other?,
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Device(a) => run("device", a),
        Command::DynamicsConvergence(a) => run("dynamics-convergence", a),
        Command::Tomography(a) => run("tomography", a),
        Command::Backaction(a) => run("backaction", a),
        Command::Plotdata { artifact, out } => plotdata(artifact, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
