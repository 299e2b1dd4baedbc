use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod artifacts;
mod commands;
mod config;
mod exit;

use artifacts::{finish, OutDir, RunInfo};
use commands::{Ctx, Outcome};
use exit::Failure;

/// Plane covers, geodesic X-ray transforms and support reconstruction.
#[derive(Parser)]
#[command(name = "planecover", version)]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the seed of randomized commands.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Multiplies every numerical acceptance tolerance.
    #[arg(long, global = true, default_value_t = 1.0)]
    tolerance_scale: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Io {
    /// JSON config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Structure of a nilpotent Lie algebra and a certified plane, if any.
    Algebra(Io),
    /// Trace one geodesic and its energy.
    Geodesic(Io),
    /// Exit times of geodesics from balls in a two-step group.
    Escape(Io),
    /// X-ray integrals along geodesics, or a sinogram on one plane.
    Xray(Io),
    /// Occupancy of the plane-hull set around a compact set.
    Khat(Io),
    /// End-to-end support verification for one scenario.
    Verify(Io),
    /// Odd profile on the product sphere whose X-ray data vanish.
    DemoNoninjective(Io),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Algebra(_) => "algebra",
            Command::Geodesic(_) => "geodesic",
            Command::Escape(_) => "escape",
            Command::Xray(_) => "xray",
            Command::Khat(_) => "khat",
            Command::Verify(_) => "verify",
            Command::DemoNoninjective(_) => "demo-noninjective",
        }
    }

    fn io(&self) -> &Io {
        match self {
            Command::Algebra(io)
            | Command::Geodesic(io)
            | Command::Escape(io)
            | Command::Xray(io)
            | Command::Khat(io)
            | Command::Verify(io)
            | Command::DemoNoninjective(io) => io,
        }
    }
}

fn run_with<T: serde::de::DeserializeOwned>(
    cli: &Cli,
    f: fn(&T, &Ctx, &mut OutDir) -> Result<Outcome, Failure>,
) -> Result<Outcome, Failure> {
    let io = cli.command.io();
    let loaded = config::load::<T>(&io.config)?;
    let ctx = Ctx { seed: cli.seed, tolerance_scale: cli.tolerance_scale, config_dir: loaded.dir.clone() };
    let mut out = OutDir::create(&io.out)?;
    let outcome = f(&loaded.value, &ctx, &mut out)?;
    let info = RunInfo {
        command: cli.command.name(),
        config_bytes: &loaded.bytes,
        seed: outcome.seed.or(cli.seed),
        threads: cli.threads,
        tolerance_scale: cli.tolerance_scale,
    };
    finish(out, &info, outcome.passed, outcome.summary.clone())?;
    Ok(outcome)
}

fn run(cli: &Cli) -> Result<Outcome, Failure> {
    if !(cli.tolerance_scale.is_finite() && cli.tolerance_scale > 0.0) {
        return Err(Failure::config("--tolerance-scale must be positive and finite"));
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::config("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::config(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Algebra(_) => run_with(cli, commands::algebra),
        Command::Geodesic(_) => run_with(cli, commands::geodesic),
        Command::Escape(_) => run_with(cli, commands::escape),
        Command::Xray(_) => run_with(cli, commands::xray),
        Command::Khat(_) => run_with(cli, commands::khat),
        Command::Verify(_) => run_with(cli, commands::verify),
        Command::DemoNoninjective(_) => run_with(cli, commands::demo_noninjective),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let name = cli.command.name();
    let out: &Path = &cli.command.io().out;
    match run(&cli) {
        Ok(o) if o.passed => {
            println!("{name}: ok: {}", o.summary);
            ExitCode::from(exit::OK as u8)
        }
        Ok(o) => {
            eprintln!("{name}: checks failed: {} (artifacts in {})", o.summary, out.display());
            ExitCode::from(exit::CHECK as u8)
        }
        Err(f) => {
            eprintln!("{name}: error: {f}");
            ExitCode::from(f.code as u8)
        }
    }
}
