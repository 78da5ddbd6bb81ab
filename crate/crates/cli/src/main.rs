use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use soliton_flow_cli::config::RunConfig;
use soliton_flow_cli::{critical, runner, sweep, worker_count, CliError};

#[derive(Parser)]
#[command(name = "soliton-flow", version, about = "Expanding Ricci soliton ODE runs, sweeps and critical points")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` config file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in model, replacing any model in the config.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to SOLITON_FLOW_WORKERS or the core count.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    no_plots: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Single run.
    Run(RunArgs),
    /// One run per point of the `sweep.*` grid.
    Sweep(RunArgs),
    /// List the stationary points of the phase system with their spectra.
    CriticalPoints {
        /// Preset name or `dims=1,2;lambdas=0,1[;epsilon=1]`.
        #[arg(long)]
        model: String,
        #[arg(long)]
        out: PathBuf,
        /// Extra random points on the unit shell.
        #[arg(long, default_value_t = 0)]
        shell_samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load(args: &RunArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_file(path, args.preset.as_deref())?,
        None => RunConfig::parse("", args.preset.as_deref())?,
    };
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    if args.no_plots {
        cfg.plots = false;
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Run(args) => {
            let cfg = load(&args)?;
            worker_count(args.workers)?;
            let o = runner::run(&cfg, &cfg.out_dir)?;
            println!(
                "{}: {} monitors failed, {} fits failed, exit {}",
                cfg.out_dir.display(),
                o.monitors_failed(),
                o.fits_failed(),
                o.exit_code
            );
            Ok(o.exit_code)
        }
        Command::Sweep(args) => {
            let cfg = load(&args)?;
            let res = sweep::sweep(&cfg, &cfg.out_dir, worker_count(args.workers)?)?;
            let failed = res.outcomes.iter().filter(|o| !matches!(o, Ok(r) if r.exit_code == 0)).count();
            println!("{} runs, {failed} failed, index at {}", res.points.len(), cfg.out_dir.join("index.csv").display());
            Ok(res.exit_code())
        }
        Command::CriticalPoints { model, out, shell_samples, seed } => {
            let m = critical::parse_model(&model)?;
            let n = critical::write(&m, shell_samples, seed, &out)?;
            println!("{n} critical points written to {}", out.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("soliton-flow: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
