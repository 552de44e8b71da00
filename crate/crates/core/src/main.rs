use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use aggdef_core::harness::{self, replay_oracle, write_report, RunConfig, Verbosity, REPORT_FILES};
use aggdef_core::scenarios::PRESET_NAMES;
use aggdef_core::Result;

/// Multi-robot target defense by distributed online aggregative optimization.
#[derive(Debug, Parser)]
#[command(name = "aggdef", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a scenario and write trace, metrics and summary.
    Run(RunArgs),
    /// Recompute the dynamic regret of a finished run from its trace.
    Oracle {
        /// Run directory containing trace.csv and run.toml.
        #[arg(long)]
        trace: PathBuf,
    },
    /// Write plot-ready CSV tables for a finished run.
    Report {
        #[arg(long)]
        trace: PathBuf,
    },
    /// List the built-in presets.
    Presets,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Run configuration file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in scenario; overrides the config's scenario.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: $AGGDEF_OUT_DIR/<scenario>-seed<seed>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of iterations, overriding the scenario horizon.
    #[arg(long)]
    steps: Option<usize>,
    /// Use the filtered estimate of the current time instead of the prediction.
    #[arg(long)]
    no_prediction: bool,
    /// Skip the per-tick centralized oracle.
    #[arg(long)]
    no_oracle: bool,
    #[arg(long, value_enum)]
    verbosity: Option<VerbosityArg>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum VerbosityArg {
    Quiet,
    Standard,
    Full,
}

fn run(args: RunArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(name) = args.preset {
        cfg.preset = Some(name);
        cfg.scenario = None;
    }
    cfg.seed = args.seed.or(cfg.seed);
    cfg.out = args.out.or(cfg.out);
    cfg.horizon = args.steps.or(cfg.horizon);
    if args.no_prediction {
        cfg.flags.prediction = false;
    }
    if args.no_oracle {
        cfg.flags.oracle = false;
    }
    if let Some(v) = args.verbosity {
        cfg.verbosity = match v {
            VerbosityArg::Quiet => Verbosity::Quiet,
            VerbosityArg::Standard => Verbosity::Standard,
            VerbosityArg::Full => Verbosity::Full,
        };
    }
    let quiet = cfg.verbosity == Verbosity::Quiet;
    let (summary, out) = harness::run(&cfg)?;
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    if !quiet {
        println!(
            "{}: T={} N={} regret={:.6e} ({}) box violations={} repairs={} -> {}",
            summary.scenario,
            summary.horizon,
            summary.agents,
            summary.regret,
            summary.regret_baseline,
            summary.box_violations,
            summary.box_repairs,
            out.display()
        );
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => run(args),
        Command::Oracle { trace } => {
            let rep = replay_oracle(&trace)?;
            println!("regret {:.16e}", rep.regret);
            if let (Some(r), Some(d)) = (rep.in_run_regret, rep.max_gap_difference) {
                println!("in-run regret {r:.16e} (max per-tick difference {d:.3e})");
            }
            if rep.oracle_failures > 0 {
                eprintln!("warning: oracle hit its iteration cap on {} ticks", rep.oracle_failures);
            }
            Ok(())
        }
        Command::Report { trace } => {
            write_report(&trace)?;
            for f in REPORT_FILES {
                println!("{}", trace.join(f).display());
            }
            Ok(())
        }
        Command::Presets => {
            for name in PRESET_NAMES {
                println!("{name}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
