//! `ewh-flex`: command-line front end of the flexibility simulator.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use ewh_flex::exec::with_threads;
use ewh_flex::run::{execute, plot_from_output, replay_manifest, Command, RunOptions};
use ewh_flex::{AreaSelection, Error, Execution, Regime};

const THREADS_ENV: &str = "EWH_FLEX_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "ewh-flex",
    version,
    about = "Demand-response flexibility of electric water heater aggregates"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// User acceptable minimum temperature of every heater class.
    MinTemp(RunArgs),
    /// Power profiles of the selected set-point regimes.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// base, max, min or all
        #[arg(long, default_value = "all")]
        regime: String,
    },
    /// Three-regime simulation and the flexibility surface.
    Flexibility(RunArgs),
    /// Charts from the `flexibility.json` of a previous run.
    Plot {
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-runs a manifest and checks every output checksum.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Area label, or `all`.
    #[arg(long, default_value = "all")]
    area: String,
    #[arg(long)]
    month: u32,
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_values_t = [15u32, 30, 45, 60])]
    windows: Vec<u32>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    plot: bool,
    #[arg(long, default_value_t = 1)]
    warmup_days: u32,
    /// Sampled days for the minimum-temperature percentiles.
    #[arg(long, default_value_t = 500_000)]
    mintemp_samples: u64,
}

impl RunArgs {
    fn options(&self) -> RunOptions {
        RunOptions {
            area: AreaSelection::parse(&self.area),
            month: self.month,
            sample_count: self.samples,
            master_seed: self.seed,
            warmup_days: self.warmup_days,
            windows: self.windows.clone(),
            mintemp_samples: self.mintemp_samples,
            plot: self.plot,
        }
    }
}

fn parse_regimes(s: &str) -> Result<Vec<Regime>, Error> {
    if s == "all" {
        return Ok(Regime::ALL.to_vec());
    }
    s.split(',').map(|r| r.trim().parse()).collect()
}

fn threads() -> anyhow::Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let n: usize = v
                .parse()
                .with_context(|| format!("{THREADS_ENV}={v} is not a thread count"))?;
            Ok(Some(n.max(1)))
        }
        Err(_) => Ok(None),
    }
}

fn run(cmd: Cmd) -> Result<(), Error> {
    let exec = Execution::default();
    match cmd {
        Cmd::MinTemp(args) => {
            let m = execute(
                &Command::MinTemp,
                &args.scenario,
                &args.options(),
                &args.out,
                exec,
            )?;
            report(&m.output_dir, m.files.len());
        }
        Cmd::Simulate { run, regime } => {
            let command = Command::Simulate {
                regimes: parse_regimes(&regime)?,
            };
            let m = execute(&command, &run.scenario, &run.options(), &run.out, exec)?;
            report(&m.output_dir, m.files.len());
        }
        Cmd::Flexibility(args) => {
            let m = execute(
                &Command::Flexibility,
                &args.scenario,
                &args.options(),
                &args.out,
                exec,
            )?;
            report(&m.output_dir, m.files.len());
        }
        Cmd::Plot { out } => {
            for p in plot_from_output(&out)? {
                println!("{}", p.display());
            }
        }
        Cmd::Replay { manifest, out } => {
            let r = replay_manifest(&manifest, &out, exec)?;
            println!(
                "checked {} files, scenario {}, {} mismatched",
                r.checked,
                if r.scenario_matches {
                    "unchanged"
                } else {
                    "CHANGED"
                },
                r.mismatched.len()
            );
            for f in &r.mismatched {
                println!("mismatch: {f}");
            }
            if !r.is_exact() {
                return Err(Error::InfeasibleScenario(
                    "replay did not reproduce the outputs".into(),
                ));
            }
        }
    }
    Ok(())
}

fn report(dir: &std::path::Path, files: usize) {
    println!("wrote {files} files and manifest.json to {}", dir.display());
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let threads = match threads() {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    match with_threads(threads, || run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
