//! `se5nav` command-line driver.
//!
//! Outputs go to `$SE5NAV_OUTPUT_ROOT/<scenario>/<subcommand>/` (default
//! root `./out`).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use se5nav::config::ScenarioConfig;
use se5nav::observability::DEFAULT_MU_THRESHOLD;
use se5nav::scenario::{check_observability, run_scenario, sweep_agas, write_observability, write_sweep, SweepParams};
use se5nav::Error;

const OUTPUT_ROOT_VAR: &str = "SE5NAV_OUTPUT_ROOT";

const EXIT_IO: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGENCE: u8 = 3;
const EXIT_UNOBSERVABLE: u8 = 4;
const EXIT_NOT_CONVERGED: u8 = 5;

#[derive(Parser)]
#[command(name = "se5nav", version, about = "Geometric inertial navigation observer on SE5(3)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write traces and a summary.
    Run {
        config: PathBuf,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Noiseless Monte-Carlo runs from random initial errors.
    Sweep {
        config: PathBuf,
        #[arg(long, default_value_t = 100)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Largest initial attitude error in degrees.
        #[arg(long, default_value_t = 170.0)]
        max_angle_deg: f64,
        /// Simulated seconds per run (defaults to the config duration).
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Observability Gramian over a time grid.
    Obsv {
        config: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
        /// Grid spacing in seconds.
        #[arg(long, default_value_t = 5.0)]
        step: f64,
        /// Last grid time in seconds.
        #[arg(long, default_value_t = 50.0)]
        until: f64,
        #[arg(long, default_value_t = DEFAULT_MU_THRESHOLD)]
        mu: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and check a configuration without running it.
    Validate { config: PathBuf },
}

fn output_dir(explicit: Option<PathBuf>, cfg: &ScenarioConfig, sub: &str) -> PathBuf {
    explicit.unwrap_or_else(|| {
        let root = std::env::var_os(OUTPUT_ROOT_VAR).map_or_else(|| PathBuf::from("out"), PathBuf::from);
        root.join(&cfg.name).join(sub)
    })
}

fn load(path: &Path) -> Result<ScenarioConfig, ExitCode> {
    ScenarioConfig::load(path).map_err(|e| report(&e))
}

fn report(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(match e {
        Error::Config(_) => EXIT_CONFIG,
        Error::Divergence { .. } | Error::RiccatiNotPositiveDefinite { .. } | Error::NonFinite { .. } => EXIT_DIVERGENCE,
        _ => EXIT_IO,
    })
}

fn grid(step: f64, until: f64) -> Vec<f64> {
    let n = (until / step + 1e-9).floor() as usize;
    (0..=n).map(|i| i as f64 * step).collect()
}

fn execute(command: Command) -> Result<ExitCode, ExitCode> {
    match command {
        Command::Run { config, out } => {
            let cfg = load(&config)?;
            let dir = output_dir(out, &cfg, "run");
            let summary = run_scenario(&cfg, Some(&dir)).map_err(|e| {
                if matches!(e, Error::Divergence { .. }) {
                    eprintln!("last good state written to {}", dir.join("last_good_state.json").display());
                }
                report(&e)
            })?;
            print!("{}", std::fs::read_to_string(dir.join("summary.txt")).map_err(|e| report(&e.into()))?);
            println!("output: {}", dir.display());
            log::info!("{} finished in {:.2} s", summary.name, summary.wall_clock_s);
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { config, runs, seed, max_angle_deg, duration, out } => {
            let mut cfg = load(&config)?;
            if let Some(d) = duration {
                cfg.duration = d;
            }
            let problems = cfg.problems();
            if runs == 0 || !(0.0..=180.0).contains(&max_angle_deg) || !problems.is_empty() {
                let mut list = problems;
                if runs == 0 {
                    list.push("--runs must be >= 1".into());
                }
                if !(0.0..=180.0).contains(&max_angle_deg) {
                    list.push("--max-angle-deg must be within [0, 180]".into());
                }
                return Err(report(&Error::Config(list)));
            }
            let params = SweepParams { runs, seed, max_angle: max_angle_deg.to_radians(), ..SweepParams::default() };
            let rep = sweep_agas(&cfg, &params);
            let dir = output_dir(out, &cfg, "sweep");
            write_sweep(&dir, &rep).map_err(|e| report(&e))?;
            let converged = rep.records.iter().filter(|r| r.converged).count();
            println!("converged {converged}/{runs}");
            match rep.worst_settle_time {
                Some(t) => println!("worst settle time {t:.3} s"),
                None => println!("worst settle time: not all runs settled"),
            }
            println!(
                "boundary case (angle pi about e3): converged {}, final attitude error {:.3e} rad",
                rep.boundary.converged, rep.boundary.final_attitude_error
            );
            for r in rep.records.iter().filter(|r| !r.converged) {
                println!("  run {} angle {:.4} rad did not converge{}", r.index, r.angle, r.failure.as_deref().map(|f| format!(": {f}")).unwrap_or_default());
            }
            println!("output: {}", dir.display());
            Ok(if converged == runs { ExitCode::SUCCESS } else { ExitCode::from(EXIT_NOT_CONVERGED) })
        }
        Command::Obsv { config, delta, step, until, mu, out } => {
            let cfg = load(&config)?;
            let mut problems = Vec::new();
            if !(delta > 0.0) {
                problems.push("--delta must be > 0".to_string());
            }
            if !(step > 0.0) || !(until >= 0.0) {
                problems.push("--step must be > 0 and --until >= 0".to_string());
            }
            if !problems.is_empty() {
                return Err(report(&Error::Config(problems)));
            }
            let rep = check_observability(&cfg, delta, &grid(step, until), mu);
            let dir = output_dir(out, &cfg, "obsv");
            write_observability(&dir, &rep).map_err(|e| report(&e))?;
            println!("{:>8} {:>6} {:>14} {:>5} {:>14}", "t", "delta", "mu", "pass", "pe_min_eig");
            for (i, g) in rep.gramians.iter().enumerate() {
                let pe = rep.pe.get(i).map_or_else(|| "-".to_string(), |p| format!("{:.6e}", p.min_eig));
                println!("{:>8.3} {:>6.3} {:>14.6e} {:>5} {:>14}", g.t, g.delta, g.mu, g.pass, pe);
            }
            println!("observable on grid: {}", rep.pass);
            println!("output: {}", dir.display());
            Ok(if rep.pass { ExitCode::SUCCESS } else { ExitCode::from(EXIT_UNOBSERVABLE) })
        }
        Command::Validate { config } => {
            let cfg = load(&config)?;
            let problems = cfg.problems();
            if !problems.is_empty() {
                return Err(report(&Error::Config(problems)));
            }
            println!(
                "{}: ok ({} channels, {} steps of {} s, {})",
                cfg.name,
                cfg.channels.len(),
                cfg.steps(),
                cfg.observer.dt,
                if cfg.is_noiseless() { "noiseless" } else { "noisy" }
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) | Err(code) => code,
    }
}
