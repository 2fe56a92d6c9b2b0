use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qkd_core::harness::{parse_values, run_scenario, run_sweep, selftest, HarnessError, ScenarioConfig};
use qkd_core::protocol::SessionError;

/// Environment variable capping sweep parallelism.
const THREADS_ENV: &str = "QKD_SIM_THREADS";

#[derive(Parser)]
#[command(name = "qkd-sim", version, about = "QPSK BB84 with balanced homodyne detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write report.json, histogram.csv and peaks.csv.
    Run {
        /// Scenario file, or the name of a bundled scenario.
        #[arg(long)]
        config: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; defaults to the scenario's out_dir, then "out".
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Vary one scenario field and write per-point QBER and key rate to sweep.csv.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Scenario field to vary, e.g. length_km.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long)]
        values: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the quick invariant checks.
    Selftest,
}

fn exit_code(err: &HarnessError) -> u8 {
    match err {
        HarnessError::Config(_) | HarnessError::Parse(_) | HarnessError::UnknownParam(_) => 2,
        HarnessError::Session(SessionError::Config(_)) => 2,
        HarnessError::Io { .. } => 3,
        HarnessError::Session(_) => 4,
        HarnessError::Analysis(_) => 1,
    }
}

fn threads_from_env() -> Result<Option<usize>, String> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got {v:?}")),
    }
}

fn run(command: Command) -> Result<(), HarnessError> {
    match command {
        Command::Run { config, seed, out } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let out = out
                .or_else(|| cfg.out_dir.clone())
                .unwrap_or_else(|| PathBuf::from("out"));
            let result = run_scenario(&cfg, &out)?;
            let r = &result.report;
            println!(
                "pulses {}  matched {}  kept {}  key bits {}  QBER {:.6} ({} / {} sample errors)  mu_eff {:.4}",
                r.n_pulses, r.n_base_matched, r.n_kept, r.n_key_bits, r.qber_estimate, r.n_sample_errors, r.n_sample, r.mu_eff
            );
            for g in &result.peaks.groups {
                println!(
                    "  {:<17} count {:>7}  mean {:>9.4}  var {:>7.4}  weight {:.4}",
                    g.group.name(),
                    g.count,
                    g.mean,
                    g.var,
                    g.weight
                );
            }
            for f in &result.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Sweep { config, param, values, out } => {
            let threads = threads_from_env().map_err(|reason| {
                HarnessError::Config(qkd_core::ConfigError::new("QKD_SIM_THREADS", reason))
            })?;
            let cfg = ScenarioConfig::load(&config)?;
            let values = parse_values(&values);
            let (points, path) = run_sweep(&cfg, &param, &values, threads, &out)?;
            for p in &points {
                println!(
                    "{param}={:<12} QBER {:.6} (theory {:.6})  key rate {:.5}",
                    p.value, p.qber_estimate, p.theoretical_qber, p.key_rate
                );
            }
            println!("wrote {}", path.display());
        }
        Command::Selftest => unreachable!("handled in main"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Command::Selftest = cli.command {
        let checks = selftest();
        let mut failed = 0;
        for c in &checks {
            println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            failed += usize::from(!c.passed);
        }
        println!("{} of {} checks passed", checks.len() - failed, checks.len());
        return if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) };
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
