//! Experiment CLI: `sweep` runs the configured Monte Carlo grid, `drop`
//! inspects a single seeded drop, `flops` prints the complexity model.
//!
//! Configuration comes from an optional flat key=value file plus repeated
//! `--set key=value` overrides (flags win). Exit codes: 0 success,
//! 1 configuration error, 2 runtime/numerical error, 3 I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use cfmimo::evaluation::flop_count;
use cfmimo::sim::{apply_config_entry, parse_config, DropOutcome};
use cfmimo::{emit_csv, run_drop, run_sweep, CfError, ExperimentConfig, GridPoint, PrecoderMethod};

/// Environment variable that redirects all output files into a directory.
const OUTPUT_DIR_ENV: &str = "CFMIMO_OUTPUT_DIR";

#[derive(Parser)]
#[command(name = "cfmimo", version, about = "Cell-free massive MIMO downlink experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat key=value config file (defaults apply when omitted).
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override any config key, e.g. --set system.L=8 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Master seed override.
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full SNR/alpha sweep and write CSV plus manifest.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output CSV path override.
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
        /// Drops per grid cell override.
        #[arg(long, value_name = "N")]
        drops: Option<usize>,
    },
    /// Run one seeded drop and print verbose diagnostics.
    Drop {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// SNR in dB (default: first grid entry).
        #[arg(long, value_name = "DB")]
        snr_db: Option<f64>,
        /// CSI imperfection (default: first grid entry).
        #[arg(long, value_name = "ALPHA")]
        alpha: Option<f64>,
        /// Trial index inside the cell's substream.
        #[arg(long, default_value_t = 0, value_name = "T")]
        trial: usize,
    },
    /// Print the analytic flop model for the configured dimensions.
    Flops {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            // Bad usage is a configuration problem.
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(args: &ConfigArgs) -> Result<ExperimentConfig, CfError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CfError::io(path, e))?;
            parse_config(&text)?
        }
        None => ExperimentConfig::default(),
    };
    for set in &args.sets {
        let (key, value) = set
            .split_once('=')
            .ok_or_else(|| CfError::config(format!("--set needs key=value, got '{set}'")))?;
        apply_config_entry(&mut cfg, key.trim(), value.trim()).map_err(CfError::Config)?;
    }
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    Ok(cfg)
}

/// Apply the output-directory environment override, keeping the file name.
fn resolve_output_path(configured: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) => {
            let name = configured.file_name().unwrap_or_default();
            PathBuf::from(dir).join(name)
        }
        None => configured.to_path_buf(),
    }
}

fn run(command: Command) -> Result<(), CfError> {
    match command {
        Command::Sweep { cfg, output, drops } => {
            let mut cfg_full = load_config(&cfg)?;
            if let Some(path) = output {
                cfg_full.output_path = path;
            }
            if let Some(n) = drops {
                cfg_full.n_drops = n;
            }
            cfg_full.validate()?;

            let out_path = resolve_output_path(&cfg_full.output_path);
            if let Some(parent) = out_path.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent).map_err(|e| CfError::io(parent, e))?;
                }
            }
            let result = run_sweep(&cfg_full)?;
            emit_csv(&result, &out_path)?;
            let skipped: usize = result.cells.iter().map(|c| c.skipped).sum();
            println!(
                "wrote {} ({} rows) and {}; skipped drops: {skipped}",
                out_path.display(),
                result.rows.len(),
                out_path.with_extension("manifest").display(),
            );
            Ok(())
        }
        Command::Drop {
            cfg,
            snr_db,
            alpha,
            trial,
        } => {
            let cfg_full = load_config(&cfg)?;
            cfg_full.validate()?;
            let point = pick_grid_point(&cfg_full, snr_db, alpha);
            print_drop(&cfg_full, &point, trial);
            Ok(())
        }
        Command::Flops { cfg } => {
            let cfg_full = load_config(&cfg)?;
            cfg_full.validate()?;
            print_flops(&cfg_full);
            Ok(())
        }
    }
}

/// Build the drop's grid point: explicit values if given (reusing a grid
/// index when the value sits on the grid), otherwise the first cell.
fn pick_grid_point(cfg: &ExperimentConfig, snr_db: Option<f64>, alpha: Option<f64>) -> GridPoint {
    let snr = snr_db.unwrap_or(cfg.snr_grid_db[0]);
    let a = alpha.unwrap_or(cfg.alpha_grid[0]);
    let snr_index = cfg.snr_grid_db.iter().position(|&v| v == snr).unwrap_or(0);
    let alpha_index = cfg.alpha_grid.iter().position(|&v| v == a).unwrap_or(0);
    GridPoint {
        snr_db: snr,
        alpha: a,
        snr_index,
        alpha_index,
    }
}

fn print_drop(cfg: &ExperimentConfig, point: &GridPoint, trial: usize) {
    let report = run_drop(cfg, point, trial);
    let sys = &cfg.system;
    println!(
        "drop: SNR {} dB, alpha {}, trial {trial}, master seed {}",
        point.snr_db, point.alpha, cfg.master_seed
    );
    println!(
        "network: {} APs x {} antennas = {} antennas, {} of {} UEs scheduled",
        sys.num_aps,
        sys.antennas_per_ap,
        sys.total_antennas(),
        sys.scheduled_ues,
        sys.num_ues
    );
    println!("scheduled UEs: {:?}", report.scheduled_ues);
    println!(
        "active antenna/UE pairs: {} of {} (distance clamps: {})",
        report.active_pairs,
        sys.total_antennas() * sys.scheduled_ues,
        report.clamped_pairs
    );
    println!();
    println!("{:<8} {:>16} {:>11} {:>12} {:>12} {:>12}",
        "precoder", "sum-rate bound", "iterations", "gain h", "lambda", "residual");
    for (method, outcome) in &report.outcomes {
        match outcome {
            DropOutcome::Recorded(rec) => {
                let fmt_opt = |v: Option<f64>| match v {
                    Some(x) => format!("{x:.3e}"),
                    None => "-".to_string(),
                };
                println!(
                    "{:<8} {:>16.6} {:>11} {:>12.4e} {:>12.4e} {:>12}",
                    method.to_string(),
                    rec.sum_rate,
                    rec.iterations,
                    rec.gain,
                    rec.lambda,
                    fmt_opt(rec.residual),
                );
            }
            DropOutcome::Skipped(reason) => {
                println!("{:<8} skipped: {reason}", method.to_string());
            }
        }
    }
    for (method, outcome) in &report.outcomes {
        if let (PrecoderMethod::Robust, DropOutcome::Recorded(rec)) = (method, outcome) {
            if rec.trace.is_empty() {
                continue;
            }
            println!();
            println!("robust iteration trace (sum-rate bound metric aside, J is the design objective):");
            for (i, r) in rec.trace.iter().enumerate() {
                let change = match r.rel_change {
                    Some(c) => format!("{c:.3e}"),
                    None => "-".to_string(),
                };
                println!(
                    "  iter {i}: h {:.6e}  lambda {:+.6e}  J {:.6e}  rel change {change}{}",
                    r.gain_h,
                    r.lambda,
                    r.objective,
                    if r.jittered { "  [loaded]" } else { "" }
                );
            }
        }
    }
}

fn print_flops(cfg: &ExperimentConfig) {
    let m = cfg.system.total_antennas();
    let n = cfg.system.scheduled_ues;
    let i_max = cfg.robust.max_iterations;
    println!(
        "flop model at M = {m} antennas, n = {n} UEs (robust: {i_max} iterations + init)"
    );
    println!(
        "{:<8} {:>16} {:>16} {:>14} {:>16} {:>10}",
        "method", "build", "solve", "traces", "total", "x mmse"
    );
    let mmse_total = flop_count(PrecoderMethod::Mmse, m, n, 1).flops;
    for method in PrecoderMethod::ALL {
        let r = flop_count(method, m, n, i_max);
        println!(
            "{:<8} {:>16.1} {:>16.1} {:>14.1} {:>16.1} {:>10.3}",
            method.to_string(),
            r.build,
            r.solve,
            r.traces,
            r.flops,
            r.flops / mmse_total
        );
    }
}
