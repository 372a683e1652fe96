//! Runs the reduced Monte Carlo sweep end to end — grid, drops,
//! aggregation, CSV, manifest — and prints the resulting rate curves.
//!
//! Run with `cargo run --release --example snr_sweep -- [out.csv]`; pass
//! a path to keep the output files.

use cfmimo::{emit_csv, run_sweep, ExperimentConfig, PrecoderMethod};

fn main() {
    let cfg = ExperimentConfig::smoke();
    println!(
        "sweeping SNR {:?} dB, alpha {:?}, {} drops per cell, seed {}",
        (cfg.snr_grid_db.first(), cfg.snr_grid_db.last()),
        cfg.alpha_grid,
        cfg.n_drops,
        cfg.master_seed
    );

    let result = run_sweep(&cfg).expect("sweep failed");

    println!("\n{:>7} {:>12} {:>12} {:>12}", "snr_db", "zf", "mmse", "robust");
    let mut snrs: Vec<f64> = result.rows.iter().map(|r| r.snr_db).collect();
    snrs.dedup();
    for snr in snrs {
        let rate = |m: PrecoderMethod| {
            result
                .rows
                .iter()
                .find(|r| r.snr_db == snr && r.precoder == m)
                .map(|r| r.mean_sum_rate)
                .unwrap_or(f64::NAN)
        };
        println!(
            "{snr:>7} {:>12.4} {:>12.4} {:>12.4}",
            rate(PrecoderMethod::Zf),
            rate(PrecoderMethod::Mmse),
            rate(PrecoderMethod::Robust)
        );
    }

    let skipped: usize = result.cells.iter().map(|c| c.skipped).sum();
    println!("\nskipped drops: {skipped}");

    if let Some(path) = std::env::args().nth(1) {
        let path = std::path::PathBuf::from(path);
        emit_csv(&result, &path).expect("write failed");
        println!(
            "wrote {} and {}",
            path.display(),
            path.with_extension("manifest").display()
        );
    } else {
        println!("pass an output path to keep the CSV and manifest");
    }
}
