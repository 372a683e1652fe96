//! Seeded Monte Carlo experiment driver.
//!
//! A sweep iterates a grid of (SNR, alpha) cells; each cell runs
//! `n_drops` independent drops, and each drop rebuilds the network from
//! scratch (new UE positions, new shadowing, new fading), designs every
//! configured precoder on the same channel, and evaluates the sum-rate
//! bound with the closed-form residual covariance.
//!
//! Determinism contract: `(config, master_seed)` fixes every output byte.
//! Each (grid point, trial) pair gets its own disjoint ChaCha substream,
//! so trials can run on any number of worker threads; results are reduced
//! in trial order afterwards. Precoder failures inside a drop are recorded
//! as skipped entries with a reason, never aborts, and the per-cell
//! recorded + skipped counts always add up to `n_drops` (they land in the
//! run manifest).
//!
//! Output is a CSV with the fixed header
//! `snr_db,alpha,precoder,mean_sum_rate,std_err,mean_iterations,flops`
//! plus a sibling `.manifest` key=value file carrying the config echo, the
//! master seed, the code version, and the per-cell drop accounting.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::CfError;
use crate::evaluation::{flop_count, residual_covariance, sum_rate};
use crate::network::{
    compute_lsf, draw_channel, generate_layout, schedule_users, select_aps, SystemConfig,
};
use crate::precoding::{
    error_covariance_psi, mmse_precoder, robust_precoder, stationarity_residual, zf_precoder,
    IterationRecord, PrecoderMethod, RobustSettings,
};
use crate::Result;

/// Full description of one sweep experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    /// SNR grid in dB; `rho_f = sigma_w2 * 10^(snr/10)` per cell.
    pub snr_grid_db: Vec<f64>,
    /// CSI-imperfection grid; overrides `system.alpha` per cell.
    pub alpha_grid: Vec<f64>,
    /// Monte Carlo drops per grid cell.
    pub n_drops: usize,
    /// Which precoders to run, in output order.
    pub precoders: Vec<PrecoderMethod>,
    pub robust: RobustSettings,
    /// CSV destination; the manifest lands next to it.
    pub output_path: PathBuf,
    /// Root seed for all substreams.
    pub master_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            system: SystemConfig::default(),
            snr_grid_db: (0..=10).map(|i| 2.0 * i as f64).collect(),
            alpha_grid: vec![0.15],
            n_drops: 200,
            precoders: PrecoderMethod::ALL.to_vec(),
            robust: RobustSettings::default(),
            output_path: PathBuf::from("sweep.csv"),
            master_seed: 42,
        }
    }
}

impl ExperimentConfig {
    /// Reduced configuration for fast end-to-end checks: a 4-AP network
    /// with 50 drops per cell.
    pub fn smoke() -> Self {
        ExperimentConfig {
            system: SystemConfig {
                num_aps: 4,
                antennas_per_ap: 2,
                num_ues: 16,
                scheduled_ues: 4,
                // Same AP density as the full network (one AP per hectare).
                area_side_m: 200.0,
                ..SystemConfig::default()
            },
            n_drops: 50,
            output_path: PathBuf::from("smoke.csv"),
            ..ExperimentConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.robust.validate()?;
        if self.n_drops == 0 {
            return Err(CfError::config("n_drops must be at least 1"));
        }
        if self.n_drops > u32::MAX as usize {
            return Err(CfError::config("n_drops exceeds the substream budget"));
        }
        if self.snr_grid_db.is_empty() || self.alpha_grid.is_empty() {
            return Err(CfError::config("SNR and alpha grids must be nonempty"));
        }
        if self.snr_grid_db.len() > u16::MAX as usize || self.alpha_grid.len() > u16::MAX as usize
        {
            return Err(CfError::config("grid too large for the substream budget"));
        }
        if self.snr_grid_db.iter().any(|v| !v.is_finite()) {
            return Err(CfError::config("SNR values must be finite"));
        }
        if self.alpha_grid.iter().any(|&a| !(0.0..=1.0).contains(&a)) {
            return Err(CfError::config("alpha grid values must lie in [0, 1]"));
        }
        if self.precoders.is_empty() {
            return Err(CfError::config("select at least one precoder"));
        }
        Ok(())
    }

    /// All grid points in output order (alpha major, SNR minor).
    pub fn grid_points(&self) -> Vec<GridPoint> {
        let mut points = Vec::new();
        for (ai, &alpha) in self.alpha_grid.iter().enumerate() {
            for (si, &snr_db) in self.snr_grid_db.iter().enumerate() {
                points.push(GridPoint {
                    snr_db,
                    alpha,
                    snr_index: si,
                    alpha_index: ai,
                });
            }
        }
        points
    }
}

/// One cell of the sweep grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub snr_db: f64,
    pub alpha: f64,
    pub snr_index: usize,
    pub alpha_index: usize,
}

/// Disjoint substream id: alpha index, SNR index, and trial packed into
/// non-overlapping bit ranges.
fn substream_id(alpha_index: usize, snr_index: usize, trial: usize) -> u64 {
    debug_assert!(alpha_index <= u16::MAX as usize);
    debug_assert!(snr_index <= u16::MAX as usize);
    debug_assert!(trial <= u32::MAX as usize);
    ((alpha_index as u64) << 48) | ((snr_index as u64) << 32) | trial as u64
}

/// Result of one precoder on one drop.
#[derive(Debug, Clone, PartialEq)]
pub struct DropRecord {
    /// Sum-rate bound in bits/s/Hz.
    pub sum_rate: f64,
    /// Fixed-point iterations run (0 for the baselines).
    pub iterations: usize,
    pub gain: f64,
    pub lambda: f64,
    /// Stationarity residual of the final iterate; robust only.
    pub residual: Option<f64>,
    /// Per-iteration diagnostics; empty for the baselines.
    pub trace: Vec<IterationRecord>,
}

/// Either a record or the reason the precoder was skipped.
#[derive(Debug, Clone, PartialEq)]
pub enum DropOutcome {
    Recorded(DropRecord),
    Skipped(String),
}

/// Everything one drop produced, per configured precoder.
#[derive(Debug, Clone, PartialEq)]
pub struct DropReport {
    pub point: GridPoint,
    pub trial: usize,
    /// UE indices scheduled this drop, ascending.
    pub scheduled_ues: Vec<usize>,
    /// Active entries of the antenna/UE association mask.
    pub active_pairs: usize,
    /// Distance clamps the fading computation applied (diagnostic).
    pub clamped_pairs: usize,
    pub outcomes: Vec<(PrecoderMethod, DropOutcome)>,
}

/// One CSV row of an aggregated sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub snr_db: f64,
    pub alpha: f64,
    pub precoder: PrecoderMethod,
    pub mean_sum_rate: f64,
    pub std_err: f64,
    pub mean_iterations: f64,
    pub flops: f64,
}

/// Drop accounting for one (cell, precoder) pair; lives in the manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct CellCount {
    pub snr_db: f64,
    pub alpha: f64,
    pub precoder: PrecoderMethod,
    pub recorded: usize,
    pub skipped: usize,
}

/// Aggregated sweep output.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub cells: Vec<CellCount>,
    /// Rendered manifest text (config echo, seed, version, cell counts).
    pub manifest: String,
}

/// Run one drop: rebuild the network under the cell's (SNR, alpha), run
/// every configured precoder on the same channel, and evaluate rates.
///
/// The drop's RNG substream is derived from `(master_seed, grid point,
/// trial)`, so identical arguments reproduce identical results bit for
/// bit. Precoder failures become [`DropOutcome::Skipped`] entries.
pub fn run_drop(cfg: &ExperimentConfig, point: &GridPoint, trial: usize) -> DropReport {
    let mut sys = cfg.system.clone();
    sys.alpha = point.alpha;
    sys.rho_f = sys.sigma_w2 * 10f64.powf(point.snr_db / 10.0);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.master_seed);
    rng.set_stream(substream_id(point.alpha_index, point.snr_index, trial));

    let layout = generate_layout(&sys, &mut rng);
    let lsf = compute_lsf(&layout, &sys, &mut rng);
    let sched = schedule_users(&lsf, &sys);
    let mask = select_aps(&lsf, &sched, &sys);
    let beta_s = lsf.scheduled_columns(&sched);
    let ch = draw_channel(&lsf, &sched, &mask, &sys, &mut rng);
    let psi = error_covariance_psi(&beta_s, &mask, sys.alpha);

    let outcomes = cfg
        .precoders
        .iter()
        .map(|&method| {
            let designed = match method {
                PrecoderMethod::Zf => zf_precoder(&ch.g_hat_s, sys.power_budget),
                PrecoderMethod::Mmse => {
                    mmse_precoder(&ch.g_hat_s, sys.rho_f, sys.sigma_w2, sys.power_budget)
                }
                PrecoderMethod::Robust => robust_precoder(
                    &ch.g_hat_s,
                    &psi,
                    sys.rho_f,
                    sys.sigma_w2,
                    sys.power_budget,
                    &cfg.robust,
                ),
            };
            let outcome = designed.and_then(|out| {
                let r_tilde = residual_covariance(
                    &beta_s, &mask, sys.alpha, &out.matrix, sys.rho_f, sys.sigma_w2,
                );
                let rate = sum_rate(&ch.g_hat_s, &out.matrix, sys.rho_f, &r_tilde)?;
                let residual = (method == PrecoderMethod::Robust)
                    .then(|| stationarity_residual(&out, &ch.g_hat_s, &psi, sys.rho_f));
                Ok(DropRecord {
                    sum_rate: rate.sum_rate,
                    iterations: out.iterations,
                    gain: out.gain,
                    lambda: out.lambda,
                    residual,
                    trace: out.trace,
                })
            });
            let outcome = match outcome {
                Ok(rec) => DropOutcome::Recorded(rec),
                Err(e) => DropOutcome::Skipped(e.to_string()),
            };
            (method, outcome)
        })
        .collect();

    DropReport {
        point: *point,
        trial,
        scheduled_ues: sched,
        active_pairs: mask.iter().filter(|&&b| b).count(),
        clamped_pairs: lsf.clamped_pairs,
        outcomes,
    }
}

/// Run the full grid, `n_drops` per cell, and aggregate.
///
/// Trials fan out across the rayon pool; aggregation walks them in trial
/// order, so the result is independent of the worker count. Nothing is
/// written to disk here — see [`emit_csv`].
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let m = cfg.system.total_antennas();
    let n = cfg.system.scheduled_ues;

    let mut rows = Vec::new();
    let mut cells = Vec::new();
    for point in cfg.grid_points() {
        let reports: Vec<DropReport> = (0..cfg.n_drops)
            .into_par_iter()
            .map(|trial| run_drop(cfg, &point, trial))
            .collect();

        for (pi, &method) in cfg.precoders.iter().enumerate() {
            let mut rates = Vec::with_capacity(cfg.n_drops);
            let mut iter_sum = 0usize;
            let mut skipped = 0usize;
            for report in &reports {
                debug_assert_eq!(report.outcomes[pi].0, method);
                match &report.outcomes[pi].1 {
                    DropOutcome::Recorded(rec) => {
                        rates.push(rec.sum_rate);
                        iter_sum += rec.iterations;
                    }
                    DropOutcome::Skipped(_) => skipped += 1,
                }
            }
            let recorded = rates.len();
            let (mean, std_err) = mean_and_std_err(&rates);
            let mean_iterations = if recorded > 0 {
                iter_sum as f64 / recorded as f64
            } else {
                0.0
            };
            let flops = flop_count(method, m, n, cfg.robust.max_iterations).flops;
            rows.push(SweepRow {
                snr_db: point.snr_db,
                alpha: point.alpha,
                precoder: method,
                mean_sum_rate: mean,
                std_err,
                mean_iterations,
                flops,
            });
            cells.push(CellCount {
                snr_db: point.snr_db,
                alpha: point.alpha,
                precoder: method,
                recorded,
                skipped,
            });
        }
    }

    let manifest = render_manifest(cfg, &cells);
    Ok(SweepResult {
        rows,
        cells,
        manifest,
    })
}

/// Sample mean and standard error (0 for fewer than two samples).
fn mean_and_std_err(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Decimal float formatting with 17 significant digits: enough for exact
/// `f64` round-trips, never scientific notation, byte-stable across runs.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    let frac_digits = (16 - exp).max(0) as usize;
    format!("{v:.frac_digits$}")
}

fn join_f64<'a>(vals: impl IntoIterator<Item = &'a f64>) -> String {
    vals.into_iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn render_manifest(cfg: &ExperimentConfig, cells: &[CellCount]) -> String {
    let mut out = String::new();
    let sys = &cfg.system;
    let _ = writeln!(out, "version={}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "master_seed={}", cfg.master_seed);
    let _ = writeln!(out, "system.L={}", sys.num_aps);
    let _ = writeln!(out, "system.N={}", sys.antennas_per_ap);
    let _ = writeln!(out, "system.K={}", sys.num_ues);
    let _ = writeln!(out, "system.n={}", sys.scheduled_ues);
    let _ = writeln!(out, "system.area_side_m={}", sys.area_side_m);
    let _ = writeln!(out, "system.alpha={}", sys.alpha);
    let _ = writeln!(out, "system.rho_f={}", sys.rho_f);
    let _ = writeln!(out, "system.sigma_w2={}", sys.sigma_w2);
    let _ = writeln!(out, "system.power_budget={}", sys.power_budget);
    let _ = writeln!(out, "system.ap_selection_delta={}", sys.ap_selection_delta);
    let _ = writeln!(out, "system.random_ap_placement={}", sys.random_ap_placement);
    let _ = writeln!(out, "system.rng_seed={}", sys.rng_seed);
    let _ = writeln!(out, "system.pathloss.d0_m={}", sys.pathloss.d0_m);
    let _ = writeln!(out, "system.pathloss.d1_m={}", sys.pathloss.d1_m);
    let _ = writeln!(out, "system.pathloss.l0_db={}", sys.pathloss.l0_db);
    let _ = writeln!(
        out,
        "system.pathloss.shadow_sigma_db={}",
        sys.pathloss.shadow_sigma_db
    );
    let _ = writeln!(out, "system.pathloss.lsf_norm_db={}", sys.pathloss.lsf_norm_db);
    let _ = writeln!(out, "snr_grid_db={}", join_f64(&cfg.snr_grid_db));
    let _ = writeln!(out, "alpha_grid={}", join_f64(&cfg.alpha_grid));
    let _ = writeln!(out, "n_drops={}", cfg.n_drops);
    let _ = writeln!(
        out,
        "precoders={}",
        cfg.precoders
            .iter()
            .map(|p| p.name())
            .collect::<Vec<_>>()
            .join(",")
    );
    let _ = writeln!(out, "robust.max_iterations={}", cfg.robust.max_iterations);
    let _ = writeln!(out, "robust.epsilon={}", cfg.robust.epsilon);
    let _ = writeln!(out, "robust.jitter_scale={}", cfg.robust.jitter_scale);
    let _ = writeln!(out, "output_path={}", cfg.output_path.display());
    for (i, c) in cells.iter().enumerate() {
        let _ = writeln!(out, "cell.{i}.snr_db={}", c.snr_db);
        let _ = writeln!(out, "cell.{i}.alpha={}", c.alpha);
        let _ = writeln!(out, "cell.{i}.precoder={}", c.precoder);
        let _ = writeln!(out, "cell.{i}.recorded={}", c.recorded);
        let _ = writeln!(out, "cell.{i}.skipped={}", c.skipped);
    }
    out
}

/// CSV header, fixed.
pub const CSV_HEADER: &str = "snr_db,alpha,precoder,mean_sum_rate,std_err,mean_iterations,flops";

/// Render the CSV body (UTF-8, LF endings).
pub fn render_csv(result: &SweepResult) -> String {
    let mut out = String::with_capacity(64 * (result.rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &result.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_f64(r.snr_db),
            fmt_f64(r.alpha),
            r.precoder,
            fmt_f64(r.mean_sum_rate),
            fmt_f64(r.std_err),
            fmt_f64(r.mean_iterations),
            fmt_f64(r.flops),
        );
    }
    out
}

/// Write the CSV to `path` and the manifest to the sibling
/// `path.with_extension("manifest")`.
pub fn emit_csv(result: &SweepResult, path: &Path) -> Result<()> {
    std::fs::write(path, render_csv(result)).map_err(|e| CfError::io(path, e))?;
    let manifest_path = path.with_extension("manifest");
    std::fs::write(&manifest_path, &result.manifest)
        .map_err(|e| CfError::io(manifest_path.clone(), e))?;
    Ok(())
}

/// Parse a CSV produced by [`emit_csv`] back into rows. Exact inverse of
/// the emitter (`fmt_f64` strings parse to the identical `f64`).
pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => {
            return Err(CfError::config(format!(
                "unexpected CSV header: {other:?}"
            )))
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(CfError::config(format!(
                "CSV line {}: expected 7 fields, got {}",
                i + 2,
                fields.len()
            )));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| CfError::config(format!("CSV line {}: {e}", i + 2)))
        };
        rows.push(SweepRow {
            snr_db: num(fields[0])?,
            alpha: num(fields[1])?,
            precoder: fields[2].parse()?,
            mean_sum_rate: num(fields[3])?,
            std_err: num(fields[4])?,
            mean_iterations: num(fields[5])?,
            flops: num(fields[6])?,
        });
    }
    Ok(rows)
}

/// Parse the flat `key=value` config format.
///
/// Lines are `key=value`; `#` starts a comment; blank lines are ignored.
/// Keys mirror the config field paths (`system.L=16`, `robust.epsilon=1e-3`,
/// `snr_grid_db=0,2,4`); unknown keys are errors. Values omitted keep
/// their defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CfError::config(format!("line {}: expected key=value", lineno + 1))
        })?;
        apply_config_entry(&mut cfg, key.trim(), value.trim())
            .map_err(|e| CfError::config(format!("line {}: {e}", lineno + 1)))?;
    }
    Ok(cfg)
}

/// Set one config entry by key path. Shared by the file parser and the
/// CLI `--set` overrides.
pub fn apply_config_entry(
    cfg: &mut ExperimentConfig,
    key: &str,
    value: &str,
) -> std::result::Result<(), String> {
    fn num<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String>
    where
        T::Err: std::fmt::Display,
    {
        value
            .parse::<T>()
            .map_err(|e| format!("bad value for {key}: {e}"))
    }
    fn list(key: &str, value: &str) -> std::result::Result<Vec<f64>, String> {
        value
            .split(',')
            .map(|v| num::<f64>(key, v.trim()))
            .collect()
    }

    let sys = &mut cfg.system;
    match key {
        "system.L" | "system.num_aps" => sys.num_aps = num(key, value)?,
        "system.N" | "system.antennas_per_ap" => sys.antennas_per_ap = num(key, value)?,
        "system.K" | "system.num_ues" => sys.num_ues = num(key, value)?,
        "system.n" | "system.scheduled_ues" => sys.scheduled_ues = num(key, value)?,
        "system.area_side_m" => sys.area_side_m = num(key, value)?,
        "system.alpha" => sys.alpha = num(key, value)?,
        "system.rho_f" => sys.rho_f = num(key, value)?,
        "system.sigma_w2" => sys.sigma_w2 = num(key, value)?,
        "system.power_budget" => sys.power_budget = num(key, value)?,
        "system.ap_selection_delta" => sys.ap_selection_delta = num(key, value)?,
        "system.random_ap_placement" => sys.random_ap_placement = num(key, value)?,
        "system.rng_seed" => sys.rng_seed = num(key, value)?,
        "system.pathloss.d0_m" => sys.pathloss.d0_m = num(key, value)?,
        "system.pathloss.d1_m" => sys.pathloss.d1_m = num(key, value)?,
        "system.pathloss.l0_db" => sys.pathloss.l0_db = num(key, value)?,
        "system.pathloss.shadow_sigma_db" => sys.pathloss.shadow_sigma_db = num(key, value)?,
        "system.pathloss.lsf_norm_db" => sys.pathloss.lsf_norm_db = num(key, value)?,
        "snr_grid_db" => cfg.snr_grid_db = list(key, value)?,
        "alpha_grid" => cfg.alpha_grid = list(key, value)?,
        "n_drops" => cfg.n_drops = num(key, value)?,
        "precoders" => {
            cfg.precoders = value
                .split(',')
                .map(|p| p.trim().parse::<PrecoderMethod>().map_err(|e| e.to_string()))
                .collect::<std::result::Result<_, _>>()?;
        }
        "robust.max_iterations" | "robust.i_max" => {
            cfg.robust.max_iterations = num(key, value)?
        }
        "robust.epsilon" => cfg.robust.epsilon = num(key, value)?,
        "robust.jitter_scale" => cfg.robust.jitter_scale = num(key, value)?,
        "output_path" => cfg.output_path = PathBuf::from(value),
        "master_seed" => cfg.master_seed = num(key, value)?,
        other => return Err(format!("unknown config key '{other}'")),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn micro_cfg() -> ExperimentConfig {
        ExperimentConfig {
            system: SystemConfig {
                num_aps: 2,
                antennas_per_ap: 2,
                num_ues: 6,
                scheduled_ues: 2,
                ..SystemConfig::default()
            },
            snr_grid_db: vec![0.0, 10.0],
            alpha_grid: vec![0.15],
            n_drops: 3,
            output_path: PathBuf::from("micro.csv"),
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn minimal_sweep_has_one_row_per_precoder() {
        let mut cfg = micro_cfg();
        cfg.snr_grid_db = vec![5.0];
        cfg.n_drops = 1;
        let result = run_sweep(&cfg).unwrap();
        assert_eq!(result.rows.len(), 3);
        assert_eq!(result.cells.len(), 3);
        for c in &result.cells {
            assert_eq!(c.recorded + c.skipped, 1);
        }
    }

    #[test]
    fn precoder_filter_limits_the_outcomes() {
        let mut cfg = micro_cfg();
        cfg.precoders = vec![PrecoderMethod::Zf];
        let point = cfg.grid_points()[0];
        let report = run_drop(&cfg, &point, 0);
        assert_eq!(report.outcomes.len(), 1);
        assert_eq!(report.outcomes[0].0, PrecoderMethod::Zf);
    }

    #[test]
    fn identical_drop_arguments_reproduce_identical_results() {
        let cfg = micro_cfg();
        let point = cfg.grid_points()[1];
        let a = run_drop(&cfg, &point, 7);
        let b = run_drop(&cfg, &point, 7);
        assert_eq!(a, b);
    }

    #[test]
    fn sweep_means_match_recomputed_drops() {
        let cfg = micro_cfg();
        let result = run_sweep(&cfg).unwrap();
        for point in cfg.grid_points() {
            for (pi, &method) in cfg.precoders.iter().enumerate() {
                let mut rates = Vec::new();
                for trial in 0..cfg.n_drops {
                    let rep = run_drop(&cfg, &point, trial);
                    if let DropOutcome::Recorded(rec) = &rep.outcomes[pi].1 {
                        rates.push(rec.sum_rate);
                    }
                }
                let want = rates.iter().sum::<f64>() / rates.len() as f64;
                let row = result
                    .rows
                    .iter()
                    .find(|r| {
                        r.snr_db == point.snr_db && r.alpha == point.alpha && r.precoder == method
                    })
                    .unwrap();
                assert_eq!(row.mean_sum_rate, want);
            }
        }
    }

    #[test]
    fn substreams_are_disjoint() {
        let mut seen = std::collections::HashSet::new();
        for a in 0..3 {
            for s in 0..4 {
                for t in 0..5 {
                    assert!(seen.insert(substream_id(a, s, t)));
                }
            }
        }
    }

    #[test]
    fn csv_round_trips_exactly() {
        let rows = vec![
            SweepRow {
                snr_db: 0.0,
                alpha: 0.15,
                precoder: PrecoderMethod::Zf,
                mean_sum_rate: 1.0 / 3.0,
                std_err: 1.234567890123456e-5,
                mean_iterations: 0.0,
                flops: 529066.6666666666,
            },
            SweepRow {
                snr_db: 17.3,
                alpha: 0.0,
                precoder: PrecoderMethod::Robust,
                mean_sum_rate: 123.45678901234567,
                std_err: 0.5,
                mean_iterations: 3.75,
                flops: 2645333.333333333,
            },
        ];
        let result = SweepResult {
            rows: rows.clone(),
            cells: Vec::new(),
            manifest: String::new(),
        };
        let parsed = parse_sweep_csv(&render_csv(&result)).unwrap();
        assert_eq!(parsed, rows);
    }

    #[test]
    fn empty_result_renders_header_only() {
        let result = SweepResult {
            rows: Vec::new(),
            cells: Vec::new(),
            manifest: String::new(),
        };
        assert_eq!(render_csv(&result), format!("{CSV_HEADER}\n"));
        assert_eq!(parse_sweep_csv(&render_csv(&result)).unwrap(), Vec::new());
    }

    #[test]
    fn formatted_floats_parse_back_identically() {
        for v in [
            0.0,
            0.15,
            1.0 / 3.0,
            -2.5e-13,
            123456789.123456789,
            5.0,
            1e20,
            f64::MIN_POSITIVE,
        ] {
            let s = fmt_f64(v);
            assert!(!s.contains('e') && !s.contains('E'), "{s} not decimal");
            assert_eq!(s.parse::<f64>().unwrap(), v, "round-trip of {v} via {s}");
        }
    }

    #[test]
    fn sweep_output_is_byte_identical_across_runs() {
        let cfg = micro_cfg();
        let a = run_sweep(&cfg).unwrap();
        let b = run_sweep(&cfg).unwrap();
        assert_eq!(render_csv(&a), render_csv(&b));
        assert_eq!(a.manifest, b.manifest);
    }

    #[test]
    fn config_parsing_round_trips_the_documented_keys() {
        let text = "\
# experiment
system.L=4
system.N=2
system.K=16
system.n=4          # scheduled
system.alpha=0.3
system.pathloss.lsf_norm_db=120
snr_grid_db=0,5,10
alpha_grid=0,0.15
n_drops=7
precoders=zf,robust
robust.i_max=6
robust.epsilon=1e-4
output_path=out/run.csv
master_seed=99
";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.system.num_aps, 4);
        assert_eq!(cfg.system.antennas_per_ap, 2);
        assert_eq!(cfg.system.num_ues, 16);
        assert_eq!(cfg.system.scheduled_ues, 4);
        assert_eq!(cfg.system.alpha, 0.3);
        assert_eq!(cfg.system.pathloss.lsf_norm_db, 120.0);
        assert_eq!(cfg.snr_grid_db, vec![0.0, 5.0, 10.0]);
        assert_eq!(cfg.alpha_grid, vec![0.0, 0.15]);
        assert_eq!(cfg.n_drops, 7);
        assert_eq!(
            cfg.precoders,
            vec![PrecoderMethod::Zf, PrecoderMethod::Robust]
        );
        assert_eq!(cfg.robust.max_iterations, 6);
        assert_eq!(cfg.robust.epsilon, 1e-4);
        assert_eq!(cfg.output_path, PathBuf::from("out/run.csv"));
        assert_eq!(cfg.master_seed, 99);
        cfg.validate().unwrap();
    }

    #[test]
    fn config_parsing_rejects_unknown_keys_with_line_numbers() {
        let err = parse_config("system.L=4\nbogus_key=1\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "{msg}");
        assert!(msg.contains("bogus_key"), "{msg}");

        let err = parse_config("system.L=four\n").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");

        assert!(parse_config("just a line\n").is_err());
    }

    #[test]
    fn validation_catches_bad_experiment_configs() {
        let mut cfg = micro_cfg();
        cfg.n_drops = 0;
        assert!(cfg.validate().is_err());

        let mut cfg = micro_cfg();
        cfg.snr_grid_db.clear();
        assert!(cfg.validate().is_err());

        let mut cfg = micro_cfg();
        cfg.alpha_grid = vec![1.5];
        assert!(cfg.validate().is_err());

        let mut cfg = micro_cfg();
        cfg.precoders.clear();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn emitted_files_land_next_to_each_other() {
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("result.csv");
        let mut cfg = micro_cfg();
        cfg.snr_grid_db = vec![0.0];
        cfg.n_drops = 1;
        let result = run_sweep(&cfg).unwrap();
        emit_csv(&result, &csv_path).unwrap();
        assert!(csv_path.exists());
        assert!(dir.path().join("result.manifest").exists());
        let text = std::fs::read_to_string(&csv_path).unwrap();
        assert_eq!(parse_sweep_csv(&text).unwrap(), result.rows);
        let manifest = std::fs::read_to_string(dir.path().join("result.manifest")).unwrap();
        assert!(manifest.contains("master_seed=42"));
        assert!(manifest.contains("cell.0.recorded=1"));
    }
}
