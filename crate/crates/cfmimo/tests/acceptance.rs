//! End-to-end acceptance gate.
//!
//! Each test prints one `[PASS]`/`[FAIL]` line carrying the measured
//! statistic and its pinned tolerance, then asserts. Run with
//! `cargo test --test acceptance -- --nocapture` to see every line; the
//! whole gate runs on one core in a couple of minutes.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use cfmimo::{
    compute_lsf, draw_channel, emit_csv, error_covariance_psi, flop_count, generate_layout,
    mmse_precoder, residual_covariance, robust_precoder, run_drop, run_sweep, schedule_users,
    select_aps, sum_rate, zf_precoder, DropOutcome, DropReport, ErrorStatistics,
    ExperimentConfig, PrecoderMethod, RobustSettings, SweepResult,
};
use cfmimo::evaluation::ResidualCovariance;

/// Print the per-check verdict line, then enforce it.
fn report(label: &str, pass: bool, detail: &str) {
    println!("[{}] {label}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{label}: {detail}");
}

fn complex_gaussian(rng: &mut impl Rng) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        * std::f64::consts::FRAC_1_SQRT_2
}

fn random_matrix(m: usize, n: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
    DMatrix::from_fn(m, n, |_, _| complex_gaussian(rng))
}

/// 200 seeded drops of one grid cell of the default experiment.
fn cell_drops(snr_db: f64) -> Vec<DropReport> {
    let cfg = ExperimentConfig::default();
    let point = cfg
        .grid_points()
        .into_iter()
        .find(|p| p.snr_db == snr_db && p.alpha == 0.15)
        .expect("grid cell missing from the default experiment");
    (0..200).map(|trial| run_drop(&cfg, &point, trial)).collect()
}

/// Drops at the default operating point (unit transmit power over unit
/// noise); shared by the convergence and objective checks.
fn default_cell() -> &'static [DropReport] {
    static CELL: OnceLock<Vec<DropReport>> = OnceLock::new();
    CELL.get_or_init(|| cell_drops(0.0))
}

fn robust_record(report: &DropReport) -> Option<&cfmimo::DropRecord> {
    report.outcomes.iter().find_map(|(m, o)| match (m, o) {
        (PrecoderMethod::Robust, DropOutcome::Recorded(rec)) => Some(rec),
        _ => None,
    })
}

#[test]
fn power_constraint_holds_for_every_precoder() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x01);
    let settings = RobustSettings::default();
    let mut worst = 0.0_f64;
    let mut checked = 0usize;

    while checked < 1000 {
        let n = rng.gen_range(1..=8);
        let m = n * rng.gen_range(2..=4);
        let g = random_matrix(m, n, &mut rng);
        let psi = ErrorStatistics {
            diag: DVector::from_fn(m, |_, _| rng.gen_range(0.0..2.0)),
        };
        let rho = rng.gen_range(0.5..5.0);
        let sigma = rng.gen_range(0.5..2.0);
        let budget = rng.gen_range(0.5..3.0);

        let outputs = [
            zf_precoder(&g, budget).expect("zero-forcing failed"),
            mmse_precoder(&g, rho, sigma, budget).expect("regularized inverse failed"),
            robust_precoder(&g, &psi, rho, sigma, budget, &settings)
                .expect("robust design failed"),
        ];
        for out in &outputs {
            let dev = (out.matrix.norm_squared() - budget).abs() / budget;
            worst = worst.max(dev);
            checked += 1;
        }
    }

    report(
        "power constraint",
        worst < 1e-10,
        &format!("max relative deviation {worst:.3e} over {checked} outputs (tolerance 1e-10)"),
    );
}

#[test]
fn channel_moments_match_the_fading_profile() {
    let cfg = ExperimentConfig::default().system;
    let mut rng = ChaCha8Rng::seed_from_u64(0x02);
    let layout = generate_layout(&cfg, &mut rng);
    let lsf = compute_lsf(&layout, &cfg, &mut rng);
    let scheduled = schedule_users(&lsf, &cfg);
    let mask = select_aps(&lsf, &scheduled, &cfg);
    let beta_s = lsf.scheduled_columns(&scheduled);

    let draws = 100_000usize;
    let (m, n) = beta_s.shape();
    let mut est_power = DMatrix::<f64>::zeros(m, n);
    let mut err_power = DMatrix::<f64>::zeros(m, n);
    for _ in 0..draws {
        let ch = draw_channel(&lsf, &scheduled, &mask, &cfg, &mut rng);
        for j in 0..n {
            for i in 0..m {
                est_power[(i, j)] += ch.g_hat[(i, j)].norm_sqr();
                err_power[(i, j)] += ch.g_tilde[(i, j)].norm_sqr();
            }
        }
    }

    let mut worst = 0.0_f64;
    for j in 0..n {
        for i in 0..m {
            let beta = beta_s[(i, j)];
            let est = est_power[(i, j)] / draws as f64;
            let err = err_power[(i, j)] / draws as f64;
            worst = worst.max((est - (1.0 - cfg.alpha) * beta).abs() / ((1.0 - cfg.alpha) * beta));
            worst = worst.max((err - cfg.alpha * beta).abs() / (cfg.alpha * beta));
        }
    }

    report(
        "channel moments",
        worst < 0.02,
        &format!(
            "max per-entry relative error {worst:.4} over {}x{n} entries, {draws} draws (tolerance 0.02)",
            m
        ),
    );
}

#[test]
fn error_covariance_matches_its_sampling_estimate() {
    let cfg = ExperimentConfig::default().system;
    let mut rng = ChaCha8Rng::seed_from_u64(0x03);
    let layout = generate_layout(&cfg, &mut rng);
    let lsf = compute_lsf(&layout, &cfg, &mut rng);
    let scheduled = schedule_users(&lsf, &cfg);
    let mask = select_aps(&lsf, &scheduled, &cfg);
    let beta_s = lsf.scheduled_columns(&scheduled);
    let closed = error_covariance_psi(&beta_s, &mask, cfg.alpha).full_matrix();

    // Batch draws into one wide product per block: summing
    // conj(G_tilde_d) G_tilde_d^T over a block equals C R with the blocks
    // concatenated column-wise (C) and row-wise (R).
    let draws = 100_000usize;
    let batch = 100usize;
    let m = beta_s.nrows();
    let n = beta_s.ncols();
    let mut acc = DMatrix::<Complex64>::zeros(m, m);
    let mut left = DMatrix::<Complex64>::zeros(m, n * batch);
    let mut right = DMatrix::<Complex64>::zeros(n * batch, m);
    for _ in 0..draws / batch {
        for b in 0..batch {
            let ch = draw_channel(&lsf, &scheduled, &mask, &cfg, &mut rng);
            left.view_mut((0, b * n), (m, n)).copy_from(&ch.g_tilde_s.conjugate());
            right.view_mut((b * n, 0), (n, m)).copy_from(&ch.g_tilde_s.transpose());
        }
        acc += &left * &right;
    }
    let sampled = acc.map(|z| z / draws as f64);

    let rel = (&sampled - &closed).norm() / closed.norm();
    report(
        "error covariance",
        rel < 0.02,
        &format!("Frobenius relative error {rel:.4} at {draws} samples (tolerance 0.02)"),
    );
}

#[test]
fn residual_covariance_matches_its_sampling_estimate() {
    let cfg = ExperimentConfig::default().system;
    let mut rng = ChaCha8Rng::seed_from_u64(0x04);
    let layout = generate_layout(&cfg, &mut rng);
    let lsf = compute_lsf(&layout, &cfg, &mut rng);
    let scheduled = schedule_users(&lsf, &cfg);
    let mask = select_aps(&lsf, &scheduled, &cfg);
    let beta_s = lsf.scheduled_columns(&scheduled);
    let ch = draw_channel(&lsf, &scheduled, &mask, &cfg, &mut rng);
    let p = mmse_precoder(&ch.g_hat_s, cfg.rho_f, cfg.sigma_w2, cfg.power_budget)
        .expect("regularized inverse failed")
        .matrix;

    let closed =
        residual_covariance(&beta_s, &mask, cfg.alpha, &p, cfg.rho_f, cfg.sigma_w2).full_matrix();

    let draws = 100_000usize;
    let n = beta_s.ncols();
    let mut acc = DMatrix::<Complex64>::zeros(n, n);
    for _ in 0..draws {
        let fresh = draw_channel(&lsf, &scheduled, &mask, &cfg, &mut rng);
        let y = fresh.g_tilde_s.transpose() * &p;
        acc += &y * y.adjoint();
    }
    let mut sampled = acc.map(|z| z * cfg.rho_f / draws as f64);
    for k in 0..n {
        sampled[(k, k)] += Complex64::new(cfg.sigma_w2, 0.0);
    }

    let rel = (&sampled - &closed).norm() / closed.norm();
    report(
        "residual covariance",
        rel < 0.02,
        &format!("Frobenius relative error {rel:.4} at {draws} samples (tolerance 0.02)"),
    );
}

#[test]
fn rate_bound_agrees_across_determinant_and_eigenvalue_paths() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x05);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let n = rng.gen_range(1..=12);
        let m = n * rng.gen_range(2..=4);
        let g = random_matrix(m, n, &mut rng);
        let p = random_matrix(m, n, &mut rng);
        let r = ResidualCovariance {
            diag: DVector::from_fn(n, |_, _| rng.gen_range(0.5..3.0)),
        };
        let rep = sum_rate(&g, &p, rng.gen_range(0.5..10.0), &r).expect("rate evaluation failed");
        let via_eig = rep.sum_rate_from_eigenvalues();
        worst = worst.max((rep.sum_rate - via_eig).abs() / rep.sum_rate.max(1.0));
    }

    // Scalar instance where the bound collapses to log2(1 + SNR).
    let g = DMatrix::from_element(1, 1, Complex64::new(1.5, -0.25));
    let p = DMatrix::from_element(1, 1, Complex64::new(0.4, 0.8));
    let (rho, sigma_res) = (2.0, 0.75);
    let r = ResidualCovariance {
        diag: DVector::from_element(1, sigma_res),
    };
    let rep = sum_rate(&g, &p, rho, &r).expect("rate evaluation failed");
    let expected = (1.0 + rho * (g[(0, 0)] * p[(0, 0)]).norm_sqr() / sigma_res).log2();
    let scalar_err = (rep.sum_rate - expected).abs();

    report(
        "rate bound evaluation",
        worst < 1e-9 && scalar_err < 1e-12,
        &format!(
            "det-vs-eigenvalue max relative gap {worst:.3e} over 100 instances (tolerance 1e-9); \
             scalar case off by {scalar_err:.3e} (tolerance 1e-12)"
        ),
    );
}

#[test]
fn robust_output_satisfies_the_stationarity_system() {
    let reports = cell_drops(10.0);
    let mut ok = 0usize;
    let mut total = 0usize;
    for rep in &reports {
        if let Some(rec) = robust_record(rep) {
            total += 1;
            if rec.residual.expect("robust drop lacks a residual") < 1e-2 {
                ok += 1;
            }
        }
    }
    let frac = ok as f64 / total as f64;
    report(
        "stationarity residual",
        total == 200 && frac >= 0.95,
        &format!(
            "residual < 1e-2 on {ok}/{total} drops at 10 dB ({:.1}%, threshold 95%)",
            frac * 100.0
        ),
    );
}

#[test]
fn robust_converges_within_the_iteration_budget() {
    let mut ok = 0usize;
    let mut total = 0usize;
    for rep in default_cell() {
        if let Some(rec) = robust_record(rep) {
            total += 1;
            let converged = rec
                .trace
                .iter()
                .take(5)
                .any(|r| r.rel_change.is_some_and(|c| c < 1e-3));
            if converged {
                ok += 1;
            }
        }
    }
    let frac = ok as f64 / total as f64;
    report(
        "convergence speed",
        total == 200 && frac >= 0.90,
        &format!(
            "change < 1e-3 within 4 iterations on {ok}/{total} drops ({:.1}%, threshold 90%)",
            frac * 100.0
        ),
    );
}

/// Mean sum-rates of one precoder over the SNR grid, ascending.
fn rate_series(result: &SweepResult, method: PrecoderMethod) -> Vec<(f64, f64)> {
    let mut series: Vec<(f64, f64)> = result
        .rows
        .iter()
        .filter(|r| r.precoder == method)
        .map(|r| (r.snr_db, r.mean_sum_rate))
        .collect();
    series.sort_by(|a, b| a.0.total_cmp(&b.0));
    series
}

fn nondecreasing(series: &[(f64, f64)]) -> bool {
    series.windows(2).all(|w| w[1].1 >= w[0].1)
}

#[test]
fn sweep_reproduces_the_rate_ordering_shape() {
    let full = run_sweep(&ExperimentConfig::default()).expect("sweep failed");
    let zf = rate_series(&full, PrecoderMethod::Zf);
    let mmse = rate_series(&full, PrecoderMethod::Mmse);
    let robust = rate_series(&full, PrecoderMethod::Robust);

    let monotone = nondecreasing(&zf) && nondecreasing(&mmse) && nondecreasing(&robust);
    let mmse_above_zf = zf.iter().zip(&mmse).all(|(z, m)| m.1 > z.1);

    let high: Vec<(f64, f64)> = robust
        .iter()
        .zip(&mmse)
        .filter(|(r, _)| r.0 >= 10.0)
        .map(|(r, m)| (r.0, r.1 - m.1))
        .collect();
    let robust_at_least_mmse = high.iter().all(|&(_, gap)| gap >= 0.0);
    let gap_nondecreasing = high.windows(2).all(|w| w[1].1 >= w[0].1);
    let gaps: Vec<String> = high.iter().map(|(s, g)| format!("{s}:{g:+.3}")).collect();

    let smoke = run_sweep(&ExperimentConfig::smoke()).expect("smoke sweep failed");
    let smoke_monotone = [PrecoderMethod::Zf, PrecoderMethod::Mmse, PrecoderMethod::Robust]
        .iter()
        .all(|&m| nondecreasing(&rate_series(&smoke, m)));
    let smoke_ordered = rate_series(&smoke, PrecoderMethod::Zf)
        .iter()
        .zip(rate_series(&smoke, PrecoderMethod::Mmse).iter())
        .all(|(z, m)| m.1 > z.1);

    report(
        "sweep rate ordering",
        monotone
            && mmse_above_zf
            && robust_at_least_mmse
            && gap_nondecreasing
            && smoke_monotone
            && smoke_ordered,
        &format!(
            "monotone {monotone}; regularized above zero-forcing {mmse_above_zf}; \
             robust at least regularized from 10 dB {robust_at_least_mmse}; \
             gap nondecreasing {gap_nondecreasing} [{}]; \
             smoke monotone {smoke_monotone}, smoke ordered {smoke_ordered}",
            gaps.join(" ")
        ),
    );
}

#[test]
fn flop_model_ratio_and_scaling() {
    let (m, n) = (64, 16);
    let i_max = RobustSettings::default().max_iterations;
    let mmse = flop_count(PrecoderMethod::Mmse, m, n, 1);
    let robust = flop_count(PrecoderMethod::Robust, m, n, i_max);
    let ratio = robust.flops / mmse.flops;

    // Doubling either dimension must scale every method by the same
    // factor: all three share one per-pass polynomial.
    let mut scaling_consistent = true;
    for (m2, n2) in [(2 * m, n), (m, 2 * n)] {
        let factors: Vec<f64> = PrecoderMethod::ALL
            .iter()
            .map(|&method| {
                let iters = if method == PrecoderMethod::Robust { i_max } else { 1 };
                flop_count(method, m2, n2, iters).flops / flop_count(method, m, n, iters).flops
            })
            .collect();
        scaling_consistent &= factors
            .windows(2)
            .all(|w| (w[1] - w[0]).abs() / w[0] < 1e-12);
    }

    let sums_add_up = PrecoderMethod::ALL.iter().all(|&method| {
        let r = flop_count(method, m, n, i_max);
        (r.build + r.solve + r.traces - r.flops).abs() < 1e-9 * r.flops
    });

    report(
        "flop model",
        ratio > 4.0 && ratio <= 5.0 && scaling_consistent && sums_add_up,
        &format!(
            "robust/regularized ratio {ratio:.3} (required in (4, 5]); \
             scaling consistent {scaling_consistent}; breakdown sums {sums_add_up}"
        ),
    );
}

#[test]
fn robust_objective_does_not_regress_from_its_initialization() {
    let mut ok = 0usize;
    let mut total = 0usize;
    for rep in default_cell() {
        if let Some(rec) = robust_record(rep) {
            total += 1;
            let first = rec.trace.first().expect("empty trace").objective;
            let last = rec.trace.last().expect("empty trace").objective;
            if last <= first {
                ok += 1;
            }
        }
    }
    let frac = ok as f64 / total as f64;
    report(
        "objective improvement",
        total == 200 && frac >= 0.90,
        &format!(
            "final J at or below initial J on {ok}/{total} drops ({:.1}%, threshold 90%)",
            frac * 100.0
        ),
    );
}

#[test]
fn seeded_sweep_is_byte_identical_across_reruns() {
    let dir = tempfile::tempdir().expect("tempdir");
    let mut paths = Vec::new();
    for run in 0..2 {
        // Same file name both times: the manifest echoes the configured
        // output path, which must not differ between reruns.
        let subdir = dir.path().join(format!("run{run}"));
        std::fs::create_dir(&subdir).expect("create subdir");
        let cfg = ExperimentConfig::smoke();
        let result = run_sweep(&cfg).expect("smoke sweep failed");
        let out = subdir.join(&cfg.output_path);
        emit_csv(&result, &out).expect("emit failed");
        paths.push(out);
    }
    let csv_a = std::fs::read(&paths[0]).expect("read csv");
    let csv_b = std::fs::read(&paths[1]).expect("read csv");
    let man_a = std::fs::read(paths[0].with_extension("manifest")).expect("read manifest");
    let man_b = std::fs::read(paths[1].with_extension("manifest")).expect("read manifest");

    report(
        "end-to-end determinism",
        csv_a == csv_b && man_a == man_b,
        &format!(
            "csv {} bytes {}, manifest {} bytes {}",
            csv_a.len(),
            if csv_a == csv_b { "identical" } else { "differ" },
            man_a.len(),
            if man_a == man_b { "identical" } else { "differ" },
        ),
    );
}
