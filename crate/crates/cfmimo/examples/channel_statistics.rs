//! Verifies the channel model's second-order statistics by sampling:
//! the estimate and error entries should carry `(1 - alpha) beta` and
//! `alpha beta` of power, and the closed-form error covariance should
//! match a Monte Carlo average of the masked error channel.
//!
//! Run with `cargo run --example channel_statistics -- [draws]`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cfmimo::{
    compute_lsf, draw_channel, error_covariance_psi, generate_layout, schedule_users, select_aps,
    SystemConfig,
};

fn main() {
    let draws: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(20_000);

    let cfg = SystemConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let layout = generate_layout(&cfg, &mut rng);
    let lsf = compute_lsf(&layout, &cfg, &mut rng);
    let scheduled = schedule_users(&lsf, &cfg);
    let mask = select_aps(&lsf, &scheduled, &cfg);
    let beta_s = lsf.scheduled_columns(&scheduled);
    let (m, n) = beta_s.shape();

    println!(
        "sampling {draws} channel draws on the default {}x{} system (alpha = {})",
        m, n, cfg.alpha
    );

    let mut est_power = DMatrix::<f64>::zeros(m, n);
    let mut err_power = DMatrix::<f64>::zeros(m, n);
    let mut psi_acc = DMatrix::<Complex64>::zeros(m, m);
    for _ in 0..draws {
        let ch = draw_channel(&lsf, &scheduled, &mask, &cfg, &mut rng);
        for j in 0..n {
            for i in 0..m {
                est_power[(i, j)] += ch.g_hat[(i, j)].norm_sqr();
                err_power[(i, j)] += ch.g_tilde[(i, j)].norm_sqr();
            }
        }
        psi_acc += ch.g_tilde_s.conjugate() * ch.g_tilde_s.transpose();
    }

    let mut worst_est = 0.0_f64;
    let mut worst_err = 0.0_f64;
    for j in 0..n {
        for i in 0..m {
            let beta = beta_s[(i, j)];
            let est = est_power[(i, j)] / draws as f64;
            let err = err_power[(i, j)] / draws as f64;
            worst_est =
                worst_est.max((est - (1.0 - cfg.alpha) * beta).abs() / ((1.0 - cfg.alpha) * beta));
            worst_err = worst_err.max((err - cfg.alpha * beta).abs() / (cfg.alpha * beta));
        }
    }
    println!("worst per-entry relative error, estimate power:  {worst_est:.4}");
    println!("worst per-entry relative error, error power:     {worst_err:.4}");

    let closed = error_covariance_psi(&beta_s, &mask, cfg.alpha);
    let sampled = psi_acc.map(|z| z / draws as f64);
    let rel = (&sampled - closed.full_matrix()).norm() / closed.full_matrix().norm();
    println!("error covariance, Frobenius relative gap:        {rel:.4}");

    let diag = &closed.diag;
    let max = diag.max();
    let inert = diag.iter().filter(|&&d| d == 0.0).count();
    println!(
        "\nclosed-form error covariance diagonal: max {max:.4e}, {inert} inert antennas \
         (no scheduled UE in their serving sets)"
    );
}
