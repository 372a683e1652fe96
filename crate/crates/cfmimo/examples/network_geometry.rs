//! Builds one network realization and prints its geometry: AP grid, the
//! scheduled users, and how large each user's serving set ends up after
//! the fading-threshold selection.
//!
//! Run with `cargo run --example network_geometry`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cfmimo::{compute_lsf, generate_layout, schedule_users, select_aps, SystemConfig};

fn main() {
    let cfg = SystemConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);

    let layout = generate_layout(&cfg, &mut rng);
    let lsf = compute_lsf(&layout, &cfg, &mut rng);
    let scheduled = schedule_users(&lsf, &cfg);
    let mask = select_aps(&lsf, &scheduled, &cfg);

    println!(
        "{} APs x {} antennas over a {:.0} m square, {} of {} UEs scheduled",
        cfg.num_aps, cfg.antennas_per_ap, cfg.area_side_m, cfg.scheduled_ues, cfg.num_ues
    );
    println!("AP anchor positions (one per array):");
    for l in 0..cfg.num_aps {
        let p = layout.ap_positions[l * cfg.antennas_per_ap];
        print!("  ({:6.1}, {:6.1})", p[0], p[1]);
        if (l + 1) % 4 == 0 {
            println!();
        }
    }

    println!("\nscheduled UEs and their serving sets (threshold {}):", cfg.ap_selection_delta);
    println!(
        "{:>4} {:>9} {:>9} {:>12} {:>13}",
        "ue", "x (m)", "y (m)", "serving APs", "sum beta"
    );
    for (j, &ue) in scheduled.iter().enumerate() {
        let pos = layout.ue_positions[ue];
        let aps = (0..cfg.num_aps)
            .filter(|&l| mask[(l * cfg.antennas_per_ap, j)])
            .count();
        let total: f64 = lsf.beta.column(ue).sum();
        println!("{ue:>4} {:>9.1} {:>9.1} {aps:>12} {total:>13.4e}", pos[0], pos[1]);
    }

    let active: usize = mask.iter().filter(|&&b| b).count();
    println!(
        "\nactive antenna/UE pairs: {active} of {} ({:.1}% dense)",
        mask.len(),
        100.0 * active as f64 / mask.len() as f64
    );
    if lsf.clamped_pairs > 0 {
        println!("distance clamps applied: {}", lsf.clamped_pairs);
    }
}
