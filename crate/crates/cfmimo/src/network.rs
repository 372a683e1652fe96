//! Network geometry, large-scale fading, and channel generation.
//!
//! The model is a square service area with `L` access points (APs) of `N`
//! antennas each (`M = L·N` antennas total) and `K` candidate user
//! equipments (UEs), of which `n` are scheduled per drop. Everything in
//! this module is deterministic given a [`rand::Rng`] state:
//!
//! - [`generate_layout`] places antennas and UEs,
//! - [`compute_lsf`] turns distances into large-scale fading coefficients
//!   via a three-slope path-loss law with log-normal shadowing,
//! - [`schedule_users`] picks the `n` strongest UEs,
//! - [`select_aps`] builds the user-centric AP/UE association mask,
//! - [`draw_channel`] draws the small-scale fading and splits each channel
//!   into an estimate and an error of calibrated relative power.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::CfError;

/// Three-slope distance-dependent path loss with log-normal shadowing.
///
/// Loss in dB at distance `d` (meters, clamped below at 1 m):
///
/// ```text
/// L(d) = l0 + 35 log10(d_km)                      d  > d1
///      = l0 + 15 log10(d1_km) + 20 log10(d_km)    d0 < d <= d1
///      = l0 + 15 log10(d1_km) + 20 log10(d0_km)   d <= d0
/// ```
///
/// The three branches agree at both breakpoints, so `L` is continuous.
/// Shadowing (standard deviation `shadow_sigma_db`) applies only beyond
/// `d1_m`. The fading coefficient is `beta = 10^((lsf_norm_db - L - z)/10)`:
/// `lsf_norm_db` is a fixed normalization gain that references beta to the
/// unit noise floor, so that the transmit-power grid of an experiment spans
/// the interference-relevant range.
#[derive(Debug, Clone, PartialEq)]
pub struct PathlossParams {
    /// Inner breakpoint in meters (constant loss below it).
    pub d0_m: f64,
    /// Outer breakpoint in meters (shadowing starts beyond it).
    pub d1_m: f64,
    /// Fixed loss offset in dB (for distances in km).
    pub l0_db: f64,
    /// Shadow-fading standard deviation in dB.
    pub shadow_sigma_db: f64,
    /// Normalization gain in dB applied to every coefficient.
    pub lsf_norm_db: f64,
}

impl Default for PathlossParams {
    fn default() -> Self {
        PathlossParams {
            d0_m: 10.0,
            d1_m: 50.0,
            l0_db: 140.7,
            shadow_sigma_db: 8.0,
            // Calibrated so that a 0..20 dB transmit-power grid walks the
            // default network from the noise-limited into the
            // interference-relevant regime.
            lsf_norm_db: 72.0,
        }
    }
}

impl PathlossParams {
    /// Median path loss in dB at distance `d_m` meters (no shadowing, no
    /// normalization). Exposed so tests and plots can probe the slopes.
    pub fn loss_db(&self, d_m: f64) -> f64 {
        let d_km = d_m / 1000.0;
        let d0_km = self.d0_m / 1000.0;
        let d1_km = self.d1_m / 1000.0;
        if d_m > self.d1_m {
            self.l0_db + 35.0 * d_km.log10()
        } else if d_m > self.d0_m {
            self.l0_db + 15.0 * d1_km.log10() + 20.0 * d_km.log10()
        } else {
            self.l0_db + 15.0 * d1_km.log10() + 20.0 * d0_km.log10()
        }
    }
}

/// Static description of one simulated network.
///
/// `validate` enforces the documented ranges; the generation functions
/// assume a validated config.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Number of access points `L`.
    pub num_aps: usize,
    /// Antennas per access point `N`.
    pub antennas_per_ap: usize,
    /// Number of candidate UEs `K`.
    pub num_ues: usize,
    /// Number of scheduled UEs `n` (`n <= K`, `n <= L·N`).
    pub scheduled_ues: usize,
    /// Side of the square service area in meters.
    pub area_side_m: f64,
    /// CSI imperfection: fraction of each channel's power in the
    /// estimation error, `0 <= alpha <= 1`.
    pub alpha: f64,
    /// Normalized downlink transmit power (linear).
    pub rho_f: f64,
    /// Receiver noise variance (linear).
    pub sigma_w2: f64,
    /// Total precoder power budget `P`.
    pub power_budget: f64,
    /// AP-selection threshold: an AP serves a UE when its fading
    /// coefficient is at least `delta` times the UE's best AP.
    pub ap_selection_delta: f64,
    /// Place APs uniformly at random instead of on a grid. With the
    /// default `false`, a grid is used whenever `L` is a perfect square
    /// (reproducible geometry); non-square `L` falls back to random.
    pub random_ap_placement: bool,
    /// Seed for single-drop use; sweep experiments derive per-trial
    /// streams from their own master seed instead.
    pub rng_seed: u64,
    /// Path-loss / shadowing parameters.
    pub pathloss: PathlossParams,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            num_aps: 16,
            antennas_per_ap: 4,
            num_ues: 128,
            scheduled_ues: 16,
            area_side_m: 400.0,
            alpha: 0.15,
            rho_f: 1.0,
            sigma_w2: 1.0,
            power_budget: 1.0,
            ap_selection_delta: 0.05,
            random_ap_placement: false,
            rng_seed: 42,
            pathloss: PathlossParams::default(),
        }
    }
}

impl SystemConfig {
    /// Total number of transmit antennas `M = L·N`.
    pub fn total_antennas(&self) -> usize {
        self.num_aps * self.antennas_per_ap
    }

    /// Check every documented invariant, reporting the first violation.
    pub fn validate(&self) -> Result<(), CfError> {
        if self.num_aps == 0 || self.antennas_per_ap == 0 {
            return Err(CfError::config("need at least one AP and one antenna per AP"));
        }
        if self.num_ues == 0 || self.scheduled_ues == 0 {
            return Err(CfError::config("need at least one candidate and one scheduled UE"));
        }
        if self.scheduled_ues > self.num_ues {
            return Err(CfError::config(format!(
                "cannot schedule {} of {} UEs",
                self.scheduled_ues, self.num_ues
            )));
        }
        if self.scheduled_ues > self.total_antennas() {
            return Err(CfError::config(format!(
                "scheduled UEs ({}) exceed total antennas ({})",
                self.scheduled_ues,
                self.total_antennas()
            )));
        }
        if !(self.area_side_m.is_finite() && self.area_side_m > 0.0) {
            return Err(CfError::config("area side must be positive and finite"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(CfError::config("alpha must lie in [0, 1]"));
        }
        for (name, v) in [
            ("rho_f", self.rho_f),
            ("sigma_w2", self.sigma_w2),
            ("power_budget", self.power_budget),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(CfError::config(format!("{name} must be positive and finite")));
            }
        }
        if !(self.ap_selection_delta > 0.0 && self.ap_selection_delta <= 1.0) {
            return Err(CfError::config("ap_selection_delta must lie in (0, 1]"));
        }
        let pl = &self.pathloss;
        if !(pl.d0_m > 0.0 && pl.d1_m >= pl.d0_m) {
            return Err(CfError::config("pathloss breakpoints need 0 < d0 <= d1"));
        }
        if pl.shadow_sigma_db < 0.0 {
            return Err(CfError::config("shadow sigma must be nonnegative"));
        }
        if !(pl.l0_db.is_finite() && pl.lsf_norm_db.is_finite()) {
            return Err(CfError::config("pathloss gains must be finite"));
        }
        Ok(())
    }
}

/// Antenna and UE coordinates for one drop.
///
/// `ap_positions` holds one entry per *antenna* (`M` total); the `N`
/// antennas of an AP are co-located, stored consecutively.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkLayout {
    pub ap_positions: Vec<[f64; 2]>,
    pub ue_positions: Vec<[f64; 2]>,
}

/// Large-scale fading coefficients for every antenna/UE pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LsfMatrix {
    /// `M x K` matrix of linear fading coefficients; the `N` rows of an AP
    /// are identical.
    pub beta: DMatrix<f64>,
    /// Number of (AP, UE) pairs whose distance was clamped to the 1 m
    /// floor. Informational, not an error.
    pub clamped_pairs: usize,
}

impl LsfMatrix {
    /// `M x n` submatrix holding the scheduled UEs' columns, in
    /// scheduling order.
    pub fn scheduled_columns(&self, scheduled: &[usize]) -> DMatrix<f64> {
        self.beta.select_columns(scheduled.iter())
    }
}

/// True, estimated, and error channels for the scheduled UEs, plus their
/// masked (user-centric) versions.
///
/// `g = g_hat + g_tilde` holds entrywise by construction, and each `_s`
/// matrix equals its full counterpart with inactive antenna/UE pairs
/// zeroed.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub g: DMatrix<Complex64>,
    pub g_hat: DMatrix<Complex64>,
    pub g_tilde: DMatrix<Complex64>,
    pub g_s: DMatrix<Complex64>,
    pub g_hat_s: DMatrix<Complex64>,
    pub g_tilde_s: DMatrix<Complex64>,
    /// `M x n` antenna/UE activity mask.
    pub mask: DMatrix<bool>,
    /// Scheduled UE indices (ascending), one per column.
    pub scheduled_ues: Vec<usize>,
}

/// Zero out the entries of `mat` where `mask` is false.
pub fn apply_mask(mat: &DMatrix<Complex64>, mask: &DMatrix<bool>) -> DMatrix<Complex64> {
    assert_eq!(mat.shape(), mask.shape(), "mask shape mismatch");
    DMatrix::from_fn(mat.nrows(), mat.ncols(), |i, j| {
        if mask[(i, j)] {
            mat[(i, j)]
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Place `M` antennas and `K` UEs inside the service area.
///
/// APs go on a uniform `sqrt(L) x sqrt(L)` grid (cell centers) when `L` is
/// a perfect square and random placement is not requested; otherwise each
/// AP site is uniform over the area. UEs are always uniform. All `N`
/// antennas of an AP share its site.
pub fn generate_layout(cfg: &SystemConfig, rng: &mut impl Rng) -> NetworkLayout {
    let l = cfg.num_aps;
    let n_ant = cfg.antennas_per_ap;
    let side = cfg.area_side_m;

    let grid_dim = (l as f64).sqrt().round() as usize;
    let is_square = grid_dim * grid_dim == l;

    let mut sites = Vec::with_capacity(l);
    if is_square && !cfg.random_ap_placement {
        let cell = side / grid_dim as f64;
        for j in 0..grid_dim {
            for i in 0..grid_dim {
                sites.push([(i as f64 + 0.5) * cell, (j as f64 + 0.5) * cell]);
            }
        }
    } else {
        for _ in 0..l {
            sites.push([rng.gen::<f64>() * side, rng.gen::<f64>() * side]);
        }
    }

    let mut ap_positions = Vec::with_capacity(l * n_ant);
    for site in &sites {
        for _ in 0..n_ant {
            ap_positions.push(*site);
        }
    }

    let ue_positions = (0..cfg.num_ues)
        .map(|_| [rng.gen::<f64>() * side, rng.gen::<f64>() * side])
        .collect();

    NetworkLayout {
        ap_positions,
        ue_positions,
    }
}

/// Large-scale fading for every antenna/UE pair.
///
/// One shadowing variate is drawn per (AP, UE) pair — always, so the RNG
/// stream does not depend on the geometry — and applied only beyond the
/// outer breakpoint. Distances below 1 m are clamped and counted.
pub fn compute_lsf(layout: &NetworkLayout, cfg: &SystemConfig, rng: &mut impl Rng) -> LsfMatrix {
    let n_ant = cfg.antennas_per_ap;
    let m = cfg.total_antennas();
    let k_ues = cfg.num_ues;
    assert_eq!(layout.ap_positions.len(), m, "layout antenna count mismatch");
    assert_eq!(layout.ue_positions.len(), k_ues, "layout UE count mismatch");

    let pl = &cfg.pathloss;
    let mut beta = DMatrix::zeros(m, k_ues);
    let mut clamped = 0usize;

    for ap in 0..cfg.num_aps {
        let site = layout.ap_positions[ap * n_ant];
        for (k, ue) in layout.ue_positions.iter().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            let raw = (site[0] - ue[0]).hypot(site[1] - ue[1]);
            let d = if raw < 1.0 {
                clamped += 1;
                1.0
            } else {
                raw
            };
            let shadow = if d > pl.d1_m {
                pl.shadow_sigma_db * z
            } else {
                0.0
            };
            let gain_db = pl.lsf_norm_db - pl.loss_db(d) - shadow;
            let b = 10f64.powf(gain_db / 10.0);
            for a in 0..n_ant {
                beta[(ap * n_ant + a, k)] = b;
            }
        }
    }

    LsfMatrix {
        beta,
        clamped_pairs: clamped,
    }
}

/// Pick the `n` UEs with the largest total fading power.
///
/// Greedy on the column sums of `beta`; ties break toward the lower UE
/// index. The returned indices are ascending, fixing the column order of
/// every downstream matrix.
pub fn schedule_users(lsf: &LsfMatrix, cfg: &SystemConfig) -> Vec<usize> {
    let scores: Vec<f64> = (0..lsf.beta.ncols())
        .map(|k| lsf.beta.column(k).sum())
        .collect();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut picked: Vec<usize> = order.into_iter().take(cfg.scheduled_ues).collect();
    picked.sort_unstable();
    picked
}

/// User-centric AP selection.
///
/// For each scheduled UE, an AP is active when its fading coefficient is
/// at least `delta` times that UE's strongest AP; the strongest AP is
/// therefore always active. The mask is per antenna (`M x n`), with all
/// `N` rows of an AP set together.
pub fn select_aps(lsf: &LsfMatrix, scheduled: &[usize], cfg: &SystemConfig) -> DMatrix<bool> {
    let n_ant = cfg.antennas_per_ap;
    let m = cfg.total_antennas();
    let mut mask = DMatrix::from_element(m, scheduled.len(), false);

    for (j, &k) in scheduled.iter().enumerate() {
        // The N antennas of an AP share beta, so row ap*N represents the AP.
        let best = (0..cfg.num_aps)
            .map(|ap| lsf.beta[(ap * n_ant, k)])
            .fold(f64::NEG_INFINITY, f64::max);
        for ap in 0..cfg.num_aps {
            if lsf.beta[(ap * n_ant, k)] >= cfg.ap_selection_delta * best {
                for a in 0..n_ant {
                    mask[(ap * n_ant + a, j)] = true;
                }
            }
        }
    }
    mask
}

/// Draw small-scale fading for the scheduled UEs and split each channel
/// into estimate and error.
///
/// Entry `(m, k)` of the true channel is `sqrt(beta_mk) h` with
/// `h ~ CN(0, 1)`; the estimate carries a `1 - alpha` share of the power
/// and the error the remaining `alpha`, via independent complex normal
/// draws. The `_s` fields apply the activity mask.
pub fn draw_channel(
    lsf: &LsfMatrix,
    scheduled: &[usize],
    mask: &DMatrix<bool>,
    cfg: &SystemConfig,
    rng: &mut impl Rng,
) -> ChannelSet {
    let m = cfg.total_antennas();
    let n = scheduled.len();
    assert_eq!(mask.shape(), (m, n), "mask shape mismatch");

    let mut g_hat = DMatrix::zeros(m, n);
    let mut g_tilde = DMatrix::zeros(m, n);

    // CN(0,1) = (x + iy)/sqrt(2) with x, y standard normal. Column-major
    // fill; estimate drawn before error at each entry.
    let c = std::f64::consts::FRAC_1_SQRT_2;
    for (j, &k) in scheduled.iter().enumerate() {
        for row in 0..m {
            let beta = lsf.beta[(row, k)];
            let h = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)) * c;
            let e = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)) * c;
            g_hat[(row, j)] = ((1.0 - cfg.alpha) * beta).sqrt() * h;
            g_tilde[(row, j)] = (cfg.alpha * beta).sqrt() * e;
        }
    }

    let g = &g_hat + &g_tilde;
    let g_s = apply_mask(&g, mask);
    let g_hat_s = apply_mask(&g_hat, mask);
    let g_tilde_s = apply_mask(&g_tilde, mask);

    ChannelSet {
        g,
        g_hat,
        g_tilde,
        g_s,
        g_hat_s,
        g_tilde_s,
        mask: mask.clone(),
        scheduled_ues: scheduled.to_vec(),
    }
}
