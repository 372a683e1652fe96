//! Downlink precoders: zero-forcing, MMSE, and the leakage-aware robust
//! design.
//!
//! All three operate on the masked channel estimate `G_hat_s` (`M x n`)
//! and return a precoding matrix `P` satisfying the total power constraint
//! `tr(P^H P) = P_budget` to machine precision. The robust precoder
//! additionally consumes the error covariance [`ErrorStatistics`] and
//! iterates a fixed-point system: at each step it solves
//!
//! ```text
//! M B = conj(G_hat_s),   M = rho_f S + h^2 rho_f Psi + h^2 lambda I
//! ```
//!
//! with `S = conj(G_hat_s) G_hat_s^T`, renormalizes `B` to the power
//! budget through the gain `h`, and refreshes the multiplier `lambda` from
//! its closed form. `M` is Hermitian but loses definiteness once `lambda`
//! goes sufficiently negative; the solver probes definiteness with a
//! shifted Cholesky factorization and falls back to an LU solve with a
//! trace-scaled diagonal loading when needed (recorded per iteration, see
//! [`IterationRecord::jittered`]).
//!
//! Quantities that are real in exact arithmetic (the gain, the multiplier,
//! Hermitian-form traces) are computed in complex arithmetic and checked:
//! an imaginary residue beyond [`IMAG_TOL`] (relative) aborts, since it
//! can only come from a conjugation mistake upstream.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::CfError;
use crate::evaluation::mse_objective;
use crate::linalg;
use crate::Result;

/// Relative bound on the imaginary residue of quantities that must be
/// real (gains, multipliers, Hermitian quadratic traces).
pub const IMAG_TOL: f64 = 1e-10;

/// Which precoder produced a result; also the CSV/CLI spelling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrecoderMethod {
    Zf,
    Mmse,
    Robust,
}

impl PrecoderMethod {
    pub const ALL: [PrecoderMethod; 3] =
        [PrecoderMethod::Zf, PrecoderMethod::Mmse, PrecoderMethod::Robust];

    pub fn name(self) -> &'static str {
        match self {
            PrecoderMethod::Zf => "zf",
            PrecoderMethod::Mmse => "mmse",
            PrecoderMethod::Robust => "robust",
        }
    }
}

impl std::fmt::Display for PrecoderMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PrecoderMethod {
    type Err = CfError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zf" => Ok(PrecoderMethod::Zf),
            "mmse" => Ok(PrecoderMethod::Mmse),
            "robust" => Ok(PrecoderMethod::Robust),
            other => Err(CfError::config(format!(
                "unknown precoder '{other}' (expected zf, mmse, or robust)"
            ))),
        }
    }
}

/// Second-order statistics of the masked channel estimation error.
///
/// `E[conj(G_tilde_s) G_tilde_s^T]` is diagonal because error entries are
/// independent and zero-mean: entry `m` is `alpha` times the summed fading
/// coefficients of the active UEs on antenna `m`. Only the diagonal is
/// stored.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorStatistics {
    /// Per-antenna error power (length `M`), nonnegative.
    pub diag: DVector<f64>,
}

impl ErrorStatistics {
    /// Number of antennas the statistics describe.
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Embed the diagonal into a dense complex matrix.
    pub fn full_matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.dim(), self.dim(), |i, j| {
            if i == j {
                Complex64::new(self.diag[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }
}

/// Closed-form error covariance for the masked error channel.
///
/// `beta_s` holds the scheduled columns of the fading matrix (`M x n`) and
/// `mask` the matching activity pattern: `diag[m] = alpha * sum_j
/// mask[m,j] * beta_s[m,j]`.
pub fn error_covariance_psi(
    beta_s: &DMatrix<f64>,
    mask: &DMatrix<bool>,
    alpha: f64,
) -> ErrorStatistics {
    assert_eq!(beta_s.shape(), mask.shape(), "mask shape mismatch");
    let diag = DVector::from_fn(beta_s.nrows(), |m, _| {
        let mut acc = 0.0;
        for j in 0..beta_s.ncols() {
            if mask[(m, j)] {
                acc += beta_s[(m, j)];
            }
        }
        alpha * acc
    });
    ErrorStatistics { diag }
}

/// Tuning knobs for [`robust_precoder`].
#[derive(Debug, Clone, PartialEq)]
pub struct RobustSettings {
    /// Maximum fixed-point iterations after initialization (at least 1).
    pub max_iterations: usize,
    /// Early-stop threshold on the relative precoder change.
    pub epsilon: f64,
    /// Diagonal loading is `jitter_scale * |tr(M)| / M_dim` when the
    /// system matrix is not comfortably positive definite.
    pub jitter_scale: f64,
}

impl Default for RobustSettings {
    fn default() -> Self {
        RobustSettings {
            max_iterations: 4,
            epsilon: 1e-3,
            jitter_scale: 1e-12,
        }
    }
}

impl RobustSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(CfError::config("max_iterations must be at least 1"));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(CfError::config("epsilon must be positive and finite"));
        }
        if !(self.jitter_scale.is_finite() && self.jitter_scale >= 0.0) {
            return Err(CfError::config("jitter_scale must be nonnegative"));
        }
        Ok(())
    }
}

/// One entry of the robust iteration trace. The first record describes the
/// initialization (no precoder change yet).
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub gain_h: f64,
    pub lambda: f64,
    /// Surrogate MSE objective at this iterate.
    pub objective: f64,
    /// `||P_i - P_{i-1}||_F / ||P_{i-1}||_F`; `None` for the
    /// initialization record.
    pub rel_change: Option<f64>,
    /// Whether this iterate needed diagonal loading.
    pub jittered: bool,
}

/// Result of any precoder, power-normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderOutput {
    /// `M x n` precoding matrix with `tr(P^H P) = P_budget`.
    pub matrix: DMatrix<Complex64>,
    /// Final normalization gain `h` (the ZF output stores its power
    /// scaling factor here).
    pub gain: f64,
    /// Final power multiplier; zero for the baselines.
    pub lambda: f64,
    /// Fixed-point iterations actually run (zero for the baselines).
    pub iterations: usize,
    /// Per-iteration diagnostics; empty for the baselines.
    pub trace: Vec<IterationRecord>,
}

/// Intermediate state of the robust fixed-point iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustState {
    /// Unnormalized solve result `B`.
    pub b_mat: DMatrix<Complex64>,
    /// Power-normalized precoder `P = h sqrt(rho_f) B`.
    pub p_mat: DMatrix<Complex64>,
    /// Normalization gain `h`.
    pub gain_h: f64,
    /// Power-constraint multiplier.
    pub lambda: f64,
    /// Whether producing this state required diagonal loading.
    pub jittered: bool,
}

/// `conj(G) G^T`: Hermitian PSD Gram matrix of the conjugated channel.
pub(crate) fn conj_outer_gram(g: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    g.conjugate() * g.transpose()
}

/// `tr(P^H S P)` for Hermitian `S`, with a realness check.
pub(crate) fn hermitian_quadratic_trace(s: &DMatrix<Complex64>, p: &DMatrix<Complex64>) -> f64 {
    let sp = s * p;
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..p.ncols() {
        acc += p.column(k).dotc(&sp.column(k));
    }
    assert_real(acc, "quadratic trace")
}

/// `tr(P^H Psi P)` for the diagonal error covariance.
pub(crate) fn psi_quadratic_trace(psi: &ErrorStatistics, p: &DMatrix<Complex64>) -> f64 {
    assert_eq!(psi.dim(), p.nrows(), "error statistics dimension mismatch");
    let mut acc = 0.0;
    for m in 0..p.nrows() {
        acc += psi.diag[m] * p.row(m).norm_squared();
    }
    acc
}

/// Discard an imaginary residue after checking it is negligible. A large
/// residue means a transpose/adjoint mix-up somewhere upstream, which is a
/// bug, not a recoverable condition.
pub(crate) fn assert_real(z: Complex64, what: &str) -> f64 {
    assert!(
        z.im.abs() <= IMAG_TOL * (1.0 + z.re.abs()),
        "{what} should be real, got imaginary residue {} (re {})",
        z.im,
        z.re
    );
    z.re
}

fn complex_identity_scaled(dim: usize, s: f64) -> DMatrix<Complex64> {
    DMatrix::from_diagonal_element(dim, dim, Complex64::new(s, 0.0))
}

/// Normalize `B` to the power budget: `h = sqrt(P / tr(B^H B)) / sqrt(rho_f)`
/// and `P = h sqrt(rho_f) B`.
fn power_normalize(
    b_mat: &DMatrix<Complex64>,
    rho_f: f64,
    power_budget: f64,
) -> Result<(f64, DMatrix<Complex64>)> {
    let norm2 = b_mat.norm_squared();
    if !(norm2.is_finite() && norm2 > 0.0) {
        return Err(CfError::Numerical(format!(
            "cannot power-normalize a precoder with squared norm {norm2}"
        )));
    }
    let h = (power_budget / norm2).sqrt() / rho_f.sqrt();
    let p_mat = b_mat.map(|z| z * Complex64::new(h * rho_f.sqrt(), 0.0));
    Ok((h, p_mat))
}

/// Zero-forcing precoder on the conjugated channel estimate.
///
/// `P` is proportional to `conj(G) (G^T conj(G))^{-1}`, scaled to the
/// power budget, so `G^T P` is diagonal. Requires full column rank; a
/// singular Gram matrix is reported as [`CfError::RankDeficientChannel`].
/// The scaling factor lands in [`PrecoderOutput::gain`] and `lambda` is 0.
pub fn zf_precoder(g_hat_s: &DMatrix<Complex64>, power_budget: f64) -> Result<PrecoderOutput> {
    let (m, n) = g_hat_s.shape();
    let rank_err = || CfError::RankDeficientChannel { rows: m, cols: n };
    if n > m {
        return Err(rank_err());
    }
    // G^T conj(G) is Hermitian PSD; the factorization doubles as the rank
    // check. A dependent column that survives roundoff still leaves its
    // pivot at machine-epsilon scale relative to the largest one.
    let gram = g_hat_s.transpose() * g_hat_s.conjugate();
    let factor = linalg::llt(&gram).ok_or_else(rank_err)?;
    if factor.min_pivot() <= factor.max_pivot() * n as f64 * f64::EPSILON * 32.0 {
        return Err(rank_err());
    }
    let raw = g_hat_s.conjugate() * factor.solve(&DMatrix::identity(n, n));

    let norm2 = raw.norm_squared();
    if !(norm2.is_finite() && norm2 > 0.0) {
        return Err(rank_err());
    }
    let scale = (power_budget / norm2).sqrt();
    Ok(PrecoderOutput {
        matrix: raw.map(|z| z * scale),
        gain: scale,
        lambda: 0.0,
        iterations: 0,
        trace: Vec::new(),
    })
}

/// MMSE (regularized) precoder on the conjugated channel estimate.
///
/// Solves `(rho_f S + (sigma_w2 n / P) I) B = conj(G_hat_s)` and
/// normalizes to the power budget. The system matrix is Hermitian positive
/// definite by construction, so this cannot be rank deficient; an
/// all-zero estimate still fails the normalization.
pub fn mmse_precoder(
    g_hat_s: &DMatrix<Complex64>,
    rho_f: f64,
    sigma_w2: f64,
    power_budget: f64,
) -> Result<PrecoderOutput> {
    let (m, n) = g_hat_s.shape();
    let mut sys = conj_outer_gram(g_hat_s).map(|z| z * rho_f);
    let reg = sigma_w2 * n as f64 / power_budget;
    for i in 0..m {
        sys[(i, i)] += Complex64::new(reg, 0.0);
    }
    let rhs = g_hat_s.conjugate();
    let b_mat = match linalg::llt(&sys) {
        Some(factor) => factor.solve(&rhs),
        None => sys
            .lu()
            .solve(&rhs)
            .ok_or_else(|| CfError::Numerical("MMSE system matrix is singular".into()))?,
    };
    let (h, p_mat) = power_normalize(&b_mat, rho_f, power_budget)?;
    Ok(PrecoderOutput {
        matrix: p_mat,
        gain: h,
        lambda: 0.0,
        iterations: 0,
        trace: Vec::new(),
    })
}

/// Closed-form multiplier update, obtained by eliminating the linear
/// trace between the two stationarity conditions of the Lagrangian:
///
/// ```text
/// lambda = sigma_w2 n / (h^2 P) - rho_f tr(P^H Psi P) / P
/// ```
///
/// With a uniform error covariance `Psi = psi I` the two terms involving
/// `Psi` in the system matrix cancel exactly and the fixed point collapses
/// onto the MMSE precoder; the robust design only departs from MMSE where
/// the per-antenna error power is uneven.
fn lambda_update(
    p_mat: &DMatrix<Complex64>,
    gain_h: f64,
    psi: &ErrorStatistics,
    rho_f: f64,
    sigma_w2: f64,
    power_budget: f64,
) -> f64 {
    let n = p_mat.ncols() as f64;
    let h2 = gain_h * gain_h;
    let t_psi = psi_quadratic_trace(psi, p_mat);
    sigma_w2 * n / (h2 * power_budget) - rho_f * t_psi / power_budget
}

/// Initialization of the robust iteration: the MMSE precoder plus the
/// matching multiplier.
pub fn robust_init(
    g_hat_s: &DMatrix<Complex64>,
    psi: &ErrorStatistics,
    rho_f: f64,
    sigma_w2: f64,
    power_budget: f64,
) -> Result<RobustState> {
    let init = mmse_precoder(g_hat_s, rho_f, sigma_w2, power_budget)?;
    let b_mat = init.matrix.map(|z| z / Complex64::new(init.gain * rho_f.sqrt(), 0.0));
    let lambda = lambda_update(&init.matrix, init.gain, psi, rho_f, sigma_w2, power_budget);
    Ok(RobustState {
        b_mat,
        p_mat: init.matrix,
        gain_h: init.gain,
        lambda,
        jittered: false,
    })
}

/// One fixed-point step: rebuild the system matrix from the current
/// `(h, lambda)`, solve for `B`, renormalize, refresh `lambda`.
///
/// `iteration` only labels errors and diagnostics. The solve prefers a
/// Cholesky factorization; when a `jitter`-shifted probe shows the matrix
/// is not comfortably positive definite the step switches to LU with the
/// loading added, and reports failure as
/// [`CfError::IndefiniteSystemMatrix`] only if that also breaks down.
pub fn robust_iterate(
    state: &RobustState,
    g_hat_s: &DMatrix<Complex64>,
    psi: &ErrorStatistics,
    rho_f: f64,
    sigma_w2: f64,
    power_budget: f64,
    settings: &RobustSettings,
    iteration: usize,
) -> Result<RobustState> {
    let m = g_hat_s.nrows();
    assert_eq!(psi.dim(), m, "error statistics dimension mismatch");

    let h2 = state.gain_h * state.gain_h;
    let mut sys = conj_outer_gram(g_hat_s).map(|z| z * rho_f);
    for i in 0..m {
        sys[(i, i)] += Complex64::new(h2 * rho_f * psi.diag[i] + h2 * state.lambda, 0.0);
    }

    let trace_re = assert_real(sys.trace(), "system matrix trace");
    let jitter = settings.jitter_scale * trace_re.abs() / m as f64;
    let rhs = g_hat_s.conjugate();

    // Definiteness probe: M - jitter I admits a Cholesky factorization
    // exactly when the smallest eigenvalue of M clears the loading level.
    let shifted = &sys - complex_identity_scaled(m, jitter);
    let comfortably_pd = linalg::llt(&shifted).is_some();
    let b_mat = if comfortably_pd {
        match linalg::llt(&sys) {
            Some(factor) => factor.solve(&rhs),
            // The probe passed but the unshifted factorization failed;
            // only possible at the numerical margin. LU still applies.
            None => sys
                .lu()
                .solve(&rhs)
                .ok_or(CfError::IndefiniteSystemMatrix { iteration, jitter })?,
        }
    } else {
        let loaded = &sys + complex_identity_scaled(m, jitter);
        loaded
            .lu()
            .solve(&rhs)
            .ok_or(CfError::IndefiniteSystemMatrix { iteration, jitter })?
    };
    let jittered = !comfortably_pd;

    let (gain_h, p_mat) = power_normalize(&b_mat, rho_f, power_budget)?;
    let lambda = lambda_update(&p_mat, gain_h, psi, rho_f, sigma_w2, power_budget);
    Ok(RobustState {
        b_mat,
        p_mat,
        gain_h,
        lambda,
        jittered,
    })
}

/// Leakage-aware robust precoder.
///
/// Runs [`robust_init`] followed by up to `settings.max_iterations` calls
/// of [`robust_iterate`], stopping early once the relative precoder change
/// drops below `settings.epsilon`. The trace records the initialization
/// and every iterate (gain, multiplier, surrogate objective, relative
/// change, loading flag).
pub fn robust_precoder(
    g_hat_s: &DMatrix<Complex64>,
    psi: &ErrorStatistics,
    rho_f: f64,
    sigma_w2: f64,
    power_budget: f64,
    settings: &RobustSettings,
) -> Result<PrecoderOutput> {
    settings.validate()?;

    let mut state = robust_init(g_hat_s, psi, rho_f, sigma_w2, power_budget)?;
    let mut trace = vec![IterationRecord {
        gain_h: state.gain_h,
        lambda: state.lambda,
        objective: mse_objective(&state.p_mat, state.gain_h, g_hat_s, psi, rho_f, sigma_w2),
        rel_change: None,
        jittered: false,
    }];

    let mut iterations = 0;
    for it in 1..=settings.max_iterations {
        let prev = state.p_mat.clone();
        state = robust_iterate(
            &state, g_hat_s, psi, rho_f, sigma_w2, power_budget, settings, it,
        )?;
        let rel = (&state.p_mat - &prev).norm() / prev.norm();
        trace.push(IterationRecord {
            gain_h: state.gain_h,
            lambda: state.lambda,
            objective: mse_objective(&state.p_mat, state.gain_h, g_hat_s, psi, rho_f, sigma_w2),
            rel_change: Some(rel),
            jittered: state.jittered,
        });
        iterations = it;
        if rel < settings.epsilon {
            break;
        }
    }

    Ok(PrecoderOutput {
        matrix: state.p_mat,
        gain: state.gain_h,
        lambda: state.lambda,
        iterations,
        trace,
    })
}

/// Relative fixed-point residual of a robust solution:
/// `||M P - h sqrt(rho_f) conj(G_hat_s)||_F / ||h sqrt(rho_f) conj(G_hat_s)||_F`
/// with `M` rebuilt from the final `(h, lambda)`. Small values certify
/// stationarity of the output.
pub fn stationarity_residual(
    out: &PrecoderOutput,
    g_hat_s: &DMatrix<Complex64>,
    psi: &ErrorStatistics,
    rho_f: f64,
) -> f64 {
    let m = g_hat_s.nrows();
    let h2 = out.gain * out.gain;
    let mut sys = conj_outer_gram(g_hat_s).map(|z| z * rho_f);
    for i in 0..m {
        sys[(i, i)] += Complex64::new(h2 * rho_f * psi.diag[i] + h2 * out.lambda, 0.0);
    }
    let target = g_hat_s
        .conjugate()
        .map(|z| z * Complex64::new(out.gain * rho_f.sqrt(), 0.0));
    (&sys * &out.matrix - &target).norm() / target.norm()
}
