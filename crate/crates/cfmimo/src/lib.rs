//! Downlink simulator for cell-free massive MIMO networks.
//!
//! A set of distributed access points (APs), each with a small antenna
//! array, jointly serves a scheduled subset of user equipments (UEs) over a
//! shared time-frequency resource. The channel state information available
//! at the APs is imperfect, and the precoders here differ in how they treat
//! that imperfection:
//!
//! - [`precoding::zf_precoder`] — zero-forcing on the channel estimate,
//! - [`precoding::mmse_precoder`] — regularized inversion of the estimate,
//! - [`precoding::robust_precoder`] — an iterative design that folds the
//!   second-order statistics of the estimation error into the objective.
//!
//! The crate is organized as a pipeline:
//!
//! 1. [`network`] — AP/UE geometry, large-scale fading, user scheduling,
//!    user-centric AP selection, and correlated channel draws.
//! 2. [`precoding`] — the three precoders plus the error-covariance model
//!    they share.
//! 3. [`evaluation`] — ergodic sum-rate, the surrogate MSE objective, and a
//!    floating-point-operation cost model.
//! 4. [`sim`] — seeded Monte Carlo experiments over an SNR/imperfection
//!    grid, with CSV + manifest output.
//!
//! Every random quantity flows from an explicit seed, and sweep results are
//! byte-identical across reruns regardless of thread count. See the
//! `examples/` directory for runnable entry points into each stage.

pub mod error;
pub mod evaluation;
pub(crate) mod linalg;
pub mod network;
pub mod precoding;
pub mod sim;

pub use error::CfError;
pub use evaluation::{flop_count, mse_objective, residual_covariance, sum_rate};
pub use evaluation::{FlopReport, RateReport, ResidualCovariance};
pub use network::{
    apply_mask, compute_lsf, draw_channel, generate_layout, schedule_users, select_aps,
    ChannelSet, LsfMatrix, NetworkLayout, PathlossParams, SystemConfig,
};
pub use precoding::{
    error_covariance_psi, mmse_precoder, robust_init, robust_iterate, robust_precoder,
    stationarity_residual, zf_precoder, ErrorStatistics, IterationRecord, PrecoderMethod,
    PrecoderOutput, RobustSettings, RobustState,
};
pub use sim::{
    emit_csv, parse_config, parse_sweep_csv, run_drop, run_sweep, DropOutcome, DropRecord,
    DropReport, ExperimentConfig, GridPoint, SweepResult, SweepRow,
};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, CfError>;
