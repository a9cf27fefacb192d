//! Simulation of the measurement apparatus: iterated phonon-subtraction
//! projective measurement with detection errors and correction, adiabatic
//! blue-sideband transfer, sideband-trace synthesis, and maximum-likelihood
//! reconstruction of phonon distributions.

mod mle;
mod projection;
mod sideband;
mod transfer;

pub use mle::{
    mle_bootstrap_samples, mle_fit, mle_fit_window, sideband_log_likelihood, MleFitResult,
    MleOptions,
};
pub use projection::{
    confusion_matrix, correct_detection, project_sample, CorrectionResult, DetectionModel,
};
pub use sideband::{synthesize_sideband, SidebandKind, SidebandTrace, TraceParams};
pub use transfer::{adiabatic_transfer_fidelity, CALIBRATED_PULSE};
