//! Simulation of a quantum Jarzynski-equality experiment on a single trapped
//! ion: a shift-drive work protocol on one motional mode, two-point phonon
//! measurement statistics, the measurement apparatus (projective phonon
//! readout, sideband traces, MLE reconstruction), and a classical oscillator
//! oracle for contrast.
//!
//! Physics modules (`fockspace`, `dynamics`, `workstats`, `classical`,
//! `measurement`) are unit-free: energies in quanta of ℏν, times as total
//! drive phase Θ = ντ, temperatures as βℏν. SI conversion lives in `config`
//! and the CLI layer only.

pub mod classical;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod fockspace;
pub mod measurement;
pub mod report;
pub mod workstats;

pub use error::{Error, Result};
