//! Adiabatic blue-sideband transfer |up, n> -> |down, n-1>: one calibrated
//! chirped pulse moves every level with the same duration.
//!
//! ```bash
//! cargo run --example adiabatic_transfer
//! ```

use qjz::measurement::{adiabatic_transfer_fidelity, CALIBRATED_PULSE};

fn main() -> qjz::Result<()> {
    let (t_us, delta0_khz, omega_max_khz) = CALIBRATED_PULSE;
    println!(
        "pulse: T = {t_us} us, delta0 = {delta0_khz} kHz, Omega_max = {omega_max_khz} kHz"
    );
    for n in 1..=6 {
        let f = adiabatic_transfer_fidelity(n, t_us, delta0_khz, omega_max_khz)?;
        println!("  n = {n}: transfer fidelity = {f:.5}");
    }

    // contrast with a fixed-area resonant pulse, which can only be right for
    // one n at a time
    println!("resonant pi pulse tuned to n = 1:");
    let omega_pi = std::f64::consts::PI * std::f64::consts::PI / (2.0 * 50.0)
        / (std::f64::consts::TAU * 1e-3);
    for n in 1..=6 {
        let f = adiabatic_transfer_fidelity(n, 50.0, 0.0, omega_pi)?;
        println!("  n = {n}: transfer fidelity = {f:.5}");
    }
    Ok(())
}
