//! Thermal phonon states: occupation ladders and effective temperatures for
//! the three prepared ensembles.
//!
//! ```bash
//! cargo run --example thermal_state
//! ```

use qjz::fockspace::{effective_temperature, thermal_distribution};

fn main() -> qjz::Result<()> {
    let nu_hz = 20_000.0;
    for nbar in [0.051, 0.094, 0.157] {
        let params = effective_temperature(nbar, nu_hz)?;
        let dist = thermal_distribution(nbar, 64)?;
        println!(
            "nbar = {nbar:<6} beta*h*nu = {:.4}  T_eff = {:.0} nK",
            params.beta_hnu, params.t_eff_nk
        );
        for n in 0..5 {
            println!("  P_{n} = {:.5}", dist.prob(n));
        }
    }
    Ok(())
}
