//! Dissipated-work distributions P(W_diss = n·hbar·nu) across the ramp
//! durations, with Gaussianity metrics and the three estimators.
//!
//! ```bash
//! cargo run --example work_distributions
//! ```

use qjz::dynamics::{transition_matrix_analytic, RampProtocol};
use qjz::fockspace::{effective_temperature, thermal_distribution};
use qjz::workstats::{estimators_exact, gaussianity_metrics, work_distribution};

fn main() -> qjz::Result<()> {
    let (d, nu_hz, nbar) = (0.9317, 20_000.0, 0.157);
    let thermal = effective_temperature(nbar, nu_hz)?;
    let initial = thermal_distribution(nbar, 128)?;
    for tau_us in [5.0, 25.0, 45.0] {
        let protocol = RampProtocol::linear_tau_us(d, tau_us, nu_hz)?;
        let matrix = transition_matrix_analytic(&protocol, 128)?;
        let dist = work_distribution(&initial, &matrix, &thermal, -d * d)?;
        let est = estimators_exact(&dist);
        let (skew, kurt) = gaussianity_metrics(&dist)?;
        println!(
            "tau = {tau_us:>4} us: <w> = {:.4} kT, jarzynski = {:+.2e}, fdt = {:+.4}, \
             skew = {:.2}, excess kurtosis = {:.2}",
            est.mean_work, est.jarzynski, est.fdt, skew, kurt
        );
        for dn in -2..=3i64 {
            let p = dist.prob(dn);
            if p > 1e-4 {
                println!("  P(dn = {dn:+}) = {p:.4}");
            }
        }
    }
    Ok(())
}
