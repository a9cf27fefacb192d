//! Classical driven oscillator with Gibbs initial conditions: the work
//! distribution is exactly Gaussian for every ramp, unlike the quantum case.
//!
//! ```bash
//! cargo run --example classical_comparison
//! ```

use qjz::classical::{classical_jarzynski, classical_work_samples, sample_moments};
use qjz::dynamics::{transition_matrix_analytic, RampProtocol};
use qjz::fockspace::{effective_temperature, thermal_distribution};
use qjz::workstats::{estimators_exact, gaussianity_metrics, work_distribution};

fn main() -> qjz::Result<()> {
    let (d, nu_hz, nbar) = (0.9317, 20_000.0, 0.157);
    let thermal = effective_temperature(nbar, nu_hz)?;
    let protocol = RampProtocol::linear_tau_us(d, 5.0, nu_hz)?;

    let works = classical_work_samples(&protocol, &thermal, 1_000_000, 3)?;
    let kt: Vec<f64> = works.iter().map(|w| w * thermal.beta_hnu).collect();
    let (mean, sd, skew) = sample_moments(&kt);
    let jz = classical_jarzynski(&works, &thermal)?;
    // delta method: se(-ln <x>) = sd(x) / (<x> sqrt(N)) with x = e^{-w}
    let expw: Vec<f64> = kt.iter().map(|w| (-w).exp()).collect();
    let (xm, xsd, _) = sample_moments(&expw);
    let se = xsd / (xm * (expw.len() as f64).sqrt());
    println!("classical, 1e6 trajectories at tau = 5 us:");
    println!("  <w> = {mean:.4} kT, sd = {sd:.4}, skewness = {skew:+.4}");
    println!("  jarzynski estimate = {jz:+.5} ± {se:.5} (delta-method MC error)");

    let initial = thermal_distribution(nbar, 128)?;
    let matrix = transition_matrix_analytic(&protocol, 128)?;
    let dist = work_distribution(&initial, &matrix, &thermal, -d * d)?;
    let est = estimators_exact(&dist);
    let (qskew, _) = gaussianity_metrics(&dist)?;
    println!("quantum, same parameters:");
    println!("  <w> = {:.4} kT, skewness = {qskew:+.4}", est.mean_work);
    Ok(())
}
