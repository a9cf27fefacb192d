//! Classical counterpart of the driven oscillator: Gibbs-sampled initial
//! conditions, exact linear dynamics for the work, and the classical
//! Jarzynski identity. For a linear drive the dissipated work is linear in
//! the Gaussian initial conditions, hence exactly Gaussian.

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dynamics::{RampProtocol, RampShape};
use crate::error::{Error, Result};
use crate::fockspace::ThermalParams;

/// ∫₀^Θ λ(s) e^{is} ds, segment-exact for (piecewise-)linear ramps.
fn drive_integral(protocol: &RampProtocol) -> C64 {
    let i = C64::new(0.0, 1.0);
    let eis = |s: f64| C64::new(0.0, s).exp();
    match &protocol.shape {
        RampShape::Linear => {
            let theta = protocol.theta_total;
            // (d/Θ) ∫ s e^{is} ds = (d/Θ) [e^{is}(1 − is)]₀^Θ
            protocol.d / theta * (eis(theta) * (C64::new(1.0, 0.0) - i * theta) - 1.0)
        }
        RampShape::Tabulated(points) => {
            let mut acc = C64::new(0.0, 0.0);
            for w in points.windows(2) {
                let (t0, l0) = w[0];
                let (t1, l1) = w[1];
                let slope = (l1 - l0) / (t1 - t0);
                // λ(s) = a + slope·s on the segment
                let a = l0 - slope * t0;
                let lin = |s: f64| eis(s) * (C64::new(1.0, 0.0) - i * s);
                acc += a * (eis(t1) - eis(t0)) / i + slope * (lin(t1) - lin(t0));
            }
            acc
        }
    }
}

/// Final phase-space point for the initial condition z₀ = x₀ + i p₀ under
/// ż = −iz − i√2 λ(θ).
fn propagate(protocol: &RampProtocol, z0: C64) -> C64 {
    let theta = protocol.theta_total;
    let phase = C64::new(0.0, -theta).exp();
    let c = drive_integral(protocol);
    phase * (z0 - C64::new(0.0, 2f64.sqrt()) * c)
}

fn work_diss(protocol: &RampProtocol, z0: C64) -> f64 {
    // isolated system: W = h(Θ) − h(0); W_diss = W + d²
    let zf = propagate(protocol, z0);
    let h0 = 0.5 * z0.norm_sqr();
    let hf = 0.5 * zf.norm_sqr() + protocol.d * 2f64.sqrt() * zf.re;
    hf - h0 + protocol.d * protocol.d
}

fn gibbs_draws(thermal: &ThermalParams, samples: usize, seed: u64) -> Vec<C64> {
    let sigma = (1.0 / thermal.beta_hnu).sqrt();
    let normal = Normal::new(0.0, sigma).expect("valid sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples)
        .map(|_| C64::new(normal.sample(&mut rng), normal.sample(&mut rng)))
        .collect()
}

/// Dissipated work samples (units ℏν) from the exact linear dynamics of the
/// classical driven oscillator, with initial conditions Gibbs-distributed at
/// the given temperature.
pub fn classical_work_samples(
    protocol: &RampProtocol,
    thermal: &ThermalParams,
    samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if samples == 0 {
        return Err(Error::Domain("samples must be >= 1".into()));
    }
    Ok(gibbs_draws(thermal, samples, seed)
        .into_iter()
        .map(|z0| work_diss(protocol, z0))
        .collect())
}

/// Symplectic-integrator cross-check of [`classical_work_samples`]: leapfrog
/// with step-halving validation, identical initial draws for a given seed.
pub fn classical_work_samples_leapfrog(
    protocol: &RampProtocol,
    thermal: &ThermalParams,
    samples: usize,
    seed: u64,
    steps: usize,
) -> Result<Vec<f64>> {
    if samples == 0 || steps == 0 {
        return Err(Error::Domain("samples and steps must be >= 1".into()));
    }
    let draws = gibbs_draws(thermal, samples, seed);
    let run = |steps: usize, z0: C64| -> f64 {
        let dt = protocol.theta_total / steps as f64;
        let mut x = z0.re;
        let mut p = z0.im;
        let force = |x: f64, theta: f64| -x - 2f64.sqrt() * protocol.lambda(theta);
        let mut theta = 0.0;
        for _ in 0..steps {
            p += 0.5 * dt * force(x, theta);
            x += dt * p;
            theta += dt;
            p += 0.5 * dt * force(x, theta);
        }
        let h0 = 0.5 * z0.norm_sqr();
        let hf = 0.5 * (x * x + p * p) + protocol.d * 2f64.sqrt() * x;
        hf - h0 + protocol.d * protocol.d
    };
    let mut out = Vec::with_capacity(samples);
    for (k, z0) in draws.into_iter().enumerate() {
        let coarse = run(steps, z0);
        let fine = run(steps * 2, z0);
        // spot-check convergence on a few trajectories
        if k < 16 && (coarse - fine).abs() > 1e-5 {
            return Err(Error::IntegrationFailure((coarse - fine).abs()));
        }
        out.push(fine);
    }
    Ok(out)
}

/// −ln of the empirical mean of e^{−β W_diss}.
pub fn classical_jarzynski(works: &[f64], thermal: &ThermalParams) -> Result<f64> {
    if works.is_empty() {
        return Err(Error::Domain("empty work sample".into()));
    }
    let beta = thermal.beta_hnu;
    let max_log = works
        .iter()
        .map(|w| -beta * w)
        .fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = works.iter().map(|w| (-beta * w - max_log).exp()).sum();
    Ok(-(max_log + (sum / works.len() as f64).ln()))
}

/// Sample mean, standard deviation, and skewness.
pub fn sample_moments(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m3 = values.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    (mean, m2.sqrt(), m3 / m2.powf(1.5))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fockspace::effective_temperature;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::TAU;

    const NU: f64 = 20_000.0;
    const D: f64 = 0.9317;

    #[test]
    fn no_drive_no_work() {
        let protocol = RampProtocol::linear(0.0, 1.0, NU).unwrap();
        let thermal = effective_temperature(0.157, NU).unwrap();
        let works = classical_work_samples(&protocol, &thermal, 100, 1).unwrap();
        for w in works {
            assert_abs_diff_eq!(w, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn integer_period_is_adiabatic() {
        // same cancellation as the quantum case; oracle: leapfrog
        let protocol = RampProtocol::linear(D, TAU, NU).unwrap();
        let thermal = effective_temperature(0.157, NU).unwrap();
        let works = classical_work_samples(&protocol, &thermal, 200, 2).unwrap();
        for w in &works {
            assert_abs_diff_eq!(*w, 0.0, epsilon = 1e-12);
        }
        let lf = classical_work_samples_leapfrog(&protocol, &thermal, 50, 2, 20_000).unwrap();
        for w in &lf {
            assert_abs_diff_eq!(*w, 0.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn closed_form_matches_leapfrog() {
        let protocol = RampProtocol::linear_tau_us(D, 5.0, NU).unwrap();
        let thermal = effective_temperature(0.157, NU).unwrap();
        let exact = classical_work_samples(&protocol, &thermal, 50, 7).unwrap();
        let lf = classical_work_samples_leapfrog(&protocol, &thermal, 50, 7, 20_000).unwrap();
        for (a, b) in exact.iter().zip(lf.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-6);
        }
    }

    #[test]
    fn mean_matches_quantum() {
        // classical and quantum mean dissipated work both equal |alpha_res|^2
        let protocol = RampProtocol::linear_tau_us(D, 5.0, NU).unwrap();
        let thermal = effective_temperature(0.157, NU).unwrap();
        let n = 1_000_000;
        let works = classical_work_samples(&protocol, &thermal, n, 11).unwrap();
        let (mean, sd, _) = sample_moments(&works);
        let expect = crate::dynamics::residual_amplitude(&protocol).unwrap().powi(2);
        let se = sd / (n as f64).sqrt();
        assert!(
            (mean - expect).abs() < 3.0 * se,
            "mean {mean} vs {expect} (se {se})"
        );
        // in k_BT units: 0.840 * 1.9973
        assert!((mean * thermal.beta_hnu - 1.678).abs() < 3.0 * se * thermal.beta_hnu + 1e-3);
    }

    #[test]
    fn equipartition_of_gibbs_draws() {
        let thermal = effective_temperature(0.157, NU).unwrap();
        let draws = gibbs_draws(&thermal, 500_000, 23);
        let energies: Vec<f64> = draws.iter().map(|z| 0.5 * z.norm_sqr()).collect();
        let (mean, sd, _) = sample_moments(&energies);
        let expect = 1.0 / thermal.beta_hnu;
        assert!((mean - expect).abs() < 3.0 * sd / (energies.len() as f64).sqrt());
    }

    #[test]
    fn classical_identity_and_gaussianity() {
        let protocol = RampProtocol::linear_tau_us(D, 5.0, NU).unwrap();
        let thermal = effective_temperature(0.157, NU).unwrap();
        let n = 1_000_000;
        let works = classical_work_samples(&protocol, &thermal, n, 13).unwrap();
        let jz = classical_jarzynski(&works, &thermal).unwrap();
        // crude bootstrap-free bound: Var(e^{-bw}) / n
        let beta = thermal.beta_hnu;
        let exps: Vec<f64> = works.iter().map(|w| (-beta * w).exp()).collect();
        let (_, sd, _) = sample_moments(&exps);
        let se = sd / (n as f64).sqrt();
        assert!(jz.abs() < 3.0 * se, "jz {jz}, se {se}");
        let (_, _, skew) = sample_moments(&works);
        assert!(skew.abs() < 0.1, "skew {skew}");
    }

    #[test]
    fn all_zero_works_give_zero() {
        let thermal = effective_temperature(0.157, NU).unwrap();
        assert_eq!(classical_jarzynski(&[0.0; 10], &thermal).unwrap(), 0.0);
    }
}
