//! Projective phonon measurement by iterated subtraction and qubit detection.
//!
//! One iteration is: carrier π pulse, adiabatic blue-sideband transfer
//! (|↑,n⟩ → |↓,n−1⟩ for n ≥ 1; |↑,0⟩ is left bright), then state detection.
//! The first bright detection at iteration k projects onto |n = k−1⟩.
//! The same state machine drives both the Monte Carlo sampler and the exact
//! confusion matrix used for detection-error correction.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fockspace::PhononDistribution;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DetectionModel {
    /// Probability a dark qubit reads bright.
    pub eps_dark: f64,
    /// Probability a bright qubit reads dark.
    pub eps_bright: f64,
    /// Per-iteration probability the blue-sideband transfer fails.
    pub subtraction_error: f64,
    pub heating_rate_quanta_per_ms: f64,
    pub iteration_time_ms: f64,
    pub max_iterations: usize,
}

impl DetectionModel {
    pub fn ideal(max_iterations: usize) -> Self {
        Self {
            eps_dark: 0.0,
            eps_bright: 0.0,
            subtraction_error: 0.0,
            heating_rate_quanta_per_ms: 0.0,
            iteration_time_ms: 0.1,
            max_iterations,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("eps_dark", self.eps_dark),
            ("eps_bright", self.eps_bright),
            ("subtraction_error", self.subtraction_error),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Domain(format!("{name} = {p} out of [0, 1]")));
            }
        }
        if self.max_iterations == 0 {
            return Err(Error::Domain("max_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// Monte Carlo projective measurement. Returns the empirical distribution of
/// reported levels (normalized by `shots`, so overflow mass is missing) and
/// the number of shots with no bright event within `max_iterations`.
pub fn project_sample(
    initial: &PhononDistribution,
    model: &DetectionModel,
    shots: u64,
    seed: u64,
) -> Result<(PhononDistribution, u64)> {
    model.validate()?;
    if shots == 0 {
        return Err(Error::Domain("shots must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cdf: Vec<f64> = {
        let mut acc = 0.0;
        initial
            .probs()
            .iter()
            .map(|&p| {
                acc += p;
                acc
            })
            .collect()
    };
    let heat_p = model.heating_rate_quanta_per_ms * model.iteration_time_ms;
    let mut counts = vec![0u64; model.max_iterations];
    let mut overflow = 0u64;
    for _ in 0..shots {
        let u = rng.gen::<f64>();
        let mut m = cdf.partition_point(|&c| c < u).min(cdf.len() - 1);
        let mut up = false; // qubit state; shots start in |↓, n⟩
        let mut reported = None;
        for iter in 0..model.max_iterations {
            // carrier π pulse
            up = !up;
            // adiabatic blue-sideband transfer
            if up && m >= 1 {
                let ok = model.subtraction_error == 0.0
                    || rng.gen::<f64>() >= model.subtraction_error;
                if ok {
                    up = false;
                    m -= 1;
                }
            }
            // detection
            let read_bright = if up {
                model.eps_bright == 0.0 || rng.gen::<f64>() >= model.eps_bright
            } else {
                model.eps_dark > 0.0 && rng.gen::<f64>() < model.eps_dark
            };
            if read_bright {
                reported = Some(iter);
                break;
            }
            // inter-iteration heating as a single birth-death step
            if heat_p > 0.0 {
                let u = rng.gen::<f64>();
                let up_p = heat_p * (m + 1) as f64;
                let down_p = heat_p * m as f64;
                if u < up_p {
                    m += 1;
                } else if u < up_p + down_p {
                    m -= 1;
                }
            }
        }
        match reported {
            Some(k) => counts[k] += 1,
            None => overflow += 1,
        }
    }
    let probs: Vec<f64> = counts.iter().map(|&c| c as f64 / shots as f64).collect();
    Ok((PhononDistribution::from_probs(probs)?, overflow))
}

/// Exact outcome probabilities P(report k | true n) for k, n < size, from the
/// same iteration state machine (heating excluded; the correction handles
/// detection and subtraction errors only).
pub fn confusion_matrix(model: &DetectionModel, size: usize) -> Result<DMatrix<f64>> {
    model.validate()?;
    let iters = model.max_iterations;
    // state weights p[m][q], q: 0 = down, 1 = up; same machine as the sampler
    let m_states = size + 1;
    let mut matrix = DMatrix::zeros(size, size);
    for n0 in 0..size {
        let mut p = vec![[0.0f64; 2]; m_states];
        p[n0][0] = 1.0; // shots start in |↓, n0⟩
        for iter in 0..iters {
            // carrier π pulse flips the qubit
            for state in p.iter_mut() {
                state.swap(0, 1);
            }
            // adiabatic blue-sideband transfer on |↑, m ≥ 1⟩
            let mut next = vec![[0.0f64; 2]; m_states];
            for m in 0..m_states {
                next[m][0] += p[m][0];
                if m >= 1 {
                    next[m - 1][0] += p[m][1] * (1.0 - model.subtraction_error);
                    next[m][1] += p[m][1] * model.subtraction_error;
                } else {
                    next[m][1] += p[m][1];
                }
            }
            // detection: a bright outcome terminates the shot
            for state in next.iter_mut() {
                let bright_from_up = state[1] * (1.0 - model.eps_bright);
                let bright_from_down = state[0] * model.eps_dark;
                if iter < size {
                    matrix[(iter, n0)] += bright_from_up + bright_from_down;
                }
                state[1] -= bright_from_up;
                state[0] -= bright_from_down;
            }
            p = next;
        }
    }
    Ok(matrix)
}

#[derive(Debug, Clone)]
pub struct CorrectionResult {
    pub dist: PhononDistribution,
    pub clipped_mass: f64,
    pub condition_number: f64,
}

/// Invert the analytic confusion matrix on an empirical distribution; clips
/// negatives to zero and renormalizes.
pub fn correct_detection(
    empirical: &PhononDistribution,
    model: &DetectionModel,
) -> Result<CorrectionResult> {
    let size = empirical.n_trunc();
    let matrix = confusion_matrix(model, size)?;
    let svd = matrix.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if cond > 1e6 {
        return Err(Error::IllConditioned(cond));
    }
    let rhs = nalgebra::DVector::from_column_slice(empirical.probs());
    let solved = matrix
        .lu()
        .solve(&rhs)
        .ok_or(Error::IllConditioned(cond))?;
    let clipped_mass: f64 = solved.iter().filter(|&&v| v < 0.0).map(|v| -v).sum();
    let mut probs: Vec<f64> = solved.iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = probs.iter().sum();
    if total > 0.0 {
        for p in &mut probs {
            *p /= total;
        }
    }
    Ok(CorrectionResult {
        dist: PhononDistribution::from_probs(probs)?,
        clipped_mass,
        condition_number: cond,
    })
}
