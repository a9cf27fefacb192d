//! Blue/red sideband Rabi traces: the detection signal is
//! P↑(t) = ½ Σ_n P_n [1 − e^{−γt} A cos(2 Ω_n t)] with Ω_n = Ω₀η√(n+1)
//! (blue) or Ω₀η√n (red; the n = 0 term is stationary).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::fockspace::PhononDistribution;

const KHZ_TO_RAD_PER_US: f64 = std::f64::consts::TAU * 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SidebandKind {
    Blue,
    Red,
}

impl SidebandKind {
    /// √(n+1) for blue, √n for red.
    pub fn coupling(&self, n: usize) -> f64 {
        match self {
            SidebandKind::Blue => ((n + 1) as f64).sqrt(),
            SidebandKind::Red => (n as f64).sqrt(),
        }
    }
}

/// Acquisition and model parameters shared by a trace.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TraceParams {
    pub times_us: Vec<f64>,
    pub shots_per_point: u64,
    /// Ω₀η/2π in kHz.
    pub rabi_base_khz: f64,
    /// Lamb–Dicke parameter (informational; the product Ω₀η sets the clock).
    pub eta: f64,
    /// Decay rate γ in 1/μs.
    pub gamma: f64,
    /// Contrast A in (0, 1].
    pub contrast: f64,
}

impl TraceParams {
    /// 250 points at 1 μs spacing, 200 shots per point.
    pub fn paper_defaults() -> Self {
        Self {
            times_us: (1..=250).map(|k| k as f64).collect(),
            shots_per_point: 200,
            rabi_base_khz: 10.0,
            eta: 0.1,
            gamma: 0.003,
            contrast: 0.98,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.times_us.is_empty() {
            return Err(Error::Domain("trace needs at least one time point".into()));
        }
        if self.times_us.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("trace times must be increasing".into()));
        }
        if !(self.rabi_base_khz > 0.0) || self.gamma < 0.0 {
            return Err(Error::Domain("invalid Rabi/decay parameters".into()));
        }
        if !(self.contrast > 0.0 && self.contrast <= 1.0) {
            return Err(Error::Domain("contrast must be in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SidebandTrace {
    pub kind: SidebandKind,
    pub times_us: Vec<f64>,
    pub p_up: Vec<f64>,
    pub shots_per_point: u64,
    pub rabi_base_khz: f64,
    pub eta: f64,
    pub gamma: f64,
    pub contrast: f64,
}

impl SidebandTrace {
    pub fn to_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "time_us,p_up,shots")?;
        for (t, p) in self.times_us.iter().zip(self.p_up.iter()) {
            writeln!(w, "{t},{p:.17e},{}", self.shots_per_point)?;
        }
        Ok(())
    }

    pub fn from_csv<R: std::io::BufRead>(
        reader: R,
        kind: SidebandKind,
        rabi_base_khz: f64,
        eta: f64,
    ) -> Result<Self> {
        let mut times = Vec::new();
        let mut p_up = Vec::new();
        let mut shots = 0u64;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if i == 0 && line.starts_with("time_us") {
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::Config(format!("trace CSV line {}: expected 3 fields", i + 1)));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Config(format!("trace CSV line {}: {e}", i + 1)))
            };
            times.push(parse(fields[0])?);
            p_up.push(parse(fields[1])?);
            shots = parse(fields[2])? as u64;
        }
        if times.is_empty() {
            return Err(Error::Config("empty trace file".into()));
        }
        Ok(Self {
            kind,
            times_us: times,
            p_up,
            shots_per_point: shots,
            rabi_base_khz,
            eta,
            gamma: 0.0,
            contrast: 1.0,
        })
    }
}

/// Model detection probability at one time point.
pub fn model_p_up(
    dist_probs: &[f64],
    kind: SidebandKind,
    rabi_base_khz: f64,
    gamma: f64,
    contrast: f64,
    t_us: f64,
) -> f64 {
    let omega0 = rabi_base_khz * KHZ_TO_RAD_PER_US;
    let decay = (-gamma * t_us).exp();
    let mut acc = 0.0;
    for (n, &p) in dist_probs.iter().enumerate() {
        let omega = omega0 * kind.coupling(n);
        acc += p * (1.0 - decay * contrast * (2.0 * omega * t_us).cos());
    }
    0.5 * acc
}

/// Simulate a measured trace: binomial sampling of `shots_per_point` against
/// the model probability at each time point. Deterministic for a given seed.
pub fn synthesize_sideband(
    dist: &PhononDistribution,
    kind: SidebandKind,
    params: &TraceParams,
    seed: u64,
) -> Result<SidebandTrace> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p_up = Vec::with_capacity(params.times_us.len());
    for &t in &params.times_us {
        let p = model_p_up(
            dist.probs(),
            kind,
            params.rabi_base_khz,
            params.gamma,
            params.contrast,
            t,
        )
        .clamp(0.0, 1.0);
        if params.shots_per_point == 0 {
            p_up.push(0.0);
        } else {
            let k = Binomial::new(params.shots_per_point, p)
                .map_err(|e| Error::Domain(format!("binomial: {e}")))?
                .sample(&mut rng);
            p_up.push(k as f64 / params.shots_per_point as f64);
        }
    }
    Ok(SidebandTrace {
        kind,
        times_us: params.times_us.clone(),
        p_up,
        shots_per_point: params.shots_per_point,
        rabi_base_khz: params.rabi_base_khz,
        eta: params.eta,
        gamma: params.gamma,
        contrast: params.contrast,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn noiseless(gamma: f64, contrast: f64) -> TraceParams {
        TraceParams {
            gamma,
            contrast,
            ..TraceParams::paper_defaults()
        }
    }

    #[test]
    fn red_from_ground_state_is_dark() {
        let dist = PhononDistribution::ground(8);
        let mut params = noiseless(0.0, 1.0);
        params.shots_per_point = 10_000;
        let trace = synthesize_sideband(&dist, SidebandKind::Red, &params, 1).unwrap();
        for &p in &trace.p_up {
            assert_eq!(p, 0.0);
        }
    }

    #[test]
    fn blue_from_ground_state_is_full_contrast() {
        let dist = PhononDistribution::ground(8);
        let params = noiseless(0.0, 1.0);
        let omega0 = params.rabi_base_khz * KHZ_TO_RAD_PER_US;
        for &t in &[3.0, 10.0, 37.5] {
            let p = model_p_up(dist.probs(), SidebandKind::Blue, params.rabi_base_khz, 0.0, 1.0, t);
            assert_abs_diff_eq!(p, 0.5 * (1.0 - (2.0 * omega0 * t).cos()), epsilon = 1e-12);
        }
    }

    #[test]
    fn first_minimum_of_fock_trace() {
        // blue trace from |n⟩ has its first p_up maximum ("first minimum of
        // the cosine") at t = π/(2 Ω₀η√(n+1))
        let params = noiseless(0.0, 1.0);
        let omega0 = params.rabi_base_khz * KHZ_TO_RAD_PER_US;
        for n in 0..4usize {
            let mut probs = vec![0.0; 8];
            probs[n] = 1.0;
            let expected = std::f64::consts::PI / (2.0 * omega0 * ((n + 1) as f64).sqrt());
            let times: Vec<f64> = (1..=4000).map(|k| k as f64 * 0.01).collect();
            let first_max = times
                .iter()
                .position(|&t| {
                    let eps = 0.01;
                    let f = |t: f64| {
                        model_p_up(&probs, SidebandKind::Blue, params.rabi_base_khz, 0.0, 1.0, t)
                    };
                    f(t) > f(t - eps) && f(t) >= f(t + eps)
                })
                .map(|i| times[i])
                .unwrap();
            assert!((first_max - expected).abs() <= 0.02, "n={n}: {first_max} vs {expected}");
        }
    }

    #[test]
    fn synthesis_is_deterministic() {
        let dist = crate::fockspace::truncated_thermal(0.157, 8).unwrap();
        let params = TraceParams::paper_defaults();
        let a = synthesize_sideband(&dist, SidebandKind::Blue, &params, 9).unwrap();
        let b = synthesize_sideband(&dist, SidebandKind::Blue, &params, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn csv_round_trip() {
        let dist = crate::fockspace::truncated_thermal(0.157, 8).unwrap();
        let params = TraceParams::paper_defaults();
        let trace = synthesize_sideband(&dist, SidebandKind::Blue, &params, 3).unwrap();
        let mut buf = Vec::new();
        trace.to_csv(&mut buf).unwrap();
        let back = SidebandTrace::from_csv(
            std::io::BufReader::new(buf.as_slice()),
            SidebandKind::Blue,
            params.rabi_base_khz,
            params.eta,
        )
        .unwrap();
        assert_eq!(back.times_us, trace.times_us);
        assert_eq!(back.p_up, trace.p_up);
        assert_eq!(back.shots_per_point, trace.shots_per_point);
    }
}
