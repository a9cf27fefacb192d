//! Constrained maximum-likelihood reconstruction of phonon populations from a
//! blue/red sideband trace pair.
//!
//! The populations live on the probability simplex via a softmax
//! reparameterization; nuisance parameters are per-trace decay rates and
//! contrasts. Optimization is multi-start Nelder–Mead, with convergence
//! declared only when the best two starts agree.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::fockspace::PhononDistribution;
use crate::measurement::sideband::{SidebandKind, SidebandTrace};

const KHZ_TO_RAD_PER_US: f64 = std::f64::consts::TAU * 1e-3;

#[derive(Debug, Clone, Copy)]
pub struct MleOptions {
    pub starts: usize,
    pub max_iters: usize,
    /// Bootstrap resamples for per-P_n confidence intervals; 0 disables.
    pub bootstrap_b: usize,
    pub seed: u64,
    /// Largest tolerated fitted mass at the top support level before the fit
    /// is rejected as support-limited.
    pub max_top_mass: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            starts: 8,
            max_iters: 3000,
            bootstrap_b: 0,
            seed: 0,
            max_top_mass: 0.01,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MleFitResult {
    pub dist: PhononDistribution,
    pub gamma_blue: f64,
    pub gamma_red: f64,
    pub contrast_blue: f64,
    pub contrast_red: f64,
    pub log_likelihood: f64,
    pub converged: bool,
    /// Central 68% bootstrap interval per P_n, when requested.
    pub ci: Option<Vec<(f64, f64)>>,
}

struct TraceData {
    times: Vec<f64>,
    counts: Vec<u64>,
    shots: u64,
    /// cos(2 Ω_n t) per (n, point), frequencies fixed by the shared Rabi scale
    cos_table: Vec<Vec<f64>>,
}

impl TraceData {
    fn new(trace: &SidebandTrace, level_min: usize, n_support: usize) -> Self {
        let omega0 = trace.rabi_base_khz * KHZ_TO_RAD_PER_US;
        let cos_table = (level_min..n_support)
            .map(|n| {
                let omega = omega0 * trace.kind.coupling(n);
                trace
                    .times_us
                    .iter()
                    .map(|&t| (2.0 * omega * t).cos())
                    .collect()
            })
            .collect();
        let counts = trace
            .p_up
            .iter()
            .map(|&p| (p * trace.shots_per_point as f64).round() as u64)
            .collect();
        Self {
            times: trace.times_us.clone(),
            counts,
            shots: trace.shots_per_point,
            cos_table,
        }
    }

    fn neg_log_likelihood(&self, probs: &[f64], gamma: f64, contrast: f64) -> f64 {
        let mut nll = 0.0;
        for (i, &t) in self.times.iter().enumerate() {
            let mut s = 0.0;
            for (n, &p) in probs.iter().enumerate() {
                s += p * self.cos_table[n][i];
            }
            let p_up = (0.5 * (1.0 - (-gamma * t).exp() * contrast * s)).clamp(1e-9, 1.0 - 1e-9);
            let k = self.counts[i] as f64;
            nll -= k * p_up.ln() + (self.shots as f64 - k) * (1.0 - p_up).ln();
        }
        nll
    }
}

fn softmax(z: &[f64]) -> Vec<f64> {
    // implicit z_0 = 0
    let max = z.iter().copied().fold(0.0f64, f64::max);
    let mut out = Vec::with_capacity(z.len() + 1);
    out.push((-max).exp());
    out.extend(z.iter().map(|&v| (v - max).exp()));
    let total: f64 = out.iter().sum();
    for v in &mut out {
        *v /= total;
    }
    out
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

struct Objective<'a> {
    blue: &'a TraceData,
    red: &'a TraceData,
    /// number of fitted levels (window length)
    window: usize,
}

impl Objective<'_> {
    fn unpack(&self, x: &[f64]) -> (Vec<f64>, f64, f64, f64, f64) {
        let probs = softmax(&x[..self.window - 1]);
        let g_b = x[self.window - 1].exp();
        let g_r = x[self.window].exp();
        let a_b = sigmoid(x[self.window + 1]);
        let a_r = sigmoid(x[self.window + 2]);
        (probs, g_b, g_r, a_b, a_r)
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let (probs, g_b, g_r, a_b, a_r) = self.unpack(x);
        self.blue.neg_log_likelihood(&probs, g_b, a_b)
            + self.red.neg_log_likelihood(&probs, g_r, a_r)
    }
}

/// Plain Nelder–Mead on the unconstrained parameterization.
fn nelder_mead<F: Fn(&[f64]) -> f64>(
    f: &F,
    x0: &[f64],
    step: f64,
    max_iters: usize,
) -> (Vec<f64>, f64) {
    let dim = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..dim {
        let mut x = x0.to_vec();
        x[i] += step;
        let fx = f(&x);
        simplex.push((x, fx));
    }
    for _ in 0..max_iters {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if (simplex[dim].1 - simplex[0].1).abs() < 1e-10 {
            break;
        }
        let centroid: Vec<f64> = (0..dim)
            .map(|j| simplex[..dim].iter().map(|(x, _)| x[j]).sum::<f64>() / dim as f64)
            .collect();
        let worst = simplex[dim].clone();
        let combine = |c: f64| -> Vec<f64> {
            (0..dim)
                .map(|j| centroid[j] + c * (worst.0[j] - centroid[j]))
                .collect()
        };
        let reflected = combine(-1.0);
        let fr = f(&reflected);
        if fr < simplex[0].1 {
            let expanded = combine(-2.0);
            let fe = f(&expanded);
            simplex[dim] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (reflected, fr);
        } else {
            let contracted = if fr < worst.1 { combine(-0.5) } else { combine(0.5) };
            let fc = f(&contracted);
            if fc < worst.1.min(fr) {
                simplex[dim] = (contracted, fc);
            } else {
                // shrink toward the best point
                let best = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    for j in 0..dim {
                        entry.0[j] = best[j] + 0.5 * (entry.0[j] - best[j]);
                    }
                    entry.1 = f(&entry.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}

fn local_search<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], max_iters: usize) -> (Vec<f64>, f64) {
    let (x1, _) = nelder_mead(f, x0, 0.5, max_iters);
    let (x2, f2) = nelder_mead(f, &x1, 0.1, max_iters);
    (x2, f2)
}

fn start_points(n_support: usize, starts: usize, seed: u64) -> Vec<Vec<f64>> {
    let dim = n_support - 1 + 4;
    let nuisance = [(0.003f64).ln(), (0.003f64).ln(), 2.0, 2.0];
    let z_from_probs = |probs: &[f64]| -> Vec<f64> {
        let base = probs[0].max(1e-4).ln();
        let mut x: Vec<f64> = probs[1..].iter().map(|&p| p.max(1e-4).ln() - base).collect();
        x.extend_from_slice(&nuisance);
        x
    };
    let mut points = Vec::new();
    // uniform
    points.push(z_from_probs(&vec![1.0 / n_support as f64; n_support]));
    // thermal ladders
    for nbar in [0.1f64, 0.5, 1.5] {
        let ratio = nbar / (nbar + 1.0);
        let probs: Vec<f64> = (0..n_support).map(|n| ratio.powi(n as i32)).collect();
        points.push(z_from_probs(&probs));
    }
    // single-Fock corners
    for n in 0..n_support {
        let mut probs = vec![0.01; n_support];
        probs[n] = 1.0;
        points.push(z_from_probs(&probs));
    }
    // random fills if more starts were requested
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
    use rand::Rng;
    while points.len() < starts {
        let x: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
        points.push(x);
    }
    points.truncate(starts.max(2));
    points
}

/// Maximum-likelihood reconstruction over `n_support` Fock levels from a
/// blue/red trace pair sharing one Rabi scale.
pub fn mle_fit(
    blue: &SidebandTrace,
    red: &SidebandTrace,
    n_support: usize,
    opts: &MleOptions,
) -> Result<MleFitResult> {
    mle_fit_window(blue, red, 0, n_support, opts)
}

/// Windowed variant of [`mle_fit`]: populations below `level_min` are fixed
/// at zero and excluded from the parameterization. Appropriate when the
/// physics bounds how far down the distribution can reach (a weak drive moves
/// mass only a few levels); the low-level populations are otherwise poorly
/// identified against the shared decay and contrast parameters.
pub fn mle_fit_window(
    blue: &SidebandTrace,
    red: &SidebandTrace,
    level_min: usize,
    n_support: usize,
    opts: &MleOptions,
) -> Result<MleFitResult> {
    if blue.kind != SidebandKind::Blue || red.kind != SidebandKind::Red {
        return Err(Error::Domain("expected a (blue, red) trace pair".into()));
    }
    if (blue.rabi_base_khz - red.rabi_base_khz).abs() > 1e-12 {
        return Err(Error::Domain("traces must share the Rabi scale".into()));
    }
    let window = n_support
        .checked_sub(level_min)
        .ok_or_else(|| Error::Domain("level_min must be below n_support".into()))?;
    if window < 2 || window > 12 {
        return Err(Error::Domain(format!(
            "fit window {level_min}..{n_support} out of 2..=12 levels"
        )));
    }
    if blue.shots_per_point == 0 || red.shots_per_point == 0 {
        // no data: report an explicit non-converged result
        return Ok(MleFitResult {
            dist: PhononDistribution::from_probs(vec![1.0 / n_support as f64; n_support])?,
            gamma_blue: 0.0,
            gamma_red: 0.0,
            contrast_blue: 1.0,
            contrast_red: 1.0,
            log_likelihood: f64::NEG_INFINITY,
            converged: false,
            ci: None,
        });
    }

    let blue_data = TraceData::new(blue, level_min, n_support);
    let red_data = TraceData::new(red, level_min, n_support);
    let obj = Objective {
        blue: &blue_data,
        red: &red_data,
        window,
    };
    let f = |x: &[f64]| obj.eval(x);

    let mut results: Vec<(Vec<f64>, f64)> = start_points(window, opts.starts, opts.seed)
        .iter()
        .map(|x0| local_search(&f, x0, opts.max_iters))
        .collect();
    results.sort_by(|a, b| b.1.total_cmp(&a.1)); // worst first
    let best = results.pop().unwrap();
    let runner_up = results.pop().unwrap();

    let (probs, g_b, g_r, a_b, a_r) = obj.unpack(&best.0);
    let (probs_2, ..) = obj.unpack(&runner_up.0);
    let ll_gap = (best.1 - runner_up.1).abs();
    let p_gap = probs
        .iter()
        .zip(probs_2.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let converged = ll_gap < 1e-6 && p_gap < 1e-4;

    if probs[window - 1] > opts.max_top_mass {
        return Err(Error::SupportTooSmall {
            n: n_support - 1,
            mass: probs[window - 1],
        });
    }

    let mut full = vec![0.0; level_min];
    full.extend_from_slice(&probs);
    let mut result = MleFitResult {
        dist: PhononDistribution::from_probs(full)?,
        gamma_blue: g_b,
        gamma_red: g_r,
        contrast_blue: a_b,
        contrast_red: a_r,
        log_likelihood: -best.1,
        converged,
        ci: None,
    };
    if opts.bootstrap_b > 0 {
        let samples = mle_bootstrap_samples(
            blue,
            red,
            level_min,
            n_support,
            &result,
            opts.bootstrap_b,
            opts.seed ^ 0x5bf0_3635,
            opts.max_iters / 3,
        )?;
        let mut ci = Vec::with_capacity(n_support);
        for n in 0..n_support {
            let mut vals: Vec<f64> = samples.iter().map(|s| s[n]).collect();
            vals.sort_by(f64::total_cmp);
            let lo = vals[(0.16 * (vals.len() - 1) as f64).round() as usize];
            let hi = vals[(0.84 * (vals.len() - 1) as f64).round() as usize];
            ci.push((lo, hi));
        }
        result.ci = Some(ci);
    }
    Ok(result)
}

/// Joint log-likelihood of a blue/red trace pair at explicit parameter
/// values, on the same support convention as `mle_fit`. Useful for comparing
/// a fit against a known reference point.
pub fn sideband_log_likelihood(
    blue: &SidebandTrace,
    red: &SidebandTrace,
    probs: &[f64],
    gamma_blue: f64,
    gamma_red: f64,
    contrast_blue: f64,
    contrast_red: f64,
) -> f64 {
    let blue_data = TraceData::new(blue, 0, probs.len());
    let red_data = TraceData::new(red, 0, probs.len());
    -(blue_data.neg_log_likelihood(probs, gamma_blue, contrast_blue)
        + red_data.neg_log_likelihood(probs, gamma_red, contrast_red))
}

/// Trace-resampling bootstrap, warm-started at the fitted optimum: resample
/// every point binomially, refit, and return the refitted populations.
pub fn mle_bootstrap_samples(
    blue: &SidebandTrace,
    red: &SidebandTrace,
    level_min: usize,
    n_support: usize,
    warm: &MleFitResult,
    b: usize,
    seed: u64,
    max_iters: usize,
) -> Result<Vec<Vec<f64>>> {
    let mut x_best: Vec<f64> = warm.dist.probs()[level_min + 1..]
        .iter()
        .map(|&p| p.max(1e-6).ln() - warm.dist.prob(level_min).max(1e-6).ln())
        .collect();
    x_best.push(warm.gamma_blue.max(1e-6).ln());
    x_best.push(warm.gamma_red.max(1e-6).ln());
    let logit = |a: f64| {
        let a = a.clamp(1e-6, 1.0 - 1e-6);
        (a / (1.0 - a)).ln()
    };
    x_best.push(logit(warm.contrast_blue));
    x_best.push(logit(warm.contrast_red));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples: Vec<Vec<f64>> = Vec::with_capacity(b);
    for _ in 0..b {
        let resample = |trace: &SidebandTrace, rng: &mut ChaCha8Rng| -> Result<SidebandTrace> {
            let mut out = trace.clone();
            for p in out.p_up.iter_mut() {
                let k = Binomial::new(trace.shots_per_point, p.clamp(0.0, 1.0))
                    .map_err(|e| Error::Domain(format!("bootstrap binomial: {e}")))?
                    .sample(rng);
                *p = k as f64 / trace.shots_per_point as f64;
            }
            Ok(out)
        };
        let b = resample(blue, &mut rng)?;
        let r = resample(red, &mut rng)?;
        let blue_data = TraceData::new(&b, level_min, n_support);
        let red_data = TraceData::new(&r, level_min, n_support);
        let obj = Objective {
            blue: &blue_data,
            red: &red_data,
            window: n_support - level_min,
        };
        let f = |x: &[f64]| obj.eval(x);
        let (x, _) = nelder_mead(&f, &x_best, 0.1, max_iters);
        let (probs, ..) = obj.unpack(&x);
        let mut full = vec![0.0; level_min];
        full.extend_from_slice(&probs);
        samples.push(full);
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fockspace::truncated_thermal;
    use crate::measurement::sideband::{synthesize_sideband, TraceParams};

    fn synth_pair(
        dist: &PhononDistribution,
        params: &TraceParams,
        seed: u64,
    ) -> (SidebandTrace, SidebandTrace) {
        let blue = synthesize_sideband(dist, SidebandKind::Blue, params, seed).unwrap();
        let red = synthesize_sideband(dist, SidebandKind::Red, params, seed + 1).unwrap();
        (blue, red)
    }

    #[test]
    fn single_fock_round_trip() {
        let mut probs = vec![0.0; 8];
        probs[2] = 1.0;
        let dist = PhononDistribution::from_probs(probs).unwrap();
        let mut params = TraceParams::paper_defaults();
        params.shots_per_point = 2000;
        let (blue, red) = synth_pair(&dist, &params, 21);
        let fit = mle_fit(&blue, &red, 7, &MleOptions::default()).unwrap();
        assert!(fit.dist.prob(2) > 0.98, "P_2 = {}", fit.dist.prob(2));
        assert!(fit.converged);
    }

    #[test]
    fn thermal_round_trip_at_paper_settings() {
        let dist = truncated_thermal(0.157, 7).unwrap();
        let params = TraceParams::paper_defaults();
        let (blue, red) = synth_pair(&dist, &params, 33);
        let fit = mle_fit(&blue, &red, 7, &MleOptions::default()).unwrap();
        let tv = fit.dist.total_variation(&dist);
        assert!(tv < 0.05, "TV = {tv}");
    }

    #[test]
    fn zero_shots_never_silently_converges() {
        let dist = truncated_thermal(0.157, 7).unwrap();
        let mut params = TraceParams::paper_defaults();
        params.shots_per_point = 0;
        let (blue, red) = synth_pair(&dist, &params, 5);
        let fit = mle_fit(&blue, &red, 7, &MleOptions::default()).unwrap();
        assert!(!fit.converged);
    }

    #[test]
    fn mismatched_rabi_scales_rejected() {
        let dist = truncated_thermal(0.157, 7).unwrap();
        let params = TraceParams::paper_defaults();
        let (blue, mut red) = synth_pair(&dist, &params, 6);
        red.rabi_base_khz *= 1.1;
        assert!(mle_fit(&blue, &red, 7, &MleOptions::default()).is_err());
    }
}
