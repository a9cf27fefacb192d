//! Two-point-measurement work statistics: the work distribution over integer
//! quantum jumps Δn, the three free-energy estimators, and finite-shot
//! emulation with bootstrap error bars.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::dynamics::TransitionMatrix;
use crate::error::{Error, Result};
use crate::fockspace::{PhononDistribution, ThermalParams};

/// Bootstrap resample count for finite-shot error bars.
pub const BOOTSTRAP_B: usize = 1000;

/// Probabilities over integer quantum jumps Δn. Dissipated work per outcome
/// is ℏν·Δn; in units of k_BT it is βℏν·Δn.
#[derive(Debug, Clone)]
pub struct WorkDistribution {
    probs: BTreeMap<i64, f64>,
    pub beta_hnu: f64,
    pub delta_f_over_hnu: f64,
}

impl WorkDistribution {
    pub fn probs(&self) -> &BTreeMap<i64, f64> {
        &self.probs
    }

    pub fn prob(&self, delta_n: i64) -> f64 {
        self.probs.get(&delta_n).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }

    /// Raw moments of Δn.
    fn delta_n_moments(&self) -> (f64, f64, f64, f64) {
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        let mut m3 = 0.0;
        let mut m4 = 0.0;
        for (&dn, &p) in &self.probs {
            let x = dn as f64;
            m1 += p * x;
            m2 += p * x * x;
            m3 += p * x * x * x;
            m4 += p * x * x * x * x;
        }
        (m1, m2, m3, m4)
    }

    pub fn to_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "delta_n,probability")?;
        for (&dn, &p) in &self.probs {
            writeln!(w, "{dn},{p:.17e}")?;
        }
        Ok(())
    }
}

/// P(Δn) = Σ_n P_n^th · P_{(n+Δn)←n}.
///
/// `support_cutoff` optionally drops initial and final levels above the given
/// index (the experiment's "high phonon states not included" mode); the
/// restricted distribution is renormalized.
pub fn work_distribution_cutoff(
    initial: &PhononDistribution,
    transitions: &TransitionMatrix,
    thermal: &ThermalParams,
    delta_f_over_hnu: f64,
    support_cutoff: Option<usize>,
) -> Result<WorkDistribution> {
    let n_trunc = transitions.n_trunc();
    if initial.n_trunc() > n_trunc {
        return Err(Error::Domain(format!(
            "initial distribution ({}) larger than transition matrix ({})",
            initial.n_trunc(),
            n_trunc
        )));
    }
    let n_max = support_cutoff.unwrap_or(n_trunc - 1).min(n_trunc - 1);
    let mut probs: BTreeMap<i64, f64> = BTreeMap::new();
    for n in 0..=n_max.min(initial.n_trunc() - 1) {
        let pn = initial.prob(n);
        if pn == 0.0 {
            continue;
        }
        for m in 0..=n_max {
            let p = pn * transitions.prob(m, n);
            if p > 0.0 {
                *probs.entry(m as i64 - n as i64).or_insert(0.0) += p;
            }
        }
    }
    if support_cutoff.is_some() {
        let total: f64 = probs.values().sum();
        for p in probs.values_mut() {
            *p /= total;
        }
    }
    Ok(WorkDistribution {
        probs,
        beta_hnu: thermal.beta_hnu,
        delta_f_over_hnu,
    })
}

pub fn work_distribution(
    initial: &PhononDistribution,
    transitions: &TransitionMatrix,
    thermal: &ThermalParams,
    delta_f_over_hnu: f64,
) -> Result<WorkDistribution> {
    work_distribution_cutoff(initial, transitions, thermal, delta_f_over_hnu, None)
}

/// Bootstrap standard deviations, one per estimator.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EstimatorErrors {
    pub jarzynski: f64,
    pub fdt: f64,
    pub mean_work: f64,
}

/// The three free-energy estimators, in units of k_BT_eff.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EstimatorReport {
    /// −ln ⟨e^{−W_diss/k_BT}⟩; zero when the Jarzynski identity holds.
    pub jarzynski: f64,
    /// ⟨w⟩ − σ²/2 with w = W_diss/k_BT.
    pub fdt: f64,
    /// ⟨w⟩.
    pub mean_work: f64,
    pub errors: Option<EstimatorErrors>,
    /// None in exact mode.
    pub shots: Option<u64>,
}

fn estimators_from_probs(probs: &BTreeMap<i64, f64>, beta: f64) -> EstimatorReport {
    // −ln Σ P(Δn) e^{−βΔn}, guarded against overflow via log-sum-exp
    let mut max_log = f64::NEG_INFINITY;
    let logs: Vec<f64> = probs
        .iter()
        .filter(|(_, &p)| p > 0.0)
        .map(|(&dn, &p)| {
            let l = p.ln() - beta * dn as f64;
            max_log = max_log.max(l);
            l
        })
        .collect();
    let jarzynski = -(max_log + logs.iter().map(|l| (l - max_log).exp()).sum::<f64>().ln());

    let mut m1 = 0.0;
    let mut m2 = 0.0;
    for (&dn, &p) in probs {
        let x = dn as f64;
        m1 += p * x;
        m2 += p * x * x;
    }
    let mean_work = beta * m1;
    let var = beta * beta * (m2 - m1 * m1);
    EstimatorReport {
        jarzynski,
        fdt: mean_work - 0.5 * var,
        mean_work,
        errors: None,
        shots: None,
    }
}

/// Exact-mode estimators from the full truncated support.
pub fn estimators_exact(dist: &WorkDistribution) -> EstimatorReport {
    estimators_from_probs(&dist.probs, dist.beta_hnu)
}

/// Standardized third and fourth central moments of w = βℏν·Δn (scale-free,
/// so identical to those of Δn).
pub fn gaussianity_metrics(dist: &WorkDistribution) -> Result<(f64, f64)> {
    let (m1, m2, m3, m4) = dist.delta_n_moments();
    let var = m2 - m1 * m1;
    if var < 1e-12 {
        return Err(Error::ZeroVariance);
    }
    let mu3 = m3 - 3.0 * m1 * m2 + 2.0 * m1.powi(3);
    let mu4 = m4 - 4.0 * m1 * m3 + 6.0 * m1 * m1 * m2 - 3.0 * m1.powi(4);
    Ok((mu3 / var.powf(1.5), mu4 / (var * var) - 3.0))
}

fn cdf(probs: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    probs
        .iter()
        .map(|&p| {
            acc += p;
            acc
        })
        .collect()
}

fn draw(cdf: &[f64], u: f64) -> usize {
    cdf.partition_point(|&c| c < u).min(cdf.len() - 1)
}

/// Finite-shot emulation of the two-point-measurement protocol: sample the
/// initial level, then the final level from the transition column, and build
/// the estimators from the empirical Δn counts. Bootstrap (B = 1000) standard
/// deviations are attached. Deterministic for a given seed.
pub fn tpm_sample(
    initial: &PhononDistribution,
    transitions: &TransitionMatrix,
    thermal: &ThermalParams,
    shots: u64,
    seed: u64,
) -> Result<EstimatorReport> {
    if shots == 0 {
        return Err(Error::Domain("shots must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_trunc = transitions.n_trunc();
    let init_cdf = cdf(initial.probs());
    let mut col_cdfs: Vec<Option<Vec<f64>>> = vec![None; n_trunc];
    let mut counts: BTreeMap<i64, u64> = BTreeMap::new();
    for _ in 0..shots {
        let n = draw(&init_cdf, rng.gen::<f64>());
        let col = col_cdfs[n].get_or_insert_with(|| {
            let probs: Vec<f64> = (0..n_trunc).map(|m| transitions.prob(m, n)).collect();
            cdf(&probs)
        });
        let m = draw(col, rng.gen::<f64>());
        *counts.entry(m as i64 - n as i64).or_insert(0) += 1;
    }

    let beta = thermal.beta_hnu;
    let to_probs = |counts: &BTreeMap<i64, u64>, total: u64| {
        counts
            .iter()
            .map(|(&dn, &c)| (dn, c as f64 / total as f64))
            .collect::<BTreeMap<i64, f64>>()
    };
    let mut report = estimators_from_probs(&to_probs(&counts, shots), beta);

    // multinomial bootstrap over the empirical counts
    let support: Vec<i64> = counts.keys().copied().collect();
    let emp: Vec<f64> = support
        .iter()
        .map(|dn| counts[dn] as f64 / shots as f64)
        .collect();
    let mut jz = Vec::with_capacity(BOOTSTRAP_B);
    let mut fd = Vec::with_capacity(BOOTSTRAP_B);
    let mut mw = Vec::with_capacity(BOOTSTRAP_B);
    for _ in 0..BOOTSTRAP_B {
        let mut remaining = shots;
        let mut rem_p = 1.0;
        let mut resampled: BTreeMap<i64, u64> = BTreeMap::new();
        for (i, &dn) in support.iter().enumerate() {
            if remaining == 0 {
                break;
            }
            let c = if i + 1 == support.len() {
                remaining
            } else {
                let p = (emp[i] / rem_p).clamp(0.0, 1.0);
                Binomial::new(remaining, p)
                    .map_err(|e| Error::Domain(format!("bootstrap binomial: {e}")))?
                    .sample(&mut rng)
            };
            if c > 0 {
                resampled.insert(dn, c);
            }
            remaining -= c;
            rem_p -= emp[i];
        }
        let rep = estimators_from_probs(&to_probs(&resampled, shots), beta);
        jz.push(rep.jarzynski);
        fd.push(rep.fdt);
        mw.push(rep.mean_work);
    }
    let std = |v: &[f64]| {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
    };
    report.errors = Some(EstimatorErrors {
        jarzynski: std(&jz),
        fdt: std(&fd),
        mean_work: std(&mw),
    });
    report.shots = Some(shots);
    Ok(report)
}
