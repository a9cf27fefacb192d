//! Truncated Fock-space algebra: thermal phonon distributions, effective
//! temperatures, and displacement-operator matrix elements.
//!
//! Displacement probabilities are available through two independent routes:
//! the associated-Laguerre closed form ([`displacement_elements`]) and dense
//! exponentiation of the truncated generator
//! ([`displacement_elements_bruteforce`]). They are cross-checked in tests.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const HBAR: f64 = 1.054_571_817e-34; // J s
pub const KB: f64 = 1.380_649e-23; // J/K

/// Tail mass above which a truncated thermal distribution is rejected.
pub const THERMAL_TAIL_TOL: f64 = 1e-9;
/// Column-leakage tolerance for displacement matrices (columns n <= n_trunc/2).
pub const DISPLACEMENT_LEAKAGE_TOL: f64 = 1e-6;

/// Normalized phonon-number populations over Fock levels 0..n_trunc-1.
#[derive(Debug, Clone, PartialEq)]
pub struct PhononDistribution {
    probs: Vec<f64>,
}

impl PhononDistribution {
    /// Build from raw probabilities. Entries must lie in [0, 1] up to a small
    /// numerical slop; the vector is not renormalized.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Domain("empty distribution".into()));
        }
        for (n, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < -1e-12 || p > 1.0 + 1e-12 {
                return Err(Error::Domain(format!("P_{n} = {p} out of [0, 1]")));
            }
        }
        let probs = probs.iter().map(|&p| p.max(0.0)).collect();
        Ok(Self { probs })
    }

    pub fn ground(n_trunc: usize) -> Self {
        let mut probs = vec![0.0; n_trunc];
        probs[0] = 1.0;
        Self { probs }
    }

    pub fn n_trunc(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, n: usize) -> f64 {
        self.probs.get(n).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Mean phonon number ⟨n⟩.
    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(n, &p)| n as f64 * p)
            .sum()
    }

    pub fn total_variation(&self, other: &Self) -> f64 {
        let len = self.probs.len().max(other.probs.len());
        0.5 * (0..len)
            .map(|n| (self.prob(n) - other.prob(n)).abs())
            .sum::<f64>()
    }

    /// Renormalize in place; returns the mass that was missing (or excess).
    pub fn renormalize(&mut self) -> f64 {
        let total = self.total();
        let defect = 1.0 - total;
        if total > 0.0 {
            for p in &mut self.probs {
                *p /= total;
            }
        }
        defect
    }
}

/// Consistent description of a thermal state: ⟨n⟩, dimensionless inverse
/// temperature βℏν, and the effective temperature in nanokelvin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalParams {
    pub nbar: f64,
    pub beta_hnu: f64,
    pub t_eff_nk: f64,
    pub nu_hz: f64,
}

/// T_eff = ℏν / [k_B ln(1 + 1/⟨n⟩)], reported in nK.
pub fn effective_temperature(nbar: f64, nu_hz: f64) -> Result<ThermalParams> {
    if !(nbar > 0.0) || !nbar.is_finite() {
        return Err(Error::Domain(format!("nbar = {nbar} must be > 0")));
    }
    if !(nu_hz > 0.0) {
        return Err(Error::Domain(format!("nu_hz = {nu_hz} must be > 0")));
    }
    let beta_hnu = (1.0 + 1.0 / nbar).ln();
    let t_eff_k = HBAR * std::f64::consts::TAU * nu_hz / (KB * beta_hnu);
    Ok(ThermalParams {
        nbar,
        beta_hnu,
        t_eff_nk: t_eff_k * 1e9,
        nu_hz,
    })
}

impl ThermalParams {
    /// Inverse of the βℏν map: ⟨n⟩ = 1/(e^{βℏν} − 1).
    pub fn nbar_from_beta(beta_hnu: f64) -> f64 {
        1.0 / (beta_hnu.exp() - 1.0)
    }
}

/// P_n = ⟨n⟩^n / (⟨n⟩+1)^{n+1}, renormalized over the truncated space.
///
/// Fails if the truncated tail mass is not negligible.
pub fn thermal_distribution(nbar: f64, n_trunc: usize) -> Result<PhononDistribution> {
    if n_trunc == 0 {
        return Err(Error::Domain("n_trunc must be >= 1".into()));
    }
    if !(nbar >= 0.0) || !nbar.is_finite() {
        return Err(Error::Domain(format!("nbar = {nbar} must be >= 0")));
    }
    if nbar == 0.0 {
        return Ok(PhononDistribution::ground(n_trunc));
    }
    let ratio = nbar / (nbar + 1.0);
    // tail mass of the geometric distribution beyond n_trunc levels
    let tail = ratio.powi(n_trunc as i32);
    if tail >= THERMAL_TAIL_TOL {
        return Err(Error::TruncationInsufficient {
            context: format!("thermal state nbar = {nbar} at n_trunc = {n_trunc}"),
            leakage: tail,
            tol: THERMAL_TAIL_TOL,
        });
    }
    let mut probs = Vec::with_capacity(n_trunc);
    let mut p = 1.0 / (nbar + 1.0);
    for _ in 0..n_trunc {
        probs.push(p);
        p *= ratio;
    }
    let mut dist = PhononDistribution { probs };
    dist.renormalize();
    Ok(dist)
}

/// Thermal weights renormalized onto a short, apparatus-limited support
/// (detection iterations, MLE fit levels). Unlike [`thermal_distribution`]
/// this never rejects on tail mass; the caller owns the truncation bias.
pub fn truncated_thermal(nbar: f64, n_levels: usize) -> Result<PhononDistribution> {
    if n_levels == 0 {
        return Err(Error::Domain("n_levels must be >= 1".into()));
    }
    if !(nbar >= 0.0) || !nbar.is_finite() {
        return Err(Error::Domain(format!("nbar = {nbar} must be >= 0")));
    }
    if nbar == 0.0 {
        return Ok(PhononDistribution::ground(n_levels));
    }
    let ratio = nbar / (nbar + 1.0);
    let mut probs = Vec::with_capacity(n_levels);
    let mut p = 1.0 / (nbar + 1.0);
    for _ in 0..n_levels {
        probs.push(p);
        p *= ratio;
    }
    let mut dist = PhononDistribution { probs };
    dist.renormalize();
    Ok(dist)
}

/// Probabilities |⟨m|D(α)|n⟩|² for the coherent displacement D(α). Only |α|
/// enters; phases drop out of the moduli.
#[derive(Debug, Clone)]
pub struct DisplacementElements {
    pub alpha_abs: f64,
    matrix: DMatrix<f64>,
    leakage: Vec<f64>,
}

impl DisplacementElements {
    pub fn n_trunc(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn prob(&self, m: usize, n: usize) -> f64 {
        self.matrix[(m, n)]
    }

    /// 1 − (column sum) for each initial level n.
    pub fn leakage(&self) -> &[f64] {
        &self.leakage
    }

    fn from_matrix(alpha_abs: f64, matrix: DMatrix<f64>) -> Result<Self> {
        let n_trunc = matrix.ncols();
        let leakage: Vec<f64> = (0..n_trunc)
            .map(|n| 1.0 - matrix.column(n).sum())
            .collect();
        for (n, &l) in leakage.iter().enumerate().take(n_trunc / 2 + 1) {
            if l > DISPLACEMENT_LEAKAGE_TOL {
                return Err(Error::TruncationInsufficient {
                    context: format!(
                        "displacement |alpha| = {alpha_abs}, column {n} of {n_trunc}"
                    ),
                    leakage: l,
                    tol: DISPLACEMENT_LEAKAGE_TOL,
                });
            }
        }
        Ok(Self {
            alpha_abs,
            matrix,
            leakage,
        })
    }
}

fn ln_factorials(len: usize) -> Vec<f64> {
    let mut lf = vec![0.0; len];
    for n in 1..len {
        lf[n] = lf[n - 1] + (n as f64).ln();
    }
    lf
}

/// Closed-form route: |⟨m|D(α)|n⟩|² = (n!/m!) x^{m−n} e^{−x} [L_n^{m−n}(x)]²
/// for m ≥ n with x = |α|², extended symmetrically. Laguerre values come from
/// the stable upward recurrence in n; prefactors live in log space.
pub fn displacement_elements(alpha_abs: f64, n_trunc: usize) -> Result<DisplacementElements> {
    if n_trunc == 0 {
        return Err(Error::Domain("n_trunc must be >= 1".into()));
    }
    if !(alpha_abs >= 0.0) || !alpha_abs.is_finite() {
        return Err(Error::Domain(format!("alpha_abs = {alpha_abs} must be >= 0")));
    }
    let x = alpha_abs * alpha_abs;
    if x == 0.0 {
        return DisplacementElements::from_matrix(0.0, DMatrix::identity(n_trunc, n_trunc));
    }
    let lf = ln_factorials(n_trunc);
    let mut matrix = DMatrix::zeros(n_trunc, n_trunc);
    let ln_x = x.ln();
    for k in 0..n_trunc {
        // L_n^k(x) for n = 0..; entry (m, n) with m = n + k
        let mut l_prev = 0.0_f64;
        let mut l_cur = 1.0_f64;
        for n in 0..n_trunc - k {
            let m = n + k;
            let ln_pref = lf[n] - lf[m] + k as f64 * ln_x - x;
            let p = if l_cur == 0.0 {
                0.0
            } else {
                (ln_pref + 2.0 * l_cur.abs().ln()).exp()
            };
            matrix[(m, n)] = p;
            matrix[(n, m)] = p;
            // upward recurrence in degree n
            let nf = n as f64;
            let l_next =
                ((2.0 * nf + 1.0 + k as f64 - x) * l_cur - (nf + k as f64) * l_prev) / (nf + 1.0);
            l_prev = l_cur;
            l_cur = l_next;
        }
    }
    DisplacementElements::from_matrix(alpha_abs, matrix)
}

/// Independent oracle: dense exponentiation of the truncated anti-Hermitian
/// generator α(a† − a) by scaling and squaring, probabilities as squared
/// entries of the resulting (nearly orthogonal) matrix.
pub fn displacement_elements_bruteforce(
    alpha_abs: f64,
    n_trunc: usize,
) -> Result<DisplacementElements> {
    let amps = displacement_amplitudes(alpha_abs, n_trunc)?;
    let matrix = amps.map(|a| a * a);
    DisplacementElements::from_matrix(alpha_abs, matrix)
}

/// Real amplitude matrix ⟨m|D(α)|n⟩ for real α, from the matrix exponential
/// of the truncated generator. Orthogonal up to truncation.
pub fn displacement_amplitudes(alpha: f64, n_trunc: usize) -> Result<DMatrix<f64>> {
    if n_trunc == 0 {
        return Err(Error::Domain("n_trunc must be >= 1".into()));
    }
    if !alpha.is_finite() {
        return Err(Error::Domain("alpha must be finite".into()));
    }
    // generator alpha (a† − a): antisymmetric tridiagonal
    let mut gen = DMatrix::zeros(n_trunc, n_trunc);
    for n in 0..n_trunc - 1 {
        let c = alpha * ((n + 1) as f64).sqrt();
        gen[(n + 1, n)] = c;
        gen[(n, n + 1)] = -c;
    }
    Ok(expm_real(&gen))
}

/// Matrix exponential by scaling and squaring with a Taylor core.
fn expm_real(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a.abs().column_sum().max();
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a / 2f64.powi(s as i32);
    let mut result = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..=30 {
        term = (&term * &scaled) / k as f64;
        let tnorm = term.abs().max();
        result += &term;
        if tnorm < 1e-18 {
            break;
        }
    }
    for _ in 0..s {
        result = &result * &result;
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn thermal_ground_state() {
        let d = thermal_distribution(0.0, 16).unwrap();
        assert_eq!(d.prob(0), 1.0);
        assert_eq!(d.total(), 1.0);
        assert_eq!(d.mean(), 0.0);
    }

    #[test]
    fn thermal_paper_nbar() {
        // direct evaluation of P_n = nbar^n/(nbar+1)^{n+1} at nbar = 0.157
        let d = thermal_distribution(0.157, 64).unwrap();
        assert_abs_diff_eq!(d.prob(0), 0.157f64.powi(0) / 1.157, epsilon = 1e-9);
        assert_abs_diff_eq!(d.prob(0), 0.86430, epsilon = 5e-6);
        assert_abs_diff_eq!(d.prob(1), 0.157 / 1.157f64.powi(2), epsilon = 1e-9);
        assert_abs_diff_eq!(d.prob(1), 0.11729, epsilon = 1e-5);
        assert_abs_diff_eq!(d.total(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.mean(), 0.157, epsilon = 1e-7);
    }

    #[test]
    fn thermal_truncation_guard() {
        let err = thermal_distribution(5.0, 4).unwrap_err();
        assert!(matches!(err, Error::TruncationInsufficient { .. }));
    }

    #[test]
    fn beta_round_trip() {
        // oracle: solve P_1/P_0 = e^{−βℏν} numerically from the distribution
        let d = thermal_distribution(0.051, 64).unwrap();
        let beta_from_ratio = -(d.prob(1) / d.prob(0)).ln();
        let tp = effective_temperature(0.051, 20_000.0).unwrap();
        assert_abs_diff_eq!(tp.beta_hnu, beta_from_ratio, epsilon = 1e-12);
        assert_abs_diff_eq!(tp.beta_hnu, 3.0256, epsilon = 1e-4);
        assert_abs_diff_eq!(ThermalParams::nbar_from_beta(tp.beta_hnu), 0.051, epsilon = 1e-12);
    }

    #[test]
    fn paper_temperatures() {
        for (nbar, t_nk, tol) in [(0.157, 480.0, 8.0), (0.051, 316.0, 4.0), (0.094, 390.0, 6.0)] {
            let tp = effective_temperature(nbar, 20_000.0).unwrap();
            assert!(
                (tp.t_eff_nk - t_nk).abs() < tol,
                "nbar {nbar}: {} vs {t_nk}",
                tp.t_eff_nk
            );
        }
    }

    #[test]
    fn temperature_domain_errors() {
        assert!(effective_temperature(0.0, 20_000.0).is_err());
        assert!(effective_temperature(-0.1, 20_000.0).is_err());
    }

    #[test]
    fn displacement_identity_at_zero() {
        let d = displacement_elements(0.0, 8).unwrap();
        let b = displacement_elements_bruteforce(0.0, 8).unwrap();
        for m in 0..8 {
            for n in 0..8 {
                let expect = if m == n { 1.0 } else { 0.0 };
                assert_eq!(d.prob(m, n), expect);
                assert_abs_diff_eq!(b.prob(m, n), expect, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn displacement_unit_alpha_elements() {
        let d = displacement_elements(1.0, 64).unwrap();
        assert_abs_diff_eq!(d.prob(0, 0), (-1.0f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(d.prob(1, 0), (-1.0f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(d.prob(0, 0), 0.367879, epsilon = 1e-6);
    }

    #[test]
    fn laguerre_vs_bruteforce() {
        let a = displacement_elements(0.9317, 64).unwrap();
        let b = displacement_elements_bruteforce(0.9317, 64).unwrap();
        for m in 0..=10 {
            for n in 0..=10 {
                assert_abs_diff_eq!(a.prob(m, n), b.prob(m, n), epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn bruteforce_truncation_convergence() {
        let small = displacement_elements_bruteforce(2.0, 32).unwrap();
        let large = displacement_elements_bruteforce(2.0, 128).unwrap();
        for m in 0..=10 {
            for n in 0..=10 {
                assert_abs_diff_eq!(small.prob(m, n), large.prob(m, n), epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn column_stochastic_and_mean_shift() {
        let d = displacement_elements(1.3, 128).unwrap();
        let x = 1.3f64 * 1.3;
        for n in 0..=40 {
            let col_sum: f64 = (0..128).map(|m| d.prob(m, n)).sum();
            assert_abs_diff_eq!(col_sum, 1.0, epsilon = 1e-8);
            let mean: f64 = (0..128).map(|m| m as f64 * d.prob(m, n)).sum();
            assert_abs_diff_eq!(mean - n as f64, x, epsilon = 1e-8);
        }
    }

    #[test]
    fn displacement_symmetry() {
        let d = displacement_elements(0.7, 32).unwrap();
        for m in 0..32 {
            for n in 0..32 {
                assert_eq!(d.prob(m, n), d.prob(n, m));
            }
        }
    }

    proptest! {
        #[test]
        fn thermal_is_geometric(nbar in 0.01f64..2.0) {
            let d = thermal_distribution(nbar, 128).unwrap();
            let ratio = nbar / (nbar + 1.0);
            for n in 0..20 {
                prop_assert!((d.prob(n + 1) / d.prob(n) - ratio).abs() < 1e-12);
            }
        }

        #[test]
        fn temperature_round_trip(nbar in 1e-3f64..10.0) {
            let tp = effective_temperature(nbar, 20_000.0).unwrap();
            let back = ThermalParams::nbar_from_beta(tp.beta_hnu);
            prop_assert!((back - nbar).abs() < 1e-12 * nbar.max(1.0));
        }
    }
}
