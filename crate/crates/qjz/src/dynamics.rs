//! Driven-oscillator propagation in the truncated Fock basis.
//!
//! Two routes to the ramp transition matrix P_{m←n}:
//! * analytic: closed-form residual displacement amplitude plus the
//!   Laguerre displacement probabilities,
//! * numeric: step-wise Magnus propagation of h(θ) = a†a + λ(θ)(a + a†)
//!   followed by projection onto the displaced final eigenbasis.
//!
//! Units are dimensionless throughout: energies in ℏν, time as θ = νt.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fockspace::{
    displacement_amplitudes, displacement_elements, PhononDistribution,
};

/// Leakage tolerance for low-index transition-matrix columns.
pub const COLUMN_LEAKAGE_TOL: f64 = 1e-6;
/// Max element change allowed when halving the integrator step.
pub const STEP_HALVING_TOL: f64 = 1e-8;
/// Allowed population in the top decile of levels for trusted columns.
pub const TOP_DECILE_TOL: f64 = 1e-7;
/// Unitarity defect bound on the low-index block of the propagator.
pub const UNITARITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum RampShape {
    /// λ(θ) = d·θ/Θ
    Linear,
    /// Piecewise-linear λ(θ) from tabulated (θ, λ) points.
    Tabulated(Vec<(f64, f64)>),
}

/// Dimensionless drive schedule λ(θ) with peak d and duration Θ = ντ.
#[derive(Debug, Clone, PartialEq)]
pub struct RampProtocol {
    pub shape: RampShape,
    pub d: f64,
    pub theta_total: f64,
    pub nu_hz: f64,
}

/// Θ = ν·τ with ν = 2π·nu_hz.
pub fn theta_from_tau_us(tau_us: f64, nu_hz: f64) -> f64 {
    std::f64::consts::TAU * nu_hz * tau_us * 1e-6
}

impl RampProtocol {
    pub fn linear(d: f64, theta_total: f64, nu_hz: f64) -> Result<Self> {
        if !(d >= 0.0) || !(theta_total > 0.0) || !(nu_hz > 0.0) {
            return Err(Error::Domain(format!(
                "invalid protocol: d = {d}, theta_total = {theta_total}, nu_hz = {nu_hz}"
            )));
        }
        Ok(Self {
            shape: RampShape::Linear,
            d,
            theta_total,
            nu_hz,
        })
    }

    pub fn linear_tau_us(d: f64, tau_us: f64, nu_hz: f64) -> Result<Self> {
        Self::linear(d, theta_from_tau_us(tau_us, nu_hz), nu_hz)
    }

    /// Tabulated λ(θ); requires strictly increasing θ starting at 0 with
    /// λ(0) = 0. The final (θ, λ) sets Θ and d.
    pub fn tabulated(points: Vec<(f64, f64)>, nu_hz: f64) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::QuadratureFailure("need at least 2 table points".into()));
        }
        if points[0].0 != 0.0 || points[0].1 != 0.0 {
            return Err(Error::QuadratureFailure(
                "tabulated ramp must start at (0, 0)".into(),
            ));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::QuadratureFailure(
                    "tabulated theta must be strictly increasing".into(),
                ));
            }
        }
        let (theta_total, d) = *points.last().unwrap();
        if !(d >= 0.0) || !(nu_hz > 0.0) {
            return Err(Error::Domain("invalid tabulated protocol".into()));
        }
        Ok(Self {
            shape: RampShape::Tabulated(points),
            d,
            theta_total,
            nu_hz,
        })
    }

    /// Parse two-column text (θ λ per line, `#` comments).
    pub fn from_table_text(text: &str, nu_hz: f64) -> Result<Self> {
        let mut points = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let theta: f64 = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Config(format!("ramp table line {}: bad theta", i + 1)))?;
            let lambda: f64 = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Config(format!("ramp table line {}: bad lambda", i + 1)))?;
            points.push((theta, lambda));
        }
        Self::tabulated(points, nu_hz)
    }

    pub fn lambda(&self, theta: f64) -> f64 {
        match &self.shape {
            RampShape::Linear => self.d * (theta / self.theta_total).clamp(0.0, 1.0),
            RampShape::Tabulated(points) => {
                if theta <= points[0].0 {
                    return points[0].1;
                }
                if theta >= points[points.len() - 1].0 {
                    return points[points.len() - 1].1;
                }
                let idx = points.partition_point(|p| p.0 <= theta);
                let (t0, l0) = points[idx - 1];
                let (t1, l1) = points[idx];
                l0 + (l1 - l0) * (theta - t0) / (t1 - t0)
            }
        }
    }

    pub fn tau_us(&self) -> f64 {
        self.theta_total / (std::f64::consts::TAU * self.nu_hz) * 1e6
    }
}

/// |α_res| = |∫₀^Θ λ′(θ) e^{iθ} dθ|; for the Linear shape this is
/// 2d·|sin(Θ/2)|/Θ. Piecewise-linear tables integrate segment-exactly.
pub fn residual_amplitude(protocol: &RampProtocol) -> Result<f64> {
    let theta = protocol.theta_total;
    match &protocol.shape {
        RampShape::Linear => Ok(2.0 * protocol.d * (theta / 2.0).sin().abs() / theta),
        RampShape::Tabulated(points) => {
            // λ' constant per segment: ∫ c e^{iθ} dθ = c (e^{iθ1} − e^{iθ0}) / i
            let mut acc = C64::new(0.0, 0.0);
            for w in points.windows(2) {
                let (t0, l0) = w[0];
                let (t1, l1) = w[1];
                let slope = (l1 - l0) / (t1 - t0);
                let seg = (C64::new(0.0, t1).exp() - C64::new(0.0, t0).exp()) / C64::new(0.0, 1.0);
                acc += slope * seg;
            }
            Ok(acc.norm())
        }
    }
}

/// Conditional probabilities P_{m←n} after the ramp, between the initial and
/// final (displaced) eigenbases.
#[derive(Debug, Clone)]
pub struct TransitionMatrix {
    probs: DMatrix<f64>,
    pub alpha_res_abs: f64,
    leakage: Vec<f64>,
    /// max |(U†U − I)| on the low-index block; numeric route only.
    pub unitarity_defect: Option<f64>,
}

impl TransitionMatrix {
    pub fn identity(n_trunc: usize) -> Self {
        Self {
            probs: DMatrix::identity(n_trunc, n_trunc),
            alpha_res_abs: 0.0,
            leakage: vec![0.0; n_trunc],
            unitarity_defect: None,
        }
    }

    pub(crate) fn from_probs(
        probs: DMatrix<f64>,
        alpha_res_abs: f64,
        defect: Option<f64>,
    ) -> Result<Self> {
        let n = probs.ncols();
        let leakage: Vec<f64> = (0..n).map(|c| 1.0 - probs.column(c).sum()).collect();
        for (c, &l) in leakage.iter().enumerate().take(9.min(n)) {
            if l > COLUMN_LEAKAGE_TOL {
                return Err(Error::TruncationInsufficient {
                    context: format!("transition matrix column {c}"),
                    leakage: l,
                    tol: COLUMN_LEAKAGE_TOL,
                });
            }
        }
        Ok(Self {
            probs,
            alpha_res_abs,
            leakage,
            unitarity_defect: defect,
        })
    }

    pub fn n_trunc(&self) -> usize {
        self.probs.ncols()
    }

    pub fn prob(&self, m: usize, n: usize) -> f64 {
        self.probs[(m, n)]
    }

    pub fn probs(&self) -> &DMatrix<f64> {
        &self.probs
    }

    pub fn leakage(&self) -> &[f64] {
        &self.leakage
    }

    /// Largest |Δ| over a low-index block of columns/rows.
    pub fn max_block_diff(&self, other: &Self, block: usize) -> f64 {
        let mut max = 0.0f64;
        for n in 0..block.min(self.n_trunc()).min(other.n_trunc()) {
            for m in 0..self.n_trunc().min(other.n_trunc()) {
                max = max.max((self.prob(m, n) - other.prob(m, n)).abs());
            }
        }
        max
    }
}

/// P_{m←n} = |⟨m|D(α_res)|n⟩|² with α_res from the closed form.
pub fn transition_matrix_analytic(
    protocol: &RampProtocol,
    n_trunc: usize,
) -> Result<TransitionMatrix> {
    let alpha = residual_amplitude(protocol)?;
    let elems = displacement_elements(alpha, n_trunc)?;
    TransitionMatrix::from_probs(elems.matrix().clone(), alpha, None)
}

// Tridiagonal complex operator; enough for the Magnus generator of
// h(θ) = a†a + λ(a + a†) plus its commutator correction.
struct TriDiag {
    diag: Vec<C64>,
    sub: Vec<C64>, // (m+1, m)
    sup: Vec<C64>, // (m, m+1)
}

impl TriDiag {
    fn matvec(&self, v: &[C64], out: &mut [C64]) {
        let n = v.len();
        for m in 0..n {
            let mut acc = self.diag[m] * v[m];
            if m > 0 {
                acc += self.sub[m - 1] * v[m - 1];
            }
            if m + 1 < n {
                acc += self.sup[m] * v[m + 1];
            }
            out[m] = acc;
        }
    }

    fn inf_norm(&self) -> f64 {
        let n = self.diag.len();
        (0..n)
            .map(|m| {
                self.diag[m].norm()
                    + if m > 0 { self.sub[m - 1].norm() } else { 0.0 }
                    + if m + 1 < n { self.sup[m].norm() } else { 0.0 }
            })
            .fold(0.0, f64::max)
    }

    /// v ← exp(T) v via scaled Taylor action; exact to machine precision.
    fn exp_apply(&self, v: &mut Vec<C64>, scratch: &mut (Vec<C64>, Vec<C64>)) {
        let norm = self.inf_norm();
        let reps = (norm / 0.5).ceil().max(1.0) as usize;
        let inv = 1.0 / reps as f64;
        let (term, tmp) = scratch;
        for _ in 0..reps {
            term.copy_from_slice(v);
            for k in 1..=24 {
                self.matvec(term, tmp);
                let scale = inv / k as f64;
                let mut tnorm = 0.0f64;
                for (t, s) in term.iter_mut().zip(tmp.iter()) {
                    *t = s * scale;
                    tnorm = tnorm.max(t.norm());
                }
                for (vi, ti) in v.iter_mut().zip(term.iter()) {
                    *vi += ti;
                }
                if tnorm < 1e-19 {
                    break;
                }
            }
        }
    }
}

/// Fourth-order Magnus generator for one step over [θ0, θ0 + dθ].
fn magnus_step(protocol: &RampProtocol, theta0: f64, dtheta: f64, n_trunc: usize) -> TriDiag {
    let c1 = theta0 + dtheta * (0.5 - 3f64.sqrt() / 6.0);
    let c2 = theta0 + dtheta * (0.5 + 3f64.sqrt() / 6.0);
    let l1 = protocol.lambda(c1);
    let l2 = protocol.lambda(c2);
    let lbar = 0.5 * (l1 + l2);
    // Ω = −i dθ (N + λ̄ X) + (√3 dθ²/12)(λ2 − λ1)(a† − a)
    let comm = 3f64.sqrt() * dtheta * dtheta / 12.0 * (l2 - l1);
    let mut diag = Vec::with_capacity(n_trunc);
    let mut sub = Vec::with_capacity(n_trunc - 1);
    let mut sup = Vec::with_capacity(n_trunc - 1);
    for m in 0..n_trunc {
        diag.push(C64::new(0.0, -dtheta * m as f64));
        if m + 1 < n_trunc {
            let root = ((m + 1) as f64).sqrt();
            sub.push(C64::new(comm * root, -dtheta * lbar * root));
            sup.push(C64::new(-comm * root, -dtheta * lbar * root));
        }
    }
    TriDiag { diag, sub, sup }
}

/// Independent numerical oracle: propagate the truncated Schrödinger equation
/// step-wise and project the final columns onto the displaced eigenbasis
/// |m(Θ)⟩ = D(−d)|m⟩.
pub fn transition_matrix_numeric(
    protocol: &RampProtocol,
    n_trunc: usize,
    steps: usize,
) -> Result<TransitionMatrix> {
    if steps == 0 {
        return Err(Error::Domain("steps must be >= 1".into()));
    }
    let alpha = residual_amplitude(protocol)?;
    let dtheta = protocol.theta_total / steps as f64;

    // columns of the accumulated propagator, started from the identity
    let mut cols: Vec<Vec<C64>> = (0..n_trunc)
        .map(|n| {
            let mut v = vec![C64::new(0.0, 0.0); n_trunc];
            v[n] = C64::new(1.0, 0.0);
            v
        })
        .collect();
    let mut scratch = (
        vec![C64::new(0.0, 0.0); n_trunc],
        vec![C64::new(0.0, 0.0); n_trunc],
    );
    for step in 0..steps {
        let omega = magnus_step(protocol, step as f64 * dtheta, dtheta, n_trunc);
        for col in cols.iter_mut() {
            omega.exp_apply(col, &mut scratch);
        }
    }

    // unitarity defect on the low-index block
    let block = 16.min(n_trunc);
    let mut defect = 0.0f64;
    for i in 0..block {
        for j in 0..block {
            let dot: C64 = cols[i]
                .iter()
                .zip(cols[j].iter())
                .map(|(a, b)| a.conj() * b)
                .sum();
            let expect = if i == j { 1.0 } else { 0.0 };
            defect = defect.max((dot - expect).norm());
        }
    }
    if defect > UNITARITY_TOL {
        return Err(Error::Domain(format!(
            "propagator unitarity defect {defect:.3e} exceeds {UNITARITY_TOL:.1e}"
        )));
    }

    // truncation guard: trusted columns must not populate the top decile
    let top_start = n_trunc - (n_trunc / 10).max(1);
    for (n, col) in cols.iter().enumerate().take(n_trunc / 2 + 1) {
        let top: f64 = col[top_start..].iter().map(|c| c.norm_sqr()).sum();
        if top > TOP_DECILE_TOL {
            return Err(Error::TruncationInsufficient {
                context: format!("numeric propagation, column {n} top-decile population"),
                leakage: top,
                tol: TOP_DECILE_TOL,
            });
        }
    }

    // project onto the displaced final eigenbasis; D(−d) columns are the
    // final eigenvectors, computed by the generator-exponential route so the
    // numeric path stays independent of the Laguerre closed form
    let basis = displacement_amplitudes(-protocol.d, n_trunc)?;
    let mut probs = DMatrix::zeros(n_trunc, n_trunc);
    for (n, col) in cols.iter().enumerate() {
        for m in 0..n_trunc {
            let amp: C64 = (0..n_trunc)
                .map(|j| basis[(j, m)] * col[j])
                .sum();
            probs[(m, n)] = amp.norm_sqr();
        }
    }
    TransitionMatrix::from_probs(probs, alpha, Some(defect))
}

/// Numeric route with step-halving convergence control.
pub fn transition_matrix_numeric_converged(
    protocol: &RampProtocol,
    n_trunc: usize,
    steps: usize,
) -> Result<TransitionMatrix> {
    let coarse = transition_matrix_numeric(protocol, n_trunc, steps)?;
    let fine = transition_matrix_numeric(protocol, n_trunc, steps * 2)?;
    let diff = coarse.max_block_diff(&fine, n_trunc / 2 + 1);
    if diff > STEP_HALVING_TOL {
        return Err(Error::StepSizeTooCoarse {
            defect: diff,
            tol: STEP_HALVING_TOL,
        });
    }
    Ok(fine)
}

/// Constant-rate coupling to a high-temperature reservoir.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatingModel {
    pub rate_quanta_per_ms: f64,
    pub duration_ms: f64,
}

impl HeatingModel {
    pub fn delta_nbar(&self) -> f64 {
        self.rate_quanta_per_ms * self.duration_ms
    }
}

/// Evolve under the balanced birth–death rate equations
/// dP_n/dt = r[n P_{n−1} − (2n+1) P_n + (n+1) P_{n+1}],
/// which grow ⟨n⟩ linearly at rate r and map thermal states to thermal
/// states. Integrated by uniformization, so populations stay nonnegative.
pub fn apply_heating(dist: &PhononDistribution, model: &HeatingModel) -> Result<PhononDistribution> {
    if model.rate_quanta_per_ms < 0.0 || model.duration_ms < 0.0 {
        return Err(Error::Domain("heating rate and duration must be >= 0".into()));
    }
    let rt = model.rate_quanta_per_ms * model.duration_ms;
    if rt == 0.0 {
        return Ok(dist.clone());
    }
    let n = dist.n_trunc();
    // uniformization: P(t) = Σ_k Pois(Λt; k) M^k p with M = I + Q/Λ
    let lambda = rt * (2.0 * n as f64 - 1.0);
    let mut p: Vec<f64> = dist.probs().to_vec();
    let mut acc = vec![0.0; n];
    let mut log_weight = -lambda; // ln Pois(k = 0)
    for (a, &pi) in acc.iter_mut().zip(p.iter()) {
        *a = log_weight.exp() * pi;
    }
    let kmax = (lambda + 12.0 * lambda.sqrt() + 30.0).ceil() as usize;
    let mut next = vec![0.0; n];
    for k in 1..=kmax {
        // next = M p
        for i in 0..n {
            let up_in = if i > 0 { rt * i as f64 * p[i - 1] } else { 0.0 };
            let down_in = if i + 1 < n {
                rt * (i + 1) as f64 * p[i + 1]
            } else {
                0.0
            };
            let out = rt * (2.0 * i as f64 + 1.0) * p[i];
            next[i] = p[i] + (up_in + down_in - out) / lambda;
        }
        std::mem::swap(&mut p, &mut next);
        log_weight += (lambda / k as f64).ln();
        let w = log_weight.exp();
        for (a, &pi) in acc.iter_mut().zip(p.iter()) {
            *a += w * pi;
        }
    }
    PhononDistribution::from_probs(acc)
}

/// Adiabatic return to the lab frame: identity on populations plus a small
/// calibrated heating of the mean.
pub fn apply_return_noise(dist: &PhononDistribution, delta_nbar: f64) -> Result<PhononDistribution> {
    apply_heating(
        dist,
        &HeatingModel {
            rate_quanta_per_ms: delta_nbar,
            duration_ms: 1.0,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fockspace::thermal_distribution;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{PI, TAU};

    const NU: f64 = 20_000.0;
    const D: f64 = 0.9317;

    #[test]
    fn residual_linear_limits() {
        let sudden = RampProtocol::linear(D, 1e-9, NU).unwrap();
        assert_abs_diff_eq!(residual_amplitude(&sudden).unwrap(), D, epsilon = 1e-9);
        let period = RampProtocol::linear(D, TAU, NU).unwrap();
        assert_abs_diff_eq!(residual_amplitude(&period).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn residual_paper_cell() {
        let p = RampProtocol::linear_tau_us(D, 5.0, NU).unwrap();
        assert_abs_diff_eq!(p.theta_total, 0.62832, epsilon = 1e-5);
        let a = residual_amplitude(&p).unwrap();
        assert_abs_diff_eq!(a, 0.9165, epsilon = 1e-4);
        assert_abs_diff_eq!(a * a, 0.8399, epsilon = 1e-4);
    }

    #[test]
    fn residual_adiabatic_decay() {
        // along Θ = (2k+1)π the closed form is exactly 2d/Θ
        for k in [1, 3, 9, 25] {
            let theta = (2 * k + 1) as f64 * PI;
            let p = RampProtocol::linear(D, theta, NU).unwrap();
            assert_abs_diff_eq!(
                residual_amplitude(&p).unwrap(),
                2.0 * D / theta,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn residual_tabulated_matches_linear() {
        let theta = 0.62832;
        let points: Vec<(f64, f64)> = (0..=40)
            .map(|i| {
                let t = theta * i as f64 / 40.0;
                (t, D * t / theta)
            })
            .collect();
        let tab = RampProtocol::tabulated(points, NU).unwrap();
        let lin = RampProtocol::linear(D, theta, NU).unwrap();
        assert_abs_diff_eq!(
            residual_amplitude(&tab).unwrap(),
            residual_amplitude(&lin).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn tabulated_rejects_bad_tables() {
        assert!(RampProtocol::tabulated(vec![(0.0, 0.0)], NU).is_err());
        assert!(RampProtocol::tabulated(vec![(0.0, 0.1), (1.0, 0.5)], NU).is_err());
        assert!(RampProtocol::tabulated(vec![(0.0, 0.0), (1.0, 0.5), (0.5, 0.7)], NU).is_err());
    }

    #[test]
    fn table_text_round_trip() {
        let text = "# theta lambda\n0 0\n0.5 0.25\n1.0 0.5\n";
        let p = RampProtocol::from_table_text(text, NU).unwrap();
        assert_eq!(p.d, 0.5);
        assert_eq!(p.theta_total, 1.0);
        assert_abs_diff_eq!(p.lambda(0.75), 0.375, epsilon = 1e-15);
    }

    #[test]
    fn analytic_identity_cases() {
        let no_drive = RampProtocol::linear(0.0, 1.0, NU).unwrap();
        let m = transition_matrix_analytic(&no_drive, 32).unwrap();
        assert_eq!(m.prob(0, 0), 1.0);
        assert_eq!(m.prob(1, 0), 0.0);

        let period = RampProtocol::linear(D, TAU, NU).unwrap();
        let m = transition_matrix_analytic(&period, 32).unwrap();
        for n in 0..8 {
            assert_abs_diff_eq!(m.prob(n, n), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn analytic_paper_cell_p00() {
        let p = RampProtocol::linear_tau_us(D, 5.0, NU).unwrap();
        let m = transition_matrix_analytic(&p, 64).unwrap();
        assert_abs_diff_eq!(m.prob(0, 0), (-0.84f64).exp(), epsilon = 2e-4);
        assert_abs_diff_eq!(m.prob(0, 0), 0.4317, epsilon = 3e-4);
    }

    #[test]
    fn numeric_identity_when_undriven() {
        let p = RampProtocol::linear(0.0, 1.0, NU).unwrap();
        let m = transition_matrix_numeric(&p, 32, 50).unwrap();
        for n in 0..16 {
            assert_abs_diff_eq!(m.prob(n, n), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn numeric_matches_analytic() {
        let p = RampProtocol::linear_tau_us(D, 5.0, NU).unwrap();
        let ana = transition_matrix_analytic(&p, 64).unwrap();
        let num = transition_matrix_numeric(&p, 64, 1000).unwrap();
        assert_abs_diff_eq!(num.alpha_res_abs, ana.alpha_res_abs, epsilon = 1e-12);
        let diff = ana.max_block_diff(&num, 33);
        assert!(diff < 1e-6, "max diff {diff:.3e}");
        assert!(num.unitarity_defect.unwrap() < UNITARITY_TOL);
    }

    #[test]
    fn numeric_step_halving_distinguishes_protocols() {
        let p1 = RampProtocol::linear_tau_us(D, 22.5, NU).unwrap();
        let p2 = RampProtocol::linear_tau_us(D, 25.0, NU).unwrap();
        let m1 = transition_matrix_numeric_converged(&p1, 64, 600).unwrap();
        let m2 = transition_matrix_numeric_converged(&p2, 64, 600).unwrap();
        assert!(m1.max_block_diff(&m2, 16) > 1e-3);
    }

    #[test]
    fn numeric_mean_energy_bookkeeping() {
        let p = RampProtocol::linear_tau_us(D, 25.0, NU).unwrap();
        let m = transition_matrix_numeric(&p, 64, 800).unwrap();
        let shift = m.alpha_res_abs * m.alpha_res_abs;
        for n in 0..16 {
            let mean: f64 = (0..64).map(|k| k as f64 * m.prob(k, n)).sum();
            assert_abs_diff_eq!(mean - n as f64, shift, epsilon = 1e-8);
        }
    }

    #[test]
    fn heating_thermalizes_ground_state() {
        let start = thermal_distribution(0.0, 64).unwrap();
        let model = HeatingModel {
            rate_quanta_per_ms: 0.157,
            duration_ms: 1.0,
        };
        let out = apply_heating(&start, &model).unwrap();
        let expect = thermal_distribution(0.157, 64).unwrap();
        assert_abs_diff_eq!(out.mean(), 0.157, epsilon = 1e-9);
        assert!(out.total_variation(&expect) < 1e-9);
        assert_abs_diff_eq!(out.total(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn heating_short_wait_band() {
        let start = thermal_distribution(0.0, 64).unwrap();
        let model = HeatingModel {
            rate_quanta_per_ms: 0.157,
            duration_ms: 0.3,
        };
        let out = apply_heating(&start, &model).unwrap();
        assert!(out.mean() > 0.046 && out.mean() < 0.052, "mean {}", out.mean());
    }

    #[test]
    fn heating_zero_duration_is_identity() {
        let start = thermal_distribution(0.3, 64).unwrap();
        let model = HeatingModel {
            rate_quanta_per_ms: 0.157,
            duration_ms: 0.0,
        };
        let out = apply_heating(&start, &model).unwrap();
        assert_eq!(out.probs(), start.probs());
    }

    #[test]
    fn heating_preserves_geometric_ratio() {
        let start = thermal_distribution(0.2, 96).unwrap();
        let model = HeatingModel {
            rate_quanta_per_ms: 0.1,
            duration_ms: 2.0,
        };
        let out = apply_heating(&start, &model).unwrap();
        let nbar = out.mean();
        assert_abs_diff_eq!(nbar, 0.4, epsilon = 1e-8);
        let ratio = nbar / (nbar + 1.0);
        for n in 0..10 {
            assert_abs_diff_eq!(out.prob(n + 1) / out.prob(n), ratio, epsilon = 1e-6);
        }
    }
}
