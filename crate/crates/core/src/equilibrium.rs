//! Equilibrium of the trained model: phase classification for arbitrary rank,
//! outlier positions, overlaps, condensation, partition function and evidence.

use crate::error::{Error, Result};
use crate::spectral::SemicircleBulk;
use serde::{Deserialize, Serialize};

/// Relative tolerance for phase-boundary comparisons.
pub const PHASE_TOL: f64 = 1e-12;
/// Relative separation imposed between tied covariance eigenvalues.
pub const TIE_JITTER: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSpectrum {
    eigenvalues: Vec<f64>,
    trace: f64,
}

impl DataSpectrum {
    /// Sorts descending and separates ties by a relative [`TIE_JITTER`]; trace defaults to the sum.
    pub fn new(eigenvalues: Vec<f64>) -> Result<Self> {
        let mut c = eigenvalues;
        if c.is_empty() {
            return Err(Error::InvalidInput("spectrum must have at least one mode".into()));
        }
        if c.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::InvalidInput(format!("eigenvalues must be positive: {c:?}")));
        }
        c.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for k in 1..c.len() {
            let cap = c[k - 1] * (1.0 - TIE_JITTER);
            if c[k] > cap {
                c[k] = cap;
            }
        }
        let trace = c.iter().sum();
        Ok(Self { eigenvalues: c, trace })
    }

    /// Spectrum carrying a trace that differs from the eigenvalue sum.
    pub fn with_trace(eigenvalues: Vec<f64>, trace: f64) -> Result<Self> {
        if !(trace > 0.0 && trace.is_finite()) {
            return Err(Error::InvalidInput(format!("trace must be positive, got {trace}")));
        }
        let mut s = Self::new(eigenvalues)?;
        s.trace = trace;
        Ok(s)
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn trace(&self) -> f64 {
        self.trace
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn top(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Every eigenvalue and the trace multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::with_trace(
            self.eigenvalues.iter().map(|c| c * factor).collect(),
            self.trace * factor,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub gamma: f64,
    pub eta: f64,
    pub nu: f64,
    pub beta: f64,
}

impl Hyper {
    pub fn new(gamma: f64, eta: f64, nu: f64) -> Result<Self> {
        let h = Self { gamma, eta, nu, beta: 1.0 };
        h.validate()?;
        Ok(h)
    }

    /// Hyperparameters for static computations, where the sampling rate is irrelevant.
    pub fn statics(gamma: f64, eta: f64) -> Result<Self> {
        Self::new(gamma, eta, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gamma", self.gamma),
            ("eta", self.eta),
            ("nu", self.nu),
            ("beta", self.beta),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn bulk(&self) -> SemicircleBulk {
        SemicircleBulk::from_hyper(self.gamma, self.eta).expect("validated hyper")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    /// `h = 0`, all `u = 0`, every outlier at the bulk edge.
    #[serde(rename = "edge_hu0")]
    EdgeHu0,
    /// `h = 0`, top `a` modes detached and aligned.
    #[serde(rename = "aligned_h0")]
    AlignedH0,
    /// `h ≠ 0` along a random direction, all `u = 0`.
    #[serde(rename = "random_condensed")]
    RandomCondensed,
    /// `h ≠ 0`, top `d` modes aligned, pinned at the bulk edge.
    #[serde(rename = "condensed_edge")]
    CondensedEdge,
    /// `h ≠ 0`, top `d` modes coalesced at a detached outlier.
    #[serde(rename = "condensed_outlier")]
    CondensedOutlier,
}

impl Phase {
    pub fn label(&self) -> &'static str {
        match self {
            Phase::EdgeHu0 => "edge_hu0",
            Phase::AlignedH0 => "aligned_h0",
            Phase::RandomCondensed => "random_condensed",
            Phase::CondensedEdge => "condensed_edge",
            Phase::CondensedOutlier => "condensed_outlier",
        }
    }

    pub fn is_condensed(&self) -> bool {
        matches!(
            self,
            Phase::RandomCondensed | Phase::CondensedEdge | Phase::CondensedOutlier
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSolution {
    pub phase: Phase,
    pub lambda: Vec<f64>,
    pub g: Vec<f64>,
    pub u_sq: Vec<f64>,
    pub h_sq: f64,
    pub mu: f64,
    pub d: usize,
    pub a: usize,
    pub chi: Vec<f64>,
}

impl EquilibriumSolution {
    pub fn g1(&self) -> f64 {
        self.g[0]
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda[0]
    }
}

fn le(a: f64, b: f64) -> bool {
    a <= b + PHASE_TOL * a.abs().max(b.abs()).max(1.0)
}

/// HCIZ saddle: `(χ_k, u_k²)` for an eigenvalue `λ_k ≥ 2σ` paired with data eigenvalue `c_k`.
pub fn hciz_saddle(lambda_k: f64, c_k: f64, hyper: &Hyper) -> Result<(f64, f64)> {
    let bulk = hyper.bulk();
    let g = bulk.g(lambda_k)?;
    let ec = hyper.eta * c_k;
    if g <= ec {
        Ok((lambda_k.max(bulk.edge()), (1.0 - g / ec).max(0.0)))
    } else {
        Ok((bulk.inverse_g(ec)?, 0.0))
    }
}

/// Spherical multiplier and condensation from the top Stieltjes value `g₁`.
pub fn saddle_mu(g1: f64, lambda1: f64, hyper: &Hyper) -> Result<(f64, f64)> {
    let bulk = hyper.bulk();
    if g1 >= 1.0 {
        let mu = bulk.inverse_g(1.0).map_err(|_| {
            Error::Domain(format!(
                "g1={g1} >= 1 requires gamma*eta >= 1 (got {})",
                hyper.gamma * hyper.eta
            ))
        })?;
        Ok((mu, 0.0))
    } else {
        Ok((lambda1, 1.0 - g1))
    }
}

struct ModeSlot {
    lambda: f64,
    g: f64,
    u_sq: f64,
    detached: bool,
}

fn uncondensed_mode(c: f64, hyper: &Hyper) -> ModeSlot {
    let (gamma, eta) = (hyper.gamma, hyper.eta);
    let s = (gamma * eta).sqrt();
    if eta * c > s {
        ModeSlot {
            lambda: 1.0 / (eta * c) + c / gamma,
            g: gamma / c,
            u_sq: 1.0 - gamma / (eta * c * c),
            detached: true,
        }
    } else {
        ModeSlot { lambda: 2.0 / s, g: s, u_sq: 0.0, detached: false }
    }
}

/// Coalesced Stieltjes value for `d` condensed modes.
pub fn coalesced_g1(spectrum: &DataSpectrum, gamma: f64, d: usize) -> f64 {
    let tr = spectrum.trace();
    let top: f64 = spectrum.eigenvalues()[..d].iter().sum();
    let rest = tr - top;
    (rest + (rest * rest + 4.0 * d as f64 * gamma * tr).sqrt()) / (2.0 * tr)
}

/// Residual of the coalesced force balance `−(1−g₁)TrC − dγ/g₁ + Σ_{k≤d} c_k`.
pub fn force_balance_residual(spectrum: &DataSpectrum, gamma: f64, d: usize, g1: f64) -> f64 {
    let top: f64 = spectrum.eigenvalues()[..d].iter().sum();
    -(1.0 - g1) * spectrum.trace() - d as f64 * gamma / g1 + top
}

fn outlier_window(spectrum: &DataSpectrum, hyper: &Hyper, d: usize) -> Option<f64> {
    let c = spectrum.eigenvalues();
    let (gamma, eta) = (hyper.gamma, hyper.eta);
    let s = (gamma * eta).sqrt();
    let cd = c[d - 1];
    let g1 = coalesced_g1(spectrum, gamma, d);
    let mut upper = 1.0f64.min(eta * cd).min(s);
    if d < c.len() {
        upper = upper.min(gamma / c[d]);
    }
    (le(gamma / cd, g1) && le(g1, upper)).then_some(g1)
}

fn edge_window(spectrum: &DataSpectrum, hyper: &Hyper, d: usize) -> bool {
    let c = spectrum.eigenvalues();
    let (gamma, eta) = (hyper.gamma, hyper.eta);
    let s = (gamma * eta).sqrt();
    let cd1 = if d < c.len() { c[d] } else { 0.0 };
    let tr = spectrum.trace();
    let top: f64 = c[..d].iter().sum();
    le(eta * cd1, s)
        && le(s, 1.0f64.min(eta * c[d - 1]))
        && le(s * (eta * tr - d as f64) + eta * top, eta * tr)
}

/// Classify the equilibrium phase and populate every order parameter.
///
/// Condensed windows are scanned from `d = K` down to 1 and the first hit wins;
/// boundaries within [`PHASE_TOL`] go to the condensed side.
pub fn classify_phase(spectrum: &DataSpectrum, hyper: &Hyper) -> Result<EquilibriumSolution> {
    hyper.validate()?;
    let c = spectrum.eigenvalues();
    let k = c.len();
    let (gamma, eta) = (hyper.gamma, hyper.eta);
    let bulk = hyper.bulk();
    let s = (gamma * eta).sqrt();
    let edge = bulk.edge();

    let mut lambda = vec![edge; k];
    let mut g = vec![s; k];
    let mut u_sq = vec![0.0; k];
    let mut a = 0;

    let mut fill_uncondensed = |from: usize, lambda: &mut [f64], g: &mut [f64], u: &mut [f64]| {
        for i in from..k {
            let m = uncondensed_mode(c[i], hyper);
            lambda[i] = m.lambda;
            g[i] = m.g;
            u[i] = m.u_sq;
            if m.detached {
                a += 1;
            }
        }
    };

    let mut found: Option<(Phase, usize, f64)> = None;
    for d in (1..=k).rev() {
        if let Some(g1) = outlier_window(spectrum, hyper, d) {
            let l1 = bulk.inverse_g(g1.min(s))?;
            for i in 0..d {
                lambda[i] = l1;
                g[i] = g1;
                u_sq[i] = (1.0 - g1 / (eta * c[i])).max(0.0);
            }
            fill_uncondensed(d, &mut lambda, &mut g, &mut u_sq);
            found = Some((Phase::CondensedOutlier, d, g1));
            break;
        }
        if edge_window(spectrum, hyper, d) {
            for i in 0..d {
                u_sq[i] = (1.0 - s / (eta * c[i])).max(0.0);
            }
            found = Some((Phase::CondensedEdge, d, s));
            break;
        }
    }
    if found.is_none() {
        let c1 = c[0];
        let ge = gamma * eta;
        if le(eta * c1, s) && le(s, 1.0) {
            found = Some((Phase::RandomCondensed, 0, s));
        } else if le(1.0, ge) && le(c1, gamma) {
            fill_uncondensed(0, &mut lambda, &mut g, &mut u_sq);
            let phase = if a > 0 { Phase::AlignedH0 } else { Phase::EdgeHu0 };
            found = Some((phase, 0, g[0]));
        }
    }
    let (phase, d, g1) = found.ok_or(Error::InconsistentPhase { gamma, eta })?;

    let (mu, h_sq) = if phase.is_condensed() {
        (lambda[0], (1.0 - g1).max(0.0))
    } else {
        saddle_mu(g1.max(1.0), lambda[0], hyper)?
    };

    let mut chi = Vec::with_capacity(k);
    for i in 0..k {
        chi.push(hciz_saddle(lambda[i], c[i], hyper)?.0);
    }

    Ok(EquilibriumSolution { phase, lambda, g, u_sq, h_sq, mu, d, a, chi })
}

/// `(1/N) ln Z` at the saddle, including the `½ ln 2π` base-measure constant.
pub fn log_partition_intensive(solution: &EquilibriumSolution, hyper: &Hyper) -> f64 {
    let f = hyper.bulk().f(solution.mu).expect("mu above the bulk edge");
    0.5 * ((2.0 * std::f64::consts::PI).ln() + solution.mu - f)
}

/// `(1/N)⟨E⟩ = (1 − μ)/2`.
pub fn avg_energy_intensive(solution: &EquilibriumSolution) -> f64 {
    0.5 * (1.0 - solution.mu)
}

/// `(1/N)H = ½[ln(2πe) − F(μ)]`.
pub fn entropy_intensive(solution: &EquilibriumSolution, hyper: &Hyper) -> f64 {
    let f = hyper.bulk().f(solution.mu).expect("mu above the bulk edge");
    0.5 * ((2.0 * std::f64::consts::PI * std::f64::consts::E).ln() - f)
}

/// Log-evidence `Φ(C)` with the two-row per-mode contributions.
pub fn evidence_phi(spectrum: &DataSpectrum, hyper: &Hyper) -> Result<f64> {
    let sol = classify_phase(spectrum, hyper)?;
    Ok(evidence_phi_from(spectrum, hyper, &sol))
}

pub fn evidence_phi_from(spectrum: &DataSpectrum, hyper: &Hyper, sol: &EquilibriumSolution) -> f64 {
    let (gamma, eta) = (hyper.gamma, hyper.eta);
    let ge = gamma * eta;
    let c = spectrum.eigenvalues();
    let bulk = hyper.bulk();
    let f_mu = bulk.f(sol.mu).expect("mu above the bulk edge");
    let g1 = sol.g1();
    let mut phi = 0.5 * c.len() as f64 * ge.ln() - 0.5 * eta * (sol.mu - f_mu) * spectrum.trace();
    for (i, &ck) in c.iter().enumerate() {
        phi += if i < sol.d {
            -0.5 - ge / (4.0 * g1 * g1) + ck * g1 / (2.0 * gamma) + eta * ck / (2.0 * g1)
                - 0.5 * (g1 * eta * ck).ln()
        } else {
            eta * ck * ck / (4.0 * gamma) - 0.5 * ge.ln()
        };
    }
    phi
}

/// Per-mode coefficients `(ηχ_k − 1/c_k)/η` of `(c_k c_kᵀ − I)/N` in the posterior-mean weights.
pub fn weight_mean_coefficients(spectrum: &DataSpectrum, hyper: &Hyper) -> Result<Vec<f64>> {
    let sol = classify_phase(spectrum, hyper)?;
    let eta = hyper.eta;
    Ok(spectrum
        .eigenvalues()
        .iter()
        .zip(&sol.chi)
        .map(|(&c, &chi)| (eta * chi - 1.0 / c) / eta)
        .collect())
}

/// Per-mode coefficients of `(c_k c_kᵀ − I)/N` in `(K/N)⟨⟨xxᵀ⟩⟩ = C + Σ coef_k (c_k c_kᵀ − I)/N`.
pub fn sample_second_moment_coefficients(spectrum: &DataSpectrum, hyper: &Hyper) -> Result<Vec<f64>> {
    Ok(weight_mean_coefficients(spectrum, hyper)?
        .into_iter()
        .map(|w| -hyper.gamma * w)
        .collect())
}

/// Reverse KL of the unconstrained Gaussian model, equal to the `h = 0` branch of the spherical one.
pub fn gaussian_baseline_kl(omega_star: f64, hyper: &Hyper) -> f64 {
    0.5 * (omega_star - omega_star.ln() - 1.0 + 1.0 / (2.0 * hyper.gamma * hyper.eta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn spec(c: &[f64]) -> DataSpectrum {
        DataSpectrum::new(c.to_vec()).unwrap()
    }

    #[test]
    fn classify_examples() {
        let s = classify_phase(&spec(&[1.0]), &Hyper::statics(3.0, 1.0).unwrap()).unwrap();
        assert_eq!(s.phase, Phase::EdgeHu0);
        assert_abs_diff_eq!(s.lambda[0], 2.0 / 3f64.sqrt(), epsilon = 1e-14);
        assert_eq!(s.u_sq[0], 0.0);
        assert_eq!(s.h_sq, 0.0);

        let s = classify_phase(&spec(&[1.0]), &Hyper::statics(2.0, 0.3).unwrap()).unwrap();
        assert_eq!(s.phase, Phase::RandomCondensed);
        assert_abs_diff_eq!(s.lambda[0], 2.0 / 0.6f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(s.h_sq, 1.0 - 0.6f64.sqrt(), epsilon = 1e-14);

        let s = classify_phase(&spec(&[1.5, 0.5]), &Hyper::statics(0.5, 3.0).unwrap()).unwrap();
        assert_eq!(s.phase, Phase::CondensedOutlier);
        assert_eq!(s.d, 1);
        let g1 = (0.5 + 4.25f64.sqrt()) / 4.0;
        assert_abs_diff_eq!(s.g1(), g1, epsilon = 1e-14);
        assert_abs_diff_eq!(s.h_sq, 1.0 - g1, epsilon = 1e-14);
        assert_abs_diff_eq!(s.u_sq[0], 1.0 - g1 / 4.5, epsilon = 1e-14);
        assert!((s.g1() - 0.6404).abs() < 1e-4);
    }

    #[test]
    fn saddle_mu_examples() {
        // σ = 0.8 ⇒ γη = 1.5625
        let h = Hyper::statics(1.5625, 1.0).unwrap();
        let (mu, hs) = saddle_mu(1.2, 0.0, &h).unwrap();
        assert_abs_diff_eq!(mu, 1.64, epsilon = 1e-14);
        assert_eq!(hs, 0.0);
        let h = Hyper::statics(0.5, 3.0).unwrap();
        let l1 = h.bulk().inverse_g(0.6404).unwrap();
        let (mu, hs) = saddle_mu(0.6404, l1, &h).unwrap();
        assert_eq!(mu, l1);
        assert_abs_diff_eq!(hs, 0.3596, epsilon = 1e-14);
        let h = Hyper::statics(0.5, 1.0).unwrap();
        assert!(saddle_mu(1.0, 0.0, &h).is_err());
    }

    #[test]
    fn log_partition_examples() {
        let ln2pi = (2.0 * std::f64::consts::PI).ln();
        // γη = 4, h = 0
        let h = Hyper::statics(4.0, 1.0).unwrap();
        let s = classify_phase(&spec(&[1.0]), &h).unwrap();
        assert!(s.g1() >= 1.0);
        assert_abs_diff_eq!(log_partition_intensive(&s, &h), 0.5 * ln2pi + 0.5 + 1.0 / 16.0, epsilon = 1e-14);

        // condensed branch with g1 = 0.5, γη = 1.5 (μ = G⁻¹(0.5))
        let h = Hyper::statics(1.5, 1.0).unwrap();
        let mu = h.bulk().inverse_g(0.5).unwrap();
        let sol = EquilibriumSolution {
            phase: Phase::CondensedOutlier,
            lambda: vec![mu],
            g: vec![0.5],
            u_sq: vec![0.0],
            h_sq: 0.5,
            mu,
            d: 1,
            a: 0,
            chi: vec![mu],
        };
        let want = 0.5 * ln2pi + 0.5 * (0.5 / 1.5 + 2.0 - 0.25 / 3.0 + 0.5f64.ln());
        assert_abs_diff_eq!(log_partition_intensive(&sol, &h), want, epsilon = 1e-14);

        let h = Hyper::statics(1.0, 1e8).unwrap();
        let s = classify_phase(&spec(&[1.0]), &h).unwrap();
        let unif = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
        assert!((log_partition_intensive(&s, &h) - unif).abs() < 1e-7);
    }

    #[test]
    fn energy_entropy() {
        let mut s = classify_phase(&spec(&[1.0]), &Hyper::statics(3.0, 1.0).unwrap()).unwrap();
        s.mu = 1.0;
        assert_eq!(avg_energy_intensive(&s), 0.0);
        s.mu = 2.0;
        assert_eq!(avg_energy_intensive(&s), -0.5);

        for (c, g, e) in [(vec![1.5, 0.5], 0.5, 3.0), (vec![1.0], 3.0, 1.0), (vec![1.0], 2.0, 0.3)] {
            let h = Hyper::statics(g, e).unwrap();
            let s = classify_phase(&spec(&c), &h).unwrap();
            let lhs = entropy_intensive(&s, &h);
            let rhs = avg_energy_intensive(&s) + log_partition_intensive(&s, &h);
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
        }
        let h = Hyper::statics(1.0, 1e10).unwrap();
        let s = classify_phase(&spec(&[1.0]), &h).unwrap();
        let unif = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
        assert!((entropy_intensive(&s, &h) - unif).abs() < 1e-8);
    }

    #[test]
    fn energy_is_beta_derivative() {
        // d/dβ ln Z(βW) at β = 1 equals −⟨E⟩; βW has bulk βσ and outliers βλ.
        for (c, g, e) in [(vec![1.5, 0.5], 0.5, 3.0), (vec![1.0], 3.0, 1.0), (vec![1.0], 0.5, 4.0)] {
            let h = Hyper::statics(g, e).unwrap();
            let s = classify_phase(&spec(&c), &h).unwrap();
            let lnz = |beta: f64| {
                let b = SemicircleBulk::new(beta * h.bulk().sigma()).unwrap();
                let g1 = b.g(beta * s.lambda1()).unwrap();
                let mu = if g1 >= 1.0 { b.inverse_g(1.0).unwrap() } else { beta * s.lambda1() };
                0.5 * ((2.0 * std::f64::consts::PI).ln() + mu - b.f(mu).unwrap())
            };
            let eps = 1e-6;
            let d = (lnz(1.0 + eps) - lnz(1.0 - eps)) / (2.0 * eps);
            assert!((d + avg_energy_intensive(&s)).abs() < 1e-4, "{c:?} {g} {e}: {d}");
        }
    }

    #[test]
    fn hciz_examples() {
        let h = Hyper::statics(0.5, 3.0).unwrap();
        let c = 1.5;
        let lam = 1.0 / (h.eta * c) + c / h.gamma;
        let (chi, u) = hciz_saddle(lam, c, &h).unwrap();
        assert_abs_diff_eq!(chi, lam, epsilon = 1e-14);
        assert_abs_diff_eq!(u, 1.0 - h.gamma / (h.eta * c * c), epsilon = 1e-14);

        // g_k = ηc_k: both branches give u² = 0 and χ = λ.
        let b = h.bulk();
        let ck = 0.3;
        let lam = b.inverse_g(h.eta * ck).unwrap();
        let (chi, u) = hciz_saddle(lam, ck, &h).unwrap();
        assert_abs_diff_eq!(u, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(chi, lam, epsilon = 1e-12);
    }

    #[test]
    fn hciz_grid_extremization() {
        // The functional is convex in χ and, after minimising over χ ≥ 2σ, concave in u²:
        // the saddle is max over u² of min over χ.
        let h = Hyper::statics(0.5, 3.0).unwrap();
        let b = h.bulk();
        for (lam, c) in [(2.5, 1.5), (b.edge(), 0.2), (b.edge() + 0.3, 0.4)] {
            let ec = h.eta * c;
            let obj = |u2: f64, chi: f64| ec * (lam * u2 + chi - chi * u2) - b.f(chi).unwrap() - ec.ln();
            // for fixed u², stationarity in χ: ηc(1−u²) = G(χ) when admissible
            let mut best: Option<(f64, f64, f64)> = None;
            let n = 20_000;
            for i in 0..n {
                let u2 = i as f64 / n as f64;
                let a = ec * (1.0 - u2);
                let chi = if a > 1.0 / b.sigma() { b.edge() } else { b.inverse_g(a).unwrap() };
                let v = obj(u2, chi);
                if best.map_or(true, |(bv, _, _)| v > bv) {
                    best = Some((v, u2, chi));
                }
            }
            let (_, u2, chi) = best.unwrap();
            let (chi0, u0) = hciz_saddle(lam, c, &h).unwrap();
            assert!((u2 - u0).abs() < 1e-4, "lam={lam} c={c}: grid u2={u2} vs {u0}");
            assert!((chi - chi0).abs() < 1e-3, "lam={lam} c={c}: grid chi={chi} vs {chi0}");
        }
    }

    #[test]
    fn evidence_general_form_matches_rows() {
        for (c, g, e) in [
            (vec![1.5, 0.5], 0.5, 3.0),
            (vec![1.0], 3.0, 1.0),
            (vec![1.0], 2.0, 0.3),
            (vec![1.2, 0.8], 1.5, 5.0),
            (vec![1.0], 0.3, 0.5),
            (vec![1.7, 0.3], 0.4, 10.0),
        ] {
            let s = spec(&c);
            let h = Hyper::statics(g, e).unwrap();
            let sol = classify_phase(&s, &h).unwrap();
            let b = h.bulk();
            let ge = g * e;
            let f_mu = b.f(sol.mu).unwrap();
            let mut phi = 0.5 * c.len() as f64 * ge.ln() - 0.5 * e * (sol.mu - f_mu) * s.trace();
            for k in 0..c.len() {
                let lam = sol.lambda[k];
                let chi = sol.chi[k];
                phi += -ge * lam * lam / 4.0
                    + b.f(lam).unwrap()
                    + 0.5 * (e * c[k] * chi - b.f(chi).unwrap() - (e * c[k]).ln());
            }
            let rows = evidence_phi(&s, &h).unwrap();
            assert!((phi - rows).abs() < 1e-10, "{c:?} {g} {e} {:?}: {phi} vs {rows}", sol.phase);
        }
    }

    #[test]
    fn evidence_uncondensed_edge_k1() {
        let (c1, g, e) = (1.0, 3.0, 1.0);
        let h = Hyper::statics(g, e).unwrap();
        let s = spec(&[c1]);
        let sol = classify_phase(&s, &h).unwrap();
        assert_eq!(sol.phase, Phase::EdgeHu0);
        let mu = 1.0 + 1.0 / (g * e);
        let f = h.bulk().f(mu).unwrap();
        let want = 0.5 * (g * e).ln() - 0.5 * e * (mu - f) * c1 + e * c1 * c1 / (4.0 * g) - 0.5 * (g * e).ln();
        assert_abs_diff_eq!(evidence_phi(&s, &h).unwrap(), want, epsilon = 1e-14);
    }

    #[test]
    fn weight_coefficients() {
        let s = spec(&[1.5, 0.5]);
        let h = Hyper::statics(2.0, 4.0).unwrap();
        let w = weight_mean_coefficients(&s, &h).unwrap();
        // detached mode: χ = 1/(ηc) + c/γ ⇒ coefficient c/γ
        assert_abs_diff_eq!(w[0], 1.5 / 2.0, epsilon = 1e-14);
        let x = sample_second_moment_coefficients(&s, &h).unwrap();
        assert_abs_diff_eq!(x[0], -2.0 * w[0], epsilon = 1e-14);
    }

    #[test]
    fn gaussian_baseline() {
        let h = Hyper::statics(1.0, 1e12).unwrap();
        assert!((gaussian_baseline_kl(2.5, &h) - 0.2919).abs() < 1e-4);
        let h = Hyper::statics(1.0, 1.0).unwrap();
        let base = 0.5 * (2.5 - 2.5f64.ln() - 1.0);
        assert_abs_diff_eq!(gaussian_baseline_kl(2.5, &h), base + 0.25, epsilon = 1e-14);
    }
}
