//! Sampling-temperature tuning, the double-descent threshold and the
//! covariance-matching temperature.

use super::{student_energy_fwd, Teacher};
use crate::equilibrium::{classify_phase, EquilibriumSolution, Hyper, Phase};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Teacher strength below which the condensed branch of the reverse KL is monotone.
pub const OMEGA_DD: f64 = 1.0 + std::f64::consts::FRAC_1_SQRT_2;

const BETA_BRACKET: (f64, f64) = (1e-3, 1e2);
const BETA_TOL: f64 = 1e-8;

pub(crate) fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// `½(μ − F(μ))` of a bulk with `γη = ge` whose top eigenvalue has Stieltjes value `g`.
fn half_mu_minus_f_g(g: f64, ge: f64) -> f64 {
    if g >= 1.0 {
        0.5 + 0.25 / ge
    } else {
        0.5 * (g / ge + 1.0 / g - g * g / (2.0 * ge) + g.ln())
    }
}

/// `(1/N) D_KL(P* ‖ P_{βW})` for a typical posterior `W`.
pub fn forward_kl_beta(t: &Teacher, hyper: &Hyper, beta: f64) -> Result<f64> {
    let sol = classify_phase(&t.spectrum(), hyper)?;
    Ok(forward_kl_beta_from(t, hyper, &sol, beta))
}

fn forward_kl_beta_from(t: &Teacher, hyper: &Hyper, sol: &EquilibriumSolution, beta: f64) -> f64 {
    let ge = hyper.gamma * hyper.eta;
    beta * student_energy_fwd(t, sol, hyper) + 0.5 * t.omega_star.ln() - 0.5
        + half_mu_minus_f_g(sol.g1() / beta, ge / (beta * beta))
}

/// Phase of the sampler `βW`: rescaling moves no eigenvector, so only
/// condensation can switch on or off.
fn rescaled_phase(sol: &EquilibriumSolution, beta: f64) -> Phase {
    if sol.g1() / beta >= 1.0 {
        if sol.a > 0 || sol.u_sq[0] > 0.0 {
            Phase::AlignedH0
        } else {
            Phase::EdgeHu0
        }
    } else if sol.u_sq[0] > 0.0 {
        if sol.phase == Phase::CondensedEdge {
            Phase::CondensedEdge
        } else {
            Phase::CondensedOutlier
        }
    } else {
        Phase::RandomCondensed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaTuning {
    pub beta_opt: f64,
    pub kl_opt: f64,
    pub kl_at_one: f64,
    /// `∂_β D_KL` at `β = 1`; its sign decides the side of `β_opt`.
    pub derivative_at_one: f64,
    pub origin: Phase,
    pub destination: Phase,
}

pub fn beta_tt(t: &Teacher, hyper: &Hyper) -> Result<BetaTuning> {
    let sol = classify_phase(&t.spectrum(), hyper)?;
    let d = |b: f64| forward_kl_beta_from(t, hyper, &sol, b);
    let (beta_opt, kl_opt) = golden_min(d, BETA_BRACKET.0, BETA_BRACKET.1, BETA_TOL);
    let mu = sol.mu;
    Ok(BetaTuning {
        beta_opt,
        kl_opt,
        kl_at_one: d(1.0),
        derivative_at_one: 0.5 * (mu - 1.0) + student_energy_fwd(t, &sol, hyper),
        origin: sol.phase,
        destination: rescaled_phase(&sol, beta_opt),
    })
}

pub fn g_map(omega_star: f64) -> f64 {
    (2.0 * omega_star - 1.0) / (2.0 * omega_star * (omega_star - 1.0))
}

/// `γ(g₁) = 2g₁² − g₁/ω*` along the single-mode condensed branch.
pub fn dd_gamma_of_g(omega_star: f64, g1: f64) -> f64 {
    2.0 * g1 * g1 - g1 / omega_star
}

/// Smallest `η` at which the top outlier is detached for a given `g₁`.
pub fn dd_eta_f(omega_star: f64, g1: f64) -> f64 {
    omega_star * g1 / (2.0 * omega_star * g1 - 1.0)
}

/// Typical reverse KL on the condensed branch as a function of `g₁`.
pub fn dd_branch_kl(omega_star: f64, g1: f64, eta: f64) -> f64 {
    let w = omega_star;
    let s = 2.0 * w - 1.0;
    0.5 * (w - 1.0 - (w * g1).ln()) - w * (w - 1.0) * (1.0 - g1) / s * (1.0 - w * g1 / (eta * s))
        + w * g1 / (4.0 * eta * (2.0 * w * g1 - 1.0))
}

/// `d/dg₁` of [`dd_branch_kl`].
pub fn dd_branch_slope(omega_star: f64, g1: f64, eta: f64) -> f64 {
    let w = omega_star;
    let s = 2.0 * w - 1.0;
    w * (w - 1.0) * (g1 - g_map(w)) / (g1 * s)
        + (w * w * (w - 1.0) * (1.0 - 2.0 * g1) / (s * s) - w / (4.0 * (2.0 * w * g1 - 1.0).powi(2))) / eta
}

fn eta_dd_objective(w: f64, g: f64) -> f64 {
    let gm = g_map(w);
    let s = 2.0 * w - 1.0;
    let u = 2.0 * w * g - 1.0;
    let ratio = u / (s * (g - gm)) * ((2.0 * g - 1.0) + s * s / (4.0 * w * (w - 1.0) * u * u));
    dd_eta_f(w, g) * ratio.max(1.0)
}

/// Threshold `η_DD(ω*)` above which the condensed branch of the typical reverse
/// KL has an interior minimum; `∞` for `ω* ≤ 1 + 1/√2`.
pub fn eta_dd(omega_star: f64) -> f64 {
    let w = omega_star;
    if !(w > OMEGA_DD) {
        return f64::INFINITY;
    }
    let gm = g_map(w);
    if gm >= 1.0 {
        return f64::INFINITY;
    }
    let n = 4000;
    let h = (1.0 - gm) / n as f64;
    let mut best = (1, f64::INFINITY);
    for i in 1..=n {
        let g = if i == n { 1.0 - 1e-12 } else { gm + h * i as f64 };
        let v = eta_dd_objective(w, g);
        if v < best.1 {
            best = (i, v);
        }
    }
    let lo = gm + h * (best.0 as f64 - 1.0).max(1e-9);
    let hi = (gm + h * (best.0 as f64 + 1.0)).min(1.0 - 1e-12);
    let (_, v) = golden_min(|g| eta_dd_objective(w, g), lo, hi, 1e-12);
    v.min(best.1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CovConstraint {
    /// `μ′ = Σλ_k c_k² / Σc_k²`
    Spherical,
    /// `μ′ = 0`
    PerSite,
}

/// Covariance-matching sampling temperature for a model trained with weight decay `γ`.
pub fn beta_tt_cov(lambda: &[f64], c: &[f64], gamma: f64, constraint: CovConstraint) -> Result<f64> {
    if lambda.len() != c.len() || lambda.is_empty() {
        return Err(Error::InvalidInput(format!(
            "spectra must be nonempty and of equal length ({} vs {})",
            lambda.len(),
            c.len()
        )));
    }
    let mu_p = match constraint {
        CovConstraint::PerSite => 0.0,
        CovConstraint::Spherical => {
            let num: f64 = lambda.iter().zip(c).map(|(l, c)| l * c * c).sum();
            let den: f64 = c.iter().map(|c| c * c).sum();
            num / den
        }
    };
    let num: f64 = lambda.iter().zip(c).map(|(l, c)| l * l * c * c).sum();
    let den: f64 = lambda.iter().zip(c).map(|(l, c)| l * (l - mu_p) * c.powi(4)).sum();
    let scale: f64 = lambda.iter().zip(c).map(|(l, c)| (l * l + l.abs() * mu_p.abs()) * c.powi(4)).sum();
    if den.abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::DegenerateDenominator(den));
    }
    Ok(1.0 + gamma * num / den)
}
