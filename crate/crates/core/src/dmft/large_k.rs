//! Large-rank reduction.
//!
//! With `K` data modes of extensive size `c = K c̃`, the dynamics is invariant under
//! `t̄ = Kt/K'`, `γ̄ = K'γ/K`, `η̄ = Kη/K'`, `ν̄ = K'ν/K`, `c̄ = K'c/K`, so a bare
//! rank-`K` problem can be solved as a rank-`K'` one.

use super::{solve_dmft_with, DmftOptions, TimeGrid};
use crate::equilibrium::{DataSpectrum, Hyper};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct LargeKParams {
    pub t: f64,
    pub gamma: f64,
    pub eta: f64,
    pub nu: f64,
    pub c: Vec<f64>,
}

/// Bare rank-`k` parameters to the invariant rank-`k_prime` ones.
pub fn to_invariant(bare: &LargeKParams, k: f64, k_prime: f64) -> LargeKParams {
    let r = k / k_prime;
    LargeKParams {
        t: r * bare.t,
        gamma: bare.gamma / r,
        eta: bare.eta * r,
        nu: bare.nu / r,
        c: bare.c.iter().map(|c| c / r).collect(),
    }
}

pub fn to_bare(inv: &LargeKParams, k: f64, k_prime: f64) -> LargeKParams {
    to_invariant(inv, k_prime, k)
}

/// Closed-form stationary state `(q, κ̃) = (min{1, c̃}, (c̃ − 1)₊/γ)`.
pub fn large_k_stationary(c_tilde_max: f64, gamma: f64) -> (f64, f64) {
    (c_tilde_max.min(1.0), (c_tilde_max - 1.0).max(0.0) / gamma)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LargeKRun {
    /// Bare times.
    pub t: Vec<f64>,
    /// `q = s̄₁²`
    pub q: Vec<f64>,
    /// `κ̃ = κ/(Kν)` in bare units.
    pub kappa_tilde: Vec<f64>,
}

impl LargeKRun {
    pub fn last(&self) -> (f64, f64) {
        (*self.q.last().unwrap(), *self.kappa_tilde.last().unwrap())
    }
}

/// Solves the invariant rank-`k_prime` dynamics for bare rescaled eigenvalues `c̃`
/// and bare `(γ, η, ν)` up to bare time `t_bare`, stepping `dt_bar` in invariant time.
#[allow(clippy::too_many_arguments)]
pub fn solve_large_k(
    c_tilde: &[f64],
    gamma: f64,
    eta: f64,
    nu: f64,
    k: f64,
    k_prime: f64,
    t_bare: f64,
    dt_bar: f64,
    s0: f64,
) -> Result<LargeKRun> {
    let bare = LargeKParams {
        t: t_bare,
        gamma,
        eta,
        nu,
        c: c_tilde.iter().map(|c| k * c).collect(),
    };
    let inv = to_invariant(&bare, k, k_prime);
    let spectrum = DataSpectrum::new(inv.c.clone())?;
    let hyper = Hyper::new(inv.gamma, inv.eta, inv.nu)?;
    let grid = TimeGrid::new(inv.t, dt_bar)?;
    let opts = DmftOptions {
        kernel_rank: Some(k_prime),
        max_steps: grid.n.max(super::MAX_STEPS),
        ..DmftOptions::default()
    };
    let mut s0v = vec![0.0; spectrum.rank()];
    s0v[0] = s0;
    let sol = solve_dmft_with(&spectrum, &hyper, &s0v, grid, &opts)?;
    let scale = k / k_prime;
    Ok(LargeKRun {
        t: sol.times().iter().map(|t| t / scale).collect(),
        q: sol.s[0].iter().map(|s| s * s).collect(),
        kappa_tilde: sol.kappa.iter().map(|kb| kb / (k_prime * nu)).collect(),
    })
}
