//! Teacher–student divergences along a training trajectory.
//!
//! The top eigenvalue of `W(t)` is read off the positive-minus-negative phase
//! matrix `Θ(t) = (1−e^{−γt/2})C/γ − (1/N)∫₀ᵗ e^{−γ(t−u)/2} x(u)x(u)ᵀ du`
//! projected on the data modes, treating the bulk noise as independent of
//! `Θ`. That only holds while the negative phase is small; each point carries
//! a flag instead of failing.

use super::tuning::golden_min;
use super::Teacher;
use crate::dmft::DmftSolution;
use crate::equilibrium::Hyper;
use crate::error::{Error, Result};
use crate::langevin::Trajectory;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Largest ratio of negative to positive phase along `c₁` accepted as early training.
pub const NEGATIVE_PHASE_LIMIT: f64 = 0.5;

/// Times and data-mode overlaps `s_k(t)` of the persistent chain.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPath {
    pub t: Vec<f64>,
    /// `s[k][i]`
    pub s: Vec<Vec<f64>>,
}

impl TrainingPath {
    pub fn from_dmft(sol: &DmftSolution) -> Self {
        TrainingPath { t: sol.times(), s: sol.s.clone() }
    }

    pub fn from_trajectory(traj: &Trajectory) -> Self {
        TrainingPath { t: traj.times.clone(), s: traj.s.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicKls {
    pub t: Vec<f64>,
    pub forward: Vec<f64>,
    pub reverse: Vec<f64>,
    /// Top eigenvalue of the projected `Θ(t)`.
    pub theta1: Vec<f64>,
    /// `(v₁·w*)²/N` of the student's top eigenvector.
    pub teacher_overlap: Vec<f64>,
    /// False once the negative phase exceeds [`NEGATIVE_PHASE_LIMIT`] of the positive one.
    pub early_training: Vec<bool>,
}

impl DynamicKls {
    /// Time and value of the smallest reverse KL.
    pub fn reverse_min(&self) -> (f64, f64) {
        let (i, v) = self
            .reverse
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |b, (i, &v)| if v < b.1 { (i, v) } else { b });
        (self.t[i], v)
    }

    /// First time the early-training approximation is flagged.
    pub fn first_flagged(&self) -> Option<f64> {
        self.early_training.iter().position(|ok| !ok).map(|i| self.t[i])
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,forward_kl,reverse_kl,theta1,teacher_overlap,early_training")?;
        for i in 0..self.t.len() {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                self.t[i],
                self.forward[i],
                self.reverse[i],
                self.theta1[i],
                self.teacher_overlap[i],
                self.early_training[i] as u8
            )?;
        }
        Ok(())
    }
}

/// `(g_t, h_t²)` from the spike strength `θ₁`.
fn spike_saddle(theta1: f64, ge: f64) -> (f64, f64) {
    let theta_c = 1f64.max(1.0 / ge.sqrt());
    let g = if theta1 <= theta_c { ge.sqrt().min(1.0) } else { 1.0 / theta1 };
    (g, (1.0 - g).max(0.0))
}

pub fn reverse_kl_plateau(t: &Teacher, hyper: &Hyper) -> f64 {
    let ge = hyper.gamma * hyper.eta;
    let g0 = if ge >= 1.0 { 1.0 } else { ge.sqrt() };
    t.uniform_baseline() - 0.5 * g0.ln() + g0 * g0 / (4.0 * ge)
}

pub fn dynamic_kls(path: &TrainingPath, t: &Teacher, hyper: &Hyper) -> Result<DynamicKls> {
    hyper.validate()?;
    if path.s.len() != 2 || path.s.iter().any(|s| s.len() != path.t.len()) || path.t.is_empty() {
        return Err(Error::InvalidInput(
            "training path must carry two overlap series matching its time grid".into(),
        ));
    }
    let (gamma, eta) = (hyper.gamma, hyper.eta);
    let ge = gamma * eta;
    let w = t.omega_star;
    let n = path.t.len();
    let mut out = DynamicKls {
        t: path.t.clone(),
        forward: Vec::with_capacity(n),
        reverse: Vec::with_capacity(n),
        theta1: Vec::with_capacity(n),
        teacher_overlap: Vec::with_capacity(n),
        early_training: Vec::with_capacity(n),
    };
    // Discounted negative-phase integrals I_kl.
    let mut i11 = 0.0;
    let mut i12 = 0.0;
    let mut i22 = 0.0;
    let t0 = path.t[0];
    for i in 0..n {
        let (s1, s2) = (path.s[0][i], path.s[1][i]);
        if i > 0 {
            let dt = path.t[i] - path.t[i - 1];
            let e = (-0.5 * gamma * dt).exp();
            let (p1, p2) = (path.s[0][i - 1], path.s[1][i - 1]);
            i11 = e * i11 + 0.5 * dt * (e * p1 * p1 + s1 * s1);
            i12 = e * i12 + 0.5 * dt * (e * p1 * p2 + s1 * s2);
            i22 = e * i22 + 0.5 * dt * (e * p2 * p2 + s2 * s2);
        }
        let pos = (1.0 - (-0.5 * gamma * (path.t[i] - t0)).exp()) / gamma;
        let a = pos * t.c1 - i11;
        let d = pos * t.c2 - i22;
        let b = -i12;
        let half_tr = 0.5 * (a + d);
        let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        let theta1 = half_tr + rad;
        // Squared first component of the top eigenvector.
        let v0_sq = if rad > 0.0 { 0.5 * (1.0 + 0.5 * (a - d) / rad) } else { 1.0 };

        let (g, h_sq) = spike_saddle(theta1, ge);
        let mu = g / ge + 1.0 / g;
        let align = (1.0 - 1.0 / (ge * theta1 * theta1)).max(0.0);
        let overlap = align * t.overlap_sq * v0_sq;

        let forward = 0.5 * w.ln() - 0.5 + 0.5 * (mu + g.ln() - g * g / (2.0 * ge))
            - 0.5 * (1.0 - 1.0 / w) * t.overlap_sq * a;
        let reverse =
            t.uniform_baseline() - 0.5 * g.ln() + g * g / (4.0 * ge) - 0.5 * w * h_sq * overlap;
        out.forward.push(forward);
        out.reverse.push(reverse);
        out.theta1.push(theta1);
        out.teacher_overlap.push(overlap);
        out.early_training.push(i11 <= NEGATIVE_PHASE_LIMIT * pos * t.c1);
    }
    Ok(out)
}

/// Spike strength at which the early-training reverse KL is stationary when `u₁² ≈ 1`.
pub fn theta_star(t: &Teacher, hyper: &Hyper) -> f64 {
    let wa = t.omega_star * t.overlap_sq;
    0.5 * (wa + (wa * wa + 4.0 / (hyper.gamma * hyper.eta)).sqrt())
}

fn time_of_theta(t: &Teacher, gamma: f64, theta: f64) -> Result<f64> {
    let arg = 1.0 - gamma * theta / t.c1;
    if arg <= 0.0 {
        return Err(Error::NoFiniteTime(format!(
            "the spike saturates at c1/gamma={} below theta={theta}",
            t.c1 / gamma
        )));
    }
    Ok(-2.0 / gamma * arg.ln())
}

/// `ν`-independent early-stopping estimate `t* = −(2/γ) ln(1 − γθ*/c₁)`.
pub fn early_stopping_time(t: &Teacher, hyper: &Hyper) -> Result<f64> {
    time_of_theta(t, hyper.gamma, theta_star(t, hyper))
}

/// Early-stopping time from minimizing the early-training reverse KL in `θ`
/// with the alignment factor `1 − 1/(γηθ²)` kept.
pub fn early_stopping_time_exact(t: &Teacher, hyper: &Hyper) -> Result<f64> {
    let ge = hyper.gamma * hyper.eta;
    let w = t.omega_star;
    let f = |theta: f64| {
        let (g, h_sq) = spike_saddle(theta, ge);
        let align = (1.0 - 1.0 / (ge * theta * theta)).max(0.0);
        -0.5 * g.ln() + g * g / (4.0 * ge) - 0.5 * w * h_sq * align * t.overlap_sq
    };
    let lo = 1f64.max(1.0 / ge.sqrt());
    let hi = t.c1 / hyper.gamma;
    if hi <= lo {
        return Err(Error::NoFiniteTime(format!("the spike never exceeds the threshold {lo}")));
    }
    let n = 400;
    let h = (hi - lo) / n as f64;
    let best = (0..=n)
        .map(|i| (i, f(lo + h * i as f64)))
        .fold((0usize, f64::INFINITY), |b, (i, v)| if v < b.1 { (i, v) } else { b });
    if best.0 == n {
        return Err(Error::NoFiniteTime("reverse KL still falling when the spike saturates".into()));
    }
    let a = lo + h * best.0.saturating_sub(1) as f64;
    let b = lo + h * (best.0 + 1) as f64;
    let (theta, _) = golden_min(f, a, b, 1e-12);
    time_of_theta(t, hyper.gamma, theta)
}
