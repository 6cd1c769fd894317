//! Rank-one teacher–student metrics.
//!
//! The teacher is `W* = ω* w* w*ᵀ − (ω*/N) I`; its `K = 2` training data have
//! covariance eigenvalues `c₁ = 2 − 1/ω*`, `c₂ = 1/ω*`. All divergences are
//! intensive (per `N`) and exact at leading order only, so comparisons carry an
//! `O(1/N)` truncation on top of [`TRUNCATION_TOL`].

mod dynamics;
mod tempered;
mod tuning;

pub use dynamics::{
    dynamic_kls, early_stopping_time, early_stopping_time_exact, reverse_kl_plateau, theta_star,
    DynamicKls, TrainingPath, NEGATIVE_PHASE_LIMIT,
};
pub use tempered::{
    eta_profile_min, fwd_eta0, fwd_gamma_flat, fwd_gamma_inf, fwd_gamma_wc, fwd_warm_interval,
    rev_gamma_inf, rev_gamma_wc1, rev_gamma_wc2, tempered_forward_phase, tempered_reverse_phase,
    EtaOpt, EtaProfileMin, TemperedLabel, TemperedPhase, OMEGA_0, OMEGA_2,
};
pub use tuning::{
    beta_tt, beta_tt_cov, dd_branch_kl, dd_branch_slope, dd_eta_f, dd_gamma_of_g, eta_dd, forward_kl_beta,
    g_map, BetaTuning, CovConstraint, OMEGA_DD,
};

use crate::equilibrium::{classify_phase, evidence_phi, DataSpectrum, EquilibriumSolution, Hyper, Phase};
use crate::error::{Error, Result};
use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use std::f64::consts::{E, PI};

/// Tolerance on top of the `O(1/N)` truncation when comparing leading-order formulas.
pub const TRUNCATION_TOL: f64 = 1e-10;

/// Discriminant magnitude below which the cubic is handed to the companion matrix.
const CUBIC_DISC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Teacher {
    pub omega_star: f64,
    pub c1: f64,
    pub c2: f64,
    /// `(c₁·w*)²/N = 1 − 1/(2ω*−1)`
    pub overlap_sq: f64,
}

impl Teacher {
    pub fn new(omega_star: f64) -> Result<Self> {
        if !(omega_star > 1.0 && omega_star.is_finite()) {
            return Err(Error::InvalidInput(format!("omega_star must exceed 1, got {omega_star}")));
        }
        Ok(Teacher {
            omega_star,
            c1: 2.0 - 1.0 / omega_star,
            c2: 1.0 / omega_star,
            overlap_sq: 1.0 - 1.0 / (2.0 * omega_star - 1.0),
        })
    }

    pub fn spectrum(&self) -> DataSpectrum {
        DataSpectrum::new(vec![self.c1, self.c2]).expect("teacher spectrum is valid")
    }

    /// `(1/N) ln Z(W*)`
    pub fn log_partition_intensive(&self) -> f64 {
        let w = self.omega_star;
        0.5 * (2.0 * PI * E).ln() + 0.5 * (w - 1.0 - w.ln())
    }

    /// `(1/N) H[P*]`
    pub fn entropy_intensive(&self) -> f64 {
        0.5 * (2.0 * PI * E).ln() - 0.5 * self.omega_star.ln()
    }

    /// Reverse KL of the uniform student, `(ω* − 1 − ln ω*)/2`.
    pub fn uniform_baseline(&self) -> f64 {
        let w = self.omega_star;
        0.5 * (w - 1.0 - w.ln())
    }

    /// `A = (ω*−1)/(2ω*−1)`, the squared projection weight of the teacher energy on `c₁`.
    fn a_sq(&self) -> f64 {
        let w = self.omega_star;
        ((w - 1.0) / (2.0 * w - 1.0)).powi(2)
    }
}

fn half_mu_minus_f(sol: &EquilibriumSolution, hyper: &Hyper) -> f64 {
    let f = hyper.bulk().f(sol.mu).expect("mu above the bulk edge");
    0.5 * (sol.mu - f)
}

fn f_of_mu(sol: &EquilibriumSolution, hyper: &Hyper) -> f64 {
    hyper.bulk().f(sol.mu).expect("mu above the bulk edge")
}

/// `(1/N)⟨E(x; W*)⟩` under the posterior predictive.
fn teacher_energy_pp(t: &Teacher, sol: &EquilibriumSolution, hyper: &Hyper) -> f64 {
    let (w, g, e) = (t.omega_star, hyper.gamma, hyper.eta);
    let x = e * t.c1 * sol.chi[0] - 1.0;
    (g / e * w * w / (2.0 * w - 1.0).powi(2) * x - 1.0) * (w - 1.0) / 2.0
}

/// `(1/N)⟨⟨E(x; W)⟩_{P*}⟩` over the posterior.
fn student_energy_fwd(t: &Teacher, sol: &EquilibriumSolution, hyper: &Hyper) -> f64 {
    -(t.c1 * sol.chi[0] - 1.0 / hyper.eta) * t.a_sq()
}

pub fn kl_reverse_typical(t: &Teacher, hyper: &Hyper) -> Result<f64> {
    let sol = classify_phase(&t.spectrum(), hyper)?;
    Ok(kl_reverse_typical_from(t, hyper, &sol))
}

fn kl_reverse_typical_from(t: &Teacher, hyper: &Hyper, sol: &EquilibriumSolution) -> f64 {
    let w = t.omega_star;
    teacher_energy_pp(t, sol, hyper) + 0.5 * (w - 1.0 - w.ln() + f_of_mu(sol, hyper))
}

pub fn kl_forward_typical(t: &Teacher, hyper: &Hyper) -> Result<f64> {
    let sol = classify_phase(&t.spectrum(), hyper)?;
    Ok(kl_forward_typical_from(t, hyper, &sol))
}

fn kl_forward_typical_from(t: &Teacher, hyper: &Hyper, sol: &EquilibriumSolution) -> f64 {
    student_energy_fwd(t, sol, hyper) + half_mu_minus_f(sol, hyper)
        - 0.5 * (1.0 - t.omega_star.ln())
}

/// Overlaps of posterior-predictive samples with the data modes and the three
/// nonzero eigenvalues of `C_x = C + xxᵀ/(ηN)`, sorted descending.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpSpectrum {
    pub m1_sq: f64,
    pub m2_sq: f64,
    pub tilde_c: [f64; 3],
}

pub fn pp_perturbed_spectrum(t: &Teacher, hyper: &Hyper) -> Result<PpSpectrum> {
    let sol = classify_phase(&t.spectrum(), hyper)?;
    pp_spectrum_from(t, hyper, &sol)
}

fn pp_overlaps(t: &Teacher, hyper: &Hyper, sol: &EquilibriumSolution) -> (f64, f64) {
    let (g, e) = (hyper.gamma, hyper.eta);
    let m = |c: f64, chi: f64| (0.5 * c - 0.5 * g * (chi - 1.0 / (e * c))).max(0.0);
    (m(t.c1, sol.chi[0]), m(t.c2, sol.chi[1]))
}

fn pp_spectrum_from(t: &Teacher, hyper: &Hyper, sol: &EquilibriumSolution) -> Result<PpSpectrum> {
    let (m1, m2) = pp_overlaps(t, hyper, sol);
    let tilde_c = pp_cubic_roots(t.c1, t.c2, m1, m2, hyper.eta)?;
    Ok(PpSpectrum { m1_sq: m1, m2_sq: m2, tilde_c })
}

/// Monic coefficients `(a, b, d)` of `c̃³ + a c̃² + b c̃ + d` whose roots are the spectrum of `C_x`.
pub fn pp_cubic_coefficients(c1: f64, c2: f64, m1: f64, m2: f64, eta: f64) -> (f64, f64, f64) {
    let rest = 1.0 - m1 - m2;
    let a = -(1.0 + eta * (c1 + c2)) / eta;
    let b = (m1 * c2 + m2 * c1 + rest * (c1 + c2) + eta * c1 * c2) / eta;
    let d = -rest * c1 * c2 / eta;
    (a, b, d)
}

fn pp_cubic_roots(c1: f64, c2: f64, m1: f64, m2: f64, eta: f64) -> Result<[f64; 3]> {
    let (a, b, d) = pp_cubic_coefficients(c1, c2, m1, m2, eta);
    real_cubic_roots(a, b, d)
}

/// Three real roots of `x³ + a x² + b x + d`, descending.
///
/// Trigonometric form, with the companion matrix taking over when the
/// discriminant is within [`CUBIC_DISC_TOL`] of zero. Fails with
/// [`Error::CubicDegeneracy`] only if the roots cannot be resolved as real.
pub fn real_cubic_roots(a: f64, b: f64, d: f64) -> Result<[f64; 3]> {
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + d;
    let scale = 1.0 + a.abs().max(b.abs().sqrt()).max(d.abs().cbrt());
    let disc = -(4.0 * p * p * p + 27.0 * q * q) / scale.powi(6);
    let mut roots = if disc > CUBIC_DISC_TOL && p < 0.0 {
        let r = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * r)).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        [0.0, 1.0, 2.0].map(|k| r * (phi - 2.0 * PI * k / 3.0).cos() - a / 3.0)
    } else {
        let m = Matrix3::new(-a, -b, -d, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0);
        let ev = m.complex_eigenvalues();
        let mut out = [0.0; 3];
        for (i, z) in ev.iter().enumerate() {
            if z.im.abs() > 1e-7 * scale {
                return Err(Error::CubicDegeneracy(disc));
            }
            out[i] = z.re;
        }
        out
    };
    for r in roots.iter_mut() {
        for _ in 0..3 {
            let f = ((*r + a) * *r + b) * *r + d;
            let df = (3.0 * *r + 2.0 * a) * *r + b;
            if df.abs() < 1e-300 {
                break;
            }
            let step = f / df;
            if step.abs() > 1e-6 * scale {
                break;
            }
            *r -= step;
        }
    }
    roots.sort_by(|x, y| y.total_cmp(x));
    Ok(roots)
}

fn phi_of(eigs: &[f64], hyper: &Hyper) -> Result<f64> {
    evidence_phi(&DataSpectrum::new(eigs.to_vec())?, hyper)
}

pub fn kl_reverse_pp(t: &Teacher, hyper: &Hyper) -> Result<f64> {
    let sol = classify_phase(&t.spectrum(), hyper)?;
    kl_reverse_pp_from(t, hyper, &sol)
}

fn kl_reverse_pp_from(t: &Teacher, hyper: &Hyper, sol: &EquilibriumSolution) -> Result<f64> {
    let pp = pp_spectrum_from(t, hyper, sol)?;
    let w = t.omega_star;
    Ok(teacher_energy_pp(t, sol, hyper) + 0.5 * (w - w.ln()) + phi_of(&pp.tilde_c, hyper)?
        - phi_of(&[t.c1, t.c2], hyper)?)
}

/// `λ±` of `C_x` when `x` is a teacher sample.
pub fn lambda_pm(t: &Teacher, eta: f64) -> (f64, f64) {
    let (c1, c2) = (t.c1, t.c2);
    let inv = 1.0 / eta;
    let root = ((c1 - inv).powi(2) + 2.0 * inv * (c1 - c2).powi(2)).sqrt();
    (0.5 * (c1 + inv + root), 0.5 * (c1 + inv - root))
}

pub fn kl_forward_pp(t: &Teacher, hyper: &Hyper) -> Result<f64> {
    let (lp, lm) = lambda_pm(t, hyper.eta);
    Ok(-0.5 * (1.0 - t.omega_star.ln()) - phi_of(&[lp, lm, t.c2], hyper)?
        + phi_of(&[t.c1, t.c2], hyper)?)
}

/// `(1/N) H[P_pp]`, including the `½ ln 2π` base-measure constant.
pub fn pp_entropy(t: &Teacher, hyper: &Hyper) -> Result<f64> {
    let pp = pp_perturbed_spectrum(t, hyper)?;
    Ok(0.5 * (2.0 * PI).ln() + phi_of(&[t.c1, t.c2], hyper)? - phi_of(&pp.tilde_c, hyper)?)
}

pub const KL_REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlReport {
    pub schema_version: u32,
    pub omega_star: f64,
    pub gamma: f64,
    pub eta: f64,
    pub phase: Phase,
    pub reverse_typical: f64,
    pub reverse_pp: f64,
    pub forward_typical: f64,
    pub forward_pp: f64,
    pub teacher_entropy: f64,
    pub typical_entropy: f64,
    pub pp_entropy: f64,
    /// `(1/N) H[P_pp; P*]`, shared by typical and predictive students.
    pub reverse_cross_entropy: f64,
    /// `(1/N)⟨H[P*; P_W]⟩`
    pub forward_cross_entropy_typical: f64,
    pub pp: PpSpectrum,
    pub lambda1: f64,
    pub h_sq: f64,
    pub u1_sq: f64,
    /// Declared tolerance beyond the leading-order `O(1/N)` truncation.
    pub truncation_tol: f64,
}

impl KlReport {
    pub const CSV_HEADER: &'static str =
        "omega_star,gamma,eta,phase,reverse_typical,reverse_pp,forward_typical,forward_pp";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.omega_star,
            self.gamma,
            self.eta,
            self.phase.label(),
            self.reverse_typical,
            self.reverse_pp,
            self.forward_typical,
            self.forward_pp
        )
    }
}

pub fn kl_report(t: &Teacher, hyper: &Hyper) -> Result<KlReport> {
    let sol = classify_phase(&t.spectrum(), hyper)?;
    let pp = pp_spectrum_from(t, hyper, &sol)?;
    let ln_2pi = (2.0 * PI).ln();
    let phi_c = phi_of(&[t.c1, t.c2], hyper)?;
    let phi_pp = phi_of(&pp.tilde_c, hyper)?;
    let (lp, lm) = lambda_pm(t, hyper.eta);
    let phi_fwd = phi_of(&[lp, lm, t.c2], hyper)?;
    let w = t.omega_star;
    let e_pp = teacher_energy_pp(t, &sol, hyper);
    let lnz = 0.5 * ln_2pi + half_mu_minus_f(&sol, hyper);
    Ok(KlReport {
        schema_version: KL_REPORT_SCHEMA,
        omega_star: w,
        gamma: hyper.gamma,
        eta: hyper.eta,
        phase: sol.phase,
        reverse_typical: kl_reverse_typical_from(t, hyper, &sol),
        reverse_pp: e_pp + 0.5 * (w - w.ln()) + phi_pp - phi_c,
        forward_typical: kl_forward_typical_from(t, hyper, &sol),
        forward_pp: -0.5 * (1.0 - w.ln()) - phi_fwd + phi_c,
        teacher_entropy: t.entropy_intensive(),
        typical_entropy: 0.5 * ((2.0 * PI * E).ln() - f_of_mu(&sol, hyper)),
        pp_entropy: 0.5 * ln_2pi + phi_c - phi_pp,
        reverse_cross_entropy: e_pp + t.log_partition_intensive(),
        forward_cross_entropy_typical: student_energy_fwd(t, &sol, hyper) + lnz,
        pp,
        lambda1: sol.lambda1(),
        h_sq: sol.h_sq,
        u1_sq: sol.u_sq[0],
        truncation_tol: TRUNCATION_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::SymmetricEigen;

    fn hyper(g: f64, e: f64) -> Hyper {
        Hyper::statics(g, e).unwrap()
    }

    #[test]
    fn teacher_fields() {
        let t = Teacher::new(2.5).unwrap();
        assert_abs_diff_eq!(t.c1, 1.6, epsilon = 1e-15);
        assert_abs_diff_eq!(t.c2, 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(t.overlap_sq, 0.75, epsilon = 1e-15);
        assert!(Teacher::new(1.0).is_err());
        assert!(Teacher::new(f64::INFINITY).is_err());
    }

    #[test]
    fn reverse_typical_h0_branch() {
        let t = Teacher::new(2.5).unwrap();
        for (g, e) in [(2.0, 3.0), (1.7, 5.0), (4.0, 0.5)] {
            let h = hyper(g, e);
            let expect = t.uniform_baseline() + 1.0 / (4.0 * g * e);
            assert_abs_diff_eq!(kl_reverse_typical(&t, &h).unwrap(), expect, epsilon = 1e-12);
        }
        let big = kl_reverse_typical(&t, &hyper(2.0, 1e9)).unwrap();
        assert_abs_diff_eq!(big, 0.29186, epsilon = 1e-4);
    }

    #[test]
    fn reverse_typical_matches_g1_parametrisation() {
        let t = Teacher::new(2.5).unwrap();
        for i in 1..40 {
            let g1 = 1.0 / t.omega_star + (1.0 - 1.0 / t.omega_star) * i as f64 / 40.0;
            let gamma = dd_gamma_of_g(t.omega_star, g1);
            let eta = 1.5 * dd_eta_f(t.omega_star, g1).max(0.5);
            let direct = kl_reverse_typical(&t, &hyper(gamma, eta)).unwrap();
            let branch = dd_branch_kl(t.omega_star, g1, eta);
            assert_abs_diff_eq!(direct, branch, epsilon = 1e-10);
        }
    }

    fn roots_by_symmetric_eigen(c1: f64, c2: f64, m1: f64, m2: f64, eta: f64) -> [f64; 3] {
        let a = nalgebra::Vector3::new(m1.sqrt(), m2.sqrt(), (1.0 - m1 - m2).sqrt());
        let m = Matrix3::from_diagonal(&nalgebra::Vector3::new(c1, c2, 0.0)) + a * a.transpose() / eta;
        let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        ev.sort_by(|x, y| y.total_cmp(x));
        [ev[0], ev[1], ev[2]]
    }

    #[test]
    fn cubic_matches_rank_one_update() {
        let (c1, c2) = (1.6, 0.4);
        for &(m1, m2, eta) in &[(0.3, 0.1, 2.0), (0.0, 0.0, 0.7), (0.5, 0.0, 10.0), (0.01, 0.2, 0.05)] {
            let r = pp_cubic_roots(c1, c2, m1, m2, eta).unwrap();
            let o = roots_by_symmetric_eigen(c1, c2, m1, m2, eta);
            for i in 0..3 {
                assert_abs_diff_eq!(r[i], o[i], epsilon = 1e-10);
            }
            assert_abs_diff_eq!(r.iter().sum::<f64>(), 2.0 + 1.0 / eta, epsilon = 1e-12);
        }
    }

    #[test]
    fn cubic_companion_fallback_on_double_root() {
        // (x−1)²(x−3)
        let r = real_cubic_roots(-5.0, 7.0, -3.0).unwrap();
        assert_abs_diff_eq!(r[0], 3.0, epsilon = 1e-10);
        assert_abs_diff_eq!(r[1], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(r[2], 1.0, epsilon = 1e-6);
        assert!(matches!(real_cubic_roots(0.0, 1.0, 0.0), Err(Error::CubicDegeneracy(_))));
    }

    #[test]
    fn zero_overlap_roots_decouple() {
        let r = pp_cubic_roots(1.6, 0.4, 0.0, 0.0, 4.0).unwrap();
        assert_abs_diff_eq!(r[0], 1.6, epsilon = 1e-12);
        assert_abs_diff_eq!(r[1], 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(r[2], 0.25, epsilon = 1e-12);
    }

    #[test]
    fn lambda_pm_identities() {
        let t = Teacher::new(2.2).unwrap();
        for eta in [0.1, 0.9, 3.0, 40.0] {
            let (lp, lm) = lambda_pm(&t, eta);
            assert_abs_diff_eq!(lp * lm, (t.c1 - 0.5 * (t.c1 - t.c2).powi(2)) / eta, epsilon = 1e-12);
            assert_abs_diff_eq!(lp + lm + t.c2, 2.0 + 1.0 / eta, epsilon = 1e-12);
        }
    }

    #[test]
    fn reverse_pp_uniform_in_zero_overlap_sector() {
        let t = Teacher::new(2.5).unwrap();
        for (g, e) in [(2.0, 3.0), (1.7, 0.3), (3.0, 20.0)] {
            let v = kl_reverse_pp(&t, &hyper(g, e)).unwrap();
            assert_abs_diff_eq!(v, t.uniform_baseline(), epsilon = 1e-10);
        }
    }

    #[test]
    fn reverse_pp_matches_reduced_form() {
        let t = Teacher::new(2.5).unwrap();
        let gm = g_map(t.omega_star);
        for &g in &[0.3, 0.6, 1.0, 1.4] {
            for &e in &[0.8, 2.0, 7.0, 30.0] {
                let h = hyper(g, e);
                let pp = pp_perturbed_spectrum(&t, &h).unwrap();
                let reduced =
                    t.uniform_baseline() - pp.m1_sq / (2.0 * gm) - 0.5 * (1.0 - pp.m1_sq - pp.m2_sq).ln();
                let sol = classify_phase(&t.spectrum(), &h).unwrap();
                if sol.phase == Phase::CondensedOutlier && sol.d == 1 {
                    assert_abs_diff_eq!(kl_reverse_pp(&t, &h).unwrap(), reduced, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn pp_entropy_limits_and_gap() {
        let t = Teacher::new(2.5).unwrap();
        let uniform = 0.5 * (2.0 * PI * E).ln();
        assert_abs_diff_eq!(pp_entropy(&t, &hyper(0.8, 1e-6)).unwrap(), uniform, epsilon = 1e-6);
        for (g, e) in [(0.5, 2.0), (1.0, 5.0), (0.2, 0.5)] {
            let h = hyper(g, e);
            let r = kl_report(&t, &h).unwrap();
            let gap = r.reverse_typical - r.reverse_pp;
            assert_abs_diff_eq!(gap, r.pp_entropy - r.typical_entropy, epsilon = 1e-10);
            assert!(gap >= -TRUNCATION_TOL);
        }
        let r = kl_report(&t, &hyper(0.5, 1e7)).unwrap();
        assert!((r.reverse_typical - r.reverse_pp).abs() < 1e-5);
    }

    #[test]
    fn report_is_consistent() {
        let t = Teacher::new(1.8).unwrap();
        let h = hyper(0.6, 4.0);
        let r = kl_report(&t, &h).unwrap();
        assert_abs_diff_eq!(r.reverse_typical, kl_reverse_typical(&t, &h).unwrap(), epsilon = 1e-14);
        assert_abs_diff_eq!(r.reverse_pp, kl_reverse_pp(&t, &h).unwrap(), epsilon = 1e-14);
        assert_abs_diff_eq!(r.forward_typical, kl_forward_typical(&t, &h).unwrap(), epsilon = 1e-14);
        assert_abs_diff_eq!(r.forward_pp, kl_forward_pp(&t, &h).unwrap(), epsilon = 1e-14);
        assert_abs_diff_eq!(
            r.forward_typical,
            r.forward_cross_entropy_typical - r.teacher_entropy,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(r.reverse_pp, r.reverse_cross_entropy - r.pp_entropy, epsilon = 1e-12);
        let json = serde_json::to_string(&r).unwrap();
        let back: KlReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
        assert_eq!(r.csv_row().split(',').count(), KlReport::CSV_HEADER.split(',').count());
    }
}
