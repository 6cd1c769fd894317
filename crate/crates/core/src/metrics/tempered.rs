//! Optimal posterior temperature of the predictive student.
//!
//! Both classifiers work from closed-form thresholds in `γ` at fixed `ω*`.

use super::tuning::{g_map, golden_min};
use super::{kl_reverse_pp, Teacher};
use crate::equilibrium::Hyper;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Below this teacher strength the reverse optimum sits on the zero-overlap plateau.
pub const OMEGA_0: f64 = 1.0 + std::f64::consts::FRAC_1_SQRT_2;
/// Above this teacher strength the two-mode branch sets the reverse warm/cold boundary.
pub const OMEGA_2: f64 = 2.366_025_403_784_438_6;

const ETA_RANGE: (f64, f64) = (1e-3, 1e3);
const ETA_POINTS: usize = 600;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TemperedLabel {
    Warm,
    Cold,
    #[serde(rename = "MAP")]
    Map,
    Deg,
    WarmDeg,
    WarmFlat,
    Mixed,
    ColdUnique,
}

impl TemperedLabel {
    pub fn label(&self) -> &'static str {
        match self {
            TemperedLabel::Warm => "warm",
            TemperedLabel::Cold => "cold",
            TemperedLabel::Map => "map",
            TemperedLabel::Deg => "deg",
            TemperedLabel::WarmDeg => "warm_deg",
            TemperedLabel::WarmFlat => "warm_flat",
            TemperedLabel::Mixed => "mixed",
            TemperedLabel::ColdUnique => "cold_unique",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EtaOpt {
    Point { eta: f64 },
    Interval { lo: f64, hi: f64 },
    /// Flat warm interval and an isolated cold point at the same height.
    PointAndInterval { eta: f64, lo: f64, hi: f64 },
    Infinity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperedPhase {
    pub label: TemperedLabel,
    pub eta_opt: EtaOpt,
}

/// `γ` at which the single-mode reverse optimum crosses `η = 1`.
pub fn rev_gamma_wc1(t: &Teacher) -> f64 {
    let (c1, c2) = (t.c1, t.c2);
    let s = c2 + 3.0 * c1;
    let g = 0.25 * (s - (s * s - 16.0 * c1 * g_map(t.omega_star)).sqrt());
    2.0 * g * g - c2 * g
}

/// Two-mode warm/cold boundary `α²`, with `α ∈ (0, c₂)` the root of
/// `α(c₁−α)(2c₁c₂−α) = 2c₁ g_MAP (c₁c₂−α)`.
pub fn rev_gamma_wc2(t: &Teacher) -> Result<f64> {
    let (c1, c2) = (t.c1, t.c2);
    let gm = g_map(t.omega_star);
    let f = |a: f64| a * (c1 - a) * (2.0 * c1 * c2 - a) - 2.0 * c1 * gm * (c1 * c2 - a);
    let (mut lo, mut hi) = (0.0, c2);
    let (flo, fhi) = (f(lo), f(hi));
    if flo.signum() == fhi.signum() {
        return Err(Error::RootBracketFailure(format!(
            "two-mode boundary has no root in (0, {c2}) at omega_star={}",
            t.omega_star
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid).signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let a = 0.5 * (lo + hi);
    Ok(a * a)
}

/// Reverse cold/MAP boundary `(2ω*−1)/(2ω*(ω*−1)²)`.
pub fn rev_gamma_inf(t: &Teacher) -> f64 {
    let w = t.omega_star;
    (2.0 * w - 1.0) / (2.0 * w * (w - 1.0).powi(2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaProfileMin {
    pub eta: f64,
    pub value: f64,
    /// The minimum sits on the largest grid point: the profile is still falling.
    pub at_upper: bool,
}

/// Minimum of `f(η)` on a log grid over `[1e−3, 1e3]`, refined once around the best cell.
pub fn eta_profile_min(f: impl Fn(f64) -> Result<f64>) -> Result<EtaProfileMin> {
    let (l0, l1) = (ETA_RANGE.0.ln(), ETA_RANGE.1.ln());
    let h = (l1 - l0) / (ETA_POINTS - 1) as f64;
    let mut best = (0, f64::INFINITY);
    for i in 0..ETA_POINTS {
        let v = f((l0 + h * i as f64).exp())?;
        if v < best.1 {
            best = (i, v);
        }
    }
    if best.0 == ETA_POINTS - 1 {
        return Ok(EtaProfileMin { eta: ETA_RANGE.1, value: best.1, at_upper: true });
    }
    let lo = l0 + h * best.0.saturating_sub(1) as f64;
    let hi = l0 + h * (best.0 + 1) as f64;
    let (x, v) = golden_min(|x| f(x.exp()).unwrap_or(f64::INFINITY), lo, hi, 1e-9);
    let (eta, value) = if v < best.1 { (x.exp(), v) } else { ((l0 + h * best.0 as f64).exp(), best.1) };
    Ok(EtaProfileMin { eta, value, at_upper: false })
}

pub fn tempered_reverse_phase(t: &Teacher, gamma: f64) -> Result<TemperedPhase> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidInput(format!("gamma must be positive, got {gamma}")));
    }
    let w = t.omega_star;
    if w <= OMEGA_0 {
        return Ok(if gamma < t.c1 {
            TemperedPhase {
                label: TemperedLabel::WarmDeg,
                eta_opt: EtaOpt::Interval { lo: 0.0, hi: gamma / (t.c1 * t.c1) },
            }
        } else {
            TemperedPhase {
                label: TemperedLabel::Deg,
                eta_opt: EtaOpt::Interval { lo: 0.0, hi: f64::INFINITY },
            }
        });
    }
    if gamma >= rev_gamma_inf(t) {
        return Ok(TemperedPhase { label: TemperedLabel::Map, eta_opt: EtaOpt::Infinity });
    }
    let gwc = if w <= OMEGA_2 {
        rev_gamma_wc1(t)
    } else {
        rev_gamma_wc2(t).unwrap_or_else(|_| rev_gamma_wc1(t))
    };
    let label = if gamma < gwc { TemperedLabel::Warm } else { TemperedLabel::Cold };
    let m = eta_profile_min(|eta| kl_reverse_pp(t, &Hyper::statics(gamma, eta)?))?;
    Ok(TemperedPhase { label, eta_opt: EtaOpt::Point { eta: m.eta } })
}

/// Forward warm/cold boundary `1/ω*²`.
pub fn fwd_gamma_wc(t: &Teacher) -> f64 {
    t.c2 * t.c2
}

/// Above this `γ` the forward warm plateau no longer exists.
pub fn fwd_gamma_flat(t: &Teacher) -> f64 {
    (t.c1.sqrt() - (t.c1 - t.c2) / std::f64::consts::SQRT_2).powi(2)
}

/// Forward cold/MAP boundary.
pub fn fwd_gamma_inf(t: &Teacher) -> f64 {
    let w = t.omega_star;
    (3.0 * w - 2.0) * (4.0 * w - 3.0) / (w * w * (2.0 * w - 1.0).powi(2))
}

/// Smooth-branch stationary point `η₀` of the forward KL, `None` past the MAP boundary.
pub fn fwd_eta0(t: &Teacher, gamma: f64) -> Option<f64> {
    let g1 = 0.25 * (t.c2 + (t.c2 * t.c2 + 8.0 * gamma).sqrt());
    let den = t.c1 * (1.0 - g1) - 0.5 * (t.c1 - t.c2).powi(2);
    (den > 0.0).then(|| g1 * (1.0 - g1) / den)
}

/// Warm plateau `[η₋, min(1, η₊)]` of the forward KL, `None` when it is empty.
pub fn fwd_warm_interval(t: &Teacher, gamma: f64) -> Option<(f64, f64)> {
    let b = gamma + t.c1 - 0.5 * (t.c1 - t.c2).powi(2);
    let disc = b * b - 4.0 * gamma * t.c1;
    if disc < 0.0 || b <= 0.0 {
        return None;
    }
    let r = disc.sqrt();
    let eta_minus = 4.0 * gamma / (b + r).powi(2);
    let eta_plus = 4.0 * gamma / (b - r).powi(2);
    let hi = eta_plus.min(1.0);
    (eta_minus <= hi).then_some((eta_minus, hi))
}

pub fn tempered_forward_phase(t: &Teacher, gamma: f64) -> Result<TemperedPhase> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidInput(format!("gamma must be positive, got {gamma}")));
    }
    let eta0 = match fwd_eta0(t, gamma) {
        Some(e) if gamma < fwd_gamma_inf(t) => e,
        _ => return Ok(TemperedPhase { label: TemperedLabel::Map, eta_opt: EtaOpt::Infinity }),
    };
    let warm = fwd_warm_interval(t, gamma);
    let phase = match warm {
        Some((lo, hi)) if gamma < fwd_gamma_wc(t) => TemperedPhase {
            label: TemperedLabel::WarmFlat,
            eta_opt: EtaOpt::Interval { lo, hi },
        },
        Some((lo, hi)) if gamma <= fwd_gamma_flat(t) => TemperedPhase {
            label: TemperedLabel::Mixed,
            eta_opt: EtaOpt::PointAndInterval { eta: eta0, lo, hi },
        },
        // An empty plateau leaves the smooth branch in charge.
        _ => TemperedPhase {
            label: if eta0 > 1.0 { TemperedLabel::ColdUnique } else { TemperedLabel::WarmFlat },
            eta_opt: EtaOpt::Point { eta: eta0 },
        },
    };
    Ok(phase)
}

#[cfg(test)]
mod tests {
    use super::super::kl_forward_pp;
    use super::*;
    use approx::assert_abs_diff_eq;

    fn teacher(w: f64) -> Teacher {
        Teacher::new(w).unwrap()
    }

    #[test]
    fn constants() {
        assert_abs_diff_eq!(OMEGA_2, (3.0 + 3f64.sqrt()) / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn reverse_figure_examples() {
        let t = teacher(2.2);
        assert_abs_diff_eq!(rev_gamma_inf(&t), 3.4 / (4.4 * 1.44), epsilon = 1e-12);
        let labels: Vec<_> = [0.1, 0.3, 1.0]
            .iter()
            .map(|&g| tempered_reverse_phase(&t, g).unwrap().label)
            .collect();
        assert_eq!(labels, [TemperedLabel::Warm, TemperedLabel::Cold, TemperedLabel::Map]);
        let p = tempered_reverse_phase(&teacher(1.7), 0.5).unwrap();
        assert_eq!(p.label, TemperedLabel::WarmDeg);
        assert_eq!(tempered_reverse_phase(&teacher(1.7), 2.0).unwrap().label, TemperedLabel::Deg);
    }

    #[test]
    fn reverse_point_is_on_the_right_side_of_one() {
        let t = teacher(2.2);
        for (g, warm) in [(0.1, true), (0.2, true), (0.3, false), (0.45, false)] {
            let p = tempered_reverse_phase(&t, g).unwrap();
            let EtaOpt::Point { eta } = p.eta_opt else { panic!("{p:?}") };
            assert_eq!(eta < 1.0, warm, "gamma {g}: eta {eta}");
        }
    }

    #[test]
    fn two_mode_boundary_exists_above_omega2() {
        for w in [2.5, 3.0, 5.0] {
            let g = rev_gamma_wc2(&teacher(w)).unwrap();
            assert!(g > 0.0 && g < teacher(w).c2.powi(2));
        }
    }

    #[test]
    fn forward_thresholds_ordered() {
        assert_abs_diff_eq!(fwd_gamma_wc(&teacher(2.0)), 0.25, epsilon = 1e-15);
        for i in 1..60 {
            let t = teacher(1.0 + 0.1 * i as f64);
            let (a, b, c) = (fwd_gamma_wc(&t), fwd_gamma_flat(&t), fwd_gamma_inf(&t));
            assert!(a < b && b < c, "omega {}: {a} {b} {c}", t.omega_star);
        }
    }

    #[test]
    fn forward_gamma_inf_closed_form() {
        for w in [1.3, 2.0, 4.0] {
            let t = teacher(w);
            let x = 1.0 - (t.c1 - t.c2).powi(2) / (2.0 * t.c1);
            assert_abs_diff_eq!(fwd_gamma_inf(&t), 2.0 * x * x - t.c2 * x, epsilon = 1e-12);
        }
    }

    #[test]
    fn forward_plateau_is_flat() {
        let t = teacher(2.0);
        let g = 0.5 * fwd_gamma_wc(&t);
        let (lo, hi) = fwd_warm_interval(&t, g).unwrap();
        let v0 = kl_forward_pp(&t, &Hyper::statics(g, lo * 1.001).unwrap()).unwrap();
        for i in 1..20 {
            let eta = lo + (hi - lo) * (0.001 + 0.998 * i as f64 / 20.0);
            let v = kl_forward_pp(&t, &Hyper::statics(g, eta).unwrap()).unwrap();
            assert_abs_diff_eq!(v, v0, epsilon = 1e-10);
        }
    }

    #[test]
    fn forward_labels() {
        let t = teacher(2.0);
        let cases = [
            (0.5 * fwd_gamma_wc(&t), TemperedLabel::WarmFlat),
            (0.5 * (fwd_gamma_wc(&t) + fwd_gamma_flat(&t)), TemperedLabel::Mixed),
            (0.5 * (fwd_gamma_flat(&t) + fwd_gamma_inf(&t)), TemperedLabel::ColdUnique),
            (1.1 * fwd_gamma_inf(&t), TemperedLabel::Map),
        ];
        for (g, want) in cases {
            assert_eq!(tempered_forward_phase(&t, g).unwrap().label, want, "gamma {g}");
        }
    }

    #[test]
    fn eta_profile_min_locates_quadratic() {
        let m = eta_profile_min(|e| Ok((e.ln() - 0.7).powi(2))).unwrap();
        assert_abs_diff_eq!(m.eta, 0.7f64.exp(), epsilon = 1e-6);
        assert!(!m.at_upper);
        assert!(eta_profile_min(|e| Ok(-e)).unwrap().at_upper);
    }
}
