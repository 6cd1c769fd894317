//! Time-translation-invariant solutions of the dynamics.
//!
//! With `τ = t − t'` the stationary response and correlation satisfy
//! `R' = −κR + (M∗R)` and `Q' = σ₀ − κQ + (M∗Q) + ∫M(τ+σ)Q(σ)dσ + ∫D_s(τ+σ)R(σ)dσ`,
//! where `σ₀ = (ν/γ)Σc_k s_k²` and `κ = ν + σ₀ + ∫MQ + ∫D_sR` keeps `Q(0) = 1`.
//! A nonzero stationary signal additionally requires `κ − ∫M = (ν/γ)c₁`.

use crate::equilibrium::{DataSpectrum, Hyper};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathOptions {
    /// Upper bound on the τ step; the step used is `min(dtau, 0.3/ν)`.
    pub dtau: f64,
    /// Horizon in units of `1/γ`.
    pub horizon: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
}

impl Default for BathOptions {
    fn default() -> Self {
        Self { dtau: 1e-2, horizon: 60.0, tol: 1e-9, max_iter: 400, damping: 0.5 }
    }
}

impl BathOptions {
    /// Same options with the τ step halved.
    pub fn refined(&self) -> Self {
        Self { dtau: 0.5 * self.dtau, ..*self }
    }

    fn step(&self, nu: f64) -> f64 {
        self.dtau.min(0.3 / nu)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BathSolution {
    pub dtau: f64,
    pub q: Vec<f64>,
    pub r: Vec<f64>,
    pub kappa: f64,
    /// `∫₀^∞ M(τ)dτ`
    pub m_hat: f64,
    /// `∫₀^∞ R(τ)dτ = 1/(κ − ∫M)`
    pub chi_p: f64,
    pub iterations: usize,
}

fn trap(f: &[f64], h: f64) -> f64 {
    match f.len() {
        0 | 1 => 0.0,
        n => h * (f.iter().sum::<f64>() - 0.5 * (f[0] + f[n - 1])),
    }
}

/// Solves `X' = −κX + ∫₀^τ M(τ−σ)X(σ)dσ + src(τ)`, `X(0) = 1`, with the implicit trapezoid rule.
fn volterra(m: &[f64], kappa: f64, h: f64, src: &[f64], out: &mut [f64]) {
    let n = m.len();
    out[0] = 1.0;
    let a = -kappa + 0.5 * h * m[0];
    let mut f_prev = -kappa + src[0];
    for i in 0..n - 1 {
        let mut s = 0.5 * m[i + 1] * out[0];
        for j in 1..=i {
            s += m[i + 1 - j] * out[j];
        }
        let b = h * s + src[i + 1];
        out[i + 1] = (out[i] + 0.5 * h * (f_prev + b)) / (1.0 - 0.5 * h * a);
        f_prev = a * out[i + 1] + b;
    }
}

/// Adds `∫₀^∞ K(τ+σ)X(σ)dσ` (truncated at the horizon) to `out`.
fn add_tail(k: &[f64], x: &[f64], h: f64, out: &mut [f64]) {
    let n = k.len();
    for i in 0..n {
        let len = n - i;
        if len < 2 {
            continue;
        }
        let kk = &k[i..];
        let mut s = 0.5 * (kk[0] * x[0] + kk[len - 1] * x[len - 1]);
        for j in 1..len - 1 {
            s += kk[j] * x[j];
        }
        out[i] += h * s;
    }
}

/// Stationary bath at fixed signal source `sigma0`. `eta = ∞` is the MAP limit.
pub fn solve_bath(
    kernel_rank: f64,
    gamma: f64,
    eta: f64,
    nu: f64,
    sigma0: f64,
    opts: &BathOptions,
    warm: Option<&BathSolution>,
) -> Result<BathSolution> {
    if !(gamma > 0.0 && nu > 0.0 && eta > 0.0) {
        return Err(Error::InvalidInput(format!(
            "bath needs positive gamma, eta, nu (got {gamma}, {eta}, {nu})"
        )));
    }
    let h = opts.step(nu);
    let n = (opts.horizon / gamma / h) as usize + 1;
    let a = if eta.is_infinite() { 0.0 } else { nu * nu / (eta * gamma) };
    let e: Vec<f64> = (0..n).map(|i| (-0.5 * gamma * i as f64 * h).exp()).collect();
    let (mut q, mut r) = match warm {
        Some(w) if w.q.len() == n && w.dtau == h => (w.q.clone(), w.r.clone()),
        _ => {
            let v: Vec<f64> = (0..n).map(|i| (-nu * i as f64 * h).exp()).collect();
            (v.clone(), v)
        }
    };
    let mut m = vec![0.0; n];
    let mut ds = vec![0.0; n];
    let mut src = vec![0.0; n];
    let mut qn = vec![0.0; n];
    let mut rn = vec![0.0; n];
    let mut work = vec![0.0; n];
    let zero = vec![0.0; n];
    let mut diff = f64::INFINITY;
    let mut it = 0;
    let kernels = |q: &[f64], r: &[f64], m: &mut [f64], ds: &mut [f64]| {
        for i in 0..n {
            m[i] = e[i] * (-0.5 * kernel_rank * nu * q[i] + a * r[i]);
            ds[i] = a * e[i] * q[i];
        }
    };
    while it < opts.max_iter {
        it += 1;
        kernels(&q, &r, &mut m, &mut ds);
        for i in 0..n {
            work[i] = m[i] * q[i] + ds[i] * r[i];
        }
        let kappa = nu + sigma0 + trap(&work, h);
        volterra(&m, kappa, h, &zero, &mut rn);
        src.iter_mut().for_each(|v| *v = sigma0);
        add_tail(&m, &q, h, &mut src);
        add_tail(&ds, &rn, h, &mut src);
        volterra(&m, kappa, h, &src, &mut qn);
        diff = 0.0;
        for i in 0..n {
            diff = diff.max((qn[i] - q[i]).abs()).max((rn[i] - r[i]).abs());
            q[i] += opts.damping * (qn[i] - q[i]);
            r[i] += opts.damping * (rn[i] - r[i]);
        }
        if !diff.is_finite() {
            break;
        }
        if diff < opts.tol {
            break;
        }
    }
    if !(diff < opts.tol) {
        return Err(Error::NonConvergence {
            iterations: it,
            residual: diff,
            context: format!("stationary bath at gamma={gamma} eta={eta} nu={nu}"),
        });
    }
    kernels(&q, &r, &mut m, &mut ds);
    for i in 0..n {
        work[i] = m[i] * q[i] + ds[i] * r[i];
    }
    let kappa = nu + sigma0 + trap(&work, h);
    let m_hat = trap(&m, h);
    Ok(BathSolution {
        dtau: h,
        q,
        r,
        kappa,
        m_hat,
        chi_p: 1.0 / (kappa - m_hat),
        iterations: it,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryState {
    pub dtau: f64,
    /// Samples of `Q_st(τ)` at `τ = i·dtau`.
    pub q_st: Vec<f64>,
    pub r_st: Vec<f64>,
    pub s_st: Vec<f64>,
    pub kappa_st: f64,
    /// Integrated response of the uncondensed bath.
    pub chi_p: f64,
    pub condensed: bool,
}

impl StationaryState {
    /// Linear interpolation of `Q_st`; the last sample is held beyond the horizon.
    pub fn q_at(&self, tau: f64) -> f64 {
        interp(&self.q_st, self.dtau, tau)
    }

    pub fn r_at(&self, tau: f64) -> f64 {
        interp(&self.r_st, self.dtau, tau)
    }
}

fn interp(v: &[f64], h: f64, tau: f64) -> f64 {
    let x = (tau.abs() / h).max(0.0);
    let i = x.floor() as usize;
    if i + 1 >= v.len() {
        return *v.last().unwrap();
    }
    let f = x - i as f64;
    v[i] * (1.0 - f) + v[i + 1] * f
}

pub fn stationary_solve(spectrum: &DataSpectrum, hyper: &Hyper) -> Result<StationaryState> {
    stationary_solve_with(spectrum, hyper, &BathOptions::default())
}

/// Uncondensed bath first; if it is unstable towards the top data mode, the condensed
/// branch is located by root finding on the signal condition `κ − ∫M = (ν/γ)c₁`.
pub fn stationary_solve_with(
    spectrum: &DataSpectrum,
    hyper: &Hyper,
    opts: &BathOptions,
) -> Result<StationaryState> {
    hyper.validate()?;
    let (gamma, eta, nu) = (hyper.gamma, hyper.eta, hyper.nu);
    let kr = spectrum.rank() as f64;
    let c1 = spectrum.top();
    let b = nu / gamma;
    let bath = solve_bath(kr, gamma, eta, nu, 0.0, opts, None)?;
    let chi_p = bath.chi_p;
    let r0 = 1.0 / chi_p - b * c1;
    let mut s_st = vec![0.0; spectrum.rank()];
    if r0 >= 0.0 {
        return Ok(StationaryState {
            dtau: bath.dtau,
            q_st: bath.q,
            r_st: bath.r,
            s_st,
            kappa_st: bath.kappa,
            chi_p,
            condensed: false,
        });
    }
    let mut warm = bath;
    let residual = |s: f64, warm: &mut BathSolution| -> Result<f64> {
        let sol = solve_bath(kr, gamma, eta, nu, b * c1 * s * s, opts, Some(warm))?;
        let res = sol.kappa - sol.m_hat - b * c1;
        *warm = sol;
        Ok(res)
    };
    // Illinois false position on s ∈ (0, 1).
    let (mut lo, mut flo) = (0.0, r0);
    let mut hi = 1.0 - 1e-6;
    let mut fhi = residual(hi, &mut warm)?;
    if fhi <= 0.0 {
        return Err(Error::RootBracketFailure(format!(
            "signal residual stays negative up to s=1 (gamma={gamma}, eta={eta}, nu={nu})"
        )));
    }
    let mut side = 0i8;
    let mut s = 0.5;
    for _ in 0..100 {
        s = (lo * fhi - hi * flo) / (fhi - flo);
        let f = residual(s, &mut warm)?;
        if f.abs() < 1e-10 || (hi - lo) < 1e-10 {
            break;
        }
        if f < 0.0 {
            lo = s;
            flo = f;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = s;
            fhi = f;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
    }
    let sol = solve_bath(kr, gamma, eta, nu, b * c1 * s * s, opts, Some(&warm))?;
    s_st[0] = s;
    Ok(StationaryState {
        dtau: sol.dtau,
        q_st: sol.q,
        r_st: sol.r,
        s_st,
        kappa_st: sol.kappa,
        chi_p,
        condensed: true,
    })
}

/// `γ/(c₁χ_P)` evaluated on the uncondensed bath at the given `ν`.
pub fn nu_c_estimate(spectrum: &DataSpectrum, hyper: &Hyper, opts: &BathOptions) -> Result<f64> {
    hyper.validate()?;
    let bath = solve_bath(
        spectrum.rank() as f64,
        hyper.gamma,
        hyper.eta,
        hyper.nu,
        0.0,
        opts,
        None,
    )?;
    Ok(hyper.gamma / (spectrum.top() * bath.chi_p))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalNuOptions {
    pub nu_min: f64,
    pub nu_max: f64,
    pub scan_points: usize,
    /// Relative tolerance on the refined crossing.
    pub rel_tol: f64,
    pub bath: BathOptions,
}

impl Default for CriticalNuOptions {
    fn default() -> Self {
        Self {
            nu_min: 0.01,
            nu_max: 30.0,
            scan_points: 25,
            rel_tol: 1e-4,
            bath: BathOptions::default(),
        }
    }
}

pub fn critical_nu(spectrum: &DataSpectrum, hyper: &Hyper) -> Result<Option<f64>> {
    critical_nu_with(spectrum, hyper, &CriticalNuOptions::default())
}

/// Self-consistent threshold `ν_c = γ/(c₁χ_P(ν_c))`: the largest scanned `ν` at which
/// `νc₁χ_P(ν)/γ` crosses 1 from below. `None` when no such crossing lies in the scan range.
pub fn critical_nu_with(
    spectrum: &DataSpectrum,
    hyper: &Hyper,
    opts: &CriticalNuOptions,
) -> Result<Option<f64>> {
    hyper.validate()?;
    let kr = spectrum.rank() as f64;
    let (gamma, eta, c1) = (hyper.gamma, hyper.eta, spectrum.top());
    let f = |nu: f64| -> Result<f64> {
        let b = solve_bath(kr, gamma, eta, nu, 0.0, &opts.bath, None)?;
        Ok(nu * c1 * b.chi_p / gamma - 1.0)
    };
    let (l0, l1) = (opts.nu_min.ln(), opts.nu_max.ln());
    let m = opts.scan_points.max(2);
    let grid: Vec<f64> = (0..m).map(|i| (l0 + (l1 - l0) * i as f64 / (m - 1) as f64).exp()).collect();
    let mut vals = Vec::with_capacity(m);
    for &nu in grid.iter().rev() {
        let v = f(nu)?;
        vals.push((nu, v));
        if v < 0.0 {
            break;
        }
    }
    // vals runs downward in ν; the first negative entry closes the bracket.
    let Some(pos) = vals.iter().position(|&(_, v)| v < 0.0) else {
        return Ok(None);
    };
    if pos == 0 {
        return Ok(None);
    }
    let (mut lo, mut hi) = (vals[pos].0, vals[pos - 1].0);
    while hi / lo - 1.0 > opts.rel_tol {
        let mid = (lo * hi).sqrt();
        if f(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some((lo * hi).sqrt()))
}

fn map_bath_options() -> BathOptions {
    BathOptions { dtau: 2e-2, horizon: 40.0, tol: 1e-8, max_iter: 400, damping: 0.5 }
}

/// `(γ/2)[Q̂_P(γ/2) − \widehat{Q_P²}(γ/2)]` for the rank-one MAP bath at rate `ν`.
pub fn map_bath_lhs(gamma: f64, nu: f64, opts: &BathOptions) -> Result<f64> {
    let b = solve_bath(1.0, gamma, f64::INFINITY, nu, 0.0, opts, None)?;
    let h = b.dtau;
    let e: Vec<f64> = (0..b.q.len()).map(|i| (-0.5 * gamma * i as f64 * h).exp()).collect();
    let q1: Vec<f64> = b.q.iter().zip(&e).map(|(q, e)| q * e).collect();
    let q2: Vec<f64> = b.q.iter().zip(&e).map(|(q, e)| q * q * e).collect();
    Ok(0.5 * gamma * (trap(&q1, h) - trap(&q2, h)))
}

/// Maximum over `ν ∈ [0.01, 10]` of [`map_bath_lhs`], as `(ν*, max)`.
pub fn map_lhs_max(gamma: f64) -> Result<(f64, f64)> {
    let opts = map_bath_options();
    let f = |l: f64| map_bath_lhs(gamma, l.exp(), &opts);
    let (l0, l1) = (0.01f64.ln(), 10f64.ln());
    let m = 13;
    let xs: Vec<f64> = (0..m).map(|i| l0 + (l1 - l0) * i as f64 / (m - 1) as f64).collect();
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &x) in xs.iter().enumerate() {
        let v = f(x)?;
        if v > best.1 {
            best = (i, v);
        }
    }
    let mut a = xs[best.0.saturating_sub(1)];
    let mut b = xs[(best.0 + 1).min(m - 1)];
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while b - a > 1e-2 {
        if f1 > f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2)?;
        }
    }
    let (x, v) = if f1 > f2 { (x1, f1) } else { (x2, f2) };
    let v = v.max(best.1);
    Ok((x.exp(), v))
}

/// Whether the MAP-limit bath admits a dynamical condensation boundary at this `γ`.
pub fn map_condensation_boundary(gamma: f64) -> Result<bool> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidInput(format!("gamma must be positive, got {gamma}")));
    }
    if gamma >= 1.0 {
        return Ok(false);
    }
    let (_, lhs) = map_lhs_max(gamma)?;
    Ok(lhs > 1.0 - gamma)
}

/// Smallest `γ` in `[lo, hi]` for which the MAP boundary exists, by bisection to `tol`.
pub fn map_gamma_min(lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (mut lo, mut hi) = (lo, hi);
    if map_condensation_boundary(lo)? || !map_condensation_boundary(hi)? {
        return Err(Error::RootBracketFailure(format!(
            "MAP boundary existence does not change sign on [{lo}, {hi}]"
        )));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if map_condensation_boundary(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volterra_matches_exponential() {
        // No memory: X = e^{−κτ}.
        let n = 1001;
        let h = 0.01;
        let m = vec![0.0; n];
        let mut out = vec![0.0; n];
        volterra(&m, 0.7, h, &vec![0.0; n], &mut out);
        assert!((out[n - 1] - (-7.0f64).exp()).abs() < 1e-5);
        // Constant memory μ: X'' = −κX' + μX, closed form.
        let (kap, mu) = (1.0, -0.2);
        let m = vec![mu; n];
        volterra(&m, kap, h, &vec![0.0; n], &mut out);
        let disc = ((kap * kap + 4.0 * mu) as f64).sqrt();
        let (r1, r2) = ((-kap + disc) / 2.0, (-kap - disc) / 2.0);
        // X(0)=1, X'(0)=−κ.
        let a1 = (-kap - r2) / (r1 - r2);
        let a2 = 1.0 - a1;
        let t = 10.0;
        let exact = a1 * (r1 * t).exp() + a2 * (r2 * t).exp();
        assert!((out[n - 1] - exact).abs() < 1e-5, "{} vs {exact}", out[n - 1]);
    }

    #[test]
    fn bath_response_integral_is_laplace_identity() {
        let b = solve_bath(1.0, 0.9, 3.0, 0.3, 0.0, &BathOptions::default(), None).unwrap();
        assert_eq!(b.q[0], 1.0);
        let direct = trap(&b.r, b.dtau);
        assert!((direct - b.chi_p).abs() < 1e-3 * b.chi_p, "{direct} vs {}", b.chi_p);
    }

    #[test]
    fn map_boundary_examples() {
        assert!(!map_condensation_boundary(2.0).unwrap());
        assert!(map_condensation_boundary(0.9).unwrap());
        assert!(!map_condensation_boundary(0.8).unwrap());
    }

    #[test]
    fn weak_signal_gives_trivial_branch() {
        let spec = DataSpectrum::new(vec![0.3]).unwrap();
        let hyper = Hyper::new(0.5, 3.0, 0.3).unwrap();
        let st = stationary_solve(&spec, &hyper).unwrap();
        assert!(!st.condensed);
        assert_eq!(st.s_st, vec![0.0]);
        assert_eq!(st.q_at(0.0), 1.0);
        assert_eq!(st.r_at(0.0), 1.0);
    }
}
