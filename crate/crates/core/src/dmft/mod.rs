//! Two-time dynamical mean-field theory of training.
//!
//! The closed equations for the signals `s_k(t)`, the correlation `Q(t,t')`, the
//! response `R(t,t')` and the multiplier `κ(t)` are marched causally row by row.
//! Kernels are `M(t,u) = e^{−γ(t−u)/2}[−(Kν/2)Q(t,u) + aR(t,u)]` and
//! `D_s(t,u) = a e^{−γ(t−u)/2}Q(t,u)` with `a = ν²/(ηγ)`.

mod large_k;
mod stationary;

pub use large_k::{
    large_k_stationary, solve_large_k, to_bare, to_invariant, LargeKParams, LargeKRun,
};
pub use stationary::{
    critical_nu, critical_nu_with, map_bath_lhs, map_condensation_boundary, map_gamma_min,
    map_lhs_max, nu_c_estimate, solve_bath, stationary_solve, stationary_solve_with, BathOptions,
    BathSolution, CriticalNuOptions, StationaryState,
};

use crate::equilibrium::{DataSpectrum, Hyper};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Read, Write};
use std::path::Path;

/// Largest accepted `ν·dt`.
pub const NU_DT_GUARD: f64 = 0.6;
/// Default cap on the number of grid steps.
pub const MAX_STEPS: usize = 4096;
/// Default threshold for [`condensation_onset_time`].
pub const ONSET_THRESHOLD: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_max: f64,
    pub dt: f64,
    pub n: usize,
}

impl TimeGrid {
    pub fn new(t_max: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) || !(t_max >= 0.0 && t_max.is_finite()) {
            return Err(Error::InvalidInput(format!("bad grid t_max={t_max} dt={dt}")));
        }
        // Tolerate round-off so that t_max = n·dt exactly does not add a step.
        let n = ((t_max / dt) - 1e-9).ceil().max(0.0) as usize;
        Ok(Self { t_max, dt, n })
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.time(i)).collect()
    }

    /// Index of the grid point nearest to `t`.
    pub fn index_of(&self, t: f64) -> usize {
        ((t / self.dt).round().max(0.0) as usize).min(self.n)
    }
}

/// Lower triangle of a two-time array, rows stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoTime {
    points: usize,
    data: Vec<f64>,
}

impl TwoTime {
    fn zeros(points: usize) -> Self {
        Self { points, data: vec![0.0; points * (points + 1) / 2] }
    }

    #[inline]
    fn offset(i: usize) -> usize {
        i * (i + 1) / 2
    }

    pub fn points(&self) -> usize {
        self.points
    }

    /// Entry `(i, j)` for `j ≤ i`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(j <= i);
        self.data[Self::offset(i) + j]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[Self::offset(i) + j] = v;
    }

    /// Row `i`, entries `0..=i`.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let o = Self::offset(i);
        &self.data[o..o + i + 1]
    }

    pub fn raw(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DmftSolution {
    pub grid: TimeGrid,
    pub hyper: Hyper,
    pub spectrum: DataSpectrum,
    pub kernel_rank: f64,
    q: TwoTime,
    r: TwoTime,
    /// `s[k][i]`
    pub s: Vec<Vec<f64>>,
    pub kappa: Vec<f64>,
    /// Largest number of corrector sweeps used on any row.
    pub max_corrector_iterations: usize,
}

impl DmftSolution {
    /// Symmetric correlation `Q(t_i, t_j)`.
    pub fn q(&self, i: usize, j: usize) -> f64 {
        if j <= i {
            self.q.get(i, j)
        } else {
            self.q.get(j, i)
        }
    }

    /// Response `R(t_i, t_j)`, zero for `i < j`.
    pub fn r(&self, i: usize, j: usize) -> f64 {
        if j <= i {
            self.r.get(i, j)
        } else {
            0.0
        }
    }

    pub fn q_packed(&self) -> &TwoTime {
        &self.q
    }

    pub fn r_packed(&self) -> &TwoTime {
        &self.r
    }

    pub fn times(&self) -> Vec<f64> {
        self.grid.times()
    }

    /// Signal of mode `k` with the sign fixed to be nonnegative at the final time.
    pub fn s_reported(&self, k: usize) -> Vec<f64> {
        let s = &self.s[k];
        let sign = if s.last().copied().unwrap_or(0.0) < 0.0 { -1.0 } else { 1.0 };
        s.iter().map(|v| sign * v).collect()
    }

    /// CSV with columns `t, s_1..s_K, kappa, q_t0, r_t0`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let k = self.s.len();
        let mut head = vec!["t".to_string()];
        head.extend((1..=k).map(|i| format!("s_{i}")));
        head.extend(["kappa".into(), "q_t0".into(), "r_t0".into()]);
        writeln!(w, "{}", head.join(","))?;
        for i in 0..=self.grid.n {
            let mut row = vec![format!("{}", self.grid.time(i))];
            row.extend(self.s.iter().map(|s| format!("{}", s[i])));
            row.push(format!("{}", self.kappa[i]));
            row.push(format!("{}", self.q(i, 0)));
            row.push(format!("{}", self.r(i, 0)));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// JSON header line followed by little-endian `f64` blocks: packed `Q`, packed `R`, `s`, `κ`.
    pub fn write_checkpoint(&self, path: &Path) -> Result<()> {
        let header = CheckpointHeader {
            format: CHECKPOINT_FORMAT.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            grid: self.grid,
            hyper: self.hyper,
            spectrum: self.spectrum.clone(),
            kernel_rank: self.kernel_rank,
            modes: self.s.len(),
            points: self.grid.n + 1,
            max_corrector_iterations: self.max_corrector_iterations,
        };
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(&mut f, &header)?;
        f.write_all(b"\n")?;
        let blocks = [self.q.raw(), self.r.raw()];
        for b in blocks.into_iter().chain(self.s.iter().map(|v| v.as_slice())) {
            write_f64s(&mut f, b)?;
        }
        write_f64s(&mut f, &self.kappa)?;
        f.flush()?;
        Ok(())
    }

    pub fn read_checkpoint(path: &Path) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut line = String::new();
        f.read_line(&mut line)?;
        let h: CheckpointHeader = serde_json::from_str(line.trim_end())?;
        if h.format != CHECKPOINT_FORMAT {
            return Err(Error::Format(format!("unexpected checkpoint format {}", h.format)));
        }
        if h.points != h.grid.n + 1 {
            return Err(Error::Format("point count disagrees with grid".into()));
        }
        let tri = h.points * (h.points + 1) / 2;
        let q = read_f64s(&mut f, tri)?;
        let r = read_f64s(&mut f, tri)?;
        let mut s = Vec::with_capacity(h.modes);
        for _ in 0..h.modes {
            s.push(read_f64s(&mut f, h.points)?);
        }
        let kappa = read_f64s(&mut f, h.points)?;
        let mut rest = Vec::new();
        f.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(Error::Format(format!("{} trailing bytes", rest.len())));
        }
        Ok(Self {
            grid: h.grid,
            hyper: h.hyper,
            spectrum: h.spectrum,
            kernel_rank: h.kernel_rank,
            q: TwoTime { points: h.points, data: q },
            r: TwoTime { points: h.points, data: r },
            s,
            kappa,
            max_corrector_iterations: h.max_corrector_iterations,
        })
    }
}

const CHECKPOINT_FORMAT: &str = "sbm-dmft-v1";

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    format: String,
    version: String,
    grid: TimeGrid,
    hyper: Hyper,
    spectrum: DataSpectrum,
    kernel_rank: f64,
    modes: usize,
    points: usize,
    max_corrector_iterations: usize,
}

pub(crate) fn write_f64s<W: Write>(w: &mut W, v: &[f64]) -> Result<()> {
    for x in v {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

pub(crate) fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Format(format!("truncated checkpoint: {e}")))?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DmftOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Rank entering the memory kernel; defaults to the spectrum rank.
    pub kernel_rank: Option<f64>,
    pub max_steps: usize,
    pub nu_dt_guard: f64,
}

impl Default for DmftOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
            kernel_rank: None,
            max_steps: MAX_STEPS,
            nu_dt_guard: NU_DT_GUARD,
        }
    }
}

pub fn solve_dmft(
    spectrum: &DataSpectrum,
    hyper: &Hyper,
    s0: &[f64],
    grid: TimeGrid,
) -> Result<DmftSolution> {
    solve_dmft_with(spectrum, hyper, s0, grid, &DmftOptions::default())
}

/// Trapezoid-rule Volterra marching with an explicit Euler predictor and a
/// fixed-point trapezoidal corrector per row.
pub fn solve_dmft_with(
    spectrum: &DataSpectrum,
    hyper: &Hyper,
    s0: &[f64],
    grid: TimeGrid,
    opts: &DmftOptions,
) -> Result<DmftSolution> {
    hyper.validate()?;
    let c = spectrum.eigenvalues();
    let nk = c.len();
    if s0.len() != nk {
        return Err(Error::InvalidInput(format!(
            "need {nk} seed overlaps, got {}",
            s0.len()
        )));
    }
    if s0.iter().any(|v| !(v.abs() < 1.0)) {
        return Err(Error::InvalidInput(format!("seed overlaps must satisfy |s0|<1: {s0:?}")));
    }
    let (gamma, eta, nu) = (hyper.gamma, hyper.eta, hyper.nu);
    let h = grid.dt;
    if nu * h >= opts.nu_dt_guard {
        return Err(Error::StepTooLarge(format!(
            "nu*dt = {} exceeds guard {}",
            nu * h,
            opts.nu_dt_guard
        )));
    }
    if grid.n > opts.max_steps {
        return Err(Error::InvalidInput(format!(
            "{} steps exceed cap {}; raise max_steps explicitly",
            grid.n, opts.max_steps
        )));
    }
    let kr = opts.kernel_rank.unwrap_or(nk as f64);
    let a = nu * nu / (eta * gamma);
    let half_kn = 0.5 * kr * nu;
    let np = grid.n + 1;
    let decay: Vec<f64> = (0..np).map(|l| (-0.5 * gamma * l as f64 * h).exp()).collect();

    let mut q = TwoTime::zeros(np);
    let mut r = TwoTime::zeros(np);
    let mut s: Vec<Vec<f64>> = s0.iter().map(|&v| {
        let mut x = vec![0.0; np];
        x[0] = v;
        x
    }).collect();
    let mut fs: Vec<Vec<f64>> = vec![vec![0.0; np]; nk];
    let mut kappa = vec![0.0; np];
    q.set(0, 0, 1.0);
    r.set(0, 0, 1.0);
    kappa[0] = nu;
    for k in 0..nk {
        fs[k][0] = -kappa[0] * s[k][0];
    }
    let mut fq_prev = vec![-nu];
    let mut fr_prev = vec![-kappa[0]];
    let mut fq_cur = vec![0.0; np];
    let mut fr_cur = vec![0.0; np];
    let mut m = vec![0.0; np];
    let mut ds = vec![0.0; np];
    let mut wm = vec![0.0; np];
    let mut acc_q = vec![0.0; np];
    let mut acc_r = vec![0.0; np];
    let mut new_q = vec![0.0; np];
    let mut new_r = vec![0.0; np];
    let mut max_it = 0;

    for i in 1..np {
        let t = grid.time(i);
        let b = (nu / gamma) * (1.0 - (-0.5 * gamma * t).exp());
        // Predictor.
        for j in 0..i {
            let (qp, rp) = if j < i - 1 { (q.get(i - 1, j), r.get(i - 1, j)) } else { (1.0, 1.0) };
            q.set(i, j, qp + h * fq_prev[j]);
            r.set(i, j, rp + h * fr_prev[j]);
        }
        q.set(i, i, 1.0);
        r.set(i, i, 1.0);
        for k in 0..nk {
            s[k][i] = s[k][i - 1] + h * fs[k][i - 1];
        }

        let mut it = 0;
        loop {
            it += 1;
            let qi = q.row(i);
            let ri = r.row(i);
            for u in 0..=i {
                let e = decay[i - u];
                m[u] = e * (-half_kn * qi[u] + a * ri[u]);
                ds[u] = a * e * qi[u];
            }
            for u in 0..=i {
                wm[u] = if u == 0 || u == i { 0.5 * m[u] } else { m[u] };
            }
            let mut cs = 0.0;
            for k in 0..nk {
                cs += c[k] * s[k][i] * s[k][i];
            }
            let mut acc = 0.5 * (m[0] * qi[0] + ds[0] * ri[0]) + 0.5 * (m[i] + ds[i]);
            for u in 1..i {
                acc += m[u] * qi[u] + ds[u] * ri[u];
            }
            let kap = nu + b * cs + h * acc;
            kappa[i] = kap;
            for k in 0..nk {
                let sk = &s[k];
                let mut acc = 0.0;
                for u in 0..=i {
                    acc += wm[u] * sk[u];
                }
                fs[k][i] = (b * c[k] - kap) * sk[i] + h * acc;
            }

            // Memory integrals for all j < i.
            acc_q[..i].iter_mut().for_each(|v| *v = 0.0);
            acc_r[..i].iter_mut().for_each(|v| *v = 0.0);
            for u in 0..=i {
                let row_q = q.row(u);
                let row_r = r.row(u);
                let top = u.min(i - 1);
                // Σ_{u ≥ j} wm[u] Q(u, j)
                let w = wm[u];
                for j in 0..=top {
                    acc_q[j] += w * row_q[j];
                }
                // Σ_{u=j}^{i} M(i,u) R(u,j), half weight at both ends.
                let wr = if u == i { 0.5 * m[u] } else { m[u] };
                let lim = if u == i { i } else { u };
                for j in 0..lim {
                    acc_r[j] += wr * row_r[j];
                }
                if u < i {
                    acc_r[u] += 0.5 * m[u];
                }
            }
            for j in 0..i {
                let row_q = q.row(j);
                let row_r = r.row(j);
                // Σ_{u < j} wm[u] Q(j, u)
                let mut lo = 0.0;
                for u in 0..j {
                    lo += wm[u] * row_q[u];
                }
                // ∫_0^{t_j} D_s(i,u) R(j,u) du
                let mut dr = 0.0;
                if j > 0 {
                    dr = 0.5 * (ds[0] * row_r[0] + ds[j] * row_r[j]);
                    for u in 1..j {
                        dr += ds[u] * row_r[u];
                    }
                }
                let mut sig = 0.0;
                for k in 0..nk {
                    sig += c[k] * s[k][i] * s[k][j];
                }
                fq_cur[j] = b * sig - kap * q.get(i, j) + h * (acc_q[j] + lo + dr);
                fr_cur[j] = -kap * r.get(i, j) + h * acc_r[j];
            }
            fq_cur[i] = -nu;
            fr_cur[i] = -kap;

            // Trapezoidal corrector.
            let mut diff: f64 = 0.0;
            for j in 0..i {
                let (qp, rp) = if j < i - 1 { (q.get(i - 1, j), r.get(i - 1, j)) } else { (1.0, 1.0) };
                new_q[j] = qp + 0.5 * h * (fq_prev[j] + fq_cur[j]);
                new_r[j] = rp + 0.5 * h * (fr_prev[j] + fr_cur[j]);
                diff = diff
                    .max((new_q[j] - q.get(i, j)).abs())
                    .max((new_r[j] - r.get(i, j)).abs());
            }
            for j in 0..i {
                q.set(i, j, new_q[j]);
                r.set(i, j, new_r[j]);
            }
            for k in 0..nk {
                let ns = s[k][i - 1] + 0.5 * h * (fs[k][i - 1] + fs[k][i]);
                diff = diff.max((ns - s[k][i]).abs());
                s[k][i] = ns;
            }
            if !diff.is_finite() {
                return Err(Error::NonConvergence {
                    iterations: it,
                    residual: diff,
                    context: format!("corrector diverged at t={t}"),
                });
            }
            if diff < opts.tol {
                break;
            }
            if it >= opts.max_iter {
                return Err(Error::NonConvergence {
                    iterations: it,
                    residual: diff,
                    context: format!("corrector at t={t}"),
                });
            }
        }
        max_it = max_it.max(it);
        // κ and the row derivatives at the accepted values feed the next predictor.
        fq_prev.clear();
        fq_prev.extend_from_slice(&fq_cur[..=i]);
        fr_prev.clear();
        fr_prev.extend_from_slice(&fr_cur[..=i]);
    }

    Ok(DmftSolution {
        grid,
        hyper: *hyper,
        spectrum: spectrum.clone(),
        kernel_rank: kr,
        q,
        r,
        s,
        kappa,
        max_corrector_iterations: max_it,
    })
}

/// Time at which mode `k` leaves the bulk: `−(2/γ)ln(1 − √(γ/η)/c_k)`, or `None` if it never does.
pub fn detachment_time(k: usize, spectrum: &DataSpectrum, hyper: &Hyper) -> Option<f64> {
    let ck = spectrum.eigenvalues()[k];
    let x = (hyper.gamma / hyper.eta).sqrt() / ck;
    if x >= 1.0 {
        None
    } else {
        Some(-(2.0 / hyper.gamma) * (1.0 - x).ln())
    }
}

/// Early-training position of the `k`-th eigenvalue, ignoring the negative phase.
pub fn early_outlier_trajectory(k: usize, t: f64, spectrum: &DataSpectrum, hyper: &Hyper) -> f64 {
    let bulk = hyper.bulk();
    let ck = spectrum.eigenvalues()[k];
    let (gamma, eta) = (hyper.gamma, hyper.eta);
    let growth = 1.0 - (-0.5 * gamma * t).exp();
    if growth <= 0.0 {
        return bulk.edge();
    }
    let g = gamma / (ck * growth);
    if g >= (gamma * eta).sqrt() {
        bulk.edge()
    } else {
        1.0 / g + g / (gamma * eta)
    }
}

/// First grid time at which `|s₁|` has fallen to `threshold`, provided it later regrows above it.
pub fn condensation_onset_time(solution: &DmftSolution, threshold: f64) -> Option<f64> {
    let s = &solution.s[0];
    let first = s.iter().position(|v| v.abs() <= threshold)?;
    if s[first..].iter().any(|v| v.abs() > threshold) {
        Some(solution.grid.time(first))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(c: &[f64], nu: f64, dt: f64, t_max: f64) -> DmftSolution {
        let spec = DataSpectrum::new(c.to_vec()).unwrap();
        let hyper = Hyper::new(0.5, 3.0, nu).unwrap();
        let s0 = vec![0.1; c.len()];
        solve_dmft(&spec, &hyper, &s0, TimeGrid::new(t_max, dt).unwrap()).unwrap()
    }

    #[test]
    fn grid_covers_horizon() {
        let g = TimeGrid::new(30.0, 0.1).unwrap();
        assert_eq!(g.n, 300);
        let g = TimeGrid::new(1.05, 0.1).unwrap();
        assert_eq!(g.n, 11);
        assert!(g.n as f64 * g.dt >= g.t_max);
    }

    #[test]
    fn diagonal_constraints_hold() {
        let sol = run(&[1.5, 0.5], 0.3, 0.1, 5.0);
        for i in 0..=sol.grid.n {
            assert_eq!(sol.q(i, i), 1.0);
            assert_eq!(sol.r(i, i), 1.0);
            for j in 0..i {
                assert_eq!(sol.r(j, i), 0.0);
                assert_eq!(sol.q(i, j), sol.q(j, i));
                assert!(sol.q(i, j).abs() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn one_channel_condenses() {
        let sol = run(&[1.5, 0.5], 0.3, 0.1, 30.0);
        let n = sol.grid.n;
        let s1 = sol.s_reported(0)[n];
        assert!((s1 - 0.60).abs() < 0.05, "s1={s1}");
        assert!(sol.s[1][n].abs() < 1e-3);
    }

    #[test]
    fn weak_mode_does_not_condense() {
        let sol = run(&[0.3], 0.3, 0.1, 30.0);
        let n = sol.grid.n;
        assert!(sol.s[0][n].abs() < 1e-3);
        assert!((sol.kappa[n] - sol.hyper.nu).abs() < 0.05);
    }

    #[test]
    fn guard_and_cap_refuse() {
        let spec = DataSpectrum::new(vec![1.0]).unwrap();
        let hyper = Hyper::new(0.5, 3.0, 10.0).unwrap();
        let e = solve_dmft(&spec, &hyper, &[0.1], TimeGrid::new(1.0, 0.1).unwrap());
        assert!(matches!(e, Err(Error::StepTooLarge(_))));
        let hyper = Hyper::new(0.5, 3.0, 0.1).unwrap();
        let e = solve_dmft(&spec, &hyper, &[0.1], TimeGrid::new(1000.0, 0.1).unwrap());
        assert!(matches!(e, Err(Error::InvalidInput(_))));
        let e = solve_dmft(&spec, &hyper, &[1.0], TimeGrid::new(1.0, 0.1).unwrap());
        assert!(matches!(e, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn detachment_examples() {
        let spec = DataSpectrum::new(vec![1.7, 0.3]).unwrap();
        let hyper = Hyper::new(0.4, 10.0, 0.7).unwrap();
        let t = detachment_time(0, &spec, &hyper).unwrap();
        assert!((t - (-5.0 * (1.0 - 0.2 / 1.7f64).ln())).abs() < 1e-12);
        assert!((t - 0.626).abs() < 5e-4);
        assert!(detachment_time(1, &spec, &hyper).is_some());
        let weak = DataSpectrum::new(vec![1.7, 0.2]).unwrap();
        assert!(detachment_time(1, &weak, &hyper).is_none());
        let edge = hyper.bulk().edge();
        assert_eq!(early_outlier_trajectory(1, 50.0, &weak, &hyper), edge);
        assert_eq!(early_outlier_trajectory(0, 0.5 * t, &spec, &hyper), edge);
        let late = early_outlier_trajectory(0, 200.0, &spec, &hyper);
        assert!((late - (1.7 / 0.4 + 1.0 / (10.0 * 1.7))).abs() < 1e-12);
        // Continuous at detachment.
        let just = early_outlier_trajectory(0, t * (1.0 + 1e-9), &spec, &hyper);
        assert!((just - edge).abs() < 1e-6);
    }

    #[test]
    fn onset_time_edge_cases() {
        let decaying = run(&[0.3], 0.3, 0.1, 10.0);
        assert_eq!(condensation_onset_time(&decaying, 1e-2), None);
        let grows = run(&[1.5, 0.5], 0.3, 0.1, 20.0);
        assert_eq!(condensation_onset_time(&grows, 0.5), Some(0.0));
    }

    #[test]
    fn checkpoint_round_trip() {
        let sol = run(&[1.5, 0.5], 0.3, 0.1, 2.0);
        let dir = std::env::temp_dir().join(format!("sbm-ckpt-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("dmft.ckpt");
        sol.write_checkpoint(&p).unwrap();
        let back = DmftSolution::read_checkpoint(&p).unwrap();
        assert_eq!(back, sol);
        let mut buf = Vec::new();
        sol.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,s_1,s_2,kappa,q_t0,r_t0\n"));
        assert_eq!(text.lines().count(), sol.grid.n + 2);
        std::fs::remove_dir_all(&dir).ok();
    }
}
