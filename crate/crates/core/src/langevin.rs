//! Finite-N simulation of the coupled weight and persistent-chain dynamics
//!
//! `dW = [½(C − K xxᵀ/N) − (γ/2)W]dt + dΩ/√(ηN)` and `dx = (νWx − κx)dt + √(2ν)dξ`.
//!
//! The linear part of the weight equation is integrated exactly over each step
//! (Ornstein–Uhlenbeck update with `x` frozen), the chain by Euler–Maruyama followed
//! by renormalisation to `‖x‖² = N`. The multiplier is reported as the implied
//! `κ = ν xᵀWx/N + ν`.

use crate::equilibrium::{DataSpectrum, Hyper};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Outlier threshold above the bulk edge, in units of `σ`.
pub const OUTLIER_EPS: f64 = 0.05;
/// Seed of the fixed data directions; independent of the run seed.
const DATA_SEED: u64 = 0x5eed_da7a;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub hyper: Hyper,
    pub spectrum: DataSpectrum,
    pub dt: f64,
    pub t_max: f64,
    pub seed: u64,
    pub n_seeds: usize,
    /// Initial overlaps `s_k(0)`.
    pub s0: Vec<f64>,
    /// Draw `W(0)` from the stationary prior; otherwise `W(0) = 0`.
    pub w0_prior: bool,
    /// Steps between recorded samples.
    pub record_every: usize,
    /// Steps between eigen-decompositions, a multiple of `record_every`; `None` disables them.
    pub eig_every: Option<usize>,
}

impl SimConfig {
    /// Defaults: prior start, samples and eigen-decompositions every `⌈0.1/dt⌉` steps.
    pub fn new(n: usize, hyper: Hyper, spectrum: DataSpectrum, dt: f64, t_max: f64, seed: u64) -> Self {
        let every = ((0.1 / dt).ceil() as usize).max(1);
        let k = spectrum.rank();
        Self {
            n,
            hyper,
            spectrum,
            dt,
            t_max,
            seed,
            n_seeds: 1,
            s0: vec![0.0; k],
            w0_prior: true,
            record_every: every,
            eig_every: Some(every),
        }
    }

    /// Default step `10⁻²·min(1, 1/ν, 1/γ)`.
    pub fn default_dt(hyper: &Hyper) -> f64 {
        1e-2 * 1f64.min(1.0 / hyper.nu).min(1.0 / hyper.gamma)
    }

    pub fn steps(&self) -> usize {
        ((self.t_max / self.dt) - 1e-9).ceil().max(0.0) as usize
    }

    pub fn sigma(&self) -> f64 {
        1.0 / (self.hyper.gamma * self.hyper.eta).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        let h = &self.hyper;
        if !(h.gamma > 0.0 && h.eta > 0.0 && h.nu >= 0.0)
            || !(h.gamma.is_finite() && h.eta.is_finite() && h.nu.is_finite())
        {
            return Err(Error::InvalidInput(format!("bad hyperparameters {h:?}")));
        }
        if self.n < 2 {
            return Err(Error::InvalidInput("N must be at least 2".into()));
        }
        if self.spectrum.rank() >= self.n {
            return Err(Error::InvalidInput("rank must be below N".into()));
        }
        if !(self.dt > 0.0) || !(self.t_max >= 0.0) {
            return Err(Error::InvalidInput("dt must be positive and t_max nonnegative".into()));
        }
        if self.s0.len() != self.spectrum.rank() {
            return Err(Error::InvalidInput("one seed overlap per mode required".into()));
        }
        if self.s0.iter().map(|s| s * s).sum::<f64>() >= 1.0 {
            return Err(Error::InvalidInput("seed overlaps must have Σs0² < 1".into()));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidInput("record_every must be positive".into()));
        }
        if let Some(e) = self.eig_every {
            if e == 0 || e % self.record_every != 0 {
                return Err(Error::InvalidInput(
                    "eig_every must be a positive multiple of record_every".into(),
                ));
            }
        }
        let guard = self.dt * h.nu.max(h.gamma);
        if guard > 0.5 {
            return Err(Error::StabilityViolation(format!("dt·max(ν,γ) = {guard} > 0.5")));
        }
        Ok(())
    }
}

/// Symmetric matrix stored as its packed lower triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct PackedSym {
    n: usize,
    data: Vec<f64>,
}

impl PackedSym {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * (n + 1) / 2] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if j <= i { (i, j) } else { (j, i) };
        self.data[i * (i + 1) / 2 + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if j <= i { (i, j) } else { (j, i) };
        self.data[i * (i + 1) / 2 + j] = v;
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        let mut o = 0;
        for i in 0..self.n {
            let row = &self.data[o..o + i + 1];
            let xi = x[i];
            let mut acc = 0.0;
            for j in 0..i {
                acc += row[j] * x[j];
                y[j] += row[j] * xi;
            }
            y[i] += acc + row[i] * xi;
            o += i + 1;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    pub fn max_abs_diff(&self, other: &PackedSym) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Orthogonal data directions with `‖c_k‖² = N`, fixed for given `(N, K)`.
pub fn data_directions(n: usize, k: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(DATA_SEED);
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(k);
    for _ in 0..k {
        let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..2 {
            for u in &out {
                let p = dot(&v, u) / n as f64;
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= p * b);
            }
        }
        let s = (n as f64 / dot(&v, &v)).sqrt();
        v.iter_mut().for_each(|a| *a *= s);
        out.push(v);
    }
    out
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Top eigenpairs of a symmetric operator by Lanczos with full reorthogonalisation.
/// Eigenvectors are returned with unit norm.
pub fn lanczos_top(
    w: &PackedSym,
    count: usize,
    rng: &mut impl Rng,
    tol: f64,
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = w.dim();
    let max_m = n.min(400.max(4 * count));
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut q: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let nq = dot(&q, &q).sqrt();
    q.iter_mut().for_each(|v| *v /= nq);
    let mut z = vec![0.0; n];
    let mut scale: f64 = 0.0;
    loop {
        w.matvec(&q, &mut z);
        let a = dot(&q, &z);
        basis.push(q.clone());
        alpha.push(a);
        // Two passes of Gram–Schmidt against the whole basis.
        for _ in 0..2 {
            for b in &basis {
                let p = dot(&z, b);
                z.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
            }
        }
        let bnorm = dot(&z, &z).sqrt();
        let m = basis.len();
        scale = scale.max(a.abs()).max(bnorm);
        let check = m >= max_m || bnorm < 1e-14 * scale.max(1.0) || (m >= count + 10 && m % 10 == 0);
        if check {
            let t = DMatrix::from_fn(m, m, |i, j| {
                if i == j {
                    alpha[i]
                } else if i + 1 == j {
                    beta[i]
                } else if j + 1 == i {
                    beta[j]
                } else {
                    0.0
                }
            });
            let eig = SymmetricEigen::new(t);
            let mut idx: Vec<usize> = (0..m).collect();
            idx.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());
            let take = count.min(m);
            let converged = idx[..take]
                .iter()
                .all(|&i| (bnorm * eig.eigenvectors[(m - 1, i)]).abs() < tol * scale.max(1.0));
            if converged || m >= max_m || bnorm < 1e-14 * scale.max(1.0) {
                let vals: Vec<f64> = idx[..take].iter().map(|&i| eig.eigenvalues[i]).collect();
                let vecs: Vec<Vec<f64>> = idx[..take]
                    .iter()
                    .map(|&i| {
                        let mut v = vec![0.0; n];
                        for (r, b) in basis.iter().enumerate() {
                            let c = eig.eigenvectors[(r, i)];
                            v.iter_mut().zip(b).for_each(|(x, y)| *x += c * y);
                        }
                        v
                    })
                    .collect();
                return (vals, vecs);
            }
        }
        beta.push(bnorm);
        q = z.iter().map(|v| v / bnorm).collect();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub n: usize,
    pub seed: u64,
    pub sigma: f64,
    pub times: Vec<f64>,
    /// `s[k][record]`
    pub s: Vec<Vec<f64>>,
    pub kappa: Vec<f64>,
    /// Top `K+1` eigenvalues per record, empty where no decomposition was made.
    pub lambda_top: Vec<Vec<f64>>,
    /// Best-matched eigenvector overlaps `u_k²` per record.
    pub u_sq: Vec<Vec<f64>>,
    /// Eigenvalues above `2σ + 0.05σ`, `None` where no decomposition was made.
    pub outlier_count: Vec<Option<usize>>,
}

impl Trajectory {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn max_outlier_count(&self) -> usize {
        self.outlier_count.iter().flatten().copied().max().unwrap_or(0)
    }

    /// CSV with columns `t, s_1..s_K, lambda_1..lambda_{K+1}, u_1..u_K, kappa, outlier_count`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let k = self.rank();
        let mut head = vec!["t".to_string()];
        head.extend((1..=k).map(|i| format!("s_{i}")));
        head.extend((1..=k + 1).map(|i| format!("lambda_{i}")));
        head.extend((1..=k).map(|i| format!("u_{i}")));
        head.extend(["kappa".into(), "outlier_count".into()]);
        writeln!(w, "{}", head.join(","))?;
        for r in 0..self.times.len() {
            let mut row = vec![format!("{}", self.times[r])];
            row.extend(self.s.iter().map(|s| format!("{}", s[r])));
            let lam = &self.lambda_top[r];
            row.extend((0..=k).map(|i| lam.get(i).map(|v| format!("{v}")).unwrap_or_default()));
            let u = &self.u_sq[r];
            row.extend((0..k).map(|i| u.get(i).map(|v| format!("{v}")).unwrap_or_default()));
            row.push(format!("{}", self.kappa[r]));
            row.push(self.outlier_count[r].map(|c| c.to_string()).unwrap_or_default());
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Observables at one instant, from the chain state and optionally the spectrum of `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observables {
    pub s: Vec<f64>,
    pub u_sq: Vec<f64>,
    pub lambda_top: Vec<f64>,
    pub outlier_count: usize,
}

/// Greedy best-match of eigenvectors (unit norm) to data directions (norm `√N`).
pub fn matched_overlaps(vecs: &[Vec<f64>], dirs: &[Vec<f64>]) -> Vec<f64> {
    let n = dirs.first().map(|d| d.len()).unwrap_or(1) as f64;
    let mut pairs = Vec::new();
    for (k, c) in dirs.iter().enumerate() {
        for (j, v) in vecs.iter().enumerate() {
            let o = dot(c, v);
            pairs.push((o * o / n, k, j));
        }
    }
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut u = vec![0.0; dirs.len()];
    let mut used_k = vec![false; dirs.len()];
    let mut used_j = vec![false; vecs.len()];
    for (o, k, j) in pairs {
        if !used_k[k] && !used_j[j] {
            u[k] = o;
            used_k[k] = true;
            used_j[j] = true;
        }
    }
    u
}

pub fn observables(
    x: &[f64],
    w: &PackedSym,
    dirs: &[Vec<f64>],
    sigma: f64,
    rng: &mut impl Rng,
) -> Observables {
    let n = x.len() as f64;
    let k = dirs.len();
    let s = dirs.iter().map(|c| dot(c, x) / n).collect();
    let (vals, vecs) = lanczos_top(w, k + 1, rng, 1e-7);
    let u_sq = matched_overlaps(&vecs[..k.min(vecs.len())], dirs);
    let thr = (2.0 + OUTLIER_EPS) * sigma;
    let outlier_count = vals.iter().filter(|&&v| v > thr).count();
    Observables { s, u_sq, lambda_top: vals, outlier_count }
}

/// Mutable simulation state; advanced step by step.
pub struct Simulation {
    cfg: SimConfig,
    dirs: Vec<Vec<f64>>,
    pub w: PackedSym,
    pub x: Vec<f64>,
    step: usize,
    rng: ChaCha8Rng,
    eig_rng: ChaCha8Rng,
    wx: Vec<f64>,
    e_half: f64,
    alpha: f64,
    noise: f64,
}

impl Simulation {
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.n;
        let nf = n as f64;
        let k = cfg.spectrum.rank();
        let dirs = data_directions(n, k);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let eig_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
        let (gamma, eta) = (cfg.hyper.gamma, cfg.hyper.eta);
        let mut w = PackedSym::zeros(n);
        if cfg.w0_prior {
            let sd = (1.0 / (gamma * eta * nf)).sqrt();
            let mut o = 0;
            for i in 0..n {
                for j in 0..=i {
                    let z: f64 = rng.sample(StandardNormal);
                    w.data[o + j] = if i == j { std::f64::consts::SQRT_2 * sd * z } else { sd * z };
                }
                o += i + 1;
            }
        }
        // x(0): seed overlaps along the data plus an orthogonal random part.
        let mut r: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..2 {
            for c in &dirs {
                let p = dot(&r, c) / nf;
                r.iter_mut().zip(c).for_each(|(a, b)| *a -= p * b);
            }
        }
        let rest = (1.0 - cfg.s0.iter().map(|s| s * s).sum::<f64>()).sqrt();
        let rn = (nf / dot(&r, &r)).sqrt();
        let mut x: Vec<f64> = r.iter().map(|v| rest * rn * v).collect();
        for (c, s) in dirs.iter().zip(&cfg.s0) {
            x.iter_mut().zip(c).for_each(|(a, b)| *a += s * b);
        }
        let e_half = (-0.5 * gamma * cfg.dt).exp();
        let alpha = (1.0 - e_half) / gamma;
        let noise = ((1.0 - (-gamma * cfg.dt).exp()) / (gamma * eta * nf)).sqrt();
        let mut sim = Self {
            cfg: cfg.clone(),
            dirs,
            w,
            x,
            step: 0,
            rng,
            eig_rng,
            wx: vec![0.0; n],
            e_half,
            alpha,
            noise,
        };
        sim.w.matvec(&sim.x, &mut sim.wx);
        Ok(sim)
    }

    pub fn directions(&self) -> &[Vec<f64>] {
        &self.dirs
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.cfg.dt
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    /// Implied multiplier `ν xᵀWx/N + ν` at the current state.
    pub fn kappa(&self) -> f64 {
        let nu = self.cfg.hyper.nu;
        nu * dot(&self.x, &self.wx) / self.cfg.n as f64 + nu
    }

    pub fn overlaps(&self) -> Vec<f64> {
        let nf = self.cfg.n as f64;
        self.dirs.iter().map(|c| dot(c, &self.x) / nf).collect()
    }

    pub fn observables(&mut self) -> Observables {
        observables(&self.x, &self.w, &self.dirs, self.cfg.sigma(), &mut self.eig_rng)
    }

    /// One step. `w_noise`, when given, receives the weight-noise increments in packed order.
    pub fn step_with(&mut self, mut w_noise: Option<&mut Vec<f64>>) {
        let n = self.cfg.n;
        let nf = n as f64;
        let k = self.dirs.len();
        let c = self.cfg.spectrum.eigenvalues().to_vec();
        let kk = k as f64;
        let (e, alpha, sd) = (self.e_half, self.alpha, self.noise);
        let sd_diag = std::f64::consts::SQRT_2 * sd;
        let nu = self.cfg.hyper.nu;
        let dt = self.cfg.dt;
        // Chain update uses W at the start of the step (already in wx).
        let mut xn = self.x.clone();
        let amp = (2.0 * nu * dt).sqrt();
        for i in 0..n {
            let z: f64 = self.rng.sample(StandardNormal);
            xn[i] += dt * nu * self.wx[i] + amp * z;
        }
        // Weight update with the chain frozen at x_n; fused with W_{n+1}x_{n+1}.
        let norm = (nf / dot(&xn, &xn)).sqrt();
        xn.iter_mut().for_each(|v| *v *= norm);
        let x = std::mem::take(&mut self.x);
        let mut coef = vec![0.0; k];
        let y = &mut self.wx;
        y.iter_mut().for_each(|v| *v = 0.0);
        if let Some(buf) = w_noise.as_deref_mut() {
            buf.clear();
        }
        let mut o = 0;
        for i in 0..n {
            for kq in 0..k {
                coef[kq] = alpha * c[kq] * self.dirs[kq][i] / nf;
            }
            let xneg = alpha * kk * x[i] / nf;
            let row = &mut self.w.data[o..o + i + 1];
            let xi_new = xn[i];
            let mut acc = 0.0;
            for j in 0..=i {
                let mut drift = -xneg * x[j];
                for kq in 0..k {
                    drift += coef[kq] * self.dirs[kq][j];
                }
                let z: f64 = self.rng.sample(StandardNormal);
                let dn = if i == j { sd_diag * z } else { sd * z };
                if let Some(buf) = w_noise.as_deref_mut() {
                    buf.push(dn);
                }
                let v = e * row[j] + drift + dn;
                row[j] = v;
                if j < i {
                    acc += v * xn[j];
                    y[j] += v * xi_new;
                } else {
                    acc += v * xi_new;
                }
            }
            y[i] += acc;
            o += i + 1;
        }
        self.x = xn;
        self.step += 1;
    }

    pub fn step(&mut self) {
        self.step_with(None)
    }

    /// Runs to `t_max`, recording per the configured cadence.
    pub fn run(mut self) -> Result<Trajectory> {
        let steps = self.cfg.steps();
        let k = self.dirs.len();
        let mut traj = Trajectory {
            n: self.cfg.n,
            seed: self.cfg.seed,
            sigma: self.cfg.sigma(),
            times: Vec::new(),
            s: vec![Vec::new(); k],
            kappa: Vec::new(),
            lambda_top: Vec::new(),
            u_sq: Vec::new(),
            outlier_count: Vec::new(),
        };
        let guard = 0.5;
        loop {
            if self.step % self.cfg.record_every == 0 || self.step == steps {
                traj.times.push(self.time());
                for (kq, v) in self.overlaps().into_iter().enumerate() {
                    traj.s[kq].push(v);
                }
                traj.kappa.push(self.kappa());
                let do_eig = self.cfg.eig_every.is_some_and(|e| self.step % e == 0);
                if do_eig {
                    let obs = self.observables();
                    let top = obs.lambda_top.first().copied().unwrap_or(0.0);
                    if self.cfg.dt * self.cfg.hyper.nu * top.abs() > guard || !top.is_finite() {
                        return Err(Error::StabilityViolation(format!(
                            "ν·dt·λ₁ = {} at t = {}",
                            self.cfg.dt * self.cfg.hyper.nu * top,
                            self.time()
                        )));
                    }
                    traj.lambda_top.push(obs.lambda_top);
                    traj.u_sq.push(obs.u_sq);
                    traj.outlier_count.push(Some(obs.outlier_count));
                } else {
                    traj.lambda_top.push(Vec::new());
                    traj.u_sq.push(Vec::new());
                    traj.outlier_count.push(None);
                }
            }
            if self.step >= steps {
                break;
            }
            self.step();
            if !self.x[0].is_finite() {
                return Err(Error::StabilityViolation(format!("chain diverged at t = {}", self.time())));
            }
        }
        Ok(traj)
    }
}

pub fn simulate(config: &SimConfig) -> Result<Trajectory> {
    Simulation::new(config)?.run()
}

/// Runs `n_seeds` independent trajectories with seeds `seed, seed+1, …`.
pub fn simulate_ensemble(config: &SimConfig) -> Result<Vec<Trajectory>> {
    (0..config.n_seeds.max(1) as u64)
        .into_par_iter()
        .map(|i| {
            let mut c = config.clone();
            c.seed = config.seed.wrapping_add(i);
            simulate(&c)
        })
        .collect()
}

/// Per-record mean and standard error across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub s_mean: Vec<Vec<f64>>,
    pub s_sem: Vec<Vec<f64>>,
    pub kappa_mean: Vec<f64>,
    pub kappa_sem: Vec<f64>,
}

pub fn mean_sem(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Sign-aligns every seed (jointly over modes) to `reference` for `s₁`, or to the
/// raw ensemble mean when no reference is given, then averages.
pub fn ensemble_stats(trajs: &[Trajectory], reference: Option<&[f64]>) -> EnsembleStats {
    let k = trajs[0].rank();
    let nrec = trajs.iter().map(|t| t.times.len()).min().unwrap_or(0);
    let raw_mean: Vec<f64> = (0..nrec)
        .map(|r| trajs.iter().map(|t| t.s[0][r]).sum::<f64>() / trajs.len() as f64)
        .collect();
    let refs = reference.unwrap_or(&raw_mean);
    let signs: Vec<f64> = trajs
        .iter()
        .map(|t| {
            let p: f64 = (0..nrec.min(refs.len())).map(|r| t.s[0][r] * refs[r]).sum();
            if p < 0.0 { -1.0 } else { 1.0 }
        })
        .collect();
    let mut s_mean = vec![vec![0.0; nrec]; k];
    let mut s_sem = vec![vec![0.0; nrec]; k];
    let mut kappa_mean = vec![0.0; nrec];
    let mut kappa_sem = vec![0.0; nrec];
    for r in 0..nrec {
        for kq in 0..k {
            let v: Vec<f64> = trajs.iter().zip(&signs).map(|(t, sg)| sg * t.s[kq][r]).collect();
            (s_mean[kq][r], s_sem[kq][r]) = mean_sem(&v);
        }
        let v: Vec<f64> = trajs.iter().map(|t| t.kappa[r]).collect();
        (kappa_mean[r], kappa_sem[r]) = mean_sem(&v);
    }
    EnsembleStats {
        times: trajs[0].times[..nrec].to_vec(),
        s_mean,
        s_sem,
        kappa_mean,
        kappa_sem,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratedFormReport {
    /// Max entry deviation using the step-exact weights of the integrator.
    pub max_abs_consistent: f64,
    /// Max entry deviation using trapezoidal quadrature of the chain history.
    pub max_abs_trapezoid: f64,
    pub t: f64,
}

/// Integrates the weights directly and, alongside, the pure noise process
/// `W_GOE` and the chain history; reconstructs
/// `W(t) = W_GOE(t) + (1−e^{−γt/2})C/γ − (K/2)∫e^{−γ(t−u)/2}xxᵀ/N du` at the final time.
pub fn integrated_form_check(config: &SimConfig) -> Result<IntegratedFormReport> {
    let mut sim = Simulation::new(config)?;
    let n = config.n;
    let nf = n as f64;
    let k = config.spectrum.rank() as f64;
    let gamma = config.hyper.gamma;
    let dt = config.dt;
    let steps = config.steps();
    let e = (-0.5 * gamma * dt).exp();
    let mut goe = sim.w.clone();
    let mut history: Vec<Vec<f64>> = vec![sim.x.clone()];
    // Negative phase with the integrator's own weights.
    let mut neg = PackedSym::zeros(n);
    let mut noise = Vec::new();
    for _ in 0..steps {
        let x = sim.x.clone();
        sim.step_with(Some(&mut noise));
        let w_step = 2.0 * (1.0 - e) / gamma / nf;
        let mut o = 0;
        for i in 0..n {
            for j in 0..=i {
                goe.data[o + j] = e * goe.data[o + j] + noise[o + j];
                neg.data[o + j] = e * neg.data[o + j] + w_step * x[i] * x[j];
            }
            o += i + 1;
        }
        history.push(sim.x.clone());
    }
    let t = steps as f64 * dt;
    let spike = (1.0 - (-0.5 * gamma * t).exp()) / gamma;
    let dirs = sim.directions().to_vec();
    let c = config.spectrum.eigenvalues();
    let cmat = |i: usize, j: usize| -> f64 {
        dirs.iter().zip(c).map(|(d, ck)| ck * d[i] * d[j]).sum::<f64>() / nf
    };
    let mut rec = PackedSym::zeros(n);
    let mut rec_trap = PackedSym::zeros(n);
    let weights: Vec<f64> = (0..=steps)
        .map(|m| {
            let w = (-0.5 * gamma * (t - m as f64 * dt)).exp() * dt;
            if m == 0 || m == steps { 0.5 * w } else { w }
        })
        .collect();
    for i in 0..n {
        for j in 0..=i {
            let base = goe.get(i, j) + spike * cmat(i, j);
            rec.set(i, j, base - 0.5 * k * neg.get(i, j));
            let tr: f64 = if steps == 0 {
                0.0
            } else {
                history.iter().zip(&weights).map(|(x, w)| w * x[i] * x[j]).sum::<f64>() / nf
            };
            rec_trap.set(i, j, base - 0.5 * k * tr);
        }
    }
    Ok(IntegratedFormReport {
        max_abs_consistent: rec.max_abs_diff(&sim.w),
        max_abs_trapezoid: rec_trap.max_abs_diff(&sim.w),
        t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, c: Vec<f64>, gamma: f64, eta: f64, nu: f64, dt: f64, t: f64) -> SimConfig {
        let spec = DataSpectrum::new(c).unwrap();
        let hyper = Hyper { gamma, eta, nu, beta: 1.0 };
        SimConfig::new(n, hyper, spec, dt, t, 7)
    }

    #[test]
    fn data_directions_orthonormal() {
        let d = data_directions(300, 3);
        for a in 0..3 {
            for b in 0..3 {
                let v = dot(&d[a], &d[b]) / 300.0;
                assert!((v - if a == b { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
        assert_eq!(d, data_directions(300, 3));
    }

    #[test]
    fn lanczos_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 120;
        let mut w = PackedSym::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                w.set(i, j, rng.sample::<f64, _>(StandardNormal) / (n as f64).sqrt());
            }
        }
        w.set(0, 0, 5.0);
        let (vals, vecs) = lanczos_top(&w, 3, &mut rng, 1e-10);
        let mut dense: Vec<f64> = SymmetricEigen::new(w.to_dense()).eigenvalues.iter().copied().collect();
        dense.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for i in 0..3 {
            assert!((vals[i] - dense[i]).abs() < 1e-8, "{} vs {}", vals[i], dense[i]);
            assert!((dot(&vecs[i], &vecs[i]) - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn sphere_is_exact_and_reproducible() {
        let c = cfg(200, vec![1.5, 0.5], 0.5, 3.0, 0.3, 0.05, 1.0);
        let mut sim = Simulation::new(&c).unwrap();
        for _ in 0..10 {
            sim.step();
            let r = dot(&sim.x, &sim.x) / 200.0;
            assert!((r - 1.0).abs() < 1e-12);
        }
        let a = simulate(&c).unwrap();
        let b = simulate(&c).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn initial_state_has_seed_overlaps() {
        let mut c = cfg(500, vec![1.5, 0.5], 0.5, 3.0, 0.3, 0.05, 0.0);
        c.s0 = vec![0.1, 0.2];
        let sim = Simulation::new(&c).unwrap();
        let s = sim.overlaps();
        assert!((s[0] - 0.1).abs() < 1e-12 && (s[1] - 0.2).abs() < 1e-12);
        assert!((dot(&sim.x, &sim.x) / 500.0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn prior_start_has_no_outliers() {
        let c = cfg(600, vec![1.5, 0.5], 0.5, 3.0, 0.3, 0.05, 0.0);
        let traj = simulate(&c).unwrap();
        assert_eq!(traj.outlier_count[0], Some(0));
        assert!(traj.u_sq[0].iter().all(|&u| u < 0.05));
        let edge = 2.0 * c.sigma();
        assert!((traj.lambda_top[0][0] - edge).abs() < 0.1 * edge);
    }

    #[test]
    fn integrated_form_reconstructs_weights() {
        let c = cfg(60, vec![1.5, 0.5], 0.5, 3.0, 0.3, 0.02, 1.0);
        let rep = integrated_form_check(&c).unwrap();
        assert!(rep.max_abs_consistent < 1e-12, "{rep:?}");
        let c2 = cfg(60, vec![1.5, 0.5], 0.5, 3.0, 0.3, 0.01, 1.0);
        let rep2 = integrated_form_check(&c2).unwrap();
        assert!(rep2.max_abs_trapezoid < 0.7 * rep.max_abs_trapezoid, "{rep:?} {rep2:?}");
    }

    #[test]
    fn frozen_chain_spike_grows_linearly() {
        // ν = 0 and no noise: W(t) = (1−e^{−γt/2})(C − K x0x0ᵀ/N)/γ, ≈ (t/2)(C − Kx0x0ᵀ/N) for γt ≪ 1.
        let mut c = cfg(80, vec![2.0], 1e-3, 1e12, 0.0, 0.01, 1.0);
        c.w0_prior = false;
        let mut sim = Simulation::new(&c).unwrap();
        let x0 = sim.x.clone();
        let d = sim.directions()[0].clone();
        for _ in 0..100 {
            sim.step();
        }
        let t = 1.0;
        let mut err: f64 = 0.0;
        for i in 0..80 {
            for j in 0..=i {
                let target = 0.5 * t * (2.0 * d[i] * d[j] - x0[i] * x0[j]) / 80.0;
                err = err.max((sim.w.get(i, j) - target).abs());
            }
        }
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn matched_overlap_picks_best_pair() {
        let n = 4;
        let dirs = vec![vec![2.0, 0.0, 0.0, 0.0], vec![0.0, 2.0, 0.0, 0.0]];
        let vecs = vec![vec![0.0, 1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0, 0.0]];
        let u = matched_overlaps(&vecs, &dirs);
        assert_eq!(u, vec![1.0, 1.0]);
        let _ = n;
    }

    #[test]
    fn config_rejects_bad_cadence() {
        let mut c = cfg(50, vec![1.0], 0.5, 3.0, 0.3, 0.05, 1.0);
        c.eig_every = Some(3);
        c.record_every = 2;
        assert!(simulate(&c).is_err());
    }
}
