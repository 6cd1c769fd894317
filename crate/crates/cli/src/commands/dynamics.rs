use super::{data, hyper, Resolver};
use crate::error::CliError;
use crate::output::{Cell, Output, Table};
use sbm_core::dmft::{condensation_onset_time, detachment_time, solve_dmft, TimeGrid, ONSET_THRESHOLD};
use sbm_core::langevin::{ensemble_stats, simulate_ensemble, SimConfig};
use sbm_core::metrics::{dynamic_kls, early_stopping_time, early_stopping_time_exact, Teacher, TrainingPath};
use serde::Serialize;
use serde_json::{json, Value};

pub const DMFT_HELP: &str = "\
Output dmft.csv, one row per grid time:
  t, s_1..s_K, kappa, q_t0, r_t0
where q_t0 and r_t0 are the correlation and response with the initial time.
summary.json holds the final signals, kappa, the condensation onset time and
the bulk detachment time of each mode.
Defaults: --c 1.5,0.5 --gamma 0.5 --eta 3 --nu 0.3 --s0 0.1 --t-max 30 --dt 0.05.";

pub const LANGEVIN_HELP: &str = "\
Output seed_<i>.csv per seed, one row per recorded time:
  t, s_1..s_K, lambda_1..lambda_{K+1}, u_1..u_K, kappa, outlier_count
where lambda are the top eigenvalues of W, u_k the squared overlap of the
k-th top eigenvector with its data direction, and the eigen columns are
empty between eigen-decompositions. ensemble.csv has one row per time:
  t, s_1_mean, s_1_sem, .., s_K_mean, s_K_sem, kappa_mean, kappa_sem
summary.json holds the final ensemble means and the largest outlier count.
Defaults: as dmft, plus --n 1000 --seeds 5 --seed 0; --dt defaults to
0.01*min(1, 1/nu, 1/gamma).";

pub const DYNAMICS_KL_HELP: &str = "\
Data are the two modes of the rank-one teacher with strength --omega.
Output dynamics_kl.csv, one row per grid time:
  t, forward_kl, reverse_kl, theta1, teacher_overlap, early_training
early_training is 1 while the negative phase is still negligible.
summary.json holds the early-stopping time t* (closed form and exact
minimization) and the time and value of the reverse-KL minimum.
Defaults: --omega 2.5 --gamma 0.4 --eta 10 --nu 10 --s0 0.1 --t-max 10,
--dt min(0.05, 0.5/nu).";

#[derive(Serialize)]
struct DynParams {
    c: Vec<f64>,
    gamma: f64,
    eta: f64,
    nu: f64,
    s0: Vec<f64>,
    t_max: f64,
    dt: f64,
}

fn dyn_params(r: &Resolver, c: Vec<f64>, defaults: (f64, f64, f64, f64), dt: impl Fn(f64, f64) -> f64) -> Result<DynParams, CliError> {
    let (g, e, n, t_max) = defaults;
    let gamma = r.scalar("gamma", &r.0.gamma, g)?;
    let nu = r.0.nu.unwrap_or(n);
    Ok(DynParams {
        s0: r.s0(c.len(), 0.1)?,
        c,
        gamma,
        eta: r.scalar("eta", &r.0.eta, e)?,
        nu,
        t_max: r.0.t_max.unwrap_or(t_max),
        dt: r.0.dt.unwrap_or_else(|| dt(gamma, nu)),
    })
}

fn csv_table(write: impl FnOnce(&mut Vec<u8>) -> sbm_core::Result<()>) -> Result<Table, CliError> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(Table::from_csv(&String::from_utf8_lossy(&buf)))
}

pub fn dmft(r: &Resolver, out: &mut Output) -> Result<Value, CliError> {
    let c = match &r.0.c {
        Some(c) => c.resolve()?,
        None => vec![1.5, 0.5],
    };
    let p = dyn_params(r, c, (0.5, 3.0, 0.3, 30.0), |_, _| 0.05)?;
    let spec = data(&p.c)?;
    let h = hyper(p.gamma, p.eta, p.nu)?;
    let sol = solve_dmft(&spec, &h, &p.s0, TimeGrid::new(p.t_max, p.dt)?)?;
    out.write_table("dmft", &csv_table(|b| sol.write_csv(b))?)?;
    let last = sol.grid.n;
    out.write_json(
        "summary.json",
        &json!({
            "final_t": sol.grid.time(last),
            "final_s": sol.s.iter().map(|s| s[last]).collect::<Vec<_>>(),
            "final_kappa": sol.kappa[last],
            "condensation_onset": condensation_onset_time(&sol, ONSET_THRESHOLD),
            "detachment_times": (0..p.c.len()).map(|k| detachment_time(k, &spec, &h)).collect::<Vec<_>>(),
        }),
    )?;
    Ok(serde_json::to_value(p)?)
}

pub fn langevin(r: &Resolver, seed: u64, out: &mut Output) -> Result<Value, CliError> {
    #[derive(Serialize)]
    struct Resolved {
        #[serde(flatten)]
        dynamics: DynParams,
        n: usize,
        seeds: usize,
        seed: u64,
        record_every: usize,
        eig_every: Option<usize>,
    }
    let c = match &r.0.c {
        Some(c) => c.resolve()?,
        None => vec![1.5, 0.5],
    };
    let dynamics = dyn_params(r, c, (0.5, 3.0, 0.3, 30.0), |g, nu| 1e-2 * 1f64.min(1.0 / nu).min(1.0 / g))?;
    let spec = data(&dynamics.c)?;
    let h = hyper(dynamics.gamma, dynamics.eta, dynamics.nu)?;
    let mut cfg = SimConfig::new(r.0.n.unwrap_or(1000), h, spec, dynamics.dt, dynamics.t_max, seed);
    cfg.n_seeds = r.0.seeds.unwrap_or(5);
    cfg.s0 = dynamics.s0.clone();
    if let Some(every) = r.0.record_every {
        cfg.record_every = every;
        cfg.eig_every = Some(every);
    }
    if let Some(every) = r.0.eig_every {
        cfg.eig_every = Some(every);
    }
    let trajs = simulate_ensemble(&cfg)?;
    for (i, t) in trajs.iter().enumerate() {
        out.write_table(&format!("seed_{i}"), &csv_table(|b| t.write_csv(b))?)?;
    }
    let stats = ensemble_stats(&trajs, None);
    let k = dynamics.c.len();
    let mut header = vec!["t".to_string()];
    for i in 1..=k {
        header.extend([format!("s_{i}_mean"), format!("s_{i}_sem")]);
    }
    header.extend(["kappa_mean", "kappa_sem"].map(String::from));
    let mut table = Table { header, rows: Vec::new() };
    for (j, &t) in stats.times.iter().enumerate() {
        let mut row: Vec<Cell> = vec![t.into()];
        for i in 0..k {
            row.extend([stats.s_mean[i][j].into(), stats.s_sem[i][j].into()]);
        }
        row.extend([stats.kappa_mean[j].into(), stats.kappa_sem[j].into()]);
        table.push(row);
    }
    out.write_table("ensemble", &table)?;
    let last = stats.times.len() - 1;
    out.write_json(
        "summary.json",
        &json!({
            "final_t": stats.times[last],
            "final_s_mean": (0..k).map(|i| stats.s_mean[i][last]).collect::<Vec<_>>(),
            "final_kappa_mean": stats.kappa_mean[last],
            "max_outlier_count": trajs.iter().map(|t| t.max_outlier_count()).max(),
        }),
    )?;
    Ok(serde_json::to_value(Resolved {
        dynamics,
        n: cfg.n,
        seeds: cfg.n_seeds,
        seed,
        record_every: cfg.record_every,
        eig_every: cfg.eig_every,
    })?)
}

pub fn dynamics_kl(r: &Resolver, out: &mut Output) -> Result<Value, CliError> {
    let omega = r.scalar("omega", &r.0.omega, 2.5)?;
    let t = Teacher::new(omega)?;
    let spec = t.spectrum();
    let p = dyn_params(r, spec.eigenvalues().to_vec(), (0.4, 10.0, 10.0, 10.0), |_, nu| 0.05f64.min(0.5 / nu))?;
    if r.0.c.is_some() {
        return Err(CliError::Config("dynamics-kl takes its data from --omega, not --c".into()));
    }
    let h = hyper(p.gamma, p.eta, p.nu)?;
    let sol = solve_dmft(&spec, &h, &p.s0, TimeGrid::new(p.t_max, p.dt)?)?;
    let kls = dynamic_kls(&TrainingPath::from_dmft(&sol), &t, &h)?;
    out.write_table("dynamics_kl", &csv_table(|b| kls.write_csv(b))?)?;
    let (t_min, kl_min) = kls.reverse_min();
    out.write_json(
        "summary.json",
        &json!({
            "omega_star": omega,
            "t_star": early_stopping_time(&t, &h)?,
            "t_star_exact": early_stopping_time_exact(&t, &h)?,
            "reverse_min_t": t_min,
            "reverse_min": kl_min,
            "first_flagged": kls.first_flagged(),
        }),
    )?;
    Ok(json!({ "omega": omega, "dynamics": p }))
}
