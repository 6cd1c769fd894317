use super::{data, Resolver};
use crate::config::Direction;
use crate::error::CliError;
use crate::output::{Cell, Output, Table};
use rayon::prelude::*;
use sbm_core::equilibrium::classify_phase;
use sbm_core::metrics::{
    beta_tt, eta_dd, fwd_gamma_flat, fwd_gamma_inf, fwd_gamma_wc, kl_report, kl_reverse_typical,
    rev_gamma_inf, rev_gamma_wc1, rev_gamma_wc2, tempered_forward_phase, tempered_reverse_phase,
    EtaOpt, KlReport, Teacher,
};
use sbm_core::Hyper;
use serde::Serialize;
use serde_json::{json, Value};

pub const PHASE_DIAGRAM_HELP: &str = "\
Output phase_diagram.csv, one row per (gamma, eta), eta outermost:
  gamma, eta, phase, lambda_1..lambda_K, u_sq_1..u_sq_K, h_sq, mu, d, a
phase is one of edge_hu0, aligned_h0, random_condensed, condensed_edge,
condensed_outlier; d counts condensed modes and a aligned ones.
Defaults: --k 1, --gamma 0.01:4:200, --eta 0.01:4:200.";

pub const KL_SWEEP_HELP: &str = "\
Output kl_sweep.csv, one row per (omega*, gamma, eta):
  omega_star, gamma, eta, phase, reverse_typical, reverse_pp, forward_typical, forward_pp
with --beta also: beta_opt, forward_kl_beta_opt, forward_kl_beta_one.
With --format json the full nested reports are written to kl_sweep.json.
Defaults: --omega 2.5, --gamma 0.05:3:60, --eta 1.";

pub const TEMPERED_HELP: &str = "\
Output tempered.csv, one row per (omega*, gamma, direction):
  omega_star, gamma, direction, label, eta_kind, eta, eta_lo, eta_hi
eta_kind is point, interval, point_and_interval or infinity; unused eta
columns are empty. thresholds.csv lists per omega*:
  omega_star, c1, rev_gamma_wc1, rev_gamma_wc2, rev_gamma_inf, fwd_gamma_wc, fwd_gamma_flat, fwd_gamma_inf
Defaults: --omega 2.2, --gamma 0.02:3:100, --direction both.";

pub const DOUBLE_DESCENT_HELP: &str = "\
Output double_descent.csv, one row per (eta, gamma):
  omega_star, eta, gamma, phase, reverse_typical, local_min
local_min is 1 at interior local minima of each curve in gamma.
summary.json holds eta_dd and the minima of each curve.
Defaults: --omega 2.5, --eta 0.1,0.2,0.4,0.7,1,1.5,2,3,5, --gamma 0.01:4:400.";

fn grid_rows<T: Send>(
    outer: &[f64],
    inner: &[f64],
    f: impl Fn(f64, f64) -> Result<T, CliError> + Sync,
) -> Result<Vec<T>, CliError> {
    // Workers own whole outer rows; collect keeps their order.
    let rows: Vec<Vec<T>> = outer
        .par_iter()
        .map(|&o| inner.iter().map(|&i| f(o, i)).collect::<Result<Vec<T>, CliError>>())
        .collect::<Result<_, _>>()?;
    Ok(rows.into_iter().flatten().collect())
}

pub fn phase_diagram(r: &Resolver, out: &mut Output) -> Result<Value, CliError> {
    #[derive(Serialize)]
    struct Resolved {
        c: Vec<f64>,
        gamma: Vec<f64>,
        eta: Vec<f64>,
    }
    let p = Resolved {
        c: r.spectrum(1)?,
        gamma: r.list(&r.0.gamma, "0.01:4:200")?,
        eta: r.list(&r.0.eta, "0.01:4:200")?,
    };
    let spec = data(&p.c)?;
    let k = p.c.len();
    let mut header = vec!["gamma".to_string(), "eta".into(), "phase".into()];
    header.extend((1..=k).map(|i| format!("lambda_{i}")));
    header.extend((1..=k).map(|i| format!("u_sq_{i}")));
    header.extend(["h_sq", "mu", "d", "a"].map(String::from));
    let rows = grid_rows(&p.eta, &p.gamma, |eta, gamma| {
        let sol = classify_phase(&spec, &Hyper::statics(gamma, eta)?)?;
        let mut row: Vec<Cell> = vec![gamma.into(), eta.into(), sol.phase.label().into()];
        row.extend(sol.lambda.iter().map(|&v| Cell::from(v)));
        row.extend(sol.u_sq.iter().map(|&v| Cell::from(v)));
        row.extend([sol.h_sq.into(), sol.mu.into(), sol.d.into(), sol.a.into()]);
        Ok(row)
    })?;
    out.write_table("phase_diagram", &Table { header, rows })?;
    Ok(serde_json::to_value(p)?)
}

pub fn kl_sweep(r: &Resolver, out: &mut Output) -> Result<Value, CliError> {
    #[derive(Serialize)]
    struct Resolved {
        omega: Vec<f64>,
        gamma: Vec<f64>,
        eta: Vec<f64>,
        beta: bool,
    }
    let p = Resolved {
        omega: r.list(&r.0.omega, "2.5")?,
        gamma: r.list(&r.0.gamma, "0.05:3:60")?,
        eta: r.list(&r.0.eta, "1")?,
        beta: r.0.beta.unwrap_or(false),
    };
    let mut points = Vec::new();
    for &w in &p.omega {
        for &e in &p.eta {
            points.extend(p.gamma.iter().map(|&g| (w, g, e)));
        }
    }
    let reports: Vec<(KlReport, Option<sbm_core::metrics::BetaTuning>)> = points
        .par_iter()
        .map(|&(w, g, e)| -> Result<_, CliError> {
            let t = Teacher::new(w)?;
            let h = Hyper::statics(g, e)?;
            let beta = if p.beta { Some(beta_tt(&t, &h)?) } else { None };
            Ok((kl_report(&t, &h)?, beta))
        })
        .collect::<Result<_, _>>()?;
    match out.format() {
        crate::config::Format::Json => {
            let items: Vec<Value> = reports
                .iter()
                .map(|(rep, b)| json!({ "report": rep, "beta": b }))
                .collect();
            out.write_json("kl_sweep.json", &items)?;
        }
        crate::config::Format::Csv => {
            let mut text = KlReport::CSV_HEADER.to_string();
            if p.beta {
                text.push_str(",beta_opt,forward_kl_beta_opt,forward_kl_beta_one");
            }
            text.push('\n');
            for (rep, b) in &reports {
                text.push_str(&rep.csv_row());
                if let Some(b) = b {
                    text.push_str(&format!(",{},{},{}", b.beta_opt, b.kl_opt, b.kl_at_one));
                }
                text.push('\n');
            }
            out.write_bytes("kl_sweep.csv", text.as_bytes())?;
        }
    }
    Ok(serde_json::to_value(p)?)
}


fn eta_cells(e: &EtaOpt) -> [Cell; 4] {
    let none = || Cell::Text(String::new());
    match *e {
        EtaOpt::Point { eta } => ["point".into(), eta.into(), none(), none()],
        EtaOpt::Interval { lo, hi } => ["interval".into(), none(), lo.into(), hi.into()],
        EtaOpt::PointAndInterval { eta, lo, hi } => ["point_and_interval".into(), eta.into(), lo.into(), hi.into()],
        EtaOpt::Infinity => ["infinity".into(), none(), none(), none()],
    }
}

pub fn tempered(r: &Resolver, out: &mut Output) -> Result<Value, CliError> {
    #[derive(Serialize)]
    struct Resolved {
        omega: Vec<f64>,
        gamma: Vec<f64>,
        direction: Direction,
    }
    let p = Resolved {
        omega: r.list(&r.0.omega, "2.2")?,
        gamma: r.list(&r.0.gamma, "0.02:3:100")?,
        direction: r.0.direction.unwrap_or_default(),
    };
    let dirs: Vec<&str> = match p.direction {
        Direction::Reverse => vec!["reverse"],
        Direction::Forward => vec!["forward"],
        Direction::Both => vec!["reverse", "forward"],
    };
    let mut table = Table::new(&["omega_star", "gamma", "direction", "label", "eta_kind", "eta", "eta_lo", "eta_hi"]);
    let rows = grid_rows(&p.omega, &p.gamma, |w, g| {
        let t = Teacher::new(w)?;
        dirs.iter()
            .map(|&d| {
                let phase = if d == "reverse" { tempered_reverse_phase(&t, g)? } else { tempered_forward_phase(&t, g)? };
                let mut row: Vec<Cell> = vec![w.into(), g.into(), d.into(), phase.label.label().into()];
                row.extend(eta_cells(&phase.eta_opt));
                Ok(row)
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;
    table.rows = rows.into_iter().flatten().collect();
    out.write_table("tempered", &table)?;

    let mut thresholds = Table::new(&[
        "omega_star", "c1", "rev_gamma_wc1", "rev_gamma_wc2", "rev_gamma_inf", "fwd_gamma_wc", "fwd_gamma_flat",
        "fwd_gamma_inf",
    ]);
    for &w in &p.omega {
        let t = Teacher::new(w)?;
        // The second warm/cold boundary exists only for part of the omega* range.
        let wc2 = rev_gamma_wc2(&t).map_or(Cell::Text(String::new()), Cell::Num);
        thresholds.push(vec![
            w.into(),
            t.c1.into(),
            rev_gamma_wc1(&t).into(),
            wc2,
            rev_gamma_inf(&t).into(),
            fwd_gamma_wc(&t).into(),
            fwd_gamma_flat(&t).into(),
            fwd_gamma_inf(&t).into(),
        ]);
    }
    out.write_table("thresholds", &thresholds)?;
    Ok(serde_json::to_value(p)?)
}

pub fn double_descent(r: &Resolver, out: &mut Output) -> Result<Value, CliError> {
    #[derive(Serialize)]
    struct Resolved {
        omega: f64,
        eta: Vec<f64>,
        gamma: Vec<f64>,
    }
    let p = Resolved {
        omega: r.scalar("omega", &r.0.omega, 2.5)?,
        eta: r.list(&r.0.eta, "0.1,0.2,0.4,0.7,1,1.5,2,3,5")?,
        gamma: r.list(&r.0.gamma, "0.01:4:400")?,
    };
    let t = Teacher::new(p.omega)?;
    let spec = t.spectrum();
    let curves: Vec<Vec<(f64, &'static str)>> = p
        .eta
        .par_iter()
        .map(|&e| {
            p.gamma
                .iter()
                .map(|&g| {
                    let h = Hyper::statics(g, e)?;
                    Ok((kl_reverse_typical(&t, &h)?, classify_phase(&spec, &h)?.phase.label()))
                })
                .collect::<Result<Vec<_>, CliError>>()
        })
        .collect::<Result<_, _>>()?;
    let mut table = Table::new(&["omega_star", "eta", "gamma", "phase", "reverse_typical", "local_min"]);
    let mut minima = Vec::new();
    for (curve, &e) in curves.iter().zip(&p.eta) {
        let v: Vec<f64> = curve.iter().map(|c| c.0).collect();
        let mut mins = Vec::new();
        for (i, (&g, &(kl, phase))) in p.gamma.iter().zip(curve).enumerate() {
            let is_min = i > 0 && i + 1 < v.len() && v[i] < v[i - 1] && v[i] <= v[i + 1];
            if is_min {
                mins.push(g);
            }
            table.push(vec![p.omega.into(), e.into(), g.into(), phase.into(), kl.into(), usize::from(is_min).into()]);
        }
        minima.push(json!({ "eta": e, "gamma_minima": mins }));
    }
    out.write_table("double_descent", &table)?;
    out.write_json("summary.json", &json!({ "omega_star": p.omega, "eta_dd": eta_dd(p.omega), "curves": minima }))?;
    Ok(serde_json::to_value(p)?)
}
