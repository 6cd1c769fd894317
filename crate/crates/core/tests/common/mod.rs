//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use sbm_core::equilibrium::Hyper;
use sbm_core::metrics::{kl_reverse_typical, Teacher};

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

pub fn lin_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Plain golden section, kept separate from the library's.
pub fn golden(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = 0.618_033_988_749_894_8;
    while b - a > tol {
        let x1 = b - r * (b - a);
        let x2 = a + r * (b - a);
        if f(x1) <= f(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Interior local minima of the typical reverse KL in `γ ∈ (0, c₁)` at fixed `η`,
/// from sign changes of the finite-difference slope.
pub fn condensed_branch_minima(omega_star: f64, eta: f64, points: usize) -> Vec<f64> {
    let t = Teacher::new(omega_star).unwrap();
    let gs = lin_grid(1e-3, t.c1 * (1.0 - 1e-6), points);
    let v: Vec<f64> = gs
        .iter()
        .map(|&g| kl_reverse_typical(&t, &Hyper::statics(g, eta).unwrap()).unwrap())
        .collect();
    (1..points - 1).filter(|&i| v[i] < v[i - 1] && v[i] <= v[i + 1]).map(|i| gs[i]).collect()
}
