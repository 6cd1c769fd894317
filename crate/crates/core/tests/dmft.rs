use sbm_core::dmft::{solve_dmft, TimeGrid};
use sbm_core::{DataSpectrum, Hyper};

fn case_a(t_max: f64, dt: f64) -> sbm_core::dmft::DmftSolution {
    let spec = DataSpectrum::new(vec![1.5, 0.5]).unwrap();
    let hyper = Hyper::new(0.5, 3.0, 0.3).unwrap();
    solve_dmft(&spec, &hyper, &[0.1, 0.1], TimeGrid::new(t_max, dt).unwrap()).unwrap()
}

#[test]
fn longer_horizon_leaves_the_past_unchanged() {
    let short = case_a(4.0, 0.05);
    let long = case_a(8.0, 0.05);
    for i in 0..=short.grid.n {
        assert_eq!(short.s[0][i], long.s[0][i], "s1 at step {i}");
        assert_eq!(short.kappa[i], long.kappa[i], "kappa at step {i}");
    }
}

#[test]
fn plateau_is_converged_in_the_step() {
    let coarse = case_a(30.0, 0.05);
    let fine = case_a(30.0, 0.025);
    let (a, b) = (coarse.s[0][coarse.grid.n].abs(), fine.s[0][fine.grid.n].abs());
    assert!((a - b).abs() < 1e-3, "s1(30): {a} at dt=0.05, {b} at dt=0.025");
    assert!((a - 0.60).abs() < 0.05, "{a}");
}
