use nalgebra::Matrix3;
use proptest::prelude::*;
use sbm_core::equilibrium::*;
use sbm_core::metrics::*;
use sbm_core::SemicircleBulk;

/// Distinct descending eigenvalues in `(0.05, 3)`.
fn spectrum() -> impl Strategy<Value = DataSpectrum> {
    prop::collection::vec(0.05f64..3.0, 1..5).prop_filter_map("distinct", |mut c| {
        c.sort_by(|a, b| b.total_cmp(a));
        c.windows(2).all(|w| w[0] - w[1] > 1e-3).then(|| DataSpectrum::new(c).unwrap())
    })
}

fn log_uniform(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.ln()..hi.ln()).prop_map(f64::exp)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn inverse_resolvent_round_trips(sigma in 0.1f64..3.0, frac in 1e-3f64..1.0) {
        let bulk = SemicircleBulk::new(sigma).unwrap();
        let a = frac / sigma;
        let z = bulk.inverse_g(a).unwrap();
        prop_assert!(z >= bulk.edge() * (1.0 - 1e-15));
        prop_assert!((bulk.g(z).unwrap() - a).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn f_is_an_antiderivative_of_g(sigma in 0.1f64..3.0, over in 1.01f64..5.0) {
        let bulk = SemicircleBulk::new(sigma).unwrap();
        let z = over * bulk.edge();
        let h = 1e-5 * z;
        let fd = (bulk.f(z + h).unwrap() - bulk.f(z - h).unwrap()) / (2.0 * h);
        let g = bulk.g(z).unwrap();
        prop_assert!((fd - g).abs() <= 1e-6 * g.max(1.0), "fd {} g {}", fd, g);
        prop_assert!((bulk.b(z).unwrap() - (z * g - 1.0)).abs() <= 1e-14 * z * g);
    }

    #[test]
    fn order_parameters_are_physical(spec in spectrum(), gamma in log_uniform(0.02, 5.0), eta in log_uniform(0.02, 50.0)) {
        let hyper = Hyper::statics(gamma, eta).unwrap();
        let sol = classify_phase(&spec, &hyper).unwrap();
        let edge = hyper.bulk().edge();
        prop_assert!((0.0..=1.0).contains(&sol.h_sq));
        prop_assert_eq!(sol.h_sq > 0.0, sol.phase.is_condensed(), "{:?} h_sq {}", sol.phase, sol.h_sq);
        for k in 0..spec.rank() {
            prop_assert!((0.0..=1.0 + 1e-12).contains(&sol.u_sq[k]), "u_sq {:?}", sol.u_sq);
            prop_assert!(sol.lambda[k] >= edge * (1.0 - 1e-12), "{:?} below {}", sol.lambda, edge);
        }
        prop_assert!(sol.lambda.windows(2).all(|w| w[0] >= w[1] * (1.0 - 1e-12)));
        // ln Z = H − ⟨E⟩ at the saddle.
        let gibbs = log_partition_intensive(&sol, &hyper) - entropy_intensive(&sol, &hyper) + avg_energy_intensive(&sol);
        prop_assert!(gibbs.abs() < 1e-12, "{}", gibbs);
        if sol.phase == Phase::CondensedOutlier {
            let r = force_balance_residual(&spec, gamma, sol.d, sol.g1());
            prop_assert!(r.abs() < 1e-10 * spec.trace().max(1.0), "residual {}", r);
        }
    }

    #[test]
    fn alignment_grows_with_sharper_posterior(c in 0.2f64..3.0, eta in log_uniform(0.05, 50.0), g0 in log_uniform(0.02, 5.0)) {
        // Lower γ never reduces the top-mode alignment h²u₁² + u₁².
        let spec = DataSpectrum::new(vec![c]).unwrap();
        let at = |g: f64| {
            let s = classify_phase(&spec, &Hyper::statics(g, eta).unwrap()).unwrap();
            s.u_sq[0] + s.h_sq
        };
        prop_assert!(at(0.9 * g0) >= at(g0) - 1e-12);
    }

    #[test]
    fn predictive_never_beats_typical_gap(w in 1.05f64..4.0, gamma in log_uniform(0.02, 5.0), eta in log_uniform(0.02, 50.0)) {
        let t = Teacher::new(w).unwrap();
        let h = Hyper::statics(gamma, eta).unwrap();
        prop_assert!(kl_reverse_pp(&t, &h).unwrap() <= kl_reverse_typical(&t, &h).unwrap() + 1e-10);
        prop_assert!(kl_forward_pp(&t, &h).unwrap() <= kl_forward_typical(&t, &h).unwrap() + 1e-10);
    }

    #[test]
    fn cubic_roots_match_rank_one_update(
        c2 in 0.05f64..1.5, gap in 0.01f64..2.0, eta in log_uniform(0.05, 50.0),
        m1 in 0.0f64..1.0, share in 0.0f64..1.0,
    ) {
        let c1 = c2 + gap;
        let m2 = (1.0 - m1) * share;
        let rest = (1.0 - m1 - m2).max(0.0);
        let a = [m1.sqrt(), m2.sqrt(), rest.sqrt()];
        let m = Matrix3::from_fn(|i, j| [c1, c2, 0.0][i] * f64::from(u8::from(i == j)) + a[i] * a[j] / eta);
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|x, y| y.total_cmp(x));
        let (p, q, r) = pp_cubic_coefficients(c1, c2, m1, m2, eta);
        match real_cubic_roots(p, q, r) {
            Ok(roots) => for (x, y) in roots.iter().zip(&ev) {
                prop_assert!((x - y).abs() <= 1e-8 * (1.0 + y.abs()), "{:?} vs {:?}", roots, ev);
            },
            Err(sbm_core::Error::CubicDegeneracy(_)) => {}
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }

    #[test]
    fn kl_report_json_round_trips(w in 1.05f64..4.0, gamma in log_uniform(0.02, 5.0), eta in log_uniform(0.02, 50.0)) {
        let r = kl_report(&Teacher::new(w).unwrap(), &Hyper::statics(gamma, eta).unwrap()).unwrap();
        let back: KlReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        prop_assert_eq!(back, r);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn forward_kl_is_convex_in_beta(w in 1.05f64..4.0, gamma in log_uniform(0.05, 3.0), eta in log_uniform(0.05, 20.0)) {
        let t = Teacher::new(w).unwrap();
        let h = Hyper::statics(gamma, eta).unwrap();
        let betas: Vec<f64> = (0..=80).map(|i| 0.2 + 0.05 * i as f64).collect();
        let v: Vec<f64> = betas.iter().map(|&b| forward_kl_beta(&t, &h, b).unwrap()).collect();
        for i in 1..v.len() - 1 {
            let second = v[i + 1] - 2.0 * v[i] + v[i - 1];
            prop_assert!(second >= -1e-8, "beta {}: {}", betas[i], second);
        }
    }
}
