use criterion::{black_box, criterion_group, criterion_main, Criterion};
use sbm_core::equilibrium::classify_phase;
use sbm_core::metrics::{kl_report, tempered_forward_phase, tempered_reverse_phase, Teacher};
use sbm_core::{DataSpectrum, Hyper};

fn phase_sweep(c: &mut Criterion) {
    let spec = DataSpectrum::new(vec![1.5, 0.5]).unwrap();
    let axis: Vec<f64> = (0..50).map(|i| 0.01 + 4.0 * i as f64 / 49.0).collect();
    c.bench_function("classify_phase 50x50", |b| {
        b.iter(|| {
            for &g in &axis {
                for &e in &axis {
                    black_box(classify_phase(&spec, &Hyper::statics(g, e).unwrap()).unwrap());
                }
            }
        })
    });
}

fn divergences(c: &mut Criterion) {
    let t = Teacher::new(2.5).unwrap();
    let h = Hyper::statics(0.4, 3.0).unwrap();
    c.bench_function("kl_report", |b| b.iter(|| kl_report(black_box(&t), black_box(&h)).unwrap()));
    let t = Teacher::new(2.2).unwrap();
    c.bench_function("tempered_reverse_phase", |b| b.iter(|| tempered_reverse_phase(&t, black_box(0.3)).unwrap()));
    c.bench_function("tempered_forward_phase", |b| b.iter(|| tempered_forward_phase(&t, black_box(0.3)).unwrap()));
}

criterion_group!(benches, phase_sweep, divergences);
criterion_main!(benches);
