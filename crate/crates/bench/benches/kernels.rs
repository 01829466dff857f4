use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use phasescan_core::chern::fhs_sums;
use phasescan_core::{
    band_set, build_s, build_s0, chern_degree, eig_unitary, gamma_crossings, run_scan, FluxPair, ScanSpec, ScatterParams,
};

fn params() -> ScatterParams {
    ScatterParams {
        alpha: 1.0,
        beta: 0.3,
        theta1: PI / 4.0,
        theta2: PI / 3.0,
        eta1: PI / 2.0,
        eta2: PI / 6.0,
        nu1: 0.6,
        ..Default::default()
    }
}

fn kernels(c: &mut Criterion) {
    let p = params();
    let s = build_s(&p);
    let s0 = build_s0(&p);
    let flux = FluxPair::new(0.7, -1.3);

    c.bench_function("eig_unitary", |b| b.iter(|| eig_unitary(black_box(&s)).unwrap()));
    c.bench_function("band_set", |b| b.iter(|| band_set(black_box(&s), flux, None).unwrap()));
    c.bench_function("gamma_crossings", |b| b.iter(|| gamma_crossings(black_box(&s0)).unwrap()));
    c.bench_function("chern_degree", |b| b.iter(|| chern_degree(black_box(&s)).unwrap()));

    let mut g = c.benchmark_group("fhs_sums");
    g.sample_size(20);
    for n in [40, 80] {
        g.bench_function(format!("n{n}"), |b| b.iter(|| fhs_sums(black_box(&s), n, 10).unwrap()));
    }
    g.finish();
}

fn scan(c: &mut Criterion) {
    let spec = ScanSpec::parse(
        "theta1 = pi/4\ntheta2 = pi/3\neta1 = pi/2\neta2 = pi/6\nnu1 = 0.6\ngamma = 0.5\n\
         scan.axis1 = alpha\nscan.axis1.min = 0\nscan.axis1.max = pi\nscan.axis1.count = 12\n\
         scan.axis2 = beta\nscan.axis2.min = 0\nscan.axis2.max = pi\nscan.axis2.count = 12\n\
         scan.grid = 24\nscan.verify = false\nscan.band = 1\n",
    )
    .unwrap();
    let mut g = c.benchmark_group("run_scan");
    g.sample_size(10);
    g.bench_function("12x12", |b| b.iter(|| run_scan(black_box(&spec)).unwrap()));
    g.finish();
}

criterion_group!(benches, kernels, scan);
criterion_main!(benches);
