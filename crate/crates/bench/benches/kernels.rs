use criterion::{black_box, criterion_group, criterion_main, Criterion};
use fundsol_bench::{quartic_plus_quadratic, radial_power};
use fundsol_core::kernel::{kernel_fft, FFTGridSpec, KernelConfig, KernelContext};
use fundsol_core::phase::SphereIntegrator;
use fundsol_core::propagator::{random_band_limited, Propagator, PropagationGrid};

fn fft_grid(c: &mut Criterion) {
    let p = quartic_plus_quadratic();
    let spec = FFTGridSpec::auto(&p, 1.0, 512, 0.0, KernelConfig::default().fft_truncation).unwrap();
    c.bench_function("kernel_fft 512^2", |b| b.iter(|| kernel_fft(&p, black_box(1.0), &spec).unwrap()));
}

fn split_point(c: &mut Criterion) {
    let ctx = KernelContext::new(&quartic_plus_quadratic(), KernelConfig::default()).unwrap();
    let mut group = c.benchmark_group("split point");
    group.sample_size(10);
    for (t, x) in [(1.0, [2.0, 0.0]), (4.0, [8.0, 3.0])] {
        group.bench_function(format!("t = {t}, x = {x:?}"), |b| b.iter(|| ctx.split(black_box(t), &x).unwrap()));
    }
    group.finish();
}

fn sphere_integral(c: &mut Criterion) {
    let integ = SphereIntegrator::new(&quartic_plus_quadratic(), &[1.0, 0.0]).unwrap();
    for lambda in [10.0, 1000.0] {
        c.bench_function(&format!("sphere integral lambda = {lambda}"), |b| {
            b.iter(|| integ.evaluate(black_box(lambda), 4.0).unwrap())
        });
    }
}

fn evolution(c: &mut Criterion) {
    let p = radial_power(2, 4);
    let grid = PropagationGrid { n: 2, points_per_axis: 256, extent: 40.0 };
    let u0 = random_band_limited(&grid, 4.0, 1).unwrap();
    let prop = Propagator::new(&p, &u0).unwrap();
    c.bench_function("evolve 256^2", |b| b.iter(|| prop.at(black_box(1.0)).unwrap()));
}

criterion_group!(benches, fft_grid, split_point, sphere_integral, evolution);
criterion_main!(benches);
