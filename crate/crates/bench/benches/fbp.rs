use criterion::{criterion_group, criterion_main, Criterion};
use planecover::reconstruct::ramp_kernel;
use planecover::xray::{half_turn_angles, sinogram_plane, uniform_grid};
use planecover::{filtered_backprojection, Bump, ImageGrid, Phantom, QuadSettings, WarpedMetric};

fn bench(c: &mut Criterion) {
    let f = Phantom::new(vec![Bump { center: vec![0.2, 0.3, 0.0], radius: 0.5, amplitude: 1.0 }]).unwrap();
    let plane = WarpedMetric::euclidean().plane(0.0);
    let s = sinogram_plane(&f, &plane, &uniform_grid(-1.2, 1.2, 128), &half_turn_angles(128), &QuadSettings::default()).unwrap();
    let grid = ImageGrid::new(64, 1.0);
    c.bench_function("ramp kernel 256", |b| b.iter(|| ramp_kernel(256, 0.01)));
    let mut group = c.benchmark_group("fbp");
    group.sample_size(20);
    group.bench_function("128x128 sinogram to 64x64 image", |b| b.iter(|| filtered_backprojection(&s, &grid).unwrap()));
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
