//! Workload benchmarks for the data-parallel paths.
//!
//! The benchmark ids carry the build mode, so running
//! `cargo bench` and `cargo bench --no-default-features` produces directly
//! comparable entries for the rayon and sequential implementations.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::Vector3;
use patchshade::{
    derive_from_scene, integrate_heights, solve_generic, world_normal_field, GridSpec,
    NormalGrid, PatchGrid, Scene, ScenePose,
};
use std::hint::black_box;

fn mode() -> &'static str {
    if cfg!(feature = "parallel") {
        "parallel"
    } else {
        "sequential"
    }
}

fn bench_world_normal_field(c: &mut Criterion) {
    let scene = Scene::cylinder(1.0);
    let f = scene.height_jet(7).unwrap();
    let it = derive_from_scene(&f, &Vector3::new(0.0, 0.6, 0.8), 6).unwrap();
    let sol = solve_generic(&it, 0.5, 0.5).unwrap();
    let pose = ScenePose::from_angles(0.2, 0.4, 0.1);

    let mut group = c.benchmark_group("world_normal_field");
    for n in [129usize, 257] {
        let spec = GridSpec { n, radius: 0.3 };
        group.bench_with_input(BenchmarkId::new(mode(), n), &spec, |b, spec| {
            b.iter(|| world_normal_field(black_box(&sol), &pose, spec, true).unwrap());
        });
    }
    group.finish();
}

fn bench_integrate_heights(c: &mut Criterion) {
    let scene = Scene::sphere_cap(2.0);
    let mut group = c.benchmark_group("integrate_heights");
    for n in [129usize, 257] {
        let spec = GridSpec { n, radius: 0.3 };
        let grid =
            PatchGrid::from_fn_vector(n, n, spec.spacing(), |x, y| scene.normal(x, y)).unwrap();
        let normals = NormalGrid {
            grid,
            renormalized: true,
            visible: true,
        };
        group.bench_with_input(BenchmarkId::new(mode(), n), &normals, |b, normals| {
            b.iter(|| integrate_heights(black_box(normals)).unwrap());
        });
    }
    group.finish();
}

fn bench_epsilon_error(c: &mut Criterion) {
    let scene = Scene::cylinder(1.0);
    let f = scene.height_jet(7).unwrap();
    let it = derive_from_scene(&f, &Vector3::new(0.0, 0.6, 0.8), 6).unwrap();
    let sol = solve_generic(&it, 1.0, 1.0).unwrap();

    let mut group = c.benchmark_group("epsilon_error");
    for samples in [201usize, 401] {
        group.bench_with_input(BenchmarkId::new(mode(), samples), &samples, |b, &samples| {
            b.iter(|| black_box(&sol).epsilon_error(0.3, samples));
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_world_normal_field,
    bench_integrate_heights,
    bench_epsilon_error
);
criterion_main!(benches);
