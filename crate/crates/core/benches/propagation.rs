use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sescap::contour::ContourParams;
use sescap::diagnostics::{inner_region_error, ErrorNorm};
use sescap::hamiltonian::{eigendecompose, HamiltonianBuilder};
use sescap::par::{sequential_linear_algebra, Exec};
use sescap::propagation::{propagate_eigen, propagate_split5, transform_initial, GaussianPacket};
use sescap::{Grid, PotentialModel};

const MODES: [(&str, Exec); 2] = [("parallel", Exec::Parallel), ("sequential", Exec::Sequential)];

fn contour() -> ContourParams {
    ContourParams::new(0.5, 0.9, 90.0)
}

fn assembly(c: &mut Criterion) {
    let grid = Grid::new(400, 200.0).unwrap();
    let mut group = c.benchmark_group("assembly");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new("nonhermitian_400", name), |b| {
            b.iter(|| {
                HamiltonianBuilder::new(&grid, PotentialModel::TestWellBarrier)
                    .contour(contour())
                    .exec(exec)
                    .build()
                    .unwrap()
            })
        });
    }
    group.finish();
}

fn eigen_expansion(c: &mut Criterion) {
    let grid = Grid::new(400, 200.0).unwrap();
    let h = HamiltonianBuilder::new(&grid, PotentialModel::TestWellBarrier)
        .contour(contour())
        .build()
        .unwrap();
    let d = eigendecompose(&h).unwrap();
    let psi0 = transform_initial(&GaussianPacket::default(), &contour(), &grid).unwrap();
    let times: Vec<f64> = (0..=120).map(|i| 0.5 * i as f64).collect();
    let mut group = c.benchmark_group("eigen_expansion");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new("121_snapshots", name), |b| {
            b.iter(|| propagate_eigen(&d, black_box(&psi0), &times, exec).unwrap())
        });
    }
    group.finish();
}

fn error_series(c: &mut Criterion) {
    let grid = Grid::new(400, 200.0).unwrap();
    let big = Grid::new(4096, 400.0).unwrap();
    let packet = GaussianPacket::default();
    let times: Vec<f64> = (0..=40).map(|i| 0.25 * i as f64).collect();
    let coarse = sescap::propagation::initial_gaussian(&grid, &packet).unwrap();
    let fine = sescap::propagation::initial_gaussian(&big, &packet).unwrap();
    let a = propagate_split5(&coarse, &PotentialModel::TestWellBarrier, 0.01, &times).unwrap();
    let r = propagate_split5(&fine, &PotentialModel::TestWellBarrier, 0.01, &times).unwrap();
    let mut group = c.benchmark_group("inner_region_error");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new("41_snapshots", name), |b| {
            b.iter(|| inner_region_error(&a, &r, 85.0, ErrorNorm::Max, exec).unwrap())
        });
    }
    group.finish();
}

fn setup(c: &mut Criterion) {
    sequential_linear_algebra();
    assembly(c);
    eigen_expansion(c);
    error_series(c);
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = setup
}
criterion_main!(benches);
