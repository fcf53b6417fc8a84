//! Throughput of the hot path: one transfer-operator apply, plus the 1D blur
//! it is built from. Run twice to compare the rayon and sequential row loops:
//!
//!     cargo bench -p rbm-core                          # parallel (default)
//!     cargo bench -p rbm-core --no-default-features    # sequential
//!
//! Criterion's saved baselines then report the delta between runs.

use criterion::{criterion_group, criterion_main, Criterion};
use rbm_core::grid::{build_axis, build_grid, Blur1d, GridOpts};
use rbm_core::spectral::{LinearOp, TransferOp};
use rbm_core::C64;

fn bench_apply(c: &mut Criterion) {
    let mut group = c.benchmark_group("transfer_apply");
    group.sample_size(10);
    for &w in &[4.0, 8.0] {
        let g = build_grid(1.0, w, &GridOpts::quick()).expect("grid build");
        let mut op = TransferOp::new(&g);
        let start = op.random_start(5);
        group.bench_function(format!("W={w}"), |b| {
            b.iter(|| {
                let mut s = start.clone();
                op.apply(&mut s);
                s
            })
        });
    }
    group.finish();
}

fn bench_blur(c: &mut Criterion) {
    let mut group = c.benchmark_group("blur_1d");
    let w = 8.0;
    let axis = build_axis(-4.0, 4.0, 1.0 / (6.0 * w));
    let blur = Blur1d::build(&axis, w);
    let field: Vec<C64> = axis
        .nodes
        .iter()
        .map(|&x| C64::new((-x * x / 2.0).exp(), x))
        .collect();
    group.bench_function("axis", |b| b.iter(|| blur.apply(&field)));
    group.finish();
}

criterion_group!(benches, bench_apply, bench_blur);
criterion_main!(benches);
