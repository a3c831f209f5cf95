//! Parallel against sequential symbol sweeps.
//!
//! Without the `parallel` feature both arms run the same sequential code, so
//! the comparison is only meaningful in a default build.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hausdorff::fixtures;
use hausdorff::symbol::{Axis, GridSpec};
use hausdorff::{discretize_measure, Execution, SymbolGrid};

fn sweeps(c: &mut Criterion) {
    let cases = [
        (fixtures::cesaro_1_1(), vec![Axis::symmetric(40.0, 2049)]),
        (fixtures::qcesaro(-0.25), vec![Axis::symmetric(40.0, 2049)]),
        (fixtures::cesaro(2.0, 2), vec![Axis::symmetric(20.0, 65); 2]),
    ];
    let mut group = c.benchmark_group("symbol_grid");
    group.sample_size(10);
    for (spec, axes) in cases {
        let nodes = discretize_measure(&spec, &spec.quadrature).expect("fixture discretizes");
        let grid = GridSpec { axes };
        for exec in [Execution::Parallel, Execution::Sequential] {
            group.bench_with_input(
                BenchmarkId::new(format!("{exec:?}"), &spec.name),
                &grid,
                |b, grid| b.iter(|| SymbolGrid::compute(black_box(&nodes), grid, exec).unwrap()),
            );
        }
    }
    group.finish();
}

criterion_group!(benches, sweeps);
criterion_main!(benches);
