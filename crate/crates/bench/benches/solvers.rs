use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use rte_bench::benchmark_setup;
use rte_core::{
    build_tree, f_aux, geometric_cell_integral, solve, solve_treecode, upward_pass, CellWeightTable,
    ChebyshevPlan, SolverOptions, TreecodeParams,
};

fn kernel_benches(c: &mut Criterion) {
    let mut group = c.benchmark_group("kernel");
    group.bench_function("f_aux", |b| {
        b.iter(|| f_aux(black_box(0.31), black_box(-0.47)))
    });
    group.bench_function("cell_integral", |b| {
        b.iter(|| {
            geometric_cell_integral(
                black_box([0.21, 0.34]),
                black_box([0.65, 0.48]),
                black_box(1.0 / 48.0),
            )
        })
    });
    let setup = benchmark_setup(48);
    group.bench_function("weight_table_m48", |b| {
        b.iter(|| CellWeightTable::build(&setup.grid))
    });
    group.bench_function("attenuation", |b| {
        b.iter(|| {
            setup
                .medium
                .attenuation(black_box([0.1, 0.2]), black_box([0.8, 0.9]))
        })
    });
    group.finish();
}

fn tree_benches(c: &mut Criterion) {
    let mut group = c.benchmark_group("treecode");
    let setup = benchmark_setup(48);
    group.bench_function("build_tree_m2304", |b| {
        b.iter(|| build_tree(setup.grid.points(), 64).unwrap())
    });
    let tree = build_tree(setup.grid.points(), 64).unwrap();
    let plan = ChebyshevPlan::new(&tree, 6).unwrap();
    let strengths: Vec<f64> = setup
        .grid
        .points()
        .iter()
        .map(|x| (7.0 * x[0]).sin() + x[1])
        .collect();
    group.bench_function("upward_pass_m2304_n6", |b| {
        b.iter(|| upward_pass(&tree, &plan, black_box(&strengths)))
    });
    group.finish();
}

fn march_benches(c: &mut Criterion) {
    let mut group = c.benchmark_group("march_m256");
    group.sample_size(10);
    let setup = benchmark_setup(16);
    let options = SolverOptions::default();
    group.bench_function("direct", |b| {
        b.iter(|| {
            solve(
                &setup.grid,
                &setup.time_grid,
                &setup.medium,
                &setup.source,
                &options,
            )
            .unwrap()
        })
    });
    for theta in [0.3, 0.7] {
        group.bench_with_input(
            BenchmarkId::new("treecode", theta),
            &theta,
            |b, &theta| {
                b.iter(|| {
                    solve_treecode(
                        &setup.grid,
                        &setup.time_grid,
                        &setup.medium,
                        &setup.source,
                        &TreecodeParams {
                            theta,
                            order: 6,
                            ..Default::default()
                        },
                        &options,
                    )
                    .unwrap()
                })
            },
        );
    }
    group.finish();
}

criterion_group!(benches, kernel_benches, tree_benches, march_benches);
criterion_main!(benches);
