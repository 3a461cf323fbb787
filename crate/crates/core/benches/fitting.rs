use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use l0fit::instances::gen_planted;
use l0fit::treefit::fit_tree_with;
use l0fit::ultrafit::{fit_ultrametric_exact, UltraSolverSpec};
use l0fit::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn exact_ultrametric(c: &mut Criterion) {
    let d = gen_planted(6, 4, 1).unwrap().matrix;
    let mut group = c.benchmark_group("exact_ultrametric_n6");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| fit_ultrametric_exact(black_box(&d), 6, exec).unwrap())
        });
    }
    group.finish();
}

fn tree_fitting(c: &mut Criterion) {
    let small = gen_planted(5, 2, 2).unwrap().matrix;
    let large = gen_planted(32, 20, 3).unwrap().matrix;
    let mut group = c.benchmark_group("fit_tree");
    group.sample_size(10);
    for (name, exec) in MODES {
        let exact = UltraSolverSpec::exact().with_execution(exec);
        group.bench_function(BenchmarkId::new("exact_n5", name), |b| {
            b.iter(|| fit_tree_with(black_box(&small), &exact, exec).unwrap())
        });
        let heuristic = UltraSolverSpec::heuristic();
        group.bench_function(BenchmarkId::new("heuristic_n32", name), |b| {
            b.iter(|| fit_tree_with(black_box(&large), &heuristic, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, exact_ultrametric, tree_fitting);
criterion_main!(benches);
