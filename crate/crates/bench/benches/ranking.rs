use arena_bench::ranked_round;
use arena_core::{bootstrap_ci, fit, BootstrapSpec};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn fitting(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit");
    for (agents, per_author) in [(8, 10), (19, 30)] {
        let round = ranked_round(agents, per_author, 1);
        let cfg = round.manifest.fit_config();
        group.bench_with_input(BenchmarkId::from_parameter(format!("{agents}x{per_author}")), &round, |b, r| {
            b.iter(|| fit(&r.outcomes, &cfg).expect("fit"))
        });
    }
    group.finish();
}

fn bootstrap(c: &mut Criterion) {
    let round = ranked_round(8, 10, 2);
    let rank = round.manifest.rank_config();
    let spec = BootstrapSpec::new(100, 0.025, 0);
    c.bench_function("bootstrap_ci/8x10/B=100", |b| {
        b.iter(|| bootstrap_ci(&round.outcomes, &round.problems, &spec, &rank).expect("bootstrap"))
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = fitting, bootstrap
}
criterion_main!(benches);
