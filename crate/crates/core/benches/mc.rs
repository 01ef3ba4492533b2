use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use attrition_conformal::learners::{Forest, ForestParams};
use attrition_conformal::pipeline::Method;
use attrition_conformal::rng::SplitMix64;
use attrition_conformal::sim::{generate, run_mc, DgpKind, DgpSpec, McSettings};
use attrition_conformal::{ConformalConfig, LearnerRoles, Matrix};

fn settings(method: Method) -> McSettings {
    McSettings {
        dgp: DgpSpec::new(DgpKind::Dgp1, 1000).with_seed(7),
        method,
        learner: "glm".into(),
        cfg: ConformalConfig::default(),
        roles: LearnerRoles::glm(),
        reps: 8,
    }
}

fn threads_label(t: Option<usize>) -> String {
    t.map_or("pool".into(), |t| format!("{t}"))
}

fn bench_mc(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_mc");
    group.sample_size(10);
    for method in [Method::Cise, Method::WcqrNestedExact] {
        let s = settings(method);
        for threads in [Some(1), None] {
            group.bench_with_input(
                BenchmarkId::new(method.as_str(), threads_label(threads)),
                &threads,
                |b, &t| b.iter(|| run_mc(&s, t).unwrap()),
            );
        }
    }
    group.finish();
}

fn bench_forest(c: &mut Criterion) {
    let draw = generate(&DgpSpec::new(DgpKind::Dgp1, 2000).with_seed(3)).unwrap();
    let mut rng = SplitMix64::new(11);
    let y: Vec<f64> = (0..2000).map(|_| rng.normal()).collect();
    let x: &Matrix = &draw.data.x;
    let params = ForestParams {
        n_trees: 100,
        max_depth: 8,
        min_leaf: 5,
        mtry: 3,
        seed: 1,
    };
    let mut group = c.benchmark_group("forest_fit");
    group.sample_size(10);
    for threads in [Some(1), None] {
        group.bench_with_input(
            BenchmarkId::from_parameter(threads_label(threads)),
            &threads,
            |b, &t| {
                b.iter(|| attrition_conformal::par::with_threads(t, || Forest::fit(x, &y, &params)))
            },
        );
    }
    group.finish();
}

criterion_group!(benches, bench_mc, bench_forest);
criterion_main!(benches);
