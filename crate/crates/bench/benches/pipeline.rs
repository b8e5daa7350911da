use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sparse_cce::extraction::{extract_nash, ExtractionConfig};
use sparse_cce::learners::HedgeLifted;
use sparse_cce::strategies::best_response_value;
use sparse_cce::Player;
use sparse_cce_bench::fixture;

fn best_response(c: &mut Criterion) {
    let mut group = c.benchmark_group("best_response_value");
    for h in [1, 2, 3] {
        let f = fixture(2, h, 10, 1);
        group.bench_with_input(BenchmarkId::from_parameter(h), &f, |b, f| {
            b.iter(|| best_response_value(&f.lifted, Player::Kibitzer, &f.mixture).unwrap())
        });
    }
    group.finish();
}

fn hedge_step(c: &mut Criterion) {
    let f = fixture(2, 2, 1, 2);
    c.bench_function("hedge_step_m2_h2", |b| {
        let mut learner = HedgeLifted::new(&f.lifted, [0.2; 3], Some(2)).unwrap();
        b.iter(|| learner.step().unwrap())
    });
}

fn extraction(c: &mut Criterion) {
    let f = fixture(2, 3, 20, 3);
    let cfg = ExtractionConfig {
        ne_threshold: 0.0,
        enumerate_all: true,
    };
    c.bench_function("extract_nash_m2_h3_t20", |b| {
        b.iter(|| extract_nash(&f.game, &f.lifted, &f.mixture, &cfg).unwrap())
    });
}

criterion_group!(benches, best_response, hedge_step, extraction);
criterion_main!(benches);
