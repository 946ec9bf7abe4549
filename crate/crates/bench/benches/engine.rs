use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use srmkit::dsl::parse;
use srmkit::srm::{partial_evaluate, run, HoleAssignment};
use srmkit_bench::{demos, DOORKEY_SRC};

fn parsing(c: &mut Criterion) {
    c.bench_function("parse doorkey", |b| {
        b.iter(|| parse(black_box(DOORKEY_SRC)).unwrap())
    });
}

// Evaluating many hole samples on the same trajectories: a full run per
// sample against one symbolic pass followed by substitution.
fn many_samples(c: &mut Criterion) {
    let srm = srmkit::assets::doorkey();
    let trajs = demos(8, 16);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let samples: Vec<HoleAssignment> = (0..64)
        .map(|_| {
            HoleAssignment::new(
                (0..srm.n_holes())
                    .map(|_| rng.random_range(-2.0..2.0))
                    .collect(),
            )
        })
        .collect();

    let mut g = c.benchmark_group("64 samples x 16 demos");
    g.bench_function("run", |b| {
        b.iter(|| {
            let mut total = 0.0;
            for h in &samples {
                for tau in &trajs {
                    total += run(&srm, tau, h).unwrap().total;
                }
            }
            total
        })
    });
    g.bench_function("partial + substitute", |b| {
        b.iter(|| {
            let partial: Vec<_> = trajs
                .iter()
                .map(|t| partial_evaluate(&srm, t).unwrap())
                .collect();
            let mut total = 0.0;
            for h in &samples {
                for p in &partial {
                    total += p.rewards(&srm, h).unwrap().iter().sum::<f64>();
                }
            }
            total
        })
    });
    g.finish();
}

criterion_group!(benches, parsing, many_samples);
criterion_main!(benches);
