use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ragtune_core::pareto::{hypervolume_exact, pareto_set};
use ragtune_core::{AcquisitionContext, GpModel, ObjectiveVector, ReferencePoint, SearchSpace, SobolStream, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn training_set(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let space = SearchSpace::rag_default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<Vec<f64>> = (0..n).map(|_| space.encode(&space.sample_uniform(&mut rng).unwrap()).unwrap()).collect();
    let ys = xs.iter().map(|x| vec![-x[0] - x[1], -x[2] - 0.5 * x[3], x[0] + x[7], x[4] - x[3] + x[8]]).collect();
    (xs, ys)
}

fn hypervolume(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let history: Vec<(usize, ObjectiveVector)> =
        (0..50).map(|i| (i, ObjectiveVector((0..4).map(|_| rng.random::<f64>()).collect()))).collect();
    let front = pareto_set(&history, ReferencePoint(vec![0.0; 4])).unwrap();
    c.bench_function("hypervolume_exact k=4 n=50", |b| b.iter(|| hypervolume_exact(black_box(&front)).unwrap()));
}

fn gp_fit(c: &mut Criterion) {
    let (xs, ys) = training_set(50, 2);
    let targets: Vec<f64> = ys.iter().map(|y| y[0]).collect();
    c.bench_function("gp fit n=50 d=11", |b| {
        b.iter(|| GpModel::fit(black_box(&xs), black_box(&targets), &mut ChaCha8Rng::seed_from_u64(3)).unwrap())
    });
}

fn acquisition(c: &mut Criterion) {
    let (xs, ys) = training_set(40, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let models: Vec<GpModel> =
        (0..4).map(|j| GpModel::fit(&xs, &ys.iter().map(|y| y[j]).collect::<Vec<_>>(), &mut rng).unwrap()).collect();
    let observed: Vec<ObjectiveVector> = ys.into_iter().map(ObjectiveVector).collect();
    let ctx =
        AcquisitionContext::new(models, xs, &observed, &ReferencePoint(vec![-3.0; 4]), 128, Variant::Noisy, 6).unwrap();
    let x = vec![0.5; ctx.dim()];
    c.bench_function("nehvi score n=40 mc=128", |b| b.iter(|| ctx.score(black_box(&x)).unwrap()));
}

fn sobol(c: &mut Criterion) {
    c.bench_function("sobol 1024 points d=11", |b| {
        b.iter(|| SobolStream::new(11, 7).unwrap().take_points(black_box(1024)))
    });
}

criterion_group!(benches, hypervolume, gp_fit, acquisition, sobol);
criterion_main!(benches);
