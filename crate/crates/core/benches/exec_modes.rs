//! Sequential vs rayon execution of the hot loops. Both modes compute the
//! same bits; only wall time should differ.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use ihs_core::dataset::Split;
use ihs_core::embedding::FeatureBundle;
use ihs_core::kernel::TrainHyper;
use ihs_core::parallel::Exec;
use ihs_core::synthetic::{two_gaussians, SyntheticSpec, SyntheticTask};
use ihs_core::train::{train_on, LabeledSet};
use ihs_core::zoo::{build_model, ModelKind, ModelSpec};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn task(dim: usize, train: usize) -> SyntheticTask {
    let mut spec = SyntheticSpec::new(dim, 3.0, train, 256, 256);
    spec.fusion = true;
    spec.seed = 1;
    two_gaussians(&spec).unwrap()
}

fn split(task: &SyntheticTask, which: Split, kind: ModelKind) -> LabeledSet {
    LabeledSet::resolve(task.splits.ids(which), &task.samples, &task.stores, kind.roles()).unwrap()
}

fn spec(kind: ModelKind, dim: usize) -> ModelSpec {
    let d_ctx = if kind == ModelKind::EmbedHead { 0 } else { dim };
    ModelSpec::new(kind, dim, d_ctx).resolved()
}

fn batch_gradients(c: &mut Criterion) {
    let dim = 128;
    let t = task(dim, 512);
    let mut group = c.benchmark_group("batch_gradients");
    group.sample_size(20);
    for kind in [ModelKind::EmbedHead, ModelKind::MoEFusion, ModelKind::SharedQueryFusion] {
        let set = split(&t, Split::Train, kind);
        let items: Vec<(&FeatureBundle, _)> = set.inputs.iter().zip(set.labels.iter().copied()).collect();
        let seeds: Vec<u64> = (0..items.len() as u64).collect();
        let model = build_model(&spec(kind, dim), 0).unwrap();
        group.throughput(Throughput::Elements(items.len() as u64));
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(format!("{kind:?}"), name), &exec, |b, &exec| {
                b.iter(|| black_box(model.batch_loss_and_grads(&items, Some(&seeds), None, exec).unwrap()))
            });
        }
    }
    group.finish();
}

fn prediction(c: &mut Criterion) {
    let dim = 256;
    let t = task(dim, 4096);
    let set = split(&t, Split::Train, ModelKind::ConcatFusion);
    let model = build_model(&spec(ModelKind::ConcatFusion, dim), 0).unwrap();
    let mut group = c.benchmark_group("predict");
    group.sample_size(20);
    group.throughput(Throughput::Elements(set.inputs.len() as u64));
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new("ConcatFusion", name), &exec, |b, &exec| {
            b.iter(|| black_box(model.predict_batch(&set.inputs, exec).unwrap()))
        });
    }
    group.finish();
}

fn training_epoch(c: &mut Criterion) {
    let dim = 64;
    let t = task(dim, 2048);
    let kind = ModelKind::AdaptiveFusion;
    let train = split(&t, Split::Train, kind);
    let val = split(&t, Split::Validation, kind);
    let hyper = TrainHyper {
        epochs: 1,
        batch_size: 256,
        ..TrainHyper::linear_probe()
    };
    let spec = spec(kind, dim);
    let mut group = c.benchmark_group("train_epoch");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new("AdaptiveFusion", name), &exec, |b, &exec| {
            b.iter(|| black_box(train_on(&spec, &train, &val, &hyper, 0, exec).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, batch_gradients, prediction, training_epoch);
criterion_main!(benches);
