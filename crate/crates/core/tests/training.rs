use ihs_core::dataset::Split;
use ihs_core::embedding::{EmbeddingStore, Pooling, RoleStores};
use ihs_core::kernel::TrainHyper;
use ihs_core::parallel::Exec;
use ihs_core::synthetic::{two_gaussians, SyntheticSpec, SyntheticTask};
use ihs_core::train::{
    cross_evaluate, evaluate, load_checkpoint, save_checkpoint, train, LabeledSet, TrainedRun,
};
use ihs_core::zoo::{ModelKind, ModelSpec};
use ihs_core::Error;

fn task(fusion: bool) -> SyntheticTask {
    let mut s = SyntheticSpec::new(8, 2.0, 120, 40, 40);
    s.fusion = fusion;
    s.seed = 3;
    two_gaussians(&s).unwrap()
}

fn quick_hyper() -> TrainHyper {
    TrainHyper {
        learning_rate: 5e-3,
        batch_size: 16,
        epochs: 5,
        ..TrainHyper::linear_probe()
    }
}

fn run(t: &SyntheticTask, kind: ModelKind, exec: Exec) -> TrainedRun {
    let spec = ModelSpec::new(kind, 8, 8);
    train(&spec, &t.samples, &t.splits, &t.stores, &quick_hyper(), 11, exec).unwrap()
}

#[test]
fn history_and_best_epoch_selection() {
    let t = task(false);
    let r = run(&t, ModelKind::EmbedHead, Exec::Parallel);
    assert_eq!(r.history.len(), 5);
    let f1s: Vec<f64> = r.history.iter().map(|h| h.validation.f1_weighted).collect();
    let max = f1s.iter().copied().fold(f64::MIN, f64::max);
    let first_max = f1s.iter().position(|&v| v == max).unwrap();
    assert_eq!(r.best_epoch, first_max);
    assert_eq!(r.best_step, (first_max + 1) * 120usize.div_ceil(16));
}

#[test]
fn training_is_deterministic_across_exec_modes() {
    let t = task(true);
    for kind in ModelKind::ALL {
        let a = run(&t, kind, Exec::Parallel);
        let b = run(&t, kind, Exec::Sequential);
        assert_eq!(a.history, b.history, "{kind:?}");
        assert_eq!(a.model.params().as_slice(), b.model.params().as_slice(), "{kind:?}");
    }
}

#[test]
fn evaluation_reproduces_selection_and_ignores_order() {
    let t = task(true);
    let r = run(&t, ModelKind::MoEFusion, Exec::Parallel);
    let val = evaluate(&r, &t.splits.validation, &t.samples, &t.stores, Exec::Parallel).unwrap();
    assert_eq!(&val, r.best_validation().unwrap());
    let mut reversed = t.splits.test.clone();
    reversed.reverse();
    let a = evaluate(&r, &t.splits.test, &t.samples, &t.stores, Exec::Sequential).unwrap();
    let b = evaluate(&r, &reversed, &t.samples, &t.stores, Exec::Parallel).unwrap();
    assert_eq!(a, b);
}

#[test]
fn cross_evaluation_guard_and_degenerate_case() {
    let t = task(false);
    let r = run(&t, ModelKind::EmbedHead, Exec::Parallel);
    let own = cross_evaluate(&r, &t.samples, &t.stores, Some((&t.splits, Split::Test)), Exec::Parallel).unwrap();
    let direct = evaluate(&r, &t.splits.test, &t.samples, &t.stores, Exec::Parallel).unwrap();
    assert_eq!(own.metrics, direct);
    assert_eq!(own.scope, "test");
    let full = cross_evaluate(&r, &t.samples, &t.stores, None, Exec::Parallel).unwrap();
    assert_eq!((full.scope.as_str(), full.samples), ("full", 200));

    let mut other = EmbeddingStore::new("synthetic-gaussian", Pooling::MeanPassthrough, 8, [7u8; 32]).unwrap();
    for (id, v) in t.stores.tweet.iter() {
        other.insert(id, v.to_vec()).unwrap();
    }
    let err = cross_evaluate(&r, &t.samples, &RoleStores::tweet_only(other), None, Exec::Parallel).unwrap_err();
    assert!(matches!(err, Error::Protocol(_)), "{err}");
}

#[test]
fn missing_embeddings_name_the_sample() {
    let t = task(false);
    let mut partial = EmbeddingStore::new("synthetic-gaussian", Pooling::MeanPassthrough, 8, *t.stores.tweet.instruction_digest()).unwrap();
    for (id, v) in t.stores.tweet.iter().filter(|(id, _)| *id != "syn-000005") {
        partial.insert(id, v.to_vec()).unwrap();
    }
    let spec = ModelSpec::new(ModelKind::EmbedHead, 8, 0);
    let err = train(&spec, &t.samples, &t.splits, &RoleStores::tweet_only(partial), &quick_hyper(), 0, Exec::Parallel)
        .unwrap_err();
    match err {
        Error::Lookup { ids } => assert_eq!(ids, vec!["tweet:syn-000005".to_string()]),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn fusion_models_require_their_stores() {
    let t = task(false);
    let spec = ModelSpec::new(ModelKind::ConcatFusion, 8, 8);
    let err = train(&spec, &t.samples, &t.splits, &t.stores, &quick_hyper(), 0, Exec::Parallel).unwrap_err();
    assert!(matches!(err, Error::MissingFeature("context")));
}

#[test]
fn checkpoint_roundtrip() {
    let t = task(true);
    let r = run(&t, ModelKind::SharedQueryFusion, Exec::Parallel);
    let dir = tempfile::tempdir().unwrap();
    save_checkpoint(&r, dir.path()).unwrap();
    let back = load_checkpoint(dir.path()).unwrap();
    assert_eq!(back.model.params().as_slice(), r.model.params().as_slice());
    assert_eq!(back.history, r.history);
    assert_eq!(back.provenance, r.provenance);
    let a = evaluate(&r, &t.splits.test, &t.samples, &t.stores, Exec::Parallel).unwrap();
    let b = evaluate(&back, &t.splits.test, &t.samples, &t.stores, Exec::Parallel).unwrap();
    assert_eq!(a, b);

    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("checkpoint.json")).unwrap()).unwrap();
    for key in ["spec", "hyper", "seed", "step", "val_weighted_f1", "provenance"] {
        assert!(manifest.get(key).is_some(), "{key}");
    }
    let blob = dir.path().join("params.bin");
    let mut bytes = std::fs::read(&blob).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 1;
    std::fs::write(&blob, bytes).unwrap();
    assert!(load_checkpoint(dir.path()).is_err());
}

#[test]
fn class_weights_change_the_objective() {
    let t = task(false);
    let spec = ModelSpec::new(ModelKind::EmbedHead, 8, 0);
    let tr = LabeledSet::resolve(&t.splits.train, &t.samples, &t.stores, spec.kind.roles()).unwrap();
    let model = ihs_core::zoo::build_model(&spec, 0).unwrap();
    let items: Vec<_> = tr.inputs.iter().zip(&tr.labels).map(|(b, l)| (b, *l)).collect();
    let plain = model.batch_loss(&items, None).unwrap();
    let same = model.batch_loss(&items, Some([2.0, 2.0])).unwrap();
    let skew = model.batch_loss(&items, Some([1.0, 5.0])).unwrap();
    assert!((plain - same).abs() < 1e-12);
    assert_ne!(plain, skew);
}
