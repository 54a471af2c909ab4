use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{compute_metrics, Metrics};
use crate::dataset::{Dataset, Label, SampleSet, Split, SplitAssignment};
use crate::embedding::{FeatureBundle, Role, RoleStores, StoreMeta};
use crate::error::{Error, Result};
use crate::io::{read_json, write_bytes_atomic, write_json_atomic};
use crate::kernel::{adamw_step, params_from_blob, params_to_blob, LinearSchedule, OptimizerState, TrainHyper};
use crate::parallel::Exec;
use crate::zoo::{build_model, Model, ModelSpec};

/// Ids, inputs and labels of one split, aligned by position.
#[derive(Debug, Clone, Default)]
pub struct LabeledSet {
    pub ids: Vec<String>,
    pub inputs: Vec<FeatureBundle>,
    pub labels: Vec<Label>,
}

impl LabeledSet {
    /// Resolves `ids` against the sample labels and the role stores.
    pub fn resolve(ids: &[String], samples: &SampleSet, stores: &RoleStores, roles: &[Role]) -> Result<Self> {
        let labels = samples.label_map();
        let labels = ids
            .iter()
            .map(|id| {
                labels
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| Error::Validation(format!("split id {id:?} is not in the sample set")))
            })
            .collect::<Result<_>>()?;
        Ok(LabeledSet {
            ids: ids.to_vec(),
            inputs: stores.bundles(ids, roles)?,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation: Metrics,
}

/// What a run was trained on.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub stores: BTreeMap<Role, StoreMeta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<Dataset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples_sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub splits_sha256: Option<String>,
}

/// A finished run holding the parameters of its best validation epoch.
#[derive(Debug, Clone)]
pub struct TrainedRun {
    pub model: Model,
    pub hyper: TrainHyper,
    pub seed: u64,
    /// 0-based epoch of the retained checkpoint.
    pub best_epoch: usize,
    /// Optimizer steps taken when the checkpoint was retained.
    pub best_step: usize,
    pub history: Vec<EpochRecord>,
    pub provenance: Provenance,
}

impl TrainedRun {
    pub fn spec(&self) -> &ModelSpec {
        self.model.spec()
    }

    pub fn best_validation(&self) -> Option<&Metrics> {
        self.history.get(self.best_epoch).map(|r| &r.validation)
    }
}

// Independent ChaCha streams for data order and dropout under one seed.
const SHUFFLE_STREAM: u64 = 1;
const DROPOUT_STREAM: u64 = 2;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}

/// Trains on a resolved split pair. Deterministic in every argument; `exec`
/// only changes speed.
pub fn train_on(
    spec: &ModelSpec,
    train: &LabeledSet,
    validation: &LabeledSet,
    hyper: &TrainHyper,
    seed: u64,
    exec: Exec,
) -> Result<TrainedRun> {
    hyper.validate()?;
    if train.is_empty() || validation.is_empty() {
        return Err(Error::Contract("train and validation splits must be nonempty".into()));
    }
    let mut spec = spec.clone();
    spec.dropout = hyper.dropout;
    let mut model = build_model(&spec, seed)?;
    for b in train.inputs.iter().chain(&validation.inputs) {
        model.check_input(b)?;
    }
    let steps_per_epoch = train.len().div_ceil(hyper.batch_size);
    let schedule = LinearSchedule {
        base_rate: hyper.learning_rate,
        total_steps: hyper.epochs * steps_per_epoch,
        warmup_fraction: hyper.warmup_fraction,
    };
    let mut opt = OptimizerState::new(model.params());
    let mut shuffle_rng = stream(seed, SHUFFLE_STREAM);
    let mut dropout_rng = stream(seed, DROPOUT_STREAM);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(hyper.epochs);
    let mut best: Option<(f64, usize, usize, Vec<crate::kernel::Parameter>)> = None;
    let mut step = 0;
    for epoch in 0..hyper.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(hyper.batch_size) {
            let items: Vec<_> = batch.iter().map(|&i| (&train.inputs[i], train.labels[i])).collect();
            let seeds: Vec<u64> = batch.iter().map(|_| dropout_rng.random()).collect();
            let (loss, grads) = model
                .batch_loss_and_grads(&items, Some(&seeds), hyper.class_weights, exec)
                .map_err(|e| match e {
                    Error::Numerical(m) => Error::Numerical(format!("step {step}: {m} (batch ids {:?})", batch_ids(train, batch))),
                    other => other,
                })?;
            model.params_mut().set_grads(&grads);
            adamw_step(model.params_mut(), &mut opt, hyper, schedule.lr_at(step)?)
                .map_err(|e| Error::Numerical(format!("step {step}: {e}")))?;
            loss_sum += loss * batch.len() as f64;
            step += 1;
        }
        let validation_metrics = evaluate_set(&model, validation, exec)?;
        let f1 = validation_metrics.f1_weighted;
        log::debug!("seed {seed} epoch {epoch}: weighted F1 {f1:.4}");
        if best.as_ref().is_none_or(|(b, ..)| f1 > *b) {
            best = Some((f1, epoch, step, model.params().as_slice().to_vec()));
        }
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            validation: validation_metrics,
        });
    }
    let (_, best_epoch, best_step, params) = best.ok_or_else(|| Error::Contract("epochs must be positive".into()))?;
    model.params_mut().load_values(&params)?;
    for p in model.params_mut().iter_mut() {
        p.grad.iter_mut().for_each(|g| *g = 0.0);
    }
    Ok(TrainedRun {
        model,
        hyper: hyper.clone(),
        seed,
        best_epoch,
        best_step,
        history,
        provenance: Provenance::default(),
    })
}

fn batch_ids<'a>(set: &'a LabeledSet, batch: &[usize]) -> Vec<&'a str> {
    batch.iter().map(|&i| set.ids[i].as_str()).collect()
}

/// Trains on the train split and selects by the validation split.
pub fn train(
    spec: &ModelSpec,
    samples: &SampleSet,
    splits: &SplitAssignment,
    stores: &RoleStores,
    hyper: &TrainHyper,
    seed: u64,
    exec: Exec,
) -> Result<TrainedRun> {
    splits.check_against(samples)?;
    let roles = spec.kind.roles();
    let tr = LabeledSet::resolve(&splits.train, samples, stores, roles)?;
    let va = LabeledSet::resolve(&splits.validation, samples, stores, roles)?;
    let mut run = train_on(spec, &tr, &va, hyper, seed, exec)?;
    run.provenance.stores = stores.meta().into_iter().filter(|(r, _)| roles.contains(r)).collect();
    run.provenance.dataset = Some(samples.source());
    Ok(run)
}

pub fn evaluate_set(model: &Model, set: &LabeledSet, exec: Exec) -> Result<Metrics> {
    let preds = model.predict_batch(&set.inputs, exec)?;
    compute_metrics(&preds, &set.labels)
}

/// Scores the retained checkpoint on `ids`.
pub fn evaluate(run: &TrainedRun, ids: &[String], samples: &SampleSet, stores: &RoleStores, exec: Exec) -> Result<Metrics> {
    let set = LabeledSet::resolve(ids, samples, stores, run.spec().kind.roles())?;
    evaluate_set(&run.model, &set, exec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossEvaluation {
    pub dataset: Dataset,
    /// `"full"` or the split name used.
    pub scope: String,
    pub samples: usize,
    pub metrics: Metrics,
}

/// Requires every store the run used to match the foreign store's provenance.
pub fn check_store_compat(run: &TrainedRun, foreign: &RoleStores) -> Result<()> {
    for (role, meta) in &run.provenance.stores {
        let Some(other) = foreign.get(*role) else {
            return Err(Error::MissingFeature(role.name()));
        };
        let other = other.meta();
        if other != *meta {
            return Err(Error::Protocol(format!(
                "{} store mismatch: run used {}/{:?}/dim {}/{}, foreign store is {}/{:?}/dim {}/{}",
                role.name(),
                meta.model_id,
                meta.pooling,
                meta.dim,
                meta.instruction_sha256,
                other.model_id,
                other.pooling,
                other.dim,
                other.instruction_sha256
            )));
        }
    }
    Ok(())
}

/// Scores the unmodified checkpoint on another corpus, either whole or one
/// of its splits.
pub fn cross_evaluate(
    run: &TrainedRun,
    foreign: &SampleSet,
    foreign_stores: &RoleStores,
    split: Option<(&SplitAssignment, Split)>,
    exec: Exec,
) -> Result<CrossEvaluation> {
    check_store_compat(run, foreign_stores)?;
    let (ids, scope) = match split {
        Some((s, which)) => {
            s.check_against(foreign)?;
            (s.ids(which).to_vec(), format!("{which:?}").to_lowercase())
        }
        None => (foreign.ids(), "full".to_string()),
    };
    let metrics = evaluate(run, &ids, foreign, foreign_stores, exec)?;
    Ok(CrossEvaluation {
        dataset: foreign.source(),
        scope,
        samples: ids.len(),
        metrics,
    })
}

pub const MANIFEST_FILE: &str = "checkpoint.json";
pub const PARAMS_FILE: &str = "params.bin";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    spec: ModelSpec,
    hyper: TrainHyper,
    seed: u64,
    step: usize,
    epoch: usize,
    val_weighted_f1: f64,
    params_sha256: String,
    provenance: Provenance,
    history: Vec<EpochRecord>,
}

/// Writes `checkpoint.json` and `params.bin` into `dir`.
pub fn save_checkpoint(run: &TrainedRun, dir: &Path) -> Result<()> {
    let blob = params_to_blob(run.model.params().as_slice())?;
    let manifest = Manifest {
        spec: run.spec().clone(),
        hyper: run.hyper.clone(),
        seed: run.seed,
        step: run.best_step,
        epoch: run.best_epoch,
        val_weighted_f1: run.best_validation().map_or(f64::NAN, |m| m.f1_weighted),
        params_sha256: crate::io::sha256_hex(&blob),
        provenance: run.provenance.clone(),
        history: run.history.clone(),
    };
    write_bytes_atomic(&dir.join(PARAMS_FILE), &blob)?;
    write_json_atomic(&dir.join(MANIFEST_FILE), &manifest)
}

pub fn load_checkpoint(dir: &Path) -> Result<TrainedRun> {
    let manifest: Manifest = read_json(&dir.join(MANIFEST_FILE))?;
    let path = dir.join(PARAMS_FILE);
    let blob = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
    if crate::io::sha256_hex(&blob) != manifest.params_sha256 {
        return Err(Error::Format {
            path: path.display().to_string(),
            msg: "parameter blob does not match the manifest digest".into(),
        });
    }
    let mut model = build_model(&manifest.spec, manifest.seed)?;
    model.params_mut().load_values(&params_from_blob(&blob)?)?;
    Ok(TrainedRun {
        model,
        hyper: manifest.hyper,
        seed: manifest.seed,
        best_epoch: manifest.epoch,
        best_step: manifest.step,
        history: manifest.history,
        provenance: manifest.provenance,
    })
}
