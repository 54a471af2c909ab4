//! Post-hoc analyses of a trained run: the most confident misclassifications
//! and target-sensitivity probes over templated statements.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Label, Sample, SampleSet};
use crate::embedding::{instruction_digest_hex, RoleStores};
use crate::error::{Error, Result};
use crate::io::sha256_hex;
use crate::parallel::Exec;
use crate::train::{check_store_compat, TrainedRun};

pub const DEFAULT_ERROR_K: usize = 20;
pub const DEFAULT_TEMPLATE: &str = "{target} are stupid";
pub const DEFAULT_TARGETS: [&str; 6] = ["Black people", "White people", "Jews", "Muslims", "Gay", "They"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorDirection {
    /// Hate predicted as not hate (false negatives).
    HateAsNotHate,
    /// Not hate predicted as hate (false positives).
    NotHateAsHate,
}

impl ErrorDirection {
    pub fn true_label(self) -> Label {
        match self {
            ErrorDirection::HateAsNotHate => Label::Hate,
            ErrorDirection::NotHateAsHate => Label::NotHate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub sample_id: String,
    pub text: String,
    pub true_label: Label,
    pub predicted_label: Label,
    /// Probability of the (wrong) predicted class.
    pub predicted_probability: f64,
}

/// Keeps misclassifications in `direction`, ordered by predicted-class
/// probability descending then id ascending, truncated to `k`.
pub fn rank_errors(
    scored: impl IntoIterator<Item = (Sample, [f64; 2])>,
    direction: ErrorDirection,
    k: usize,
) -> Result<Vec<ErrorRecord>> {
    if k == 0 {
        return Err(Error::Contract("k must be at least 1".into()));
    }
    let truth = direction.true_label();
    let mut errors: Vec<ErrorRecord> = scored
        .into_iter()
        .filter_map(|(s, p)| {
            let predicted = if p[1] > p[0] { Label::Hate } else { Label::NotHate };
            (s.label == truth && predicted != truth).then(|| ErrorRecord {
                sample_id: s.id,
                text: s.text,
                true_label: truth,
                predicted_label: predicted,
                predicted_probability: p[predicted.index()],
            })
        })
        .collect();
    errors.sort_by(|a, b| {
        b.predicted_probability
            .total_cmp(&a.predicted_probability)
            .then_with(|| a.sample_id.cmp(&b.sample_id))
    });
    errors.truncate(k);
    Ok(errors)
}

/// Scores `ids` with the run's checkpoint and returns the top-`k` confident
/// errors in `direction`.
pub fn confident_errors(
    run: &TrainedRun,
    samples: &SampleSet,
    ids: &[String],
    stores: &RoleStores,
    direction: ErrorDirection,
    k: usize,
    exec: Exec,
) -> Result<Vec<ErrorRecord>> {
    let inputs = stores.bundles(ids, run.spec().kind.roles())?;
    let probs = run.model.predict_proba_batch(&inputs, exec)?;
    let chosen = ids
        .iter()
        .map(|id| {
            samples
                .get(id)
                .cloned()
                .ok_or_else(|| Error::Validation(format!("id {id:?} is not in the sample set")))
        })
        .collect::<Result<Vec<_>>>()?;
    rank_errors(chosen.into_iter().zip(probs), direction, k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub target: String,
    pub text: String,
    pub sample_id: String,
    pub hate_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasProbeResult {
    pub template: String,
    /// Instruction digest of the probe embeddings, equal to the run's.
    pub instruction_sha256: String,
    pub rows: Vec<ProbeRow>,
}

/// Stable id of a probe statement: `probe-` plus 16 hex digits of its SHA-256.
pub fn probe_id(text: &str) -> String {
    format!("probe-{}", &sha256_hex(text.as_bytes())[..16])
}

/// Instantiates `template` once per target, in order.
pub fn probe_statements(template: &str, targets: &[String]) -> Result<Vec<(String, String)>> {
    if !template.contains("{target}") {
        return Err(Error::Config(format!("probe template {template:?} has no {{target}} slot")));
    }
    if targets.is_empty() {
        return Err(Error::Config("no probe targets given".into()));
    }
    Ok(targets
        .iter()
        .map(|t| (t.clone(), template.replace("{target}", t)))
        .collect())
}

/// Probe statements as a sample set, for export to the embedding extractor.
/// Labels are placeholders; probes are never scored against them.
pub fn probe_samples(template: &str, targets: &[String]) -> Result<SampleSet> {
    let mut seen = std::collections::HashSet::new();
    let samples = probe_statements(template, targets)?
        .into_iter()
        .filter(|(_, text)| seen.insert(text.clone()))
        .map(|(_, text)| Sample {
            id: probe_id(&text),
            text,
            label: Label::NotHate,
            dataset: Dataset::Probe,
            split: None,
        })
        .collect();
    SampleSet::new(Dataset::Probe, samples)
}

/// Hate probability of each instantiated statement. Missing probe embeddings
/// are reported together with their texts.
pub fn bias_probe(
    run: &TrainedRun,
    template: &str,
    targets: &[String],
    probe_stores: &RoleStores,
    exec: Exec,
) -> Result<BiasProbeResult> {
    check_store_compat(run, probe_stores)?;
    let statements = probe_statements(template, targets)?;
    let ids: Vec<String> = statements.iter().map(|(_, text)| probe_id(text)).collect();
    let missing: Vec<String> = statements
        .iter()
        .zip(&ids)
        .filter(|(_, id)| !probe_stores.tweet.contains(id))
        .map(|((_, text), id)| format!("{id} ({text:?})"))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Lookup { ids: missing });
    }
    let inputs = probe_stores.bundles(&ids, run.spec().kind.roles())?;
    let probs = run.model.predict_proba_batch(&inputs, exec)?;
    Ok(BiasProbeResult {
        template: template.to_string(),
        instruction_sha256: run
            .provenance
            .stores
            .values()
            .next()
            .map_or_else(instruction_digest_hex, |m| m.instruction_sha256.clone()),
        rows: statements
            .into_iter()
            .zip(ids)
            .zip(probs)
            .map(|(((target, text), sample_id), p)| ProbeRow {
                target,
                text,
                sample_id,
                hate_probability: p[1],
            })
            .collect(),
    })
}

/// Two-column plain-text table of probe results.
pub fn format_probe_table(result: &BiasProbeResult) -> String {
    let width = result.rows.iter().map(|r| r.text.len()).max().unwrap_or(0).max(9);
    let mut out = format!("{:<width$}  {}\n", "statement", "P(hate)");
    for r in &result.rows {
        out.push_str(&format!("{:<width$}  {:.4}\n", r.text, r.hate_probability));
    }
    out
}
