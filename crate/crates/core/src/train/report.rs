use std::fmt::Write as _;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::metrics::Metrics;
use super::run::Provenance;
use crate::error::{Error, Result};

/// Field-wise mean and sample standard deviation over per-seed metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub seeds: Vec<u64>,
    pub per_seed: Vec<Metrics>,
    pub mean: IndexMap<String, f64>,
    pub std: IndexMap<String, f64>,
}

/// Mean and sample (N−1) standard deviation of every metric field; the
/// standard deviation of a single run is 0.
pub fn aggregate_runs(metrics: &[Metrics], seeds: &[u64]) -> Result<Aggregate> {
    if metrics.is_empty() {
        return Err(Error::Contract("cannot aggregate zero runs".into()));
    }
    if metrics.len() != seeds.len() {
        return Err(Error::Contract(format!("{} metrics for {} seeds", metrics.len(), seeds.len())));
    }
    let fields: Vec<IndexMap<&str, f64>> = metrics.iter().map(Metrics::fields).collect();
    let n = metrics.len() as f64;
    let mut mean = IndexMap::new();
    let mut std = IndexMap::new();
    for name in fields[0].keys() {
        let values: Vec<f64> = fields.iter().map(|f| f[name]).collect();
        let m = values.iter().sum::<f64>() / n;
        let s = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        mean.insert(name.to_string(), m);
        std.insert(name.to_string(), s);
    }
    Ok(Aggregate {
        seeds: seeds.to_vec(),
        per_seed: metrics.to_vec(),
        mean,
        std,
    })
}

/// Serialized result of a multi-seed run. Contains no timestamps, so equal
/// inputs give byte-equal JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub per_seed: Vec<Metrics>,
    pub mean: IndexMap<String, f64>,
    pub std: IndexMap<String, f64>,
    pub provenance: Provenance,
}

impl RunReport {
    pub fn new(config: serde_json::Value, aggregate: Aggregate, provenance: Provenance) -> Self {
        RunReport {
            config,
            seeds: aggregate.seeds,
            per_seed: aggregate.per_seed,
            mean: aggregate.mean,
            std: aggregate.std,
            provenance,
        }
    }
}

fn cell(mean: &IndexMap<String, f64>, std: &IndexMap<String, f64>, key: &str) -> String {
    format!("{:.2} ({:.2})", 100.0 * mean[key], 100.0 * std[key])
}

/// Plain-text table: one precision/recall/F1 row per class followed by the
/// overall accuracy and F1 averages, all as `mean (std)` percentages.
pub fn format_table(title: &str, mean: &IndexMap<String, f64>, std: &IndexMap<String, f64>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{title}");
    let _ = writeln!(out, "{:<10} {:>15} {:>15} {:>15}", "class", "precision", "recall", "f1");
    for class in ["not_hate", "hate"] {
        let _ = writeln!(
            out,
            "{:<10} {:>15} {:>15} {:>15}",
            class,
            cell(mean, std, &format!("{class}.precision")),
            cell(mean, std, &format!("{class}.recall")),
            cell(mean, std, &format!("{class}.f1")),
        );
    }
    let _ = writeln!(out, "{:<10} {:>15} {:>15} {:>15}", "overall", "accuracy", "weighted f1", "macro f1");
    let _ = writeln!(
        out,
        "{:<10} {:>15} {:>15} {:>15}",
        "",
        cell(mean, std, "accuracy"),
        cell(mean, std, "f1_weighted"),
        cell(mean, std, "f1_macro"),
    );
    out
}
