//! JSON run configuration. Command-line flags override file values, and the
//! fully resolved copy is written next to every output.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, IngestOptions, SplitRatios};
use crate::embedding::{Role, RoleStores};
use crate::error::{Error, Result};
use crate::io::read_json;
use crate::kernel::TrainHyper;
use crate::zoo::{ModelKind, ModelSpec};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "IHS_OUTPUT_DIR";
pub const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
pub const DEFAULT_SPLIT_SEED: u64 = 42;

fn default_profile() -> String {
    "finetune-head".into()
}
fn default_seeds() -> Vec<u64> {
    DEFAULT_SEEDS.to_vec()
}
fn default_split_seed() -> u64 {
    DEFAULT_SPLIT_SEED
}

/// How to turn a raw corpus file into the canonical samples and split files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestConfig {
    pub dataset: Dataset,
    pub input: PathBuf,
    #[serde(default)]
    pub options: IngestOptions,
    /// Defaults to the corpus' usual ratios.
    #[serde(default)]
    pub ratios: Option<SplitRatios>,
    #[serde(default = "default_split_seed")]
    pub split_seed: u64,
    #[serde(default)]
    pub stratify: bool,
    /// Keep split columns present in the source instead of re-splitting.
    #[serde(default)]
    pub use_source_splits: bool,
}

/// Per-field overrides on top of a named hyperparameter profile.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperOverrides {
    pub learning_rate: Option<f64>,
    pub weight_decay: Option<f64>,
    pub warmup_fraction: Option<f64>,
    pub dropout: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub epsilon: Option<f64>,
    pub class_weights: Option<[f64; 2]>,
}

impl HyperOverrides {
    pub fn apply(&self, base: TrainHyper) -> TrainHyper {
        TrainHyper {
            learning_rate: self.learning_rate.unwrap_or(base.learning_rate),
            weight_decay: self.weight_decay.unwrap_or(base.weight_decay),
            warmup_fraction: self.warmup_fraction.unwrap_or(base.warmup_fraction),
            dropout: self.dropout.unwrap_or(base.dropout),
            batch_size: self.batch_size.unwrap_or(base.batch_size),
            epochs: self.epochs.unwrap_or(base.epochs),
            beta1: self.beta1.unwrap_or(base.beta1),
            beta2: self.beta2.unwrap_or(base.beta2),
            epsilon: self.epsilon.unwrap_or(base.epsilon),
            class_weights: self.class_weights.or(base.class_weights),
        }
    }

    /// Layers `other` on top of `self`.
    pub fn merge(&mut self, other: &HyperOverrides) {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(learning_rate, weight_decay, warmup_fraction, dropout, batch_size, epochs, beta1, beta2, epsilon, class_weights);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ingest: Option<IngestConfig>,
    /// Canonical samples JSONL.
    pub samples: PathBuf,
    /// Split assignment JSON.
    pub splits: PathBuf,
    /// Embedding caches by role; `tweet` is required.
    pub stores: BTreeMap<Role, PathBuf>,
    pub model: ModelSpec,
    #[serde(default = "default_profile")]
    pub profile: String,
    #[serde(default)]
    pub hyper: HyperOverrides,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Minimal config for the given inputs, with defaults everywhere else.
    pub fn new(samples: PathBuf, splits: PathBuf, stores: BTreeMap<Role, PathBuf>, kind: ModelKind) -> Self {
        RunConfig {
            ingest: None,
            samples,
            splits,
            stores,
            model: ModelSpec {
                hidden: 0,
                ..ModelSpec::new(kind, 0, 0)
            },
            profile: default_profile(),
            hyper: HyperOverrides::default(),
            seeds: default_seeds(),
            output_dir: None,
        }
    }

    /// Reads a config; relative paths inside it are taken relative to the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: RunConfig = read_json(path)?;
        if let Some(base) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            cfg.rebase(base);
        }
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.samples);
        fix(&mut self.splits);
        self.stores.values_mut().for_each(fix);
        if let Some(out) = self.output_dir.as_mut() {
            fix(out);
        }
        if let Some(ing) = self.ingest.as_mut() {
            fix(&mut ing.input);
        }
    }

    pub fn train_hyper(&self) -> Result<TrainHyper> {
        let h = self.hyper.apply(TrainHyper::profile(&self.profile)?);
        h.validate()?;
        Ok(h)
    }

    /// Output directory: config value, then the environment, then `runs`.
    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("runs"))
    }

    /// Fills model widths from the stores and checks the result.
    pub fn resolve_model(&mut self, stores: &RoleStores) -> Result<()> {
        let spec = &mut self.model;
        let tweet_dim = stores.tweet.dim();
        if spec.d_tweet == 0 {
            spec.d_tweet = tweet_dim;
        }
        if spec.d_tweet != tweet_dim {
            return Err(Error::Config(format!(
                "model d_tweet {} does not match the tweet store dimension {tweet_dim}",
                spec.d_tweet
            )));
        }
        if spec.kind != ModelKind::EmbedHead {
            let ctx = stores.context.as_ref().ok_or(Error::MissingFeature("context"))?.dim();
            if spec.d_context == 0 {
                spec.d_context = ctx;
            }
            if spec.d_context != ctx {
                return Err(Error::Config(format!(
                    "model d_context {} does not match the context store dimension {ctx}",
                    spec.d_context
                )));
            }
        }
        *spec = spec.clone().resolved();
        spec.validate()
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        if !self.stores.contains_key(&Role::Tweet) {
            return Err(Error::Config("a tweet embedding store is required".into()));
        }
        for role in self.model.kind.roles() {
            if !self.stores.contains_key(role) {
                return Err(Error::Config(format!("{:?} needs a {} store", self.model.kind, role.name())));
            }
        }
        self.train_hyper().map(|_| ())
    }
}
