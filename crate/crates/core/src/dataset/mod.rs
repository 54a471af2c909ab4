//! Canonical samples for the four implicit-hate corpora, their label rules,
//! ingestion from the distributed CSV/TSV files and deterministic splits.

mod ingest;
mod jsonl;
mod labels;
mod split;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub use ingest::{ingest, ingest_reader, ColumnMap, IngestOptions};
pub use jsonl::{read_samples_jsonl, samples_to_jsonl, write_samples_jsonl};
pub use labels::{label_sbic, label_toxigen, SBIC_THRESHOLD, TOXIGEN_THRESHOLD};
pub use split::{make_splits, read_splits, splits_from_samples, write_splits, SplitAssignment, SplitRatios};

/// Binary label; `Hate` is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    NotHate = 0,
    Hate = 1,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::NotHate, Label::Hate];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        match i {
            0 => Some(Label::NotHate),
            1 => Some(Label::Hate),
            _ => None,
        }
    }

    pub fn flip(self) -> Label {
        match self {
            Label::NotHate => Label::Hate,
            Label::Hate => Label::NotHate,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::NotHate => "not_hate",
            Label::Hate => "hate",
        })
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u8(*self as u8)
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = u8::deserialize(d)?;
        Label::from_index(v as usize)
            .ok_or_else(|| serde::de::Error::custom(format!("label must be 0 or 1, got {v}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Dataset {
    #[serde(rename = "ihc")]
    Ihc,
    #[serde(rename = "sbic")]
    Sbic,
    #[serde(rename = "dynahate")]
    DynaHate,
    #[serde(rename = "toxigen")]
    ToxiGen,
    /// Templated probe statements exported for embedding; never ingested.
    #[serde(rename = "probe")]
    Probe,
    /// Generated Gaussian clusters for tests and benchmarks.
    #[serde(rename = "synthetic")]
    Synthetic,
}

impl Dataset {
    pub fn name(self) -> &'static str {
        match self {
            Dataset::Ihc => "ihc",
            Dataset::Sbic => "sbic",
            Dataset::DynaHate => "dynahate",
            Dataset::ToxiGen => "toxigen",
            Dataset::Probe => "probe",
            Dataset::Synthetic => "synthetic",
        }
    }

    /// Published (total, hate, not hate) counts of the label distribution.
    pub fn reference_counts(self) -> Option<(usize, usize, usize)> {
        match self {
            Dataset::Ihc => Some((18_666, 5_460, 13_206)),
            Dataset::DynaHate => Some((41_144, 22_175, 18_969)),
            Dataset::Sbic => Some((44_781, 24_048, 20_733)),
            Dataset::ToxiGen => Some((9_900, 3_774, 6_126)),
            Dataset::Probe | Dataset::Synthetic => None,
        }
    }

    /// Default train/validation/test ratios used for this corpus.
    pub fn default_ratios(self) -> SplitRatios {
        match self {
            Dataset::Ihc | Dataset::DynaHate | Dataset::Synthetic => SplitRatios::new(0.6, 0.2, 0.2),
            Dataset::Sbic => SplitRatios::new(0.8, 0.1, 0.1),
            Dataset::ToxiGen => SplitRatios::new(0.7, 0.1, 0.2),
            Dataset::Probe => SplitRatios::new(0.0, 0.0, 1.0),
        }
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Dataset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ihc" => Ok(Dataset::Ihc),
            "sbic" => Ok(Dataset::Sbic),
            "dynahate" => Ok(Dataset::DynaHate),
            "toxigen" => Ok(Dataset::ToxiGen),
            "probe" => Ok(Dataset::Probe),
            "synthetic" => Ok(Dataset::Synthetic),
            other => Err(Error::Config(format!("unknown dataset `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" | "trn" => Ok(Split::Train),
            "validation" | "val" | "dev" | "valid" => Ok(Split::Validation),
            "test" | "tst" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub text: String,
    pub label: Label,
    pub dataset: Dataset,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LabelCounts {
    pub not_hate: usize,
    pub hate: usize,
}

impl LabelCounts {
    pub fn total(&self) -> usize {
        self.not_hate + self.hate
    }

    fn bump(&mut self, label: Label) {
        match label {
            Label::NotHate => self.not_hate += 1,
            Label::Hate => self.hate += 1,
        }
    }
}

/// An ordered, validated collection of samples from one corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSet {
    samples: Vec<Sample>,
    source: Dataset,
    counts: LabelCounts,
}

impl SampleSet {
    /// Validates id uniqueness and nonempty text, then tallies labels.
    pub fn new(source: Dataset, samples: Vec<Sample>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(samples.len());
        let mut counts = LabelCounts::default();
        for s in &samples {
            if s.text.trim().is_empty() {
                return Err(Error::Validation(format!("sample {:?} has empty text", s.id)));
            }
            if !seen.insert(s.id.as_str()) {
                return Err(Error::Validation(format!("duplicate sample id {:?}", s.id)));
            }
            counts.bump(s.label);
        }
        Ok(SampleSet {
            samples,
            source,
            counts,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn source(&self) -> Dataset {
        self.source
    }

    pub fn counts(&self) -> LabelCounts {
        self.counts
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.samples.iter().map(|s| s.id.clone()).collect()
    }

    /// Id → label lookup table.
    pub fn label_map(&self) -> BTreeMap<&str, Label> {
        self.samples.iter().map(|s| (s.id.as_str(), s.label)).collect()
    }

    pub fn get(&self, id: &str) -> Option<&Sample> {
        self.samples.iter().find(|s| s.id == id)
    }

    /// Stamps each sample with the split that holds its id.
    pub fn with_splits(mut self, splits: &SplitAssignment) -> Self {
        let map = splits.split_of();
        for s in &mut self.samples {
            s.split = map.get(s.id.as_str()).copied();
        }
        self
    }
}
