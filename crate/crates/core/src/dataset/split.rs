use std::collections::{HashMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Label, SampleSet, Split};
use crate::error::{Error, Result};
use crate::io::{read_json, write_json_atomic};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl SplitRatios {
    pub const fn new(train: f64, validation: f64, test: f64) -> Self {
        SplitRatios {
            train,
            validation,
            test,
        }
    }

    /// Parses `"60,20,20"` or `"0.6,0.2,0.2"`; percentages are rescaled.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad ratio `{p}` in `{s}`")))
            })
            .collect::<Result<_>>()?;
        let [a, b, c] = parts[..] else {
            return Err(Error::Config(format!("expected three ratios, got `{s}`")));
        };
        let sum = a + b + c;
        let scale = if (sum - 100.0).abs() < 1e-6 { 100.0 } else { 1.0 };
        let r = SplitRatios::new(a / scale, b / scale, c / scale);
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|r| !r.is_finite() || *r <= 0.0) {
            return Err(Error::Config(format!("split ratios must be positive, got {parts:?}")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split ratios sum to {sum}, expected 1")));
        }
        Ok(())
    }

    /// Train and validation sizes are floored; test takes the remainder.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        // The small offset keeps exact products such as 0.6·10 from landing
        // one ulp under the integer.
        let floor = |r: f64| ((r * n as f64) + 1e-9).floor() as usize;
        let train = floor(self.train).min(n);
        let validation = floor(self.validation).min(n - train);
        (train, validation, n - train - validation)
    }
}

/// Three disjoint id lists covering a sample set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub ratios: SplitRatios,
    pub seed: u64,
    #[serde(default)]
    pub stratified: bool,
    /// True when the split came with the source file instead of being drawn.
    #[serde(default)]
    pub author_provided: bool,
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

impl SplitAssignment {
    pub fn ids(&self, split: Split) -> &[String] {
        match split {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
            Split::Test => &self.test,
        }
    }

    pub fn split_of(&self) -> HashMap<&str, Split> {
        let mut m = HashMap::with_capacity(self.train.len() + self.validation.len() + self.test.len());
        for split in [Split::Train, Split::Validation, Split::Test] {
            for id in self.ids(split) {
                m.insert(id.as_str(), split);
            }
        }
        m
    }

    /// Checks pairwise disjointness and that the union equals `set`'s ids.
    pub fn check_against(&self, set: &SampleSet) -> Result<()> {
        let mut seen = HashSet::new();
        for id in self.train.iter().chain(&self.validation).chain(&self.test) {
            if !seen.insert(id.as_str()) {
                return Err(Error::Validation(format!("id {id:?} appears in more than one split")));
            }
        }
        if seen.len() != set.len() || set.samples().iter().any(|s| !seen.contains(s.id.as_str())) {
            return Err(Error::Validation(
                "split ids do not cover the sample set exactly".into(),
            ));
        }
        Ok(())
    }
}

/// Seeded shuffle followed by a contiguous partition.
///
/// With `stratify`, the rule is applied per label and the class blocks are
/// shuffled together within each split.
pub fn make_splits(
    set: &SampleSet,
    ratios: SplitRatios,
    seed: u64,
    stratify: bool,
) -> Result<SplitAssignment> {
    ratios.validate()?;
    if set.is_empty() {
        return Err(Error::Config("cannot split an empty sample set".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut validation, mut test) = (Vec::new(), Vec::new(), Vec::new());
    let groups: Vec<Vec<String>> = if stratify {
        Label::ALL
            .iter()
            .map(|&l| {
                set.samples()
                    .iter()
                    .filter(|s| s.label == l)
                    .map(|s| s.id.clone())
                    .collect()
            })
            .collect()
    } else {
        vec![set.ids()]
    };
    for mut ids in groups {
        ids.shuffle(&mut rng);
        let (a, b, _) = ratios.sizes(ids.len());
        let rest = ids.split_off(a);
        train.extend(ids);
        let (v, t) = rest.split_at(b);
        validation.extend_from_slice(v);
        test.extend_from_slice(t);
    }
    if stratify {
        train.shuffle(&mut rng);
        validation.shuffle(&mut rng);
        test.shuffle(&mut rng);
    }
    Ok(SplitAssignment {
        ratios,
        seed,
        stratified: stratify,
        author_provided: false,
        train,
        validation,
        test,
    })
}

/// Builds the assignment from per-sample split tags (splits shipped with the corpus).
pub fn splits_from_samples(set: &SampleSet) -> Result<SplitAssignment> {
    let (mut train, mut validation, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for s in set.samples() {
        match s.split {
            Some(Split::Train) => train.push(s.id.clone()),
            Some(Split::Validation) => validation.push(s.id.clone()),
            Some(Split::Test) => test.push(s.id.clone()),
            None => {
                return Err(Error::Validation(format!(
                    "sample {:?} carries no split tag",
                    s.id
                )))
            }
        }
    }
    let n = set.len().max(1) as f64;
    Ok(SplitAssignment {
        ratios: SplitRatios::new(
            train.len() as f64 / n,
            validation.len() as f64 / n,
            test.len() as f64 / n,
        ),
        seed: 0,
        stratified: false,
        author_provided: true,
        train,
        validation,
        test,
    })
}

pub fn write_splits(splits: &SplitAssignment, path: &Path) -> Result<()> {
    write_json_atomic(path, splits)
}

pub fn read_splits(path: &Path) -> Result<SplitAssignment> {
    read_json(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Dataset, Sample};
    use proptest::prelude::*;

    fn set_of(n: usize) -> SampleSet {
        let samples = (0..n)
            .map(|i| Sample {
                id: format!("s{i}"),
                text: format!("t{i}"),
                label: if i % 3 == 0 { Label::Hate } else { Label::NotHate },
                dataset: Dataset::Ihc,
                split: None,
            })
            .collect();
        SampleSet::new(Dataset::Ihc, samples).unwrap()
    }

    #[test]
    fn floor_rule_sizes() {
        let r = SplitRatios::new(0.6, 0.2, 0.2);
        assert_eq!(r.sizes(18_666), (11_199, 3_733, 3_734));
        assert_eq!(r.sizes(10), (6, 2, 2));
        assert_eq!(SplitRatios::new(0.8, 0.1, 0.1).sizes(44_781), (35_824, 4_478, 4_479));
    }

    #[test]
    fn parse_percent_and_fraction() {
        assert_eq!(SplitRatios::parse("60,20,20").unwrap(), SplitRatios::new(0.6, 0.2, 0.2));
        assert_eq!(SplitRatios::parse("0.8, 0.1, 0.1").unwrap(), SplitRatios::new(0.8, 0.1, 0.1));
        assert!(SplitRatios::parse("60,20").is_err());
        assert!(matches!(SplitRatios::parse("0.5,0.2,0.2"), Err(Error::Config(_))));
    }

    #[test]
    fn deterministic_by_seed() {
        let set = set_of(50);
        let r = SplitRatios::new(0.6, 0.2, 0.2);
        let a = make_splits(&set, r, 7, false).unwrap();
        let b = make_splits(&set, r, 7, false).unwrap();
        let c = make_splits(&set, r, 8, false).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn stratified_keeps_class_proportions() {
        let set = set_of(300);
        let s = make_splits(&set, SplitRatios::new(0.6, 0.2, 0.2), 1, true).unwrap();
        s.check_against(&set).unwrap();
        let hate_in = |ids: &[String]| {
            ids.iter()
                .filter(|id| set.get(id).unwrap().label == Label::Hate)
                .count()
        };
        assert_eq!(hate_in(&s.train), 60);
        assert_eq!(hate_in(&s.validation), 20);
        assert_eq!(hate_in(&s.test), 20);
    }

    #[test]
    fn empty_set_is_rejected() {
        let set = SampleSet::new(Dataset::Ihc, vec![]).unwrap();
        assert!(make_splits(&set, SplitRatios::new(0.6, 0.2, 0.2), 0, false).is_err());
    }

    proptest! {
        #[test]
        fn splits_are_disjoint_and_complete(
            n in 1usize..400,
            a in 1u32..100,
            b in 1u32..100,
            c in 1u32..100,
            seed in any::<u64>(),
            stratify in any::<bool>(),
        ) {
            let total = (a + b + c) as f64;
            let r = SplitRatios::new(a as f64 / total, b as f64 / total, 1.0 - a as f64 / total - b as f64 / total);
            prop_assume!(r.validate().is_ok());
            let set = set_of(n);
            let s = make_splits(&set, r, seed, stratify).unwrap();
            prop_assert!(s.check_against(&set).is_ok());
            if !stratify {
                let (tr, va, te) = r.sizes(n);
                prop_assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (tr, va, te));
            }
        }
    }
}
