use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Binary classification metrics with `Hate` as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub not_hate: ClassMetrics,
    pub hate: ClassMetrics,
    pub accuracy: f64,
    pub f1_weighted: f64,
    pub f1_macro: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn class(tp: usize, fp: usize, fn_: usize) -> ClassMetrics {
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    ClassMetrics {
        precision,
        recall,
        f1,
        support: tp + fn_,
    }
}

/// Per-class precision/recall/F1, accuracy and the two F1 averages. A class
/// with no predicted (actual) members gets precision (recall) 0.
pub fn compute_metrics(predictions: &[Label], labels: &[Label]) -> Result<Metrics> {
    if predictions.len() != labels.len() {
        return Err(Error::Contract(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::Contract("cannot score an empty prediction set".into()));
    }
    // confusion[actual][predicted]
    let mut confusion = [[0usize; 2]; 2];
    for (p, l) in predictions.iter().zip(labels) {
        confusion[l.index()][p.index()] += 1;
    }
    let [[tn, fp], [fn_, tp]] = confusion;
    let hate = class(tp, fp, fn_);
    let not_hate = class(tn, fn_, fp);
    let n = labels.len() as f64;
    Ok(Metrics {
        not_hate,
        hate,
        accuracy: ratio(tp + tn, labels.len()),
        f1_weighted: (not_hate.f1 * not_hate.support as f64 + hate.f1 * hate.support as f64) / n,
        f1_macro: (not_hate.f1 + hate.f1) / 2.0,
    })
}

const CLASS_FIELDS: [[&str; 4]; 2] = [
    ["not_hate.precision", "not_hate.recall", "not_hate.f1", "not_hate.support"],
    ["hate.precision", "hate.recall", "hate.f1", "hate.support"],
];

impl Metrics {
    pub fn class(&self, label: Label) -> &ClassMetrics {
        match label {
            Label::NotHate => &self.not_hate,
            Label::Hate => &self.hate,
        }
    }

    /// Every numeric field under a stable dotted name, supports included.
    pub fn fields(&self) -> IndexMap<&'static str, f64> {
        let mut m = IndexMap::new();
        for (names, c) in CLASS_FIELDS.iter().zip([&self.not_hate, &self.hate]) {
            m.insert(names[0], c.precision);
            m.insert(names[1], c.recall);
            m.insert(names[2], c.f1);
            m.insert(names[3], c.support as f64);
        }
        m.insert("accuracy", self.accuracy);
        m.insert("f1_weighted", self.f1_weighted);
        m.insert("f1_macro", self.f1_macro);
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Label::{Hate as H, NotHate as N};

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn hand_example() {
        let m = compute_metrics(&[H, N, H, N], &[H, H, H, N]).unwrap();
        assert!(close(m.hate.precision, 1.0) && close(m.hate.recall, 2.0 / 3.0) && close(m.hate.f1, 0.8));
        assert!(close(m.not_hate.precision, 0.5) && close(m.not_hate.recall, 1.0));
        assert!(close(m.not_hate.f1, 2.0 / 3.0));
        assert!(close(m.accuracy, 0.75));
        assert!(close(m.f1_macro, (0.8 + 2.0 / 3.0) / 2.0));
        assert!(close(m.f1_weighted, (3.0 * 0.8 + 2.0 / 3.0) / 4.0));
        assert_eq!((m.hate.support, m.not_hate.support), (3, 1));
    }

    #[test]
    fn zero_division_convention() {
        let m = compute_metrics(&[H, H], &[H, N]).unwrap();
        assert!(close(m.hate.f1, 2.0 / 3.0));
        assert_eq!(m.not_hate.precision, 0.0);
        assert_eq!(m.not_hate.recall, 0.0);
        assert_eq!(m.not_hate.f1, 0.0);
        assert!(close(m.f1_macro, 1.0 / 3.0));
        assert!(close(m.accuracy, 0.5));
    }

    #[test]
    fn perfect_and_errors() {
        let m = compute_metrics(&[H, N, N], &[H, N, N]).unwrap();
        assert!(m.fields().iter().filter(|(k, _)| !k.ends_with("support")).all(|(_, v)| *v == 1.0));
        assert!(compute_metrics(&[], &[]).is_err());
        assert!(compute_metrics(&[H], &[H, N]).is_err());
    }

    fn labels(max: usize) -> impl Strategy<Value = (Vec<Label>, Vec<Label>)> {
        (1..=max).prop_flat_map(|n| {
            let l = prop::collection::vec(prop::bool::ANY.prop_map(|b| if b { H } else { N }), n);
            (l.clone(), l)
        })
    }

    proptest! {
        #[test]
        fn swapping_classes_mirrors_rows((p, l) in labels(60)) {
            let a = compute_metrics(&p, &l).unwrap();
            let fp: Vec<_> = p.iter().map(|x| x.flip()).collect();
            let fl: Vec<_> = l.iter().map(|x| x.flip()).collect();
            let b = compute_metrics(&fp, &fl).unwrap();
            prop_assert_eq!(a.hate, b.not_hate);
            prop_assert_eq!(a.not_hate, b.hate);
            prop_assert_eq!(a.accuracy, b.accuracy);
            prop_assert!(close(a.f1_macro, b.f1_macro));
            for v in a.fields().values() {
                prop_assert!(*v >= 0.0);
            }
        }
    }
}
