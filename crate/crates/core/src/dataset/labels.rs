use super::Label;
use crate::error::{Error, Result};

/// Mean offensiveness at or above this value is hate.
pub const SBIC_THRESHOLD: f64 = 0.5;
/// Human plus model toxicity strictly above this value is hate.
pub const TOXIGEN_THRESHOLD: f64 = 5.5;

/// Aggregates per-annotator offensiveness scores by their arithmetic mean.
///
/// `row` is only used to name the offending input in errors.
pub fn label_sbic(scores: &[f64], row: usize) -> Result<Label> {
    if scores.is_empty() {
        return Err(Error::Ingest {
            path: String::new(),
            row,
            msg: "no offensiveness scores".into(),
        });
    }
    if let Some(bad) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::Ingest {
            path: String::new(),
            row,
            msg: format!("offensiveness score {bad} outside [0, 1]"),
        });
    }
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    Ok(if mean >= SBIC_THRESHOLD {
        Label::Hate
    } else {
        Label::NotHate
    })
}

pub fn label_toxigen(human: f64, model: f64) -> Result<Label> {
    for (name, v) in [("human", human), ("model", model)] {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::Validation(format!(
                "{name} toxicity score must be finite and nonnegative, got {v}"
            )));
        }
    }
    Ok(if human + model > TOXIGEN_THRESHOLD {
        Label::Hate
    } else {
        Label::NotHate
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sbic_boundary_is_inclusive() {
        assert_eq!(label_sbic(&[1.0, 0.5, 0.0], 2).unwrap(), Label::Hate);
        assert_eq!(label_sbic(&[0.0, 0.0], 2).unwrap(), Label::NotHate);
        assert_eq!(label_sbic(&[0.4, 0.5, 0.55], 2).unwrap(), Label::NotHate);
    }

    #[test]
    fn sbic_errors_name_the_row() {
        match label_sbic(&[], 17) {
            Err(Error::Ingest { row, .. }) => assert_eq!(row, 17),
            other => panic!("unexpected {other:?}"),
        }
        assert!(label_sbic(&[1.5], 3).is_err());
    }

    #[test]
    fn toxigen_boundary_is_strict() {
        assert_eq!(label_toxigen(3.0, 2.6).unwrap(), Label::Hate);
        assert_eq!(label_toxigen(0.0, 0.0).unwrap(), Label::NotHate);
        assert_eq!(label_toxigen(2.75, 2.75).unwrap(), Label::NotHate);
        assert!(label_toxigen(f64::NAN, 1.0).is_err());
        assert!(label_toxigen(-1.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn sbic_is_monotone(
            scores in prop::collection::vec(0.0f64..=1.0, 1..12),
            idx in any::<prop::sample::Index>(),
            bump in 0.0f64..=1.0,
        ) {
            let before = label_sbic(&scores, 1).unwrap();
            let mut raised = scores.clone();
            let i = idx.index(raised.len());
            raised[i] = (raised[i] + bump).min(1.0);
            let after = label_sbic(&raised, 1).unwrap();
            prop_assert!(!(before == Label::Hate && after == Label::NotHate));
        }
    }
}
