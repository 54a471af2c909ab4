use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// Column sum over tokens scaled to unit Euclidean norm.
    NormalizedSum,
    /// Column mean; used when the encoder already pools internally.
    MeanPassthrough,
    /// Single row passed through unchanged.
    None,
}

/// Reduces a `k × n` token matrix to one vector of length `n`.
///
/// Only real-token rows may be passed; padding rows would shift both the sum
/// and the mean.
pub fn pool_tokens(tokens: &[Vec<f32>], method: Pooling) -> Result<Vec<f32>> {
    let Some(first) = tokens.first() else {
        return Err(Error::Shape("pooling needs at least one token row".into()));
    };
    let n = first.len();
    if n == 0 {
        return Err(Error::Shape("token rows have zero width".into()));
    }
    if let Some((i, _)) = tokens.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(Error::Shape(format!("token row {i} has width {} (expected {n})", tokens[i].len())));
    }
    if tokens.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Validation("token matrix contains non-finite values".into()));
    }
    let column_sum = || {
        let mut sum = vec![0.0f64; n];
        for row in tokens {
            for (s, v) in sum.iter_mut().zip(row) {
                *s += *v as f64;
            }
        }
        sum
    };
    match method {
        Pooling::None => {
            if tokens.len() != 1 {
                return Err(Error::Shape(format!(
                    "pooling `none` expects one row, got {}",
                    tokens.len()
                )));
            }
            Ok(first.clone())
        }
        Pooling::MeanPassthrough => {
            let k = tokens.len() as f64;
            Ok(column_sum().into_iter().map(|s| (s / k) as f32).collect())
        }
        Pooling::NormalizedSum => {
            let sum = column_sum();
            let norm = sum.iter().map(|s| s * s).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::ZeroNorm);
            }
            Ok(sum.into_iter().map(|s| (s / norm) as f32).collect())
        }
    }
}
