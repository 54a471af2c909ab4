use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{Grads, ParamId, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Train,
    Eval,
}

/// Affine layer `y = W x + b` with `W` stored row-major as `[output, input]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dense {
    pub weight: ParamId,
    pub bias: ParamId,
    pub input: usize,
    pub output: usize,
}

impl Dense {
    /// Weights and biases drawn from `U(-1/√input, 1/√input)`.
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, input: usize, output: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (input as f64).sqrt();
        let mut draw = |n: usize| (0..n).map(|_| rng.random_range(-bound..bound)).collect::<Vec<_>>();
        let w = draw(input * output);
        let b = draw(output);
        Dense {
            weight: store.add(format!("{name}.weight"), vec![output, input], w),
            bias: store.add(format!("{name}.bias"), vec![output], b),
            input,
            output,
        }
    }

    pub fn forward(&self, p: &ParamStore, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.input);
        let w = p.values(self.weight);
        let b = p.values(self.bias);
        w.chunks_exact(self.input)
            .zip(b)
            .map(|(row, bi)| bi + row.iter().zip(x).map(|(a, c)| a * c).sum::<f64>())
            .collect()
    }

    /// Accumulates parameter gradients; returns `dL/dx` when `need_dx`.
    pub fn backward(&self, p: &ParamStore, g: &mut Grads, x: &[f64], dy: &[f64], need_dx: bool) -> Vec<f64> {
        {
            let gw = g.slot(self.weight);
            for (row, d) in gw.chunks_exact_mut(self.input).zip(dy) {
                if *d != 0.0 {
                    for (gi, xi) in row.iter_mut().zip(x) {
                        *gi += d * xi;
                    }
                }
            }
        }
        for (gb, d) in g.slot(self.bias).iter_mut().zip(dy) {
            *gb += d;
        }
        if !need_dx {
            return Vec::new();
        }
        let w = p.values(self.weight);
        let mut dx = vec![0.0; self.input];
        for (row, d) in w.chunks_exact(self.input).zip(dy) {
            if *d != 0.0 {
                for (o, wi) in dx.iter_mut().zip(row) {
                    *o += d * wi;
                }
            }
        }
        dx
    }
}

/// `f(x) = x` for `x ≥ 0`, `slope·x` otherwise.
pub fn leaky_relu(x: &[f64], slope: f64) -> Vec<f64> {
    x.iter().map(|&v| if v >= 0.0 { v } else { slope * v }).collect()
}

pub fn leaky_relu_backward(x: &[f64], dy: &[f64], slope: f64) -> Vec<f64> {
    x.iter()
        .zip(dy)
        .map(|(&v, &d)| if v >= 0.0 { d } else { slope * d })
        .collect()
}

/// Inverted-dropout scale factors: `0` with probability `rate`, else `1/(1-rate)`.
pub fn dropout_mask<R: Rng>(n: usize, rate: f64, rng: &mut R) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..n)
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect()
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

pub fn log_softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    z.iter().map(|v| v - lse).collect()
}

/// Backward of `y = softmax(z)` given `y` and `dL/dy`.
pub fn softmax_backward(y: &[f64], dy: &[f64]) -> Vec<f64> {
    let dot: f64 = y.iter().zip(dy).map(|(a, b)| a * b).sum();
    y.iter().zip(dy).map(|(yi, di)| yi * (di - dot)).collect()
}

/// Softmax cross-entropy of one logit vector against class `target`; returns
/// the loss and `dL/dz`.
pub fn cross_entropy(logits: &[f64], target: usize) -> (f64, Vec<f64>) {
    let logp = log_softmax(logits);
    let loss = -logp[target];
    let mut grad: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
    grad[target] -= 1.0;
    (loss, grad)
}
