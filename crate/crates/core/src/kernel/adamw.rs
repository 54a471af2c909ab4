use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use crate::error::{Error, Result};

/// Training hyperparameters. The two constructors carry the head
/// fine-tuning and linear-probing profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainHyper {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub warmup_fraction: f64,
    pub dropout: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Optional per-class loss weights `[not_hate, hate]`; unweighted when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_weights: Option<[f64; 2]>,
}

impl TrainHyper {
    pub fn finetune_head() -> Self {
        TrainHyper {
            learning_rate: 2e-6,
            weight_decay: 0.5,
            warmup_fraction: 0.2,
            dropout: 0.2,
            batch_size: 16,
            epochs: 4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            class_weights: None,
        }
    }

    pub fn linear_probe() -> Self {
        TrainHyper {
            learning_rate: 2e-3,
            batch_size: 512,
            epochs: 20,
            ..Self::finetune_head()
        }
    }

    pub fn profile(name: &str) -> Result<Self> {
        match name {
            "finetune-head" | "finetune_head" => Ok(Self::finetune_head()),
            "linear-probe" | "linear_probe" => Ok(Self::linear_probe()),
            other => Err(Error::Config(format!("unknown hyperparameter profile `{other}`"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("invalid hyperparameters: {m}")));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay must be nonnegative");
        }
        if !(0.0..=1.0).contains(&self.warmup_fraction) {
            return bad("warmup_fraction must be in [0, 1]");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return bad("batch_size and epochs must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.epsilon <= 0.0 {
            return bad("AdamW constants out of range");
        }
        if let Some(w) = self.class_weights {
            if w.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return bad("class weights must be positive");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub step: u64,
    pub first: Vec<Vec<f64>>,
    pub second: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(params: &ParamStore) -> Self {
        let zeros: Vec<Vec<f64>> = params.iter().map(|p| vec![0.0; p.len()]).collect();
        OptimizerState {
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }
}

/// One AdamW update from the gradients stored on each parameter:
/// `p ← p − lr·λ·p − lr·m̂/(√v̂ + ε)`.
///
/// Gradients are checked before anything is modified.
pub fn adamw_step(params: &mut ParamStore, state: &mut OptimizerState, hyper: &TrainHyper, lr_now: f64) -> Result<()> {
    if state.first.len() != params.len() {
        return Err(Error::Shape("optimizer state does not match parameters".into()));
    }
    if let Some(p) = params.iter().find(|p| p.grad.iter().any(|g| !g.is_finite())) {
        return Err(Error::Numerical(format!("non-finite gradient in {}", p.name)));
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (hyper.beta1, hyper.beta2);
    let bc1 = 1.0 - b1.powi(t);
    let bc2 = 1.0 - b2.powi(t);
    let decay = lr_now * hyper.weight_decay;
    for ((p, m), v) in params.iter_mut().zip(&mut state.first).zip(&mut state.second) {
        for i in 0..p.values.len() {
            let g = p.grad[i];
            m[i] = b1 * m[i] + (1.0 - b1) * g;
            v[i] = b2 * v[i] + (1.0 - b2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            let old = p.values[i];
            p.values[i] = old - decay * old - lr_now * m_hat / (v_hat.sqrt() + hyper.epsilon);
        }
        if p.values.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!("non-finite value in {} after update", p.name)));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(value: f64, grad: f64) -> ParamStore {
        let mut s = ParamStore::new();
        s.add("p", vec![1], vec![value]);
        s.as_mut_slice()[0].grad = vec![grad];
        s
    }

    fn hyper(decay: f64) -> TrainHyper {
        TrainHyper {
            weight_decay: decay,
            ..TrainHyper::finetune_head()
        }
    }

    #[test]
    fn single_step_values() {
        // First step: m̂ = g and v̂ = g², so the Adam term is lr·g/(|g| + ε).
        let adam_term = 0.1 * 1.0 / (1.0 + 1e-8);
        for (decay, expected) in [(0.0, 1.0 - adam_term), (0.5, 1.0 - 0.05 - adam_term)] {
            let mut p = scalar(1.0, 1.0);
            let mut st = OptimizerState::new(&p);
            adamw_step(&mut p, &mut st, &hyper(decay), 0.1).unwrap();
            assert!((p.as_slice()[0].values[0] - expected).abs() <= 1e-12);
            assert_eq!(st.step, 1);
        }
    }

    #[test]
    fn zero_gradient_without_decay_is_fixed_point() {
        let mut p = scalar(0.37, 0.0);
        let mut st = OptimizerState::new(&p);
        for _ in 0..5 {
            adamw_step(&mut p, &mut st, &hyper(0.0), 0.1).unwrap();
        }
        assert_eq!(p.as_slice()[0].values[0], 0.37);
        assert!(st.second.iter().flatten().all(|v| *v >= 0.0));
    }

    #[test]
    fn non_finite_gradient_aborts_untouched() {
        let mut p = scalar(1.0, f64::NAN);
        let mut st = OptimizerState::new(&p);
        let err = adamw_step(&mut p, &mut st, &hyper(0.0), 0.1).unwrap_err();
        assert!(err.to_string().contains("p"));
        assert_eq!(p.as_slice()[0].values[0], 1.0);
        assert_eq!(st.step, 0);
    }

    #[test]
    fn profiles() {
        let ft = TrainHyper::finetune_head();
        assert_eq!((ft.learning_rate, ft.weight_decay, ft.warmup_fraction, ft.dropout), (2e-6, 0.5, 0.2, 0.2));
        assert_eq!((ft.batch_size, ft.epochs), (16, 4));
        let lp = TrainHyper::linear_probe();
        assert_eq!((lp.learning_rate, lp.batch_size, lp.epochs), (2e-3, 512, 20));
        assert_eq!((lp.beta1, lp.beta2, lp.epsilon), (0.9, 0.999, 1e-8));
        assert!(TrainHyper::profile("nope").is_err());
        ft.validate().unwrap();
        lp.validate().unwrap();
        assert!(TrainHyper { dropout: 1.0, ..ft }.validate().is_err());
    }
}
