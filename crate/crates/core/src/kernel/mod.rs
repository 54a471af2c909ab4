//! Differentiable building blocks with hand-written backward passes, the
//! AdamW optimizer, the warmup/decay schedule and a finite-difference
//! gradient checker. All arithmetic is f64.

mod adamw;
mod attention;
mod blob;
mod gradcheck;
mod ops;
mod params;
mod schedule;

pub use adamw::{adamw_step, OptimizerState, TrainHyper};
pub use attention::{AttentionCache, SharedQueryAttention};
pub use blob::{params_from_blob, params_to_blob};
pub use gradcheck::{grad_check, relative_error, Differentiable, GradCheckReport};
pub use ops::{
    cross_entropy, dropout_mask, leaky_relu, leaky_relu_backward, log_softmax, softmax, softmax_backward, Dense,
    Mode,
};
pub use params::{Grads, ParamId, ParamStore, Parameter};
pub use schedule::LinearSchedule;
