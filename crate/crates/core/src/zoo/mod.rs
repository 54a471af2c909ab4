//! The five classifiers: a plain MLP head over one embedding and four ways of
//! fusing tweet, context and emotion features in front of the same MLP.

mod model;
mod spec;

pub use model::{argmax_label, build_model, Example, Model, Trace};
pub use spec::{AlphaSquash, ModelKind, ModelSpec};
