use serde::{Deserialize, Serialize};

use crate::embedding::{Role, EMOTION_DIM};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    /// Two-layer MLP over the tweet embedding.
    EmbedHead,
    /// MLP over `[tweet, context, emotion]`.
    ConcatFusion,
    /// Three global learnable scales applied per source before concatenation.
    AdaptiveFusion,
    /// Per-sample softmax scales from a gate MLP over the tweet vector.
    MoEFusion,
    /// Shared-query attention over tweet and context, plus raw emotion.
    SharedQueryFusion,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::EmbedHead,
        ModelKind::ConcatFusion,
        ModelKind::AdaptiveFusion,
        ModelKind::MoEFusion,
        ModelKind::SharedQueryFusion,
    ];

    pub fn roles(self) -> &'static [Role] {
        match self {
            ModelKind::EmbedHead => &[Role::Tweet],
            _ => &[Role::Tweet, Role::Context, Role::Emotion],
        }
    }
}

/// How adaptive-fusion scales are squashed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaSquash {
    /// `2σ(x) − 1`, range (−1, 1).
    #[default]
    ScaledSigmoid,
    /// `σ(x)`, range (0, 1).
    Sigmoid,
}

impl AlphaSquash {
    pub fn apply(self, x: f64) -> f64 {
        let s = sigmoid(x);
        match self {
            AlphaSquash::ScaledSigmoid => 2.0 * s - 1.0,
            AlphaSquash::Sigmoid => s,
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        let s = sigmoid(x);
        match self {
            AlphaSquash::ScaledSigmoid => 2.0 * s * (1.0 - s),
            AlphaSquash::Sigmoid => s * (1.0 - s),
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn default_emotion() -> usize {
    EMOTION_DIM
}
fn default_heads() -> usize {
    8
}
fn default_slope() -> f64 {
    0.01
}
fn default_dropout() -> f64 {
    0.2
}
fn default_gate_hidden() -> usize {
    64
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Zero in a config file means "take it from the tweet store".
    #[serde(default)]
    pub d_tweet: usize,
    #[serde(default)]
    pub d_context: usize,
    #[serde(default = "default_emotion")]
    pub d_emotion: usize,
    /// MLP hidden width, or the attention width for `SharedQueryFusion`.
    /// Zero means "derive from the kind".
    #[serde(default)]
    pub hidden: usize,
    #[serde(default = "default_heads")]
    pub attention_heads: usize,
    #[serde(default = "default_slope")]
    pub leaky_slope: f64,
    #[serde(default = "default_dropout")]
    pub dropout: f64,
    #[serde(default)]
    pub alpha_squash: AlphaSquash,
    /// One key/value/output projection set for both attention sources.
    #[serde(default = "default_true")]
    pub shared_projections: bool,
    #[serde(default = "default_gate_hidden")]
    pub gate_hidden: usize,
}

impl ModelSpec {
    /// Spec with the derived hidden width and default constants.
    pub fn new(kind: ModelKind, d_tweet: usize, d_context: usize) -> Self {
        ModelSpec {
            kind,
            d_tweet,
            d_context: if kind == ModelKind::EmbedHead { 0 } else { d_context },
            d_emotion: EMOTION_DIM,
            hidden: 0,
            attention_heads: default_heads(),
            leaky_slope: default_slope(),
            dropout: default_dropout(),
            alpha_squash: AlphaSquash::default(),
            shared_projections: true,
            gate_hidden: default_gate_hidden(),
        }
        .resolved()
    }

    /// Fills `hidden` when left at zero.
    pub fn resolved(mut self) -> Self {
        if self.hidden == 0 {
            self.hidden = match self.kind {
                ModelKind::EmbedHead | ModelKind::SharedQueryFusion => self.d_tweet,
                _ => self.concat_width(),
            };
        }
        self
    }

    fn concat_width(&self) -> usize {
        self.d_tweet + self.d_context + self.d_emotion
    }

    /// Width of the vector entering the MLP.
    pub fn mlp_input(&self) -> usize {
        match self.kind {
            ModelKind::EmbedHead => self.d_tweet,
            ModelKind::SharedQueryFusion => 2 * self.hidden + self.d_emotion,
            _ => self.concat_width(),
        }
    }

    /// Width of the MLP hidden layer.
    pub fn mlp_hidden(&self) -> usize {
        match self.kind {
            ModelKind::SharedQueryFusion => self.mlp_input(),
            _ => self.hidden,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("invalid model spec: {m}")));
        if self.d_tweet == 0 {
            return bad("d_tweet must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) || !self.leaky_slope.is_finite() {
            return bad("dropout must be in [0, 1) and leaky_slope finite".into());
        }
        if self.kind != ModelKind::EmbedHead {
            if self.d_context == 0 {
                return bad("d_context must be positive for fusion models".into());
            }
            if self.d_emotion != EMOTION_DIM {
                return bad(format!("d_emotion must be {EMOTION_DIM}"));
            }
        }
        match self.kind {
            ModelKind::EmbedHead if self.hidden != self.d_tweet => {
                bad(format!("EmbedHead hidden {} must equal d_tweet {}", self.hidden, self.d_tweet))
            }
            ModelKind::ConcatFusion | ModelKind::AdaptiveFusion | ModelKind::MoEFusion
                if self.hidden != self.concat_width() =>
            {
                bad(format!(
                    "{:?} hidden {} must equal the concatenated width {}",
                    self.kind,
                    self.hidden,
                    self.concat_width()
                ))
            }
            ModelKind::MoEFusion if self.gate_hidden == 0 => bad("gate_hidden must be positive".into()),
            ModelKind::SharedQueryFusion => {
                if self.hidden == 0 || self.attention_heads == 0 || !self.hidden.is_multiple_of(self.attention_heads) {
                    return bad(format!(
                        "attention width {} must be divisible by {} heads",
                        self.hidden, self.attention_heads
                    ));
                }
                if self.shared_projections && self.d_tweet != self.d_context {
                    return bad("shared attention projections need d_tweet == d_context".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}
