use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::spec::{ModelKind, ModelSpec};
use crate::dataset::Label;
use crate::embedding::{FeatureBundle, Role};
use crate::error::{Error, Result};
use crate::kernel::{
    cross_entropy, dropout_mask, leaky_relu, leaky_relu_backward, softmax, softmax_backward, AttentionCache, Dense,
    Differentiable, Grads, Mode, ParamId, ParamStore, SharedQueryAttention,
};
use crate::parallel::{self, Exec};

/// Samples per gradient chunk. Fixed so the summation order, and therefore
/// the result, does not depend on the thread count.
const GRAD_CHUNK: usize = 32;

#[derive(Debug, Clone)]
struct Mlp {
    l1: Dense,
    l2: Dense,
}

#[derive(Debug, Clone)]
enum Arch {
    Plain,
    Adaptive { alphas: ParamId },
    MoE { gate1: Dense, gate2: Dense },
    SharedQuery { attn: SharedQueryAttention },
}

/// A labelled input, used where a batch owns its data.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub input: FeatureBundle,
    pub label: Label,
}

#[derive(Debug, Clone)]
pub struct Model {
    spec: ModelSpec,
    params: ParamStore,
    mlp: Mlp,
    arch: Arch,
}

/// Intermediate values of one forward pass, kept for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    pub fused: Vec<f64>,
    pub logits: Vec<f64>,
    /// Source scales for adaptive and gated fusion.
    pub alphas: Option<Vec<f64>>,
    /// Per-source attention caches for shared-query fusion.
    pub attention: Vec<AttentionCache>,
    h1: Vec<f64>,
    mask: Option<Vec<f64>>,
    dropped: Vec<f64>,
    raw_alphas: Vec<f64>,
    gate_pre: Vec<f64>,
    gate_mask: Option<Vec<f64>>,
    gate_dropped: Vec<f64>,
    attn_masks: Vec<Option<Vec<f64>>>,
    attn_raw: Vec<Vec<f64>>,
}

/// Builds a model with weights drawn from a seeded ChaCha8 stream.
pub fn build_model(spec: &ModelSpec, seed: u64) -> Result<Model> {
    let spec = spec.clone().resolved();
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParamStore::new();
    let arch = match spec.kind {
        ModelKind::EmbedHead | ModelKind::ConcatFusion => Arch::Plain,
        ModelKind::AdaptiveFusion => Arch::Adaptive {
            alphas: params.add("fusion.alpha", vec![3], vec![1.0; 3]),
        },
        ModelKind::MoEFusion => Arch::MoE {
            gate1: Dense::new(&mut params, "gate.l1", spec.d_tweet, spec.gate_hidden, &mut rng),
            gate2: Dense::new(&mut params, "gate.l2", spec.gate_hidden, 3, &mut rng),
        },
        ModelKind::SharedQueryFusion => Arch::SharedQuery {
            attn: SharedQueryAttention::new(
                &mut params,
                "attn",
                &[spec.d_tweet, spec.d_context],
                spec.hidden,
                spec.attention_heads,
                spec.shared_projections,
                &mut rng,
            )?,
        },
    };
    let mlp = Mlp {
        l1: Dense::new(&mut params, "mlp.l1", spec.mlp_input(), spec.mlp_hidden(), &mut rng),
        l2: Dense::new(&mut params, "mlp.l2", spec.mlp_hidden(), 2, &mut rng),
    };
    Ok(Model {
        spec,
        params,
        mlp,
        arch,
    })
}

fn apply_mask(x: &[f64], mask: &Option<Vec<f64>>) -> Vec<f64> {
    match mask {
        Some(m) => x.iter().zip(m).map(|(a, b)| a * b).collect(),
        None => x.to_vec(),
    }
}

impl Model {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Total number of trainable scalars.
    pub fn parameter_count(&self) -> usize {
        self.params.count()
    }

    pub fn roles(&self) -> &'static [Role] {
        self.spec.kind.roles()
    }

    /// Checks shapes and presence of every input this model needs.
    pub fn check_input(&self, b: &FeatureBundle) -> Result<()> {
        let s = &self.spec;
        let multi_row = s.kind == ModelKind::SharedQueryFusion;
        let rows_ok = |rows: &[Vec<f64>], dim: usize, role: &str| -> Result<()> {
            if rows.is_empty() || (!multi_row && rows.len() != 1) {
                return Err(Error::Shape(format!(
                    "{:?} expects {} {role} row(s), got {}",
                    s.kind,
                    if multi_row { "at least one" } else { "exactly one" },
                    rows.len()
                )));
            }
            if let Some(r) = rows.iter().find(|r| r.len() != dim) {
                return Err(Error::Shape(format!("{role} width {} != expected {dim}", r.len())));
            }
            Ok(())
        };
        rows_ok(&b.tweet, s.d_tweet, "tweet")?;
        if s.kind == ModelKind::EmbedHead {
            return Ok(());
        }
        let context = b.context.as_ref().ok_or(Error::MissingFeature("context"))?;
        rows_ok(context, s.d_context, "context")?;
        let emotion = b.emotion.as_ref().ok_or(Error::MissingFeature("emotion"))?;
        if emotion.len() != s.d_emotion {
            return Err(Error::Shape(format!("emotion width {} != {}", emotion.len(), s.d_emotion)));
        }
        Ok(())
    }

    /// Forward pass of one checked sample. `rng` enables dropout.
    fn forward_one(&self, b: &FeatureBundle, mut rng: Option<&mut ChaCha8Rng>) -> Trace {
        let p = &self.params;
        let s = &self.spec;
        let rate = s.dropout;
        let mut mask = |n: usize| -> Option<Vec<f64>> {
            match rng.as_deref_mut() {
                Some(r) if rate > 0.0 => Some(dropout_mask(n, rate, r)),
                _ => None,
            }
        };
        let mut t = Trace::default();
        let tweet = &b.tweet[0];
        match &self.arch {
            Arch::Plain => {
                t.fused = tweet.clone();
                if s.kind == ModelKind::ConcatFusion {
                    t.fused.extend_from_slice(&b.context.as_ref().unwrap()[0]);
                    t.fused.extend_from_slice(b.emotion.as_ref().unwrap());
                }
            }
            Arch::Adaptive { alphas } => {
                t.raw_alphas = p.values(*alphas).to_vec();
                let a: Vec<f64> = t.raw_alphas.iter().map(|&x| s.alpha_squash.apply(x)).collect();
                t.fused = scaled_concat(&a, tweet, &b.context.as_ref().unwrap()[0], b.emotion.as_ref().unwrap());
                t.alphas = Some(a);
            }
            Arch::MoE { gate1, gate2 } => {
                t.gate_pre = gate1.forward(p, tweet);
                t.gate_mask = mask(t.gate_pre.len());
                t.gate_dropped = apply_mask(&leaky_relu(&t.gate_pre, s.leaky_slope), &t.gate_mask);
                let a = softmax(&gate2.forward(p, &t.gate_dropped));
                t.fused = scaled_concat(&a, tweet, &b.context.as_ref().unwrap()[0], b.emotion.as_ref().unwrap());
                t.alphas = Some(a);
            }
            Arch::SharedQuery { attn } => {
                let sources = [&b.tweet, b.context.as_ref().unwrap()];
                for (i, rows) in sources.into_iter().enumerate() {
                    let (out, cache) = attn.forward(p, i, rows);
                    let m = mask(out.len());
                    t.fused.extend(apply_mask(&out, &m));
                    t.attn_raw.push(out);
                    t.attn_masks.push(m);
                    t.attention.push(cache);
                }
                t.fused.extend_from_slice(b.emotion.as_ref().unwrap());
            }
        }
        t.h1 = self.mlp.l1.forward(p, &t.fused);
        t.mask = mask(t.h1.len());
        t.dropped = apply_mask(&leaky_relu(&t.h1, s.leaky_slope), &t.mask);
        t.logits = self.mlp.l2.forward(p, &t.dropped);
        t
    }

    /// Accumulates parameter gradients of one sample given `dL/dlogits`.
    fn backward_one(&self, b: &FeatureBundle, t: &Trace, dlogits: &[f64], g: &mut Grads) {
        let p = &self.params;
        let s = &self.spec;
        let need_fused = !matches!(self.arch, Arch::Plain);
        let dd = self.mlp.l2.backward(p, g, &t.dropped, dlogits, true);
        let dact = apply_mask(&dd, &t.mask);
        let dh1 = leaky_relu_backward(&t.h1, &dact, s.leaky_slope);
        let dfused = self.mlp.l1.backward(p, g, &t.fused, &dh1, need_fused);
        // dL/dα_k = <dfused segment k, unscaled source k>
        let source_grads = || -> Vec<f64> {
            let parts = [&b.tweet[0], &b.context.as_ref().unwrap()[0], b.emotion.as_ref().unwrap()];
            let mut off = 0;
            let mut out = Vec::with_capacity(3);
            for part in parts {
                out.push(part.iter().zip(&dfused[off..off + part.len()]).map(|(x, d)| x * d).sum());
                off += part.len();
            }
            out
        };
        match &self.arch {
            Arch::Plain => {}
            Arch::Adaptive { alphas } => {
                let da = source_grads();
                let slot = g.slot(*alphas);
                for k in 0..3 {
                    slot[k] += da[k] * s.alpha_squash.derivative(t.raw_alphas[k]);
                }
            }
            Arch::MoE { gate1, gate2 } => {
                let a = t.alphas.as_ref().unwrap();
                let da = source_grads();
                let dz = softmax_backward(a, &da);
                let dgd = gate2.backward(p, g, &t.gate_dropped, &dz, true);
                let dgact = apply_mask(&dgd, &t.gate_mask);
                let dgpre = leaky_relu_backward(&t.gate_pre, &dgact, s.leaky_slope);
                gate1.backward(p, g, &b.tweet[0], &dgpre, false);
            }
            Arch::SharedQuery { attn } => {
                let sources = [&b.tweet, b.context.as_ref().unwrap()];
                let mut off = 0;
                for (i, rows) in sources.into_iter().enumerate() {
                    let n = t.attn_raw[i].len();
                    let dout = apply_mask(&dfused[off..off + n], &t.attn_masks[i]);
                    attn.backward(p, g, i, rows, &t.attention[i], &dout);
                    off += n;
                }
            }
        }
    }

    /// Fused vector that enters the MLP, in eval mode.
    pub fn fuse(&self, b: &FeatureBundle) -> Result<Vec<f64>> {
        self.check_input(b)?;
        Ok(self.forward_one(b, None).fused)
    }

    /// Full eval-mode trace of one sample, for inspection.
    pub fn trace(&self, b: &FeatureBundle) -> Result<Trace> {
        self.check_input(b)?;
        Ok(self.forward_one(b, None))
    }

    /// Logits for a batch. In `Mode::Train`, dropout masks come from
    /// per-sample seeds drawn in order from `rng`.
    pub fn forward<R: Rng>(&self, inputs: &[FeatureBundle], mode: Mode, rng: &mut R) -> Result<Vec<[f64; 2]>> {
        for b in inputs {
            self.check_input(b)?;
        }
        let seeds: Vec<u64> = match mode {
            Mode::Train => inputs.iter().map(|_| rng.random()).collect(),
            Mode::Eval => Vec::new(),
        };
        Ok(inputs
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let mut r = seeds.get(i).map(|&s| ChaCha8Rng::seed_from_u64(s));
                let t = self.forward_one(b, r.as_mut());
                [t.logits[0], t.logits[1]]
            })
            .collect())
    }

    /// Class probabilities `[P(not_hate), P(hate)]` in eval mode.
    pub fn predict_proba(&self, b: &FeatureBundle) -> Result<[f64; 2]> {
        self.check_input(b)?;
        let p = softmax(&self.forward_one(b, None).logits);
        Ok([p[0], p[1]])
    }

    pub fn predict_proba_batch(&self, inputs: &[FeatureBundle], exec: Exec) -> Result<Vec<[f64; 2]>> {
        for b in inputs {
            self.check_input(b)?;
        }
        Ok(parallel::map(exec, inputs, |b| {
            let p = softmax(&self.forward_one(b, None).logits);
            [p[0], p[1]]
        }))
    }

    /// Eval-mode logits for a batch.
    pub fn logits_batch(&self, inputs: &[FeatureBundle], exec: Exec) -> Result<Vec<[f64; 2]>> {
        for b in inputs {
            self.check_input(b)?;
        }
        Ok(parallel::map(exec, inputs, |b| {
            let t = self.forward_one(b, None);
            [t.logits[0], t.logits[1]]
        }))
    }

    /// Eval-mode argmax labels; exactly equal logits resolve to `NotHate`.
    pub fn predict_batch(&self, inputs: &[FeatureBundle], exec: Exec) -> Result<Vec<Label>> {
        Ok(self.logits_batch(inputs, exec)?.into_iter().map(argmax_label).collect())
    }

    /// Weighted mean cross-entropy and its gradient over a batch.
    ///
    /// `dropout_seeds`, one per sample, switch on training-mode dropout.
    /// Per-sample weights are `class_weights[label]` (1 when absent) and the
    /// loss is `Σ wᵢ·lᵢ / Σ wᵢ`. A non-finite loss is reported against the
    /// offending batch position.
    pub fn batch_loss_and_grads(
        &self,
        items: &[(&FeatureBundle, Label)],
        dropout_seeds: Option<&[u64]>,
        class_weights: Option<[f64; 2]>,
        exec: Exec,
    ) -> Result<(f64, Grads)> {
        if items.is_empty() {
            return Err(Error::Contract("empty batch".into()));
        }
        if let Some(s) = dropout_seeds {
            if s.len() != items.len() {
                return Err(Error::Contract("one dropout seed per sample required".into()));
            }
        }
        for (b, _) in items {
            self.check_input(b)?;
        }
        let weight = |l: Label| class_weights.map_or(1.0, |w| w[l.index()]);
        let total_w: f64 = items.iter().map(|(_, l)| weight(*l)).sum();
        if !(total_w > 0.0) {
            return Err(Error::Contract("class weights sum to zero over the batch".into()));
        }
        let idx: Vec<usize> = (0..items.len()).collect();
        let partials = parallel::map_chunks(exec, &idx, GRAD_CHUNK, |chunk| -> Result<(f64, Grads)> {
            let mut g = Grads::zeros_like(&self.params);
            let mut loss = 0.0;
            for &i in chunk {
                let (b, label) = items[i];
                let mut r = dropout_seeds.map(|s| ChaCha8Rng::seed_from_u64(s[i]));
                let t = self.forward_one(b, r.as_mut());
                let (l, mut d) = cross_entropy(&t.logits, label.index());
                if !l.is_finite() {
                    return Err(Error::Numerical(format!("non-finite loss at batch position {i}")));
                }
                let w = weight(label) / total_w;
                d.iter_mut().for_each(|v| *v *= w);
                loss += w * l;
                self.backward_one(b, &t, &d, &mut g);
            }
            Ok((loss, g))
        });
        let mut loss = 0.0;
        let mut grads = Grads::zeros_like(&self.params);
        for part in partials {
            let (l, g) = part?;
            loss += l;
            grads.add_assign(&g);
        }
        Ok((loss, grads))
    }

    /// Mean eval-mode loss without gradients.
    pub fn batch_loss(&self, items: &[(&FeatureBundle, Label)], class_weights: Option<[f64; 2]>) -> Result<f64> {
        let weight = |l: Label| class_weights.map_or(1.0, |w| w[l.index()]);
        let mut num = 0.0;
        let mut den = 0.0;
        for (b, label) in items {
            self.check_input(b)?;
            let t = self.forward_one(b, None);
            num += weight(*label) * cross_entropy(&t.logits, label.index()).0;
            den += weight(*label);
        }
        Ok(num / den)
    }
}

/// Hate only when its logit is strictly larger.
pub fn argmax_label(logits: [f64; 2]) -> Label {
    if logits[1] > logits[0] {
        Label::Hate
    } else {
        Label::NotHate
    }
}

fn scaled_concat(a: &[f64], t: &[f64], c: &[f64], e: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(t.len() + c.len() + e.len());
    for (k, part) in [t, c, e].into_iter().enumerate() {
        v.extend(part.iter().map(|x| a[k] * x));
    }
    v
}

impl Differentiable for Model {
    type Batch = [Example];

    fn params(&self) -> &ParamStore {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn eval_loss(&self, batch: &[Example]) -> Result<f64> {
        let items: Vec<_> = batch.iter().map(|e| (&e.input, e.label)).collect();
        self.batch_loss(&items, None)
    }

    fn eval_loss_and_grads(&self, batch: &[Example]) -> Result<(f64, Grads)> {
        let items: Vec<_> = batch.iter().map(|e| (&e.input, e.label)).collect();
        self.batch_loss_and_grads(&items, None, None, Exec::Sequential)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::grad_check;
    use crate::zoo::AlphaSquash;

    fn vec_of(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn emotion(rng: &mut ChaCha8Rng) -> Vec<f64> {
        let raw: Vec<f64> = (0..7).map(|_| rng.random_range(0.01..1.0)).collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / s).collect()
    }

    fn bundle(rng: &mut ChaCha8Rng, d: usize) -> FeatureBundle {
        FeatureBundle::pooled(vec_of(rng, d))
            .with_context(vec_of(rng, d))
            .with_emotion(emotion(rng))
    }

    #[test]
    fn embed_head_parameter_count() {
        let m = build_model(&ModelSpec::new(ModelKind::EmbedHead, 1024, 0), 0).unwrap();
        assert_eq!(m.parameter_count(), 1_051_650);
    }

    #[test]
    fn fusion_parameter_counts() {
        let c = build_model(&ModelSpec::new(ModelKind::ConcatFusion, 768, 768), 0).unwrap();
        let a = build_model(&ModelSpec::new(ModelKind::AdaptiveFusion, 768, 768), 0).unwrap();
        let w = 1543;
        assert_eq!(c.parameter_count(), w * w + w + 2 * w + 2);
        assert_eq!(a.parameter_count(), c.parameter_count() + 3);
    }

    #[test]
    fn concat_order() {
        let m = build_model(&ModelSpec::new(ModelKind::ConcatFusion, 2, 2), 1).unwrap();
        let b = FeatureBundle::pooled(vec![1.0, 2.0])
            .with_context(vec![3.0, 4.0])
            .with_emotion(vec![0.1, 0.1, 0.1, 0.1, 0.2, 0.2, 0.2]);
        assert_eq!(m.fuse(&b).unwrap(), vec![1.0, 2.0, 3.0, 4.0, 0.1, 0.1, 0.1, 0.1, 0.2, 0.2, 0.2]);
    }

    #[test]
    fn adaptive_zero_alphas_zero_features() {
        let mut m = build_model(&ModelSpec::new(ModelKind::AdaptiveFusion, 4, 4), 1).unwrap();
        let id = match &m.arch {
            Arch::Adaptive { alphas } => *alphas,
            _ => unreachable!(),
        };
        m.params_mut().as_mut_slice()[id.index()].values = vec![0.0; 3];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let fused = m.fuse(&bundle(&mut rng, 4)).unwrap();
        assert!(fused.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn moe_equal_gate_logits_split_evenly() {
        let mut m = build_model(&ModelSpec::new(ModelKind::MoEFusion, 4, 4), 1).unwrap();
        let (w, b) = match &m.arch {
            Arch::MoE { gate2, .. } => (gate2.weight, gate2.bias),
            _ => unreachable!(),
        };
        for id in [w, b] {
            let p = &mut m.params_mut().as_mut_slice()[id.index()];
            p.values.iter_mut().for_each(|v| *v = 0.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = m.trace(&bundle(&mut rng, 4)).unwrap();
        for a in t.alphas.unwrap() {
            assert!((a - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn missing_roles_are_rejected() {
        let m = build_model(&ModelSpec::new(ModelKind::ConcatFusion, 4, 4), 1).unwrap();
        let b = FeatureBundle::pooled(vec![0.0; 4]);
        assert!(matches!(m.predict_proba(&b), Err(Error::MissingFeature("context"))));
        let b = b.with_context(vec![0.0; 4]);
        assert!(matches!(m.predict_proba(&b), Err(Error::MissingFeature("emotion"))));
        let h = build_model(&ModelSpec::new(ModelKind::EmbedHead, 4, 0), 1).unwrap();
        assert!(matches!(h.predict_proba(&FeatureBundle::pooled(vec![0.0; 3])), Err(Error::Shape(_))));
    }

    #[test]
    fn batch_matches_single_and_argmax_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for kind in ModelKind::ALL {
            let m = build_model(&ModelSpec::new(kind, 8, 8), 5).unwrap();
            let inputs: Vec<_> = (0..20).map(|_| bundle(&mut rng, 8)).collect();
            let logits = m.forward(&inputs, Mode::Eval, &mut rng).unwrap();
            let probs = m.predict_proba_batch(&inputs, Exec::Parallel).unwrap();
            for (i, b) in inputs.iter().enumerate() {
                let single = m.forward(std::slice::from_ref(b), Mode::Eval, &mut rng).unwrap()[0];
                assert_eq!(single, logits[i]);
                assert_eq!(probs[i], m.predict_proba(b).unwrap());
                assert!((probs[i][0] + probs[i][1] - 1.0).abs() < 1e-12);
                assert_eq!(probs[i][1] > probs[i][0], logits[i][1] > logits[i][0]);
            }
        }
    }

    #[test]
    fn train_mode_dropout_is_seeded() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = build_model(&ModelSpec::new(ModelKind::EmbedHead, 16, 0), 5).unwrap();
        let inputs: Vec<_> = (0..4).map(|_| FeatureBundle::pooled(vec_of(&mut rng, 16))).collect();
        let a = m.forward(&inputs, Mode::Train, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = m.forward(&inputs, Mode::Train, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let e = m.forward(&inputs, Mode::Eval, &mut rng).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, e);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for kind in ModelKind::ALL {
            let mut spec = ModelSpec::new(kind, 8, 8);
            spec.attention_heads = 2;
            spec.gate_hidden = 6;
            let m = build_model(&spec, 2).unwrap();
            let batch: Vec<Example> = (0..4)
                .map(|i| Example {
                    input: bundle(&mut rng, 8),
                    label: Label::from_index(i % 2).unwrap(),
                })
                .collect();
            let r = grad_check(&m, &batch[..], 1e-5, Exec::Parallel).unwrap();
            assert!(r.max_rel_error < 1e-4, "{kind:?}: {r:?}");
        }
    }

    #[test]
    fn token_rows_and_plain_sigmoid() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut spec = ModelSpec::new(ModelKind::SharedQueryFusion, 8, 8);
        spec.attention_heads = 4;
        spec.alpha_squash = AlphaSquash::Sigmoid;
        let m = build_model(&spec, 1).unwrap();
        let b = FeatureBundle {
            tweet: (0..3).map(|_| vec_of(&mut rng, 8)).collect(),
            context: Some((0..5).map(|_| vec_of(&mut rng, 8)).collect()),
            emotion: Some(emotion(&mut rng)),
        };
        let t = m.trace(&b).unwrap();
        assert_eq!(t.attention[0].weights[0].len(), 3);
        assert_eq!(t.attention[1].weights[0].len(), 5);
        let batch = [Example { input: b, label: Label::Hate }];
        assert!(grad_check(&m, &batch[..], 1e-5, Exec::Sequential).unwrap().max_rel_error < 1e-4);
        let h = build_model(&ModelSpec::new(ModelKind::EmbedHead, 8, 0), 1).unwrap();
        let two = FeatureBundle {
            tweet: vec![vec![0.0; 8]; 2],
            context: None,
            emotion: None,
        };
        assert!(matches!(h.predict_proba(&two), Err(Error::Shape(_))));
    }
}
