//! Two-Gaussian synthetic corpora with matching embedding stores, for tests,
//! benchmarks and smoke runs without real data.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataset::{Dataset, Label, Sample, SampleSet, SplitAssignment, SplitRatios};
use crate::embedding::{instruction_digest, EmbeddingStore, Pooling, RoleStores, EMOTION_DIM};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub dim: usize,
    /// Distance between the class means in units of the per-coordinate σ.
    pub separation: f64,
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    /// Also build context and emotion stores for the fusion models.
    pub fusion: bool,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(dim: usize, separation: f64, train: usize, validation: usize, test: usize) -> Self {
        SyntheticSpec {
            dim,
            separation,
            train,
            validation,
            test,
            fusion: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticTask {
    pub samples: SampleSet,
    pub splits: SplitAssignment,
    pub stores: RoleStores,
}

fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn cluster_point(rng: &mut ChaCha8Rng, dir: &[f64], half_gap: f64, label: Label) -> Vec<f32> {
    let sign = if label == Label::Hate { 1.0 } else { -1.0 };
    dir.iter()
        .map(|d| (sign * half_gap * d + rng.sample::<f64, _>(StandardNormal)) as f32)
        .collect()
}

/// Balanced labels, unit-variance isotropic clusters at `±separation/2`
/// along a random direction. Emotion vectors are softmaxed noise with a
/// class-dependent shift.
pub fn two_gaussians(spec: &SyntheticSpec) -> Result<SyntheticTask> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.train + spec.validation + spec.test;
    let mut labels: Vec<Label> = (0..n).map(|i| Label::ALL[i % 2]).collect();
    labels.shuffle(&mut rng);
    let digest = instruction_digest();
    let half = spec.separation / 2.0;
    let tweet_dir = unit_vector(&mut rng, spec.dim);
    let context_dir = unit_vector(&mut rng, spec.dim);
    let mut tweet = EmbeddingStore::new("synthetic-gaussian", Pooling::MeanPassthrough, spec.dim, digest)?;
    let mut context = EmbeddingStore::new("synthetic-gaussian-context", Pooling::MeanPassthrough, spec.dim, digest)?;
    let mut emotion = EmbeddingStore::new("synthetic-emotion", Pooling::None, EMOTION_DIM, digest)?;
    let mut samples = Vec::with_capacity(n);
    for (i, &label) in labels.iter().enumerate() {
        let id = format!("syn-{i:06}");
        tweet.insert(id.clone(), cluster_point(&mut rng, &tweet_dir, half, label))?;
        if spec.fusion {
            context.insert(id.clone(), cluster_point(&mut rng, &context_dir, half / 2.0, label))?;
            let shift = if label == Label::Hate { 0.5 } else { 0.0 };
            let logits: Vec<f64> = (0..EMOTION_DIM)
                .map(|k| rng.sample::<f64, _>(StandardNormal) + if k == 3 { shift } else { 0.0 })
                .collect();
            let p = crate::kernel::softmax(&logits);
            emotion.insert(id.clone(), p.into_iter().map(|x| x as f32).collect())?;
        }
        samples.push(Sample {
            text: format!("synthetic sample {i}"),
            id,
            label,
            dataset: Dataset::Synthetic,
            split: None,
        });
    }
    let ids: Vec<String> = samples.iter().map(|s| s.id.clone()).collect();
    let nf = n as f64;
    let splits = SplitAssignment {
        ratios: SplitRatios::new(spec.train as f64 / nf, spec.validation as f64 / nf, spec.test as f64 / nf),
        seed: spec.seed,
        stratified: false,
        author_provided: true,
        train: ids[..spec.train].to_vec(),
        validation: ids[spec.train..spec.train + spec.validation].to_vec(),
        test: ids[spec.train + spec.validation..].to_vec(),
    };
    let stores = RoleStores {
        tweet,
        context: spec.fusion.then_some(context),
        emotion: spec.fusion.then_some(emotion),
    };
    Ok(SyntheticTask {
        samples: SampleSet::new(Dataset::Synthetic, samples)?,
        splits,
        stores,
    })
}
