//! Multi-head scaled dot-product attention driven by a single learnable
//! query vector that is shared by every source sequence.
//!
//! For each source, keys and values are affine projections of the source
//! rows; head `h` attends with the `h`-th slice of the query, and the
//! concatenated head outputs pass through an output projection.

use rand::Rng;

use super::ops::{softmax, softmax_backward, Dense};
use super::params::{Grads, ParamId, ParamStore};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttentionProjections {
    pub key: Dense,
    pub value: Dense,
    pub out: Dense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SharedQueryAttention {
    pub query: ParamId,
    pub heads: usize,
    pub dim: usize,
    /// One entry when projections are shared, otherwise one per source.
    pub projections: Vec<AttentionProjections>,
}

/// Intermediates kept from the forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionCache {
    pub keys: Vec<Vec<f64>>,
    pub values: Vec<Vec<f64>>,
    /// `heads × positions` attention weights.
    pub weights: Vec<Vec<f64>>,
    /// Concatenated head outputs before the output projection.
    pub mixed: Vec<f64>,
}

impl SharedQueryAttention {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        source_dims: &[usize],
        dim: usize,
        heads: usize,
        shared: bool,
        rng: &mut R,
    ) -> Result<Self> {
        if heads == 0 || dim == 0 || !dim.is_multiple_of(heads) {
            return Err(Error::Config(format!(
                "attention dimension {dim} must be a positive multiple of {heads} heads"
            )));
        }
        if source_dims.is_empty() {
            return Err(Error::Config("attention needs at least one source".into()));
        }
        if shared && source_dims.iter().any(|d| *d != source_dims[0]) {
            return Err(Error::Config(format!(
                "shared projections need equal source widths, got {source_dims:?}"
            )));
        }
        let bound = 1.0 / (dim as f64).sqrt();
        let q = (0..dim).map(|_| rng.random_range(-bound..bound)).collect();
        let query = store.add(format!("{name}.query"), vec![dim], q);
        let n_proj = if shared { 1 } else { source_dims.len() };
        let projections = (0..n_proj)
            .map(|i| {
                let prefix = if shared { name.to_string() } else { format!("{name}.src{i}") };
                AttentionProjections {
                    key: Dense::new(store, &format!("{prefix}.key"), source_dims[i], dim, rng),
                    value: Dense::new(store, &format!("{prefix}.value"), source_dims[i], dim, rng),
                    out: Dense::new(store, &format!("{prefix}.out"), dim, dim, rng),
                }
            })
            .collect();
        Ok(SharedQueryAttention {
            query,
            heads,
            dim,
            projections,
        })
    }

    pub fn projections_for(&self, source: usize) -> &AttentionProjections {
        if self.projections.len() == 1 {
            &self.projections[0]
        } else {
            &self.projections[source]
        }
    }

    fn head_dim(&self) -> usize {
        self.dim / self.heads
    }

    pub fn forward(&self, p: &ParamStore, source: usize, rows: &[Vec<f64>]) -> (Vec<f64>, AttentionCache) {
        let proj = self.projections_for(source);
        let q = p.values(self.query);
        let dh = self.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();
        let keys: Vec<Vec<f64>> = rows.iter().map(|r| proj.key.forward(p, r)).collect();
        let values: Vec<Vec<f64>> = rows.iter().map(|r| proj.value.forward(p, r)).collect();
        let mut weights = Vec::with_capacity(self.heads);
        let mut mixed = vec![0.0; self.dim];
        for h in 0..self.heads {
            let s = h * dh..(h + 1) * dh;
            let scores: Vec<f64> = keys
                .iter()
                .map(|k| scale * q[s.clone()].iter().zip(&k[s.clone()]).map(|(a, b)| a * b).sum::<f64>())
                .collect();
            let w = softmax(&scores);
            for (wi, v) in w.iter().zip(&values) {
                for (m, vv) in mixed[s.clone()].iter_mut().zip(&v[s.clone()]) {
                    *m += wi * vv;
                }
            }
            weights.push(w);
        }
        let out = proj.out.forward(p, &mixed);
        (
            out,
            AttentionCache {
                keys,
                values,
                weights,
                mixed,
            },
        )
    }

    /// Accumulates parameter gradients. Source rows are frozen features, so no
    /// input gradient is produced.
    pub fn backward(
        &self,
        p: &ParamStore,
        g: &mut Grads,
        source: usize,
        rows: &[Vec<f64>],
        cache: &AttentionCache,
        dout: &[f64],
    ) {
        let proj = self.projections_for(source);
        let q = p.values(self.query);
        let dh = self.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();
        let dmixed = proj.out.backward(p, g, &cache.mixed, dout, true);
        let n = rows.len();
        let mut dq = vec![0.0; self.dim];
        let mut dkeys = vec![vec![0.0; self.dim]; n];
        let mut dvalues = vec![vec![0.0; self.dim]; n];
        for h in 0..self.heads {
            let s = h * dh..(h + 1) * dh;
            let w = &cache.weights[h];
            let mut dw = vec![0.0; n];
            for i in 0..n {
                let v = &cache.values[i][s.clone()];
                dw[i] = dmixed[s.clone()].iter().zip(v).map(|(a, b)| a * b).sum();
                for (dv, dm) in dvalues[i][s.clone()].iter_mut().zip(&dmixed[s.clone()]) {
                    *dv += w[i] * dm;
                }
            }
            let dscores = softmax_backward(w, &dw);
            for i in 0..n {
                let ds = dscores[i] * scale;
                for j in s.clone() {
                    dq[j] += ds * cache.keys[i][j];
                    dkeys[i][j] += ds * q[j];
                }
            }
        }
        for (gq, d) in g.slot(self.query).iter_mut().zip(&dq) {
            *gq += d;
        }
        for i in 0..n {
            proj.key.backward(p, g, &rows[i], &dkeys[i], false);
            proj.value.backward(p, g, &rows[i], &dvalues[i], false);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn build(shared: bool) -> (ParamStore, SharedQueryAttention) {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let att = SharedQueryAttention::new(&mut store, "att", &[6, 6], 8, 4, shared, &mut rng).unwrap();
        (store, att)
    }

    fn rows(seed: u64, n: usize, d: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
    }

    #[test]
    fn weights_are_distributions() {
        let (store, att) = build(true);
        let (_, cache) = att.forward(&store, 0, &rows(1, 5, 6));
        assert_eq!(cache.weights.len(), 4);
        for w in &cache.weights {
            assert!(w.iter().all(|v| *v >= 0.0));
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn identical_positions_attend_uniformly() {
        let (store, att) = build(true);
        let row = rows(2, 1, 6).remove(0);
        let seq = vec![row.clone(); 4];
        let (out, cache) = att.forward(&store, 0, &seq);
        for w in &cache.weights {
            for v in w {
                assert!((v - 0.25).abs() < 1e-12);
            }
        }
        let proj = att.projections_for(0);
        let expected = proj.out.forward(&store, &proj.value.forward(&store, &row));
        for (a, b) in out.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_weights_average_value_projections() {
        // Zero key weights and biases make every score zero.
        let (mut store, att) = build(true);
        let key = att.projections_for(0).key;
        for id in [key.weight, key.bias] {
            store.as_mut_slice()[id.index()].values.iter_mut().for_each(|v| *v = 0.0);
        }
        let seq = rows(5, 3, 6);
        let (out, _) = att.forward(&store, 0, &seq);
        let mean: Vec<f64> = (0..6).map(|j| seq.iter().map(|r| r[j]).sum::<f64>() / 3.0).collect();
        let proj = att.projections_for(0);
        let expected = proj.out.forward(&store, &proj.value.forward(&store, &mean));
        for (a, b) in out.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn separate_projections_per_source() {
        let (store, att) = build(false);
        assert_eq!(att.projections.len(), 2);
        let x = rows(3, 2, 6);
        let (a, _) = att.forward(&store, 0, &x);
        let (b, _) = att.forward(&store, 1, &x);
        assert_ne!(a, b);
    }

    #[test]
    fn rejects_bad_head_split() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(SharedQueryAttention::new(&mut store, "a", &[4], 6, 4, true, &mut rng).is_err());
        assert!(SharedQueryAttention::new(&mut store, "a", &[4, 5], 8, 4, true, &mut rng).is_err());
    }
}
