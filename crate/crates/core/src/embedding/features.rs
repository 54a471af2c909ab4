use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::pooling::Pooling;
use super::store::{read_cache, EmbeddingStore, StoreMeta};
use crate::error::{Error, Result};

/// Emotion classes in cache order.
pub const EMOTION_CLASSES: [&str; 7] = ["fear", "disgust", "surprise", "anger", "sadness", "joy", "other"];
pub const EMOTION_DIM: usize = EMOTION_CLASSES.len();

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Tweet,
    Context,
    Emotion,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Tweet => "tweet",
            Role::Context => "context",
            Role::Emotion => "emotion",
        }
    }
}

/// Per-sample inputs of a classifier, promoted to f64.
///
/// `tweet` and `context` are position × feature matrices; pooled caches give
/// a single row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBundle {
    pub tweet: Vec<Vec<f64>>,
    pub context: Option<Vec<Vec<f64>>>,
    pub emotion: Option<Vec<f64>>,
}

impl FeatureBundle {
    pub fn pooled(tweet: Vec<f64>) -> Self {
        FeatureBundle {
            tweet: vec![tweet],
            context: None,
            emotion: None,
        }
    }

    pub fn with_context(mut self, context: Vec<f64>) -> Self {
        self.context = Some(vec![context]);
        self
    }

    pub fn with_emotion(mut self, emotion: Vec<f64>) -> Self {
        self.emotion = Some(emotion);
        self
    }

    /// Nonnegative entries summing to one within 1e-5.
    pub fn check_emotion(emotion: &[f64]) -> Result<()> {
        if emotion.len() != EMOTION_DIM {
            return Err(Error::Shape(format!(
                "emotion vector has {} entries, expected {EMOTION_DIM}",
                emotion.len()
            )));
        }
        let sum: f64 = emotion.iter().sum();
        if emotion.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (sum - 1.0).abs() > 1e-5 {
            return Err(Error::Validation(format!(
                "emotion vector is not a probability distribution (sum {sum})"
            )));
        }
        Ok(())
    }
}

/// Caches keyed by role. Only the tweet cache is mandatory.
#[derive(Debug, Clone)]
pub struct RoleStores {
    pub tweet: EmbeddingStore,
    pub context: Option<EmbeddingStore>,
    pub emotion: Option<EmbeddingStore>,
}

impl RoleStores {
    pub fn tweet_only(tweet: EmbeddingStore) -> Self {
        RoleStores {
            tweet,
            context: None,
            emotion: None,
        }
    }

    /// Loads each configured role from disk.
    pub fn load(paths: &BTreeMap<Role, impl AsRef<Path>>) -> Result<Self> {
        let load = |role: Role| paths.get(&role).map(|p| read_cache(p.as_ref())).transpose();
        let tweet = load(Role::Tweet)?.ok_or(Error::MissingFeature("tweet"))?;
        Ok(RoleStores {
            tweet,
            context: load(Role::Context)?,
            emotion: load(Role::Emotion)?,
        })
    }

    pub fn get(&self, role: Role) -> Option<&EmbeddingStore> {
        match role {
            Role::Tweet => Some(&self.tweet),
            Role::Context => self.context.as_ref(),
            Role::Emotion => self.emotion.as_ref(),
        }
    }

    fn require(&self, role: Role) -> Result<&EmbeddingStore> {
        self.get(role).ok_or(Error::MissingFeature(role.name()))
    }

    pub fn meta(&self) -> BTreeMap<Role, StoreMeta> {
        [Role::Tweet, Role::Context, Role::Emotion]
            .into_iter()
            .filter_map(|r| self.get(r).map(|s| (r, s.meta())))
            .collect()
    }

    /// Assembles bundles for `ids` using the listed roles. Every missing id is
    /// collected into a single lookup error.
    pub fn bundles(&self, ids: &[String], roles: &[Role]) -> Result<Vec<FeatureBundle>> {
        let stores: Vec<(Role, &EmbeddingStore)> = roles
            .iter()
            .map(|&r| self.require(r).map(|s| (r, s)))
            .collect::<Result<_>>()?;
        if let Some((_, s)) = stores.iter().find(|(r, s)| *r == Role::Emotion && s.dim() != EMOTION_DIM) {
            return Err(Error::Shape(format!(
                "emotion cache has dimension {}, expected {EMOTION_DIM}",
                s.dim()
            )));
        }
        let mut missing = Vec::new();
        let mut out = Vec::with_capacity(ids.len());
        for id in ids {
            let mut bundle = FeatureBundle {
                tweet: Vec::new(),
                context: None,
                emotion: None,
            };
            let mut ok = true;
            for (role, store) in &stores {
                let Some(rows) = rows_for(store, id) else {
                    missing.push(format!("{}:{id}", role.name()));
                    ok = false;
                    continue;
                };
                match role {
                    Role::Tweet => bundle.tweet = rows,
                    Role::Context => bundle.context = Some(rows),
                    Role::Emotion => {
                        if rows.len() != 1 {
                            return Err(Error::Shape(format!("emotion for {id:?} must be a single vector")));
                        }
                        let e = rows.into_iter().next().unwrap();
                        FeatureBundle::check_emotion(&e)
                            .map_err(|err| Error::Validation(format!("sample {id:?}: {err}")))?;
                        bundle.emotion = Some(e);
                    }
                }
            }
            if ok {
                out.push(bundle);
            }
        }
        if !missing.is_empty() {
            return Err(Error::Lookup { ids: missing });
        }
        Ok(out)
    }
}

/// One row for pooled records. Stores with pooling `none` may instead hold
/// token rows under `"{id}#0"`, `"{id}#1"`, ...
fn rows_for(store: &EmbeddingStore, id: &str) -> Option<Vec<Vec<f64>>> {
    let widen = |v: &[f32]| v.iter().map(|x| *x as f64).collect::<Vec<f64>>();
    if let Ok(v) = store.lookup(id) {
        return Some(vec![widen(v)]);
    }
    if store.pooling() != Pooling::None {
        return None;
    }
    let rows: Vec<Vec<f64>> = (0..)
        .map_while(|k| store.lookup(&format!("{id}#{k}")).ok().map(widen))
        .collect();
    (!rows.is_empty()).then_some(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::instruction_digest;

    fn store(pooling: Pooling, dim: usize, recs: &[(&str, Vec<f32>)]) -> EmbeddingStore {
        let mut s = EmbeddingStore::new("m", pooling, dim, instruction_digest()).unwrap();
        for (id, v) in recs {
            s.insert(*id, v.clone()).unwrap();
        }
        s
    }

    #[test]
    fn missing_ids_are_all_reported() {
        let rs = RoleStores::tweet_only(store(Pooling::NormalizedSum, 2, &[("a", vec![1.0, 0.0])]));
        let err = rs
            .bundles(&["a".into(), "b".into(), "c".into()], &[Role::Tweet])
            .unwrap_err();
        match err {
            Error::Lookup { ids } => assert_eq!(ids, vec!["tweet:b", "tweet:c"]),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn fusion_roles_are_required() {
        let rs = RoleStores::tweet_only(store(Pooling::NormalizedSum, 2, &[("a", vec![1.0, 0.0])]));
        assert!(matches!(
            rs.bundles(&["a".into()], &[Role::Tweet, Role::Context]),
            Err(Error::MissingFeature("context"))
        ));
    }

    #[test]
    fn emotion_must_be_simplex() {
        let mut rs = RoleStores::tweet_only(store(Pooling::NormalizedSum, 1, &[("a", vec![1.0])]));
        rs.emotion = Some(store(Pooling::None, 7, &[("a", vec![0.5, 0.5, 0.5, 0.0, 0.0, 0.0, 0.0])]));
        assert!(matches!(
            rs.bundles(&["a".into()], &[Role::Tweet, Role::Emotion]),
            Err(Error::Validation(_))
        ));
        rs.emotion = Some(store(Pooling::None, 7, &[("a", vec![0.25, 0.25, 0.5, 0.0, 0.0, 0.0, 0.0])]));
        let b = rs.bundles(&["a".into()], &[Role::Tweet, Role::Emotion]).unwrap();
        assert_eq!(b[0].emotion.as_ref().unwrap()[2], 0.5);
    }

    #[test]
    fn token_rows_for_unpooled_stores() {
        let s = store(Pooling::None, 2, &[("x#0", vec![1.0, 2.0]), ("x#1", vec![3.0, 4.0]), ("y", vec![5.0, 6.0])]);
        let rs = RoleStores::tweet_only(s);
        let b = rs.bundles(&["x".into(), "y".into()], &[Role::Tweet]).unwrap();
        assert_eq!(b[0].tweet, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(b[1].tweet, vec![vec![5.0, 6.0]]);
    }
}
