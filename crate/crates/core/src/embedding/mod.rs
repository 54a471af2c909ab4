//! Instruction template, token pooling, the EMBC embedding cache and the
//! assembly of per-sample feature bundles from role-keyed caches.

mod features;
mod pooling;
mod store;
mod template;

pub use features::{FeatureBundle, Role, RoleStores, EMOTION_CLASSES, EMOTION_DIM};
pub use pooling::{pool_tokens, Pooling};
pub use store::{read_cache, write_cache, EmbeddingStore, StoreMeta, CACHE_MAGIC, CACHE_VERSION};
pub use template::{build_instruction_text, instruction_digest, instruction_digest_hex, INSTRUCTION_PREFIX};
