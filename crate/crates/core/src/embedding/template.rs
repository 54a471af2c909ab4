use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Prefix prepended to every text before it reaches the encoder. The single
/// space after `Query:` is part of the template and of its digest.
pub const INSTRUCTION_PREFIX: &str = "Instruct: classify the following in no hate or hate.\nQuery: ";

pub fn build_instruction_text(raw: &str) -> Result<String> {
    if raw.is_empty() {
        return Err(Error::Validation("cannot build instruction text for empty input".into()));
    }
    let mut s = String::with_capacity(INSTRUCTION_PREFIX.len() + raw.len());
    s.push_str(INSTRUCTION_PREFIX);
    s.push_str(raw);
    Ok(s)
}

pub fn instruction_digest() -> [u8; 32] {
    Sha256::digest(INSTRUCTION_PREFIX.as_bytes()).into()
}

pub fn instruction_digest_hex() -> String {
    hex::encode(instruction_digest())
}
