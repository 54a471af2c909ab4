use std::fs;
use std::path::Path;

use super::{Dataset, Sample, SampleSet};
use crate::error::{Error, Result};
use crate::io::write_atomic;

/// One compact JSON object per line, LF terminated.
pub fn samples_to_jsonl(samples: &[Sample]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for s in samples {
        serde_json::to_writer(&mut out, s).map_err(|e| Error::json("sample", e))?;
        out.push(b'\n');
    }
    Ok(out)
}

pub fn write_samples_jsonl(samples: &[Sample], path: &Path) -> Result<()> {
    let bytes = samples_to_jsonl(samples)?;
    write_atomic(path, |w| w.write_all(&bytes))
}

/// Reads a canonical JSONL file. All records must share one dataset tag.
pub fn read_samples_jsonl(path: &Path) -> Result<SampleSet> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut samples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let s: Sample = serde_json::from_str(line).map_err(|e| Error::Ingest {
            path: path.display().to_string(),
            row: i + 1,
            msg: e.to_string(),
        })?;
        samples.push(s);
    }
    let source = samples.first().map(|s| s.dataset).unwrap_or(Dataset::Ihc);
    if let Some(other) = samples.iter().find(|s| s.dataset != source) {
        return Err(Error::Validation(format!(
            "{}: mixed datasets ({} and {})",
            path.display(),
            source,
            other.dataset
        )));
    }
    SampleSet::new(source, samples)
}
