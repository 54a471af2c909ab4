//! Binary parameter blob: for each tensor, `name_len u16 | name | rank u8 |
//! rank × u32 dims | values f64`, all little-endian, tensors back to back.

use super::params::Parameter;
use crate::error::{Error, Result};

pub fn params_to_blob(params: &[Parameter]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for p in params {
        if p.name.len() > u16::MAX as usize || p.shape.len() > u8::MAX as usize {
            return Err(Error::Validation(format!("tensor {} cannot be encoded", p.name)));
        }
        out.extend_from_slice(&(p.name.len() as u16).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        out.push(p.shape.len() as u8);
        for d in &p.shape {
            let d = u32::try_from(*d).map_err(|_| Error::Validation(format!("dimension {d} too large")))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in &p.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn params_from_blob(bytes: &[u8]) -> Result<Vec<Parameter>> {
    let mut pos = 0;
    let mut out = Vec::new();
    let take = |pos: &mut usize, n: usize, what: &str| -> Result<&[u8]> {
        let s = bytes
            .get(*pos..*pos + n)
            .ok_or_else(|| Error::Format {
                path: "parameter blob".into(),
                msg: format!("truncated while reading {what} at byte {pos}"),
            })?;
        *pos += n;
        Ok(s)
    };
    while pos < bytes.len() {
        let name_len = u16::from_le_bytes(take(&mut pos, 2, "name length")?.try_into().unwrap()) as usize;
        let name = std::str::from_utf8(take(&mut pos, name_len, "name")?)
            .map_err(|_| Error::Format {
                path: "parameter blob".into(),
                msg: "tensor name is not UTF-8".into(),
            })?
            .to_string();
        let rank = take(&mut pos, 1, "rank")?[0] as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(u32::from_le_bytes(take(&mut pos, 4, "shape")?.try_into().unwrap()) as usize);
        }
        let n: usize = shape.iter().product();
        let values = take(&mut pos, 8 * n, "values")?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        out.push(Parameter::new(name, shape, values)?);
    }
    Ok(out)
}
