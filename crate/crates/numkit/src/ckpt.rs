//! Parameter checkpoint files.
//!
//! Layout: the magic string `SDLB1` and a newline, one line of JSON header
//! (`names`, `shapes`, `dtype`, byte `offsets` relative to the payload
//! start), a newline, then the raw little-endian f64 payload.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{NumError, Result, Tensor};

pub const CKPT_MAGIC: &[u8] = b"SDLB1";

#[derive(Serialize, Deserialize)]
struct Header {
    names: Vec<String>,
    shapes: Vec<Vec<usize>>,
    dtype: String,
    offsets: Vec<u64>,
}

pub fn write_checkpoint(path: &Path, entries: &[(String, &Tensor)]) -> Result<()> {
    let mut names = Vec::with_capacity(entries.len());
    let mut shapes = Vec::with_capacity(entries.len());
    let mut offsets = Vec::with_capacity(entries.len());
    let mut offset = 0u64;
    for (name, tensor) in entries {
        names.push(name.clone());
        shapes.push(tensor.shape().to_vec());
        offsets.push(offset);
        offset += (tensor.numel() * 8) as u64;
    }
    let header = Header {
        names,
        shapes,
        dtype: "f64".to_string(),
        offsets,
    };
    let mut buf = Vec::with_capacity(offset as usize + 256);
    buf.extend_from_slice(CKPT_MAGIC);
    buf.push(b'\n');
    serde_json::to_writer(&mut buf, &header)?;
    buf.push(b'\n');
    for (_, tensor) in entries {
        for v in tensor.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Vec<(String, Tensor)>> {
    let bytes = fs::read(path)?;
    let bad = |msg: &str| NumError::Checkpoint {
        msg: format!("{}: {msg}", path.display()),
    };
    if bytes.len() < CKPT_MAGIC.len() + 1 || &bytes[..CKPT_MAGIC.len()] != CKPT_MAGIC {
        return Err(bad("bad magic"));
    }
    let header_start = CKPT_MAGIC.len() + 1;
    let rel_end = bytes[header_start..]
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| bad("missing header terminator"))?;
    let header: Header = serde_json::from_slice(&bytes[header_start..header_start + rel_end])?;
    if header.dtype != "f64" {
        return Err(bad(&format!("unsupported dtype {}", header.dtype)));
    }
    if header.names.len() != header.shapes.len() || header.names.len() != header.offsets.len() {
        return Err(bad("header field lengths disagree"));
    }
    let payload = &bytes[header_start + rel_end + 1..];
    let mut out = Vec::with_capacity(header.names.len());
    for ((name, shape), &offset) in header
        .names
        .into_iter()
        .zip(header.shapes)
        .zip(&header.offsets)
    {
        let numel: usize = shape.iter().product();
        let start = offset as usize;
        let end = start + numel * 8;
        if end > payload.len() {
            return Err(bad(&format!("truncated payload for tensor {name}")));
        }
        let data: Vec<f64> = payload[start..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        out.push((name, Tensor::new(shape, data)?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_bits() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("params.ckpt");
        let a = Tensor::new(vec![2, 3], vec![1.5, -2.25, 0.0, 1e-300, f64::MIN, f64::MAX]).unwrap();
        let b = Tensor::scalar(0.1 + 0.2);
        let entries = vec![("layer.w".to_string(), &a), ("layer.b".to_string(), &b)];
        write_checkpoint(&path, &entries).unwrap();
        let loaded = read_checkpoint(&path).unwrap();
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded[0].0, "layer.w");
        assert_eq!(loaded[0].1.data(), a.data());
        assert_eq!(loaded[1].1.data(), b.data());
    }

    #[test]
    fn rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        fs::write(&path, b"XXXX1\n{}\n").unwrap();
        let err = read_checkpoint(&path).unwrap_err();
        assert!(err.to_string().contains("bad magic"));
    }

    #[test]
    fn rejects_truncated_payload() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trunc.ckpt");
        let t = Tensor::from_slice(&[1.0, 2.0, 3.0, 4.0]);
        write_checkpoint(&path, &[("w".to_string(), &t)]).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        let err = read_checkpoint(&path).unwrap_err();
        assert!(err.to_string().contains("truncated"));
    }
}
