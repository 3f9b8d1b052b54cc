//! Model checkpoints (`PCSIM1`).
//!
//! A magic line, a header `d=<int> lambda=0x<bits> c=0x<bits>` with the raw
//! `f64` bit patterns in hex, then the `d × d` head weights as little-endian
//! `f64`, row-major.

use std::path::Path;

use promptcache_core::{CalibrationParams, ProjectionHead, SimilarityModel};

use crate::error::{read, write, Error, Result};

pub const MAGIC: &[u8] = b"PCSIM1\n";

pub fn encode(model: &SimilarityModel) -> Vec<u8> {
    let calib = model.calibration();
    let mut out = MAGIC.to_vec();
    out.extend(
        format!(
            "d={} lambda=0x{:016x} c=0x{:016x}\n",
            model.dim(),
            calib.lambda().to_bits(),
            calib.c().to_bits()
        )
        .bytes(),
    );
    for w in model.head().weights() {
        out.extend(w.to_le_bytes());
    }
    out
}

pub fn decode(path: &Path, bytes: &[u8]) -> Result<SimilarityModel> {
    let fail = |m: String| Error::format(path, m);
    let rest = bytes
        .strip_prefix(MAGIC)
        .ok_or_else(|| fail("bad magic, expected \"PCSIM1\"".into()))?;
    let end = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| fail("header line is not terminated".into()))?;
    let header = std::str::from_utf8(&rest[..end]).map_err(|_| fail("header is not UTF-8".into()))?;
    let (dim, lambda, c) = parse_header(header).ok_or_else(|| fail(format!("malformed header {header:?}")))?;

    let payload = &rest[end + 1..];
    let expected = dim
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| fail(format!("dimension {dim} too large")))?;
    if payload.len() != expected {
        return Err(fail(format!(
            "expected {expected} weight bytes for d={dim}, found {}",
            payload.len()
        )));
    }
    let weights = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let head = ProjectionHead::from_weights(dim, weights).map_err(|e| fail(e.to_string()))?;
    let calib = CalibrationParams::new(lambda, c).map_err(|e| fail(e.to_string()))?;
    Ok(SimilarityModel::new(head, calib))
}

fn parse_header(header: &str) -> Option<(usize, f64, f64)> {
    let mut parts = header.split(' ');
    let d = parts.next()?.strip_prefix("d=")?.parse().ok()?;
    let lambda = hex_f64(parts.next()?.strip_prefix("lambda=")?)?;
    let c = hex_f64(parts.next()?.strip_prefix("c=")?)?;
    parts.next().is_none().then_some((d, lambda, c))
}

fn hex_f64(s: &str) -> Option<f64> {
    let digits = s.strip_prefix("0x")?;
    if digits.len() != 16 {
        return None;
    }
    u64::from_str_radix(digits, 16).ok().map(f64::from_bits)
}

pub fn save(path: &Path, model: &SimilarityModel) -> Result<()> {
    write(path, encode(model))
}

pub fn load(path: &Path) -> Result<SimilarityModel> {
    decode(path, &read(path)?)
}
