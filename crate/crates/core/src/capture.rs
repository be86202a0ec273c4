//! `RBT1` capture files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      4 bytes  "RBT1"
//! version    u16      1
//! frames     u32      P
//! bins       u32      N
//! meta_len   u32      length of the metadata block
//! metadata   meta_len bytes of UTF-8 JSON (radar config, digest, seed, annotations)
//! samples    P·N pairs of f32 (re, im), frame-major
//! ```

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radar::{FrameCapture, RadarConfig};

pub const MAGIC: [u8; 4] = *b"RBT1";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 4 + 2 + 4 + 4 + 4;

/// Upper bound on the metadata block accepted by the decoder.
pub const MAX_METADATA_LEN: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaptureMetadata {
    pub radar: RadarConfig,
    #[serde(default)]
    pub scenario_digest: Option<String>,
    pub seed: u64,
    #[serde(default)]
    pub t0: f64,
    #[serde(default)]
    pub annotations: BTreeMap<String, String>,
}

pub fn encode(capture: &FrameCapture) -> Result<Vec<u8>> {
    capture.validate()?;
    let meta = CaptureMetadata {
        radar: capture.config,
        scenario_digest: capture.scenario_digest.clone(),
        seed: capture.seed,
        t0: capture.t0,
        annotations: capture.annotations.clone(),
    };
    let meta = serde_json::to_vec(&meta)?;
    let frames = u32::try_from(capture.frames)
        .map_err(|_| Error::invalid("capture.frames", "exceeds u32"))?;
    let bins =
        u32::try_from(capture.bins).map_err(|_| Error::invalid("capture.bins", "exceeds u32"))?;
    let meta_len =
        u32::try_from(meta.len()).map_err(|_| Error::invalid("capture.metadata", "too large"))?;

    let mut out = Vec::with_capacity(HEADER_LEN + meta.len() + capture.samples.len() * 8);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&frames.to_le_bytes());
    out.extend_from_slice(&bins.to_le_bytes());
    out.extend_from_slice(&meta_len.to_le_bytes());
    out.extend_from_slice(&meta);
    for s in &capture.samples {
        out.extend_from_slice(&(s.re as f32).to_le_bytes());
        out.extend_from_slice(&(s.im as f32).to_le_bytes());
    }
    Ok(out)
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptCapture(msg.into())
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

/// Parses a capture, rejecting anything whose lengths, metadata, or samples
/// do not line up exactly.
pub fn decode(bytes: &[u8]) -> Result<FrameCapture> {
    if bytes.len() < HEADER_LEN {
        return Err(corrupt(format!(
            "{} bytes is shorter than the header",
            bytes.len()
        )));
    }
    if bytes[..4] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(corrupt(format!("unsupported version {version}")));
    }
    let frames = u32_at(bytes, 6) as usize;
    let bins = u32_at(bytes, 10) as usize;
    let meta_len = u32_at(bytes, 14) as usize;
    if meta_len > MAX_METADATA_LEN {
        return Err(corrupt(format!("metadata length {meta_len} too large")));
    }
    let sample_bytes = frames
        .checked_mul(bins)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| corrupt("sample count overflows"))?;
    let expected = HEADER_LEN + meta_len + sample_bytes;
    if bytes.len() != expected {
        return Err(corrupt(format!(
            "expected {expected} bytes, found {}",
            bytes.len()
        )));
    }
    let meta_bytes = &bytes[HEADER_LEN..HEADER_LEN + meta_len];
    let meta: CaptureMetadata =
        serde_json::from_slice(meta_bytes).map_err(|e| corrupt(format!("metadata: {e}")))?;
    meta.radar
        .validate()
        .map_err(|e| corrupt(format!("metadata: {e}")))?;
    if meta.radar.num_bins() != bins {
        return Err(corrupt(format!(
            "header has {bins} bins but radar grid has {}",
            meta.radar.num_bins()
        )));
    }
    if frames == 0 {
        return Err(corrupt("no frames"));
    }
    if !meta.t0.is_finite() {
        return Err(corrupt("non-finite t0"));
    }
    let samples: Vec<Complex64> = bytes[HEADER_LEN + meta_len..]
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes(c[..4].try_into().expect("4 bytes"));
            let im = f32::from_le_bytes(c[4..].try_into().expect("4 bytes"));
            Complex64::new(re as f64, im as f64)
        })
        .collect();
    if samples
        .iter()
        .any(|s| !(s.re.is_finite() && s.im.is_finite()))
    {
        return Err(corrupt("non-finite sample"));
    }
    Ok(FrameCapture {
        samples,
        frames,
        bins,
        config: meta.radar,
        t0: meta.t0,
        seed: meta.seed,
        scenario_digest: meta.scenario_digest,
        annotations: meta.annotations,
    })
}

pub fn write_to<W: Write>(capture: &FrameCapture, mut w: W) -> Result<()> {
    w.write_all(&encode(capture)?)?;
    Ok(())
}

pub fn read_from<R: Read>(mut r: R) -> Result<FrameCapture> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode(&bytes)
}

pub fn save(capture: &FrameCapture, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode(capture)?)?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<FrameCapture> {
    decode(&std::fs::read(path)?)
}
