//! Model checkpoints.
//!
//! A checkpoint is an ASCII header followed by the raw parameters:
//!
//! ```text
//! SMILEYNET-CKPT 1
//! architecture=<linear | mlp:H>
//! scheme=<raw | count | parity | count_parity>
//! width=<W>
//! height=<H>
//! seed=<u64>
//! param_count=<N>
//! end
//! <N little-endian IEEE-754 f64 values>
//! ```
//!
//! Header lines end in a single LF. Parameters round-trip bit for bit.

use std::fs;
use std::path::Path;

use super::{Architecture, FeatureScheme, ModelState};
use crate::error::{Error, Result};

const MAGIC: &str = "SMILEYNET-CKPT 1";

pub fn encode_checkpoint(model: &ModelState) -> Vec<u8> {
    let header = format!(
        "{MAGIC}\narchitecture={}\nscheme={}\nwidth={}\nheight={}\nseed={}\nparam_count={}\nend\n",
        model.architecture,
        model.scheme.name(),
        model.width,
        model.height,
        model.seed,
        model.params.len()
    );
    let mut out = header.into_bytes();
    for p in &model.params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

/// Parses a checkpoint; errors carry the 1-based header line.
pub fn decode_checkpoint(bytes: &[u8]) -> std::result::Result<ModelState, (u64, String)> {
    let mut pos = 0;
    let mut lines = Vec::new();
    while lines.last() != Some(&"end") {
        let rest = &bytes[pos..];
        let nl = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or((lines.len() as u64 + 1, "truncated header".to_string()))?;
        let line = std::str::from_utf8(&rest[..nl])
            .map_err(|_| (lines.len() as u64 + 1, "header is not UTF-8".to_string()))?;
        lines.push(line);
        pos += nl + 1;
        if lines.len() > 16 {
            return Err((lines.len() as u64, "header has no end line".into()));
        }
    }
    if lines[0] != MAGIC {
        return Err((1, format!("bad magic, expected {MAGIC:?}")));
    }
    let field = |idx: usize, key: &str| -> std::result::Result<&str, (u64, String)> {
        let line_no = idx as u64 + 1;
        lines
            .get(idx)
            .and_then(|l| l.strip_prefix(key))
            .and_then(|l| l.strip_prefix('='))
            .ok_or((line_no, format!("expected {key}=...")))
    };
    let num = |idx: usize, key: &str| -> std::result::Result<u64, (u64, String)> {
        field(idx, key)?
            .parse()
            .map_err(|_| (idx as u64 + 1, format!("{key} is not an integer")))
    };
    let architecture: Architecture = field(1, "architecture")?
        .parse()
        .map_err(|e: Error| (2, e.to_string()))?;
    let scheme: FeatureScheme = field(2, "scheme")?
        .parse()
        .map_err(|e: Error| (3, e.to_string()))?;
    let width = num(3, "width")? as usize;
    let height = num(4, "height")? as usize;
    let seed = num(5, "seed")?;
    let count = num(6, "param_count")? as usize;
    if lines.len() != 8 {
        return Err((8, "expected end after param_count".into()));
    }

    let mut model = ModelState::zeros(architecture, scheme, width, height, seed)
        .map_err(|e| (4, e.to_string()))?;
    if model.params.len() != count {
        return Err((
            7,
            format!(
                "param_count {count} does not match {architecture} on {} features ({})",
                model.input_dim(),
                model.params.len()
            ),
        ));
    }
    let body = &bytes[pos..];
    if body.len() != count * 8 {
        return Err((
            9,
            format!(
                "expected {} parameter bytes, found {}",
                count * 8,
                body.len()
            ),
        ));
    }
    for (p, chunk) in model.params.iter_mut().zip(body.chunks_exact(8)) {
        *p = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
    }
    Ok(model)
}

pub fn write_checkpoint(model: &ModelState, path: &Path) -> Result<()> {
    fs::write(path, encode_checkpoint(model)).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<ModelState> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes).map_err(|(line, msg)| Error::data(path, Some(line), msg))
}
