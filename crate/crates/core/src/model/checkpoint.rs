//! Binary checkpoint format. All integers and floats are little-endian.
//!
//! ```text
//! offset  size  field
//! 0       8     magic "UDACKPT\0"
//! 8       1     version (1)
//! 9       1     head kind: 0 classifier, 1 tagger
//! 10      2     reserved, zero
//! 12      8     vocabulary fingerprint (u64)
//! 20      4     vocab_size (u32)
//! 24      4     embedding dim (u32)
//! 28      4     num_outputs: classes or tags (u32)
//! 32      4     tensor count (u32): 3 classifier, 5 tagger
//! 36      ...   tensors, each: rows (u32), cols (u32), rows*cols f64
//! ```
//!
//! Tensor order: embeddings, then classifier weights and bias (1 x C), or
//! tagger boundary (2 x d), emission (3d x T), emission bias (1 x T) and
//! transitions ((T+2) x (T+2)).

use std::fs;
use std::path::Path;

use super::{Head, Matrix, ModelParameters, TaskKind};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"UDACKPT\0";
pub const VERSION: u8 = 1;

pub fn encode_checkpoint(theta: &ModelParameters, vocab_fingerprint: u64) -> Vec<u8> {
    let mut out = Vec::with_capacity(36 + theta.num_params() * 8 + 64);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(match theta.task() {
        TaskKind::Classification => 0,
        TaskKind::Tagging => 1,
    });
    out.extend_from_slice(&[0, 0]);
    out.extend_from_slice(&vocab_fingerprint.to_le_bytes());
    for v in [theta.vocab_size(), theta.dim(), theta.num_outputs()] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    let shapes = tensor_shapes(theta);
    out.extend_from_slice(&(shapes.len() as u32).to_le_bytes());
    for ((rows, cols), data) in shapes.into_iter().zip(theta.tensors()) {
        out.extend_from_slice(&(rows as u32).to_le_bytes());
        out.extend_from_slice(&(cols as u32).to_le_bytes());
        for v in data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn tensor_shapes(theta: &ModelParameters) -> Vec<(usize, usize)> {
    let mut shapes = vec![theta.embeddings.shape()];
    match &theta.head {
        Head::Classifier { weights, bias } => {
            shapes.push(weights.shape());
            shapes.push((1, bias.len()));
        }
        Head::Tagger {
            boundary,
            emission,
            emission_bias,
            transitions,
        } => {
            shapes.push(boundary.shape());
            shapes.push(emission.shape());
            shapes.push((1, emission_bias.len()));
            shapes.push(transitions.shape());
        }
    }
    shapes
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        b.copy_from_slice(self.take(8)?);
        Ok(u64::from_le_bytes(b))
    }

    fn matrix(&mut self, expect: (usize, usize), name: &str) -> Result<Matrix> {
        let rows = self.u32()?;
        let cols = self.u32()?;
        if (rows, cols) != expect {
            return Err(Error::Checkpoint(format!(
                "{name} is {rows}x{cols}, header implies {}x{}",
                expect.0, expect.1
            )));
        }
        let bytes = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| Error::Checkpoint(format!("{name} size overflows")))?;
        let raw = self.take(bytes)?;
        let data: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Checkpoint(format!("{name} contains non-finite values")));
        }
        Matrix::from_vec(rows, cols, data)
    }
}

/// Decodes a checkpoint, returning the parameters and the vocabulary
/// fingerprint they were trained against.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<(ModelParameters, u64)> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u8()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let kind = r.u8()?;
    if r.take(2)? != [0, 0] {
        return Err(Error::Checkpoint("reserved bytes are not zero".into()));
    }
    let fingerprint = r.u64()?;
    let vocab = r.u32()?;
    let dim = r.u32()?;
    let outputs = r.u32()?;
    let count = r.u32()?;
    if outputs == 0 {
        return Err(Error::Checkpoint("zero outputs".into()));
    }
    let embeddings = r.matrix((vocab, dim), "embeddings")?;
    let head = match (kind, count) {
        (0, 3) => {
            let weights = r.matrix((dim, outputs), "weights")?;
            let bias = r.matrix((1, outputs), "bias")?;
            Head::Classifier {
                weights,
                bias: bias.as_slice().to_vec(),
            }
        }
        (1, 5) => {
            let three_d = dim
                .checked_mul(3)
                .ok_or_else(|| Error::Checkpoint("dim overflows".into()))?;
            let states = outputs
                .checked_add(2)
                .ok_or_else(|| Error::Checkpoint("tag count overflows".into()))?;
            let boundary = r.matrix((2, dim), "boundary")?;
            let emission = r.matrix((three_d, outputs), "emission")?;
            let emission_bias = r.matrix((1, outputs), "emission bias")?;
            let transitions = r.matrix((states, states), "transitions")?;
            Head::Tagger {
                boundary,
                emission,
                emission_bias: emission_bias.as_slice().to_vec(),
                transitions,
            }
        }
        _ => {
            return Err(Error::Checkpoint(format!(
                "head kind {kind} with {count} tensors"
            )))
        }
    };
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    let theta = ModelParameters { embeddings, head };
    theta.validate()?;
    Ok((theta, fingerprint))
}

/// Writes via a temporary file and rename so readers never see a partial
/// checkpoint.
pub fn write_checkpoint(
    path: impl AsRef<Path>,
    theta: &ModelParameters,
    vocab_fingerprint: u64,
) -> Result<()> {
    crate::harness::report::write_atomic(path.as_ref(), &encode_checkpoint(theta, vocab_fingerprint))
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<(ModelParameters, u64)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes).map_err(|e| e.in_file(path))
}
