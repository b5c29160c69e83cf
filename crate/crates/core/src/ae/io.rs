//! Weight file persistence.
//!
//! Format (all integers little-endian u32, floats little-endian f64):
//! magic `AEW1`; version (=1); layer_count; per layer: rows, cols,
//! activation tag (0 = ReLU, 1 = linear), rows×cols row-major weights,
//! then `rows` bias values (the layer's output width). Encoder layers
//! first, then decoder layers (split evenly). A CRC-32 of all preceding
//! bytes terminates the file.

use super::{Activation, AeError, DenseLayer, MlpParams};
use ndarray::{Array1, Array2};
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

const MAGIC: &[u8; 4] = b"AEW1";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum WeightIoError {
    #[error("bad magic bytes (not a weight file)")]
    BadMagic,
    #[error("unsupported weight file version {0}")]
    VersionMismatch(u32),
    #[error("weight file truncated")]
    Truncated,
    #[error("checksum mismatch (file corrupted)")]
    ChecksumMismatch,
    #[error("unknown activation tag {0}")]
    BadActivation(u32),
    #[error("layer dimension chain broken: expected input width {expected}, got {got}")]
    DimensionChain { expected: usize, got: usize },
    #[error("layer count {0} is not an even encoder/decoder split")]
    OddLayerCount(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Ae(#[from] AeError),
}

fn encode(params: &MlpParams) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    let count = (params.encoder.len() + params.decoder.len()) as u32;
    buf.extend_from_slice(&count.to_le_bytes());
    for layer in params.encoder.iter().chain(&params.decoder) {
        buf.extend_from_slice(&(layer.output_width() as u32).to_le_bytes());
        buf.extend_from_slice(&(layer.input_width() as u32).to_le_bytes());
        let tag: u32 = match layer.activation {
            Activation::Relu => 0,
            Activation::Linear => 1,
        };
        buf.extend_from_slice(&tag.to_le_bytes());
        for v in layer.weights.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for v in layer.bias.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WeightIoError> {
        if self.pos + n > self.data.len() {
            return Err(WeightIoError::Truncated);
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, WeightIoError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, WeightIoError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn decode(data: &[u8]) -> Result<MlpParams, WeightIoError> {
    if data.len() < 4 {
        return Err(WeightIoError::Truncated);
    }
    if &data[..4] != MAGIC {
        return Err(WeightIoError::BadMagic);
    }
    if data.len() < 4 + 4 {
        return Err(WeightIoError::Truncated);
    }
    // checksum covers everything before the trailing 4 bytes
    let body = &data[..data.len() - 4];
    let stored = u32::from_le_bytes(data[data.len() - 4..].try_into().unwrap());
    if crc32fast::hash(body) != stored {
        return Err(WeightIoError::ChecksumMismatch);
    }

    let mut cur = Cursor {
        data: body,
        pos: 4,
    };
    let version = cur.u32()?;
    if version != VERSION {
        return Err(WeightIoError::VersionMismatch(version));
    }
    let count = cur.u32()?;
    if count % 2 != 0 || count == 0 {
        return Err(WeightIoError::OddLayerCount(count));
    }
    let mut layers = Vec::with_capacity(count as usize);
    let mut prev_out: Option<usize> = None;
    for _ in 0..count {
        let rows = cur.u32()? as usize;
        let cols = cur.u32()? as usize;
        let activation = match cur.u32()? {
            0 => Activation::Relu,
            1 => Activation::Linear,
            t => return Err(WeightIoError::BadActivation(t)),
        };
        if let Some(p) = prev_out {
            if cols != p {
                return Err(WeightIoError::DimensionChain {
                    expected: p,
                    got: cols,
                });
            }
        }
        let mut weights = Array2::zeros((rows, cols));
        for r in 0..rows {
            for c in 0..cols {
                weights[[r, c]] = cur.f64()?;
            }
        }
        let mut bias = Array1::zeros(rows);
        for r in 0..rows {
            bias[r] = cur.f64()?;
        }
        prev_out = Some(rows);
        layers.push(DenseLayer {
            weights,
            bias,
            activation,
        });
    }
    if cur.pos != body.len() {
        return Err(WeightIoError::Truncated);
    }
    let half = layers.len() / 2;
    let decoder = layers.split_off(half);
    Ok(MlpParams {
        encoder: layers,
        decoder,
    })
}

/// Writes the weight file; bit-exact round trip with [`load_weights`].
pub fn save_weights(params: &MlpParams, path: &Path) -> Result<(), WeightIoError> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode(params))?;
    Ok(())
}

pub fn load_weights(path: &Path) -> Result<MlpParams, WeightIoError> {
    let mut data = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut data)?;
    decode(&data)
}
