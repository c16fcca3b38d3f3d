//! Flat binary model dump.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   "FWLMODEL"            8 bytes
//! version u32                   currently 1
//! arch u8, activation u8
//! input_dim u32, hidden u32, depth u32, mlp_depth u32
//! gin_eps f32 bits u32, seed u64
//! per MP layer:
//!     aggregation u8 (0 = sum, 1 = gcn), self_weight f32 bits u32, stage count u32
//!     per stage: activation u8, rows u32, cols u32, rows*cols binary32 words
//! ```

use std::fs;
use std::path::Path;

use super::{Activation, Aggregation, Architecture, GnnModel, Matrix32, ModelSpec, MpLayer, Stage};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"FWLMODEL";
pub const MODEL_FORMAT_VERSION: u32 = 1;

impl GnnModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, MODEL_FORMAT_VERSION);
        out.push(self.spec.architecture.code());
        out.push(self.spec.activation.code());
        put_u32(&mut out, self.spec.input_dim as u32);
        put_u32(&mut out, self.spec.hidden as u32);
        put_u32(&mut out, self.spec.depth as u32);
        put_u32(&mut out, self.spec.mlp_depth as u32);
        put_u32(&mut out, self.spec.gin_eps.to_bits());
        out.extend_from_slice(&self.seed.to_le_bytes());
        for layer in &self.layers {
            match layer.aggregation {
                Aggregation::Sum { self_weight } => {
                    out.push(0);
                    put_u32(&mut out, self_weight.to_bits());
                }
                Aggregation::GcnNorm => {
                    out.push(1);
                    put_u32(&mut out, 0);
                }
            }
            put_u32(&mut out, layer.mlp.len() as u32);
            for stage in &layer.mlp {
                out.push(stage.activation.code());
                put_u32(&mut out, stage.weights.rows() as u32);
                put_u32(&mut out, stage.weights.cols() as u32);
                for w in stage.weights.values() {
                    put_u32(&mut out, w.to_bits());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Decode("bad magic".into()));
        }
        let version = r.u32()?;
        if version != MODEL_FORMAT_VERSION {
            return Err(Error::Decode(format!("unsupported version {version}")));
        }
        let architecture = Architecture::from_code(r.u8()?)
            .ok_or_else(|| Error::Decode("unknown architecture code".into()))?;
        let activation = Activation::from_code(r.u8()?)
            .ok_or_else(|| Error::Decode("unknown activation code".into()))?;
        let spec = ModelSpec {
            architecture,
            activation,
            input_dim: r.u32()? as usize,
            hidden: r.u32()? as usize,
            depth: r.u32()? as usize,
            mlp_depth: r.u32()? as usize,
            gin_eps: f32::from_bits(r.u32()?),
        };
        let seed = u64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
        let mut layers = Vec::with_capacity(spec.depth);
        for _ in 0..spec.depth {
            let kind = r.u8()?;
            let weight = f32::from_bits(r.u32()?);
            let aggregation = match kind {
                0 => Aggregation::Sum {
                    self_weight: weight,
                },
                1 => Aggregation::GcnNorm,
                k => return Err(Error::Decode(format!("unknown aggregation code {k}"))),
            };
            let stages = r.u32()? as usize;
            let mut mlp = Vec::with_capacity(stages);
            for _ in 0..stages {
                let activation = Activation::from_code(r.u8()?)
                    .ok_or_else(|| Error::Decode("unknown activation code".into()))?;
                let rows = r.u32()? as usize;
                let cols = r.u32()? as usize;
                let count = rows
                    .checked_mul(cols)
                    .filter(|c| c.saturating_mul(4) <= bytes.len())
                    .ok_or_else(|| Error::Decode("stage shape exceeds input".into()))?;
                let mut values = Vec::with_capacity(count);
                for _ in 0..count {
                    values.push(f32::from_bits(r.u32()?));
                }
                mlp.push(Stage {
                    weights: Matrix32::from_vec(rows, cols, values)?,
                    activation,
                });
            }
            layers.push(MpLayer { aggregation, mlp });
        }
        if r.pos != bytes.len() {
            return Err(Error::Decode("trailing bytes after model".into()));
        }
        Ok(GnnModel { spec, seed, layers })
    }
}

pub fn write_model(model: &GnnModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_model(path: impl AsRef<Path>) -> Result<GnnModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    GnnModel::from_bytes(&bytes)
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Decode("unexpected end of model data".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}
