//! Binary model files.
//!
//! Layout, all integers little-endian u32:
//!
//! ```text
//! "KGAX" | version | config length | config text (key=value lines, UTF-8)
//!        | array count | per array: rows, cols, rows·cols floats
//! ```
//!
//! Arrays appear as entity table, relation table, W_r stack, then W1, W2,
//! W_agg for each layer. Floats are little-endian at the precision named by
//! the `precision` key, so 32- and 64-bit models both round-trip exactly.

use std::fs;
use std::path::Path;

use kgatax_core::eval::Scorer;
use kgatax_core::{ItemId, Matrix, ModelConfig, ModelParameters, Precision, Real, TrainedModel, UserId};
use thiserror::Error;

use crate::dataset::DataBundle;

pub const MAGIC: [u8; 4] = *b"KGAX";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("bad magic {0:02x?}; not a model file")]
    BadMagic([u8; 4]),
    #[error("format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("truncated payload while reading {0}")]
    Truncated(String),
    #[error("malformed model file: {0}")]
    Malformed(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

/// Parameters at either precision.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyParams {
    F32(ModelParameters<f32>),
    F64(ModelParameters<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub config: ModelConfig,
    pub params: AnyParams,
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub fn encode_model<T: Real>(config: &ModelConfig, params: &ModelParameters<T>) -> Vec<u8> {
    let mut config = config.clone();
    config.precision = if T::BITS == 64 { Precision::F64 } else { Precision::F32 };
    let text = config.to_kv_text();
    let blocks = params.blocks();
    let floats: usize = blocks.iter().map(|(_, m)| m.as_slice().len()).sum();
    let mut out = Vec::with_capacity(16 + text.len() + 8 * blocks.len() + floats * (T::BITS as usize / 8));
    out.extend_from_slice(&MAGIC);
    put_u32(&mut out, FORMAT_VERSION);
    put_u32(&mut out, text.len() as u32);
    out.extend_from_slice(text.as_bytes());
    put_u32(&mut out, blocks.len() as u32);
    for (_, m) in blocks {
        put_u32(&mut out, m.rows() as u32);
        put_u32(&mut out, m.cols() as u32);
        for &v in m.as_slice() {
            v.write_le(&mut out);
        }
    }
    out
}

pub fn save_model<T: Real>(path: &Path, config: &ModelConfig, params: &ModelParameters<T>) -> Result<(), ModelFileError> {
    fs::write(path, encode_model(config, params))?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], ModelFileError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| ModelFileError::Truncated(what.to_owned()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32, ModelFileError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

fn read_params<T: Real>(cur: &mut Cursor<'_>, config: &ModelConfig) -> Result<ModelParameters<T>, ModelFileError> {
    let count = cur.u32("array count")? as usize;
    let expected = 3 + 3 * config.depth();
    if count != expected {
        return Err(ModelFileError::Malformed(format!(
            "{count} arrays for a depth-{} model (expected {expected})",
            config.depth()
        )));
    }
    let width = T::BITS as usize / 8;
    let mut blocks = Vec::with_capacity(count);
    for b in 0..count {
        let what = format!("array {b}");
        let rows = cur.u32(&what)? as usize;
        let cols = cur.u32(&what)? as usize;
        let n = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(width))
            .ok_or_else(|| ModelFileError::Malformed(format!("{what}: shape {rows}×{cols} overflows")))?;
        let raw = cur.take(n, &what)?;
        let data: Vec<T> = raw.chunks_exact(width).map(T::read_le).collect();
        blocks.push(Matrix::from_vec(rows, cols, data).map_err(|e| ModelFileError::Malformed(e.to_string()))?);
    }
    ModelParameters::from_blocks(config, blocks).map_err(|e| ModelFileError::Malformed(e.to_string()))
}

pub fn decode_model(bytes: &[u8]) -> Result<SavedModel, ModelFileError> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic: [u8; 4] = cur.take(4, "magic")?.try_into().unwrap();
    if magic != MAGIC {
        return Err(ModelFileError::BadMagic(magic));
    }
    let found = cur.u32("version")?;
    if found != FORMAT_VERSION {
        return Err(ModelFileError::VersionMismatch {
            found,
            expected: FORMAT_VERSION,
        });
    }
    let len = cur.u32("config length")? as usize;
    let text = std::str::from_utf8(cur.take(len, "config text")?)
        .map_err(|_| ModelFileError::Malformed("config text is not UTF-8".into()))?;
    let config = ModelConfig::from_kv_text(text).map_err(|e| ModelFileError::Malformed(e.to_string()))?;
    let params = match config.precision {
        Precision::F32 => AnyParams::F32(read_params(&mut cur, &config)?),
        Precision::F64 => AnyParams::F64(read_params(&mut cur, &config)?),
    };
    if cur.pos != bytes.len() {
        return Err(ModelFileError::Malformed(format!(
            "{} trailing bytes",
            bytes.len() - cur.pos
        )));
    }
    Ok(SavedModel { config, params })
}

pub fn load_model(path: &Path) -> Result<SavedModel, ModelFileError> {
    decode_model(&fs::read(path)?)
}

/// A trained model at either precision.
#[derive(Debug, Clone)]
pub enum AnyModel {
    F32(TrainedModel<f32>),
    F64(TrainedModel<f64>),
}

impl AnyModel {
    pub fn config(&self) -> &ModelConfig {
        match self {
            AnyModel::F32(m) => &m.config,
            AnyModel::F64(m) => &m.config,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        match self {
            AnyModel::F32(m) => encode_model(&m.config, &m.params),
            AnyModel::F64(m) => encode_model(&m.config, &m.params),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelFileError> {
        fs::write(path, self.encode())?;
        Ok(())
    }

    /// Top-K with scores widened to f64.
    pub fn recommend_topk(
        &self,
        data: &kgatax_core::InteractionDataset,
        u: UserId,
        k: usize,
    ) -> kgatax_core::Result<Vec<(ItemId, f64)>> {
        fn widen<T: Real>(v: Vec<(ItemId, T)>) -> Vec<(ItemId, f64)> {
            v.into_iter().map(|(i, s)| (i, s.to_f64())).collect()
        }
        Ok(match self {
            AnyModel::F32(m) => widen(m.recommend_topk(data, u, k)?),
            AnyModel::F64(m) => widen(m.recommend_topk(data, u, k)?),
        })
    }
}

impl Scorer for AnyModel {
    fn score_items(&self, user: UserId, out: &mut [f64]) {
        match self {
            AnyModel::F32(m) => m.score_items(user, out),
            AnyModel::F64(m) => m.score_items(user, out),
        }
    }
}

impl SavedModel {
    /// Rebuilds cached representations against the data the model was
    /// trained on.
    pub fn into_trained(self, bundle: &DataBundle) -> crate::error::Result<AnyModel> {
        let entities = match &self.params {
            AnyParams::F32(p) => p.embed.entity.rows(),
            AnyParams::F64(p) => p.embed.entity.rows(),
        };
        if entities != bundle.layout.entity_count() {
            return Err(crate::error::AppError::Data(format!(
                "model has {entities} entities but the data defines {}",
                bundle.layout.entity_count()
            )));
        }
        let g = bundle.graph(&self.config)?;
        let layout = bundle.layout.clone();
        Ok(match self.params {
            AnyParams::F32(p) => AnyModel::F32(TrainedModel::new(self.config, p, layout, &g, &bundle.aux)?),
            AnyParams::F64(p) => AnyModel::F64(TrainedModel::new(self.config, p, layout, &g, &bundle.aux)?),
        })
    }
}
