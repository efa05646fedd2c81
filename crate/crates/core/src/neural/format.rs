//! Binary model file, little-endian:
//!
//! ```text
//! "GPM1"  u32 version = 1
//! u32 task, u32 feature set, u32 D, u32 H, u32 FC, u32 out, u32 L, f32 dropout
//! 4 × (u32 length, f64 × length)     feature mean/std, target mean/std
//! 16 × (u32 length, f32 × length)    W_i W_f W_g W_o U_i U_f U_g U_o
//!                                    b_i b_f b_g b_o FC_W FC_b OUT_W OUT_b
//! u32 CRC32 of every preceding byte
//! ```

use super::config::{Layout, ModelConfig};
use super::model::{Model, Params, TrainingMeta};
use crate::dataset::NormalizationStats;
use crate::error::{Error, Result};
use crate::features::FeatureSetId;
use crate::task::Task;

pub const MAGIC: &[u8; 4] = b"GPM1";
pub const VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64s(out: &mut Vec<u8>, values: &[f64]) {
    put_u32(out, values.len() as u32);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Serializes the model. Parameters are stored as `f32`.
pub fn save_model(model: &Model) -> Vec<u8> {
    let c = &model.config;
    let layout = model.layout();
    let mut out = Vec::with_capacity(64 + model.param_count() * 4);
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION);
    for v in [
        c.task.id(),
        c.feature_set.id(),
        c.input_dim as u32,
        c.hidden as u32,
        c.fc as u32,
        c.outputs as u32,
        c.seq_len as u32,
    ] {
        put_u32(&mut out, v);
    }
    out.extend_from_slice(&(c.dropout as f32).to_le_bytes());
    put_f64s(&mut out, &model.norm.feature_mean);
    put_f64s(&mut out, &model.norm.feature_std);
    put_f64s(&mut out, &model.norm.target_mean);
    put_f64s(&mut out, &model.norm.target_std);

    let mut offset = 0;
    for len in layout.array_lengths() {
        put_u32(&mut out, len as u32);
        for v in &model.params.values[offset..offset + len] {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        offset += len;
    }
    let crc = crc32fast::hash(&out);
    put_u32(&mut out, crc);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Shape("model file ends inside a block".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.u32()? as usize;
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Shape("length overflow".into()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn load_model(bytes: &[u8]) -> Result<Model> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    if bytes.len() < 12 {
        return Err(Error::Checksum);
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    if crc32fast::hash(body) != stored {
        return Err(Error::Checksum);
    }
    let mut r = Reader { bytes: body, pos: 4 };
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Version(version));
    }
    let task_id = r.u32()?;
    let task = Task::from_id(task_id).ok_or_else(|| Error::Shape(format!("unknown task id {task_id}")))?;
    let fs_id = r.u32()?;
    let feature_set = FeatureSetId::from_id(fs_id)
        .ok_or_else(|| Error::Shape(format!("unknown feature set id {fs_id}")))?;
    let dims: Vec<usize> = (0..5).map(|_| r.u32().map(|v| v as usize)).collect::<Result<_>>()?;
    // Shortest decimal of the stored f32, so 0.2 reads back as 0.2.
    let dropout: f64 = r.f32()?.to_string().parse().unwrap_or(0.0);
    let config = ModelConfig {
        task,
        feature_set,
        input_dim: dims[0],
        hidden: dims[1],
        fc: dims[2],
        outputs: dims[3],
        seq_len: dims[4],
        dropout,
    };
    config
        .validate()
        .map_err(|e| Error::Shape(format!("config block: {e}")))?;

    let norm = NormalizationStats {
        feature_mean: r.f64s()?,
        feature_std: r.f64s()?,
        target_mean: r.f64s()?,
        target_std: r.f64s()?,
    };
    let targets = task.target_names().len();
    if norm.feature_mean.len() != config.input_dim
        || norm.feature_std.len() != config.input_dim
        || norm.target_mean.len() != targets
        || norm.target_std.len() != targets
    {
        return Err(Error::Shape("normalization statistics do not match config".into()));
    }

    let layout = Layout::new(&config);
    let mut values = Vec::with_capacity(layout.len());
    for (k, expected) in layout.array_lengths().into_iter().enumerate() {
        let declared = r.u32()? as usize;
        if declared != expected {
            return Err(Error::Shape(format!(
                "parameter array {k} declares {declared} values, config implies {expected}"
            )));
        }
        for _ in 0..declared {
            values.push(r.f32()? as f64);
        }
    }
    if r.pos != body.len() {
        return Err(Error::Shape(format!(
            "{} trailing bytes after parameter arrays",
            body.len() - r.pos
        )));
    }
    Ok(Model {
        config,
        params: Params { layout, values },
        norm,
        meta: TrainingMeta::default(),
        generation: 0,
    })
}
