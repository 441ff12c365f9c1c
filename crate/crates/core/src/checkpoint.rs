//! Checkpoint container: training config as JSON, then raw little-endian
//! tensors in canonical parameter order, then Adam state. Saving a loaded
//! checkpoint reproduces the original bytes exactly.

use crate::error::{Error, Result};
use crate::model::{ModelDims, ModelParams};
use crate::tensor::Tensor;
use crate::trainer::{AdamState, TrainConfig};
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MRCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    config: TrainConfig,
    dims: ModelDims,
    epoch: usize,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub params: ModelParams<f32>,
    pub adam: AdamState<f32>,
    pub epoch: usize,
}

fn write_tensor<W: Write>(w: &mut W, t: &Tensor<f32>) -> Result<()> {
    w.write_u8(t.ndim() as u8)?;
    for &d in t.shape() {
        w.write_u32::<LittleEndian>(d as u32)?;
    }
    for &v in t.data() {
        w.write_f32::<LittleEndian>(v)?;
    }
    Ok(())
}

fn read_tensor<R: Read>(r: &mut R, offset: &mut u64) -> Result<Tensor<f32>> {
    let ndim = r.read_u8()? as usize;
    *offset += 1;
    if ndim == 0 || ndim > 8 {
        return Err(Error::Format {
            offset: *offset - 1,
            msg: format!("tensor rank {ndim} out of range"),
        });
    }
    let mut shape = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        shape.push(r.read_u32::<LittleEndian>()? as usize);
        *offset += 4;
    }
    let numel: usize = shape.iter().product();
    let mut data = vec![0f32; numel];
    r.read_f32_into::<LittleEndian>(&mut data)?;
    *offset += 4 * numel as u64;
    Tensor::from_vec(shape, data)
}

impl Checkpoint {
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_u32::<LittleEndian>(CHECKPOINT_VERSION)?;
        let header = Header {
            config: self.config.clone(),
            dims: self.params.dims,
            epoch: self.epoch,
        };
        let json = serde_json::to_vec(&header)?;
        w.write_u64::<LittleEndian>(json.len() as u64)?;
        w.write_all(&json)?;
        let named = self.params.named();
        w.write_u32::<LittleEndian>(named.len() as u32)?;
        for (name, t) in &named {
            let bytes = name.as_bytes();
            w.write_u16::<LittleEndian>(bytes.len() as u16)?;
            w.write_all(bytes)?;
            write_tensor(w, t)?;
        }
        w.write_u64::<LittleEndian>(self.adam.step)?;
        for (m, v) in self.adam.m.iter().zip(&self.adam.v) {
            write_tensor(w, m)?;
            write_tensor(w, v)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Format {
                offset: 0,
                msg: format!("bad magic {magic:?}, expected {CHECKPOINT_MAGIC:?}"),
            });
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format {
                offset: 4,
                msg: format!("unsupported checkpoint version {version}, expected {CHECKPOINT_VERSION}"),
            });
        }
        let json_len = r.read_u64::<LittleEndian>()? as usize;
        let mut json = vec![0u8; json_len];
        r.read_exact(&mut json)?;
        let header: Header = serde_json::from_slice(&json)?;
        let mut offset = 16 + json_len as u64;

        let count = r.read_u32::<LittleEndian>()? as usize;
        offset += 4;
        let mut named = Vec::with_capacity(count);
        for _ in 0..count {
            let name_len = r.read_u16::<LittleEndian>()? as usize;
            offset += 2;
            let mut name = vec![0u8; name_len];
            r.read_exact(&mut name)?;
            offset += name_len as u64;
            let name = String::from_utf8(name).map_err(|_| Error::Format {
                offset,
                msg: "parameter name is not UTF-8".to_string(),
            })?;
            let t = read_tensor(r, &mut offset)?;
            named.push((name, t));
        }
        let params = ModelParams::from_named(header.dims, &named)?;
        let step = r.read_u64::<LittleEndian>()?;
        offset += 8;
        let mut m = Vec::with_capacity(count);
        let mut v = Vec::with_capacity(count);
        for _ in 0..count {
            m.push(read_tensor(r, &mut offset)?);
            v.push(read_tensor(r, &mut offset)?);
        }
        for ((_, p), (ms, vs)) in params.named().iter().zip(m.iter().zip(&v)) {
            if p.shape() != ms.shape() || p.shape() != vs.shape() {
                return Err(Error::Format {
                    offset,
                    msg: "optimizer state shape disagrees with parameters".to_string(),
                });
            }
        }
        Ok(Checkpoint {
            config: header.config,
            params,
            adam: AdamState { step, m, v },
            epoch: header.epoch,
        })
    }

    /// Atomic save: write to a sibling temp file, then rename.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("ckpt.tmp");
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(&tmp, &buf)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::read_from(&mut bytes.as_slice())
    }
}
