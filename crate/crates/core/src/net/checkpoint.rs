//! Checkpoint files.
//!
//! ```text
//! "MEBM" | version u32 = 1
//! config_len u32 | config: UTF-8 `key=value` lines
//! n_tensors u32 | per tensor: name_len u16 | name | ndim u8 | dims u32… | f32 data
//! epoch u32 | validation_loss f64
//! ```
//! All integers and floats little-endian.

use std::fs;
use std::path::Path;

use super::config::{param_layout, ModelConfig};
use super::params::{ModelParams, Tensor};
use crate::data::recording::ByteReader;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"MEBM";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub params: ModelParams,
    pub epoch: u32,
    pub validation_loss: f64,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(64 + self.params.numel() * 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let cfg = self.config.to_kv();
        out.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
        out.extend_from_slice(cfg.as_bytes());
        out.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for t in self.params.tensors() {
            let len =
                u16::try_from(t.name.len()).map_err(|_| Error::Encoding(format!("tensor name {} too long", t.name)))?;
            out.extend_from_slice(&len.to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.push(t.shape.len() as u8);
            for &dim in &t.shape {
                out.extend_from_slice(&(dim as u32).to_le_bytes());
            }
            for &v in &t.data {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&self.epoch.to_le_bytes());
        out.extend_from_slice(&self.validation_loss.to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        if r.take(4)? != MAGIC {
            return Err(Error::Format("bad magic, expected MEBM".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let cfg_len = r.u32()? as usize;
        let cfg_text =
            std::str::from_utf8(r.take(cfg_len)?).map_err(|e| Error::Encoding(format!("checkpoint config: {e}")))?;
        let config = ModelConfig::from_kv(cfg_text)?;
        let n = r.u32()? as usize;
        let layout = param_layout(&config);
        if n != layout.len() {
            return Err(Error::Format(format!(
                "checkpoint holds {n} tensors, config implies {}",
                layout.len()
            )));
        }
        let mut tensors = Vec::with_capacity(n);
        for spec in &layout {
            let len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|e| Error::Encoding(format!("tensor name: {e}")))?
                .to_string();
            let ndim = r.u8()? as usize;
            let shape = (0..ndim)
                .map(|_| r.u32().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            if name != spec.name || shape != spec.shape {
                return Err(Error::Format(format!(
                    "tensor {name} {shape:?} does not match expected {} {:?}",
                    spec.name, spec.shape
                )));
            }
            let numel: usize = shape.iter().product();
            let data = (0..numel).map(|_| r.f32().map(f64::from)).collect::<Result<Vec<_>>>()?;
            tensors.push(Tensor { name, shape, data });
        }
        let epoch = r.u32()?;
        let validation_loss = r.f64()?;
        if r.remaining() != 0 {
            return Err(Error::Length(format!("{} trailing bytes", r.remaining())));
        }
        Ok(Self {
            config,
            params: ModelParams::from_tensors(tensors)?,
            epoch,
            validation_loss,
        })
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, ckpt.to_bytes()?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    Checkpoint::from_bytes(&fs::read(path)?)
}
