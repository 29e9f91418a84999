use std::fs;
use std::io::Write;
use std::path::Path;

use super::{LocNet, LocNetConfig};
use crate::dataset::Encoding;
use crate::error::{bail, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"LNWT";
pub const CHECKPOINT_VERSION: u16 = 1;

/// Model weights plus the encoding of the data they were trained on.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub encoding: Encoding,
    pub model: LocNet<f32>,
}

/// `LNWT` layout: magic, u16 version, u8 encoding id, u32 length + TOML
/// architecture, u32 tensor count, then per tensor a u16 length + name, u8
/// rank, u32 dims and the f32 values. All integers little-endian.
pub fn encode_checkpoint(model: &LocNet<f32>, encoding: Encoding) -> Result<Vec<u8>> {
    let config = toml::to_string(model.config()).map_err(|e| crate::Error::Format(e.to_string()))?;
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.push(encoding.id());
    out.extend_from_slice(&(config.len() as u32).to_le_bytes());
    out.extend_from_slice(config.as_bytes());
    let tensors: Vec<_> = model.named_params().into_iter().chain(model.named_buffers()).collect();
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(t.shape().len() as u8);
        for d in t.shape() {
            out.extend_from_slice(&(*d as u32).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Cursor<'a>(&'a [u8]);

impl<'a> Cursor<'a> {
    fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.0.len() < n {
            bail!(Format, "checkpoint truncated");
        }
        let (head, tail) = self.0.split_at(n);
        self.0 = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.bytes(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().expect("4 bytes")))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut c = Cursor(bytes);
    if c.bytes(4)? != CHECKPOINT_MAGIC {
        bail!(Format, "not a checkpoint file (bad magic)");
    }
    let version = c.u16()?;
    if version != CHECKPOINT_VERSION {
        bail!(Format, "checkpoint version {} is not supported", version);
    }
    let encoding = Encoding::from_id(c.u8()?)?;
    let len = c.u32()? as usize;
    let text = std::str::from_utf8(c.bytes(len)?).map_err(|e| crate::Error::Format(e.to_string()))?;
    let config: LocNetConfig = toml::from_str(text).map_err(|e| crate::Error::Format(e.to_string()))?;
    let mut model = LocNet::<f32>::new(config, 0)?;
    let names: Vec<String> = model
        .named_params()
        .into_iter()
        .chain(model.named_buffers())
        .map(|(n, _)| n)
        .collect();
    let count = c.u32()? as usize;
    if count != names.len() {
        bail!(Format, "checkpoint holds {} tensors, architecture needs {}", count, names.len());
    }
    for (slot, expected) in model.state_mut().into_iter().zip(&names) {
        let name_len = c.u16()? as usize;
        let name = c.bytes(name_len)?;
        if name != expected.as_bytes() {
            bail!(Format, "checkpoint tensor '{}' found where '{}' was expected", String::from_utf8_lossy(name), expected);
        }
        let rank = c.u8()? as usize;
        let shape = (0..rank).map(|_| c.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        if shape != slot.shape() {
            bail!(Shape, "tensor '{}' has shape {:?}, expected {:?}", expected, shape, slot.shape());
        }
        let raw = c.bytes(4 * slot.len())?;
        for (v, b) in slot.data_mut().iter_mut().zip(raw.chunks_exact(4)) {
            *v = f32::from_le_bytes(b.try_into().expect("4 bytes"));
        }
    }
    if !c.0.is_empty() {
        bail!(Format, "checkpoint has {} trailing bytes", c.0.len());
    }
    Ok(Checkpoint { encoding, model })
}

pub fn save_checkpoint(path: &Path, model: &LocNet<f32>, encoding: Encoding) -> Result<()> {
    let bytes = encode_checkpoint(model, encoding)?;
    crate::fsutil::write_atomic(path, |w| w.write_all(&bytes))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode_checkpoint(&fs::read(path)?)
}
