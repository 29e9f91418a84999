use std::fs;
use std::io::Write;
use std::path::Path;

use super::{Dataset, Encoding, Sample, SampleMeta};
use crate::error::{bail, Result};

pub const MAGIC: &[u8; 4] = b"LNET";
pub const FORMAT_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 1 + 4 + 12 + 32 + 8;
const META_LEN: usize = 2 + 4 + 4 + 8 + 8;

/// Encodes a dataset in the little-endian `LNET` layout.
pub fn serialize(dataset: &Dataset) -> Result<Vec<u8>> {
    let per_sample: usize = dataset.dims.iter().product();
    let mut out = Vec::with_capacity(HEADER_LEN + dataset.len() * (per_sample * 4 + 8 + META_LEN));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(dataset.encoding.id());
    out.extend_from_slice(&(dataset.len() as u32).to_le_bytes());
    for d in dataset.dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.extend_from_slice(&dataset.scenario_digest);
    out.extend_from_slice(&dataset.seed.to_le_bytes());
    for s in &dataset.samples {
        if s.input.len() != per_sample {
            bail!(Shape, "sample {} has {} values, header says {}", s.meta.ue_index, s.input.len(), per_sample);
        }
        for v in &s.input {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&s.label[0].to_le_bytes());
        out.extend_from_slice(&s.label[1].to_le_bytes());
        let m = &s.meta;
        out.extend_from_slice(&m.n_trp_available.to_le_bytes());
        out.extend_from_slice(&m.noise_sigma_m.to_le_bytes());
        out.extend_from_slice(&m.ue_index.to_le_bytes());
        out.extend_from_slice(&m.seed_trace.to_le_bytes());
        out.extend_from_slice(&m.clean_label[0].to_le_bytes());
        out.extend_from_slice(&m.clean_label[1].to_le_bytes());
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        if end > self.bytes.len() {
            bail!(Format, "dataset truncated at byte {}", self.bytes.len());
        }
        let mut b = [0u8; N];
        b.copy_from_slice(&self.bytes[self.pos..end]);
        self.pos = end;
        Ok(b)
    }

    fn u16(&mut self) -> Result<u16> {
        self.take().map(u16::from_le_bytes)
    }

    fn u32(&mut self) -> Result<u32> {
        self.take().map(u32::from_le_bytes)
    }

    fn u64(&mut self) -> Result<u64> {
        self.take().map(u64::from_le_bytes)
    }

    fn f32(&mut self) -> Result<f32> {
        self.take().map(f32::from_le_bytes)
    }
}

pub fn deserialize(bytes: &[u8]) -> Result<Dataset> {
    let mut r = Reader { bytes, pos: 0 };
    if &r.take::<4>()? != MAGIC {
        bail!(Format, "not a dataset file (bad magic)");
    }
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        bail!(Format, "dataset format version {} is not supported (expected {})", version, FORMAT_VERSION);
    }
    let encoding = Encoding::from_id(r.take::<1>()?[0])?;
    let n = r.u32()? as usize;
    let dims = [r.u32()? as usize, r.u32()? as usize, r.u32()? as usize];
    encoding.n_trp_from_dims(dims)?;
    let scenario_digest = r.take::<32>()?;
    let seed = r.u64()?;
    let per_sample: usize = dims.iter().product();
    let expected = HEADER_LEN + n * (per_sample * 4 + 8 + META_LEN);
    if bytes.len() < expected {
        bail!(Format, "dataset truncated: {} bytes, header implies {}", bytes.len(), expected);
    }
    if bytes.len() > expected {
        bail!(Format, "dataset has {} trailing bytes", bytes.len() - expected);
    }
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let input = (0..per_sample).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
        let label = [r.f32()?, r.f32()?];
        let meta = SampleMeta {
            n_trp_available: r.u16()?,
            noise_sigma_m: r.f32()?,
            ue_index: r.u32()?,
            seed_trace: r.u64()?,
            clean_label: [r.f32()?, r.f32()?],
        };
        samples.push(Sample { input, label, meta });
    }
    Ok(Dataset {
        encoding,
        dims,
        scenario_digest,
        seed,
        samples,
    })
}

/// Writes through a temporary file and a rename.
pub fn save(dataset: &Dataset, path: &Path) -> Result<()> {
    let bytes = serialize(dataset)?;
    crate::fsutil::write_atomic(path, |f| f.write_all(&bytes))
}

pub fn load(path: &Path) -> Result<Dataset> {
    deserialize(&fs::read(path)?)
}
