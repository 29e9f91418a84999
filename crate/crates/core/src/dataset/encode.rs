use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{rsrp_dbm, ChannelRealization};
use crate::error::{bail, Error, Result};

/// Gain applied to CIR taps before they enter the model. A power of two, so
/// the scaling is exact in both directions.
pub const CIR_GAIN: f64 = 16384.0;
/// RSRP placed on dropped TRPs.
pub const RSRP_SENTINEL_DBM: f64 = -500.0;
pub const RSRP_OFFSET_DB: f64 = 100.0;
pub const RSRP_SCALE_DB: f64 = 50.0;

/// Affine map from dBm to the model's RSRP feature; the sentinel lands at -8.
pub fn standardize_rsrp(dbm: f64) -> f64 {
    (dbm + RSRP_OFFSET_DB) / RSRP_SCALE_DB
}

pub fn unstandardize_rsrp(value: f64) -> f64 {
    value * RSRP_SCALE_DB - RSRP_OFFSET_DB
}

/// The part of a channel realization that reaches the model.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkMeasurement {
    pub cir: Vec<Complex64>,
    pub rsrp_dbm: f64,
}

impl LinkMeasurement {
    pub fn new(cir: Vec<Complex64>) -> Self {
        let rsrp_dbm = rsrp_dbm(&cir);
        Self { cir, rsrp_dbm }
    }

    pub fn dropped(taps: usize) -> Self {
        Self {
            cir: vec![Complex64::new(0.0, 0.0); taps],
            rsrp_dbm: RSRP_SENTINEL_DBM,
        }
    }
}

impl From<&ChannelRealization> for LinkMeasurement {
    fn from(r: &ChannelRealization) -> Self {
        Self {
            cir: r.cir.clone(),
            rsrp_dbm: r.rsrp_dbm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Encoding {
    Cir = 0,
    CirRsrp = 1,
    CirRsrpRatio = 2,
}

impl Encoding {
    pub const ALL: [Encoding; 3] = [Encoding::Cir, Encoding::CirRsrp, Encoding::CirRsrpRatio];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            0 => Ok(Encoding::Cir),
            1 => Ok(Encoding::CirRsrp),
            2 => Ok(Encoding::CirRsrpRatio),
            other => bail!(Format, "unknown encoding id {}", other),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Encoding::Cir => "cir",
            Encoding::CirRsrp => "cir-rsrp",
            Encoding::CirRsrpRatio => "cir-rsrp-ratio",
        }
    }

    /// `[rows, taps, channels]` of an encoded sample.
    pub fn dims(self, n_trp: usize, taps: usize) -> [usize; 3] {
        match self {
            Encoding::Cir => [n_trp, taps, 2],
            Encoding::CirRsrp => [2 * n_trp, taps, 2],
            Encoding::CirRsrpRatio => [2 * n_trp, taps, 3],
        }
    }

    /// Inverse of [`Encoding::dims`].
    pub fn n_trp_from_dims(self, dims: [usize; 3]) -> Result<usize> {
        let [rows, taps, ch] = dims;
        let n = match self {
            Encoding::Cir => rows,
            _ => rows / 2,
        };
        if n == 0 || self.dims(n, taps) != [rows, taps, ch] {
            bail!(Shape, "dims {:?} do not describe a {} tensor", dims, self);
        }
        Ok(n)
    }
}

impl fmt::Display for Encoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Encoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "cir" => Ok(Encoding::Cir),
            "cir-rsrp" => Ok(Encoding::CirRsrp),
            "cir-rsrp-ratio" => Ok(Encoding::CirRsrpRatio),
            _ => bail!(InvalidArgument, "unknown encoding '{}' (cir|cir-rsrp|cir-rsrp-ratio)", s),
        }
    }
}

fn check_links(links: &[LinkMeasurement], n_trp: usize) -> Result<usize> {
    if links.len() != n_trp || n_trp == 0 {
        bail!(Shape, "expected {} TRP measurements, got {}", n_trp, links.len());
    }
    let taps = links[0].cir.len();
    if taps == 0 || links.iter().any(|l| l.cir.len() != taps) {
        bail!(Shape, "all CIRs must share one non-zero length");
    }
    Ok(taps)
}

/// Writes one TRP's CIR into row `row` of a `[rows, taps, ch]` tensor.
fn put_cir(out: &mut [f32], row: usize, taps: usize, ch: usize, cir: &[Complex64]) {
    for (t, h) in cir.iter().enumerate() {
        let at = (row * taps + t) * ch;
        out[at] = (h.re * CIR_GAIN) as f32;
        out[at + 1] = (h.im * CIR_GAIN) as f32;
    }
}

fn put_constant(out: &mut [f32], row: usize, taps: usize, ch: usize, channels: std::ops::Range<usize>, v: f32) {
    for t in 0..taps {
        for c in channels.clone() {
            out[(row * taps + t) * ch + c] = v;
        }
    }
}

/// `n_trp x taps x 2`: real and imaginary CIR parts.
pub fn encode_cir(links: &[LinkMeasurement], n_trp: usize) -> Result<Vec<f32>> {
    let taps = check_links(links, n_trp)?;
    let mut out = vec![0.0; n_trp * taps * 2];
    for (i, l) in links.iter().enumerate() {
        put_cir(&mut out, i, taps, 2, &l.cir);
    }
    Ok(out)
}

fn interleaved(links: &[LinkMeasurement], n_trp: usize, ch: usize, ratio: Option<f32>) -> Result<Vec<f32>> {
    let taps = check_links(links, n_trp)?;
    let mut out = vec![0.0; 2 * n_trp * taps * ch];
    for (i, l) in links.iter().enumerate() {
        put_cir(&mut out, 2 * i, taps, ch, &l.cir);
        put_constant(&mut out, 2 * i + 1, taps, ch, 0..2, standardize_rsrp(l.rsrp_dbm) as f32);
    }
    if let Some(r) = ratio {
        for row in 0..2 * n_trp {
            put_constant(&mut out, row, taps, ch, 2..3, r);
        }
    }
    Ok(out)
}

/// `2 n_trp x taps x 2`: rows alternate CIR and constant RSRP rows.
pub fn encode_cir_rsrp(links: &[LinkMeasurement], n_trp: usize) -> Result<Vec<f32>> {
    interleaved(links, n_trp, 2, None)
}

/// `2 n_trp x taps x 3`: [`encode_cir_rsrp`] plus a plane holding the fraction
/// of TRPs that were measured.
pub fn encode_cir_rsrp_ratio(links: &[LinkMeasurement], n_trp: usize, n_trp_available: usize) -> Result<Vec<f32>> {
    if n_trp_available == 0 || n_trp_available > n_trp {
        bail!(
            InvalidArgument,
            "TRP ratio {}/{} lies outside (0, 1]",
            n_trp_available,
            n_trp
        );
    }
    interleaved(links, n_trp, 3, Some((n_trp_available as f64 / n_trp as f64) as f32))
}

pub fn encode(encoding: Encoding, links: &[LinkMeasurement], n_trp_available: usize) -> Result<Vec<f32>> {
    let n_trp = links.len();
    match encoding {
        Encoding::Cir => encode_cir(links, n_trp),
        Encoding::CirRsrp => encode_cir_rsrp(links, n_trp),
        Encoding::CirRsrpRatio => encode_cir_rsrp_ratio(links, n_trp, n_trp_available),
    }
}

/// Recovers the per-TRP CIRs from an encoded tensor.
pub fn decode_cir(tensor: &[f32], encoding: Encoding, n_trp: usize, taps: usize) -> Result<Vec<Vec<Complex64>>> {
    let [rows, _, ch] = encoding.dims(n_trp, taps);
    if tensor.len() != rows * taps * ch {
        bail!(Shape, "tensor of {} values does not match {}", tensor.len(), encoding);
    }
    let stride = if encoding == Encoding::Cir { 1 } else { 2 };
    Ok((0..n_trp)
        .map(|i| {
            (0..taps)
                .map(|t| {
                    let at = (i * stride * taps + t) * ch;
                    Complex64::new(tensor[at] as f64 / CIR_GAIN, tensor[at + 1] as f64 / CIR_GAIN)
                })
                .collect()
        })
        .collect())
}

/// Indices of the `n_trp_available` strongest TRPs in ascending index order;
/// equal RSRPs prefer the lower index.
pub fn kept_trps(links: &[LinkMeasurement], n_trp_available: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..links.len()).collect();
    order.sort_by(|&a, &b| links[b].rsrp_dbm.total_cmp(&links[a].rsrp_dbm).then(a.cmp(&b)));
    let mut kept = order[..n_trp_available.min(links.len())].to_vec();
    kept.sort_unstable();
    kept
}

/// Keeps the strongest `n_trp_available` links and blanks the rest.
pub fn mask_trps(links: &[LinkMeasurement], n_trp_available: usize) -> Result<Vec<LinkMeasurement>> {
    if n_trp_available == 0 || n_trp_available > links.len() {
        bail!(
            InvalidArgument,
            "n_trp_available must lie in 1..={}, got {}",
            links.len(),
            n_trp_available
        );
    }
    let kept = kept_trps(links, n_trp_available);
    let mut keep = vec![false; links.len()];
    kept.iter().for_each(|&i| keep[i] = true);
    Ok(links
        .iter()
        .zip(keep)
        .map(|(l, k)| if k { l.clone() } else { LinkMeasurement::dropped(l.cir.len()) })
        .collect())
}
