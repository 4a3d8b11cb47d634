//! `RT4D` tensor files.
//!
//! Little-endian throughout:
//!
//! ```text
//! magic    b"RT4D"
//! version  u16 = 1
//! kind     u8  (0 polar, 1 cartesian)
//! polar:     range_bins u32, range_res f64, range_offset f64,
//!            azimuth_bins u32, azimuth_res f64, azimuth_offset f64,
//!            elevation_bins u32, elevation_res f64, elevation_offset f64,
//!            doppler_bins u32
//! cartesian: voxel_size f64 x3 (z, y, x),
//!            x_min x_max y_min y_max z_min z_max f64,
//!            doppler_bins u32
//! data     f32 x N in tensor layout order
//! ```
//!
//! Angles are radians. The file must end exactly after the data.

use std::path::Path;

use radtrack_core::grid::{CartesianGridSpec, Extents, GridSpec, PolarGridSpec, RadarTensor};

use crate::error::{CliError, Result};
use crate::fsutil::{read_bytes, write_atomic};

pub const MAGIC: &[u8; 4] = b"RT4D";
pub const VERSION: u16 = 1;

pub fn encode(tensor: &RadarTensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(128 + 4 * tensor.data().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let u32_le = |out: &mut Vec<u8>, v: usize| out.extend_from_slice(&(v as u32).to_le_bytes());
    let f64_le = |out: &mut Vec<u8>, v: f64| out.extend_from_slice(&v.to_le_bytes());
    match tensor.spec() {
        GridSpec::Polar(p) => {
            out.push(0);
            for (bins, res, offset) in [
                (p.range_bins, p.range_res, p.range_offset),
                (p.azimuth_bins, p.azimuth_res, p.azimuth_offset),
                (p.elevation_bins, p.elevation_res, p.elevation_offset),
            ] {
                u32_le(&mut out, bins);
                f64_le(&mut out, res);
                f64_le(&mut out, offset);
            }
            u32_le(&mut out, p.doppler_bins);
        }
        GridSpec::Cartesian(c) => {
            out.push(1);
            for v in c.voxel_size {
                f64_le(&mut out, v);
            }
            let e = &c.extents;
            for v in [e.x_min, e.x_max, e.y_min, e.y_max, e.z_min, e.z_max] {
                f64_le(&mut out, v);
            }
            u32_le(&mut out, c.doppler_bins);
        }
    }
    for v in tensor.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Option<&[u8]> {
        let s = self.buf.get(self.pos..self.pos + n)?;
        self.pos += n;
        Some(s)
    }

    fn u32(&mut self) -> Option<usize> {
        Some(u32::from_le_bytes(self.take(4)?.try_into().ok()?) as usize)
    }

    fn f64(&mut self) -> Option<f64> {
        Some(f64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<RadarTensor> {
    let bad = |m: &str| CliError::malformed(path, m.to_string());
    let truncated = || bad("truncated RT4D header");
    let mut cur = Cursor { buf: bytes, pos: 0 };
    if cur.take(4) != Some(MAGIC.as_slice()) {
        return Err(bad("not an RT4D file"));
    }
    let version = u16::from_le_bytes(cur.take(2).ok_or_else(truncated)?.try_into().unwrap());
    if version != VERSION {
        return Err(bad(&format!("unsupported RT4D version {version}")));
    }
    let kind = cur.take(1).ok_or_else(truncated)?[0];
    let spec = match kind {
        0 => {
            let mut axes = [(0usize, 0.0f64, 0.0f64); 3];
            for a in axes.iter_mut() {
                *a = (
                    cur.u32().ok_or_else(truncated)?,
                    cur.f64().ok_or_else(truncated)?,
                    cur.f64().ok_or_else(truncated)?,
                );
            }
            let doppler_bins = cur.u32().ok_or_else(truncated)?;
            GridSpec::Polar(PolarGridSpec {
                range_bins: axes[0].0,
                range_res: axes[0].1,
                range_offset: axes[0].2,
                azimuth_bins: axes[1].0,
                azimuth_res: axes[1].1,
                azimuth_offset: axes[1].2,
                elevation_bins: axes[2].0,
                elevation_res: axes[2].1,
                elevation_offset: axes[2].2,
                doppler_bins,
            })
        }
        1 => {
            let mut voxel_size = [0.0; 3];
            for v in voxel_size.iter_mut() {
                *v = cur.f64().ok_or_else(truncated)?;
            }
            let mut e = [0.0; 6];
            for v in e.iter_mut() {
                *v = cur.f64().ok_or_else(truncated)?;
            }
            let doppler_bins = cur.u32().ok_or_else(truncated)?;
            GridSpec::Cartesian(CartesianGridSpec {
                voxel_size,
                extents: Extents {
                    x_min: e[0],
                    x_max: e[1],
                    y_min: e[2],
                    y_max: e[3],
                    z_min: e[4],
                    z_max: e[5],
                },
                doppler_bins,
            })
        }
        k => return Err(bad(&format!("unknown RT4D grid kind {k}"))),
    };
    spec.validate().map_err(|e| bad(&e.to_string()))?;
    let n = spec
        .spatial_dims()
        .iter()
        .chain([spec.doppler_bins()].iter())
        .try_fold(4usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| bad("RT4D grid is too large"))?;
    let rest = &bytes[cur.pos..];
    if rest.len() != n {
        return Err(bad(&format!(
            "RT4D payload has {} bytes, grid needs {n}",
            rest.len()
        )));
    }
    let data = rest
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    RadarTensor::new(spec, data).map_err(|e| bad(&e.to_string()))
}

pub fn read(path: &Path) -> Result<RadarTensor> {
    decode(&read_bytes(path)?, path)
}

pub fn write(path: &Path, tensor: &RadarTensor) -> Result<()> {
    write_atomic(path, &encode(tensor))
}
