//! 4D radar tensors, their grid metadata, and resampling between the
//! polar sensor grid and a Cartesian voxel grid.
//!
//! Memory layout is fixed: the Doppler axis is outermost and the last
//! spatial axis is fastest. Polar data is `(doppler, range, azimuth,
//! elevation)`, Cartesian data is `(doppler, z, y, x)`. Values are linear
//! power.

use core::f64::consts::PI;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // inherent float methods exist once std is linked
use num_traits::Float;

use crate::error::{Error, Result};

/// Sensor-native grid. Sample `i` along an axis sits at `offset + i * res`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarGridSpec {
    pub range_bins: usize,
    pub range_res: f64,
    pub range_offset: f64,
    pub azimuth_bins: usize,
    pub azimuth_res: f64,
    pub azimuth_offset: f64,
    pub elevation_bins: usize,
    pub elevation_res: f64,
    pub elevation_offset: f64,
    pub doppler_bins: usize,
}

impl Default for PolarGridSpec {
    fn default() -> Self {
        let deg = PI / 180.0;
        PolarGridSpec {
            range_bins: 160,
            range_res: 0.46,
            range_offset: 0.0,
            azimuth_bins: 107,
            azimuth_res: deg,
            azimuth_offset: -53.0 * deg,
            elevation_bins: 37,
            elevation_res: deg,
            elevation_offset: -18.0 * deg,
            doppler_bins: 16,
        }
    }
}

impl PolarGridSpec {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("range_bins", self.range_bins),
            ("azimuth_bins", self.azimuth_bins),
            ("elevation_bins", self.elevation_bins),
            ("doppler_bins", self.doppler_bins),
        ];
        for (name, n) in counts {
            if n == 0 {
                return Err(Error::InvalidGrid(format!("{name} must be at least 1")));
            }
        }
        let res = [
            ("range_res", self.range_res),
            ("azimuth_res", self.azimuth_res),
            ("elevation_res", self.elevation_res),
        ];
        for (name, r) in res {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidGrid(format!("{name} must be positive")));
            }
        }
        for (name, o) in [
            ("range_offset", self.range_offset),
            ("azimuth_offset", self.azimuth_offset),
            ("elevation_offset", self.elevation_offset),
        ] {
            if !o.is_finite() {
                return Err(Error::InvalidGrid(format!("{name} must be finite")));
            }
        }
        let eps = 1e-9;
        if self.azimuth_bins as f64 * self.azimuth_res > 2.0 * PI + eps {
            return Err(Error::InvalidGrid("azimuth span exceeds 2π".into()));
        }
        if self.elevation_bins as f64 * self.elevation_res > PI + eps {
            return Err(Error::InvalidGrid("elevation span exceeds π".into()));
        }
        Ok(())
    }

    /// Spatial dimensions `(range, azimuth, elevation)`.
    pub fn spatial_dims(&self) -> [usize; 3] {
        [self.range_bins, self.azimuth_bins, self.elevation_bins]
    }
}

/// Detection region in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extents {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl Default for Extents {
    fn default() -> Self {
        Extents {
            x_min: 0.0,
            x_max: 72.0,
            y_min: -15.0,
            y_max: 15.0,
            z_min: -2.0,
            z_max: 7.6,
        }
    }
}

impl Extents {
    pub fn contains(&self, x: f64, y: f64, z: f64) -> bool {
        x >= self.x_min
            && x <= self.x_max
            && y >= self.y_min
            && y <= self.y_max
            && z >= self.z_min
            && z <= self.z_max
    }

    /// Per-axis `(min, max)` in `(z, y, x)` order.
    pub fn zyx(&self) -> [(f64, f64); 3] {
        [
            (self.z_min, self.z_max),
            (self.y_min, self.y_max),
            (self.x_min, self.x_max),
        ]
    }
}

/// Cartesian voxel grid. Voxel `i` along an axis covers
/// `[min + i * size, min + (i + 1) * size)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartesianGridSpec {
    /// Voxel edge per axis in `(z, y, x)` order.
    pub voxel_size: [f64; 3],
    pub extents: Extents,
    pub doppler_bins: usize,
}

impl Default for CartesianGridSpec {
    fn default() -> Self {
        CartesianGridSpec {
            voxel_size: [0.4; 3],
            extents: Extents::default(),
            doppler_bins: 16,
        }
    }
}

fn axis_len(span: f64, size: f64) -> usize {
    let n = span / size;
    // Absorb representation error such as 9.6 / 0.4 = 23.999999999999996.
    let r = n.round();
    if (n - r).abs() < 1e-9 {
        r as usize
    } else {
        n.ceil() as usize
    }
}

impl CartesianGridSpec {
    pub fn validate(&self) -> Result<()> {
        for (axis, &v) in self.voxel_size.iter().enumerate() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidGrid(format!(
                    "voxel size on axis {axis} must be positive"
                )));
            }
        }
        for (axis, (lo, hi)) in self.extents.zyx().into_iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::InvalidGrid(format!(
                    "extent on axis {axis} must satisfy max > min"
                )));
            }
        }
        if self.doppler_bins == 0 {
            return Err(Error::InvalidGrid("doppler_bins must be at least 1".into()));
        }
        Ok(())
    }

    /// Voxel counts `(nz, ny, nx)`.
    pub fn dims(&self) -> [usize; 3] {
        let e = self.extents.zyx();
        [
            axis_len(e[0].1 - e[0].0, self.voxel_size[0]),
            axis_len(e[1].1 - e[1].0, self.voxel_size[1]),
            axis_len(e[2].1 - e[2].0, self.voxel_size[2]),
        ]
    }

    pub fn num_voxels(&self) -> usize {
        self.dims().iter().product()
    }

    /// Center of voxel `(iz, iy, ix)` as `(x, y, z)`.
    pub fn voxel_to_world(&self, iz: usize, iy: usize, ix: usize) -> Result<(f64, f64, f64)> {
        let [nz, ny, nx] = self.dims();
        if iz >= nz || iy >= ny || ix >= nx {
            return Err(Error::IndexOutOfGrid { iz, iy, ix });
        }
        Ok(self.voxel_center(iz, iy, ix))
    }

    pub(crate) fn voxel_center(&self, iz: usize, iy: usize, ix: usize) -> (f64, f64, f64) {
        let e = &self.extents;
        let [sz, sy, sx] = self.voxel_size;
        (
            e.x_min + (ix as f64 + 0.5) * sx,
            e.y_min + (iy as f64 + 0.5) * sy,
            e.z_min + (iz as f64 + 0.5) * sz,
        )
    }

    /// Voxel `(iz, iy, ix)` holding world point `(x, y, z)`.
    pub fn world_to_voxel(&self, x: f64, y: f64, z: f64) -> Result<(usize, usize, usize)> {
        let dims = self.dims();
        let mut idx = [0usize; 3];
        for (axis, (p, (lo, _))) in [z, y, x].into_iter().zip(self.extents.zyx()).enumerate() {
            let f = ((p - lo) / self.voxel_size[axis]).floor();
            if !(f >= 0.0 && f < dims[axis] as f64) {
                return Err(Error::OutOfGrid { x, y, z });
            }
            idx[axis] = f as usize;
        }
        Ok((idx[0], idx[1], idx[2]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridSpec {
    Polar(PolarGridSpec),
    Cartesian(CartesianGridSpec),
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            GridSpec::Polar(p) => p.validate(),
            GridSpec::Cartesian(c) => c.validate(),
        }
    }

    pub fn doppler_bins(&self) -> usize {
        match self {
            GridSpec::Polar(p) => p.doppler_bins,
            GridSpec::Cartesian(c) => c.doppler_bins,
        }
    }

    pub fn spatial_dims(&self) -> [usize; 3] {
        match self {
            GridSpec::Polar(p) => p.spatial_dims(),
            GridSpec::Cartesian(c) => c.dims(),
        }
    }

    fn with_doppler_bins(&self, d: usize) -> GridSpec {
        match *self {
            GridSpec::Polar(mut p) => {
                p.doppler_bins = d;
                GridSpec::Polar(p)
            }
            GridSpec::Cartesian(mut c) => {
                c.doppler_bins = d;
                GridSpec::Cartesian(c)
            }
        }
    }

    pub fn num_values(&self) -> usize {
        self.doppler_bins() * self.spatial_dims().iter().product::<usize>()
    }
}

/// Dense non-negative power tensor with its grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarTensor {
    spec: GridSpec,
    data: Vec<f32>,
}

impl RadarTensor {
    pub fn new(spec: GridSpec, data: Vec<f32>) -> Result<Self> {
        spec.validate()?;
        let expected = spec.num_values();
        if data.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                actual: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidValue { index });
        }
        Ok(RadarTensor { spec, data })
    }

    pub fn zeros(spec: GridSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.num_values();
        Ok(RadarTensor {
            spec,
            data: vec![0.0; n],
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Raw mutable access. Callers keep values finite and non-negative.
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// `[doppler, a, b, c]` with `c` fastest.
    pub fn shape(&self) -> [usize; 4] {
        let [a, b, c] = self.spec.spatial_dims();
        [self.spec.doppler_bins(), a, b, c]
    }

    pub fn index(&self, d: usize, a: usize, b: usize, c: usize) -> usize {
        let [_, na, nb, nc] = self.shape();
        ((d * na + a) * nb + b) * nc + c
    }

    pub fn get(&self, d: usize, a: usize, b: usize, c: usize) -> f32 {
        self.data[self.index(d, a, b, c)]
    }

    /// The spatial volume when the tensor has exactly one Doppler bin.
    pub fn volume(&self) -> Option<Volume<'_>> {
        if self.spec.doppler_bins() != 1 {
            return None;
        }
        Some(Volume {
            dims: self.spec.spatial_dims(),
            data: &self.data,
        })
    }
}

/// Borrowed 3D power grid, last axis fastest.
#[derive(Debug, Clone, Copy)]
pub struct Volume<'a> {
    pub dims: [usize; 3],
    pub data: &'a [f32],
}

impl<'a> Volume<'a> {
    pub fn new(dims: [usize; 3], data: &'a [f32]) -> Result<Self> {
        let expected = dims.iter().product();
        if data.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                actual: data.len(),
            });
        }
        Ok(Volume { dims, data })
    }

    #[inline]
    pub fn at(&self, iz: usize, iy: usize, ix: usize) -> f64 {
        self.data[(iz * self.dims[1] + iy) * self.dims[2] + ix] as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DopplerReduce {
    #[default]
    Max,
    Mean,
    Sum,
}

/// Reduces the Doppler axis, leaving a single channel.
pub fn doppler_collapse(tensor: &RadarTensor, mode: DopplerReduce) -> RadarTensor {
    let [d, a, b, c] = tensor.shape();
    let cells = a * b * c;
    let src = tensor.data();
    let data = if d == 1 {
        src.to_vec()
    } else {
        let mut out = vec![0.0f32; cells];
        for (cell, slot) in out.iter_mut().enumerate() {
            let channels = (0..d).map(|k| src[k * cells + cell] as f64);
            let v = match mode {
                DopplerReduce::Max => channels.fold(0.0, f64::max),
                DopplerReduce::Sum => channels.sum(),
                DopplerReduce::Mean => channels.sum::<f64>() / d as f64,
            };
            *slot = v as f32;
        }
        out
    };
    RadarTensor {
        spec: tensor.spec.with_doppler_bins(1),
        data,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    #[default]
    Trilinear,
    Nearest,
}

/// Lower sample index and weight of the upper neighbor along one polar
/// axis, or `None` outside the sampled span. A single-sample axis covers
/// half a resolution step either side of its sample.
fn axis_weight(value: f64, offset: f64, res: f64, bins: usize) -> Option<(usize, f64)> {
    let f = (value - offset) / res;
    if bins == 1 {
        return if f.abs() <= 0.5 { Some((0, 0.0)) } else { None };
    }
    let last = (bins - 1) as f64;
    if !(f >= 0.0 && f <= last) {
        return None;
    }
    let i0 = (f.floor() as usize).min(bins - 2);
    Some((i0, f - i0 as f64))
}

/// Resamples a polar tensor onto `target`.
///
/// Each voxel center is converted to `(range, azimuth, elevation)` with
/// azimuth `atan2(y, x)` and elevation `atan2(z, hypot(x, y))`. Voxels
/// outside the sampled polar span are set to zero; others are
/// interpolated independently per Doppler channel. Azimuth does not wrap.
pub fn polar_to_cartesian(
    tensor: &RadarTensor,
    target: &CartesianGridSpec,
    mode: Interpolation,
) -> Result<RadarTensor> {
    let polar = match tensor.spec() {
        GridSpec::Polar(p) => *p,
        GridSpec::Cartesian(_) => return Err(Error::WrongCoordinateKind { expected: "polar" }),
    };
    target.validate()?;
    let [nz, ny, nx] = target.dims();
    if nz * ny * nx == 0 {
        return Err(Error::InvalidGrid("target grid has no voxels".into()));
    }
    let doppler = polar.doppler_bins;
    let out_spec = CartesianGridSpec {
        doppler_bins: doppler,
        ..*target
    };
    let cells_out = nz * ny * nx;
    let mut out = vec![0.0f32; doppler * cells_out];
    let [nr, na, ne] = polar.spatial_dims();
    let cells_in = nr * na * ne;
    let src = tensor.data();

    for iz in 0..nz {
        for iy in 0..ny {
            for ix in 0..nx {
                let (x, y, z) = out_spec.voxel_center(iz, iy, ix);
                let ground = (x * x + y * y).sqrt();
                let range = (ground * ground + z * z).sqrt();
                let azimuth = y.atan2(x);
                let elevation = z.atan2(ground);
                let Some((r0, tr)) =
                    axis_weight(range, polar.range_offset, polar.range_res, nr)
                else {
                    continue;
                };
                let Some((a0, ta)) =
                    axis_weight(azimuth, polar.azimuth_offset, polar.azimuth_res, na)
                else {
                    continue;
                };
                let Some((e0, te)) =
                    axis_weight(elevation, polar.elevation_offset, polar.elevation_res, ne)
                else {
                    continue;
                };
                let out_cell = (iz * ny + iy) * nx + ix;

                // Up to eight neighbors with their weights.
                let mut corners = [(0usize, 0.0f64); 8];
                let mut n = 0;
                match mode {
                    Interpolation::Trilinear => {
                        for (dr, wr) in [(0, 1.0 - tr), (1, tr)] {
                            if wr == 0.0 {
                                continue;
                            }
                            for (da, wa) in [(0, 1.0 - ta), (1, ta)] {
                                if wa == 0.0 {
                                    continue;
                                }
                                for (de, we) in [(0, 1.0 - te), (1, te)] {
                                    if we == 0.0 {
                                        continue;
                                    }
                                    let idx = ((r0 + dr) * na + a0 + da) * ne + e0 + de;
                                    corners[n] = (idx, wr * wa * we);
                                    n += 1;
                                }
                            }
                        }
                    }
                    Interpolation::Nearest => {
                        let pick = |i0: usize, t: f64| if t >= 0.5 { i0 + 1 } else { i0 };
                        let idx = (pick(r0, tr) * na + pick(a0, ta)) * ne + pick(e0, te);
                        corners[0] = (idx, 1.0);
                        n = 1;
                    }
                }

                for d in 0..doppler {
                    let base = d * cells_in;
                    let mut acc = 0.0f64;
                    let mut lo = f64::INFINITY;
                    let mut hi = f64::NEG_INFINITY;
                    for &(idx, w) in &corners[..n] {
                        let v = src[base + idx] as f64;
                        acc += w * v;
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                    out[d * cells_out + out_cell] = acc.clamp(lo, hi) as f32;
                }
            }
        }
    }
    Ok(RadarTensor {
        spec: GridSpec::Cartesian(out_spec),
        data: out,
    })
}
