//! Statistical cell-averaging CFAR over a 3D power volume.
//!
//! For a cell under test the window is a box of half-width `training + guard`
//! per axis. The guard box of half-width `guard` (which contains the cell
//! itself) is excluded; the remaining training cells give a mean and a
//! population standard deviation, and the cell is declared when its power
//! strictly exceeds `alpha1 * mean + alpha2 * std`. Cells closer than
//! `training + guard` to any face are never tested.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // inherent float methods exist once std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::geometry::Box3D;
use crate::grid::{doppler_collapse, CartesianGridSpec, DopplerReduce, GridSpec, RadarTensor, Volume};
use crate::targets::LabelObject;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfarConfig {
    /// Training half-width per axis `(z, y, x)`.
    pub training: [usize; 3],
    /// Guard half-width per axis `(z, y, x)`.
    pub guard: [usize; 3],
    pub alpha1: f64,
    pub alpha2: f64,
    pub collapse: DopplerReduce,
}

impl Default for CfarConfig {
    fn default() -> Self {
        CfarConfig::cube(15, 5)
    }
}

impl CfarConfig {
    /// Same training and guard half-widths on all three axes.
    pub fn cube(training: usize, guard: usize) -> Self {
        CfarConfig {
            training: [training; 3],
            guard: [guard; 3],
            alpha1: 1.0,
            alpha2: 3.0,
            collapse: DopplerReduce::Max,
        }
    }

    pub fn with_alphas(mut self, alpha1: f64, alpha2: f64) -> Self {
        self.alpha1 = alpha1;
        self.alpha2 = alpha2;
        self
    }

    /// Full window half-width per axis.
    pub fn reach(&self) -> [usize; 3] {
        [
            self.training[0] + self.guard[0],
            self.training[1] + self.guard[1],
            self.training[2] + self.guard[2],
        ]
    }

    /// Number of training cells in one window.
    pub fn training_cells(&self) -> usize {
        let outer: usize = self.reach().iter().map(|h| 2 * h + 1).product();
        let inner: usize = self.guard.iter().map(|g| 2 * g + 1).product();
        outer - inner
    }

    pub fn validate(&self) -> Result<()> {
        if self.training_cells() == 0 {
            return Err(Error::InvalidConfig(
                "CFAR window has no training cells".into(),
            ));
        }
        if !(self.alpha1.is_finite() && self.alpha2.is_finite()) {
            return Err(Error::InvalidConfig("CFAR multipliers must be finite".into()));
        }
        if self.alpha1 < 0.0 || self.alpha2 < 0.0 {
            return Err(Error::InvalidConfig(
                "CFAR multipliers must be non-negative".into(),
            ));
        }
        if !(self.alpha1 >= 1.0 || self.alpha2 > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha1={} alpha2={} fires on constant input; need alpha1 >= 1 or alpha2 > 0",
                self.alpha1, self.alpha2
            )));
        }
        Ok(())
    }
}

/// A cell that passed the CFAR test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfarPoint {
    pub iz: usize,
    pub iy: usize,
    pub ix: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub power: f64,
}

/// Detected cells, sorted by `(iz, iy, ix)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CfarPointSet {
    pub points: Vec<CfarPoint>,
}

impl CfarPointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> core::slice::Iter<'_, CfarPoint> {
        self.points.iter()
    }
}

fn window_fits(dims: [usize; 3], cell: [usize; 3], reach: [usize; 3]) -> bool {
    (0..3).all(|a| cell[a] >= reach[a] && cell[a] + reach[a] < dims[a])
}

fn in_guard(d: [isize; 3], guard: [usize; 3]) -> bool {
    (0..3).all(|a| d[a].unsigned_abs() <= guard[a])
}

/// Direct two-pass window statistics `(mean, population std)`.
fn window_stats(volume: &Volume<'_>, cell: [usize; 3], config: &CfarConfig) -> (f64, f64) {
    let reach = config.reach();
    let r = reach.map(|h| h as isize);
    let c = cell.map(|v| v as isize);
    let mut sum = 0.0;
    let mut n = 0usize;
    for dz in -r[0]..=r[0] {
        for dy in -r[1]..=r[1] {
            for dx in -r[2]..=r[2] {
                if in_guard([dz, dy, dx], config.guard) {
                    continue;
                }
                sum += volume.at((c[0] + dz) as usize, (c[1] + dy) as usize, (c[2] + dx) as usize);
                n += 1;
            }
        }
    }
    let mean = sum / n as f64;
    let mut sq = 0.0;
    for dz in -r[0]..=r[0] {
        for dy in -r[1]..=r[1] {
            for dx in -r[2]..=r[2] {
                if in_guard([dz, dy, dx], config.guard) {
                    continue;
                }
                let v = volume.at((c[0] + dz) as usize, (c[1] + dy) as usize, (c[2] + dx) as usize);
                sq += (v - mean) * (v - mean);
            }
        }
    }
    (mean, (sq / n as f64).sqrt())
}

/// Threshold for one cell, computed directly from its training cells.
pub fn cfar_threshold(volume: &Volume<'_>, cell: (usize, usize, usize), config: &CfarConfig) -> Result<f64> {
    config.validate()?;
    let c = [cell.0, cell.1, cell.2];
    if !window_fits(volume.dims, c, config.reach()) {
        return Err(Error::WindowOverrun {
            iz: cell.0,
            iy: cell.1,
            ix: cell.2,
        });
    }
    let (mean, std) = window_stats(volume, c, config);
    Ok(config.alpha1 * mean + config.alpha2 * std)
}

/// Inclusive prefix sums of `x` and `x^2` with a zero border.
struct Integral {
    dims: [usize; 3],
    sum: Vec<f64>,
    sq: Vec<f64>,
}

impl Integral {
    fn new(volume: &Volume<'_>) -> Self {
        let [nz, ny, nx] = volume.dims;
        let dims = [nz + 1, ny + 1, nx + 1];
        let len = dims.iter().product();
        let mut sum = vec![0.0; len];
        let mut sq = vec![0.0; len];
        let at = |z: usize, y: usize, x: usize| (z * dims[1] + y) * dims[2] + x;
        for z in 1..=nz {
            for y in 1..=ny {
                let mut row_s = 0.0;
                let mut row_q = 0.0;
                for x in 1..=nx {
                    let v = volume.at(z - 1, y - 1, x - 1);
                    row_s += v;
                    row_q += v * v;
                    let i = at(z, y, x);
                    let up = at(z, y - 1, x);
                    let back = at(z - 1, y, x);
                    let diag = at(z - 1, y - 1, x);
                    sum[i] = row_s + sum[up] + sum[back] - sum[diag];
                    sq[i] = row_q + sq[up] + sq[back] - sq[diag];
                }
            }
        }
        Integral { dims, sum, sq }
    }

    /// Sums over the half-open box `[lo, hi)`.
    fn box_sums(&self, lo: [usize; 3], hi: [usize; 3]) -> (f64, f64) {
        let d = self.dims;
        let at = |z: usize, y: usize, x: usize| (z * d[1] + y) * d[2] + x;
        let corners = [
            (at(hi[0], hi[1], hi[2]), 1.0),
            (at(lo[0], hi[1], hi[2]), -1.0),
            (at(hi[0], lo[1], hi[2]), -1.0),
            (at(hi[0], hi[1], lo[2]), -1.0),
            (at(lo[0], lo[1], hi[2]), 1.0),
            (at(lo[0], hi[1], lo[2]), 1.0),
            (at(hi[0], lo[1], lo[2]), 1.0),
            (at(lo[0], lo[1], lo[2]), -1.0),
        ];
        let mut s = 0.0;
        let mut q = 0.0;
        for (i, sign) in corners {
            s += sign * self.sum[i];
            q += sign * self.sq[i];
        }
        (s, q)
    }
}

/// Runs CFAR on an already collapsed volume, returning `(iz, iy, ix)` hits
/// in canonical order.
pub fn cfar_cells(volume: &Volume<'_>, config: &CfarConfig) -> Result<Vec<(usize, usize, usize)>> {
    config.validate()?;
    let reach = config.reach();
    for axis in 0..3 {
        let required = 2 * reach[axis] + 1;
        if volume.dims[axis] < required {
            return Err(Error::VolumeTooSmall {
                axis,
                size: volume.dims[axis],
                required,
            });
        }
    }
    let integral = Integral::new(volume);
    let n = config.training_cells() as f64;
    let [nz, ny, nx] = volume.dims;
    let g = config.guard;
    let mut hits = Vec::new();
    for iz in reach[0]..nz - reach[0] {
        for iy in reach[1]..ny - reach[1] {
            for ix in reach[2]..nx - reach[2] {
                let c = [iz, iy, ix];
                let outer = integral.box_sums(
                    [c[0] - reach[0], c[1] - reach[1], c[2] - reach[2]],
                    [c[0] + reach[0] + 1, c[1] + reach[1] + 1, c[2] + reach[2] + 1],
                );
                let inner = integral.box_sums(
                    [c[0] - g[0], c[1] - g[1], c[2] - g[2]],
                    [c[0] + g[0] + 1, c[1] + g[1] + 1, c[2] + g[2] + 1],
                );
                let s = outer.0 - inner.0;
                let q = outer.1 - inner.1;
                let mean = s / n;
                let mean_sq = (q / n).max(0.0);
                let std = (mean_sq - mean * mean).max(0.0).sqrt();
                let threshold = config.alpha1 * mean + config.alpha2 * std;
                let power = volume.at(iz, iy, ix);

                // Prefix-sum statistics carry cancellation error; settle
                // close calls with the direct two-pass statistics.
                let band = 1e-5 * (config.alpha1 * mean.abs() + config.alpha2 * mean_sq.sqrt());
                let hit = if (power - threshold).abs() <= band {
                    let (m, sd) = window_stats(volume, c, config);
                    power > config.alpha1 * m + config.alpha2 * sd
                } else {
                    power > threshold
                };
                if hit {
                    hits.push((iz, iy, ix));
                }
            }
        }
    }
    Ok(hits)
}

/// Collapses Doppler, runs CFAR, and attaches world coordinates.
pub fn cfar_detect(tensor: &RadarTensor, config: &CfarConfig) -> Result<CfarPointSet> {
    let grid: CartesianGridSpec = match tensor.spec() {
        GridSpec::Cartesian(c) => *c,
        GridSpec::Polar(_) => {
            return Err(Error::WrongCoordinateKind {
                expected: "cartesian",
            })
        }
    };
    let collapsed = doppler_collapse(tensor, config.collapse);
    let volume = collapsed.volume().expect("collapsed tensor has one Doppler bin");
    let cells = cfar_cells(&volume, config)?;
    let points = cells
        .into_iter()
        .map(|(iz, iy, ix)| {
            let (x, y, z) = grid.voxel_center(iz, iy, ix);
            CfarPoint {
                iz,
                iy,
                ix,
                x,
                y,
                z,
                power: volume.at(iz, iy, ix),
            }
        })
        .collect();
    Ok(CfarPointSet { points })
}

/// Number of points inside the (inclusive) rotated box.
pub fn count_points_in_box(points: &CfarPointSet, bx: &Box3D) -> usize {
    points.iter().filter(|p| bx.contains(p.x, p.y, p.z)).count()
}

/// Counts binned as `(k * bin_size, (k + 1) * bin_size]`, with zero kept
/// apart.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisibilityHistogram {
    pub bin_size: usize,
    pub zero: usize,
    pub bins: Vec<usize>,
}

impl VisibilityHistogram {
    /// `(lower exclusive, upper inclusive)` bounds of bin `k`.
    pub fn bounds(&self, k: usize) -> (usize, usize) {
        (k * self.bin_size, (k + 1) * self.bin_size)
    }

    pub fn total(&self) -> usize {
        self.zero + self.bins.iter().sum::<usize>()
    }
}

pub fn visibility_histogram(counts: &[usize], bin_size: usize) -> Result<VisibilityHistogram> {
    if bin_size == 0 {
        return Err(Error::InvalidConfig("histogram bin size must be positive".into()));
    }
    let mut hist = VisibilityHistogram {
        bin_size,
        zero: 0,
        bins: Vec::new(),
    };
    for &c in counts {
        if c == 0 {
            hist.zero += 1;
            continue;
        }
        let k = (c - 1) / bin_size;
        if hist.bins.len() <= k {
            hist.bins.resize(k + 1, 0);
        }
        hist.bins[k] += 1;
    }
    Ok(hist)
}

/// Keeps the labels whose box encloses at least one CFAR point.
pub fn filter_invisible(labels: &[LabelObject], points: &CfarPointSet) -> Vec<LabelObject> {
    labels
        .iter()
        .filter(|l| points.iter().any(|p| l.bbox.contains(p.x, p.y, p.z)))
        .cloned()
        .collect()
}

/// Writes each label's enclosed point count into `cfar_count`.
pub fn annotate_visibility(labels: &mut [LabelObject], points: &CfarPointSet) {
    for l in labels {
        l.cfar_count = count_points_in_box(points, &l.bbox);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vol(dims: [usize; 3], data: &[f32]) -> Volume<'_> {
        Volume::new(dims, data).unwrap()
    }

    #[test]
    fn constant_volume_threshold() {
        let data = vec![5.0f32; 41 * 41 * 41];
        let v = vol([41, 41, 41], &data);
        let cfg = CfarConfig::cube(15, 5).with_alphas(1.2, 2.0);
        let t = cfar_threshold(&v, (20, 20, 20), &cfg).unwrap();
        assert!((t - 6.0).abs() < 1e-12);
        assert!(cfar_cells(&v, &cfg).unwrap().is_empty());
    }

    #[test]
    fn lone_spike_is_declared() {
        let mut data = vec![0.0f32; 41 * 41 * 41];
        data[(20 * 41 + 20) * 41 + 20] = 3.0;
        let v = vol([41, 41, 41], &data);
        let cfg = CfarConfig::default();
        assert_eq!(cfar_threshold(&v, (20, 20, 20), &cfg).unwrap(), 0.0);
        assert_eq!(cfar_cells(&v, &cfg).unwrap(), vec![(20, 20, 20)]);
    }

    #[test]
    fn window_overrun_and_small_volume() {
        let data = vec![1.0f32; 41 * 41 * 41];
        let v = vol([41, 41, 41], &data);
        let cfg = CfarConfig::default();
        assert!(matches!(
            cfar_threshold(&v, (19, 20, 20), &cfg),
            Err(Error::WindowOverrun { .. })
        ));
        let small = vec![1.0f32; 40 * 41 * 41];
        let v = vol([40, 41, 41], &small);
        assert_eq!(
            cfar_cells(&v, &cfg).unwrap_err(),
            Error::VolumeTooSmall {
                axis: 0,
                size: 40,
                required: 41
            }
        );
    }

    #[test]
    fn config_validation() {
        assert!(CfarConfig::default().validate().is_ok());
        assert!(CfarConfig::cube(15, 5).with_alphas(0.9, 0.0).validate().is_err());
        assert!(CfarConfig::cube(0, 5).validate().is_err());
        assert!(CfarConfig::cube(15, 5).with_alphas(-1.0, 3.0).validate().is_err());
        let mut line = CfarConfig::cube(15, 5);
        line.training = [0, 0, 15];
        line.guard = [0, 0, 5];
        assert_eq!(line.training_cells(), 30);
    }

    #[test]
    fn histogram_bins_are_right_inclusive() {
        let h = visibility_histogram(&[0], 5).unwrap();
        assert_eq!(h.zero, 1);
        assert!(h.bins.is_empty());
        let h = visibility_histogram(&[1, 5], 5).unwrap();
        assert_eq!(h.bins, vec![2]);
        let h = visibility_histogram(&[6], 5).unwrap();
        assert_eq!(h.bins, vec![0, 1]);
        assert_eq!(h.bounds(1), (5, 10));
        assert!(visibility_histogram(&[1], 0).is_err());
    }

    #[test]
    fn point_counting() {
        let empty = CfarPointSet::default();
        let unit = Box3D::new(0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(count_points_in_box(&empty, &unit), 0);
        let p = |x: f64| CfarPoint {
            iz: 0,
            iy: 0,
            ix: 0,
            x,
            y: 0.0,
            z: 0.0,
            power: 1.0,
        };
        let set = CfarPointSet {
            points: vec![p(0.0)],
        };
        assert_eq!(count_points_in_box(&set, &unit), 1);
        let set = CfarPointSet {
            points: vec![p(0.51)],
        };
        assert_eq!(count_points_in_box(&set, &unit), 0);
    }
}
