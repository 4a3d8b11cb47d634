//! Training-target generation for a BEV keypoint detector.
//!
//! Each labeled object contributes an axis-aligned Gaussian peak to its
//! class channel, scaled by a visibility weight derived from the number of
//! CFAR points inside the object. Overlapping peaks combine by maximum.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // inherent float methods exist once std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::geometry::Box3D;
use crate::grid::CartesianGridSpec;

pub const CLASS_SEDAN: u32 = 0;
pub const CLASS_BUS_OR_TRUCK: u32 = 1;

/// A ground-truth object in one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelObject {
    pub bbox: Box3D,
    pub class_id: u32,
    pub track_id: u64,
    pub cfar_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatmapConfig {
    /// Size-adaptive factor applied to the footprint before dividing by 6.
    pub alpha: f64,
    /// Point count at which the visibility weight saturates to 1.
    pub n_ref: usize,
    /// Lower bound of the visibility weight.
    pub w_min: f64,
    pub num_classes: usize,
    /// Smallest sigma in cells.
    pub min_sigma: f64,
}

impl Default for HeatmapConfig {
    fn default() -> Self {
        HeatmapConfig {
            alpha: 1.0,
            n_ref: 20,
            w_min: 0.1,
            num_classes: 2,
            min_sigma: 0.5,
        }
    }
}

impl HeatmapConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig("heatmap alpha must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.w_min) {
            return Err(Error::InvalidConfig("w_min must lie in [0, 1]".into()));
        }
        if self.n_ref == 0 {
            return Err(Error::InvalidConfig("n_ref must be at least 1".into()));
        }
        if self.num_classes == 0 {
            return Err(Error::InvalidConfig("num_classes must be at least 1".into()));
        }
        if !(self.min_sigma > 0.0) {
            return Err(Error::InvalidConfig("min_sigma must be positive".into()));
        }
        Ok(())
    }
}

/// BEV raster derived from a Cartesian grid: columns run along x (`u`),
/// rows along y (`v`). Cell `(row, col)` has its center at
/// `(u, v) = (col + 0.5, row + 0.5)` in cell units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BevGrid {
    pub rows: usize,
    pub cols: usize,
    pub cell_x: f64,
    pub cell_y: f64,
    pub x_min: f64,
    pub y_min: f64,
}

impl BevGrid {
    pub fn from_cartesian(spec: &CartesianGridSpec) -> Self {
        let [_, ny, nx] = spec.dims();
        BevGrid {
            rows: ny,
            cols: nx,
            cell_x: spec.voxel_size[2],
            cell_y: spec.voxel_size[1],
            x_min: spec.extents.x_min,
            y_min: spec.extents.y_min,
        }
    }

    /// Continuous `(u, v)` cell coordinate of a world point.
    pub fn to_cells(&self, x: f64, y: f64) -> (f64, f64) {
        ((x - self.x_min) / self.cell_x, (y - self.y_min) / self.cell_y)
    }

    pub fn contains_cells(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && u < self.cols as f64 && v >= 0.0 && v < self.rows as f64
    }
}

/// `(sigma_x, sigma_y) = alpha * (w_l, h_l) / 6`, floored at `min_sigma`.
pub fn gaussian_sigma_cells(w_l: f64, h_l: f64, alpha: f64, min_sigma: f64) -> (f64, f64) {
    (
        (alpha * w_l / 6.0).max(min_sigma),
        (alpha * h_l / 6.0).max(min_sigma),
    )
}

/// Sigmas for a box, from its axis-aligned BEV extent measured in cells.
pub fn gaussian_sigma(bx: &Box3D, grid: &BevGrid, config: &HeatmapConfig) -> (f64, f64) {
    let (ex, ey) = bx.bev_aabb_extent();
    gaussian_sigma_cells(ex / grid.cell_x, ey / grid.cell_y, config.alpha, config.min_sigma)
}

/// Saturating ramp `max(w_min, min(1, count / n_ref))`.
pub fn visibility_weight(cfar_count: usize, config: &HeatmapConfig) -> f64 {
    let ramp = (cfar_count as f64 / config.n_ref as f64).min(1.0);
    ramp.max(config.w_min)
}

/// Per-class BEV heatmap, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub classes: usize,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Heatmap {
    pub fn zeros(classes: usize, rows: usize, cols: usize) -> Self {
        Heatmap {
            classes,
            rows,
            cols,
            data: vec![0.0; classes * rows * cols],
        }
    }

    pub fn get(&self, class: usize, row: usize, col: usize) -> f64 {
        self.data[(class * self.rows + row) * self.cols + col]
    }

    pub fn channel(&self, class: usize) -> &[f64] {
        let n = self.rows * self.cols;
        &self.data[class * n..(class + 1) * n]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedHeatmap {
    pub heatmap: Heatmap,
    /// Labels dropped because their center or class fell outside the map.
    pub skipped: usize,
}

/// Renders the soft-labelled heatmap.
///
/// The Gaussian support is truncated to cells whose centers lie within
/// three sigmas of the object center along each axis.
pub fn render_heatmap(labels: &[LabelObject], grid: &BevGrid, config: &HeatmapConfig) -> Result<RenderedHeatmap> {
    config.validate()?;
    let mut heatmap = Heatmap::zeros(config.num_classes, grid.rows, grid.cols);
    let mut skipped = 0;
    for label in labels {
        let class = label.class_id as usize;
        let (cu, cv) = grid.to_cells(label.bbox.cx, label.bbox.cy);
        if class >= config.num_classes || !grid.contains_cells(cu, cv) {
            skipped += 1;
            continue;
        }
        let weight = visibility_weight(label.cfar_count, config);
        let (sx, sy) = gaussian_sigma(&label.bbox, grid, config);
        let (c0, c1) = support(cu, 3.0 * sx, grid.cols);
        let (r0, r1) = support(cv, 3.0 * sy, grid.rows);
        let plane = class * grid.rows * grid.cols;
        for row in r0..r1 {
            let v = row as f64 + 0.5;
            for col in c0..c1 {
                let u = col as f64 + 0.5;
                let value = gaussian_value(weight, u, v, cu, cv, sx, sy);
                let cell = &mut heatmap.data[plane + row * grid.cols + col];
                if value > *cell {
                    *cell = value;
                }
            }
        }
    }
    Ok(RenderedHeatmap { heatmap, skipped })
}

/// `w * exp(-(u - cu)^2 / 2sx^2 - (v - cv)^2 / 2sy^2)`.
pub fn gaussian_value(weight: f64, u: f64, v: f64, cu: f64, cv: f64, sx: f64, sy: f64) -> f64 {
    let du = u - cu;
    let dv = v - cv;
    weight * (-(du * du) / (2.0 * sx * sx) - (dv * dv) / (2.0 * sy * sy)).exp()
}

/// Half-open range of cell indices whose centers lie within `radius` of
/// `center`.
fn support(center: f64, radius: f64, len: usize) -> (usize, usize) {
    let lo = (center - radius - 0.5).ceil().max(0.0);
    let hi = (center + radius - 0.5).floor() + 1.0;
    let hi = hi.min(len as f64).max(lo);
    (lo as usize, hi as usize)
}

/// Regression targets of one object at its center cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionTarget {
    pub class_id: u32,
    pub row: usize,
    pub col: usize,
    /// Sub-cell center offset `(du, dv)` in `[0, 1)`.
    pub offset: (f64, f64),
    pub z: f64,
    /// `(ln l, ln w, ln h)`.
    pub log_size: [f64; 3],
    pub sin_yaw: f64,
    pub cos_yaw: f64,
}

impl RegressionTarget {
    pub fn decode(&self, grid: &BevGrid) -> Result<Box3D> {
        let u = self.col as f64 + self.offset.0;
        let v = self.row as f64 + self.offset.1;
        Box3D::new(
            grid.x_min + u * grid.cell_x,
            grid.y_min + v * grid.cell_y,
            self.z,
            self.log_size[0].exp(),
            self.log_size[1].exp(),
            self.log_size[2].exp(),
            self.sin_yaw.atan2(self.cos_yaw),
        )
    }
}

pub fn encode_regression_targets(labels: &[LabelObject], grid: &BevGrid) -> Result<Vec<RegressionTarget>> {
    labels
        .iter()
        .map(|label| {
            let b = &label.bbox;
            if !(b.l > 0.0 && b.w > 0.0 && b.h > 0.0) {
                return Err(Error::InvalidBox(alloc::format!(
                    "non-positive dimensions ({}, {}, {})",
                    b.l,
                    b.w,
                    b.h
                )));
            }
            let (u, v) = grid.to_cells(b.cx, b.cy);
            if !grid.contains_cells(u, v) {
                return Err(Error::OutOfGrid {
                    x: b.cx,
                    y: b.cy,
                    z: b.cz,
                });
            }
            let col = (u.floor() as usize).min(grid.cols - 1);
            let row = (v.floor() as usize).min(grid.rows - 1);
            let (s, c) = b.yaw.sin_cos();
            Ok(RegressionTarget {
                class_id: label.class_id,
                row,
                col,
                offset: (u - col as f64, v - row as f64),
                z: b.cz,
                log_size: [b.l.ln(), b.w.ln(), b.h.ln()],
                sin_yaw: s,
                cos_yaw: c,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::E;

    fn grid() -> BevGrid {
        BevGrid {
            rows: 40,
            cols: 60,
            cell_x: 0.5,
            cell_y: 0.5,
            x_min: 0.0,
            y_min: -10.0,
        }
    }

    fn label(cx: f64, cy: f64, l: f64, w: f64, count: usize) -> LabelObject {
        LabelObject {
            bbox: Box3D::new(cx, cy, 0.0, l, w, 1.5, 0.0).unwrap(),
            class_id: CLASS_SEDAN,
            track_id: 1,
            cfar_count: count,
        }
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(gaussian_sigma_cells(6.0, 6.0, 1.0, 0.5).0, 1.0);
        assert_eq!(gaussian_sigma_cells(12.0, 6.0, 0.5, 0.5), (1.0, 0.5));
        assert_eq!(gaussian_sigma_cells(1.0, 1.0, 1.0, 0.5), (0.5, 0.5));
        let (a, b) = gaussian_sigma_cells(9.0, 15.0, 1.0, 0.5);
        let (c, d) = gaussian_sigma_cells(9.0, 15.0, 2.0, 0.5);
        assert_eq!((2.0 * a, 2.0 * b), (c, d));
    }

    #[test]
    fn weight_ramp() {
        let cfg = HeatmapConfig::default();
        assert_eq!(visibility_weight(20, &cfg), 1.0);
        assert_eq!(visibility_weight(200, &cfg), 1.0);
        assert_eq!(visibility_weight(10, &cfg), 0.5);
        assert_eq!(visibility_weight(1, &cfg), 0.1);
        let mut last = 0.0;
        for n in 0..=cfg.n_ref + 5 {
            let w = visibility_weight(n, &cfg);
            assert!(w >= last && (cfg.w_min..=1.0).contains(&w));
            last = w;
        }
    }

    #[test]
    fn peak_and_one_sigma_offset() {
        let g = grid();
        let cfg = HeatmapConfig::default();
        // Center on the center of cell (row 20, col 30).
        let l = label(15.25, 0.25, 4.5, 1.8, 10);
        let out = render_heatmap(&[l], &g, &cfg).unwrap();
        let w = visibility_weight(10, &cfg);
        assert_eq!(out.heatmap.get(0, 20, 30), w);
        let (sx, _) = gaussian_sigma(&l.bbox, &g, &cfg);
        let (cu, cv) = g.to_cells(l.bbox.cx, l.bbox.cy);
        let expected = w * (-0.5f64).exp();
        assert!((gaussian_value(w, cu + sx, cv, cu, cv, sx, 1.0) - expected).abs() < 1e-9);
    }

    #[test]
    fn overlapping_peaks_take_the_max() {
        let g = grid();
        let cfg = HeatmapConfig::default();
        let a = label(14.0, 0.0, 4.5, 1.8, 20);
        let b = label(15.5, 0.5, 4.5, 1.8, 8);
        let out = render_heatmap(&[a, b], &g, &cfg).unwrap().heatmap;
        let eval = |l: &LabelObject, row: usize, col: usize| {
            let (sx, sy) = gaussian_sigma(&l.bbox, &g, &cfg);
            let (cu, cv) = g.to_cells(l.bbox.cx, l.bbox.cy);
            let (u, v) = (col as f64 + 0.5, row as f64 + 0.5);
            if (u - cu).abs() <= 3.0 * sx && (v - cv).abs() <= 3.0 * sy {
                gaussian_value(visibility_weight(l.cfar_count, &cfg), u, v, cu, cv, sx, sy)
            } else {
                0.0
            }
        };
        for row in 0..g.rows {
            for col in 0..g.cols {
                let want = eval(&a, row, col).max(eval(&b, row, col));
                assert_eq!(out.get(0, row, col), want);
            }
        }
    }

    #[test]
    fn out_of_grid_labels_are_skipped() {
        let g = grid();
        let cfg = HeatmapConfig::default();
        let out = render_heatmap(&[label(-5.0, 0.0, 4.0, 2.0, 5)], &g, &cfg).unwrap();
        assert_eq!(out.skipped, 1);
        assert!(out.heatmap.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn regression_encoding() {
        let g = grid();
        let l = label(15.25, 0.25, E, 1.8, 3);
        let t = encode_regression_targets(&[l], &g).unwrap()[0];
        assert_eq!(t.offset, (0.5, 0.5));
        assert_eq!((t.row, t.col), (20, 30));
        assert!((t.log_size[0] - 1.0).abs() < 1e-15);
        let back = t.decode(&g).unwrap();
        assert!((back.cx - l.bbox.cx).abs() < 1e-12);
        assert!((back.l - l.bbox.l).abs() < 1e-12);

        let mut bad = l;
        bad.bbox.w = 0.0;
        assert!(encode_regression_targets(&[bad], &g).is_err());
    }
}
