//! 7-DoF boxes and the rotated-box overlap measures built on them.
//!
//! Boxes are parameterised by their center, their extents `(l, w, h)` and a
//! yaw about the vertical axis. `l` runs along the heading, `w` across it.
//! BEV overlap is computed by clipping one rotated rectangle against the
//! other (both convex, counter-clockwise) and taking the shoelace area.

use core::f64::consts::PI;

use alloc::format;
#[allow(unused_imports)] // inherent float methods exist once std is linked
use num_traits::Float;

use crate::error::{Error, Result};

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_yaw(yaw: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let m = (PI - yaw) - two_pi * ((PI - yaw) / two_pi).floor();
    // m in [0, 2pi)
    let r = PI - m;
    if r <= -PI {
        r + two_pi
    } else {
        r
    }
}

/// An oriented 3D bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box3D {
    pub cx: f64,
    pub cy: f64,
    pub cz: f64,
    pub l: f64,
    pub w: f64,
    pub h: f64,
    pub yaw: f64,
}

impl Box3D {
    /// Builds a validated box, wrapping `yaw` into `(-pi, pi]`.
    pub fn new(cx: f64, cy: f64, cz: f64, l: f64, w: f64, h: f64, yaw: f64) -> Result<Self> {
        let b = Box3D {
            cx,
            cy,
            cz,
            l,
            w,
            h,
            yaw: normalize_yaw(yaw),
        };
        b.validate()?;
        Ok(b)
    }

    pub fn from_array(v: [f64; 7]) -> Result<Self> {
        Self::new(v[0], v[1], v[2], v[3], v[4], v[5], v[6])
    }

    pub fn to_array(&self) -> [f64; 7] {
        [self.cx, self.cy, self.cz, self.l, self.w, self.h, self.yaw]
    }

    pub fn validate(&self) -> Result<()> {
        let all = self.to_array();
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidBox(format!("non-finite field in {all:?}")));
        }
        if self.l <= 0.0 || self.w <= 0.0 || self.h <= 0.0 {
            return Err(Error::InvalidBox(format!(
                "dimensions must be positive, got l={} w={} h={}",
                self.l, self.w, self.h
            )));
        }
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        self.l * self.w * self.h
    }

    pub fn bev_area(&self) -> f64 {
        self.l * self.w
    }

    /// BEV corners, counter-clockwise.
    pub fn bev_corners(&self) -> [(f64, f64); 4] {
        let (s, c) = self.yaw.sin_cos();
        let hl = 0.5 * self.l;
        let hw = 0.5 * self.w;
        [(hl, -hw), (hl, hw), (-hl, hw), (-hl, -hw)]
            .map(|(dx, dy)| (self.cx + c * dx - s * dy, self.cy + s * dx + c * dy))
    }

    /// All eight corners.
    pub fn corners(&self) -> [(f64, f64, f64); 8] {
        let bev = self.bev_corners();
        let lo = self.cz - 0.5 * self.h;
        let hi = self.cz + 0.5 * self.h;
        let mut out = [(0.0, 0.0, 0.0); 8];
        for (i, &(x, y)) in bev.iter().enumerate() {
            out[i] = (x, y, lo);
            out[i + 4] = (x, y, hi);
        }
        out
    }

    /// Axis-aligned BEV extent `(along x, along y)` of the rotated footprint.
    pub fn bev_aabb_extent(&self) -> (f64, f64) {
        let (s, c) = self.yaw.sin_cos();
        (
            self.l * c.abs() + self.w * s.abs(),
            self.l * s.abs() + self.w * c.abs(),
        )
    }

    /// Inclusive membership test in the box frame.
    pub fn contains(&self, x: f64, y: f64, z: f64) -> bool {
        let (s, c) = self.yaw.sin_cos();
        let dx = x - self.cx;
        let dy = y - self.cy;
        let lx = c * dx + s * dy;
        let ly = -s * dx + c * dy;
        lx.abs() <= 0.5 * self.l && ly.abs() <= 0.5 * self.w && (z - self.cz).abs() <= 0.5 * self.h
    }

    pub fn center_distance_sq(&self, other: &Box3D) -> f64 {
        let dx = self.cx - other.cx;
        let dy = self.cy - other.cy;
        let dz = self.cz - other.cz;
        dx * dx + dy * dy + dz * dz
    }
}

const MAX_VERTS: usize = 16;

#[derive(Clone, Copy)]
struct Polygon {
    pts: [(f64, f64); MAX_VERTS],
    len: usize,
}

impl Polygon {
    fn from_quad(q: [(f64, f64); 4]) -> Self {
        let mut pts = [(0.0, 0.0); MAX_VERTS];
        pts[..4].copy_from_slice(&q);
        Polygon { pts, len: 4 }
    }

    fn push(&mut self, p: (f64, f64)) {
        if self.len < MAX_VERTS {
            self.pts[self.len] = p;
            self.len += 1;
        }
    }

    fn area(&self) -> f64 {
        if self.len < 3 {
            return 0.0;
        }
        let mut acc = 0.0;
        for i in 0..self.len {
            let (x0, y0) = self.pts[i];
            let (x1, y1) = self.pts[(i + 1) % self.len];
            acc += x0 * y1 - x1 * y0;
        }
        0.5 * acc.abs()
    }

    /// Keeps the part left of the directed line `a -> b`.
    fn clip(&self, a: (f64, f64), b: (f64, f64)) -> Polygon {
        let side = |p: (f64, f64)| (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
        let mut out = Polygon {
            pts: [(0.0, 0.0); MAX_VERTS],
            len: 0,
        };
        if self.len == 0 {
            return out;
        }
        let mut prev = self.pts[self.len - 1];
        let mut prev_side = side(prev);
        for i in 0..self.len {
            let cur = self.pts[i];
            let cur_side = side(cur);
            let cur_in = cur_side >= 0.0;
            let prev_in = prev_side >= 0.0;
            if cur_in != prev_in {
                let t = prev_side / (prev_side - cur_side);
                out.push((prev.0 + t * (cur.0 - prev.0), prev.1 + t * (cur.1 - prev.1)));
            }
            if cur_in {
                out.push(cur);
            }
            prev = cur;
            prev_side = cur_side;
        }
        out
    }
}

/// Area of the intersection of the two rotated BEV rectangles.
pub fn bev_intersection_area(a: &Box3D, b: &Box3D) -> f64 {
    // Cheap reject on bounding circles.
    let ra = 0.5 * (a.l * a.l + a.w * a.w).sqrt();
    let rb = 0.5 * (b.l * b.l + b.w * b.w).sqrt();
    let dx = a.cx - b.cx;
    let dy = a.cy - b.cy;
    if dx * dx + dy * dy > (ra + rb) * (ra + rb) {
        return 0.0;
    }
    let clip_quad = b.bev_corners();
    let mut poly = Polygon::from_quad(a.bev_corners());
    for i in 0..4 {
        poly = poly.clip(clip_quad[i], clip_quad[(i + 1) % 4]);
        if poly.len == 0 {
            return 0.0;
        }
    }
    poly.area().min(a.bev_area()).min(b.bev_area())
}

fn vertical_overlap(a: &Box3D, b: &Box3D) -> f64 {
    let lo = (a.cz - 0.5 * a.h).max(b.cz - 0.5 * b.h);
    let hi = (a.cz + 0.5 * a.h).min(b.cz + 0.5 * b.h);
    (hi - lo).max(0.0)
}

/// Intersection over union of the rotated BEV footprints.
pub fn iou_bev(a: &Box3D, b: &Box3D) -> f64 {
    if a == b {
        return 1.0;
    }
    let inter = bev_intersection_area(a, b);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.bev_area() + b.bev_area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Intersection over union of the two oriented 3D boxes.
pub fn iou_3d(a: &Box3D, b: &Box3D) -> f64 {
    if a == b {
        return 1.0;
    }
    let dz = vertical_overlap(a, b);
    if dz <= 0.0 {
        return 0.0;
    }
    let inter = bev_intersection_area(a, b) * dz;
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.volume() + b.volume() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Squared diagonal of the axis-aligned box enclosing both boxes' corners.
pub fn enclosing_diagonal_sq(a: &Box3D, b: &Box3D) -> f64 {
    let mut lo = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (x, y, z) in a.corners().into_iter().chain(b.corners()) {
        lo = (lo.0.min(x), lo.1.min(y), lo.2.min(z));
        hi = (hi.0.max(x), hi.1.max(y), hi.2.max(z));
    }
    let (ex, ey, ez) = (hi.0 - lo.0, hi.1 - lo.1, hi.2 - lo.2);
    ex * ex + ey * ey + ez * ez
}

const MIN_DIAGONAL: f64 = 1e-9;

/// Distance-IoU cost `1 - IoU + rho^2 / c^2` on 3D boxes, in `[0, 2)`.
///
/// `rho` is the center distance and `c` the diagonal of the smallest
/// axis-aligned box enclosing all sixteen corners.
pub fn diou_cost(a: &Box3D, b: &Box3D) -> f64 {
    let iou = iou_3d(a, b);
    let c2 = enclosing_diagonal_sq(a, b).max(MIN_DIAGONAL * MIN_DIAGONAL);
    let rho2 = a.center_distance_sq(b);
    (1.0 - iou) + rho2 / c2
}

/// Plain IoU cost `1 - IoU` on 3D boxes.
pub fn iou_cost(a: &Box3D, b: &Box3D) -> f64 {
    1.0 - iou_3d(a, b)
}
