//! Binary PGM/PPM dumps of BEV maps.
//!
//! Row 0 of an image is the far edge (largest y), so the sensor sits at the
//! bottom with x pointing right.

use radtrack_core::geometry::Box3D;
use radtrack_core::targets::BevGrid;

/// 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Gray {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

/// 8-bit RGB image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Rgb {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 3]>,
}

/// Maps `values` (row 0 at `y_min`) to gray levels, flipping vertically.
/// `scale` is the value shown as white; values are clamped to `[0, scale]`.
pub fn gray_from_grid(values: &[f64], rows: usize, cols: usize, scale: f64) -> Gray {
    let mut pixels = vec![0u8; rows * cols];
    let scale = if scale > 0.0 { scale } else { 1.0 };
    for r in 0..rows {
        for c in 0..cols {
            let v = (values[r * cols + c] / scale).clamp(0.0, 1.0);
            pixels[(rows - 1 - r) * cols + c] = (v * 255.0).round() as u8;
        }
    }
    Gray {
        width: cols,
        height: rows,
        pixels,
    }
}

impl Gray {
    pub fn encode_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn to_rgb(&self) -> Rgb {
        Rgb {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|&g| [g, g, g]).collect(),
        }
    }
}

impl Rgb {
    pub fn encode_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        for p in &self.pixels {
            out.extend_from_slice(p);
        }
        out
    }

    fn put(&mut self, x: i64, y: i64, color: [u8; 3]) {
        if x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height {
            self.pixels[y as usize * self.width + x as usize] = color;
        }
    }

    /// Bresenham line between pixel coordinates.
    pub fn line(&mut self, (x0, y0): (i64, i64), (x1, y1): (i64, i64), color: [u8; 3]) {
        let far = 4 * (self.width + self.height) as i64;
        if [x0, y0, x1, y1].iter().any(|v| v.abs() > far) {
            return;
        }
        let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
        let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
        let (mut x, mut y, mut err) = (x0, y0, dx + dy);
        loop {
            self.put(x, y, color);
            if x == x1 && y == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x += sx;
            }
            if e2 <= dx {
                err += dx;
                y += sy;
            }
        }
    }

    /// Outline of a box footprint plus a tick toward its heading.
    pub fn draw_box(&mut self, grid: &BevGrid, b: &Box3D, color: [u8; 3]) {
        let height = self.height as i64;
        let px = |(x, y): (f64, f64)| {
            let (u, v) = grid.to_cells(x, y);
            (u.floor() as i64, height - 1 - v.floor() as i64)
        };
        let corners = b.bev_corners();
        for k in 0..4 {
            self.line(px(corners[k]), px(corners[(k + 1) % 4]), color);
        }
        let (s, c) = b.yaw.sin_cos();
        let nose = (b.cx + 0.5 * b.l * c, b.cy + 0.5 * b.l * s);
        self.line(px((b.cx, b.cy)), px(nose), color);
    }
}

/// Stable color for an id.
pub fn id_color(id: u64) -> [u8; 3] {
    const PALETTE: [[u8; 3]; 8] = [
        [230, 25, 75],
        [60, 180, 75],
        [255, 225, 25],
        [0, 130, 200],
        [245, 130, 48],
        [145, 30, 180],
        [70, 240, 240],
        [240, 50, 230],
    ];
    PALETTE[(id % PALETTE.len() as u64) as usize]
}
