//! Slow, literal reimplementations used as references by the tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use radtrack_core::assign::CostMatrix;
use radtrack_core::cfar::CfarConfig;
use radtrack_core::geometry::Box3D;
use radtrack_core::jde::Embedding;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Exponential noise volume, `-ln(1 - u)` per cell, stored as f32.
pub fn noise_volume(rng: &mut ChaCha8Rng, dims: [usize; 3]) -> Vec<f32> {
    (0..dims.iter().product::<usize>())
        .map(|_| (-(1.0 - rng.random::<f64>()).ln()) as f32)
        .collect()
}

/// Adds `count` single-cell spikes of height `peak` at random cells.
pub fn add_spikes(rng: &mut ChaCha8Rng, data: &mut [f32], count: usize, peak: f32) {
    for _ in 0..count {
        let i = rng.random_range(0..data.len());
        data[i] += peak;
    }
}

/// Per-cell CFAR exactly as written: gather the training cells, take their
/// mean and population standard deviation, and compare.
pub fn literal_cfar(data: &[f32], dims: [usize; 3], config: &CfarConfig) -> Vec<(usize, usize, usize)> {
    let t = config.training;
    let g = config.guard;
    let reach = [t[0] + g[0], t[1] + g[1], t[2] + g[2]];
    let at = |z: usize, y: usize, x: usize| data[(z * dims[1] + y) * dims[2] + x] as f64;
    let mut hits = Vec::new();
    for iz in 0..dims[0] {
        for iy in 0..dims[1] {
            for ix in 0..dims[2] {
                let cell = [iz, iy, ix];
                if (0..3).any(|a| cell[a] < reach[a] || cell[a] + reach[a] >= dims[a]) {
                    continue;
                }
                let mut training = Vec::new();
                for z in iz - reach[0]..=iz + reach[0] {
                    for y in iy - reach[1]..=iy + reach[1] {
                        for x in ix - reach[2]..=ix + reach[2] {
                            let guarded = z.abs_diff(iz) <= g[0] && y.abs_diff(iy) <= g[1] && x.abs_diff(ix) <= g[2];
                            if !guarded {
                                training.push(at(z, y, x));
                            }
                        }
                    }
                }
                let n = training.len() as f64;
                let mean = training.iter().sum::<f64>() / n;
                let var = training.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                let threshold = config.alpha1 * mean + config.alpha2 * var.sqrt();
                if at(iz, iy, ix) > threshold {
                    hits.push((iz, iy, ix));
                }
            }
        }
    }
    hits
}

/// Minimum total cost over all matchings of maximum cardinality, by
/// enumerating every injective map from the smaller side.
pub fn permutation_min_cost(costs: &CostMatrix) -> f64 {
    let (n, m) = (costs.rows(), costs.cols());
    let transposed = n > m;
    let (small, large) = if transposed { (m, n) } else { (n, m) };
    let get = |i: usize, j: usize| if transposed { costs.get(j, i) } else { costs.get(i, j) };
    fn go(i: usize, small: usize, large: usize, used: &mut Vec<bool>, pairs: &mut Vec<(usize, usize)>, best: &mut f64, get: &dyn Fn(usize, usize) -> f64, transposed: bool) {
        if i == small {
            // Sum in row order of the original matrix, as Matching::total_cost does.
            let mut sorted: Vec<(usize, usize)> = pairs
                .iter()
                .map(|&(a, b)| if transposed { (b, a) } else { (a, b) })
                .collect();
            sorted.sort();
            let total: f64 = sorted
                .iter()
                .map(|&(r, c)| if transposed { get(c, r) } else { get(r, c) })
                .sum();
            if total < *best {
                *best = total;
            }
            return;
        }
        for j in 0..large {
            if !used[j] {
                used[j] = true;
                pairs.push((i, j));
                go(i + 1, small, large, used, pairs, best, get, transposed);
                pairs.pop();
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(0, small, large, &mut vec![false; large], &mut Vec::new(), &mut best, &get, transposed);
    if small == 0 {
        0.0
    } else {
        best
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (1.0 - dot).clamp(0.0, 2.0)
}

/// First index of the smallest cosine distance.
pub fn brute_hard_negative(anchor: &Embedding, negatives: &[Embedding]) -> usize {
    let d: Vec<f64> = negatives.iter().map(|k| cosine(anchor.as_slice(), k.as_slice())).collect();
    let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
    d.iter().position(|&v| v == min).unwrap()
}

pub fn brute_triplet(anchor: &Embedding, positive: &Embedding, negatives: &[Embedding], margin: f64) -> f64 {
    let pos = cosine(anchor.as_slice(), positive.as_slice());
    let neg = negatives
        .iter()
        .map(|k| cosine(anchor.as_slice(), k.as_slice()))
        .fold(f64::INFINITY, f64::min);
    (pos - neg + margin).max(0.0)
}

pub fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Random rotated box with its center in a small region so pairs overlap
/// often.
pub fn random_box(rng: &mut ChaCha8Rng, spread: f64) -> Box3D {
    Box3D::new(
        rng.random_range(-spread..spread),
        rng.random_range(-spread..spread),
        rng.random_range(-0.5..0.5),
        rng.random_range(0.5..5.0),
        rng.random_range(0.5..3.0),
        rng.random_range(0.5..3.0),
        rng.random_range(-3.1..3.1),
    )
    .unwrap()
}

/// Fraction of a uniform sample of the union's bounding region that lands
/// in both boxes over the fraction in either, with `z` held at each center
/// for the BEV variant.
pub fn sampled_iou(rng: &mut ChaCha8Rng, a: &Box3D, b: &Box3D, samples: usize, bev: bool) -> f64 {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for (x, y, z) in a.corners().into_iter().chain(b.corners()) {
        for (k, v) in [x, y, z].into_iter().enumerate() {
            lo[k] = lo[k].min(v);
            hi[k] = hi[k].max(v);
        }
    }
    let inside = |bx: &Box3D, x: f64, y: f64, z: f64| {
        let (s, c) = bx.yaw.sin_cos();
        let (dx, dy) = (x - bx.cx, y - bx.cy);
        let u = c * dx + s * dy;
        let v = -s * dx + c * dy;
        u.abs() <= 0.5 * bx.l && v.abs() <= 0.5 * bx.w && (z - bx.cz).abs() <= 0.5 * bx.h
    };
    let (mut both, mut either) = (0usize, 0usize);
    for _ in 0..samples {
        let x = rng.random_range(lo[0]..hi[0]);
        let y = rng.random_range(lo[1]..hi[1]);
        let (za, zb) = if bev {
            (a.cz, b.cz)
        } else {
            let z = rng.random_range(lo[2]..hi[2]);
            (z, z)
        };
        let (ia, ib) = (inside(a, x, y, za), inside(b, x, y, zb));
        both += (ia && ib) as usize;
        either += (ia || ib) as usize;
    }
    if either == 0 {
        0.0
    } else {
        both as f64 / either as f64
    }
}
