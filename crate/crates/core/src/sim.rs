//! Synthetic scenes for desk-scale verification: constant-velocity objects,
//! point-scatterer polar tensors, corrupted detections, and brute-force
//! oracles.
//!
//! Every random draw comes from a ChaCha8 stream seeded by
//! [`derive_seed`]`(seed, stream, index)`, so each frame can be produced
//! independently of the others.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // inherent float methods exist once std is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, StandardNormal};

use crate::assign::CostMatrix;
use crate::error::{Error, Result};
use crate::geometry::Box3D;
use crate::grid::{Extents, GridSpec, PolarGridSpec, RadarTensor};
use crate::jde::Embedding;
use crate::metrics::IouKind;
use crate::targets::{LabelObject, CLASS_BUS_OR_TRUCK, CLASS_SEDAN};
use crate::tracker::Detection;

const STREAM_SCENARIO: u64 = 1;
const STREAM_RENDER: u64 = 2;
const STREAM_CORRUPT: u64 = 3;
const STREAM_EMBEDDING: u64 = 4;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `splitmix64(splitmix64(seed ^ splitmix64(stream)) ^ index)`.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(stream)) ^ index)
}

fn rng_for(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream, index))
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi <= lo {
        lo
    } else {
        lo + (hi - lo) * rng.random::<f64>()
    }
}

fn check_range(name: &str, (lo, hi): (f64, f64)) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::InvalidConfig(alloc::format!("{name} must be a finite range with lo <= hi")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioConfig {
    pub num_objects: usize,
    pub frames: usize,
    /// Seconds per frame.
    pub dt: f64,
    pub seed: u64,
    pub spawn_x: (f64, f64),
    pub spawn_y: (f64, f64),
    pub velocity_x: (f64, f64),
    pub velocity_y: (f64, f64),
    /// Box centers must stay inside this region; objects that cannot are
    /// dropped from the frames they leave it in.
    pub fov: Extents,
    /// Probability that an object is a bus or truck.
    pub bus_fraction: f64,
    /// Smallest center distance between two objects over the sequence.
    pub min_separation: f64,
    pub ground_z: f64,
    pub scatterers_per_object: usize,
    /// Mean of the exponential noise power.
    pub noise_floor: f64,
    pub peak_snr: f64,
    /// Radial speed per Doppler bin, m/s.
    pub doppler_scale: f64,
    /// Scatterer bump width in polar bins.
    pub bump_sigma: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            num_objects: 10,
            frames: 100,
            dt: 0.1,
            seed: 0,
            spawn_x: (15.0, 55.0),
            spawn_y: (-10.0, 10.0),
            velocity_x: (-3.0, 3.0),
            velocity_y: (-1.0, 1.0),
            fov: Extents {
                x_min: 5.0,
                x_max: 65.0,
                y_min: -13.0,
                y_max: 13.0,
                z_min: -2.0,
                z_max: 7.6,
            },
            bus_fraction: 0.3,
            min_separation: 8.0,
            ground_z: -1.0,
            scatterers_per_object: 6,
            noise_floor: 1.0,
            peak_snr: 100.0,
            doppler_scale: 0.5,
            bump_sigma: 0.8,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        check_range("spawn_x", self.spawn_x)?;
        check_range("spawn_y", self.spawn_y)?;
        check_range("velocity_x", self.velocity_x)?;
        check_range("velocity_y", self.velocity_y)?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig("dt must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.bus_fraction) {
            return Err(Error::InvalidConfig("bus_fraction must lie in [0, 1]".into()));
        }
        if !(self.min_separation >= 0.0 && self.min_separation.is_finite()) {
            return Err(Error::InvalidConfig("min_separation must be non-negative".into()));
        }
        if !(self.noise_floor >= 0.0 && self.noise_floor.is_finite()) {
            return Err(Error::InvalidConfig("noise_floor must be non-negative".into()));
        }
        if !(self.peak_snr >= 0.0 && self.peak_snr.is_finite()) {
            return Err(Error::InvalidConfig("peak_snr must be non-negative".into()));
        }
        if !(self.doppler_scale > 0.0 && self.doppler_scale.is_finite()) {
            return Err(Error::InvalidConfig("doppler_scale must be positive".into()));
        }
        if !(self.bump_sigma > 0.0 && self.bump_sigma.is_finite()) {
            return Err(Error::InvalidConfig("bump_sigma must be positive".into()));
        }
        if !self.ground_z.is_finite() {
            return Err(Error::InvalidConfig("ground_z must be finite".into()));
        }
        Ok(())
    }
}

/// One simulated object: its box at frame 0 and its constant velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimObject {
    pub track_id: u64,
    pub class_id: u32,
    pub start: Box3D,
    pub velocity: [f64; 3],
}

impl SimObject {
    pub fn at(&self, t: f64) -> Box3D {
        Box3D {
            cx: self.start.cx + self.velocity[0] * t,
            cy: self.start.cy + self.velocity[1] * t,
            cz: self.start.cz + self.velocity[2] * t,
            ..self.start
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub objects: Vec<SimObject>,
    pub frames: Vec<Vec<LabelObject>>,
}

impl Scenario {
    /// Builds the per-frame labels; objects outside `fov` are left out.
    pub fn from_objects(objects: Vec<SimObject>, frames: usize, dt: f64, fov: &Extents) -> Self {
        let frames = (0..frames)
            .map(|f| {
                objects
                    .iter()
                    .map(|o| LabelObject {
                        bbox: o.at(f as f64 * dt),
                        class_id: o.class_id,
                        track_id: o.track_id,
                        cfar_count: 0,
                    })
                    .filter(|l| fov.contains(l.bbox.cx, l.bbox.cy, l.bbox.cz))
                    .collect()
            })
            .collect();
        Scenario { objects, frames }
    }

    pub fn velocities(&self) -> BTreeMap<u64, [f64; 3]> {
        self.objects.iter().map(|o| (o.track_id, o.velocity)).collect()
    }
}

/// Smallest planar distance between two linear trajectories over `[0, t_end]`.
fn min_distance(a: &SimObject, b: &SimObject, t_end: f64) -> f64 {
    let dx = a.start.cx - b.start.cx;
    let dy = a.start.cy - b.start.cy;
    let vx = a.velocity[0] - b.velocity[0];
    let vy = a.velocity[1] - b.velocity[1];
    let vv = vx * vx + vy * vy;
    let t = if vv > 0.0 {
        (-(dx * vx + dy * vy) / vv).clamp(0.0, t_end)
    } else {
        0.0
    };
    ((dx + vx * t).powi(2) + (dy + vy * t).powi(2)).sqrt()
}

const PLACEMENT_ATTEMPTS: usize = 200;

/// Constant-velocity objects with ids `1..=num_objects`, all present from
/// frame 0. Placement is resampled until the object stays in the FOV and
/// away from earlier objects; after too many attempts the last draw is kept.
pub fn generate_scenario(config: &ScenarioConfig) -> Result<Scenario> {
    config.validate()?;
    let mut rng = rng_for(config.seed, STREAM_SCENARIO, 0);
    let t_end = config.frames.saturating_sub(1) as f64 * config.dt;
    let mut objects: Vec<SimObject> = Vec::with_capacity(config.num_objects);
    for k in 0..config.num_objects {
        let mut chosen = None;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let class_id = if rng.random::<f64>() < config.bus_fraction {
                CLASS_BUS_OR_TRUCK
            } else {
                CLASS_SEDAN
            };
            let (l, w, h) = if class_id == CLASS_SEDAN {
                (4.5, 1.9, 1.6)
            } else {
                (10.0, 2.6, 3.2)
            };
            let scale = uniform(&mut rng, (0.9, 1.1));
            let cx = uniform(&mut rng, config.spawn_x);
            let cy = uniform(&mut rng, config.spawn_y);
            let vx = uniform(&mut rng, config.velocity_x);
            let vy = uniform(&mut rng, config.velocity_y);
            let yaw = if vx != 0.0 || vy != 0.0 {
                vy.atan2(vx)
            } else {
                uniform(&mut rng, (-PI, PI))
            };
            let h = h * scale;
            let start = Box3D::new(cx, cy, config.ground_z + 0.5 * h, l * scale, w * scale, h, yaw)?;
            let candidate = SimObject {
                track_id: k as u64 + 1,
                class_id,
                start,
                velocity: [vx, vy, 0.0],
            };
            let last = candidate.at(t_end);
            let inside = config.fov.contains(start.cx, start.cy, start.cz)
                && config.fov.contains(last.cx, last.cy, last.cz);
            let apart = objects
                .iter()
                .all(|o| min_distance(o, &candidate, t_end) >= config.min_separation);
            chosen = Some(candidate);
            if inside && apart {
                break;
            }
        }
        if let Some(c) = chosen {
            objects.push(c);
        }
    }
    Ok(Scenario::from_objects(objects, config.frames, config.dt, &config.fov))
}

/// Two sedans whose paths cross at the middle frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingConfig {
    pub frames: usize,
    pub dt: f64,
    pub seed: u64,
    /// Speed of each object relative to the other.
    pub relative_speed: f64,
    /// Half-angle between the two headings, radians.
    pub half_angle: (f64, f64),
    pub crossing_x: (f64, f64),
    pub crossing_y: (f64, f64),
    pub ground_z: f64,
}

impl Default for CrossingConfig {
    fn default() -> Self {
        CrossingConfig {
            frames: 40,
            dt: 0.1,
            seed: 0,
            relative_speed: 6.0,
            half_angle: (20f64.to_radians(), 45f64.to_radians()),
            crossing_x: (25.0, 45.0),
            crossing_y: (-3.0, 3.0),
            ground_z: -1.0,
        }
    }
}

pub fn crossing_scenario(config: &CrossingConfig) -> Result<Scenario> {
    check_range("half_angle", config.half_angle)?;
    check_range("crossing_x", config.crossing_x)?;
    check_range("crossing_y", config.crossing_y)?;
    if !(config.dt > 0.0 && config.relative_speed > 0.0 && config.relative_speed.is_finite()) {
        return Err(Error::InvalidConfig("dt and relative_speed must be positive".into()));
    }
    let mut rng = rng_for(config.seed, STREAM_SCENARIO, 1);
    let theta = uniform(&mut rng, config.half_angle);
    if !(theta > 0.0 && theta < 0.5 * PI) {
        return Err(Error::InvalidConfig("half_angle must lie in (0, pi/2)".into()));
    }
    let px = uniform(&mut rng, config.crossing_x);
    let py = uniform(&mut rng, config.crossing_y);
    let heading = uniform(&mut rng, (-0.2, 0.2));
    // Relative velocity of two objects at +-theta is 2 s sin(theta).
    let speed = config.relative_speed / (2.0 * theta.sin());
    let t_cross = (config.frames / 2) as f64 * config.dt;
    let mut objects = Vec::new();
    for (k, sign) in [1.0f64, -1.0].into_iter().enumerate() {
        let yaw = heading + sign * theta;
        let (s, c) = yaw.sin_cos();
        let v = [speed * c, speed * s, 0.0];
        let h = 1.6;
        let start = Box3D::new(
            px - v[0] * t_cross,
            py - v[1] * t_cross,
            config.ground_z + 0.5 * h,
            4.5,
            1.9,
            h,
            yaw,
        )?;
        objects.push(SimObject {
            track_id: k as u64 + 1,
            class_id: CLASS_SEDAN,
            start,
            velocity: v,
        });
    }
    let everywhere = Extents {
        x_min: f64::NEG_INFINITY,
        x_max: f64::INFINITY,
        y_min: f64::NEG_INFINITY,
        y_max: f64::INFINITY,
        z_min: f64::NEG_INFINITY,
        z_max: f64::INFINITY,
    };
    Ok(Scenario::from_objects(objects, config.frames, config.dt, &everywhere))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedTensor {
    pub tensor: RadarTensor,
    /// Labels whose center falls outside the polar span.
    pub skipped: usize,
}

fn polar_of(x: f64, y: f64, z: f64) -> (f64, f64, f64) {
    let ground = (x * x + y * y).sqrt();
    ((ground * ground + z * z).sqrt(), y.atan2(x), z.atan2(ground))
}

fn in_span(v: f64, offset: f64, res: f64, bins: usize) -> bool {
    let f = (v - offset) / res;
    if bins == 1 {
        return f.abs() <= 0.5;
    }
    f >= 0.0 && f <= (bins - 1) as f64
}

/// Renders one frame: exponential noise in every cell plus a Gaussian bump
/// per scatterer, in the Doppler bin of the object's radial speed.
///
/// Scatterers are drawn uniformly inside each box. The bump peak is
/// `peak_snr * noise_floor`, or `peak_snr` when the floor is zero.
pub fn render_polar_tensor(
    labels: &[LabelObject],
    velocities: &BTreeMap<u64, [f64; 3]>,
    spec: &PolarGridSpec,
    config: &ScenarioConfig,
    frame: u64,
) -> Result<RenderedTensor> {
    spec.validate()?;
    config.validate()?;
    let gspec = GridSpec::Polar(*spec);
    let [nr, na, ne] = spec.spatial_dims();
    let cells = nr * na * ne;
    let nd = spec.doppler_bins;
    let mut rng = rng_for(config.seed, STREAM_RENDER, frame);
    let mut data = vec![0.0f32; nd * cells];
    if config.noise_floor > 0.0 {
        let exp = Exp::new(1.0 / config.noise_floor).map_err(|_| Error::InvalidConfig("noise_floor".into()))?;
        for v in data.iter_mut() {
            *v = exp.sample(&mut rng) as f32;
        }
    }
    let peak = if config.noise_floor > 0.0 {
        config.peak_snr * config.noise_floor
    } else {
        config.peak_snr
    };
    let sigma = config.bump_sigma;
    let reach = (3.0 * sigma).ceil() as i64;
    let mut skipped = 0;
    for label in labels {
        let b = &label.bbox;
        let (r, az, el) = polar_of(b.cx, b.cy, b.cz);
        if !(in_span(r, spec.range_offset, spec.range_res, nr)
            && in_span(az, spec.azimuth_offset, spec.azimuth_res, na)
            && in_span(el, spec.elevation_offset, spec.elevation_res, ne))
        {
            skipped += 1;
            continue;
        }
        let v = velocities.get(&label.track_id).copied().unwrap_or([0.0; 3]);
        let radial = (v[0] * b.cx + v[1] * b.cy + v[2] * b.cz) / r.max(1e-9);
        let centre_bin = (nd / 2) as f64 + (radial / config.doppler_scale).round();
        let d = centre_bin.clamp(0.0, (nd - 1) as f64) as usize;
        let (s, c) = b.yaw.sin_cos();
        for _ in 0..config.scatterers_per_object {
            let u = uniform(&mut rng, (-0.5, 0.5)) * b.l;
            let w = uniform(&mut rng, (-0.5, 0.5)) * b.w;
            let hz = uniform(&mut rng, (-0.5, 0.5)) * b.h;
            let x = b.cx + c * u - s * w;
            let y = b.cy + s * u + c * w;
            let z = b.cz + hz;
            let (r, az, el) = polar_of(x, y, z);
            let fr = (r - spec.range_offset) / spec.range_res;
            let fa = (az - spec.azimuth_offset) / spec.azimuth_res;
            let fe = (el - spec.elevation_offset) / spec.elevation_res;
            let base = d * cells;
            let span = |f: f64, n: usize| {
                let lo = (f.round() as i64 - reach).max(0);
                let hi = (f.round() as i64 + reach).min(n as i64 - 1);
                lo..=hi
            };
            for ir in span(fr, nr) {
                let gr = ((ir as f64 - fr) / sigma).powi(2);
                for ia in span(fa, na) {
                    let ga = ((ia as f64 - fa) / sigma).powi(2);
                    for ie in span(fe, ne) {
                        let ge = ((ie as f64 - fe) / sigma).powi(2);
                        let idx = base + (ir as usize * na + ia as usize) * ne + ie as usize;
                        data[idx] += (peak * (-0.5 * (gr + ga + ge)).exp()) as f32;
                    }
                }
            }
        }
    }
    Ok(RenderedTensor {
        tensor: RadarTensor::new(gspec, data)?,
        skipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorruptionConfig {
    pub position_sigma: f64,
    pub size_sigma: f64,
    pub yaw_sigma: f64,
    /// True-positive scores are `1 - |N(0, score_sigma)|`, floored at
    /// `min_tp_score`.
    pub score_sigma: f64,
    pub min_tp_score: f64,
    /// False-positive scores are uniform in this range.
    pub fp_score: (f64, f64),
    pub fn_rate: f64,
    /// Expected false positives per ground-truth object.
    pub fp_rate: f64,
    /// Region false positives are placed in.
    pub fp_x: (f64, f64),
    pub fp_y: (f64, f64),
    pub embedding_dim: usize,
    /// Per-frame rotation of each persistent embedding, radians.
    pub jitter: f64,
    pub seed: u64,
}

impl Default for CorruptionConfig {
    fn default() -> Self {
        CorruptionConfig {
            position_sigma: 0.1,
            size_sigma: 0.05,
            yaw_sigma: 0.02,
            score_sigma: 0.15,
            min_tp_score: 0.55,
            fp_score: (0.1, 0.45),
            fn_rate: 0.0,
            fp_rate: 0.0,
            fp_x: (10.0, 60.0),
            fp_y: (-12.0, 12.0),
            embedding_dim: crate::jde::DEFAULT_EMBEDDING_DIM,
            jitter: 0.1,
            seed: 0,
        }
    }
}

impl CorruptionConfig {
    /// No noise, no misses, no false positives, exact embeddings.
    pub fn none() -> Self {
        CorruptionConfig {
            position_sigma: 0.0,
            size_sigma: 0.0,
            yaw_sigma: 0.0,
            score_sigma: 0.0,
            fn_rate: 0.0,
            fp_rate: 0.0,
            jitter: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sigmas = [self.position_sigma, self.size_sigma, self.yaw_sigma, self.score_sigma, self.jitter];
        if sigmas.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(Error::InvalidConfig("noise sigmas and jitter must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.fn_rate) || !(0.0..=1.0).contains(&self.fp_rate) {
            return Err(Error::InvalidConfig("fn_rate and fp_rate must lie in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.min_tp_score) {
            return Err(Error::InvalidConfig("min_tp_score must lie in [0, 1]".into()));
        }
        check_range("fp_score", self.fp_score)?;
        if self.fp_score.0 < 0.0 || self.fp_score.1 > 1.0 {
            return Err(Error::InvalidConfig("fp_score must lie in [0, 1]".into()));
        }
        check_range("fp_x", self.fp_x)?;
        check_range("fp_y", self.fp_y)?;
        if self.embedding_dim < 2 {
            return Err(Error::InvalidConfig("embedding_dim must be at least 2".into()));
        }
        Ok(())
    }
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// The fixed embedding of a track under `seed`.
pub fn persistent_embedding(seed: u64, track_id: u64, dim: usize) -> Embedding {
    let mut rng = rng_for(seed, STREAM_EMBEDDING, track_id);
    Embedding::new(random_unit(&mut rng, dim)).expect("unit vector")
}

/// `cos(angle) e + sin(angle) u` for a random unit `u` orthogonal to `e`.
fn rotate(e: &Embedding, angle: f64, rng: &mut ChaCha8Rng) -> Embedding {
    if angle == 0.0 {
        return e.clone();
    }
    let base = e.as_slice();
    let mut u = random_unit(rng, base.len());
    loop {
        let along: f64 = u.iter().zip(base).map(|(a, b)| a * b).sum();
        u.iter_mut().zip(base).for_each(|(a, b)| *a -= along * b);
        let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            u.iter_mut().for_each(|a| *a /= n);
            break;
        }
        u = random_unit(rng, base.len());
    }
    let (s, c) = angle.sin_cos();
    Embedding::new(base.iter().zip(&u).map(|(b, x)| c * b + s * x).collect()).unwrap_or_else(|_| e.clone())
}

/// Turns one frame of labels into detector output.
///
/// Each label is dropped with probability `fn_rate`; survivors get
/// Gaussian box noise, a high score and their track's embedding rotated by
/// `jitter`. Then `fp_rate * labels.len()` spurious low-score boxes are
/// added (fractional parts rounded stochastically).
pub fn corrupt_detections(labels: &[LabelObject], config: &CorruptionConfig, frame: u64) -> Result<Vec<Detection>> {
    config.validate()?;
    let mut rng = rng_for(config.seed, STREAM_CORRUPT, frame);
    let normal = |rng: &mut ChaCha8Rng, sigma: f64| -> f64 {
        if sigma == 0.0 {
            0.0
        } else {
            Normal::new(0.0, sigma).map(|n| n.sample(rng)).unwrap_or(0.0)
        }
    };
    let mut out = Vec::with_capacity(labels.len());
    for label in labels {
        // Always draw, so one label's fate does not shift the next one's noise.
        let drop = rng.random::<f64>() < config.fn_rate;
        let b = label.bbox;
        let size = |rng: &mut ChaCha8Rng, v: f64| (v * (1.0 + normal(rng, config.size_sigma))).max(0.1);
        let bbox = Box3D::new(
            b.cx + normal(&mut rng, config.position_sigma),
            b.cy + normal(&mut rng, config.position_sigma),
            b.cz + normal(&mut rng, config.position_sigma),
            size(&mut rng, b.l),
            size(&mut rng, b.w),
            size(&mut rng, b.h),
            b.yaw + normal(&mut rng, config.yaw_sigma),
        )?;
        let score = (1.0 - normal(&mut rng, config.score_sigma).abs()).max(config.min_tp_score);
        let embedding = rotate(
            &persistent_embedding(config.seed, label.track_id, config.embedding_dim),
            config.jitter,
            &mut rng,
        );
        if drop {
            continue;
        }
        out.push(Detection {
            bbox,
            score,
            class_id: label.class_id,
            embedding: Some(embedding),
        });
    }
    let expected = config.fp_rate * labels.len() as f64;
    let mut n_fp = expected.floor() as usize;
    if rng.random::<f64>() < expected - expected.floor() {
        n_fp += 1;
    }
    for _ in 0..n_fp {
        let class_id = if rng.random::<f64>() < 0.5 { CLASS_SEDAN } else { CLASS_BUS_OR_TRUCK };
        let bbox = Box3D::new(
            uniform(&mut rng, config.fp_x),
            uniform(&mut rng, config.fp_y),
            0.0,
            4.5,
            1.9,
            1.6,
            uniform(&mut rng, (-PI, PI)),
        )?;
        out.push(Detection {
            bbox,
            score: uniform(&mut rng, config.fp_score),
            class_id,
            embedding: Some(Embedding::new(random_unit(&mut rng, config.embedding_dim))?),
        });
    }
    Ok(out)
}

pub const ORACLE_MAX_SIZE: usize = 9;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleMatching {
    pub pairs: Vec<(usize, usize)>,
    /// Sum of matched costs in row order.
    pub cost: f64,
}

/// Exhaustive search over all partial matchings.
///
/// Pairs above `gate` or non-finite are not allowed. With a finite gate
/// each unmatched row or column adds `gate / 2`; with an infinite gate the
/// matching of most pairs wins and cost breaks ties. Among equal optima the
/// first in row-major enumeration order, with "unmatched" last, is kept.
pub fn oracle_assignment(costs: &CostMatrix, gate: f64) -> Result<OracleMatching> {
    let (n, m) = (costs.rows(), costs.cols());
    if n > ORACLE_MAX_SIZE || m > ORACLE_MAX_SIZE {
        return Err(Error::TooLarge { rows: n, cols: m });
    }
    struct Search<'a> {
        costs: &'a CostMatrix,
        gate: f64,
        used: Vec<bool>,
        current: Vec<(usize, usize)>,
        best: Option<(usize, f64, Vec<(usize, usize)>)>,
    }
    impl Search<'_> {
        fn objective(&self, pairs: usize, cost: f64) -> (usize, f64) {
            if self.gate.is_finite() {
                let unmatched = self.costs.rows() + self.costs.cols() - 2 * pairs;
                (0, cost + 0.5 * self.gate * unmatched as f64)
            } else {
                (usize::MAX - pairs, cost)
            }
        }
        fn better(&self, pairs: usize, cost: f64) -> bool {
            let Some((bp, bc, _)) = &self.best else {
                return true;
            };
            let (k_new, c_new) = self.objective(pairs, cost);
            let (k_old, c_old) = self.objective(*bp, *bc);
            k_new < k_old || (k_new == k_old && c_new < c_old)
        }
        fn run(&mut self, row: usize) {
            if row == self.costs.rows() {
                let cost: f64 = self.current.iter().map(|&(r, c)| self.costs.get(r, c)).sum();
                if self.better(self.current.len(), cost) {
                    self.best = Some((self.current.len(), cost, self.current.clone()));
                }
                return;
            }
            for c in 0..self.costs.cols() {
                let v = self.costs.get(row, c);
                if self.used[c] || !v.is_finite() || v > self.gate {
                    continue;
                }
                self.used[c] = true;
                self.current.push((row, c));
                self.run(row + 1);
                self.current.pop();
                self.used[c] = false;
            }
            self.run(row + 1);
        }
    }
    let mut search = Search {
        costs,
        gate,
        used: vec![false; m],
        current: Vec::new(),
        best: None,
    };
    search.run(0);
    let (_, cost, pairs) = search.best.unwrap_or((0, 0.0, Vec::new()));
    Ok(OracleMatching { pairs, cost })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IouEstimate {
    pub estimate: f64,
    /// Half-width of the 95% binomial interval.
    pub half_width: f64,
    pub samples: usize,
}

impl IouEstimate {
    pub fn contains(&self, value: f64) -> bool {
        (value - self.estimate).abs() <= self.half_width
    }
}

/// Monte Carlo IoU: uniform samples over the bounding region of both boxes,
/// with membership decided in each box's own frame.
pub fn oracle_iou(a: &Box3D, b: &Box3D, kind: IouKind, samples: usize, seed: u64) -> IouEstimate {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for (x, y, z) in a.corners().into_iter().chain(b.corners()) {
        for (k, v) in [x, y, z].into_iter().enumerate() {
            lo[k] = lo[k].min(v);
            hi[k] = hi[k].max(v);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut in_a, mut in_b, mut both) = (0usize, 0usize, 0usize);
    for _ in 0..samples {
        let x = uniform(&mut rng, (lo[0], hi[0]));
        let y = uniform(&mut rng, (lo[1], hi[1]));
        let (za, zb) = match kind {
            IouKind::ThreeD => {
                let z = uniform(&mut rng, (lo[2], hi[2]));
                (z, z)
            }
            IouKind::Bev => (a.cz, b.cz),
        };
        let ia = a.contains(x, y, za);
        let ib = b.contains(x, y, zb);
        in_a += ia as usize;
        in_b += ib as usize;
        both += (ia && ib) as usize;
    }
    let union = in_a + in_b - both;
    if union == 0 {
        return IouEstimate {
            estimate: 0.0,
            half_width: 0.0,
            samples,
        };
    }
    let p = both as f64 / union as f64;
    // The 1 / union term keeps the interval open at p = 0 or 1.
    let half_width = 1.96 * (p * (1.0 - p) / union as f64).sqrt() + 1.0 / union as f64;
    IouEstimate {
        estimate: p,
        half_width,
        samples,
    }
}
