//! Sectioned `key = value` pipeline configuration.
//!
//! ```text
//! # comment
//! [cfar]
//! training = 15
//! alpha2 = 4.0
//! ```
//!
//! Unknown sections or keys, repeated keys and out-of-range values are
//! rejected. Angles are given in degrees. Keys left out keep their
//! defaults. See [`KEYS`] for the full list.

use std::path::Path;

use radtrack_core::cfar::CfarConfig;
use radtrack_core::grid::{CartesianGridSpec, DopplerReduce, Interpolation, PolarGridSpec};
use radtrack_core::sim::{CorruptionConfig, ScenarioConfig};
use radtrack_core::targets::HeatmapConfig;
use radtrack_core::tracker::{BoxCost, TrackerConfig};

use crate::error::{CliError, Result};
use crate::fsutil::read_text;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub polar: PolarGridSpec,
    pub grid: CartesianGridSpec,
    pub interpolation: Interpolation,
    pub cfar: CfarConfig,
    pub heatmap: HeatmapConfig,
    pub tracker: TrackerConfig,
    pub scenario: ScenarioConfig,
    pub corruption: CorruptionConfig,
    pub iou_threshold: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            polar: PolarGridSpec::default(),
            grid: CartesianGridSpec::default(),
            interpolation: Interpolation::Trilinear,
            cfar: CfarConfig::default(),
            heatmap: HeatmapConfig::default(),
            tracker: TrackerConfig::default(),
            scenario: ScenarioConfig::default(),
            corruption: CorruptionConfig::default(),
            iou_threshold: radtrack_core::metrics::DEFAULT_IOU_THRESHOLD,
        }
    }
}

/// Every accepted `(section, key)`.
pub const KEYS: &[(&str, &[&str])] = &[
    (
        "polar",
        &[
            "range_bins",
            "range_res",
            "range_offset",
            "azimuth_bins",
            "azimuth_res_deg",
            "azimuth_offset_deg",
            "elevation_bins",
            "elevation_res_deg",
            "elevation_offset_deg",
            "doppler_bins",
        ],
    ),
    (
        "grid",
        &[
            "voxel_z", "voxel_y", "voxel_x", "x_min", "x_max", "y_min", "y_max", "z_min", "z_max",
            "interpolation",
        ],
    ),
    (
        "cfar",
        &[
            "training", "guard", "training_z", "training_y", "training_x", "guard_z", "guard_y",
            "guard_x", "alpha1", "alpha2", "collapse",
        ],
    ),
    ("heatmap", &["alpha", "n_ref", "w_min", "num_classes", "min_sigma"]),
    (
        "tracker",
        &[
            "dt",
            "tau_high",
            "tau_low",
            "tau_emb",
            "diou_gate",
            "iou_gate",
            "app_gate",
            "max_age",
            "min_hits",
            "ema_momentum",
            "box_cost",
            "use_appearance",
            "q_position",
            "q_size",
            "q_heading",
            "q_velocity",
            "q_size_rate",
            "q_heading_rate",
            "r_position",
            "r_size",
            "r_heading",
            "p0_velocity",
            "p0_size_rate",
            "p0_heading_rate",
        ],
    ),
    (
        "scenario",
        &[
            "num_objects",
            "frames",
            "dt",
            "seed",
            "spawn_x_min",
            "spawn_x_max",
            "spawn_y_min",
            "spawn_y_max",
            "velocity_x_min",
            "velocity_x_max",
            "velocity_y_min",
            "velocity_y_max",
            "fov_x_min",
            "fov_x_max",
            "fov_y_min",
            "fov_y_max",
            "bus_fraction",
            "min_separation",
            "ground_z",
            "scatterers_per_object",
            "noise_floor",
            "peak_snr",
            "doppler_scale",
            "bump_sigma",
        ],
    ),
    (
        "corruption",
        &[
            "position_sigma",
            "size_sigma",
            "yaw_sigma",
            "score_sigma",
            "min_tp_score",
            "fp_score_min",
            "fp_score_max",
            "fn_rate",
            "fp_rate",
            "fp_x_min",
            "fp_x_max",
            "fp_y_min",
            "fp_y_max",
            "embedding_dim",
            "jitter",
            "seed",
        ],
    ),
    ("eval", &["iou_threshold"]),
];

fn float(v: &str) -> std::result::Result<f64, String> {
    let x: f64 = v.parse().map_err(|_| format!("expected a number, got {v:?}"))?;
    if !x.is_finite() {
        return Err(format!("expected a finite number, got {v:?}"));
    }
    Ok(x)
}

fn count(v: &str) -> std::result::Result<usize, String> {
    v.parse().map_err(|_| format!("expected a non-negative integer, got {v:?}"))
}

fn small(v: &str) -> std::result::Result<u32, String> {
    v.parse().map_err(|_| format!("expected a non-negative integer, got {v:?}"))
}

fn seed(v: &str) -> std::result::Result<u64, String> {
    v.parse().map_err(|_| format!("expected an unsigned 64-bit integer, got {v:?}"))
}

fn flag(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got {v:?}")),
    }
}

fn degrees(v: &str) -> std::result::Result<f64, String> {
    Ok(float(v)?.to_radians())
}

pub fn parse_collapse(v: &str) -> std::result::Result<DopplerReduce, String> {
    match v {
        "max" => Ok(DopplerReduce::Max),
        "mean" => Ok(DopplerReduce::Mean),
        "sum" => Ok(DopplerReduce::Sum),
        _ => Err(format!("expected max, mean or sum, got {v:?}")),
    }
}

pub fn parse_box_cost(v: &str) -> std::result::Result<BoxCost, String> {
    match v {
        "diou" => Ok(BoxCost::Diou),
        "iou" => Ok(BoxCost::Iou),
        _ => Err(format!("expected diou or iou, got {v:?}")),
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, message: String| CliError::Config {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut cfg = PipelineConfig::default();
        let mut section: Option<&str> = None;
        let mut seen = std::collections::BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                let Some(&(known, _)) = KEYS.iter().find(|(s, _)| *s == name) else {
                    return Err(err(line_no, format!("unknown section [{name}]")));
                };
                section = Some(known);
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(err(line_no, format!("expected key = value, got {line:?}")));
            };
            let (key, value) = (key.trim(), value.trim());
            let Some(sec) = section else {
                return Err(err(line_no, format!("key {key:?} outside any section")));
            };
            let keys = KEYS.iter().find(|(s, _)| *s == sec).map(|(_, k)| *k).unwrap_or(&[]);
            if !keys.contains(&key) {
                return Err(err(line_no, format!("unknown key {key:?} in [{sec}]")));
            }
            if !seen.insert((sec, key.to_string())) {
                return Err(err(line_no, format!("key {key:?} repeated in [{sec}]")));
            }
            cfg.set(sec, key, value).map_err(|m| err(line_no, format!("{sec}.{key}: {m}")))?;
        }
        cfg.validate().map_err(|m| err(0, m))?;
        Ok(cfg)
    }

    fn set(&mut self, section: &str, key: &str, v: &str) -> std::result::Result<(), String> {
        match section {
            "polar" => {
                let p = &mut self.polar;
                match key {
                    "range_bins" => p.range_bins = count(v)?,
                    "range_res" => p.range_res = float(v)?,
                    "range_offset" => p.range_offset = float(v)?,
                    "azimuth_bins" => p.azimuth_bins = count(v)?,
                    "azimuth_res_deg" => p.azimuth_res = degrees(v)?,
                    "azimuth_offset_deg" => p.azimuth_offset = degrees(v)?,
                    "elevation_bins" => p.elevation_bins = count(v)?,
                    "elevation_res_deg" => p.elevation_res = degrees(v)?,
                    "elevation_offset_deg" => p.elevation_offset = degrees(v)?,
                    "doppler_bins" => p.doppler_bins = count(v)?,
                    _ => unreachable!(),
                }
            }
            "grid" => {
                let g = &mut self.grid;
                match key {
                    "voxel_z" => g.voxel_size[0] = float(v)?,
                    "voxel_y" => g.voxel_size[1] = float(v)?,
                    "voxel_x" => g.voxel_size[2] = float(v)?,
                    "x_min" => g.extents.x_min = float(v)?,
                    "x_max" => g.extents.x_max = float(v)?,
                    "y_min" => g.extents.y_min = float(v)?,
                    "y_max" => g.extents.y_max = float(v)?,
                    "z_min" => g.extents.z_min = float(v)?,
                    "z_max" => g.extents.z_max = float(v)?,
                    "interpolation" => {
                        self.interpolation = match v {
                            "trilinear" => Interpolation::Trilinear,
                            "nearest" => Interpolation::Nearest,
                            _ => return Err(format!("expected trilinear or nearest, got {v:?}")),
                        }
                    }
                    _ => unreachable!(),
                }
            }
            "cfar" => {
                let c = &mut self.cfar;
                match key {
                    "training" => c.training = [count(v)?; 3],
                    "guard" => c.guard = [count(v)?; 3],
                    "training_z" => c.training[0] = count(v)?,
                    "training_y" => c.training[1] = count(v)?,
                    "training_x" => c.training[2] = count(v)?,
                    "guard_z" => c.guard[0] = count(v)?,
                    "guard_y" => c.guard[1] = count(v)?,
                    "guard_x" => c.guard[2] = count(v)?,
                    "alpha1" => c.alpha1 = float(v)?,
                    "alpha2" => c.alpha2 = float(v)?,
                    "collapse" => c.collapse = parse_collapse(v)?,
                    _ => unreachable!(),
                }
            }
            "heatmap" => {
                let h = &mut self.heatmap;
                match key {
                    "alpha" => h.alpha = float(v)?,
                    "n_ref" => h.n_ref = count(v)?,
                    "w_min" => h.w_min = float(v)?,
                    "num_classes" => h.num_classes = count(v)?,
                    "min_sigma" => h.min_sigma = float(v)?,
                    _ => unreachable!(),
                }
            }
            "tracker" => {
                let t = &mut self.tracker;
                let n = &mut t.noise;
                match key {
                    "dt" => t.dt = float(v)?,
                    "tau_high" => t.tau_high = float(v)?,
                    "tau_low" => t.tau_low = float(v)?,
                    "tau_emb" => t.tau_emb = float(v)?,
                    "diou_gate" => t.diou_gate = float(v)?,
                    "iou_gate" => t.iou_gate = float(v)?,
                    "app_gate" => t.app_gate = float(v)?,
                    "max_age" => t.max_age = small(v)?,
                    "min_hits" => t.min_hits = small(v)?,
                    "ema_momentum" => t.ema_momentum = float(v)?,
                    "box_cost" => t.box_cost = parse_box_cost(v)?,
                    "use_appearance" => t.use_appearance = flag(v)?,
                    "q_position" => n.q_position = float(v)?,
                    "q_size" => n.q_size = float(v)?,
                    "q_heading" => n.q_heading = float(v)?,
                    "q_velocity" => n.q_velocity = float(v)?,
                    "q_size_rate" => n.q_size_rate = float(v)?,
                    "q_heading_rate" => n.q_heading_rate = float(v)?,
                    "r_position" => n.r_position = float(v)?,
                    "r_size" => n.r_size = float(v)?,
                    "r_heading" => n.r_heading = float(v)?,
                    "p0_velocity" => n.p0_velocity = float(v)?,
                    "p0_size_rate" => n.p0_size_rate = float(v)?,
                    "p0_heading_rate" => n.p0_heading_rate = float(v)?,
                    _ => unreachable!(),
                }
            }
            "scenario" => {
                let s = &mut self.scenario;
                match key {
                    "num_objects" => s.num_objects = count(v)?,
                    "frames" => s.frames = count(v)?,
                    "dt" => s.dt = float(v)?,
                    "seed" => s.seed = seed(v)?,
                    "spawn_x_min" => s.spawn_x.0 = float(v)?,
                    "spawn_x_max" => s.spawn_x.1 = float(v)?,
                    "spawn_y_min" => s.spawn_y.0 = float(v)?,
                    "spawn_y_max" => s.spawn_y.1 = float(v)?,
                    "velocity_x_min" => s.velocity_x.0 = float(v)?,
                    "velocity_x_max" => s.velocity_x.1 = float(v)?,
                    "velocity_y_min" => s.velocity_y.0 = float(v)?,
                    "velocity_y_max" => s.velocity_y.1 = float(v)?,
                    "fov_x_min" => s.fov.x_min = float(v)?,
                    "fov_x_max" => s.fov.x_max = float(v)?,
                    "fov_y_min" => s.fov.y_min = float(v)?,
                    "fov_y_max" => s.fov.y_max = float(v)?,
                    "bus_fraction" => s.bus_fraction = float(v)?,
                    "min_separation" => s.min_separation = float(v)?,
                    "ground_z" => s.ground_z = float(v)?,
                    "scatterers_per_object" => s.scatterers_per_object = count(v)?,
                    "noise_floor" => s.noise_floor = float(v)?,
                    "peak_snr" => s.peak_snr = float(v)?,
                    "doppler_scale" => s.doppler_scale = float(v)?,
                    "bump_sigma" => s.bump_sigma = float(v)?,
                    _ => unreachable!(),
                }
            }
            "corruption" => {
                let c = &mut self.corruption;
                match key {
                    "position_sigma" => c.position_sigma = float(v)?,
                    "size_sigma" => c.size_sigma = float(v)?,
                    "yaw_sigma" => c.yaw_sigma = float(v)?,
                    "score_sigma" => c.score_sigma = float(v)?,
                    "min_tp_score" => c.min_tp_score = float(v)?,
                    "fp_score_min" => c.fp_score.0 = float(v)?,
                    "fp_score_max" => c.fp_score.1 = float(v)?,
                    "fn_rate" => c.fn_rate = float(v)?,
                    "fp_rate" => c.fp_rate = float(v)?,
                    "fp_x_min" => c.fp_x.0 = float(v)?,
                    "fp_x_max" => c.fp_x.1 = float(v)?,
                    "fp_y_min" => c.fp_y.0 = float(v)?,
                    "fp_y_max" => c.fp_y.1 = float(v)?,
                    "embedding_dim" => c.embedding_dim = count(v)?,
                    "jitter" => c.jitter = float(v)?,
                    "seed" => c.seed = seed(v)?,
                    _ => unreachable!(),
                }
            }
            "eval" => match key {
                "iou_threshold" => self.iou_threshold = float(v)?,
                _ => unreachable!(),
            },
            _ => unreachable!(),
        }
        Ok(())
    }

    /// Range checks of every section.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let tag = |s: &str, e: radtrack_core::Error| format!("[{s}] {e}");
        self.polar.validate().map_err(|e| tag("polar", e))?;
        self.grid.validate().map_err(|e| tag("grid", e))?;
        self.cfar.validate().map_err(|e| tag("cfar", e))?;
        self.heatmap.validate().map_err(|e| tag("heatmap", e))?;
        self.tracker.validate().map_err(|e| tag("tracker", e))?;
        self.scenario.validate().map_err(|e| tag("scenario", e))?;
        self.corruption.validate().map_err(|e| tag("corruption", e))?;
        if !(self.iou_threshold > 0.0 && self.iou_threshold <= 1.0) {
            return Err("[eval] iou_threshold must lie in (0, 1]".into());
        }
        if self.scenario.frames as u64 > crate::formats::MAX_FRAMES {
            return Err(format!("[scenario] frames must not exceed {}", crate::formats::MAX_FRAMES));
        }
        Ok(())
    }
}
