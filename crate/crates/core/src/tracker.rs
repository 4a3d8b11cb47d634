//! Online multi-object tracker with two-stage score-split association.
//!
//! Each step predicts every track, matches high-score detections against
//! all live tracks using a box cost fused with appearance, then matches the
//! low-score detections against the still-unmatched active tracks using
//! the box cost alone. Unmatched high-score detections start new tracks.
//!
//! Lifecycle: `Tentative -> Active -> Lost -> removed`, and `Lost -> Active`
//! on re-association. Tentative tracks that miss a frame are dropped.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::assign::{assign, CostMatrix};
use crate::error::{Error, Result};
use crate::geometry::{diou_cost, iou_cost, Box3D};
use crate::jde::{cosine_distance, Embedding};
use crate::kalman::{measurement_from_box, KalmanState, MeasurementCovariance, NoiseConfig, StateCovariance};

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub bbox: Box3D,
    pub score: f64,
    pub class_id: u32,
    pub embedding: Option<Embedding>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoxCost {
    /// `1 - IoU + rho^2 / c^2`.
    #[default]
    Diou,
    /// `1 - IoU`.
    Iou,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerConfig {
    /// Seconds per frame.
    pub dt: f64,
    pub tau_high: f64,
    pub tau_low: f64,
    /// Appearance is used only for detections scoring above this.
    pub tau_emb: f64,
    /// Largest raw DIoU cost (in `[0, 2)`) that may be matched.
    pub diou_gate: f64,
    /// Largest `1 - IoU` that may be matched when `box_cost` is `Iou`.
    pub iou_gate: f64,
    /// Largest appearance cost (in `[0, 1]`) that may replace the box cost.
    pub app_gate: f64,
    /// Lost tracks are removed once they go unmatched for more frames.
    pub max_age: u32,
    pub min_hits: u32,
    pub ema_momentum: f64,
    pub box_cost: BoxCost,
    pub use_appearance: bool,
    pub noise: NoiseConfig,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            dt: 0.1,
            tau_high: 0.5,
            tau_low: 0.1,
            tau_emb: 0.6,
            diou_gate: 1.3,
            iou_gate: 0.9,
            app_gate: 0.25,
            max_age: 10,
            min_hits: 2,
            ema_momentum: 0.9,
            box_cost: BoxCost::Diou,
            use_appearance: true,
            noise: NoiseConfig::default(),
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if !(0.0 <= self.tau_low && self.tau_low <= self.tau_high && self.tau_high <= 1.0) {
            return bad("thresholds must satisfy 0 <= tau_low <= tau_high <= 1");
        }
        if !(0.0..=1.0).contains(&self.tau_emb) {
            return bad("tau_emb must lie in [0, 1]");
        }
        if !(self.diou_gate > 0.0 && self.iou_gate > 0.0 && self.app_gate > 0.0) {
            return bad("gates must be positive");
        }
        if !(0.0..=1.0).contains(&self.ema_momentum) {
            return bad("ema_momentum must lie in [0, 1]");
        }
        self.noise.validate()
    }

    /// Box cost on the `[0, 1]` scale used for fusion, or `None` when gated.
    fn box_cost(&self, a: &Box3D, b: &Box3D) -> Option<f64> {
        match self.box_cost {
            BoxCost::Diou => {
                let c = diou_cost(a, b);
                (c <= self.diou_gate).then_some(0.5 * c)
            }
            BoxCost::Iou => {
                let c = iou_cost(a, b);
                (c <= self.iou_gate).then_some(c)
            }
        }
    }

    fn assignment_gate(&self) -> f64 {
        match self.box_cost {
            BoxCost::Diou => 0.5 * self.diou_gate,
            BoxCost::Iou => self.iou_gate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackStatus {
    Tentative,
    Active,
    Lost,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u64,
    pub kf: KalmanState,
    pub embedding: Option<Embedding>,
    pub status: TrackStatus,
    pub hits: u32,
    pub time_since_update: u32,
    pub class_id: u32,
    pub score: f64,
}

impl Track {
    pub fn bbox(&self) -> Box3D {
        self.kf.to_box()
    }
}

/// Half the cosine distance when the detection is confident enough and both
/// sides carry an embedding; `None` otherwise.
pub fn appearance_cost(track: &Track, det: &Detection, config: &TrackerConfig) -> Option<f64> {
    if det.score <= config.tau_emb {
        return None;
    }
    let (a, b) = (track.embedding.as_ref()?, det.embedding.as_ref()?);
    cosine_distance(a, b).ok().map(|d| 0.5 * d)
}

/// One emitted box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackOutput {
    pub id: u64,
    pub class_id: u32,
    pub bbox: Box3D,
    pub score: f64,
}

/// Single-class tracker. One instance per stream and class.
#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    q: StateCovariance,
    r: MeasurementCovariance,
    tracks: Vec<Track>,
    class_id: Option<u32>,
    frames: u64,
    next_id: u64,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Tracker {
            q: config.noise.process(),
            r: config.noise.measurement(),
            config,
            tracks: Vec::new(),
            class_id: None,
            frames: 0,
            next_id: 1,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    /// Advances one frame and returns the active tracks.
    pub fn step(&mut self, detections: &[Detection]) -> Result<Vec<TrackOutput>> {
        let mut next_id = self.next_id;
        let out = self.step_with_ids(detections, &mut next_id)?;
        self.next_id = next_id;
        Ok(out)
    }

    /// As [`Tracker::step`], drawing new ids from a caller-owned counter.
    pub fn step_with_ids(&mut self, detections: &[Detection], next_id: &mut u64) -> Result<Vec<TrackOutput>> {
        if let Some(first) = detections.first() {
            let class = self.class_id.unwrap_or(first.class_id);
            if let Some(other) = detections.iter().find(|d| d.class_id != class) {
                return Err(Error::MixedClass {
                    first: class,
                    other: other.class_id,
                });
            }
            self.class_id = Some(class);
        }
        for d in detections {
            if !(0.0..=1.0).contains(&d.score) {
                return Err(Error::InvalidConfig(alloc::format!(
                    "detection score {} outside [0, 1]",
                    d.score
                )));
            }
        }
        let cfg = self.config;

        for t in &mut self.tracks {
            t.kf.predict(cfg.dt, &self.q);
            t.time_since_update += 1;
        }

        let (high, low): (Vec<usize>, Vec<usize>) = {
            let mut high = Vec::new();
            let mut low = Vec::new();
            for (i, d) in detections.iter().enumerate() {
                if d.score >= cfg.tau_high {
                    high.push(i);
                } else if d.score >= cfg.tau_low {
                    low.push(i);
                }
            }
            (high, low)
        };

        let predicted: Vec<Box3D> = self.tracks.iter().map(Track::bbox).collect();
        let mut track_matched = alloc::vec![false; self.tracks.len()];
        let mut updates: Vec<(usize, usize)> = Vec::new();

        // Stage 1: every live track against high-score detections.
        let pool: Vec<usize> = (0..self.tracks.len()).collect();
        let costs = CostMatrix::from_fn(pool.len(), high.len(), |r, c| {
            let track = &self.tracks[pool[r]];
            let det = &detections[high[c]];
            let Some(box_cost) = cfg.box_cost(&predicted[pool[r]], &det.bbox) else {
                return f64::INFINITY;
            };
            match cfg.use_appearance.then(|| appearance_cost(track, det, &cfg)).flatten() {
                Some(app) if app <= cfg.app_gate => box_cost.min(app),
                _ => box_cost,
            }
        });
        let stage1 = assign(&costs, cfg.assignment_gate());
        for &(r, c) in &stage1.pairs {
            track_matched[pool[r]] = true;
            updates.push((pool[r], high[c]));
        }
        let unmatched_high: Vec<usize> = stage1.unmatched_cols.iter().map(|&c| high[c]).collect();

        // Stage 2: remaining active tracks against low-score detections.
        let pool: Vec<usize> = (0..self.tracks.len())
            .filter(|&i| !track_matched[i] && self.tracks[i].status == TrackStatus::Active)
            .collect();
        let costs = CostMatrix::from_fn(pool.len(), low.len(), |r, c| {
            cfg.box_cost(&predicted[pool[r]], &detections[low[c]].bbox)
                .unwrap_or(f64::INFINITY)
        });
        let stage2 = assign(&costs, cfg.assignment_gate());
        for &(r, c) in &stage2.pairs {
            track_matched[pool[r]] = true;
            updates.push((pool[r], low[c]));
        }

        for (ti, di) in updates {
            let det = &detections[di];
            let track = &mut self.tracks[ti];
            track.kf.update(&measurement_from_box(&det.bbox), &self.r)?;
            if let Some(e) = det.embedding.as_ref().filter(|_| det.score > cfg.tau_emb) {
                track.embedding = Some(match &track.embedding {
                    Some(old) => old.blend(e, cfg.ema_momentum)?,
                    None => e.clone(),
                });
            }
            track.hits += 1;
            track.time_since_update = 0;
            track.score = det.score;
            track.status = match track.status {
                TrackStatus::Tentative if track.hits >= cfg.min_hits => TrackStatus::Active,
                TrackStatus::Tentative => TrackStatus::Tentative,
                TrackStatus::Active | TrackStatus::Lost => TrackStatus::Active,
            };
        }

        for (i, t) in self.tracks.iter_mut().enumerate() {
            if !track_matched[i] && t.status == TrackStatus::Active {
                t.status = TrackStatus::Lost;
            }
        }
        let max_age = cfg.max_age;
        let mut keep = track_matched.into_iter();
        self.tracks.retain(|t| {
            let matched = keep.next().unwrap_or(false);
            matched
                || match t.status {
                    TrackStatus::Tentative => false,
                    TrackStatus::Lost => t.time_since_update <= max_age,
                    TrackStatus::Active => true,
                }
        });

        // Tracks born on the first frame are confirmed immediately.
        let born_active = self.frames == 0 || cfg.min_hits <= 1;
        for di in unmatched_high {
            let det = &detections[di];
            let id = *next_id;
            *next_id += 1;
            self.tracks.push(Track {
                id,
                kf: KalmanState::from_measurement(&measurement_from_box(&det.bbox), &cfg.noise),
                embedding: det.embedding.clone(),
                status: if born_active {
                    TrackStatus::Active
                } else {
                    TrackStatus::Tentative
                },
                hits: 1,
                time_since_update: 0,
                class_id: det.class_id,
                score: det.score,
            });
        }
        self.frames += 1;

        Ok(self
            .tracks
            .iter()
            .filter(|t| t.status == TrackStatus::Active)
            .map(|t| TrackOutput {
                id: t.id,
                class_id: t.class_id,
                bbox: t.bbox(),
                score: t.score,
            })
            .collect())
    }
}

/// Routes detections to one [`Tracker`] per class with a shared id space.
#[derive(Debug, Clone)]
pub struct MultiClassTracker {
    config: TrackerConfig,
    trackers: BTreeMap<u32, Tracker>,
    next_id: u64,
}

impl MultiClassTracker {
    pub fn new(config: TrackerConfig) -> Result<Self> {
        config.validate()?;
        Ok(MultiClassTracker {
            config,
            trackers: BTreeMap::new(),
            next_id: 1,
        })
    }

    /// Outputs are ordered by class, then by track age.
    pub fn step(&mut self, detections: &[Detection]) -> Result<Vec<TrackOutput>> {
        let mut by_class: BTreeMap<u32, Vec<Detection>> = BTreeMap::new();
        for d in detections {
            by_class.entry(d.class_id).or_default().push(d.clone());
        }
        for &class in by_class.keys() {
            if !self.trackers.contains_key(&class) {
                self.trackers.insert(class, Tracker::new(self.config)?);
            }
        }
        let mut out = Vec::new();
        for (class, tracker) in self.trackers.iter_mut() {
            let dets = by_class.remove(class).unwrap_or_default();
            out.extend(tracker.step_with_ids(&dets, &mut self.next_id)?);
        }
        Ok(out)
    }
}
