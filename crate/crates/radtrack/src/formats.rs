//! JSON-lines record formats, one object per line.
//!
//! Boxes are `[cx, cy, cz, l, w, h, yaw]` in meters and radians.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use radtrack_core::cfar::CfarPoint;
use radtrack_core::geometry::Box3D;
use radtrack_core::jde::Embedding;
use radtrack_core::targets::LabelObject;
use radtrack_core::tracker::{Detection, TrackOutput};

use crate::error::{CliError, Result};
use crate::fsutil::{read_text, write_atomic};

/// Detector frames above this size are unusual for the sensor and get a
/// warning on load.
pub const FRAME_OBJECT_CAP: usize = 30;

/// Largest accepted frame index plus one.
pub const MAX_FRAMES: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelRecord {
    pub frame: u64,
    pub track_id: u64,
    pub class: u32,
    #[serde(rename = "box")]
    pub bbox: [f64; 7],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cfar_count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionRecord {
    pub frame: u64,
    pub class: u32,
    pub score: f64,
    #[serde(rename = "box")]
    pub bbox: [f64; 7],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emb: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackRecord {
    pub frame: u64,
    pub id: u64,
    pub class: u32,
    #[serde(rename = "box")]
    pub bbox: [f64; 7],
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointRecord {
    pub iz: usize,
    pub iy: usize,
    pub ix: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub power: f64,
}

impl From<&CfarPoint> for PointRecord {
    fn from(p: &CfarPoint) -> Self {
        PointRecord {
            iz: p.iz,
            iy: p.iy,
            ix: p.ix,
            x: p.x,
            y: p.y,
            z: p.z,
            power: p.power,
        }
    }
}

impl From<&PointRecord> for CfarPoint {
    fn from(p: &PointRecord) -> Self {
        CfarPoint {
            iz: p.iz,
            iy: p.iy,
            ix: p.ix,
            x: p.x,
            y: p.y,
            z: p.z,
            power: p.power,
        }
    }
}

impl LabelRecord {
    pub fn new(frame: u64, label: &LabelObject, with_count: bool) -> Self {
        LabelRecord {
            frame,
            track_id: label.track_id,
            class: label.class_id,
            bbox: label.bbox.to_array(),
            cfar_count: with_count.then_some(label.cfar_count),
        }
    }

    pub fn to_label(&self) -> radtrack_core::Result<LabelObject> {
        Ok(LabelObject {
            bbox: Box3D::from_array(self.bbox)?,
            class_id: self.class,
            track_id: self.track_id,
            cfar_count: self.cfar_count.unwrap_or(0),
        })
    }
}

impl DetectionRecord {
    pub fn new(frame: u64, det: &Detection) -> Self {
        DetectionRecord {
            frame,
            class: det.class_id,
            score: det.score,
            bbox: det.bbox.to_array(),
            emb: det.embedding.as_ref().map(|e| e.as_slice().to_vec()),
        }
    }

    pub fn to_detection(&self) -> radtrack_core::Result<Detection> {
        Ok(Detection {
            bbox: Box3D::from_array(self.bbox)?,
            score: self.score,
            class_id: self.class,
            embedding: self.emb.as_deref().map(Embedding::from_slice).transpose()?,
        })
    }
}

impl TrackRecord {
    pub fn new(frame: u64, t: &TrackOutput) -> Self {
        TrackRecord {
            frame,
            id: t.id,
            class: t.class_id,
            bbox: t.bbox.to_array(),
            score: t.score,
        }
    }

    pub fn to_box(&self) -> radtrack_core::Result<Box3D> {
        Box3D::from_array(self.bbox)
    }
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(line)
            .map_err(|e| CliError::malformed(path, format!("line {}: {e}", i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn encode_jsonl<T: Serialize>(records: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r).expect("records serialize");
        out.push(b'\n');
    }
    out
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    write_atomic(path, &encode_jsonl(records))
}

/// Groups records by frame into `frames` slots, or up to the last frame
/// seen when `frames` is `None`.
pub fn by_frame<T, U>(
    records: &[T],
    frames: Option<usize>,
    frame_of: impl Fn(&T) -> u64,
    mut convert: impl FnMut(&T) -> radtrack_core::Result<U>,
    path: &Path,
) -> Result<Vec<Vec<U>>> {
    let last = records.iter().map(|r| frame_of(r)).max().map_or(0, |f| f + 1);
    if last > MAX_FRAMES {
        return Err(CliError::malformed(path, format!("frame index {} exceeds {MAX_FRAMES}", last - 1)));
    }
    let last = last as usize;
    let n = frames.unwrap_or(last).max(last);
    let mut out: Vec<Vec<U>> = (0..n).map(|_| Vec::new()).collect();
    for (i, r) in records.iter().enumerate() {
        let v = convert(r).map_err(|e| CliError::malformed(path, format!("record {}: {e}", i + 1)))?;
        out[frame_of(r) as usize].push(v);
    }
    Ok(out)
}

pub fn read_labels(path: &Path, frames: Option<usize>) -> Result<Vec<Vec<LabelObject>>> {
    let recs: Vec<LabelRecord> = read_jsonl(path)?;
    by_frame(&recs, frames, |r| r.frame, LabelRecord::to_label, path)
}

pub fn read_detections(path: &Path, frames: Option<usize>) -> Result<Vec<Vec<Detection>>> {
    let recs: Vec<DetectionRecord> = read_jsonl(path)?;
    let out = by_frame(&recs, frames, |r| r.frame, DetectionRecord::to_detection, path)?;
    let crowded = out.iter().filter(|f| f.len() > FRAME_OBJECT_CAP).count();
    if crowded > 0 {
        eprintln!(
            "warning: {}: {crowded} frame(s) hold more than {FRAME_OBJECT_CAP} detections",
            path.display()
        );
    }
    Ok(out)
}

/// Tracks per frame as `(id, class, box, score)`.
pub fn read_tracks(path: &Path, frames: Option<usize>) -> Result<Vec<Vec<TrackOutput>>> {
    let recs: Vec<TrackRecord> = read_jsonl(path)?;
    by_frame(
        &recs,
        frames,
        |r| r.frame,
        |r| {
            Ok(TrackOutput {
                id: r.id,
                class_id: r.class,
                bbox: r.to_box()?,
                score: r.score,
            })
        },
        path,
    )
}
