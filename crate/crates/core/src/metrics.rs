//! Detection AP and CLEAR-MOT / identity metrics.

use alloc::collections::BTreeMap;
use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use crate::assign::{assign, CostMatrix};
use crate::error::{Error, Result};
use crate::geometry::Box3D;
pub use crate::geometry::{iou_3d, iou_bev};

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.3;
/// Recall sample count of the interpolated AP.
pub const AP_RECALL_POINTS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IouKind {
    Bev,
    ThreeD,
}

impl IouKind {
    pub fn eval(self, a: &Box3D, b: &Box3D) -> f64 {
        match self {
            IouKind::Bev => iou_bev(a, b),
            IouKind::ThreeD => iou_3d(a, b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredBox {
    pub bbox: Box3D,
    pub class_id: u32,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassBox {
    pub bbox: Box3D,
    pub class_id: u32,
}

/// Running precision-recall records per class.
#[derive(Debug, Clone)]
pub struct ApAccumulator {
    kind: IouKind,
    threshold: f64,
    records: BTreeMap<u32, Vec<(f64, bool)>>,
    gt_counts: BTreeMap<u32, usize>,
}

impl ApAccumulator {
    pub fn new(kind: IouKind, threshold: f64) -> Self {
        ApAccumulator {
            kind,
            threshold,
            records: BTreeMap::new(),
            gt_counts: BTreeMap::new(),
        }
    }

    /// Greedy per-class matching: detections in descending score take the
    /// unmatched ground truth of highest IoU, if it reaches the threshold.
    pub fn add_frame(&mut self, detections: &[ScoredBox], ground_truth: &[ClassBox]) {
        let classes: BTreeSet<u32> = detections
            .iter()
            .map(|d| d.class_id)
            .chain(ground_truth.iter().map(|g| g.class_id))
            .collect();
        for class in classes {
            let gts: Vec<&Box3D> = ground_truth
                .iter()
                .filter(|g| g.class_id == class)
                .map(|g| &g.bbox)
                .collect();
            *self.gt_counts.entry(class).or_default() += gts.len();
            let mut dets: Vec<&ScoredBox> = detections.iter().filter(|d| d.class_id == class).collect();
            dets.sort_by(|a, b| b.score.total_cmp(&a.score));
            let mut taken = alloc::vec![false; gts.len()];
            let records = self.records.entry(class).or_default();
            for d in dets {
                let mut best: Option<(usize, f64)> = None;
                for (gi, g) in gts.iter().enumerate() {
                    if taken[gi] {
                        continue;
                    }
                    let iou = self.kind.eval(&d.bbox, g);
                    if iou >= self.threshold && best.is_none_or(|(_, b)| iou > b) {
                        best = Some((gi, iou));
                    }
                }
                if let Some((gi, _)) = best {
                    taken[gi] = true;
                }
                records.push((d.score, best.is_some()));
            }
        }
    }

    /// AP per class; classes without ground truth are absent.
    pub fn average_precision(&self) -> BTreeMap<u32, f64> {
        let mut out = BTreeMap::new();
        for (&class, &gt) in &self.gt_counts {
            if gt == 0 {
                continue;
            }
            let empty = Vec::new();
            let recs = self.records.get(&class).unwrap_or(&empty);
            out.insert(class, interpolated_ap(recs, gt));
        }
        out
    }
}

/// Mean over `r = k / 40, k = 1..=40` of the best precision at recall >= r.
pub fn interpolated_ap(records: &[(f64, bool)], num_gt: usize) -> f64 {
    let mut sorted: Vec<(f64, bool)> = records.to_vec();
    // Stable: equal scores keep insertion order.
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut tp = 0usize;
    // (tp, precision) after each detection.
    let mut curve = Vec::with_capacity(sorted.len());
    for (i, &(_, hit)) in sorted.iter().enumerate() {
        if hit {
            tp += 1;
        }
        curve.push((tp, tp as f64 / (i + 1) as f64));
    }
    // Suffix maximum of precision.
    let mut best = 0.0f64;
    let mut suffix = alloc::vec![0.0; curve.len()];
    for i in (0..curve.len()).rev() {
        best = best.max(curve[i].1);
        suffix[i] = best;
    }
    let mut total = 0.0;
    for k in 1..=AP_RECALL_POINTS {
        // First index reaching recall k / 40, compared in integers.
        let reach = curve
            .iter()
            .position(|&(tp, _)| tp * AP_RECALL_POINTS >= k * num_gt);
        if let Some(i) = reach {
            total += suffix[i];
        }
    }
    total / AP_RECALL_POINTS as f64
}

/// AP of a whole sequence, frame-aligned.
pub fn ap_at_iou(
    frames: &[(Vec<ScoredBox>, Vec<ClassBox>)],
    kind: IouKind,
    threshold: f64,
) -> BTreeMap<u32, f64> {
    let mut acc = ApAccumulator::new(kind, threshold);
    for (d, g) in frames {
        acc.add_frame(d, g);
    }
    acc.average_precision()
}

/// An identified box in one frame, ground truth or hypothesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdBox {
    pub id: u64,
    pub bbox: Box3D,
}

/// CLEAR-MOT counts plus the identity co-occurrence table.
#[derive(Debug, Clone)]
pub struct MotAccumulator {
    threshold: f64,
    pub frames: usize,
    pub fp: usize,
    pub fn_: usize,
    pub idsw: usize,
    pub matches: usize,
    pub gt_boxes: usize,
    pub hyp_boxes: usize,
    last_match: BTreeMap<u64, u64>,
    cooccurrence: BTreeMap<(u64, u64), usize>,
    gt_ids: BTreeSet<u64>,
    hyp_ids: BTreeSet<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotSummary {
    pub mota: f64,
    pub idf1: f64,
    pub fp: usize,
    pub fn_: usize,
    pub idsw: usize,
    pub gt: usize,
    pub matches: usize,
    pub idtp: usize,
}

fn check_unique(boxes: &[IdBox]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for b in boxes {
        if !seen.insert(b.id) {
            return Err(Error::DuplicateId { id: b.id });
        }
    }
    Ok(())
}

impl MotAccumulator {
    pub fn new(threshold: f64) -> Self {
        MotAccumulator {
            threshold,
            frames: 0,
            fp: 0,
            fn_: 0,
            idsw: 0,
            matches: 0,
            gt_boxes: 0,
            hyp_boxes: 0,
            last_match: BTreeMap::new(),
            cooccurrence: BTreeMap::new(),
            gt_ids: BTreeSet::new(),
            hyp_ids: BTreeSet::new(),
        }
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Accumulates one frame. Frames must arrive in order.
    ///
    /// A ground truth keeps its previous hypothesis while their BEV IoU
    /// stays at or above the threshold; the rest are matched optimally on
    /// `1 - IoU`.
    pub fn update(&mut self, gt: &[IdBox], hyp: &[IdBox]) -> Result<()> {
        check_unique(gt)?;
        check_unique(hyp)?;
        let iou: Vec<Vec<f64>> = gt
            .iter()
            .map(|g| hyp.iter().map(|h| iou_bev(&g.bbox, &h.bbox)).collect())
            .collect();

        let mut gt_pair: Vec<Option<usize>> = alloc::vec![None; gt.len()];
        let mut hyp_taken = alloc::vec![false; hyp.len()];
        for (gi, g) in gt.iter().enumerate() {
            let Some(&prev) = self.last_match.get(&g.id) else {
                continue;
            };
            if let Some(hi) = hyp.iter().position(|h| h.id == prev) {
                if !hyp_taken[hi] && iou[gi][hi] >= self.threshold {
                    gt_pair[gi] = Some(hi);
                    hyp_taken[hi] = true;
                }
            }
        }

        let free_gt: Vec<usize> = (0..gt.len()).filter(|&i| gt_pair[i].is_none()).collect();
        let free_hyp: Vec<usize> = (0..hyp.len()).filter(|&i| !hyp_taken[i]).collect();
        let costs = CostMatrix::from_fn(free_gt.len(), free_hyp.len(), |r, c| {
            let v = iou[free_gt[r]][free_hyp[c]];
            if v >= self.threshold {
                1.0 - v
            } else {
                f64::INFINITY
            }
        });
        let matching = assign(&costs, 1.0 - self.threshold);
        for &(r, c) in &matching.pairs {
            gt_pair[free_gt[r]] = Some(free_hyp[c]);
            hyp_taken[free_hyp[c]] = true;
        }

        for (gi, pair) in gt_pair.iter().enumerate() {
            match pair {
                Some(hi) => {
                    let g = gt[gi].id;
                    let h = hyp[*hi].id;
                    if let Some(prev) = self.last_match.insert(g, h) {
                        if prev != h {
                            self.idsw += 1;
                        }
                    }
                    self.matches += 1;
                }
                None => self.fn_ += 1,
            }
        }
        self.fp += hyp_taken.iter().filter(|t| !**t).count();

        for (gi, g) in gt.iter().enumerate() {
            for (hi, h) in hyp.iter().enumerate() {
                if iou[gi][hi] >= self.threshold {
                    *self.cooccurrence.entry((g.id, h.id)).or_default() += 1;
                }
            }
        }
        self.gt_ids.extend(gt.iter().map(|g| g.id));
        self.hyp_ids.extend(hyp.iter().map(|h| h.id));
        self.gt_boxes += gt.len();
        self.hyp_boxes += hyp.len();
        self.frames += 1;
        Ok(())
    }

    /// Identity true positives under the optimal one-to-one id mapping.
    pub fn idtp(&self) -> usize {
        let gts: Vec<u64> = self.gt_ids.iter().copied().collect();
        let hyps: Vec<u64> = self.hyp_ids.iter().copied().collect();
        let costs = CostMatrix::from_fn(gts.len(), hyps.len(), |r, c| {
            -(self.cooccurrence.get(&(gts[r], hyps[c])).copied().unwrap_or(0) as f64)
        });
        assign(&costs, 0.0)
            .pairs
            .iter()
            .map(|&(r, c)| self.cooccurrence.get(&(gts[r], hyps[c])).copied().unwrap_or(0))
            .sum()
    }

    pub fn summary(&self) -> Result<MotSummary> {
        let idtp = self.idtp();
        Ok(MotSummary {
            mota: mota(self)?,
            idf1: idf1_from(idtp, self)?,
            fp: self.fp,
            fn_: self.fn_,
            idsw: self.idsw,
            gt: self.gt_boxes,
            matches: self.matches,
            idtp,
        })
    }
}

/// `1 - (FP + FN + IDSW) / GT`.
pub fn mota(acc: &MotAccumulator) -> Result<f64> {
    if acc.gt_boxes == 0 {
        return Err(Error::NoGroundTruth);
    }
    Ok(1.0 - (acc.fp + acc.fn_ + acc.idsw) as f64 / acc.gt_boxes as f64)
}

/// `2 IDTP / (2 IDTP + IDFP + IDFN)`.
pub fn idf1(acc: &MotAccumulator) -> Result<f64> {
    idf1_from(acc.idtp(), acc)
}

fn idf1_from(idtp: usize, acc: &MotAccumulator) -> Result<f64> {
    if acc.gt_boxes == 0 {
        return Err(Error::NoGroundTruth);
    }
    let idfn = acc.gt_boxes - idtp;
    let idfp = acc.hyp_boxes - idtp;
    Ok(2.0 * idtp as f64 / (2 * idtp + idfp + idfn) as f64)
}
