//! Loss oracles for joint detection and appearance embedding.

use alloc::vec::Vec;
#[allow(unused_imports)] // inherent float methods exist once std is linked
use num_traits::Float;

use crate::error::{Error, Result};

pub const DEFAULT_EMBEDDING_DIM: usize = 32;
pub const DEFAULT_MARGIN: f64 = 0.3;
pub const DEFAULT_FRAME_WINDOW: u64 = 5;

/// Unit-norm appearance embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    /// Normalizes `values` to unit length.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::ZeroNorm);
        }
        Ok(Embedding(values.into_iter().map(|v| v / norm).collect()))
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        Self::new(values.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &Embedding) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum())
    }

    /// `momentum * self + (1 - momentum) * other`, renormalized. Falls back
    /// to `other` when the blend cancels out.
    pub fn blend(&self, other: &Embedding, momentum: f64) -> Result<Embedding> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        let mixed = self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| momentum * a + (1.0 - momentum) * b)
            .collect();
        Embedding::new(mixed).or_else(|_| Ok(other.clone()))
    }
}

/// `1 - cos(a, b)`, in `[0, 2]`.
pub fn cosine_distance(a: &Embedding, b: &Embedding) -> Result<f64> {
    Ok((1.0 - a.dot(b)?).clamp(0.0, 2.0))
}

/// Euclidean distance between the unit embeddings.
pub fn l2_distance(a: &Embedding, b: &Embedding) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(a.0
        .iter()
        .zip(&b.0)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistanceKind {
    #[default]
    Cosine,
    L2,
}

impl DistanceKind {
    pub fn eval(self, a: &Embedding, b: &Embedding) -> Result<f64> {
        match self {
            DistanceKind::Cosine => cosine_distance(a, b),
            DistanceKind::L2 => l2_distance(a, b),
        }
    }
}

/// Index of the negative closest to the anchor; ties go to the lowest index.
pub fn hard_negative(anchor: &Embedding, negatives: &[Embedding], distance: DistanceKind) -> Result<usize> {
    if negatives.is_empty() {
        return Err(Error::EmptyNegatives);
    }
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, k) in negatives.iter().enumerate() {
        let d = distance.eval(anchor, k)?;
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripletBatch {
    pub anchor: Embedding,
    pub positive: Embedding,
    pub negatives: Vec<Embedding>,
    pub margin: f64,
}

/// Hinge `max(0, D(a, k+) - D(a, k-hard) + m)`.
pub fn triplet_loss(batch: &TripletBatch, distance: DistanceKind) -> Result<f64> {
    if !(batch.margin >= 0.0 && batch.margin.is_finite()) {
        return Err(Error::InvalidConfig("triplet margin must be non-negative".into()));
    }
    let hard = hard_negative(&batch.anchor, &batch.negatives, distance)?;
    let pos = distance.eval(&batch.anchor, &batch.positive)?;
    let neg = distance.eval(&batch.anchor, &batch.negatives[hard])?;
    Ok((pos - neg + batch.margin).max(0.0))
}

/// `alpha * l_class + beta * l_reg + gamma * l_emb`.
pub fn combined_loss(l_class: f64, l_reg: f64, l_emb: f64, alpha: f64, beta: f64, gamma: f64) -> Result<f64> {
    if [l_class, l_reg, l_emb].iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidLoss);
    }
    if [alpha, beta, gamma].iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::NegativeCoefficient);
    }
    Ok(alpha * l_class + beta * l_reg + gamma * l_emb)
}

/// One object with its identity and embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedObject {
    pub track_id: u64,
    pub embedding: Embedding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NegativePool {
    /// Every other object from both frames.
    #[default]
    BothFrames,
    /// Only other objects from the positive's frame.
    PositiveFrame,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripletSampling {
    /// Frames must satisfy `|t1 - t2| < window`.
    pub window: u64,
    pub margin: f64,
    pub pool: NegativePool,
}

impl Default for TripletSampling {
    fn default() -> Self {
        TripletSampling {
            window: DEFAULT_FRAME_WINDOW,
            margin: DEFAULT_MARGIN,
            pool: NegativePool::BothFrames,
        }
    }
}

/// Builds one batch per frame-A object that reappears in frame B.
///
/// Objects with no counterpart, and anchors left with no negatives, yield
/// nothing.
pub fn sample_triplets(
    frame_a: &[EmbeddedObject],
    t1: u64,
    frame_b: &[EmbeddedObject],
    t2: u64,
    sampling: &TripletSampling,
) -> Result<Vec<TripletBatch>> {
    let gap = t1.abs_diff(t2);
    if gap >= sampling.window {
        return Err(Error::FrameGap {
            gap,
            window: sampling.window,
        });
    }
    let mut out = Vec::new();
    for anchor in frame_a {
        let Some(positive) = frame_b.iter().find(|o| o.track_id == anchor.track_id) else {
            continue;
        };
        let others_b = frame_b.iter().filter(|o| o.track_id != anchor.track_id);
        let negatives: Vec<Embedding> = match sampling.pool {
            NegativePool::BothFrames => frame_a
                .iter()
                .filter(|o| o.track_id != anchor.track_id)
                .chain(others_b)
                .map(|o| o.embedding.clone())
                .collect(),
            NegativePool::PositiveFrame => others_b.map(|o| o.embedding.clone()).collect(),
        };
        if negatives.is_empty() {
            continue;
        }
        out.push(TripletBatch {
            anchor: anchor.embedding.clone(),
            positive: positive.embedding.clone(),
            negatives,
            margin: sampling.margin,
        });
    }
    Ok(out)
}
