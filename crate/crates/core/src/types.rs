//! Geometric primitives and the per-frame observation types shared by every
//! stage of the pipeline.

use crate::error::{Error, Result};

pub const COLOR_DIM: usize = 10;
pub const STYLE_DIM: usize = 20;
pub const DIRECTION_BINS: usize = 72;

/// Lower/upper clamp applied to color and style probabilities so the
/// cross-entropy distances never take `log(0)`.
pub const EPS_PROB: f64 = 1e-7;

/// Smallest width/height a box may collapse to after filtering or smoothing.
pub const MIN_SIDE: f64 = 1e-3;

/// Axis-aligned box in pixels, top-left anchored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        if !(w > 0.0 && h > 0.0)
            || !x.is_finite()
            || !y.is_finite()
            || !w.is_finite()
            || !h.is_finite()
        {
            return Err(Error::InvalidBox { w, h });
        }
        Ok(Self { x, y, w, h })
    }

    /// Builds a box from center, aspect ratio (w/h) and height. Non-positive
    /// sides are floored at [`MIN_SIDE`].
    pub fn from_xyah(cx: f64, cy: f64, aspect: f64, h: f64) -> Self {
        let h = h.max(MIN_SIDE);
        let w = (aspect * h).max(MIN_SIDE);
        Self {
            x: cx - w / 2.0,
            y: cy - h / 2.0,
            w,
            h,
        }
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        let (w, h) = (w.max(MIN_SIDE), h.max(MIN_SIDE));
        Self {
            x: cx - w / 2.0,
            y: cy - h / 2.0,
            w,
            h,
        }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// `(cx, cy, w/h, h)`, the measurement layout of the motion filter.
    pub fn to_xyah(&self) -> [f64; 4] {
        let (cx, cy) = self.center();
        [cx, cy, self.w / self.h, self.h]
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.x, self.y, self.w, self.h]
    }

    pub fn intersection(&self, other: &BBox) -> f64 {
        let iw = (self.x + self.w).min(other.x + other.w) - self.x.max(other.x);
        let ih = (self.y + self.h).min(other.y + other.h) - self.y.max(other.y);
        if iw <= 0.0 || ih <= 0.0 {
            0.0
        } else {
            iw * ih
        }
    }
}

/// Intersection over union. Symmetric, in `[0, 1]`, exactly 1 for identical boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    if a == b {
        return 1.0;
    }
    let inter = a.intersection(b);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Euclidean distance between box centers.
pub fn center_distance(a: &BBox, b: &BBox) -> f64 {
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    (ax - bx).hypot(ay - by)
}

/// One detector output with its precomputed appearance features.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub frame: u32,
    pub bbox: BBox,
    pub conf: f64,
    pub class_id: u32,
    pub embedding: Vec<f64>,
    pub color: [f64; COLOR_DIM],
    pub style: [f64; STYLE_DIM],
    pub direction: [f64; DIRECTION_BINS],
}

impl Detection {
    /// A detection with neutral features: uniform color/style/direction and a
    /// unit embedding along the first axis.
    pub fn plain(frame: u32, bbox: BBox, conf: f64, class_id: u32, embedding_dim: usize) -> Self {
        let mut embedding = vec![0.0; embedding_dim.max(1)];
        embedding[0] = 1.0;
        Self {
            frame,
            bbox,
            conf,
            class_id,
            embedding,
            color: [0.5; COLOR_DIM],
            style: [0.5; STYLE_DIM],
            direction: [1.0 / DIRECTION_BINS as f64; DIRECTION_BINS],
        }
    }

    /// Bin with the largest direction probability; ties go to the lowest index.
    pub fn direction_argmax(&self) -> usize {
        argmax(&self.direction)
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn l2_normalize(v: &mut [f64]) -> bool {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    true
}

/// Brings a raw detection onto the invariants the distance functions expect:
/// unit embedding, direction summing to one, color/style clamped away from 0 and 1.
pub fn normalize_detection(mut det: Detection) -> Result<Detection> {
    if !l2_normalize(&mut det.embedding) {
        return Err(Error::ZeroEmbedding { frame: det.frame });
    }
    det.direction.iter_mut().for_each(|p| *p = p.max(0.0));
    let mass: f64 = det.direction.iter().sum();
    if !(mass > 0.0) || !mass.is_finite() {
        return Err(Error::ZeroDirection { frame: det.frame });
    }
    det.direction.iter_mut().for_each(|p| *p /= mass);
    for c in det.color.iter_mut().chain(det.style.iter_mut()) {
        *c = c.clamp(EPS_PROB, 1.0 - EPS_PROB);
    }
    det.conf = det.conf.clamp(0.0, 1.0);
    Ok(det)
}

/// A single recorded position of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackPoint {
    pub frame: u32,
    pub bbox: BBox,
    pub conf: f64,
    /// Set on points synthesized by gap filling.
    pub interpolated: bool,
}

/// A finished tracklet, the unit of offline post-processing.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub track_id: u64,
    pub class_id: u32,
    /// Strictly increasing in frame; gaps allowed.
    pub points: Vec<TrackPoint>,
    /// Appearance snapshots sampled along the tracklet.
    pub embedding_bank: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn first_frame(&self) -> Option<u32> {
        self.points.first().map(|p| p.frame)
    }

    pub fn last_frame(&self) -> Option<u32> {
        self.points.last().map(|p| p.frame)
    }

    pub fn conf_mean(&self) -> f64 {
        if self.points.is_empty() {
            return 0.0;
        }
        self.points.iter().map(|p| p.conf).sum::<f64>() / self.points.len() as f64
    }

    pub fn is_ordered(&self) -> bool {
        self.points.windows(2).all(|w| w[0].frame < w[1].frame)
    }
}
