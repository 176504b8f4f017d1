//! Appearance distances and the per-track feature bank.
//!
//! Color and style use summed binary cross-entropy, minimized over a bounded
//! stack of past observations. Direction compares a detection's 72-bin
//! heading distribution with a circular Gaussian template centered at the
//! track's last heading. The embedding is tracked as an exponential moving
//! average; periodic snapshots of it form the bank used for offline linking.

use std::collections::VecDeque;
use std::f64::consts::PI;

use crate::types::{Detection, COLOR_DIM, DIRECTION_BINS, EPS_PROB, STYLE_DIM};

/// Distance reported for an edge comparison against an empty bank.
pub const MAX_COSINE_DISTANCE: f64 = 2.0;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `1 - <e, f>` for unit vectors.
pub fn cosine_distance(e: &[f64], f: &[f64]) -> f64 {
    (1.0 - dot(e, f)).clamp(0.0, 2.0)
}

/// Summed element-wise binary cross-entropy with `label` as the target side.
/// `pred` is clamped to `[EPS_PROB, 1 - EPS_PROB]`.
pub fn ce_vector_distance(label: &[f64], pred: &[f64]) -> f64 {
    debug_assert_eq!(label.len(), pred.len());
    label
        .iter()
        .zip(pred)
        .map(|(&a, &b)| {
            let b = b.clamp(EPS_PROB, 1.0 - EPS_PROB);
            -(a * b.ln() + (1.0 - a) * (1.0 - b).ln())
        })
        .sum()
}

/// Wrap-around bin distance on the 72-bin heading circle.
pub fn circular_bin_distance(a: usize, b: usize) -> usize {
    let d = a.abs_diff(b) % DIRECTION_BINS;
    d.min(DIRECTION_BINS - d)
}

/// Unnormalized circular Gaussian over heading bins, peaked at `center`.
pub fn circular_gaussian(center: usize, k: usize, sigma: f64) -> f64 {
    let d = circular_bin_distance(center, k) as f64;
    (-(d * d) / (2.0 * sigma * sigma)).exp() / (2.0 * PI * sigma * sigma).sqrt()
}

pub fn direction_template(center: usize, sigma: f64) -> [f64; DIRECTION_BINS] {
    std::array::from_fn(|k| circular_gaussian(center, k, sigma))
}

/// Sum of squared residuals between `p` and the template centered at `bin`.
pub fn direction_residual(bin: usize, p: &[f64; DIRECTION_BINS], sigma: f64) -> f64 {
    p.iter()
        .enumerate()
        .map(|(k, &pk)| {
            let r = pk - circular_gaussian(bin, k, sigma);
            r * r
        })
        .sum()
}

/// Bounded appearance memory owned by one track.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBank {
    pub colors: VecDeque<[f64; COLOR_DIM]>,
    pub styles: VecDeque<[f64; STYLE_DIM]>,
    pub direction_bin: Option<usize>,
    pub ema: Option<Vec<f64>>,
    pub snapshots: VecDeque<Vec<f64>>,
    stack_len: usize,
    bank_len: usize,
    snapshot_every: u32,
    updates: u64,
}

impl FeatureBank {
    pub fn new(stack_len: usize, bank_len: usize, snapshot_every: u32) -> Self {
        Self {
            colors: VecDeque::with_capacity(stack_len),
            styles: VecDeque::with_capacity(stack_len),
            direction_bin: None,
            ema: None,
            snapshots: VecDeque::new(),
            stack_len: stack_len.max(1),
            bank_len: bank_len.max(1),
            snapshot_every: snapshot_every.max(1),
            updates: 0,
        }
    }

    pub fn stack_len(&self) -> usize {
        self.stack_len
    }

    /// Cosine distance between the EMA state and `f`; 2 before the first update.
    pub fn edge_distance(&self, f: &[f64]) -> f64 {
        match &self.ema {
            Some(e) => cosine_distance(e, f),
            None => MAX_COSINE_DISTANCE,
        }
    }

    /// Minimum cross-entropy over the color stack, `None` when it is empty.
    pub fn color_distance(&self, c: &[f64; COLOR_DIM]) -> Option<f64> {
        min_ce(self.colors.iter().map(|s| &s[..]), c)
    }

    pub fn style_distance(&self, s: &[f64; STYLE_DIM]) -> Option<f64> {
        min_ce(self.styles.iter().map(|x| &x[..]), s)
    }

    /// Residual against the template at the stored heading; `None` while the
    /// direction slot is empty.
    pub fn direction_distance(&self, p: &[f64; DIRECTION_BINS], sigma: f64) -> Option<f64> {
        self.direction_bin
            .map(|bin| direction_residual(bin, p, sigma))
    }

    /// Blends `f` into the EMA state (`alpha` weighs the old state) and
    /// renormalizes. The first call adopts `f` as is.
    pub fn ema_update(&mut self, f: &[f64], alpha: f64) {
        let next = match self.ema.take() {
            None => f.to_vec(),
            Some(prev) => {
                let mut v: Vec<f64> = prev
                    .iter()
                    .zip(f)
                    .map(|(e, x)| alpha * e + (1.0 - alpha) * x)
                    .collect();
                if !crate::types::l2_normalize(&mut v) {
                    // antipodal blend at alpha = 0.5; keep the newest observation
                    v = f.to_vec();
                }
                v
            }
        };
        if self.updates.is_multiple_of(self.snapshot_every as u64) {
            if self.snapshots.len() == self.bank_len {
                self.snapshots.pop_front();
            }
            self.snapshots.push_back(next.clone());
        }
        self.updates += 1;
        self.ema = Some(next);
    }

    /// Records an assigned detection: color/style pushed with oldest-first
    /// eviction, direction slot overwritten with the argmax bin, EMA advanced.
    pub fn stack_append(&mut self, det: &Detection, alpha: f64) {
        if self.colors.len() == self.stack_len {
            self.colors.pop_front();
        }
        self.colors.push_back(det.color);
        if self.styles.len() == self.stack_len {
            self.styles.pop_front();
        }
        self.styles.push_back(det.style);
        self.direction_bin = Some(det.direction_argmax());
        self.ema_update(&det.embedding, alpha);
    }
}

fn min_ce<'a>(stack: impl Iterator<Item = &'a [f64]>, query: &[f64]) -> Option<f64> {
    stack
        .map(|label| ce_vector_distance(label, query))
        .fold(None, |acc: Option<f64>, d| {
            Some(acc.map_or(d, |a| a.min(d)))
        })
}
