//! Offline trajectory refinement: gap filling, Gaussian-process smoothing and
//! appearance-based tracklet linking.

use std::collections::{BTreeMap, HashMap};

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::config::{GspConfig, LinkConfig};
use crate::features::{cosine_distance, MAX_COSINE_DISTANCE};
use crate::lap;
use crate::types::{center_distance, BBox, TrackPoint, Trajectory};

/// Trajectories longer than this are smoothed in overlapping windows.
pub const GSP_WINDOW: usize = 320;
/// Frames of context kept on each side of a window's core.
pub const GSP_MARGIN: usize = 60;

/// Fills every internal gap of at most `max_gap` missing frames by per-coordinate
/// linear interpolation. Filled points are flagged as interpolated.
pub fn linear_fill(traj: &Trajectory, max_gap: u32) -> Trajectory {
    let mut points = Vec::with_capacity(traj.points.len());
    for (i, p) in traj.points.iter().enumerate() {
        if let Some(prev) = i.checked_sub(1).map(|j| traj.points[j]) {
            let missing = p.frame - prev.frame - 1;
            if missing > 0 && missing <= max_gap {
                let span = (p.frame - prev.frame) as f64;
                let a = prev.bbox.as_array();
                let b = p.bbox.as_array();
                for f in prev.frame + 1..p.frame {
                    let s = (f - prev.frame) as f64 / span;
                    let lerp = |k: usize| a[k] + s * (b[k] - a[k]);
                    points.push(TrackPoint {
                        frame: f,
                        bbox: BBox {
                            x: lerp(0),
                            y: lerp(1),
                            w: lerp(2),
                            h: lerp(3),
                        },
                        conf: prev.conf + s * (p.conf - prev.conf),
                        interpolated: true,
                    });
                }
            }
        }
        points.push(*p);
    }
    Trajectory {
        points,
        ..traj.clone()
    }
}

fn rbf(a: f64, b: f64, length_scale: f64, signal_var: f64) -> f64 {
    let d = a - b;
    signal_var * (-(d * d) / (2.0 * length_scale * length_scale)).exp()
}

/// Zero-mean GP posterior mean at `query` given noisy samples `(train_t,
/// train_y)`, after removing the sample mean:
/// `K(query, train) (K(train, train) + σ² I)⁻¹ (y - ȳ) + ȳ`
/// with `k(t, t') = s² exp(-(t - t')² / 2ℓ²)`.
///
/// Returns `None` when the regularized Gram matrix cannot be factored.
pub fn gp_predict(
    train_t: &[f64],
    train_y: &[f64],
    query_t: &[f64],
    cfg: &GspConfig,
) -> Option<Vec<f64>> {
    let sol = GpSolver::new(train_t, cfg)?;
    Some(sol.predict(train_y, query_t))
}

struct GpSolver<'a> {
    train_t: &'a [f64],
    length_scale: f64,
    signal_var: f64,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl<'a> GpSolver<'a> {
    fn new(train_t: &'a [f64], cfg: &GspConfig) -> Option<Self> {
        let n = train_t.len();
        let (ell, s2) = (cfg.length_scale, cfg.signal_var);
        let gram = DMatrix::from_fn(n, n, |i, j| {
            rbf(train_t[i], train_t[j], ell, s2) + if i == j { cfg.noise_var } else { 0.0 }
        });
        Some(Self {
            train_t,
            length_scale: ell,
            signal_var: s2,
            chol: gram.cholesky()?,
        })
    }

    fn predict(&self, train_y: &[f64], query_t: &[f64]) -> Vec<f64> {
        let n = train_y.len();
        let mean = train_y.iter().sum::<f64>() / n as f64;
        let centered = DVector::from_iterator(n, train_y.iter().map(|y| y - mean));
        let beta = self.chol.solve(&centered);
        query_t
            .iter()
            .map(|&q| {
                self.train_t
                    .iter()
                    .zip(beta.iter())
                    .map(|(&t, b)| rbf(q, t, self.length_scale, self.signal_var) * b)
                    .sum::<f64>()
                    + mean
            })
            .collect()
    }
}

/// Smooths each of `(x, y, w, h)` with an independent GP evaluated at the
/// trajectory's own frames. Width and height are floored at 1 px.
pub fn gsp_smooth(traj: &Trajectory, cfg: &GspConfig) -> Trajectory {
    let n = traj.points.len();
    if n < 2 {
        return traj.clone();
    }
    let mut out = traj.clone();
    let mut start = 0;
    while start < n {
        // core [start, core_end), context [lo, hi)
        let (core_end, lo, hi) = if n <= GSP_WINDOW {
            (n, 0, n)
        } else {
            let core = GSP_WINDOW - 2 * GSP_MARGIN;
            let core_end = (start + core).min(n);
            (
                core_end,
                start.saturating_sub(GSP_MARGIN),
                (core_end + GSP_MARGIN).min(n),
            )
        };
        if !smooth_window(
            &traj.points[lo..hi],
            &mut out.points,
            lo,
            start..core_end,
            cfg,
        ) {
            warn!(
                "GP smoothing failed for track {}; leaving it unsmoothed",
                traj.track_id
            );
            return traj.clone();
        }
        start = core_end;
    }
    out
}

fn smooth_window(
    window: &[TrackPoint],
    out: &mut [TrackPoint],
    offset: usize,
    core: std::ops::Range<usize>,
    cfg: &GspConfig,
) -> bool {
    let t: Vec<f64> = window.iter().map(|p| p.frame as f64).collect();
    let Some(solver) = GpSolver::new(&t, cfg) else {
        return false;
    };
    let query: Vec<f64> = core.clone().map(|i| out[i].frame as f64).collect();
    let coords: Vec<Vec<f64>> = (0..4)
        .map(|k| {
            let y: Vec<f64> = window.iter().map(|p| p.bbox.as_array()[k]).collect();
            solver.predict(&y, &query)
        })
        .collect();
    for (qi, i) in core.enumerate() {
        debug_assert!(i >= offset);
        out[i].bbox = BBox {
            x: coords[0][qi],
            y: coords[1][qi],
            w: coords[2][qi].max(1.0),
            h: coords[3][qi].max(1.0),
        };
    }
    true
}

/// Smallest cosine distance over all pairs of bank vectors; 2 when either
/// bank is empty.
pub fn link_cost(a: &Trajectory, b: &Trajectory) -> f64 {
    a.embedding_bank
        .iter()
        .flat_map(|u| b.embedding_bank.iter().map(move |v| cosine_distance(u, v)))
        .fold(MAX_COSINE_DISTANCE, f64::min)
}

/// Spatio-temporal admissibility of `b` as the continuation of `a`.
pub fn link_admissible(a: &Trajectory, b: &Trajectory, cfg: &LinkConfig) -> bool {
    let (Some(a_last), Some(b_first)) = (a.points.last(), b.points.first()) else {
        return false;
    };
    if a.class_id != b.class_id || b_first.frame <= a_last.frame {
        return false;
    }
    b_first.frame - a_last.frame <= cfg.temporal_max
        && center_distance(&a_last.bbox, &b_first.bbox) <= cfg.spatial_max
}

/// One accepted link, with the gate quantities it passed.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeRecord {
    pub kept_id: u64,
    pub absorbed_id: u64,
    pub frame_gap: u32,
    pub center_distance: f64,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkOutcome {
    pub trajectories: Vec<Trajectory>,
    pub merges: Vec<MergeRecord>,
}

const INADMISSIBLE_LINK: f64 = 1e6;

/// Merges temporally disjoint tracklets of the same class whose appearance
/// banks agree, repeating until a pass accepts nothing. Merged tracklets keep
/// the earlier id. Output is sorted by track id.
pub fn global_link(trajs: &[Trajectory], cfg: &LinkConfig) -> LinkOutcome {
    let mut current: Vec<Trajectory> = trajs
        .iter()
        .filter(|t| !t.points.is_empty())
        .cloned()
        .collect();
    let mut merges = Vec::new();
    loop {
        let round = link_round(&current, cfg);
        if round.is_empty() {
            break;
        }
        current = apply_links(current, &round, cfg.bank_len);
        merges.extend(round);
    }
    current.sort_by_key(|t| t.track_id);
    LinkOutcome {
        trajectories: current,
        merges,
    }
}

fn link_round(trajs: &[Trajectory], cfg: &LinkConfig) -> Vec<MergeRecord> {
    let mut by_class: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, t) in trajs.iter().enumerate() {
        by_class.entry(t.class_id).or_default().push(i);
    }
    let mut accepted = Vec::new();
    for idx in by_class.values() {
        let n = idx.len();
        if n < 2 {
            continue;
        }
        let mut cost = vec![INADMISSIBLE_LINK; n * n];
        let mut any = false;
        for (r, &i) in idx.iter().enumerate() {
            for (c, &j) in idx.iter().enumerate() {
                if i == j || !link_admissible(&trajs[i], &trajs[j], cfg) {
                    continue;
                }
                let d = link_cost(&trajs[i], &trajs[j]);
                if 1.0 - d >= cfg.accept_sim {
                    cost[r * n + c] = d;
                    any = true;
                }
            }
        }
        if !any {
            continue;
        }
        for (r, c) in lap::linear_sum_assignment(&cost, n, n) {
            if cost[r * n + c] >= INADMISSIBLE_LINK {
                continue;
            }
            let (a, b) = (&trajs[idx[r]], &trajs[idx[c]]);
            accepted.push(MergeRecord {
                kept_id: a.track_id,
                absorbed_id: b.track_id,
                frame_gap: b.first_frame().unwrap() - a.last_frame().unwrap(),
                center_distance: center_distance(
                    &a.points.last().unwrap().bbox,
                    &b.points.first().unwrap().bbox,
                ),
                similarity: 1.0 - cost[r * n + c],
            });
        }
    }
    accepted
}

fn apply_links(trajs: Vec<Trajectory>, links: &[MergeRecord], bank_len: usize) -> Vec<Trajectory> {
    let successor: HashMap<u64, u64> = links.iter().map(|m| (m.kept_id, m.absorbed_id)).collect();
    let absorbed: std::collections::HashSet<u64> = links.iter().map(|m| m.absorbed_id).collect();
    let mut by_id: BTreeMap<u64, Trajectory> = trajs.into_iter().map(|t| (t.track_id, t)).collect();
    let heads: Vec<u64> = by_id
        .keys()
        .copied()
        .filter(|id| !absorbed.contains(id))
        .collect();
    let mut out = Vec::with_capacity(heads.len());
    for head in heads {
        let mut merged = by_id.remove(&head).unwrap();
        let mut cursor = head;
        while let Some(&next) = successor.get(&cursor) {
            let tail = by_id.remove(&next).unwrap();
            merged.points.extend(tail.points);
            merged.embedding_bank.extend(tail.embedding_bank);
            cursor = next;
        }
        merged.embedding_bank = subsample(merged.embedding_bank, bank_len);
        out.push(merged);
    }
    out
}

/// Evenly spaced subset of at most `cap` entries, keeping both ends.
fn subsample(bank: Vec<Vec<f64>>, cap: usize) -> Vec<Vec<f64>> {
    let n = bank.len();
    if n <= cap || cap == 0 {
        return bank;
    }
    if cap == 1 {
        return vec![bank[n - 1].clone()];
    }
    (0..cap)
        .map(|i| bank[(i * (n - 1) + (cap - 1) / 2) / (cap - 1)].clone())
        .collect()
}

/// Full offline stage: linking, then gap filling and smoothing per trajectory.
pub fn refine(trajs: &[Trajectory], gsp: &GspConfig, link: &LinkConfig) -> LinkOutcome {
    let mut outcome = if link.enabled {
        global_link(trajs, link)
    } else {
        let mut t = trajs.to_vec();
        t.sort_by_key(|t| t.track_id);
        LinkOutcome {
            trajectories: t,
            merges: Vec::new(),
        }
    };
    if gsp.enabled {
        outcome.trajectories = outcome
            .trajectories
            .iter()
            .map(|t| gsp_smooth(&linear_fill(t, gsp.max_gap), gsp))
            .collect();
    }
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pt(frame: u32, x: f64, y: f64) -> TrackPoint {
        TrackPoint {
            frame,
            bbox: BBox::new(x, y, 10.0, 10.0).unwrap(),
            conf: 1.0,
            interpolated: false,
        }
    }

    fn traj(id: u64, points: Vec<TrackPoint>, bank: Vec<Vec<f64>>) -> Trajectory {
        Trajectory {
            track_id: id,
            class_id: 0,
            points,
            embedding_bank: bank,
        }
    }

    #[test]
    fn midpoint_fill() {
        let t = traj(1, vec![pt(1, 0.0, 0.0), pt(3, 2.0, 2.0)], vec![]);
        let f = linear_fill(&t, 20);
        assert_eq!(f.points.len(), 3);
        assert_eq!(f.points[1].frame, 2);
        assert_eq!(f.points[1].bbox, BBox::new(1.0, 1.0, 10.0, 10.0).unwrap());
        assert!(f.points[1].interpolated);
    }

    #[test]
    fn long_gaps_and_contiguous_tracks_untouched() {
        let t = traj(1, vec![pt(1, 0.0, 0.0), pt(23, 2.0, 2.0)], vec![]);
        assert_eq!(linear_fill(&t, 20), t);
        let t = traj(1, vec![pt(1, 0.0, 0.0), pt(22, 2.0, 2.0)], vec![]);
        assert_eq!(linear_fill(&t, 20).points.len(), 22);
        let t = traj(1, (1..=5).map(|f| pt(f, f as f64, 0.0)).collect(), vec![]);
        assert_eq!(linear_fill(&t, 20), t);
        let single = traj(1, vec![pt(4, 0.0, 0.0)], vec![]);
        assert_eq!(linear_fill(&single, 20), single);
    }

    #[test]
    fn constant_track_is_fixed_point() {
        let t = traj(1, (1..=30).map(|f| pt(f, 5.0, 7.0)).collect(), vec![]);
        let s = gsp_smooth(&t, &GspConfig::default());
        for (a, b) in s.points.iter().zip(&t.points) {
            assert_abs_diff_eq!(a.bbox.x, b.bbox.x, epsilon = 1e-6);
            assert_abs_diff_eq!(a.bbox.h, b.bbox.h, epsilon = 1e-6);
        }
    }

    #[test]
    fn heavy_noise_limit_returns_means() {
        let t = traj(
            1,
            (1..=20).map(|f| pt(f, f as f64 * 3.0, 0.0)).collect(),
            vec![],
        );
        let cfg = GspConfig {
            noise_var: 1e10,
            ..GspConfig::default()
        };
        let s = gsp_smooth(&t, &cfg);
        let mean = (1..=20).map(|f| f as f64 * 3.0).sum::<f64>() / 20.0;
        for p in &s.points {
            assert_abs_diff_eq!(p.bbox.x, mean, epsilon = 0.5);
        }
    }

    #[test]
    fn windowed_smoothing_matches_full_solve() {
        let n = 700u32;
        let pts: Vec<TrackPoint> = (1..=n)
            .map(|f| {
                let t = f as f64;
                pt(f, 3.0 * t + 20.0 * (t / 15.0).sin(), 0.5 * t)
            })
            .collect();
        let t = traj(1, pts, vec![]);
        let cfg = GspConfig::default();
        let windowed = gsp_smooth(&t, &cfg);
        let frames: Vec<f64> = t.points.iter().map(|p| p.frame as f64).collect();
        let xs: Vec<f64> = t.points.iter().map(|p| p.bbox.x).collect();
        let full = gp_predict(&frames, &xs, &frames, &cfg).unwrap();
        // windows only disagree near the track ends, where each reverts to its own mean
        let dev: Vec<f64> = windowed
            .points
            .iter()
            .zip(&full)
            .map(|(p, f)| (p.bbox.x - f).abs())
            .collect();
        let interior = dev[100..dev.len() - 100]
            .iter()
            .fold(0.0f64, |a, &b| a.max(b));
        let worst = dev.iter().fold(0.0f64, |a, &b| a.max(b));
        assert!(interior < 1e-2, "interior deviation {interior}");
        assert!(worst < 1.0, "max deviation {worst}");
    }

    #[test]
    fn link_cost_examples() {
        let a = traj(1, vec![pt(1, 0.0, 0.0)], vec![vec![1.0, 0.0]]);
        let b = traj(2, vec![pt(5, 0.0, 0.0)], vec![vec![1.0, 0.0]]);
        let c = traj(3, vec![pt(5, 0.0, 0.0)], vec![vec![0.0, 1.0]]);
        let e = traj(4, vec![pt(5, 0.0, 0.0)], vec![]);
        assert_eq!(link_cost(&a, &b), 0.0);
        assert_eq!(link_cost(&a, &c), 1.0);
        assert_eq!(link_cost(&a, &e), 2.0);
    }

    fn halves(dx: f64) -> Vec<Trajectory> {
        let bank = vec![vec![0.0, 1.0, 0.0]];
        vec![
            traj(
                3,
                (1..=10).map(|f| pt(f, f as f64, 0.0)).collect(),
                bank.clone(),
            ),
            traj(
                7,
                (16..=25)
                    .map(|f| pt(f, 10.0 + dx + (f - 16) as f64, 0.0))
                    .collect(),
                bank,
            ),
        ]
    }

    #[test]
    fn split_track_is_merged() {
        let out = global_link(&halves(10.0), &LinkConfig::default());
        assert_eq!(out.trajectories.len(), 1);
        assert_eq!(out.trajectories[0].track_id, 3);
        assert_eq!(out.trajectories[0].points.len(), 20);
        assert!(out.trajectories[0].is_ordered());
        assert_eq!(out.merges.len(), 1);
        assert_eq!(out.merges[0].frame_gap, 6);
    }

    #[test]
    fn distant_split_is_not_merged() {
        let out = global_link(&halves(100.0), &LinkConfig::default());
        assert_eq!(out.trajectories.len(), 2);
    }

    #[test]
    fn overlapping_tracklets_never_merge() {
        let bank = vec![vec![1.0, 0.0]];
        let a = traj(1, (1..=10).map(|f| pt(f, 0.0, 0.0)).collect(), bank.clone());
        let b = traj(2, (8..=20).map(|f| pt(f, 0.0, 0.0)).collect(), bank);
        let out = global_link(&[a, b], &LinkConfig::default());
        assert_eq!(out.trajectories.len(), 2);
    }

    #[test]
    fn chains_collapse_to_the_earliest_id() {
        let bank = vec![vec![1.0, 0.0]];
        let parts = vec![
            traj(
                9,
                (1..=5).map(|f| pt(f, f as f64, 0.0)).collect(),
                bank.clone(),
            ),
            traj(
                4,
                (8..=12).map(|f| pt(f, f as f64, 0.0)).collect(),
                bank.clone(),
            ),
            traj(6, (15..=20).map(|f| pt(f, f as f64, 0.0)).collect(), bank),
        ];
        let out = global_link(&parts, &LinkConfig::default());
        assert_eq!(out.trajectories.len(), 1);
        assert_eq!(out.trajectories[0].track_id, 9);
        assert_eq!(out.trajectories[0].points.len(), 16);
    }

    #[test]
    fn subsample_keeps_ends() {
        let bank: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64]).collect();
        let s = subsample(bank, 16);
        assert_eq!(s.len(), 16);
        assert_eq!(s[0][0], 0.0);
        assert_eq!(s[15][0], 39.0);
    }
}
