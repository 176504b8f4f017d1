//! Per-frame association: gated combined cost, class-separated Hungarian
//! matching and the track lifecycle.

use std::collections::BTreeMap;

use crate::config::TrackerConfig;
use crate::error::{Error, Result};
use crate::features::FeatureBank;
use crate::kalman::{self, measurement_from_bbox, KalmanParams, KalmanState};
use crate::lap;
use crate::types::{iou, Detection, TrackPoint, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Deleted,
}

#[derive(Debug, Clone)]
pub struct Track {
    pub track_id: u64,
    pub class_id: u32,
    pub kalman: KalmanState,
    pub bank: FeatureBank,
    pub age_since_update: u32,
    pub hits: u32,
    pub status: TrackStatus,
    /// Posterior boxes at every matched frame.
    pub history: Vec<TrackPoint>,
    ever_confirmed: bool,
}

impl Track {
    pub fn new(track_id: u64, det: &Detection, cfg: &TrackerConfig, params: &KalmanParams) -> Self {
        let mut bank = FeatureBank::new(cfg.stack_len, cfg.bank_len, cfg.snapshot_every);
        bank.stack_append(det, cfg.alpha);
        let kalman = params.initiate(&measurement_from_bbox(&det.bbox));
        let status = if cfg.n_init <= 1 {
            TrackStatus::Confirmed
        } else {
            TrackStatus::Tentative
        };
        Self {
            track_id,
            class_id: det.class_id,
            history: vec![TrackPoint {
                frame: det.frame,
                bbox: det.bbox,
                conf: det.conf,
                interpolated: false,
            }],
            kalman,
            bank,
            age_since_update: 0,
            hits: 1,
            ever_confirmed: status == TrackStatus::Confirmed,
            status,
        }
    }

    pub fn is_confirmed(&self) -> bool {
        self.status == TrackStatus::Confirmed
    }

    /// Finished-trajectory view: matched points plus the appearance bank,
    /// closed with the latest EMA state.
    pub fn to_trajectory(&self) -> Trajectory {
        let mut bank: Vec<Vec<f64>> = self.bank.snapshots.iter().cloned().collect();
        if let Some(ema) = &self.bank.ema {
            if bank.last() != Some(ema) {
                bank.push(ema.clone());
            }
        }
        Trajectory {
            track_id: self.track_id,
            class_id: self.class_id,
            points: self.history.clone(),
            embedding_bank: bank,
        }
    }
}

/// Breakdown of one track/detection pairing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCost {
    pub value: f64,
    pub admissible: bool,
    pub iou: f64,
    pub direction_distance: Option<f64>,
}

/// Gated weighted distance between a predicted track and a detection.
///
/// The pair is admissible when the predicted box overlaps the detection with
/// IoU above `iou_min` and the heading residual is below `dir_max` (an empty
/// direction slot passes). Feature terms without history drop out and the
/// remaining weights are rescaled to the configured total.
pub fn combined_cost(track: &Track, det: &Detection, cfg: &TrackerConfig) -> Result<PairCost> {
    if track.class_id != det.class_id {
        return Err(Error::ClassMismatch {
            track: track.class_id,
            detection: det.class_id,
        });
    }
    let overlap = iou(&track.kalman.bbox(), &det.bbox);
    let direction = track.bank.direction_distance(&det.direction, cfg.sigma_dir);
    let admissible = overlap > cfg.iou_min && direction.is_none_or(|d| d < cfg.dir_max);
    if !admissible {
        return Ok(PairCost {
            value: cfg.d_max + cfg.epsilon,
            admissible,
            iou: overlap,
            direction_distance: direction,
        });
    }

    let motion = kalman::gating_distance(
        &track.kalman,
        &measurement_from_bbox(&det.bbox),
        cfg.frame_diagonal(),
    );
    let edge = track
        .bank
        .ema
        .as_ref()
        .map(|_| track.bank.edge_distance(&det.embedding));
    let terms = [
        (cfg.lambda_motion, Some(motion)),
        (cfg.lambda_edge, edge),
        (cfg.lambda_color, track.bank.color_distance(&det.color)),
        (cfg.lambda_style, track.bank.style_distance(&det.style)),
    ];
    let total_weight: f64 = terms.iter().map(|(l, _)| l).sum();
    let (active_weight, weighted) = terms
        .iter()
        .filter_map(|&(l, d)| d.map(|d| (l, l * d)))
        .fold((0.0, 0.0), |(w, s), (l, v)| (w + l, s + v));
    let value = if active_weight > 0.0 {
        weighted * (total_weight / active_weight)
    } else {
        0.0
    };
    Ok(PairCost {
        value,
        admissible,
        iou: overlap,
        direction_distance: direction,
    })
}

/// Row-major `tracks × detections` cost matrix with its gate mask.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
    pub gate: Vec<bool>,
    pub pairs: Vec<PairCost>,
    pub track_ids: Vec<u64>,
    pub det_indices: Vec<usize>,
}

impl CostMatrix {
    pub fn value(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    pub fn pair(&self, r: usize, c: usize) -> &PairCost {
        &self.pairs[r * self.cols + c]
    }
}

/// Evaluates [`combined_cost`] for every pairing. `det_indices` maps columns
/// back to the caller's detection indices.
pub fn build_cost_matrix(
    tracks: &[&Track],
    dets: &[(usize, &Detection)],
    cfg: &TrackerConfig,
) -> Result<CostMatrix> {
    let (rows, cols) = (tracks.len(), dets.len());
    let mut pairs = Vec::with_capacity(rows * cols);
    for t in tracks {
        for (_, d) in dets {
            pairs.push(combined_cost(t, d, cfg)?);
        }
    }
    Ok(CostMatrix {
        rows,
        cols,
        values: pairs.iter().map(|p| p.value).collect(),
        gate: pairs.iter().map(|p| p.admissible).collect(),
        pairs,
        track_ids: tracks.iter().map(|t| t.track_id).collect(),
        det_indices: dets.iter().map(|(i, _)| *i).collect(),
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Assignment {
    /// `(track_id, detection index)` pairs.
    pub matches: Vec<(u64, usize)>,
    pub unmatched_tracks: Vec<u64>,
    pub unmatched_dets: Vec<usize>,
}

impl Assignment {
    fn extend(&mut self, other: Assignment) {
        self.matches.extend(other.matches);
        self.unmatched_tracks.extend(other.unmatched_tracks);
        self.unmatched_dets.extend(other.unmatched_dets);
    }
}

/// Optimal assignment over the matrix; pairs costing `reject_threshold` or
/// more (including every gated-out pair) are demoted to unmatched.
pub fn hungarian_solve(m: &CostMatrix, reject_threshold: f64) -> Assignment {
    let solved = lap::linear_sum_assignment(&m.values, m.rows, m.cols);
    let mut row_used = vec![false; m.rows];
    let mut col_used = vec![false; m.cols];
    let mut out = Assignment::default();
    for (r, c) in solved {
        if m.gate[r * m.cols + c] && m.value(r, c) < reject_threshold {
            row_used[r] = true;
            col_used[c] = true;
            out.matches.push((m.track_ids[r], m.det_indices[c]));
        }
    }
    out.unmatched_tracks = (0..m.rows)
        .filter(|&r| !row_used[r])
        .map(|r| m.track_ids[r])
        .collect();
    out.unmatched_dets = (0..m.cols)
        .filter(|&c| !col_used[c])
        .map(|c| m.det_indices[c])
        .collect();
    out
}

/// Splits tracks and detections by class and solves each subset on its own.
/// Cross-class matches cannot occur.
pub fn match_frame(
    tracks: &[Track],
    dets: &[Detection],
    cfg: &TrackerConfig,
) -> Result<Assignment> {
    Ok(match_frame_detailed(tracks, dets, cfg)?.0)
}

pub(crate) fn match_frame_detailed(
    tracks: &[Track],
    dets: &[Detection],
    cfg: &TrackerConfig,
) -> Result<(Assignment, Vec<PairCost>)> {
    let mut classes: BTreeMap<u32, (Vec<&Track>, Vec<(usize, &Detection)>)> = BTreeMap::new();
    for t in tracks.iter().filter(|t| t.status != TrackStatus::Deleted) {
        classes.entry(t.class_id).or_default().0.push(t);
    }
    for (i, d) in dets.iter().enumerate() {
        classes.entry(d.class_id).or_default().1.push((i, d));
    }

    let mut out = Assignment::default();
    let mut details = Vec::new();
    for (_, (ts, ds)) in classes {
        let m = build_cost_matrix(&ts, &ds, cfg)?;
        let a = hungarian_solve(&m, cfg.d_max);
        for &(tid, di) in &a.matches {
            let r = m.track_ids.iter().position(|&x| x == tid).unwrap();
            let c = m.det_indices.iter().position(|&x| x == di).unwrap();
            details.push(*m.pair(r, c));
        }
        out.extend(a);
    }
    Ok((out, details))
}

/// Applies a frame's assignment to the track set.
///
/// Matched tracks take a confidence-scaled Kalman update and record the
/// detection's features; unmatched tentative tracks are dropped, unmatched
/// tracks older than `age_max` are retired; leftover detections start new
/// tentative tracks with ids drawn from `next_id`. Tracks are expected to be
/// predicted to `frame` already. Returns the trajectories of retired tracks
/// that were ever confirmed.
pub fn lifecycle_step(
    tracks: &mut Vec<Track>,
    assignment: &Assignment,
    dets: &[Detection],
    frame: u32,
    cfg: &TrackerConfig,
    params: &KalmanParams,
    next_id: &mut u64,
) -> Vec<Trajectory> {
    let matched: BTreeMap<u64, usize> = assignment.matches.iter().copied().collect();
    let mut finished = Vec::new();
    for track in tracks.iter_mut() {
        match matched.get(&track.track_id) {
            Some(&di) => {
                let det = &dets[di];
                let up = kalman::update(
                    &track.kalman,
                    &measurement_from_bbox(&det.bbox),
                    det.conf,
                    params,
                );
                track.kalman = up.state;
                track.bank.stack_append(det, cfg.alpha);
                track.age_since_update = 0;
                track.hits += 1;
                track.history.push(TrackPoint {
                    frame,
                    bbox: track.kalman.bbox(),
                    conf: det.conf,
                    interpolated: false,
                });
                if track.status == TrackStatus::Tentative && track.hits >= cfg.n_init {
                    track.status = TrackStatus::Confirmed;
                    track.ever_confirmed = true;
                }
            }
            None => {
                track.age_since_update += 1;
                if track.status == TrackStatus::Tentative || track.age_since_update > cfg.age_max {
                    track.status = TrackStatus::Deleted;
                    if track.ever_confirmed {
                        finished.push(track.to_trajectory());
                    }
                }
            }
        }
    }
    tracks.retain(|t| t.status != TrackStatus::Deleted);
    for &di in &assignment.unmatched_dets {
        tracks.push(Track::new(*next_id, &dets[di], cfg, params));
        *next_id += 1;
    }
    finished
}

/// One accepted match, kept for post-hoc auditing of the gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchRecord {
    pub frame: u32,
    pub track_id: u64,
    pub det_index: usize,
    pub cost: f64,
    pub iou: f64,
    pub direction_distance: Option<f64>,
}

/// Online tracker for a single sequence.
#[derive(Debug, Clone)]
pub struct Tracker {
    cfg: TrackerConfig,
    params: KalmanParams,
    tracks: Vec<Track>,
    next_id: u64,
    last_frame: Option<u32>,
    match_log: Vec<MatchRecord>,
}

impl Tracker {
    pub fn new(cfg: TrackerConfig) -> Result<Self> {
        cfg.validate()?;
        let params = KalmanParams::new(cfg.std_weight_position, cfg.std_weight_velocity);
        Ok(Self {
            cfg,
            params,
            tracks: Vec::new(),
            next_id: 1,
            last_frame: None,
            match_log: Vec::new(),
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn match_log(&self) -> &[MatchRecord] {
        &self.match_log
    }

    /// Advances one frame. `dets` must be normalized; those below
    /// `conf_min` are ignored. Returns trajectories retired this frame.
    pub fn step(&mut self, frame: u32, dets: &[Detection]) -> Result<Vec<Trajectory>> {
        if let Some(last) = self.last_frame {
            if frame <= last {
                return Err(Error::Scenario(format!(
                    "frames must increase: got {frame} after {last}"
                )));
            }
        }
        self.last_frame = Some(frame);

        for t in &mut self.tracks {
            t.kalman = kalman::predict(&t.kalman, &self.params);
        }
        let kept: Vec<Detection> = dets
            .iter()
            .filter(|d| d.conf >= self.cfg.conf_min)
            .cloned()
            .collect();
        let (assignment, details) = match_frame_detailed(&self.tracks, &kept, &self.cfg)?;
        for (&(track_id, det_index), pc) in assignment.matches.iter().zip(&details) {
            self.match_log.push(MatchRecord {
                frame,
                track_id,
                det_index,
                cost: pc.value,
                iou: pc.iou,
                direction_distance: pc.direction_distance,
            });
        }
        Ok(lifecycle_step(
            &mut self.tracks,
            &assignment,
            &kept,
            frame,
            &self.cfg,
            &self.params,
            &mut self.next_id,
        ))
    }

    /// Ends the sequence, returning every live track that was ever confirmed.
    pub fn finish(self) -> Vec<Trajectory> {
        self.tracks
            .iter()
            .filter(|t| t.ever_confirmed)
            .map(Track::to_trajectory)
            .collect()
    }
}

/// Runs a whole sequence. `frames` holds the detections of frames
/// `1..=frames.len()`; the result is sorted by track id.
pub fn track_sequence(
    cfg: &TrackerConfig,
    frames: &[Vec<Detection>],
) -> Result<(Vec<Trajectory>, Vec<MatchRecord>)> {
    let mut tracker = Tracker::new(cfg.clone())?;
    let mut out = Vec::new();
    for (i, dets) in frames.iter().enumerate() {
        out.extend(tracker.step(i as u32 + 1, dets)?);
    }
    let log = tracker.match_log.clone();
    out.extend(tracker.finish());
    out.sort_by_key(|t| t.track_id);
    Ok((out, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{ce_vector_distance, direction_template};
    use crate::types::{normalize_detection, BBox, DIRECTION_BINS};
    use approx::assert_abs_diff_eq;

    fn cfg() -> TrackerConfig {
        TrackerConfig {
            embedding_dim: 4,
            ..TrackerConfig::default()
        }
    }

    fn det(frame: u32, x: f64, y: f64, class_id: u32, heading: usize) -> Detection {
        let mut d = Detection::plain(
            frame,
            BBox::new(x, y, 40.0, 100.0).unwrap(),
            0.9,
            class_id,
            4,
        );
        d.direction = direction_template(heading, 2.0);
        d.color = [0.1; 10];
        d.color[2] = 0.9;
        d.style = [0.05; 20];
        d.style[4] = 0.95;
        normalize_detection(d).unwrap()
    }

    fn predicted_track(d: &Detection, c: &TrackerConfig) -> Track {
        let p = KalmanParams::new(c.std_weight_position, c.std_weight_velocity);
        let mut t = Track::new(1, d, c, &p);
        t.kalman = kalman::predict(&t.kalman, &p);
        t
    }

    #[test]
    fn self_match_is_admissible_with_floor_cost() {
        let c = cfg();
        let d = det(1, 100.0, 100.0, 0, 10);
        let t = predicted_track(&d, &c);
        let pc = combined_cost(&t, &d, &c).unwrap();
        assert!(pc.admissible);
        let expected = c.lambda_color * ce_vector_distance(&d.color, &d.color)
            + c.lambda_style * ce_vector_distance(&d.style, &d.style);
        assert_abs_diff_eq!(pc.value, expected, epsilon = 1e-9);
    }

    #[test]
    fn disjoint_boxes_are_gated() {
        let c = cfg();
        let t = predicted_track(&det(1, 100.0, 100.0, 0, 10), &c);
        let far = det(2, 900.0, 700.0, 0, 10);
        let pc = combined_cost(&t, &far, &c).unwrap();
        assert!(!pc.admissible);
        assert_eq!(pc.value, c.d_max + c.epsilon);
    }

    #[test]
    fn opposite_heading_is_gated() {
        let c = cfg();
        let t = predicted_track(&det(1, 100.0, 100.0, 0, 0), &c);
        let turned = det(2, 101.0, 100.0, 0, 36);
        let pc = combined_cost(&t, &turned, &c).unwrap();
        assert!(pc.iou > c.iou_min);
        assert!(pc.direction_distance.unwrap() >= c.dir_max);
        assert!(!pc.admissible);
        assert_eq!(pc.value, c.d_max + c.epsilon);
    }

    #[test]
    fn class_mismatch_is_an_error() {
        let c = cfg();
        let t = predicted_track(&det(1, 100.0, 100.0, 0, 0), &c);
        assert!(matches!(
            combined_cost(&t, &det(2, 100.0, 100.0, 1, 0), &c),
            Err(Error::ClassMismatch { .. })
        ));
    }

    #[test]
    fn empty_stacks_renormalize_weights() {
        let c = cfg();
        let d = det(1, 100.0, 100.0, 0, 10);
        let mut t = predicted_track(&d, &c);
        t.bank.colors.clear();
        t.bank.styles.clear();
        let mut shifted = d.clone();
        shifted.embedding = vec![0.6, 0.8, 0.0, 0.0];
        let pc = combined_cost(&t, &shifted, &c).unwrap();
        let motion = 0.0;
        let edge = 1.0 - 0.6;
        let expected = (c.lambda_motion * motion + c.lambda_edge * edge) * 1.0
            / (c.lambda_motion + c.lambda_edge);
        assert_abs_diff_eq!(pc.value, expected, epsilon = 1e-12);
    }

    #[test]
    fn empty_side_leaves_everything_unmatched() {
        let c = cfg();
        let dets = vec![det(1, 10.0, 10.0, 0, 0), det(1, 300.0, 10.0, 0, 0)];
        let a = match_frame(&[], &dets, &c).unwrap();
        assert!(a.matches.is_empty());
        assert_eq!(a.unmatched_dets, vec![0, 1]);
    }

    #[test]
    fn classes_are_matched_separately() {
        let c = cfg();
        let d0 = det(1, 100.0, 100.0, 0, 0);
        let d1 = det(1, 104.0, 100.0, 1, 0);
        let p = KalmanParams::new(c.std_weight_position, c.std_weight_velocity);
        let mut tracks = vec![Track::new(1, &d0, &c, &p), Track::new(2, &d1, &c, &p)];
        for t in &mut tracks {
            t.kalman = kalman::predict(&t.kalman, &p);
        }
        // detections listed in the opposite class order
        let dets = vec![det(2, 104.0, 100.0, 1, 0), det(2, 100.0, 100.0, 0, 0)];
        let a = match_frame(&tracks, &dets, &c).unwrap();
        let mut m = a.matches.clone();
        m.sort();
        assert_eq!(m, vec![(1, 1), (2, 0)]);
    }

    #[test]
    fn lifecycle_confirm_and_retire() {
        let c = cfg();
        let mut tr = Tracker::new(c.clone()).unwrap();
        tr.step(1, &[det(1, 100.0, 100.0, 0, 0)]).unwrap();
        assert_eq!(tr.tracks().len(), 1);
        assert_eq!(tr.tracks()[0].status, TrackStatus::Tentative);
        tr.step(2, &[det(2, 101.0, 100.0, 0, 0)]).unwrap();
        assert_eq!(tr.tracks()[0].status, TrackStatus::Tentative);
        tr.step(3, &[det(3, 102.0, 100.0, 0, 0)]).unwrap();
        assert_eq!(tr.tracks()[0].status, TrackStatus::Confirmed);
        for f in 4..=13 {
            let fin = tr.step(f, &[]).unwrap();
            assert!(fin.is_empty(), "retired early at frame {f}");
        }
        let fin = tr.step(14, &[]).unwrap();
        assert_eq!(fin.len(), 1);
        assert_eq!(fin[0].points.len(), 3);
        assert!(!fin[0].embedding_bank.is_empty());
        assert!(tr.tracks().is_empty());
    }

    #[test]
    fn tentative_miss_is_dropped_silently() {
        let mut tr = Tracker::new(cfg()).unwrap();
        tr.step(1, &[det(1, 100.0, 100.0, 0, 0)]).unwrap();
        let fin = tr.step(2, &[]).unwrap();
        assert!(fin.is_empty());
        assert!(tr.tracks().is_empty());
        assert!(tr.finish().is_empty());
    }

    #[test]
    fn low_confidence_detections_are_ignored() {
        let mut tr = Tracker::new(cfg()).unwrap();
        let mut d = det(1, 100.0, 100.0, 0, 0);
        d.conf = 0.3;
        tr.step(1, &[d]).unwrap();
        assert!(tr.tracks().is_empty());
    }

    #[test]
    fn ids_increase_and_are_not_reused() {
        let mut tr = Tracker::new(cfg()).unwrap();
        let mut seen = Vec::new();
        for f in 1..=6 {
            // a single blinking detection spawns a fresh track each time
            let dets = if f % 2 == 1 {
                vec![det(f, 100.0, 100.0, 0, 0)]
            } else {
                vec![]
            };
            tr.step(f, &dets).unwrap();
            seen.extend(tr.tracks().iter().map(|t| t.track_id));
        }
        assert_eq!(seen, vec![1, 2, 3]);
    }

    #[test]
    fn frames_must_increase() {
        let mut tr = Tracker::new(cfg()).unwrap();
        tr.step(3, &[]).unwrap();
        assert!(tr.step(3, &[]).is_err());
    }

    #[test]
    fn template_direction_at_same_heading_is_near_zero() {
        let d = det(1, 0.0, 0.0, 0, 5);
        let t = predicted_track(&d, &cfg());
        let r = t.bank.direction_distance(&d.direction, 2.0).unwrap();
        assert!(r < 1e-6, "{r}");
        assert_eq!(d.direction.len(), DIRECTION_BINS);
    }
}
