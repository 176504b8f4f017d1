//! CLEAR-MOT accuracy and identity F1 against ground truth.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::lap;
use crate::types::{iou, BBox, Trajectory};

/// Minimum IoU for a prediction to count as covering a ground-truth box.
pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameStats {
    pub frame: u32,
    pub gt: usize,
    pub pred: usize,
    pub matches: usize,
    pub fp: usize,
    pub fn_: usize,
    pub id_switches: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    pub mota: f64,
    pub idf1: f64,
    pub id_switches: usize,
    pub fp: usize,
    pub fn_: usize,
    pub gt_count: usize,
    pub pred_count: usize,
    pub matches: usize,
    pub idtp: usize,
    pub idfp: usize,
    pub idfn: usize,
    pub per_frame: Vec<FrameStats>,
}

impl EvalReport {
    /// MOTA rebuilt from its components.
    pub fn mota_from_components(&self) -> f64 {
        mota(self.fp, self.fn_, self.id_switches, self.gt_count)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "MOTA   {:>8.4}", self.mota);
        let _ = writeln!(s, "IDF1   {:>8.4}", self.idf1);
        let _ = writeln!(s, "IDs    {:>8}", self.id_switches);
        let _ = writeln!(s, "FP     {:>8}", self.fp);
        let _ = writeln!(s, "FN     {:>8}", self.fn_);
        let _ = writeln!(s, "GT     {:>8}", self.gt_count);
        s
    }

    /// `key=value` lines, one metric each.
    pub fn to_kv(&self) -> String {
        format!(
            "mota={:.6}\nidf1={:.6}\nid_switches={}\nfp={}\nfn={}\ngt_count={}\npred_count={}\nmatches={}\nidtp={}\nidfp={}\nidfn={}\n",
            self.mota,
            self.idf1,
            self.id_switches,
            self.fp,
            self.fn_,
            self.gt_count,
            self.pred_count,
            self.matches,
            self.idtp,
            self.idfp,
            self.idfn
        )
    }
}

fn mota(fp: usize, fn_: usize, ids: usize, gt: usize) -> f64 {
    if gt == 0 {
        // undefined without ground truth
        return if fp + ids == 0 { 1.0 } else { 0.0 };
    }
    1.0 - (fp + fn_ + ids) as f64 / gt as f64
}

/// One frame's ground-truth/prediction correspondence.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameMatch {
    /// `(gt_id, pred_id)`.
    pub matches: Vec<(u64, u64)>,
    pub unmatched_gt: Vec<u64>,
    pub unmatched_pred: Vec<u64>,
}

/// CLEAR correspondence for one frame: pairs carried over from the previous
/// frame are kept while they still overlap by `iou_thresh`, the rest are
/// assigned by maximum IoU.
pub fn match_gt_frame(
    previous: &HashMap<u64, u64>,
    preds: &[(u64, BBox)],
    gts: &[(u64, BBox)],
    iou_thresh: f64,
) -> FrameMatch {
    let mut gt_done = vec![false; gts.len()];
    let mut pred_done = vec![false; preds.len()];
    let mut out = FrameMatch::default();

    for (gi, (gid, gbox)) in gts.iter().enumerate() {
        let Some(&pid) = previous.get(gid) else {
            continue;
        };
        if let Some(pi) = preds.iter().position(|(id, _)| *id == pid) {
            if !pred_done[pi] && iou(gbox, &preds[pi].1) >= iou_thresh {
                gt_done[gi] = true;
                pred_done[pi] = true;
                out.matches.push((*gid, pid));
            }
        }
    }

    let g_left: Vec<usize> = (0..gts.len()).filter(|&i| !gt_done[i]).collect();
    let p_left: Vec<usize> = (0..preds.len()).filter(|&i| !pred_done[i]).collect();
    if !g_left.is_empty() && !p_left.is_empty() {
        let (rows, cols) = (g_left.len(), p_left.len());
        let mut cost = vec![0.0; rows * cols];
        let mut valid = vec![false; rows * cols];
        for (r, &gi) in g_left.iter().enumerate() {
            for (c, &pi) in p_left.iter().enumerate() {
                let o = iou(&gts[gi].1, &preds[pi].1);
                if o >= iou_thresh {
                    cost[r * cols + c] = 1.0 - o;
                    valid[r * cols + c] = true;
                } else {
                    cost[r * cols + c] = 2.0;
                }
            }
        }
        for (r, c) in lap::linear_sum_assignment(&cost, rows, cols) {
            if valid[r * cols + c] {
                gt_done[g_left[r]] = true;
                pred_done[p_left[c]] = true;
                out.matches.push((gts[g_left[r]].0, preds[p_left[c]].0));
            }
        }
    }
    out.unmatched_gt = (0..gts.len())
        .filter(|&i| !gt_done[i])
        .map(|i| gts[i].0)
        .collect();
    out.unmatched_pred = (0..preds.len())
        .filter(|&i| !pred_done[i])
        .map(|i| preds[i].0)
        .collect();
    out
}

type FrameIndex = BTreeMap<u32, Vec<(u64, BBox)>>;

fn index_by_frame(trajs: &[Trajectory]) -> FrameIndex {
    let mut idx: FrameIndex = BTreeMap::new();
    for t in trajs {
        for p in &t.points {
            idx.entry(p.frame).or_default().push((t.track_id, p.bbox));
        }
    }
    for v in idx.values_mut() {
        v.sort_by_key(|(id, _)| *id);
    }
    idx
}

/// Scores predictions against ground truth over every frame either side covers.
pub fn evaluate(pred: &[Trajectory], gt: &[Trajectory], iou_thresh: f64) -> EvalReport {
    let pred_idx = index_by_frame(pred);
    let gt_idx = index_by_frame(gt);
    let frames: BTreeSet<u32> = pred_idx.keys().chain(gt_idx.keys()).copied().collect();
    let empty = Vec::new();

    let mut report = EvalReport::default();
    let mut previous: HashMap<u64, u64> = HashMap::new();
    let mut last_seen: HashMap<u64, u64> = HashMap::new();
    let mut overlap_counts: BTreeMap<(u64, u64), usize> = BTreeMap::new();

    for &frame in &frames {
        let ps = pred_idx.get(&frame).unwrap_or(&empty);
        let gs = gt_idx.get(&frame).unwrap_or(&empty);
        let fm = match_gt_frame(&previous, ps, gs, iou_thresh);

        let mut switches = 0;
        previous.clear();
        for &(g, p) in &fm.matches {
            if last_seen.get(&g).is_some_and(|&old| old != p) {
                switches += 1;
            }
            last_seen.insert(g, p);
            previous.insert(g, p);
        }
        for (g, gb) in gs {
            for (p, pb) in ps {
                if iou(gb, pb) >= iou_thresh {
                    *overlap_counts.entry((*g, *p)).or_default() += 1;
                }
            }
        }

        let stats = FrameStats {
            frame,
            gt: gs.len(),
            pred: ps.len(),
            matches: fm.matches.len(),
            fp: fm.unmatched_pred.len(),
            fn_: fm.unmatched_gt.len(),
            id_switches: switches,
        };
        report.gt_count += stats.gt;
        report.pred_count += stats.pred;
        report.matches += stats.matches;
        report.fp += stats.fp;
        report.fn_ += stats.fn_;
        report.id_switches += stats.id_switches;
        report.per_frame.push(stats);
    }

    report.idtp = identity_true_positives(&overlap_counts);
    report.idfn = report.gt_count - report.idtp;
    report.idfp = report.pred_count - report.idtp;
    report.idf1 = idf1(report.idtp, report.idfp, report.idfn);
    report.mota = report.mota_from_components();
    report
}

/// `2 IDTP / (2 IDTP + IDFP + IDFN)`, 0 when nothing was matched.
pub fn idf1(idtp: usize, idfp: usize, idfn: usize) -> f64 {
    let denom = 2 * idtp + idfp + idfn;
    if idtp == 0 || denom == 0 {
        0.0
    } else {
        (2 * idtp) as f64 / denom as f64
    }
}

/// Best one-to-one pairing of ground-truth and predicted identities by
/// co-covered frame count.
fn identity_true_positives(counts: &BTreeMap<(u64, u64), usize>) -> usize {
    if counts.is_empty() {
        return 0;
    }
    let gts: Vec<u64> = counts
        .keys()
        .map(|k| k.0)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let preds: Vec<u64> = counts
        .keys()
        .map(|k| k.1)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let (rows, cols) = (gts.len(), preds.len());
    let mut cost = vec![0.0; rows * cols];
    for (&(g, p), &n) in counts {
        let r = gts.binary_search(&g).unwrap();
        let c = preds.binary_search(&p).unwrap();
        cost[r * cols + c] = -(n as f64);
    }
    lap::linear_sum_assignment(&cost, rows, cols)
        .into_iter()
        .map(|(r, c)| (-cost[r * cols + c]) as usize)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::TrackPoint;

    fn track(id: u64, frames: std::ops::RangeInclusive<u32>, x0: f64) -> Trajectory {
        Trajectory {
            track_id: id,
            class_id: 0,
            points: frames
                .map(|f| TrackPoint {
                    frame: f,
                    bbox: BBox::new(x0 + f as f64, 10.0, 20.0, 40.0).unwrap(),
                    conf: 1.0,
                    interpolated: false,
                })
                .collect(),
            embedding_bank: vec![],
        }
    }

    #[test]
    fn perfect_tracking() {
        let gt = vec![track(1, 1..=10, 0.0), track(2, 1..=10, 300.0)];
        let r = evaluate(&gt, &gt, 0.5);
        assert_eq!((r.fp, r.fn_, r.id_switches), (0, 0, 0));
        assert_eq!(r.mota, 1.0);
        assert_eq!(r.idf1, 1.0);
    }

    #[test]
    fn empty_predictions() {
        let gt = vec![track(1, 1..=10, 0.0)];
        let r = evaluate(&[], &gt, 0.5);
        assert_eq!(r.fn_, 10);
        assert_eq!(r.mota, 0.0);
        assert_eq!(r.idf1, 0.0);
    }

    #[test]
    fn one_switch_over_ten_frames() {
        let gt = vec![track(1, 1..=10, 0.0)];
        let pred = vec![track(5, 1..=5, 0.0), track(6, 6..=10, 0.0)];
        let r = evaluate(&pred, &gt, 0.5);
        assert_eq!(r.id_switches, 1);
        assert_eq!(r.mota, 0.9);
        assert_eq!(r.idf1, 0.5);
        assert_eq!(r.mota, r.mota_from_components());
    }

    #[test]
    fn persistent_match_survives_closer_competitor() {
        let mut prev = HashMap::new();
        prev.insert(1, 10);
        let g = BBox::new(0.0, 0.0, 10.0, 10.0).unwrap();
        let kept = BBox::new(2.0, 0.0, 10.0, 10.0).unwrap();
        let better = BBox::new(0.5, 0.0, 10.0, 10.0).unwrap();
        let fm = match_gt_frame(&prev, &[(10, kept), (11, better)], &[(1, g)], 0.5);
        assert_eq!(fm.matches, vec![(1, 10)]);
        assert_eq!(fm.unmatched_pred, vec![11]);
    }

    #[test]
    fn kv_report_has_all_fields() {
        let gt = vec![track(1, 1..=3, 0.0)];
        let kv = evaluate(&gt, &gt, 0.5).to_kv();
        for key in ["mota=", "idf1=", "id_switches=", "fp=", "fn=", "gt_count="] {
            assert!(kv.contains(key));
        }
    }
}
