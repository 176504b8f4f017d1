//! File formats and the four pipeline commands.
//!
//! Detections use the MOT layout `frame,-1,x,y,w,h,conf,class` with the
//! features in a sidecar `<file>.feat`:
//!
//! ```text
//! # featuresort-features d=128
//! frame,row,e_1..e_d,color_1..color_10,style_1..style_20,dir_1..dir_72
//! ```
//!
//! `row` is the index of the detection among the rows of its frame. Records
//! appear in the same order as the base rows.
//!
//! Trajectories are `frame,track_id,x,y,w,h,conf,class,interpolated` sorted by
//! `(frame, track_id)`, with an appearance bank sidecar `<file>.bank`:
//!
//! ```text
//! # featuresort-bank d=128
//! track_id,class,index,e_1..e_d
//! ```
//!
//! Box and confidence columns are written with four decimals. Feature
//! sidecars keep full precision.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;

use crate::association::track_sequence;
use crate::config::Config;
use crate::error::{Error, Result};
use crate::metrics::{evaluate, EvalReport, DEFAULT_IOU_THRESHOLD};
use crate::postprocess::refine;
use crate::synth::{self, Scenario};
use crate::types::{
    normalize_detection, BBox, Detection, TrackPoint, Trajectory, COLOR_DIM, DIRECTION_BINS,
    STYLE_DIM,
};

const FEAT_MAGIC: &str = "# featuresort-features";
const BANK_MAGIC: &str = "# featuresort-bank";
const ATTR_LEN: usize = COLOR_DIM + STYLE_DIM + DIRECTION_BINS;

/// `<path>.<ext>` (appended, not replacing the existing extension).
pub fn sidecar_path(path: &Path, ext: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Non-empty, non-comment lines with their 1-based line numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn fields<'a>(path: &Path, line: usize, text: &'a str, n: usize) -> Result<Vec<&'a str>> {
    let f: Vec<&str> = text.split(',').map(str::trim).collect();
    if f.len() != n {
        return Err(Error::parse(
            path,
            line,
            format!("expected {n} columns, found {}", f.len()),
        ));
    }
    Ok(f)
}

fn num<T: std::str::FromStr>(path: &Path, line: usize, what: &str, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::parse(path, line, format!("bad {what} `{s}`")))
}

fn frame_number(path: &Path, line: usize, s: &str) -> Result<u32> {
    let f: i64 = num(path, line, "frame", s)?;
    if f < 1 || f > u32::MAX as i64 {
        return Err(Error::parse(
            path,
            line,
            format!("frame must be >= 1, got {f}"),
        ));
    }
    Ok(f as u32)
}

fn bbox(path: &Path, line: usize, f: &[&str]) -> Result<BBox> {
    let v: Vec<f64> = f
        .iter()
        .map(|s| num(path, line, "box coordinate", s))
        .collect::<Result<_>>()?;
    BBox::new(v[0], v[1], v[2], v[3]).map_err(|e| Error::parse(path, line, e.to_string()))
}

fn sidecar_header(path: &Path, text: &str, magic: &str) -> Result<usize> {
    let first = text.lines().next().unwrap_or("");
    let d = first
        .strip_prefix(magic)
        .and_then(|rest| rest.trim().strip_prefix("d="))
        .and_then(|d| d.trim().parse::<usize>().ok())
        .filter(|&d| d > 0);
    d.ok_or_else(|| Error::parse(path, 1, format!("expected header `{magic} d=<dim>`")))
}

// ---------------------------------------------------------------------------
// Detections

/// Detections grouped by frame: index `f - 1` holds frame `f`, up to the last
/// frame present. Returns the embedding dimension declared by the sidecar
/// (`None` when the file has no rows and no sidecar).
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionFile {
    pub embedding_dim: Option<usize>,
    pub frames: Vec<Vec<Detection>>,
}

pub fn read_detections(path: &Path) -> Result<DetectionFile> {
    let text = read(path)?;
    let mut base = Vec::new();
    for (line, row) in data_lines(&text) {
        let f = fields(path, line, row, 8)?;
        let frame = frame_number(path, line, f[0])?;
        let b = bbox(path, line, &f[2..6])?;
        let conf: f64 = num(path, line, "confidence", f[6])?;
        let class_id: u32 = num(path, line, "class", f[7])?;
        base.push((line, frame, b, conf, class_id));
    }
    if base.windows(2).any(|w| w[1].1 < w[0].1) {
        let line = base.windows(2).find(|w| w[1].1 < w[0].1).unwrap()[1].0;
        return Err(Error::parse(path, line, "rows must be sorted by frame"));
    }

    let side = sidecar_path(path, "feat");
    if !side.exists() {
        if base.is_empty() {
            return Ok(DetectionFile {
                embedding_dim: None,
                frames: Vec::new(),
            });
        }
        return Err(Error::MissingSidecar(side));
    }
    let side_text = read(&side)?;
    let d = sidecar_header(&side, &side_text, FEAT_MAGIC)?;
    let records: Vec<(usize, &str)> = data_lines(&side_text).collect();
    if records.len() != base.len() {
        return Err(Error::SidecarMismatch {
            path: side,
            msg: format!(
                "{} feature records for {} detections",
                records.len(),
                base.len()
            ),
        });
    }

    let n_frames = base.last().map_or(0, |b| b.1) as usize;
    let mut frames: Vec<Vec<Detection>> = vec![Vec::new(); n_frames];
    for ((_, frame, b, conf, class_id), (line, rec)) in base.into_iter().zip(records) {
        let f = fields(&side, line, rec, 2 + d + ATTR_LEN)?;
        let rec_frame = frame_number(&side, line, f[0])?;
        let rec_row: usize = num(&side, line, "row", f[1])?;
        let row = frames[frame as usize - 1].len();
        if rec_frame != frame || rec_row != row {
            return Err(Error::SidecarMismatch {
                path: side.clone(),
                msg: format!(
                    "line {line}: key ({rec_frame},{rec_row}) where ({frame},{row}) was expected"
                ),
            });
        }
        let v: Vec<f64> = f[2..]
            .iter()
            .map(|s| num(&side, line, "feature", s))
            .collect::<Result<_>>()?;
        let (emb, rest) = v.split_at(d);
        let det = Detection {
            frame,
            bbox: b,
            conf,
            class_id,
            embedding: emb.to_vec(),
            color: rest[..COLOR_DIM].try_into().unwrap(),
            style: rest[COLOR_DIM..COLOR_DIM + STYLE_DIM].try_into().unwrap(),
            direction: rest[COLOR_DIM + STYLE_DIM..].try_into().unwrap(),
        };
        let det = normalize_detection(det).map_err(|e| Error::parse(&side, line, e.to_string()))?;
        frames[frame as usize - 1].push(det);
    }
    Ok(DetectionFile {
        embedding_dim: Some(d),
        frames,
    })
}

/// Writes detections and their feature sidecar. All detections must share
/// one embedding dimension.
pub fn write_detections(path: &Path, frames: &[Vec<Detection>]) -> Result<()> {
    let d = frames
        .iter()
        .flatten()
        .map(|x| x.embedding.len())
        .next()
        .unwrap_or(1);
    let mut base = String::new();
    let mut side = format!("{FEAT_MAGIC} d={d}\n");
    for dets in frames {
        for (row, det) in dets.iter().enumerate() {
            if det.embedding.len() != d {
                return Err(Error::DimensionMismatch {
                    what: "detection embedding",
                    expected: d,
                    actual: det.embedding.len(),
                });
            }
            let b = det.bbox;
            let _ = writeln!(
                base,
                "{},-1,{:.4},{:.4},{:.4},{:.4},{:.4},{}",
                det.frame, b.x, b.y, b.w, b.h, det.conf, det.class_id
            );
            let _ = write!(side, "{},{}", det.frame, row);
            let values = det
                .embedding
                .iter()
                .chain(&det.color)
                .chain(&det.style)
                .chain(&det.direction);
            for v in values {
                let _ = write!(side, ",{v}");
            }
            side.push('\n');
        }
    }
    write(path, &base)?;
    write(&sidecar_path(path, "feat"), &side)
}

// ---------------------------------------------------------------------------
// Trajectories

pub fn format_trajectories(trajs: &[Trajectory]) -> String {
    let mut rows: Vec<(u32, u64, &TrackPoint, u32)> = trajs
        .iter()
        .flat_map(|t| {
            t.points
                .iter()
                .map(move |p| (p.frame, t.track_id, p, t.class_id))
        })
        .collect();
    rows.sort_by_key(|r| (r.0, r.1));
    let mut out = String::new();
    for (frame, id, p, class) in rows {
        let b = p.bbox;
        let _ = writeln!(
            out,
            "{frame},{id},{:.4},{:.4},{:.4},{:.4},{:.4},{class},{}",
            b.x,
            b.y,
            b.w,
            b.h,
            p.conf,
            u8::from(p.interpolated)
        );
    }
    out
}

pub fn format_banks(trajs: &[Trajectory]) -> String {
    let d = trajs
        .iter()
        .flat_map(|t| t.embedding_bank.iter())
        .map(Vec::len)
        .next()
        .unwrap_or(1);
    let mut out = format!("{BANK_MAGIC} d={d}\n");
    let mut sorted: Vec<&Trajectory> = trajs.iter().collect();
    sorted.sort_by_key(|t| t.track_id);
    for t in sorted {
        for (i, e) in t.embedding_bank.iter().enumerate() {
            let _ = write!(out, "{},{},{}", t.track_id, t.class_id, i);
            for v in e {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
    }
    out
}

/// Writes the trajectory file and, when any trajectory carries a bank, the
/// `.bank` sidecar.
pub fn write_trajectories(path: &Path, trajs: &[Trajectory]) -> Result<()> {
    write(path, &format_trajectories(trajs))?;
    write(&sidecar_path(path, "bank"), &format_banks(trajs))
}

/// Reads a trajectory file without its bank. Trajectories come back sorted
/// by id with points sorted by frame.
pub fn read_trajectories(path: &Path) -> Result<Vec<Trajectory>> {
    let text = read(path)?;
    let mut by_id: BTreeMap<u64, Trajectory> = BTreeMap::new();
    let mut seen: HashMap<(u32, u64), usize> = HashMap::new();
    for (line, row) in data_lines(&text) {
        let f = fields(path, line, row, 9)?;
        let frame = frame_number(path, line, f[0])?;
        let id: u64 = num(path, line, "track id", f[1])?;
        let b = bbox(path, line, &f[2..6])?;
        let conf: f64 = num(path, line, "confidence", f[6])?;
        let class_id: u32 = num(path, line, "class", f[7])?;
        let interpolated = match f[8] {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::parse(
                    path,
                    line,
                    format!("bad interpolated flag `{other}`"),
                ))
            }
        };
        if let Some(first) = seen.insert((frame, id), line) {
            return Err(Error::parse(
                path,
                line,
                format!("track {id} already has a row for frame {frame} (line {first})"),
            ));
        }
        let t = by_id.entry(id).or_insert_with(|| Trajectory {
            track_id: id,
            class_id,
            points: Vec::new(),
            embedding_bank: Vec::new(),
        });
        if t.class_id != class_id {
            return Err(Error::parse(
                path,
                line,
                format!("track {id} changes class"),
            ));
        }
        t.points.push(TrackPoint {
            frame,
            bbox: b,
            conf,
            interpolated,
        });
    }
    let mut out: Vec<Trajectory> = by_id.into_values().collect();
    for t in &mut out {
        t.points.sort_by_key(|p| p.frame);
    }
    Ok(out)
}

/// Loads the `.bank` sidecar into `trajs`. Every bank entry must belong to a
/// trajectory of the same class.
pub fn attach_banks(path: &Path, trajs: &mut [Trajectory]) -> Result<()> {
    let side = sidecar_path(path, "bank");
    if !side.exists() {
        return Err(Error::MissingSidecar(side));
    }
    let text = read(&side)?;
    let d = sidecar_header(&side, &text, BANK_MAGIC)?;
    let index: HashMap<u64, usize> = trajs
        .iter()
        .enumerate()
        .map(|(i, t)| (t.track_id, i))
        .collect();
    for t in trajs.iter_mut() {
        t.embedding_bank.clear();
    }
    for (line, row) in data_lines(&text) {
        let f = fields(&side, line, row, 3 + d)?;
        let id: u64 = num(&side, line, "track id", f[0])?;
        let class_id: u32 = num(&side, line, "class", f[1])?;
        let Some(&ti) = index.get(&id) else {
            return Err(Error::SidecarMismatch {
                path: side.clone(),
                msg: format!("line {line}: track {id} is not in the trajectory file"),
            });
        };
        if trajs[ti].class_id != class_id {
            return Err(Error::SidecarMismatch {
                path: side.clone(),
                msg: format!("line {line}: track {id} has class {}", trajs[ti].class_id),
            });
        }
        let e: Vec<f64> = f[3..]
            .iter()
            .map(|s| num(&side, line, "embedding value", s))
            .collect::<Result<_>>()?;
        trajs[ti].embedding_bank.push(e);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Commands

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrackSummary {
    pub tracks: usize,
    pub frames: usize,
    pub detections: usize,
}

impl fmt::Display for TrackSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} tracks over {} frames ({} detections)",
            self.tracks, self.frames, self.detections
        )
    }
}

/// Online tracking of one detection file into a trajectory file plus bank.
pub fn cmd_track(detections: &Path, cfg: &Config, out: &Path) -> Result<TrackSummary> {
    let file = read_detections(detections)?;
    let mut tcfg = cfg.tracker.clone();
    if let Some(d) = file.embedding_dim {
        if d != tcfg.embedding_dim {
            info!("using embedding dimension {d} declared by the feature sidecar");
            tcfg.embedding_dim = d;
        }
    }
    let (trajs, _) = track_sequence(&tcfg, &file.frames)?;
    write_trajectories(out, &trajs)?;
    let summary = TrackSummary {
        tracks: trajs.len(),
        frames: file.frames.len(),
        detections: file.frames.iter().map(Vec::len).sum(),
    };
    info!("{}: {summary}", detections.display());
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PostprocessSummary {
    pub input_tracks: usize,
    pub output_tracks: usize,
    pub merges: usize,
    pub filled_points: usize,
}

impl fmt::Display for PostprocessSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} tracks in, {} out, {} merges, {} filled points",
            self.input_tracks, self.output_tracks, self.merges, self.filled_points
        )
    }
}

/// Global linking then gap filling and smoothing of a trajectory file.
pub fn cmd_postprocess(
    trajectories: &Path,
    cfg: &Config,
    out: &Path,
) -> Result<PostprocessSummary> {
    let mut trajs = read_trajectories(trajectories)?;
    attach_banks(trajectories, &mut trajs)?;
    let outcome = refine(&trajs, &cfg.gsp, &cfg.link);
    write_trajectories(out, &outcome.trajectories)?;
    let interp = |ts: &[Trajectory]| {
        ts.iter()
            .flat_map(|t| &t.points)
            .filter(|p| p.interpolated)
            .count()
    };
    Ok(PostprocessSummary {
        input_tracks: trajs.len(),
        output_tracks: outcome.trajectories.len(),
        merges: outcome.merges.len(),
        filled_points: interp(&outcome.trajectories) - interp(&trajs),
    })
}

fn frame_span(trajs: &[Trajectory]) -> Option<(u32, u32)> {
    let first = trajs.iter().filter_map(Trajectory::first_frame).min()?;
    let last = trajs.iter().filter_map(Trajectory::last_frame).max()?;
    Some((first, last))
}

fn clip(trajs: &[Trajectory], lo: u32, hi: u32) -> Vec<Trajectory> {
    trajs
        .iter()
        .map(|t| Trajectory {
            points: t
                .points
                .iter()
                .filter(|p| p.frame >= lo && p.frame <= hi)
                .copied()
                .collect(),
            ..t.clone()
        })
        .filter(|t| !t.points.is_empty())
        .collect()
}

/// Scores a prediction file against a truth file. When both are non-empty
/// and cover different frame ranges, only the common range is scored.
/// Writes the key-value report to `out` when given.
pub fn cmd_eval(pred: &Path, truth: &Path, out: Option<&Path>) -> Result<EvalReport> {
    let mut p = read_trajectories(pred)?;
    let mut g = read_trajectories(truth)?;
    if let (Some(ps), Some(gs)) = (frame_span(&p), frame_span(&g)) {
        if ps != gs {
            let (lo, hi) = (ps.0.max(gs.0), ps.1.min(gs.1));
            warn!(
                "frame ranges differ (pred {}-{}, truth {}-{}); scoring frames {lo}-{hi}",
                ps.0, ps.1, gs.0, gs.1
            );
            p = clip(&p, lo, hi);
            g = clip(&g, lo, hi);
        }
    }
    let report = evaluate(&p, &g, DEFAULT_IOU_THRESHOLD);
    if let Some(out) = out {
        write(out, &report.to_kv())?;
    }
    Ok(report)
}

/// Resolves a preset name or a scenario spec file.
pub fn load_scenario(name_or_path: &str) -> Result<Scenario> {
    let path = Path::new(name_or_path);
    if path.is_file() {
        return Scenario::parse(&read(path)?, path);
    }
    synth::preset(name_or_path)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthFiles {
    pub detections: PathBuf,
    pub truth: PathBuf,
    pub scenario: PathBuf,
}

/// Renders a scenario into `out_dir` as `det.txt` (+ `.feat`), `gt.txt` and
/// the resolved `scenario.txt`. `cfg.synth.frames` shortens or extends the
/// run.
pub fn cmd_synth(scenario: &str, out_dir: &Path, cfg: &Config) -> Result<SynthFiles> {
    let mut s = load_scenario(scenario)?;
    if let Some(frames) = cfg.synth.frames {
        s.frames = frames;
    }
    let out = synth::generate(&s, cfg.synth.seed)?;
    let files = SynthFiles {
        detections: out_dir.join("det.txt"),
        truth: out_dir.join("gt.txt"),
        scenario: out_dir.join("scenario.txt"),
    };
    write_detections(&files.detections, &out.frames)?;
    write(&files.truth, &format_trajectories(&out.truth))?;
    write(&files.scenario, &synth::to_spec(&s))?;
    Ok(files)
}

/// Output file name for `input` when several inputs share one output
/// directory: the file stem, or the parent directory name for the
/// conventional `<seq>/det.txt` and `<seq>/gt.txt` layouts.
pub fn output_name(input: &Path) -> String {
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    if matches!(stem.as_str(), "det" | "gt" | "track" | "tracks") {
        if let Some(parent) = input.parent().and_then(Path::file_name) {
            return format!("{}.txt", parent.to_string_lossy());
        }
    }
    format!("{stem}.txt")
}

/// Applies `job` to every input on a pool of `jobs` workers. Results keep
/// the input order; the first error (in input order) is returned.
pub fn run_jobs<T, R, F>(inputs: &[T], jobs: usize, job: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::config("jobs", e.to_string()))?;
    pool.install(|| inputs.par_iter().map(&job).collect::<Vec<_>>())
        .into_iter()
        .collect()
}
