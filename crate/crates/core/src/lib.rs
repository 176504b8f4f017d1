//! Tracking-by-detection with motion, appearance, attribute and heading cues.
//!
//! The online tracker ([`Tracker`]) fuses a constant-velocity Kalman filter
//! with ReID embeddings, clothing color and style attributes and a coarse
//! heading distribution. Finished trajectories can be refined offline by
//! [`postprocess::refine`] (appearance-based tracklet linking, gap filling and
//! Gaussian-process smoothing) and scored with [`metrics::evaluate`].
//! [`synth`] generates scenes with ground truth to exercise all of it.
//!
//! ```
//! use featuresort::{synth, track_sequence, TrackerConfig};
//!
//! let scene = synth::preset("two_class").unwrap();
//! let out = synth::generate(&scene, 1).unwrap();
//! let (tracks, _) = track_sequence(&TrackerConfig::default(), &out.frames).unwrap();
//! assert!(!tracks.is_empty());
//! ```

pub mod association;
pub mod config;
pub mod error;
pub mod features;
pub mod io;
pub mod kalman;
pub mod lap;
pub mod metrics;
pub mod postprocess;
pub mod synth;
pub mod types;

pub use association::{track_sequence, MatchRecord, Track, TrackStatus, Tracker};
pub use config::{Config, GspConfig, LinkConfig, TrackerConfig};
pub use error::{Error, Result};
pub use metrics::{evaluate, EvalReport};
pub use types::{iou, normalize_detection, BBox, Detection, TrackPoint, Trajectory};
