//! Tunables for tracking, smoothing, linking and synthesis.
//!
//! The on-disk format is flat `section.key = value` lines; `#` starts a
//! comment. Sections are `tracker.`, `gsp.`, `link.` and `synth.`:
//!
//! ```text
//! # lighter appearance weighting
//! tracker.lambda_edge = 0.3
//! tracker.dir_max = 0.2
//! gsp.max_gap = 15
//! synth.seed = 7
//! ```
//!
//! Values given on the command line (`--set key=value`, `--seed`) are applied
//! after the file, which is applied after the built-in defaults.

use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchingStrategy {
    /// One global assignment per class subset.
    Vanilla,
    /// Age-prioritized staged assignment. Reserved; rejected at load time.
    Cascade,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub lambda_motion: f64,
    pub lambda_edge: f64,
    pub lambda_color: f64,
    pub lambda_style: f64,
    pub iou_min: f64,
    pub dir_max: f64,
    pub d_max: f64,
    pub epsilon: f64,
    /// EMA momentum on the previous appearance state.
    pub alpha: f64,
    pub age_max: u32,
    pub conf_min: f64,
    pub stack_len: usize,
    pub sigma_dir: f64,
    pub n_init: u32,
    pub embedding_dim: usize,
    pub frame_width: f64,
    pub frame_height: f64,
    /// Appearance snapshot period (frames) for the linking bank.
    pub snapshot_every: u32,
    /// Capacity of the linking bank.
    pub bank_len: usize,
    pub std_weight_position: f64,
    pub std_weight_velocity: f64,
    pub matching: MatchingStrategy,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            lambda_motion: 0.1,
            lambda_edge: 0.4,
            lambda_color: 0.25,
            lambda_style: 0.25,
            iou_min: 0.45,
            dir_max: 0.15,
            d_max: 1e4,
            epsilon: 1e-3,
            alpha: 0.8,
            age_max: 10,
            conf_min: 0.5,
            stack_len: 30,
            sigma_dir: 2.0,
            n_init: 3,
            embedding_dim: 128,
            frame_width: 1920.0,
            frame_height: 1080.0,
            snapshot_every: 5,
            bank_len: 16,
            std_weight_position: 1.0 / 20.0,
            std_weight_velocity: 1.0 / 160.0,
            matching: MatchingStrategy::Vanilla,
        }
    }
}

impl TrackerConfig {
    pub fn frame_diagonal(&self) -> f64 {
        self.frame_width.hypot(self.frame_height)
    }

    pub fn validate(&self) -> Result<()> {
        let lambdas = [
            ("tracker.lambda_motion", self.lambda_motion),
            ("tracker.lambda_edge", self.lambda_edge),
            ("tracker.lambda_color", self.lambda_color),
            ("tracker.lambda_style", self.lambda_style),
        ];
        for (key, v) in lambdas {
            if !(v >= 0.0) {
                return Err(Error::config(key, "must be >= 0"));
            }
        }
        if !(0.0..=1.0).contains(&self.iou_min) {
            return Err(Error::config("tracker.iou_min", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::config("tracker.alpha", "must lie in [0, 1]"));
        }
        if self.age_max < 1 {
            return Err(Error::config("tracker.age_max", "must be >= 1"));
        }
        if self.stack_len < 1 {
            return Err(Error::config("tracker.stack_len", "must be >= 1"));
        }
        if self.bank_len < 1 {
            return Err(Error::config("tracker.bank_len", "must be >= 1"));
        }
        if self.snapshot_every < 1 {
            return Err(Error::config("tracker.snapshot_every", "must be >= 1"));
        }
        if !(self.sigma_dir > 0.0) {
            return Err(Error::config("tracker.sigma_dir", "must be > 0"));
        }
        if self.embedding_dim < 1 {
            return Err(Error::config("tracker.embedding_dim", "must be >= 1"));
        }
        if !(self.frame_width > 0.0 && self.frame_height > 0.0) {
            return Err(Error::config(
                "tracker.frame_width",
                "frame size must be positive",
            ));
        }
        if self.matching == MatchingStrategy::Cascade {
            return Err(Error::config(
                "tracker.matching",
                "cascade matching is reserved and not implemented; use `vanilla`",
            ));
        }
        Ok(())
    }
}

/// Gaussian-process smoothing parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GspConfig {
    pub enabled: bool,
    pub max_gap: u32,
    /// RBF length scale in frames.
    pub length_scale: f64,
    /// RBF amplitude in px². Small values pull long tracks toward their mean.
    pub signal_var: f64,
    /// Observation noise variance in px².
    pub noise_var: f64,
}

impl Default for GspConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            max_gap: 20,
            length_scale: 10.0,
            signal_var: 1e4,
            noise_var: 1.0,
        }
    }
}

/// Offline tracklet linking gates.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkConfig {
    pub enabled: bool,
    pub temporal_max: u32,
    pub spatial_max: f64,
    pub accept_sim: f64,
    /// Cap on the appearance bank of a merged trajectory.
    pub bank_len: usize,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            temporal_max: 20,
            spatial_max: 70.0,
            accept_sim: 0.9,
            bank_len: 16,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SynthSettings {
    pub seed: u64,
    /// Overrides the scenario's own length when set.
    pub frames: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    pub tracker: TrackerConfig,
    pub gsp: GspConfig,
    pub link: LinkConfig,
    pub synth: SynthSettings,
}

/// Every key accepted by [`Config::set`].
pub const KEYS: &[&str] = &[
    "tracker.lambda_motion",
    "tracker.lambda_edge",
    "tracker.lambda_color",
    "tracker.lambda_style",
    "tracker.iou_min",
    "tracker.dir_max",
    "tracker.d_max",
    "tracker.epsilon",
    "tracker.alpha",
    "tracker.age_max",
    "tracker.conf_min",
    "tracker.stack_len",
    "tracker.sigma_dir",
    "tracker.n_init",
    "tracker.embedding_dim",
    "tracker.frame_width",
    "tracker.frame_height",
    "tracker.snapshot_every",
    "tracker.bank_len",
    "tracker.std_weight_position",
    "tracker.std_weight_velocity",
    "tracker.matching",
    "gsp.enabled",
    "gsp.max_gap",
    "gsp.length_scale",
    "gsp.signal_var",
    "gsp.noise_var",
    "link.enabled",
    "link.temporal_max",
    "link.spatial_max",
    "link.accept_sim",
    "link.bank_len",
    "synth.seed",
    "synth.frames",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse `{value}`")))
}

impl Config {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let t = &mut self.tracker;
        match key {
            "tracker.lambda_motion" => t.lambda_motion = parse(key, value)?,
            "tracker.lambda_edge" => t.lambda_edge = parse(key, value)?,
            "tracker.lambda_color" => t.lambda_color = parse(key, value)?,
            "tracker.lambda_style" => t.lambda_style = parse(key, value)?,
            "tracker.iou_min" => t.iou_min = parse(key, value)?,
            "tracker.dir_max" => t.dir_max = parse(key, value)?,
            "tracker.d_max" => t.d_max = parse(key, value)?,
            "tracker.epsilon" => t.epsilon = parse(key, value)?,
            "tracker.alpha" => t.alpha = parse(key, value)?,
            "tracker.age_max" => t.age_max = parse(key, value)?,
            "tracker.conf_min" => t.conf_min = parse(key, value)?,
            "tracker.stack_len" => t.stack_len = parse(key, value)?,
            "tracker.sigma_dir" => t.sigma_dir = parse(key, value)?,
            "tracker.n_init" => t.n_init = parse(key, value)?,
            "tracker.embedding_dim" => t.embedding_dim = parse(key, value)?,
            "tracker.frame_width" => t.frame_width = parse(key, value)?,
            "tracker.frame_height" => t.frame_height = parse(key, value)?,
            "tracker.snapshot_every" => t.snapshot_every = parse(key, value)?,
            "tracker.bank_len" => t.bank_len = parse(key, value)?,
            "tracker.std_weight_position" => t.std_weight_position = parse(key, value)?,
            "tracker.std_weight_velocity" => t.std_weight_velocity = parse(key, value)?,
            "tracker.matching" => {
                t.matching = match value {
                    "vanilla" => MatchingStrategy::Vanilla,
                    "cascade" => MatchingStrategy::Cascade,
                    _ => return Err(Error::config(key, "expected `vanilla` or `cascade`")),
                }
            }
            "gsp.enabled" => self.gsp.enabled = parse(key, value)?,
            "gsp.max_gap" => self.gsp.max_gap = parse(key, value)?,
            "gsp.length_scale" => self.gsp.length_scale = parse(key, value)?,
            "gsp.signal_var" => self.gsp.signal_var = parse(key, value)?,
            "gsp.noise_var" => self.gsp.noise_var = parse(key, value)?,
            "link.enabled" => self.link.enabled = parse(key, value)?,
            "link.temporal_max" => self.link.temporal_max = parse(key, value)?,
            "link.spatial_max" => self.link.spatial_max = parse(key, value)?,
            "link.accept_sim" => self.link.accept_sim = parse(key, value)?,
            "link.bank_len" => self.link.bank_len = parse(key, value)?,
            "synth.seed" => self.synth.seed = parse(key, value)?,
            "synth.frames" => self.synth.frames = Some(parse(key, value)?),
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    /// Current value of `key`, formatted the way [`Config::set`] parses it.
    pub fn get(&self, key: &str) -> Option<String> {
        let t = &self.tracker;
        let s = match key {
            "tracker.lambda_motion" => t.lambda_motion.to_string(),
            "tracker.lambda_edge" => t.lambda_edge.to_string(),
            "tracker.lambda_color" => t.lambda_color.to_string(),
            "tracker.lambda_style" => t.lambda_style.to_string(),
            "tracker.iou_min" => t.iou_min.to_string(),
            "tracker.dir_max" => t.dir_max.to_string(),
            "tracker.d_max" => t.d_max.to_string(),
            "tracker.epsilon" => t.epsilon.to_string(),
            "tracker.alpha" => t.alpha.to_string(),
            "tracker.age_max" => t.age_max.to_string(),
            "tracker.conf_min" => t.conf_min.to_string(),
            "tracker.stack_len" => t.stack_len.to_string(),
            "tracker.sigma_dir" => t.sigma_dir.to_string(),
            "tracker.n_init" => t.n_init.to_string(),
            "tracker.embedding_dim" => t.embedding_dim.to_string(),
            "tracker.frame_width" => t.frame_width.to_string(),
            "tracker.frame_height" => t.frame_height.to_string(),
            "tracker.snapshot_every" => t.snapshot_every.to_string(),
            "tracker.bank_len" => t.bank_len.to_string(),
            "tracker.std_weight_position" => t.std_weight_position.to_string(),
            "tracker.std_weight_velocity" => t.std_weight_velocity.to_string(),
            "tracker.matching" => match t.matching {
                MatchingStrategy::Vanilla => "vanilla".into(),
                MatchingStrategy::Cascade => "cascade".into(),
            },
            "gsp.enabled" => self.gsp.enabled.to_string(),
            "gsp.max_gap" => self.gsp.max_gap.to_string(),
            "gsp.length_scale" => self.gsp.length_scale.to_string(),
            "gsp.signal_var" => self.gsp.signal_var.to_string(),
            "gsp.noise_var" => self.gsp.noise_var.to_string(),
            "link.enabled" => self.link.enabled.to_string(),
            "link.temporal_max" => self.link.temporal_max.to_string(),
            "link.spatial_max" => self.link.spatial_max.to_string(),
            "link.accept_sim" => self.link.accept_sim.to_string(),
            "link.bank_len" => self.link.bank_len.to_string(),
            "synth.seed" => self.synth.seed.to_string(),
            "synth.frames" => self.synth.frames.map(|f| f.to_string()).unwrap_or_default(),
            _ => return None,
        };
        Some(s)
    }

    /// Applies `key = value` lines from `text` on top of the current values.
    pub fn apply_str(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(origin, idx + 1, "expected `key = value`"))?;
            self.set(key.trim(), value).map_err(|e| match e {
                Error::Config { key, msg } => {
                    Error::parse(origin, idx + 1, format!("`{key}`: {msg}"))
                }
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_str(&text, path)
    }

    /// Applies a `key=value` override as given on the command line.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::config(assignment, "override must look like key=value"))?;
        self.set(key.trim(), value)
    }

    /// Defaults, then `file`, then each `key=value` override in order, then
    /// validation.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Config> {
        let mut cfg = Config::default();
        if let Some(path) = file {
            cfg.apply_file(path)?;
        }
        for o in overrides {
            cfg.apply_override(o)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.tracker.validate()?;
        if self.gsp.max_gap < 1 {
            return Err(Error::config("gsp.max_gap", "must be >= 1"));
        }
        if !(self.gsp.length_scale > 0.0) {
            return Err(Error::config("gsp.length_scale", "must be > 0"));
        }
        if !(self.gsp.signal_var > 0.0) {
            return Err(Error::config("gsp.signal_var", "must be > 0"));
        }
        if !(self.gsp.noise_var > 0.0) {
            return Err(Error::config("gsp.noise_var", "must be > 0"));
        }
        if self.link.temporal_max < 1 {
            return Err(Error::config("link.temporal_max", "must be >= 1"));
        }
        if !(self.link.spatial_max > 0.0) {
            return Err(Error::config("link.spatial_max", "must be > 0"));
        }
        if !(self.link.accept_sim > 0.0 && self.link.accept_sim <= 1.0) {
            return Err(Error::config("link.accept_sim", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        Config::default().validate().unwrap();
    }

    #[test]
    fn every_key_round_trips_through_get_and_set() {
        let mut cfg = Config::default();
        for key in KEYS {
            let v = cfg.get(key).unwrap();
            if v.is_empty() {
                continue;
            }
            cfg.set(key, &v).unwrap();
        }
        assert_eq!(cfg, Config::default());
    }

    #[test]
    fn file_lines_and_comments() {
        let mut cfg = Config::default();
        cfg.apply_str(
            "# header\n\ntracker.lambda_color = 0.0  # off\nlink.spatial_max=50\n",
            Path::new("x.cfg"),
        )
        .unwrap();
        assert_eq!(cfg.tracker.lambda_color, 0.0);
        assert_eq!(cfg.link.spatial_max, 50.0);
    }

    #[test]
    fn bad_lines_report_line_numbers() {
        let mut cfg = Config::default();
        let err = cfg
            .apply_str("tracker.alpha = 0.5\nnonsense\n", Path::new("x.cfg"))
            .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = cfg
            .apply_str("tracker.nope = 1\n", Path::new("x.cfg"))
            .unwrap_err();
        assert!(err.to_string().contains("unknown key"));
    }

    #[test]
    fn cascade_is_reserved() {
        let mut cfg = Config::default();
        cfg.set("tracker.matching", "cascade").unwrap();
        assert!(cfg.validate().is_err());
    }
}
