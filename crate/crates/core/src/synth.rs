//! Synthetic scenes with known ground truth.
//!
//! A [`Scenario`] lists agents moving along piecewise-linear paths plus a
//! [`NoiseModel`]; [`generate`] turns it into per-frame detections carrying
//! noisy features and a ground-truth trajectory per agent. Identity
//! embeddings depend only on the scenario, every other random draw on the
//! run seed, so a fixed seed always reproduces the same output.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::error::{Error, Result};
use crate::types::{
    l2_normalize, normalize_detection, BBox, Detection, TrackPoint, Trajectory, COLOR_DIM,
    DIRECTION_BINS, STYLE_DIM,
};

const BIN_DEGREES: f64 = 360.0 / DIRECTION_BINS as f64;

#[derive(Debug, Clone, PartialEq)]
pub struct AgentSpec {
    pub identity: u64,
    pub class_id: u32,
    /// `(frame, cx, cy)` keyframes; position is linear in between. The agent
    /// lives from the first to the last keyframe.
    pub waypoints: Vec<(u32, f64, f64)>,
    pub size: (f64, f64),
    /// Indices set in the two-hot color label (upper and lower garment).
    pub colors: [usize; 2],
    pub style: usize,
}

impl AgentSpec {
    pub fn spawn(&self) -> u32 {
        self.waypoints.first().map_or(0, |w| w.0)
    }

    pub fn despawn(&self) -> u32 {
        self.waypoints.last().map_or(0, |w| w.0)
    }

    pub fn is_live(&self, frame: u32) -> bool {
        frame >= self.spawn() && frame <= self.despawn()
    }

    fn segment(&self, frame: u32) -> usize {
        let n = self.waypoints.len();
        (0..n - 1)
            .find(|&i| frame < self.waypoints[i + 1].0)
            .unwrap_or(n.saturating_sub(2))
    }

    pub fn center(&self, frame: u32) -> (f64, f64) {
        if self.waypoints.len() == 1 {
            let (_, x, y) = self.waypoints[0];
            return (x, y);
        }
        let i = self.segment(frame);
        let (f0, x0, y0) = self.waypoints[i];
        let (f1, x1, y1) = self.waypoints[i + 1];
        let s = (frame as f64 - f0 as f64) / (f1 as f64 - f0 as f64);
        (x0 + s * (x1 - x0), y0 + s * (y1 - y0))
    }

    pub fn bbox(&self, frame: u32) -> BBox {
        let (cx, cy) = self.center(frame);
        BBox::from_center(cx, cy, self.size.0, self.size.1)
    }

    /// Heading in fractional bins, `[0, 72)`, from the velocity of the
    /// segment in effect at `frame`. Stationary segments inherit the heading
    /// of the closest moving one before them.
    pub fn heading(&self, frame: u32) -> f64 {
        if self.waypoints.len() < 2 {
            return 0.0;
        }
        let mut i = self.segment(frame);
        loop {
            let (_, x0, y0) = self.waypoints[i];
            let (_, x1, y1) = self.waypoints[i + 1];
            let (dx, dy) = (x1 - x0, y1 - y0);
            if dx != 0.0 || dy != 0.0 {
                let deg = dy.atan2(dx).to_degrees().rem_euclid(360.0);
                return deg / BIN_DEGREES;
            }
            if i == 0 {
                return 0.0;
            }
            i -= 1;
        }
    }

    pub fn heading_bin(&self, frame: u32) -> usize {
        (self.heading(frame).round() as usize) % DIRECTION_BINS
    }

    pub fn color_label(&self) -> [f64; COLOR_DIM] {
        let mut c = [0.0; COLOR_DIM];
        for &i in &self.colors {
            c[i] = 1.0;
        }
        c
    }

    pub fn style_label(&self) -> [f64; STYLE_DIM] {
        let mut s = [0.0; STYLE_DIM];
        s[self.style] = 1.0;
        s
    }
}

/// Static occluding rectangle, active over an inclusive frame range.
#[derive(Debug, Clone, PartialEq)]
pub struct Occluder {
    pub rect: BBox,
    pub from: u32,
    pub to: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    /// Std of the per-coordinate box jitter, px.
    pub box_jitter: f64,
    pub drop_prob: f64,
    /// Mean number of false positives per frame.
    pub fp_rate: f64,
    pub conf_base: f64,
    /// Confidence lost per unit of occluded area fraction.
    pub conf_penalty: f64,
    pub conf_jitter: f64,
    /// Per-component std added to the identity embedding before renormalizing.
    pub embedding_noise: f64,
    /// Label softening: 1 maps to `1 - blur`, 0 maps to `blur`.
    pub attr_blur: f64,
    /// Half-width of the uniform jitter added to color/style entries.
    pub attr_noise: f64,
    /// Width (bins) of the heading distribution; 0 gives a one-hot vector.
    pub direction_sigma: f64,
    /// Std (bins) of the heading error before binning.
    pub direction_jitter: f64,
    /// Agents with a smaller visible area fraction are not detected.
    pub min_visibility: f64,
    pub occluders: Vec<Occluder>,
}

impl NoiseModel {
    /// No noise at all: detections equal the truth with confidence 1.
    pub fn clean() -> Self {
        Self {
            box_jitter: 0.0,
            drop_prob: 0.0,
            fp_rate: 0.0,
            conf_base: 1.0,
            conf_penalty: 0.0,
            conf_jitter: 0.0,
            embedding_noise: 0.0,
            attr_blur: 0.0,
            attr_noise: 0.0,
            direction_sigma: 0.0,
            direction_jitter: 0.0,
            min_visibility: 0.0,
            occluders: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("drop_prob", self.drop_prob),
            ("conf_base", self.conf_base),
            ("min_visibility", self.min_visibility),
            ("attr_blur", self.attr_blur),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Scenario(format!("noise.{name} must lie in [0, 1]")));
            }
        }
        let non_negative = [
            ("box_jitter", self.box_jitter),
            ("fp_rate", self.fp_rate),
            ("conf_penalty", self.conf_penalty),
            ("conf_jitter", self.conf_jitter),
            ("embedding_noise", self.embedding_noise),
            ("attr_noise", self.attr_noise),
            ("direction_sigma", self.direction_sigma),
            ("direction_jitter", self.direction_jitter),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0) {
                return Err(Error::Scenario(format!("noise.{name} must be >= 0")));
            }
        }
        Ok(())
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            box_jitter: 1.5,
            drop_prob: 0.01,
            fp_rate: 0.0,
            conf_base: 0.9,
            conf_penalty: 0.4,
            conf_jitter: 0.03,
            embedding_noise: 0.03,
            attr_blur: 0.1,
            attr_noise: 0.05,
            direction_sigma: 2.0,
            direction_jitter: 0.3,
            min_visibility: 0.5,
            occluders: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub frames: u32,
    pub width: f64,
    pub height: f64,
    pub embedding_dim: usize,
    /// Expected cosine similarity between any two identity embeddings.
    pub appearance_similarity: f64,
    /// Seed for the identity embeddings (independent of the run seed).
    pub appearance_seed: u64,
    pub agents: Vec<AgentSpec>,
    pub noise: NoiseModel,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        if self.embedding_dim == 0 {
            return Err(Error::Scenario("embedding_dim must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.appearance_similarity) {
            return Err(Error::Scenario(
                "appearance_similarity must lie in [0, 1)".into(),
            ));
        }
        for (i, a) in self.agents.iter().enumerate() {
            if a.waypoints.is_empty() {
                return Err(Error::Scenario(format!("agent {} has no path", a.identity)));
            }
            if a.waypoints.windows(2).any(|w| w[1].0 <= w[0].0) {
                return Err(Error::Scenario(format!(
                    "agent {} keyframes must strictly increase",
                    a.identity
                )));
            }
            if !(a.size.0 > 0.0 && a.size.1 > 0.0) {
                return Err(Error::Scenario(format!(
                    "agent {} needs a positive size",
                    a.identity
                )));
            }
            if a.colors.iter().any(|&c| c >= COLOR_DIM) || a.style >= STYLE_DIM {
                return Err(Error::Scenario(format!(
                    "agent {} color/style index out of range",
                    a.identity
                )));
            }
            for b in &self.agents[..i] {
                if b.identity == a.identity {
                    return Err(Error::Scenario(format!(
                        "duplicate agent id {}",
                        a.identity
                    )));
                }
                if b.waypoints == a.waypoints && b.size == a.size && b.class_id == a.class_id {
                    return Err(Error::Scenario(format!(
                        "agents {} and {} are identical and would overlap exactly",
                        b.identity, a.identity
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn classes(&self) -> Vec<u32> {
        let mut c: Vec<u32> = self.agents.iter().map(|a| a.class_id).collect();
        c.sort_unstable();
        c.dedup();
        if c.is_empty() {
            c.push(0);
        }
        c
    }

    /// Identity embeddings, one per agent, in agent order.
    pub fn identity_embeddings(&self) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.appearance_seed);
        let d = self.embedding_dim;
        let common = random_unit(&mut rng, d);
        let s = self.appearance_similarity;
        self.agents
            .iter()
            .map(|_| {
                let own = random_unit(&mut rng, d);
                let mut v: Vec<f64> = common
                    .iter()
                    .zip(&own)
                    .map(|(c, o)| s.sqrt() * c + (1.0 - s).sqrt() * o)
                    .collect();
                l2_normalize(&mut v);
                v
            })
            .collect()
    }
}

fn random_unit(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).unwrap();
    loop {
        let mut v: Vec<f64> = (0..d).map(|_| normal.sample(rng)).collect();
        if l2_normalize(&mut v) {
            return v;
        }
    }
}

/// Heading distribution: the circular Gaussian shape around `center`,
/// normalized to sum 1.
pub fn heading_distribution(center: usize, sigma: f64) -> [f64; DIRECTION_BINS] {
    let mut p = [0.0; DIRECTION_BINS];
    if sigma <= 0.0 {
        p[center % DIRECTION_BINS] = 1.0;
        return p;
    }
    for (k, v) in p.iter_mut().enumerate() {
        *v = crate::features::circular_gaussian(center, k, sigma);
    }
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    p
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    /// Detections of frames `1..=frames`, index `frame - 1`.
    pub frames: Vec<Vec<Detection>>,
    /// Agent identity behind each detection; `None` for false positives.
    pub sources: Vec<Vec<Option<u64>>>,
    /// One trajectory per agent over every live frame, occluded or not.
    pub truth: Vec<Trajectory>,
}

impl SynthOutput {
    pub fn detection_count(&self) -> usize {
        self.frames.iter().map(Vec::len).sum()
    }
}

/// Renders `scenario` with run seed `seed`.
pub fn generate(scenario: &Scenario, seed: u64) -> Result<SynthOutput> {
    scenario.validate()?;
    let noise = &scenario.noise;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let identities = scenario.identity_embeddings();
    let unit_normal = Normal::new(0.0, 1.0).unwrap();
    let fp_count = (noise.fp_rate > 0.0).then(|| Poisson::new(noise.fp_rate).unwrap());
    let classes = scenario.classes();
    let mean_size = mean_agent_size(scenario);

    let mut truth: Vec<Trajectory> = scenario
        .agents
        .iter()
        .map(|a| Trajectory {
            track_id: a.identity,
            class_id: a.class_id,
            points: Vec::new(),
            embedding_bank: Vec::new(),
        })
        .collect();
    let mut frames = Vec::with_capacity(scenario.frames as usize);
    let mut sources = Vec::with_capacity(scenario.frames as usize);

    for frame in 1..=scenario.frames {
        let live: Vec<(usize, BBox)> = scenario
            .agents
            .iter()
            .enumerate()
            .filter(|(_, a)| a.is_live(frame))
            .map(|(i, a)| (i, a.bbox(frame)))
            .collect();
        let mut dets = Vec::new();
        let mut src = Vec::new();

        for &(i, truth_box) in &live {
            let agent = &scenario.agents[i];
            truth[i].points.push(TrackPoint {
                frame,
                bbox: truth_box,
                conf: 1.0,
                interpolated: false,
            });

            let hidden = occluded_fraction(scenario, frame, i, truth_box, &live);
            let visible = 1.0 - hidden;
            // Draw every random quantity unconditionally so that one agent's
            // visibility never shifts the random stream of another.
            let dropped = rng.random_bool(noise.drop_prob);
            let jitter: [f64; 4] =
                std::array::from_fn(|_| noise.box_jitter * unit_normal.sample(&mut rng));
            let conf_noise = noise.conf_jitter * unit_normal.sample(&mut rng);
            let emb_noise: Vec<f64> = (0..scenario.embedding_dim)
                .map(|_| noise.embedding_noise * unit_normal.sample(&mut rng))
                .collect();
            let color = soften(&agent.color_label(), noise, &mut rng);
            let style = soften(&agent.style_label(), noise, &mut rng);
            let heading_err = noise.direction_jitter * unit_normal.sample(&mut rng);

            if dropped || visible < noise.min_visibility {
                continue;
            }
            let bbox = BBox::from_center(
                truth_box.x + truth_box.w / 2.0 + jitter[0],
                truth_box.y + truth_box.h / 2.0 + jitter[1],
                truth_box.w + jitter[2],
                truth_box.h + jitter[3],
            );
            let conf = (noise.conf_base - noise.conf_penalty * hidden + conf_noise).clamp(0.0, 1.0);
            let embedding: Vec<f64> = identities[i]
                .iter()
                .zip(&emb_noise)
                .map(|(e, n)| e + n)
                .collect();
            let center_bin = ((agent.heading(frame) + heading_err).round() as i64)
                .rem_euclid(DIRECTION_BINS as i64) as usize;
            let det = Detection {
                frame,
                bbox,
                conf,
                class_id: agent.class_id,
                embedding,
                color,
                style,
                direction: heading_distribution(center_bin, noise.direction_sigma),
            };
            dets.push(normalize_detection(det)?);
            src.push(Some(agent.identity));
        }

        let n_fp = fp_count.map_or(0, |p| p.sample(&mut rng) as usize);
        for _ in 0..n_fp {
            let (w, h) = mean_size;
            let cx = rng.random_range(w / 2.0..scenario.width - w / 2.0);
            let cy = rng.random_range(h / 2.0..scenario.height - h / 2.0);
            let mut color = [0.0; COLOR_DIM];
            color.iter_mut().for_each(|c| *c = rng.random::<f64>());
            let mut style = [0.0; STYLE_DIM];
            style.iter_mut().for_each(|c| *c = rng.random::<f64>());
            let det = Detection {
                frame,
                bbox: BBox::from_center(cx, cy, w, h),
                conf: rng.random_range(0.3..noise.conf_base.max(0.31)),
                class_id: classes[rng.random_range(0..classes.len())],
                embedding: random_unit(&mut rng, scenario.embedding_dim),
                color,
                style,
                direction: heading_distribution(
                    rng.random_range(0..DIRECTION_BINS),
                    noise.direction_sigma,
                ),
            };
            dets.push(normalize_detection(det)?);
            src.push(None);
        }
        frames.push(dets);
        sources.push(src);
    }

    for (t, a) in truth.iter_mut().zip(&scenario.agents) {
        t.embedding_bank =
            vec![identities[scenario.agents.iter().position(|b| b == a).unwrap()].clone()];
    }
    truth.retain(|t| !t.points.is_empty());
    Ok(SynthOutput {
        frames,
        sources,
        truth,
    })
}

fn mean_agent_size(scenario: &Scenario) -> (f64, f64) {
    if scenario.agents.is_empty() {
        return (40.0, 100.0);
    }
    let n = scenario.agents.len() as f64;
    let w = scenario.agents.iter().map(|a| a.size.0).sum::<f64>() / n;
    let h = scenario.agents.iter().map(|a| a.size.1).sum::<f64>() / n;
    (w, h)
}

fn soften<const N: usize>(label: &[f64; N], noise: &NoiseModel, rng: &mut impl Rng) -> [f64; N] {
    let b = noise.attr_blur;
    std::array::from_fn(|k| {
        let u: f64 = rng.random_range(-1.0..=1.0);
        (label[k] * (1.0 - 2.0 * b) + b + noise.attr_noise * u).clamp(0.0, 1.0)
    })
}

/// Largest fraction of `bbox` covered by an active occluder or by an agent
/// standing in front (lower bottom edge on screen, ties to the lower index).
fn occluded_fraction(
    scenario: &Scenario,
    frame: u32,
    me: usize,
    bbox: BBox,
    live: &[(usize, BBox)],
) -> f64 {
    let area = bbox.area();
    let mut hidden: f64 = 0.0;
    for o in &scenario.noise.occluders {
        if frame >= o.from && frame <= o.to {
            hidden = hidden.max(bbox.intersection(&o.rect) / area);
        }
    }
    let my_bottom = bbox.y + bbox.h;
    for &(j, other) in live {
        if j == me {
            continue;
        }
        let other_bottom = other.y + other.h;
        if other_bottom > my_bottom || (other_bottom == my_bottom && j < me) {
            hidden = hidden.max(bbox.intersection(&other) / area);
        }
    }
    hidden.min(1.0)
}

// ---------------------------------------------------------------------------
// Presets

pub const PRESET_NAMES: &[&str] = &[
    "crossing_pair",
    "occlusion_corridor",
    "crowd_20",
    "two_class",
];

pub fn preset(name: &str) -> Result<Scenario> {
    match name {
        "crossing_pair" => Ok(crossing_pair()),
        "occlusion_corridor" => Ok(occlusion_corridor()),
        "crowd_20" => Ok(crowd(20, 1000)),
        "two_class" => Ok(two_class()),
        _ => Err(Error::UnknownScenario {
            name: name.to_string(),
            available: PRESET_NAMES.to_vec(),
        }),
    }
}

/// Every preset, keyed by name.
pub fn preset_scenarios() -> Vec<(&'static str, Scenario)> {
    PRESET_NAMES
        .iter()
        .map(|&n| (n, preset(n).unwrap()))
        .collect()
}

/// Keyframes for an arc around `(cx, cy)` from angle `a0` to `a1` (radians),
/// starting at `frame` and moving at `speed` px/frame. The first point is
/// omitted so arcs chain onto a preceding straight segment.
fn arc(
    frame: u32,
    center: (f64, f64),
    radius: f64,
    a0: f64,
    a1: f64,
    speed: f64,
    pieces: usize,
) -> Vec<(u32, f64, f64)> {
    let step_len = radius * (a1 - a0).abs() / pieces as f64;
    let dt = (step_len / speed).round().max(1.0) as u32;
    (1..=pieces)
        .map(|k| {
            let a = a0 + (a1 - a0) * k as f64 / pieces as f64;
            (
                frame + dt * k as u32,
                center.0 + radius * a.cos(),
                center.1 + radius * a.sin(),
            )
        })
        .collect()
}

fn straight_to(from: (u32, f64, f64), to: (f64, f64), speed: f64) -> (u32, f64, f64) {
    let dist = (to.0 - from.1).hypot(to.1 - from.2);
    (from.0 + (dist / speed).round().max(1.0) as u32, to.0, to.1)
}

/// Two walkers with near-identical embeddings but different clothing cross
/// head-on, turn around and cross again. The one further back is hidden
/// for a few frames at each crossing.
pub fn crossing_pair() -> Scenario {
    let speed = 3.0;
    let (left, right) = (500.0, 1400.0);
    let (lane_a, lane_b, radius) = (480.0, 680.0, 100.0);

    // Agent 1: left to right on lane A, clockwise U-turn, back on lane B.
    let mut p1 = vec![(1, left, lane_a)];
    p1.push(straight_to(p1[0], (right, lane_a), speed));
    let f = p1.last().unwrap().0;
    p1.extend(arc(
        f,
        (right, lane_a + radius),
        radius,
        -PI / 2.0,
        PI / 2.0,
        speed,
        24,
    ));
    let last = *p1.last().unwrap();
    p1.push(straight_to(last, (left, lane_b), speed));

    // Agent 2: mirror image, slightly lower on screen so it occludes agent 1.
    let mut p2 = vec![(1, right, lane_a + 4.0)];
    p2.push(straight_to(p2[0], (left, lane_a + 4.0), speed));
    let f = p2.last().unwrap().0;
    p2.extend(arc(
        f,
        (left, lane_a + 4.0 + radius),
        radius,
        -PI / 2.0,
        -3.0 * PI / 2.0,
        speed,
        24,
    ));
    let last = *p2.last().unwrap();
    p2.push(straight_to(last, (right, lane_b + 4.0), speed));

    let frames = p1.last().unwrap().0.min(p2.last().unwrap().0);
    Scenario {
        name: "crossing_pair".into(),
        frames,
        width: 1920.0,
        height: 1080.0,
        embedding_dim: 128,
        appearance_similarity: 0.97,
        appearance_seed: 35,
        agents: vec![
            AgentSpec {
                identity: 1,
                class_id: 0,
                waypoints: p1,
                size: (48.0, 120.0),
                colors: [0, 2],
                style: 3,
            },
            AgentSpec {
                identity: 2,
                class_id: 0,
                waypoints: p2,
                size: (48.0, 120.0),
                colors: [6, 8],
                style: 11,
            },
        ],
        noise: NoiseModel {
            box_jitter: 2.0,
            embedding_noise: 0.09,
            ..NoiseModel::default()
        },
    }
}

/// Walkers passing behind pillars: one long occlusion (longer than the
/// track age limit) and one short, plus an unoccluded walker.
pub fn occlusion_corridor() -> Scenario {
    let speed = 4.0;
    let pillar_long = BBox::new(900.0, 0.0, 48.0, 1080.0).unwrap();
    let pillar_short = BBox::new(1300.0, 600.0, 20.0, 480.0).unwrap();
    let walk = |start: (f64, f64), end: (f64, f64), sp: f64| {
        let a = (1, start.0, start.1);
        vec![a, straight_to(a, end, sp)]
    };
    Scenario {
        name: "occlusion_corridor".into(),
        frames: 300,
        width: 1920.0,
        height: 1080.0,
        embedding_dim: 128,
        appearance_similarity: 0.0,
        appearance_seed: 12,
        agents: vec![
            AgentSpec {
                identity: 1,
                class_id: 0,
                waypoints: walk((400.0, 300.0), (1600.0, 300.0), speed),
                size: (40.0, 100.0),
                colors: [1, 0],
                style: 2,
            },
            AgentSpec {
                identity: 2,
                class_id: 0,
                waypoints: walk((1800.0, 800.0), (700.0, 800.0), speed),
                size: (40.0, 100.0),
                colors: [4, 9],
                style: 7,
            },
            AgentSpec {
                identity: 3,
                class_id: 0,
                waypoints: walk((300.0, 600.0), (700.0, 1000.0), 2.0),
                size: (40.0, 100.0),
                colors: [7, 5],
                style: 15,
            },
        ],
        noise: NoiseModel {
            box_jitter: 1.5,
            drop_prob: 0.0,
            embedding_noise: 0.02,
            occluders: vec![
                Occluder {
                    rect: pillar_long,
                    from: 1,
                    to: u32::MAX,
                },
                Occluder {
                    rect: pillar_short,
                    from: 1,
                    to: u32::MAX,
                },
            ],
            ..NoiseModel::default()
        },
    }
}

/// `n` walkers on smooth random walks for `frames` frames. The layout is
/// fixed; only detection noise depends on the run seed.
pub fn crowd(n: usize, frames: u32) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(20 + n as u64);
    let (width, height): (f64, f64) = (1920.0, 1080.0);
    let margin: f64 = 120.0;
    let agents = (0..n)
        .map(|i| {
            let w = rng.random_range(32.0..48.0);
            let h = w * rng.random_range(2.3..2.7);
            let speed = rng.random_range(1.5..4.0);
            let mut heading: f64 = rng.random_range(0.0..2.0 * PI);
            let mut x = rng.random_range(margin..width - margin);
            let mut y = rng.random_range(margin..height - margin);
            let mut pts = vec![(1u32, x, y)];
            let step = 10u32;
            let mut f = 1u32;
            while f < frames {
                // steer back towards the middle when close to the border
                let (tx, ty) = (width / 2.0 - x, height / 2.0 - y);
                let near_edge =
                    x < margin || x > width - margin || y < margin || y > height - margin;
                let mut turn = rng.random_range(-8f64..8.0).to_radians();
                if near_edge {
                    let want = ty.atan2(tx);
                    let diff = (want - heading + PI).rem_euclid(2.0 * PI) - PI;
                    turn = diff.clamp(-10f64.to_radians(), 10f64.to_radians());
                }
                heading += turn;
                let next = (f + step).min(frames);
                let dt = (next - f) as f64;
                x += heading.cos() * speed * dt;
                y += heading.sin() * speed * dt;
                pts.push((next, x, y));
                f = next;
            }
            let colors = {
                let a = rng.random_range(0..COLOR_DIM);
                let b = (a + rng.random_range(1..COLOR_DIM)) % COLOR_DIM;
                [a, b]
            };
            AgentSpec {
                identity: i as u64 + 1,
                class_id: 0,
                waypoints: pts,
                size: (w, h),
                colors,
                style: rng.random_range(0..STYLE_DIM),
            }
        })
        .collect();
    Scenario {
        name: format!("crowd_{n}"),
        frames,
        width,
        height,
        embedding_dim: 128,
        appearance_similarity: 0.0,
        appearance_seed: 7,
        agents,
        noise: NoiseModel {
            fp_rate: 0.2,
            ..NoiseModel::default()
        },
    }
}

/// Pedestrians crossing a road while vehicles drive through the same spot.
pub fn two_class() -> Scenario {
    let line = |a: (f64, f64), b: (f64, f64), sp: f64| {
        let s = (1u32, a.0, a.1);
        vec![s, straight_to(s, b, sp)]
    };
    let person = |id, path, colors, style| AgentSpec {
        identity: id,
        class_id: 0,
        waypoints: path,
        size: (40.0, 100.0),
        colors,
        style,
    };
    let car = |id, path, colors, style| AgentSpec {
        identity: id,
        class_id: 2,
        waypoints: path,
        size: (160.0, 90.0),
        colors,
        style,
    };
    Scenario {
        name: "two_class".into(),
        frames: 240,
        width: 1920.0,
        height: 1080.0,
        embedding_dim: 128,
        appearance_similarity: 0.0,
        appearance_seed: 2,
        agents: vec![
            person(1, line((960.0, 200.0), (960.0, 900.0), 3.0), [0, 1], 1),
            person(2, line((1010.0, 900.0), (1010.0, 200.0), 3.0), [3, 8], 5),
            car(3, line((200.0, 560.0), (1750.0, 560.0), 7.0), [6, 0], 18),
            car(4, line((1750.0, 470.0), (200.0, 470.0), 6.5), [8, 9], 19),
        ],
        noise: NoiseModel {
            min_visibility: 0.3,
            ..NoiseModel::default()
        },
    }
}

// ---------------------------------------------------------------------------
// Scenario spec files

/// Serializes a scenario in the section/key-value format read by
/// [`Scenario::parse`].
pub fn to_spec(s: &Scenario) -> String {
    let n = &s.noise;
    let mut out = String::new();
    let _ = writeln!(out, "[scenario]");
    let _ = writeln!(out, "name = {}", s.name);
    let _ = writeln!(out, "frames = {}", s.frames);
    let _ = writeln!(out, "width = {}", s.width);
    let _ = writeln!(out, "height = {}", s.height);
    let _ = writeln!(out, "embedding_dim = {}", s.embedding_dim);
    let _ = writeln!(out, "appearance_similarity = {}", s.appearance_similarity);
    let _ = writeln!(out, "appearance_seed = {}", s.appearance_seed);
    let _ = writeln!(out, "\n[noise]");
    for (k, v) in [
        ("box_jitter", n.box_jitter),
        ("drop_prob", n.drop_prob),
        ("fp_rate", n.fp_rate),
        ("conf_base", n.conf_base),
        ("conf_penalty", n.conf_penalty),
        ("conf_jitter", n.conf_jitter),
        ("embedding_noise", n.embedding_noise),
        ("attr_blur", n.attr_blur),
        ("attr_noise", n.attr_noise),
        ("direction_sigma", n.direction_sigma),
        ("direction_jitter", n.direction_jitter),
        ("min_visibility", n.min_visibility),
    ] {
        let _ = writeln!(out, "{k} = {v}");
    }
    for o in &n.occluders {
        let _ = writeln!(out, "\n[occluder]");
        let _ = writeln!(
            out,
            "rect = {} {} {} {}",
            o.rect.x, o.rect.y, o.rect.w, o.rect.h
        );
        let _ = writeln!(out, "frames = {} {}", o.from, o.to);
    }
    for a in &s.agents {
        let _ = writeln!(out, "\n[agent]");
        let _ = writeln!(out, "id = {}", a.identity);
        let _ = writeln!(out, "class = {}", a.class_id);
        let _ = writeln!(out, "size = {} {}", a.size.0, a.size.1);
        let _ = writeln!(out, "colors = {} {}", a.colors[0], a.colors[1]);
        let _ = writeln!(out, "style = {}", a.style);
        let path: Vec<String> = a
            .waypoints
            .iter()
            .map(|(f, x, y)| format!("{f}:{x},{y}"))
            .collect();
        let _ = writeln!(out, "path = {}", path.join(" "));
    }
    out
}

enum Section {
    None,
    Scenario,
    Noise,
    Occluder,
    Agent,
}

impl Scenario {
    /// Reads the format written by [`to_spec`]. Unset `[scenario]` and
    /// `[noise]` keys keep the defaults of [`NoiseModel::default`].
    pub fn parse(text: &str, origin: &std::path::Path) -> Result<Scenario> {
        let mut s = Scenario {
            name: "custom".into(),
            frames: 0,
            width: 1920.0,
            height: 1080.0,
            embedding_dim: 128,
            appearance_similarity: 0.0,
            appearance_seed: 0,
            agents: Vec::new(),
            noise: NoiseModel::default(),
        };
        let mut section = Section::None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let err = |msg: String| Error::parse(origin, line_no, msg);
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                section = match &line[1..line.len() - 1] {
                    "scenario" => Section::Scenario,
                    "noise" => Section::Noise,
                    "occluder" => {
                        s.noise.occluders.push(Occluder {
                            rect: BBox::new(0.0, 0.0, 1.0, 1.0).unwrap(),
                            from: 1,
                            to: u32::MAX,
                        });
                        Section::Occluder
                    }
                    "agent" => {
                        s.agents.push(AgentSpec {
                            identity: s.agents.len() as u64 + 1,
                            class_id: 0,
                            waypoints: Vec::new(),
                            size: (40.0, 100.0),
                            colors: [0, 1],
                            style: 0,
                        });
                        Section::Agent
                    }
                    other => return Err(err(format!("unknown section [{other}]"))),
                };
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err("expected `key = value`".into()))?;
            let num = |v: &str| -> Result<f64> {
                v.parse::<f64>()
                    .map_err(|_| err(format!("`{key}`: bad number `{v}`")))
            };
            let int = |v: &str| -> Result<u64> {
                v.parse::<u64>()
                    .map_err(|_| err(format!("`{key}`: bad integer `{v}`")))
            };
            let nums = |v: &str, n: usize| -> Result<Vec<f64>> {
                let xs: Vec<f64> = v.split_whitespace().map(num).collect::<Result<_>>()?;
                if xs.len() != n {
                    return Err(err(format!("`{key}` expects {n} numbers")));
                }
                Ok(xs)
            };
            match section {
                Section::None => return Err(err("key outside of a section".into())),
                Section::Scenario => match key {
                    "name" => s.name = value.to_string(),
                    "frames" => s.frames = int(value)? as u32,
                    "width" => s.width = num(value)?,
                    "height" => s.height = num(value)?,
                    "embedding_dim" => s.embedding_dim = int(value)? as usize,
                    "appearance_similarity" => s.appearance_similarity = num(value)?,
                    "appearance_seed" => s.appearance_seed = int(value)?,
                    _ => return Err(err(format!("unknown scenario key `{key}`"))),
                },
                Section::Noise => {
                    let n = &mut s.noise;
                    let v = num(value)?;
                    match key {
                        "box_jitter" => n.box_jitter = v,
                        "drop_prob" => n.drop_prob = v,
                        "fp_rate" => n.fp_rate = v,
                        "conf_base" => n.conf_base = v,
                        "conf_penalty" => n.conf_penalty = v,
                        "conf_jitter" => n.conf_jitter = v,
                        "embedding_noise" => n.embedding_noise = v,
                        "attr_blur" => n.attr_blur = v,
                        "attr_noise" => n.attr_noise = v,
                        "direction_sigma" => n.direction_sigma = v,
                        "direction_jitter" => n.direction_jitter = v,
                        "min_visibility" => n.min_visibility = v,
                        _ => return Err(err(format!("unknown noise key `{key}`"))),
                    }
                }
                Section::Occluder => {
                    let o = s.noise.occluders.last_mut().unwrap();
                    match key {
                        "rect" => {
                            let r = nums(value, 4)?;
                            o.rect = BBox::new(r[0], r[1], r[2], r[3])
                                .map_err(|e| err(e.to_string()))?;
                        }
                        "frames" => {
                            let r: Vec<u64> =
                                value.split_whitespace().map(int).collect::<Result<_>>()?;
                            if r.len() != 2 {
                                return Err(err("`frames` expects `from to`".into()));
                            }
                            o.from = r[0] as u32;
                            o.to = r[1].min(u32::MAX as u64) as u32;
                        }
                        _ => return Err(err(format!("unknown occluder key `{key}`"))),
                    }
                }
                Section::Agent => {
                    let a = s.agents.last_mut().unwrap();
                    match key {
                        "id" => a.identity = int(value)?,
                        "class" => a.class_id = int(value)? as u32,
                        "size" => {
                            let v = nums(value, 2)?;
                            a.size = (v[0], v[1]);
                        }
                        "colors" => {
                            let v = nums(value, 2)?;
                            a.colors = [v[0] as usize, v[1] as usize];
                        }
                        "style" => a.style = int(value)? as usize,
                        "path" => {
                            a.waypoints = value
                                .split_whitespace()
                                .map(|tok| {
                                    let (f, xy) = tok
                                        .split_once(':')
                                        .ok_or_else(|| err(format!("bad waypoint `{tok}`")))?;
                                    let (x, y) = xy
                                        .split_once(',')
                                        .ok_or_else(|| err(format!("bad waypoint `{tok}`")))?;
                                    Ok((int(f)? as u32, num(x)?, num(y)?))
                                })
                                .collect::<Result<_>>()?;
                        }
                        _ => return Err(err(format!("unknown agent key `{key}`"))),
                    }
                }
            }
        }
        if s.frames == 0 {
            s.frames = s.agents.iter().map(AgentSpec::despawn).max().unwrap_or(0);
        }
        s.validate()?;
        Ok(s)
    }
}
