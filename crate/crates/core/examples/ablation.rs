//! Switches each cue on in turn on the `crossing_pair` scene and counts
//! identity switches over 20 seeds.
//!
//! ```text
//! cargo run --release --example ablation [-- <seeds>]
//! ```

use featuresort::metrics::{evaluate, DEFAULT_IOU_THRESHOLD};
use featuresort::{synth, track_sequence, TrackerConfig};

fn variants() -> Vec<(&'static str, TrackerConfig)> {
    let base = TrackerConfig {
        lambda_color: 0.0,
        lambda_style: 0.0,
        dir_max: f64::INFINITY,
        ..TrackerConfig::default()
    };
    vec![
        ("motion+edge", base.clone()),
        (
            "+color",
            TrackerConfig {
                lambda_color: 0.25,
                ..base.clone()
            },
        ),
        (
            "+color+style",
            TrackerConfig {
                lambda_color: 0.25,
                lambda_style: 0.25,
                ..base.clone()
            },
        ),
        (
            "+direction gate",
            TrackerConfig {
                dir_max: TrackerConfig::default().dir_max,
                ..base
            },
        ),
        ("all cues", TrackerConfig::default()),
    ]
}

fn main() -> featuresort::Result<()> {
    let seeds: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(20);
    let scene = synth::preset("crossing_pair")?;
    let runs: Vec<_> = (0..seeds)
        .map(|seed| synth::generate(&scene, seed))
        .collect::<Result<_, _>>()?;

    println!(
        "{:<16} {:>8} {:>10} {:>8} {:>8}",
        "variant", "IDs", "runs w/ IDs", "MOTA", "IDF1"
    );
    for (name, cfg) in variants() {
        let (mut ids, mut hit, mut mota, mut idf1) = (0, 0, 0.0, 0.0);
        let mut per_seed = Vec::new();
        for run in &runs {
            let (tracks, _) = track_sequence(&cfg, &run.frames)?;
            let r = evaluate(&tracks, &run.truth, DEFAULT_IOU_THRESHOLD);
            ids += r.id_switches;
            hit += usize::from(r.id_switches > 0);
            mota += r.mota;
            idf1 += r.idf1;
            per_seed.push(r.id_switches);
        }
        let n = runs.len() as f64;
        println!(
            "{name:<16} {ids:>8} {:>7}/{:<3} {:>8.4} {:>8.4}  {per_seed:?}",
            hit,
            runs.len(),
            mota / n,
            idf1 / n
        );
    }
    Ok(())
}
