//! Gap filling and Gaussian-process smoothing of a noisy, gappy track.

use featuresort::postprocess::{gsp_smooth, linear_fill};
use featuresort::{BBox, GspConfig, TrackPoint, Trajectory};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn truth_x(f: u32) -> f64 {
    let t = f as f64;
    200.0 + 4.0 * t + 30.0 * (t / 12.0).sin()
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let noise = Normal::new(0.0, 2.0).unwrap();
    let points = (1..=80u32)
        .filter(|f| !(30..=41).contains(f))
        .map(|f| TrackPoint {
            frame: f,
            bbox: BBox::new(truth_x(f) + noise.sample(&mut rng), 300.0, 40.0, 100.0).unwrap(),
            conf: 0.9,
            interpolated: false,
        })
        .collect();
    let raw = Trajectory {
        track_id: 1,
        class_id: 0,
        points,
        embedding_bank: vec![],
    };

    let cfg = GspConfig::default();
    let filled = linear_fill(&raw, cfg.max_gap);
    let smoothed = gsp_smooth(&filled, &cfg);

    let rmse = |t: &Trajectory, only_filled: bool| {
        let errs: Vec<f64> = t
            .points
            .iter()
            .filter(|p| !only_filled || p.interpolated)
            .map(|p| (p.bbox.x - truth_x(p.frame)).powi(2))
            .collect();
        (errs.iter().sum::<f64>() / errs.len() as f64).sqrt()
    };
    println!(
        "points: raw {}, after fill {}",
        raw.points.len(),
        filled.points.len()
    );
    println!(
        "x RMSE over all frames:    linear {:.2} px, smoothed {:.2} px",
        rmse(&filled, false),
        rmse(&smoothed, false)
    );
    println!(
        "x RMSE over filled frames: linear {:.2} px, smoothed {:.2} px",
        rmse(&filled, true),
        rmse(&smoothed, true)
    );
}
