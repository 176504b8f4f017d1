//! CLEAR-MOT and identity scores for a hand-made prediction.

use featuresort::metrics::{evaluate, DEFAULT_IOU_THRESHOLD};
use featuresort::{BBox, TrackPoint, Trajectory};

fn track(id: u64, frames: std::ops::RangeInclusive<u32>) -> Trajectory {
    Trajectory {
        track_id: id,
        class_id: 0,
        points: frames
            .map(|f| TrackPoint {
                frame: f,
                bbox: BBox::new(5.0 * f as f64, 50.0, 40.0, 100.0).unwrap(),
                conf: 1.0,
                interpolated: false,
            })
            .collect(),
        embedding_bank: vec![],
    }
}

fn main() {
    let truth = vec![track(1, 1..=10)];
    let split = vec![track(7, 1..=5), track(8, 6..=10)];
    let report = evaluate(&split, &truth, DEFAULT_IOU_THRESHOLD);
    print!("{}", report.to_text());
    println!("\nas key=value:\n{}", report.to_kv());
}
