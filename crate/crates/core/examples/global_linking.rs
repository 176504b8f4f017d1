//! Offline linking of track fragments by appearance bank similarity.

use featuresort::postprocess::global_link;
use featuresort::{BBox, LinkConfig, TrackPoint, Trajectory};

fn fragment(id: u64, frames: std::ops::RangeInclusive<u32>, bank: Vec<f64>) -> Trajectory {
    Trajectory {
        track_id: id,
        class_id: 0,
        points: frames
            .map(|f| TrackPoint {
                frame: f,
                bbox: BBox::new(3.0 * f as f64, 400.0, 40.0, 100.0).unwrap(),
                conf: 0.9,
                interpolated: false,
            })
            .collect(),
        embedding_bank: vec![bank],
    }
}

fn main() {
    let person_a = vec![0.8, 0.6, 0.0];
    let person_b = vec![0.0, 0.6, 0.8];
    let trajs = vec![
        fragment(1, 1..=40, person_a.clone()),
        fragment(2, 48..=90, person_a.clone()),
        fragment(3, 95..=120, person_a),
        // same place and time gap as fragment 2, different person
        fragment(4, 46..=60, person_b),
    ];
    let out = global_link(&trajs, &LinkConfig::default());
    for m in &out.merges {
        println!(
            "merged {} into {}: gap {} frames, {:.1} px apart, similarity {:.3}",
            m.absorbed_id, m.kept_id, m.frame_gap, m.center_distance, m.similarity
        );
    }
    for t in &out.trajectories {
        println!(
            "track {}: frames {}-{}",
            t.track_id,
            t.first_frame().unwrap(),
            t.last_frame().unwrap()
        );
    }
}
