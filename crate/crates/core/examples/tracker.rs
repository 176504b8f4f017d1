//! Online tracking of a generated two-class scene, printing track births and
//! retirements as they happen.

use featuresort::{synth, TrackStatus, Tracker, TrackerConfig};

fn main() -> featuresort::Result<()> {
    let scene = synth::preset("two_class")?;
    let run = synth::generate(&scene, 3)?;
    let mut tracker = Tracker::new(TrackerConfig::default())?;
    let mut confirmed = std::collections::BTreeSet::new();

    for (i, dets) in run.frames.iter().enumerate() {
        let frame = i as u32 + 1;
        for done in tracker.step(frame, dets)? {
            println!(
                "frame {frame:>3}: track {} (class {}) retired after {} points",
                done.track_id,
                done.class_id,
                done.points.len()
            );
        }
        for t in tracker.tracks() {
            if t.status == TrackStatus::Confirmed && confirmed.insert(t.track_id) {
                println!(
                    "frame {frame:>3}: track {} confirmed (class {})",
                    t.track_id, t.class_id
                );
            }
        }
    }
    let log_len = tracker.match_log().len();
    let remaining = tracker.finish();
    println!(
        "{} tracks alive at the end, {log_len} matches logged",
        remaining.len()
    );
    Ok(())
}
