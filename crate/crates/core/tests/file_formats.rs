use std::fs;

use featuresort::io::{attach_banks, read_trajectories, write_trajectories};
use featuresort::{BBox, TrackPoint, Trajectory};
use proptest::prelude::*;
use tempfile::tempdir;

/// Values on the 4-decimal grid the trajectory file stores.
fn grid(lo: i64, hi: i64) -> impl Strategy<Value = f64> {
    (lo * 10_000..hi * 10_000).prop_map(|v| v as f64 / 10_000.0)
}

fn trajectory(id: u64) -> impl Strategy<Value = Trajectory> {
    (
        0u32..3,
        proptest::collection::btree_set(1u32..400, 1..25),
        proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 6), 0..4),
    )
        .prop_flat_map(move |(class_id, frames, bank)| {
            let n = frames.len();
            (
                Just(class_id),
                Just(frames),
                Just(bank),
                proptest::collection::vec(
                    (
                        grid(-50, 2000),
                        grid(-50, 1100),
                        grid(1, 300),
                        grid(1, 400),
                        grid(0, 1),
                        any::<bool>(),
                    ),
                    n,
                ),
            )
        })
        .prop_map(move |(class_id, frames, bank, boxes)| Trajectory {
            track_id: id,
            class_id,
            points: frames
                .into_iter()
                .zip(boxes)
                .map(|(frame, (x, y, w, h, conf, interpolated))| TrackPoint {
                    frame,
                    bbox: BBox::new(x, y, w, h).unwrap(),
                    conf,
                    interpolated,
                })
                .collect(),
            embedding_bank: bank,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trajectory_files_round_trip(
        a in trajectory(1), b in trajectory(4), c in trajectory(9)
    ) {
        let dir = tempdir().unwrap();
        let path = dir.path().join("tracks.txt");
        let trajs = vec![a, b, c];
        write_trajectories(&path, &trajs).unwrap();
        let mut back = read_trajectories(&path).unwrap();
        attach_banks(&path, &mut back).unwrap();
        prop_assert_eq!(&back, &trajs);

        // rows sorted by (frame, id) with unique keys
        let text = fs::read_to_string(&path).unwrap();
        let keys: Vec<(u32, u64)> = text
            .lines()
            .map(|l| {
                let mut f = l.split(',');
                (f.next().unwrap().parse().unwrap(), f.next().unwrap().parse().unwrap())
            })
            .collect();
        prop_assert!(keys.windows(2).all(|w| w[0] < w[1]));
    }
}
