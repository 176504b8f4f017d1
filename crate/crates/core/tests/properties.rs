use approx::assert_abs_diff_eq;
use featuresort::features::{ce_vector_distance, cosine_distance, FeatureBank};
use featuresort::kalman::{self, KalmanParams, Measurement};
use featuresort::lap::linear_sum_assignment;
use featuresort::postprocess::{global_link, gsp_smooth, linear_fill};
use featuresort::types::EPS_PROB;
use featuresort::{BBox, Detection, GspConfig, LinkConfig, TrackPoint, Trajectory};
use proptest::prelude::*;

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn nonzero_vec(d: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.0f64..1.0, d)
        .prop_filter("non-zero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-6)
}

proptest! {
    #[test]
    fn assignment_is_a_partial_permutation(
        rows in 0usize..9, cols in 0usize..9, seed in proptest::collection::vec(0.0f64..50.0, 81)
    ) {
        let cost = &seed[..rows * cols];
        let pairs = linear_sum_assignment(cost, rows, cols);
        prop_assert_eq!(pairs.len(), rows.min(cols));
        let mut r: Vec<_> = pairs.iter().map(|p| p.0).collect();
        let mut c: Vec<_> = pairs.iter().map(|p| p.1).collect();
        r.dedup();
        c.sort_unstable();
        c.dedup();
        prop_assert_eq!(r.len(), pairs.len());
        prop_assert_eq!(c.len(), pairs.len());
    }

    #[test]
    fn cosine_distance_is_bounded(a in nonzero_vec(8), b in nonzero_vec(8)) {
        let (a, b) = (unit(a), unit(b));
        let d = cosine_distance(&a, &b);
        prop_assert!((0.0..=2.0).contains(&d));
        prop_assert!(cosine_distance(&a, &a) < 1e-12);
    }

    #[test]
    fn cross_entropy_is_minimized_at_the_label(
        bits in proptest::collection::vec(any::<bool>(), 10),
        other in proptest::collection::vec(0.0f64..1.0, 10)
    ) {
        let label: Vec<f64> = bits.iter().map(|&b| if b { 1.0 - EPS_PROB } else { EPS_PROB }).collect();
        let at_label = ce_vector_distance(&label, &label);
        prop_assert!(at_label >= 0.0);
        prop_assert!(at_label <= ce_vector_distance(&label, &other) + 1e-12);
    }

    #[test]
    fn stacks_never_exceed_their_length(sl in 1usize..6, appends in 0usize..20) {
        let mut bank = FeatureBank::new(sl, 4, 2);
        for i in 0..appends {
            let mut d = Detection::plain(i as u32 + 1, BBox::new(0.0, 0.0, 1.0, 1.0).unwrap(), 0.9, 0, 3);
            d.embedding = unit(vec![1.0, i as f64, 0.5]);
            bank.stack_append(&d, 0.8);
            prop_assert!(bank.colors.len() <= sl && bank.styles.len() <= sl);
            prop_assert!(bank.snapshots.len() <= 4);
        }
    }

    #[test]
    fn kalman_covariance_stays_symmetric_psd(
        x in 0.0f64..1800.0, y in 0.0f64..1000.0, h in 20.0f64..300.0,
        steps in proptest::collection::vec((-15.0f64..15.0, -15.0f64..15.0, 0.0f64..=1.0), 1..30)
    ) {
        let params = KalmanParams::new(1.0 / 20.0, 1.0 / 160.0);
        let mut s = params.initiate(&Measurement::new(x, y, 0.4, h));
        for (dx, dy, conf) in steps {
            s = kalman::predict(&s, &params);
            let z = Measurement::new(s.mean[0] + dx, s.mean[1] + dy, 0.4, h);
            s = kalman::update(&s, &z, conf, &params).state;
            prop_assert_eq!(s.covariance, s.covariance.transpose());
            prop_assert!(s.covariance.symmetric_eigenvalues().min() > -1e-9);
        }
    }

    #[test]
    fn smoothing_twice_moves_less_than_once(
        noise in proptest::collection::vec(-3.0f64..3.0, 30..60), slope in -4.0f64..4.0
    ) {
        let points = noise
            .iter()
            .enumerate()
            .map(|(i, n)| TrackPoint {
                frame: i as u32 + 1,
                bbox: BBox::new(500.0 + slope * i as f64 + n, 300.0, 40.0, 100.0).unwrap(),
                conf: 1.0,
                interpolated: false,
            })
            .collect();
        let t = Trajectory { track_id: 1, class_id: 0, points, embedding_bank: vec![] };
        let cfg = GspConfig::default();
        let once = gsp_smooth(&t, &cfg);
        let twice = gsp_smooth(&once, &cfg);
        let step = |a: &Trajectory, b: &Trajectory| -> f64 {
            a.points.iter().zip(&b.points).map(|(p, q)| (p.bbox.x - q.bbox.x).powi(2)).sum()
        };
        prop_assert!(step(&once, &twice) < step(&t, &once));
    }

    #[test]
    fn linking_conserves_points(
        cut in 5u32..40, gap in 1u32..25, dx in 0.0f64..120.0
    ) {
        let mk = |id: u64, frames: std::ops::RangeInclusive<u32>, x0: f64| Trajectory {
            track_id: id,
            class_id: 0,
            points: frames
                .map(|f| TrackPoint {
                    frame: f,
                    bbox: BBox::new(x0 + 2.0 * f as f64, 100.0, 40.0, 100.0).unwrap(),
                    conf: 0.9,
                    interpolated: false,
                })
                .collect(),
            embedding_bank: vec![vec![1.0, 0.0]],
        };
        let a = mk(1, 1..=cut, 0.0);
        let b = mk(2, cut + gap..=cut + gap + 30, dx);
        let cfg = LinkConfig::default();
        let out = global_link(&[a.clone(), b.clone()], &cfg);
        let total: usize = out.trajectories.iter().map(|t| t.points.len()).sum();
        prop_assert_eq!(total, a.points.len() + b.points.len());
        for m in &out.merges {
            prop_assert!(m.frame_gap >= 1 && m.frame_gap <= cfg.temporal_max);
            prop_assert!(m.center_distance <= cfg.spatial_max);
        }
        let filled = linear_fill(&out.trajectories[0], 20);
        prop_assert!(filled.is_ordered());
    }
}

#[test]
fn gated_pair_cost_is_d_max_plus_epsilon() {
    use featuresort::association::{combined_cost, Track};
    use featuresort::TrackerConfig;
    let cfg = TrackerConfig {
        embedding_dim: 2,
        ..TrackerConfig::default()
    };
    let params = KalmanParams::new(cfg.std_weight_position, cfg.std_weight_velocity);
    let near = Detection::plain(1, BBox::new(0.0, 0.0, 40.0, 100.0).unwrap(), 0.9, 0, 2);
    let far = Detection::plain(1, BBox::new(900.0, 0.0, 40.0, 100.0).unwrap(), 0.9, 0, 2);
    let track = Track::new(1, &near, &cfg, &params);
    let pc = combined_cost(&track, &far, &cfg).unwrap();
    assert!(!pc.admissible);
    assert_abs_diff_eq!(pc.value, cfg.d_max + cfg.epsilon);
}
