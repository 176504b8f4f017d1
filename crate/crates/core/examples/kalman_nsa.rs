//! Follows one box with the constant-velocity filter and shows how detection
//! confidence changes how far an update pulls the estimate.

use featuresort::kalman::{self, KalmanParams};
use featuresort::BBox;

fn main() {
    let params = KalmanParams::new(1.0 / 20.0, 1.0 / 160.0);
    let start = BBox::new(100.0, 200.0, 40.0, 100.0).unwrap();
    let mut state = params.initiate(&kalman::measurement_from_bbox(&start));

    println!("frame   cx        cy       vx     (box moves +6 px/frame)");
    for frame in 1..=12u32 {
        state = kalman::predict(&state, &params);
        let truth = BBox::new(100.0 + 6.0 * frame as f64, 200.0, 40.0, 100.0).unwrap();
        state = kalman::update(&state, &kalman::measurement_from_bbox(&truth), 0.8, &params).state;
        println!(
            "{frame:>5} {:>8.2} {:>8.2} {:>7.3}",
            state.mean[0], state.mean[1], state.mean[4]
        );
    }

    // same prior, one outlying measurement, varying confidence
    let prior = kalman::predict(&state, &params);
    let outlier = kalman::measurement_from_bbox(&BBox::new(300.0, 200.0, 40.0, 100.0).unwrap());
    println!(
        "\nconf  -> posterior cx (prior {:.2}, detection {:.2})",
        prior.mean[0], outlier[0]
    );
    for conf in [0.0, 0.3, 0.6, 0.9, 1.0] {
        let post = kalman::update(&prior, &outlier, conf, &params).state;
        println!("{conf:.1}   -> {:.2}", post.mean[0]);
    }
}
