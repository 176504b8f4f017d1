//! Minimum-cost assignment on a rectangular matrix.

use featuresort::lap::{assignment_cost, linear_sum_assignment};

fn main() {
    // three tracks, four detections
    let cost = [
        4.0, 1.0, 3.0, 9.0, //
        2.0, 0.5, 5.0, 9.0, //
        3.0, 2.0, 2.0, 1.0,
    ];
    let pairs = linear_sum_assignment(&cost, 3, 4);
    for (r, c) in &pairs {
        println!("track {r} -> detection {c} (cost {})", cost[r * 4 + c]);
    }
    println!("total {}", assignment_cost(&cost, 4, &pairs));
}
