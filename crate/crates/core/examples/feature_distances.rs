//! The appearance, attribute and heading distances between a track's memory
//! and incoming detections.

use featuresort::features::{
    ce_vector_distance, circular_gaussian, cosine_distance, direction_template, FeatureBank,
};
use featuresort::synth::heading_distribution;
use featuresort::{normalize_detection, BBox, Detection};

fn main() {
    println!(
        "cosine: same {:.3}, orthogonal {:.3}, opposite {:.3}",
        cosine_distance(&[1.0, 0.0], &[1.0, 0.0]),
        cosine_distance(&[1.0, 0.0], &[0.0, 1.0]),
        cosine_distance(&[1.0, 0.0], &[-1.0, 0.0])
    );

    let red_top = {
        let mut c = [0.05; 10];
        c[0] = 0.95;
        c[4] = 0.95;
        c
    };
    let blue_top = {
        let mut c = [0.05; 10];
        c[2] = 0.95;
        c[4] = 0.95;
        c
    };
    println!(
        "color CE: red vs red {:.3}, red vs blue {:.3}",
        ce_vector_distance(&red_top, &red_top),
        ce_vector_distance(&red_top, &blue_top)
    );

    println!(
        "circular gaussian peak (sigma 2): {:.5}",
        circular_gaussian(0, 0, 2.0)
    );
    let t = direction_template(0, 2.0);
    println!(
        "template around bin 0: {:?}",
        &t[..4].iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>()
    );

    // a track that has seen one eastbound pedestrian in red
    let mut bank = FeatureBank::new(30, 16, 5);
    let mut det = Detection::plain(1, BBox::new(0.0, 0.0, 40.0, 100.0).unwrap(), 0.9, 0, 4);
    det.embedding = vec![1.0, 0.2, 0.0, 0.0];
    det.color = red_top;
    det.direction = heading_distribution(0, 2.0);
    bank.stack_append(&normalize_detection(det.clone()).unwrap(), 0.8);

    println!("\nheading bin  direction distance");
    for bin in [0usize, 2, 4, 9, 18, 36] {
        let p = heading_distribution(bin, 2.0);
        println!(
            "{bin:>11}  {:.4}",
            bank.direction_distance(&p, 2.0).unwrap()
        );
    }
    det.color = blue_top;
    println!(
        "\ncolor distance to a blue detection: {:.3}",
        bank.color_distance(&det.color).unwrap()
    );
    println!(
        "edge distance to a rotated embedding: {:.3}",
        bank.edge_distance(&[0.0, 0.0, 1.0, 0.0])
    );
}
