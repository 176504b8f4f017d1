//! Lists the built-in scenes, then renders one and prints its scenario file.

use featuresort::synth::{self, preset_scenarios};

fn main() -> featuresort::Result<()> {
    for (name, scene) in preset_scenarios() {
        let out = synth::generate(&scene, 0)?;
        println!(
            "{name:<20} {:>2} agents {:>5} frames {:>6} detections",
            scene.agents.len(),
            scene.frames,
            out.detection_count()
        );
    }
    let scene = synth::preset("occlusion_corridor")?;
    println!("\n{}", synth::to_spec(&scene));
    Ok(())
}
