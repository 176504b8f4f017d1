//! The file-based pipeline: synthesize, track, post-process and score, all
//! under a temporary directory.

use featuresort::io::{cmd_eval, cmd_postprocess, cmd_synth, cmd_track};
use featuresort::Config;

fn main() -> featuresort::Result<()> {
    let dir = std::env::temp_dir().join("featuresort-pipeline");
    let mut cfg = Config::default();
    cfg.synth.seed = 7;

    let files = cmd_synth("occlusion_corridor", &dir, &cfg)?;
    let online = dir.join("online.txt");
    let post = dir.join("post.txt");
    println!(
        "track:       {}",
        cmd_track(&files.detections, &cfg, &online)?
    );
    println!("postprocess: {}", cmd_postprocess(&online, &cfg, &post)?);

    let before = cmd_eval(&online, &files.truth, None)?;
    let after = cmd_eval(&post, &files.truth, Some(&dir.join("report.txt")))?;
    println!(
        "online: MOTA {:.3} IDF1 {:.3} IDs {}",
        before.mota, before.idf1, before.id_switches
    );
    println!(
        "post:   MOTA {:.3} IDF1 {:.3} IDs {}",
        after.mota, after.idf1, after.id_switches
    );
    println!("files in {}", dir.display());
    Ok(())
}
