use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

fn featuresort(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_featuresort"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn full_pipeline_through_the_binary() {
    let dir = tempdir().unwrap();
    let d = dir.path();
    let seq = d.join("seq");
    let out = featuresort(&[
        "synth",
        "two_class",
        "--out",
        s(&seq),
        "--seed",
        "5",
        "--frames",
        "80",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let online = d.join("online.txt");
    let out = featuresort(&["track", s(&seq.join("det.txt")), "--out", s(&online)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("tracks over 80 frames"));

    let post = d.join("post.txt");
    let out = featuresort(&["postprocess", s(&online), "--out", s(&post)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let report = d.join("report.txt");
    let out = featuresort(&[
        "eval",
        s(&post),
        s(&seq.join("gt.txt")),
        "--out",
        s(&report),
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("MOTA"));
    assert!(fs::read_to_string(&report).unwrap().contains("idf1="));
}

#[test]
fn several_inputs_fan_out_to_a_directory() {
    let dir = tempdir().unwrap();
    let d = dir.path();
    for (name, seed) in [("a", "1"), ("b", "2"), ("c", "3")] {
        let out = featuresort(&[
            "synth",
            "two_class",
            "--out",
            s(&d.join(name)),
            "--seed",
            seed,
            "--frames",
            "40",
        ]);
        assert!(out.status.success());
    }
    let inputs: Vec<String> = ["a", "b", "c"]
        .iter()
        .map(|n| d.join(n).join("det.txt").to_string_lossy().into_owned())
        .collect();
    let tracks = d.join("tracks");
    let mut args = vec!["track", "--jobs", "3", "--out", s(&tracks)];
    args.extend(inputs.iter().map(String::as_str));
    let out = featuresort(&args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for n in ["a", "b", "c"] {
        assert!(d.join("tracks").join(format!("{n}.txt")).exists());
    }
}

#[test]
fn exit_codes() {
    let dir = tempdir().unwrap();
    // usage
    assert_eq!(featuresort(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(featuresort(&["track", "--out", "x"]).status.code(), Some(1));
    assert_eq!(
        featuresort(&[
            "synth",
            "two_class",
            "--out",
            s(dir.path()),
            "--set",
            "tracker.alpha=7"
        ])
        .status
        .code(),
        Some(1)
    );
    // data
    let out = featuresort(&["synth", "mystery", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("crossing_pair"));

    let det = dir.path().join("det.txt");
    fs::write(&det, "1,-1,0,0,10,10,0.9,0\n").unwrap();
    let out = featuresort(&["track", s(&det), "--out", s(&dir.path().join("o.txt"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sidecar"));

    assert_eq!(featuresort(&["--help"]).status.code(), Some(0));
}

#[test]
fn config_file_and_overrides_reach_the_pipeline() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("cfg.txt");
    fs::write(&cfg, "synth.frames = 30\nsynth.seed = 4\n").unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(
        featuresort(&["synth", "two_class", "--config", s(&cfg), "--out", s(&a)])
            .status
            .success()
    );
    // --frames beats the file
    assert!(featuresort(&[
        "synth",
        "two_class",
        "--config",
        s(&cfg),
        "--frames",
        "20",
        "--out",
        s(&b)
    ])
    .status
    .success());
    let last_frame = |p: &Path| -> u32 {
        fs::read_to_string(p.join("gt.txt"))
            .unwrap()
            .lines()
            .map(|l| l.split(',').next().unwrap().parse::<u32>().unwrap())
            .max()
            .unwrap()
    };
    assert_eq!(last_frame(&a), 30);
    assert_eq!(last_frame(&b), 20);
}
