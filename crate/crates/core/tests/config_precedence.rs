use std::fs;

use featuresort::config::KEYS;
use featuresort::Config;
use tempfile::tempdir;

/// `(key, value written to the file, value given on the command line)`.
const SAMPLES: &[(&str, &str, &str)] = &[
    ("tracker.lambda_motion", "0.2", "0.3"),
    ("tracker.lambda_edge", "0.5", "0.6"),
    ("tracker.lambda_color", "0.1", "0.15"),
    ("tracker.lambda_style", "0.05", "0.35"),
    ("tracker.iou_min", "0.3", "0.35"),
    ("tracker.dir_max", "0.2", "0.25"),
    ("tracker.d_max", "500", "600"),
    ("tracker.epsilon", "0.01", "0.02"),
    ("tracker.alpha", "0.7", "0.9"),
    ("tracker.age_max", "12", "30"),
    ("tracker.conf_min", "0.4", "0.6"),
    ("tracker.stack_len", "10", "20"),
    ("tracker.sigma_dir", "3", "1.5"),
    ("tracker.n_init", "2", "4"),
    ("tracker.embedding_dim", "64", "256"),
    ("tracker.frame_width", "1280", "640"),
    ("tracker.frame_height", "720", "480"),
    ("tracker.snapshot_every", "3", "7"),
    ("tracker.bank_len", "8", "12"),
    ("tracker.std_weight_position", "0.1", "0.02"),
    ("tracker.std_weight_velocity", "0.01", "0.001"),
    ("tracker.matching", "vanilla", "vanilla"),
    ("gsp.enabled", "false", "true"),
    ("gsp.max_gap", "10", "15"),
    ("gsp.length_scale", "5", "8"),
    ("gsp.signal_var", "100", "2500"),
    ("gsp.noise_var", "2", "4"),
    ("link.enabled", "false", "true"),
    ("link.temporal_max", "10", "30"),
    ("link.spatial_max", "50", "90"),
    ("link.accept_sim", "0.8", "0.95"),
    ("link.bank_len", "4", "32"),
    ("synth.seed", "3", "11"),
    ("synth.frames", "50", "75"),
];

#[test]
fn every_key_has_a_sample() {
    for key in KEYS {
        assert!(SAMPLES.iter().any(|s| s.0 == *key), "no sample for {key}");
    }
    assert_eq!(SAMPLES.len(), KEYS.len());
}

#[test]
fn command_line_beats_file_beats_default() {
    let dir = tempdir().unwrap();
    let defaults = Config::default();
    for &(key, file_value, cli_value) in SAMPLES {
        let path = dir.path().join("cfg.txt");
        fs::write(
            &path,
            format!("# precedence for {key}\n{key} = {file_value}\n"),
        )
        .unwrap();

        let only_default = Config::load(None, &[]).unwrap();
        assert_eq!(only_default.get(key), defaults.get(key), "{key}");

        let from_file = Config::load(Some(&path), &[]).unwrap();
        let mut expected = Config::default();
        expected.set(key, file_value).unwrap();
        assert_eq!(from_file.get(key), expected.get(key), "{key} from file");

        let from_cli = Config::load(Some(&path), &[format!("{key}={cli_value}")]).unwrap();
        expected.set(key, cli_value).unwrap();
        assert_eq!(
            from_cli.get(key),
            expected.get(key),
            "{key} from command line"
        );

        // keys not mentioned keep their defaults
        for other in KEYS.iter().filter(|k| **k != key) {
            assert_eq!(from_cli.get(other), defaults.get(other), "{other} leaked");
        }
    }
}

#[test]
fn bad_file_values_name_the_line() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("cfg.txt");
    fs::write(&path, "tracker.alpha = 0.5\n\ntracker.age_max = soon\n").unwrap();
    let err = Config::load(Some(&path), &[]).unwrap_err().to_string();
    assert!(err.contains(":3:"), "{err}");
}

#[test]
fn invalid_combination_is_rejected_after_overrides() {
    assert!(Config::load(None, &["tracker.alpha=1.5".into()]).is_err());
    assert!(Config::load(None, &["tracker.matching=cascade".into()]).is_err());
    assert!(Config::load(None, &["no_section=1".into()]).is_err());
}
