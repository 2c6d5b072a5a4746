//! The cache environment variable wins over the configured location. Kept in
//! its own test binary so no other test sees the variable.

use respkit::dataio::write_fixture_dataset;
use respkit::features::SpectrogramKind;
use respkit::pipeline::{cmd_prepare, read_manifest, ExperimentConfig, ModelConfig, CACHE_ENV};
use respkit::train::TrainConfig;

#[test]
fn environment_overrides_configured_cache_dir() {
    let root = tempfile::tempdir().unwrap();
    let data = write_fixture_dataset(&root.path().join("data"), 2).unwrap();
    let cfg = ExperimentConfig {
        dataset_dir: data.audio_dir.clone(),
        split_file: data.split_file.clone(),
        cache_dir: Some(root.path().join("configured")),
        features: vec![SpectrogramKind::LogMel],
        model: ModelConfig::Inception { spec: "Inc-01".into() },
        train: TrainConfig::default(),
        augment: None,
        out_dir: root.path().join("out"),
        seed: 0,
    };
    assert_eq!(cfg.cache_dir(), root.path().join("configured"));

    let overridden = root.path().join("from_env");
    std::env::set_var(CACHE_ENV, &overridden);
    let summary = cmd_prepare(&cfg).unwrap();
    std::env::remove_var(CACHE_ENV);

    assert_eq!(summary.cache_dir, overridden);
    assert_eq!(read_manifest(&overridden).unwrap().len(), data.cycles);
    assert!(!root.path().join("configured").exists());
    assert_eq!(cfg.cache_dir(), root.path().join("configured"));
}
