//! prepare → train → evaluate for two frameworks on the synthetic dataset,
//! then late fusion and a summary table.

use respkit::dataio::{write_fixture_dataset, Split};
use respkit::features::SpectrogramKind;
use respkit::pipeline::{
    cmd_evaluate, cmd_fuse, cmd_prepare, cmd_report, cmd_train, ExperimentConfig, ModelConfig, ProviderConfig,
};
use respkit::train::TrainConfig;

fn main() -> anyhow::Result<()> {
    let root = tempfile::tempdir()?;
    let data = write_fixture_dataset(&root.path().join("data"), 0)?;
    let config = |run: &str, model: ModelConfig| ExperimentConfig {
        dataset_dir: data.audio_dir.clone(),
        split_file: data.split_file.clone(),
        cache_dir: Some(root.path().join("cache")),
        features: vec![SpectrogramKind::Wavelet, SpectrogramKind::LogMel],
        model,
        train: TrainConfig {
            epochs: 2,
            batch_size: 4,
            ..TrainConfig::default()
        },
        augment: None,
        out_dir: root.path().join(run),
        seed: 1,
    };
    let inception = config("inc01", ModelConfig::Inception { spec: "Inc-01".into() });
    let prepared = cmd_prepare(&inception)?;
    println!("prepared {} cycles ({} train, {} test)", prepared.cycles, prepared.train_cycles, prepared.test_cycles);

    let head = config(
        "transfer",
        ModelConfig::Embedding {
            provider: ProviderConfig::Fixture { dim: 2048, seed: 0 },
        },
    );
    let mut predictions = Vec::new();
    let mut reports = Vec::new();
    for cfg in [&inception, &head] {
        let trained = cmd_train(cfg)?;
        let eval = cmd_evaluate(cfg, Split::Test)?;
        println!("{}: {} parameters, test ICB {:.1}", cfg.out_dir.display(), trained.param_count, eval.report.icb);
        predictions.push(eval.predictions);
        reports.push(cfg.out_dir.join("report_test.json"));
    }
    let fused_cfg = config("fused", inception.model.clone());
    cmd_fuse(&fused_cfg, &predictions, Split::Test)?;
    reports.push(fused_cfg.out_dir.join("report_fused_test.json"));
    print!("{}", cmd_report(&reports, root.path())?);
    Ok(())
}
