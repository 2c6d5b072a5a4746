//! Frozen embeddings from a provider, then the MLP head trained on them.

use ndarray::Array2;
use respkit::augment::SoftLabel;
use respkit::dataio::Label;
use respkit::features::{Spectrogram, SpectrogramKind};
use respkit::models::{fixture_embedding_provider, EmbeddingProvider};
use respkit::train::{train_mlp_on_embeddings, LabeledSpectrogram, TrainConfig};

fn main() -> anyhow::Result<()> {
    let provider = fixture_embedding_provider(2048, 0)?;
    let set: Vec<LabeledSpectrogram> = (0..12)
        .map(|i| {
            let v = Array2::from_shape_fn((128, 1000), |(b, f)| ((b * (i + 1) + f) % 13) as f32 / 13.0);
            Ok(LabeledSpectrogram {
                spectrogram: Spectrogram::new(v, SpectrogramKind::LogMel)?,
                label: SoftLabel::one_hot(Label::ALL[i % 4]),
            })
        })
        .collect::<respkit::Result<_>>()?;
    println!("provider width {}", provider.dim());

    let cfg = TrainConfig {
        epochs: 3,
        batch_size: 4,
        ..TrainConfig::default()
    };
    let (head, history) = train_mlp_on_embeddings(&provider, &set, &cfg)?;
    println!("head: {} parameters", head.param_count());
    for e in &history.epochs {
        println!("epoch {}: loss {:.4}", e.epoch, e.loss);
    }
    Ok(())
}
