//! A few optimization steps of Inc-01 on synthetic spectrograms, with an
//! epoch hook that prints progress.

use std::ops::ControlFlow;

use ndarray::Array2;
use respkit::augment::{AugmentConfig, SoftLabel};
use respkit::dataio::Label;
use respkit::features::{Spectrogram, SpectrogramKind};
use respkit::models::{build_inception_net, InceptionSpec, Network};
use respkit::train::{train_model_with, EpochStats, LabeledSpectrogram, TrainConfig};

fn main() -> anyhow::Result<()> {
    // Each class is a horizontal band at its own height.
    let set: Vec<LabeledSpectrogram> = (0..8)
        .map(|i| {
            let c = i % 4;
            let v = Array2::from_shape_fn((124, 154), |(y, x)| {
                let band = if y / 31 == c { 1.0 } else { 0.0 };
                band + 0.01 * ((x * 7 + y * 3 + i) % 11) as f32
            });
            Ok(LabeledSpectrogram {
                spectrogram: Spectrogram::new(v, SpectrogramKind::Wavelet)?,
                label: SoftLabel::one_hot(Label::ALL[c]),
            })
        })
        .collect::<respkit::Result<_>>()?;

    let net = build_inception_net(&InceptionSpec::inc01(), 0)?;
    println!("Inc-01: {} trainable parameters", net.param_count());
    let cfg = TrainConfig {
        epochs: 3,
        batch_size: 4,
        learning_rate: 1e-3,
        ..TrainConfig::default()
    };
    let augment = AugmentConfig::for_kind(SpectrogramKind::Wavelet);
    let mut hook = |s: &EpochStats, _: &Network| {
        println!("epoch {}: kl {:.4} reg {:.4} ({} steps, {:.1}s)", s.epoch, s.kl, s.reg, s.steps, s.seconds);
        ControlFlow::Continue(())
    };
    let (_, history) = train_model_with(net, &set, &cfg, &augment, &mut hook)?;
    println!("{} steps in total", history.total_steps());
    Ok(())
}
