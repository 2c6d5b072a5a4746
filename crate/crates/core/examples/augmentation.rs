//! Mixup with soft labels and time/frequency masking.

use ndarray::Array2;
use respkit::augment::{mixup_pair, sample_mixup_lambda, spec_augment, SoftLabel};
use respkit::dataio::Label;
use respkit::features::{Spectrogram, SpectrogramKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> anyhow::Result<()> {
    let a = Spectrogram::new(Array2::from_elem((124, 154), 1.0), SpectrogramKind::Wavelet)?;
    let b = Spectrogram::new(Array2::from_elem((124, 154), -1.0), SpectrogramKind::Wavelet)?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let lam = sample_mixup_lambda(0.4, &mut rng)?;
    let (x, y) = mixup_pair(&a, &SoftLabel::one_hot(Label::Crackle), &b, &SoftLabel::one_hot(Label::Wheeze), lam)?;
    println!("lambda {lam:.3}: mixed value {:.3}, soft label {:.3?}", x.values()[[0, 0]], y.probs());

    let ramp = Spectrogram::new(Array2::from_shape_fn((124, 154), |(f, t)| (f + t) as f32), SpectrogramKind::Wavelet)?;
    let masked = spec_augment(&ramp, 2, 20, 2, 10, 9)?;
    let filled = masked.values().iter().zip(ramp.values()).filter(|(m, r)| m != r).count();
    println!("masking replaced {filled} of {} cells with the mean", masked.values().len());
    Ok(())
}
