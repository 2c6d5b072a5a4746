//! Log-mel and wavelet front ends on a synthetic 10 s cycle.

use std::f32::consts::PI;

use respkit::dataio::AudioClip;
use respkit::features::{logmel, wavelet_center_frequencies, wavelet_scalogram, WaveletConfig, PIPELINE_RATE};

fn main() -> anyhow::Result<()> {
    let rate = PIPELINE_RATE;
    // A 400 Hz tone with a short 2 kHz burst in the middle.
    let samples: Vec<f32> = (0..10 * rate as usize)
        .map(|i| {
            let t = i as f32 / rate as f32;
            let burst = if (4.0..4.5).contains(&t) { 0.5 * (2.0 * PI * 2000.0 * t).sin() } else { 0.0 };
            0.3 * (2.0 * PI * 400.0 * t).sin() + burst
        })
        .collect();
    let clip = AudioClip::new(samples, rate)?;

    let mel = logmel(&clip)?;
    let (bins, frames) = mel.values().dim();
    println!("log-mel: {bins} bins x {frames} frames, mean {:.2}", mel.mean());

    let cwt = wavelet_scalogram(&clip)?;
    let (scales, frames) = cwt.values().dim();
    println!("wavelet: {scales} scales x {frames} frames, mean {:.2}", cwt.mean());

    let centres = wavelet_center_frequencies(&WaveletConfig::default());
    let loudest = |frame: usize| {
        (0..scales)
            .max_by(|&a, &b| cwt.values()[[a, frame]].total_cmp(&cwt.values()[[b, frame]]))
            .unwrap()
    };
    for (label, frame) in [("tone only", 20), ("during burst", 65)] {
        println!("{label}: strongest scale centred at {:.0} Hz", centres[loudest(frame)]);
    }
    Ok(())
}
