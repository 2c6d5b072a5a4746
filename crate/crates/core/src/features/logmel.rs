use ndarray::Array2;
use realfft::RealFftPlanner;

use super::{check_cycle_clip, Spectrogram, SpectrogramKind, LOG_FLOOR, PIPELINE_RATE};
use crate::dataio::AudioClip;
use crate::error::Result;

/// Short-time Fourier and mel settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogMelConfig {
    pub sample_rate: u32,
    pub n_fft: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub f_min: f64,
    pub f_max: f64,
    pub frames: usize,
}

impl Default for LogMelConfig {
    fn default() -> Self {
        Self {
            sample_rate: PIPELINE_RATE,
            n_fft: 1024,
            hop: 320,
            n_mels: 128,
            f_min: 50.0,
            f_max: 14_000.0,
            frames: 1000,
        }
    }
}

/// Slaney mel scale: linear below 1 kHz, logarithmic above.
fn hz_to_mel(f: f64) -> f64 {
    const F_SP: f64 = 200.0 / 3.0;
    const MIN_LOG_HZ: f64 = 1000.0;
    let min_log_mel = MIN_LOG_HZ / F_SP;
    let logstep = 6.4f64.ln() / 27.0;
    if f >= MIN_LOG_HZ {
        min_log_mel + (f / MIN_LOG_HZ).ln() / logstep
    } else {
        f / F_SP
    }
}

fn mel_to_hz(m: f64) -> f64 {
    const F_SP: f64 = 200.0 / 3.0;
    const MIN_LOG_HZ: f64 = 1000.0;
    let min_log_mel = MIN_LOG_HZ / F_SP;
    let logstep = 6.4f64.ln() / 27.0;
    if m >= min_log_mel {
        MIN_LOG_HZ * (logstep * (m - min_log_mel)).exp()
    } else {
        F_SP * m
    }
}

/// Triangular mel filters with area normalization, `[n_mels, n_fft/2 + 1]`.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    pub weights: Array2<f64>,
    /// `n_mels + 2` band edges in Hz; filter `i` peaks at `edges[i + 1]`.
    pub edges: Vec<f64>,
}

pub fn mel_filterbank(cfg: &LogMelConfig) -> MelFilterbank {
    let n_bins = cfg.n_fft / 2 + 1;
    let (lo, hi) = (hz_to_mel(cfg.f_min), hz_to_mel(cfg.f_max));
    let edges: Vec<f64> = (0..cfg.n_mels + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (cfg.n_mels + 1) as f64))
        .collect();
    let bin_hz = cfg.sample_rate as f64 / cfg.n_fft as f64;
    let weights = Array2::from_shape_fn((cfg.n_mels, n_bins), |(m, k)| {
        let f = k as f64 * bin_hz;
        let (l, c, r) = (edges[m], edges[m + 1], edges[m + 2]);
        let rising = (f - l) / (c - l);
        let falling = (r - f) / (r - c);
        rising.min(falling).max(0.0) * 2.0 / (r - l)
    });
    MelFilterbank { weights, edges }
}

/// Power spectrogram `[n_fft/2 + 1, frames]` with centered, reflect-padded
/// periodic-Hann frames.
fn power_spectrogram(x: &[f32], cfg: &LogMelConfig) -> Array2<f64> {
    let n_fft = cfg.n_fft;
    let pad = n_fft / 2;
    let n = x.len() as isize;
    let reflect = |i: isize| -> f64 {
        let mut j = i;
        if j < 0 {
            j = -j;
        }
        if j >= n {
            j = 2 * (n - 1) - j;
        }
        x[j as usize] as f64
    };
    let window: Vec<f64> = (0..n_fft)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n_fft as f64).cos())
        .collect();
    let mut planner = RealFftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n_fft);
    let mut frame = fft.make_input_vec();
    let mut spectrum = fft.make_output_vec();
    let mut out = Array2::zeros((n_fft / 2 + 1, cfg.frames));
    let available = 1 + x.len() / cfg.hop;
    for t in 0..cfg.frames {
        // Frames past the end repeat the last full frame.
        let start = t.min(available - 1) as isize * cfg.hop as isize - pad as isize;
        for (i, v) in frame.iter_mut().enumerate() {
            *v = reflect(start + i as isize) * window[i];
        }
        fft.process(&mut frame, &mut spectrum).expect("buffer sizes come from the plan");
        for (k, c) in spectrum.iter().enumerate() {
            out[[k, t]] = c.norm_sqr();
        }
    }
    out
}

/// Log-mel spectrogram with explicit settings; `clip` may have any length of
/// at least `n_fft / 2 + 1` samples.
pub fn logmel_with(clip: &AudioClip, cfg: &LogMelConfig, bank: &MelFilterbank) -> Array2<f32> {
    let power = power_spectrogram(clip.samples(), cfg);
    bank.weights.dot(&power).mapv(|e| (e + LOG_FLOOR).ln() as f32)
}

/// 128 × 1000 log-mel spectrogram of a 10 s clip at the pipeline rate:
/// 1024-point periodic Hann window, hop 320, 128 area-normalized mel bands
/// over 50 Hz – 14 kHz, natural log of energy + 1e-10.
pub fn logmel(clip: &AudioClip) -> Result<Spectrogram> {
    check_cycle_clip(clip)?;
    let cfg = LogMelConfig::default();
    let bank = mel_filterbank(&cfg);
    Spectrogram::new(logmel_with(clip, &cfg, &bank), SpectrogramKind::LogMel)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, amp: f64) -> AudioClip {
        let sr = PIPELINE_RATE as f64;
        let s = (0..320_000)
            .map(|i| (amp * (2.0 * std::f64::consts::PI * freq * i as f64 / sr).sin()) as f32)
            .collect();
        AudioClip::new(s, PIPELINE_RATE).unwrap()
    }

    #[test]
    fn mel_scale_round_trips() {
        for f in [0.0, 50.0, 700.0, 1000.0, 4000.0, 14_000.0] {
            assert!((mel_to_hz(hz_to_mel(f)) - f).abs() < 1e-9);
        }
        assert!((hz_to_mel(1000.0) - 15.0).abs() < 1e-12);
    }

    #[test]
    fn silence_is_the_log_floor() {
        let s = logmel(&AudioClip::new(vec![0.0; 320_000], PIPELINE_RATE).unwrap()).unwrap();
        let floor = (LOG_FLOOR).ln() as f32;
        assert!(s.values().iter().all(|&v| v == floor));
    }

    #[test]
    fn tone_lands_in_the_filter_covering_it() {
        // Independent oracle: Slaney mel edges from the closed-form scale,
        // then the band whose normalized triangle is largest at 1 kHz.
        let mel = |f: f64| if f < 1000.0 { 3.0 * f / 200.0 } else { 15.0 + 27.0 * (f / 1000.0).ln() / 6.4f64.ln() };
        let inv = |m: f64| if m < 15.0 { 200.0 * m / 3.0 } else { 1000.0 * (6.4f64.ln() * (m - 15.0) / 27.0).exp() };
        let (lo, hi) = (mel(50.0), mel(14_000.0));
        let edges: Vec<f64> = (0..130).map(|i| inv(lo + (hi - lo) * i as f64 / 129.0)).collect();
        let response = |m: usize| {
            let (l, c, r) = (edges[m], edges[m + 1], edges[m + 2]);
            let tri = if 1000.0 <= c { (1000.0 - l) / (c - l) } else { (r - 1000.0) / (r - c) };
            tri.max(0.0) * 2.0 / (r - l)
        };
        let expected = (0..128).max_by(|&a, &b| response(a).total_cmp(&response(b))).unwrap();

        let s = logmel(&tone(1000.0, 0.5)).unwrap();
        for t in 5..995 {
            let col = s.values().column(t);
            let arg = (0..128).max_by(|&a, &b| col[a].total_cmp(&col[b])).unwrap();
            assert_eq!(arg, expected, "frame {t}");
        }
    }

    #[test]
    fn amplitude_scaling_is_an_additive_shift() {
        let a = logmel(&tone(440.0, 0.1)).unwrap();
        let b = logmel(&tone(440.0, 0.4)).unwrap();
        let shift = (16.0f64).ln() as f32;
        let mut checked = 0;
        for (x, y) in a.values().iter().zip(b.values()) {
            if *x > -10.0 {
                assert!((y - x - shift).abs() < 1e-3, "{x} {y}");
                checked += 1;
            }
        }
        assert!(checked > 1000);
    }
}
