use ndarray::Array2;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::{check_cycle_clip, Spectrogram, SpectrogramKind, LOG_FLOOR, PIPELINE_RATE};
use crate::dataio::AudioClip;
use crate::error::Result;

/// Continuous wavelet transform settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveletConfig {
    pub sample_rate: u32,
    pub n_scales: usize,
    pub f_min: f64,
    pub f_max: f64,
    pub frames: usize,
    /// Morlet center frequency in radians.
    pub omega0: f64,
    /// Half-width of the evaluated frequency support, in Gaussian standard
    /// deviations.
    pub support: f64,
    /// Coarse-grid samples per bin of evaluated support.
    pub oversample: usize,
}

impl Default for WaveletConfig {
    fn default() -> Self {
        Self {
            sample_rate: PIPELINE_RATE,
            n_scales: 124,
            f_min: 50.0,
            f_max: PIPELINE_RATE as f64 / 2.0,
            frames: 154,
            omega0: 6.0,
            support: 6.0,
            oversample: 2,
        }
    }
}

/// Center frequency of each row, highest first (row 0 is the finest scale).
pub fn wavelet_center_frequencies(cfg: &WaveletConfig) -> Vec<f64> {
    let ratio = cfg.f_min / cfg.f_max;
    (0..cfg.n_scales)
        .map(|i| cfg.f_max * ratio.powf(i as f64 / (cfg.n_scales - 1) as f64))
        .collect()
}

/// Analytic Morlet response at angular frequency `omega` (rad/s) for the
/// scale whose peak sits at `centre` Hz. A unit-amplitude sinusoid at
/// `centre` yields a unit-magnitude coefficient.
pub(crate) fn morlet_response(omega: f64, centre: f64, omega0: f64) -> f64 {
    if omega <= 0.0 {
        return 0.0;
    }
    let scale = omega0 / (2.0 * std::f64::consts::PI * centre);
    let d = scale * omega - omega0;
    2.0 * (-0.5 * d * d).exp()
}

/// Divisors of `n` in ascending order.
fn divisors(n: usize) -> Vec<usize> {
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut d = 1;
    while d * d <= n {
        if n.is_multiple_of(d) {
            small.push(d);
            if d * d != n {
                large.push(n / d);
            }
        }
        d += 1;
    }
    small.extend(large.into_iter().rev());
    small
}

/// Scalogram with explicit settings for a clip of any length.
///
/// Each row filters the clip spectrum with the scale's Morlet response and
/// inverts only the bins inside its support, which samples the analytic
/// coefficient sequence on a coarser, exact time grid before pooling.
pub fn wavelet_with(clip: &AudioClip, cfg: &WaveletConfig) -> Array2<f32> {
    let x = clip.samples();
    let n = x.len();
    let sr = clip.sample_rate() as f64;
    let mut planner = FftPlanner::<f64>::new();
    let mut spectrum: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v as f64, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut spectrum);

    let bin_hz = sr / n as f64;
    let nyquist_bin = n / 2;
    let min_len = (cfg.frames * 16).min(n);
    let divisors = divisors(n);
    let mut out = Array2::zeros((cfg.n_scales, cfg.frames));
    for (row, &centre) in wavelet_center_frequencies(cfg).iter().enumerate() {
        // Response is a Gaussian in frequency with std centre / omega0.
        let sigma_hz = centre / cfg.omega0;
        let lo = (((centre - cfg.support * sigma_hz) / bin_hz).floor().max(1.0)) as usize;
        let hi = (((centre + cfg.support * sigma_hz) / bin_hz).ceil() as usize).min(nyquist_bin);
        let width = hi.saturating_sub(lo) + 1;
        // Shortest length dividing n that oversamples the band twice, so the
        // coarse grid is a subset of the original sample instants.
        let need = (cfg.oversample * width).max(min_len);
        let len = *divisors.iter().find(|&&d| d >= need).unwrap_or(&n);
        let step = n / len;
        let mut band = vec![Complex64::new(0.0, 0.0); len];
        for k in lo..=hi.min(lo + len - 1) {
            let omega = 2.0 * std::f64::consts::PI * k as f64 * bin_hz;
            band[k - lo] = spectrum[k] * morlet_response(omega, centre, cfg.omega0);
        }
        planner.plan_fft_inverse(len).process(&mut band);
        // Frame means over every original sample instant, with the envelope
        // linearly interpolated between coarse-grid points.
        let mags: Vec<f64> = band.iter().map(|c| c.norm() / n as f64).collect();
        let mut sums = vec![0.0f64; cfg.frames];
        let mut counts = vec![0usize; cfg.frames];
        let inv_step = 1.0 / step as f64;
        for i in 0..n {
            let (m, r) = (i / step, i % step);
            let v = if r == 0 {
                mags[m]
            } else {
                let f = r as f64 * inv_step;
                mags[m] * (1.0 - f) + mags[(m + 1) % len] * f
            };
            let frame = i * cfg.frames / n;
            sums[frame] += v;
            counts[frame] += 1;
        }
        for j in 0..cfg.frames {
            let mean = sums[j] / counts[j].max(1) as f64;
            out[[row, j]] = (mean + LOG_FLOOR).ln() as f32;
        }
    }
    out
}

/// 124 × 154 log-magnitude Morlet scalogram of a 10 s clip at the pipeline
/// rate: 124 center frequencies log-spaced from 16 kHz (row 0) down to 50 Hz,
/// ω₀ = 6, magnitudes mean-pooled into 154 equal frames, natural log of
/// magnitude + 1e-10.
pub fn wavelet_scalogram(clip: &AudioClip) -> Result<Spectrogram> {
    check_cycle_clip(clip)?;
    Spectrogram::new(wavelet_with(clip, &WaveletConfig::default()), SpectrogramKind::Wavelet)
}
