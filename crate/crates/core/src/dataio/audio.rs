use std::path::Path;

use rubato::audioadapter_buffers::direct::SequentialSliceOfVecs;
use rubato::{Fft, FixedSync, Resampler};

use super::CycleRecord;
use crate::error::{Error, Result};
use crate::features::PIPELINE_RATE;

/// Annotation spans may overrun the audio by this much (seconds) before
/// extraction fails; overruns within the slack are clamped.
pub const ANNOTATION_SLACK: f64 = 0.05;

/// Mono audio with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f32>,
    sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidInput("sample rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(Error::InvalidInput("audio clip is empty".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidInput("audio clip contains non-finite samples".into()));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Read a PCM WAV file (8/16/24/32-bit integer or 32-bit float), averaging
/// channels to mono. Integer samples are scaled to [-1, 1).
pub fn read_wav(path: &Path) -> Result<AudioClip> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    let interleaved: Vec<f32> = match spec.sample_format {
        hound::SampleFormat::Float => reader.samples::<f32>().collect::<std::result::Result<_, _>>()?,
        hound::SampleFormat::Int => {
            let scale = 1.0 / (1u64 << (spec.bits_per_sample - 1)) as f32;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f32 * scale))
                .collect::<std::result::Result<_, _>>()?
        }
    };
    let mono = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|f| f.iter().sum::<f32>() / channels as f32)
            .collect()
    };
    AudioClip::new(mono, spec.sample_rate).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Band-limited resampling to `rate`; a no-op when the rates already agree.
pub fn resample(clip: &AudioClip, rate: u32) -> Result<AudioClip> {
    if clip.sample_rate == rate {
        return Ok(clip.clone());
    }
    let err = |e: &dyn std::fmt::Display| Error::InvalidInput(format!("resampling failed: {e}"));
    let mut resampler =
        Fft::<f32>::new(clip.sample_rate as usize, rate as usize, 1024, 1, FixedSync::Both).map_err(|e| err(&e))?;
    let input = vec![clip.samples.clone()];
    let adapter = SequentialSliceOfVecs::new(&input, 1, clip.len()).map_err(|e| err(&e))?;
    let out = resampler.process_all(&adapter, clip.len(), None).map_err(|e| err(&e))?;
    AudioClip::new(out.take_data(), rate)
}

/// Read a recording and bring it to the pipeline rate.
pub fn load_recording(path: &Path) -> Result<AudioClip> {
    resample(&read_wav(path)?, PIPELINE_RATE)
}

/// Samples covering `[onset, offset)` of `rec`.
///
/// Offsets that overrun the recording by at most [`ANNOTATION_SLACK`] are
/// clamped to its end.
pub fn extract_cycle(recording: &AudioClip, rec: &CycleRecord) -> Result<AudioClip> {
    let duration = recording.duration();
    if rec.onset >= duration {
        return Err(Error::Range(format!(
            "{}: onset {:.3} s is past the recording end ({duration:.3} s)",
            rec.cycle_id(),
            rec.onset
        )));
    }
    if rec.offset > duration + ANNOTATION_SLACK {
        return Err(Error::Range(format!(
            "{}: offset {:.3} s overruns the recording ({duration:.3} s)",
            rec.cycle_id(),
            rec.offset
        )));
    }
    let sr = recording.sample_rate as f64;
    let start = (rec.onset * sr).round() as usize;
    let end = ((rec.offset * sr).round() as usize).min(recording.len());
    if end <= start {
        return Err(Error::Range(format!("{}: cycle spans no samples", rec.cycle_id())));
    }
    AudioClip::new(recording.samples[start..end].to_vec(), recording.sample_rate)
}

/// Tile short clips end to end (the last copy truncated) or keep the first
/// `target` seconds of long ones.
pub fn fix_duration(clip: &AudioClip, target: f64) -> Result<AudioClip> {
    if clip.is_empty() {
        return Err(Error::InvalidInput("cannot fix the duration of an empty clip".into()));
    }
    if !(target.is_finite() && target > 0.0) {
        return Err(Error::InvalidInput(format!("target duration {target} must be positive")));
    }
    let n = (target * clip.sample_rate as f64).round() as usize;
    let samples: Vec<f32> = clip.samples.iter().copied().cycle().take(n).collect();
    AudioClip::new(samples, clip.sample_rate)
}
