//! Small synthetic dataset in the public release layout, for examples and
//! tests. Recordings use assorted sample rates and PCM formats; cycles
//! carry audible stand-ins for each class (clicks for crackles, a tone for
//! wheezes) over breath-like noise.

use std::f32::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

/// Paths and counts of a generated fixture dataset.
#[derive(Debug, Clone)]
pub struct FixtureDataset {
    pub audio_dir: PathBuf,
    pub split_file: PathBuf,
    pub recordings: Vec<String>,
    pub cycles: usize,
}

struct FixtureRecording {
    stem: &'static str,
    rate: u32,
    format: (u16, hound::SampleFormat),
    seconds: f64,
    /// onset, offset, crackle, wheeze
    cycles: &'static [(f64, f64, bool, bool)],
}

const INT: hound::SampleFormat = hound::SampleFormat::Int;
const FLOAT: hound::SampleFormat = hound::SampleFormat::Float;

const RECORDINGS: [FixtureRecording; 6] = [
    FixtureRecording {
        stem: "101_1b1_Al_sc_Meditron",
        rate: 4000,
        format: (16, INT),
        seconds: 22.0,
        // The last offset overruns the audio by 30 ms, as real files do.
        cycles: &[(0.2, 3.1, false, false), (3.1, 7.4, true, false), (7.4, 19.8, false, true), (19.8, 22.03, false, false)],
    },
    FixtureRecording {
        stem: "101_1b1_Pr_sc_Meditron",
        rate: 44_100,
        format: (24, INT),
        seconds: 12.0,
        cycles: &[(0.0, 2.5, true, true), (2.5, 6.0, false, false), (6.0, 11.9, true, false)],
    },
    FixtureRecording {
        stem: "101_2b2_Tc_mc_AKGC417L",
        rate: 10_000,
        format: (32, FLOAT),
        seconds: 9.0,
        cycles: &[(0.5, 4.0, false, true), (4.0, 8.7, false, false)],
    },
    FixtureRecording {
        stem: "102_1b1_Ar_sc_Meditron",
        rate: 4000,
        format: (8, INT),
        seconds: 15.0,
        cycles: &[(0.1, 5.2, false, false), (5.2, 10.1, true, false), (10.1, 14.8, false, true)],
    },
    FixtureRecording {
        stem: "102_1b1_Ll_sc_Litt3200",
        rate: 8000,
        format: (16, INT),
        seconds: 12.0,
        cycles: &[(0.0, 3.3, true, true), (3.3, 11.0, false, false)],
    },
    FixtureRecording {
        stem: "102_2b3_Tc_mc_LittC2SE",
        rate: 32_000,
        format: (16, INT),
        seconds: 11.0,
        cycles: &[(0.3, 4.4, true, false), (4.4, 10.9, false, true)],
    },
];

fn synthesize(rec: &FixtureRecording, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let sr = rec.rate as f32;
    let n = (rec.seconds * rec.rate as f64).round() as usize;
    let mut out = vec![0.0f32; n];
    // Breath noise: one-pole low-passed white noise with a slow swell.
    let mut lp = 0.0f32;
    for (i, v) in out.iter_mut().enumerate() {
        let white: f32 = rng.random_range(-1.0..1.0);
        lp = 0.9 * lp + 0.1 * white;
        let t = i as f32 / sr;
        *v = 0.2 * lp * (0.6 + 0.4 * (2.0 * PI * 0.25 * t).sin());
    }
    for &(onset, offset, crackle, wheeze) in rec.cycles {
        let start = (onset * rec.rate as f64) as usize;
        let end = ((offset * rec.rate as f64) as usize).min(n);
        if wheeze {
            let f0 = rng.random_range(350.0..550.0f32);
            for (k, v) in out[start..end].iter_mut().enumerate() {
                *v += 0.15 * (2.0 * PI * f0 * k as f32 / sr).sin();
            }
        }
        if crackle {
            let clicks = ((offset - onset) * 6.0) as usize + 1;
            for _ in 0..clicks {
                let at = rng.random_range(start..end);
                let len = (0.004 * sr) as usize;
                for k in 0..len.min(n - at) {
                    let decay = (-(k as f32) / (0.0008 * sr)).exp();
                    out[at + k] += 0.5 * decay * if k % 2 == 0 { 1.0 } else { -1.0 };
                }
            }
        }
    }
    let peak = out.iter().fold(0.0f32, |m, v| m.max(v.abs()));
    let gain = if peak > 0.9 { 0.9 / peak } else { 1.0 };
    out.iter_mut().for_each(|v| *v *= gain);
    out
}

fn write_wav(path: &Path, samples: &[f32], rate: u32, (bits, format): (u16, hound::SampleFormat)) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: rate,
        bits_per_sample: bits,
        sample_format: format,
    };
    let mut w = hound::WavWriter::create(path, spec)?;
    match format {
        hound::SampleFormat::Float => {
            for &s in samples {
                w.write_sample(s)?;
            }
        }
        hound::SampleFormat::Int => {
            let full = ((1i64 << (bits - 1)) - 1) as f32;
            for &s in samples {
                w.write_sample((s * full).round() as i32)?;
            }
        }
    }
    w.finalize()?;
    Ok(())
}

/// Write six recordings from two patients (101 → train, 102 → test) into
/// `dir/audio`, plus `dir/split.txt`.
pub fn write_fixture_dataset(dir: &Path, seed: u64) -> Result<FixtureDataset> {
    let audio_dir = dir.join("audio");
    fs::create_dir_all(&audio_dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = String::new();
    let mut cycles = 0;
    for rec in &RECORDINGS {
        let samples = synthesize(rec, &mut rng);
        write_wav(&audio_dir.join(format!("{}.wav", rec.stem)), &samples, rec.rate, rec.format)?;
        let mut text = String::new();
        for &(on, off, c, w) in rec.cycles {
            writeln!(text, "{on:.3}\t{off:.3}\t{}\t{}", c as u8, w as u8).unwrap();
        }
        fs::write(audio_dir.join(format!("{}.txt", rec.stem)), text)?;
        let side = if rec.stem.starts_with("101") { "train" } else { "test" };
        writeln!(split, "{}\t{side}", rec.stem).unwrap();
        cycles += rec.cycles.len();
    }
    let split_file = dir.join("split.txt");
    fs::write(&split_file, split)?;
    Ok(FixtureDataset {
        audio_dir,
        split_file,
        recordings: RECORDINGS.iter().map(|r| r.stem.to_string()).collect(),
        cycles,
    })
}
