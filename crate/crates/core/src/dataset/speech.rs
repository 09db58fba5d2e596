use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{read_audio, resample, write_audio, AudioBuffer, WORKING_RATE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentConfig {
    pub segment_secs: f64,
    /// Segments quieter than this RMS (dB re full scale) are skipped.
    pub min_rms_dbfs: f64,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            segment_secs: 2.0,
            min_rms_dbfs: -45.0,
        }
    }
}

impl SegmentConfig {
    pub fn segment_len(&self) -> usize {
        (self.segment_secs * WORKING_RATE as f64).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeechSegment {
    /// `<file stem>#<segment index>`.
    pub reference: String,
    pub audio: AudioBuffer,
}

/// Fixed-length mono excerpts at the working rate, in file-name order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeechCorpus {
    pub segments: Vec<SpeechSegment>,
    /// Segments dropped by the level threshold.
    pub skipped_quiet: usize,
}

pub fn rms_dbfs(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NEG_INFINITY;
    }
    let ms = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    10.0 * ms.log10()
}

impl SpeechCorpus {
    /// Reads every `.wav` file directly inside `dir`.
    pub fn load(dir: impl AsRef<Path>, cfg: &SegmentConfig) -> Result<Self> {
        let dir = dir.as_ref();
        if !dir.is_dir() {
            return Err(Error::Corpus(format!("{}: not a directory", dir.display())));
        }
        let mut files: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(Error::Corpus(format!("{}: no .wav files", dir.display())));
        }
        let mut clips = Vec::with_capacity(files.len());
        for f in &files {
            let audio = read_audio(f)?;
            if audio.num_channels() != 1 {
                return Err(Error::Corpus(format!(
                    "{}: expected a mono clip, found {} channels",
                    f.display(),
                    audio.num_channels()
                )));
            }
            let stem = f.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            clips.push((stem, audio));
        }
        Self::from_clips(clips, cfg)
    }

    /// Resamples and cuts named clips into consecutive segments.
    pub fn from_clips(clips: Vec<(String, AudioBuffer)>, cfg: &SegmentConfig) -> Result<Self> {
        let len = cfg.segment_len();
        if len == 0 {
            return Err(Error::Config("segment length must be positive".into()));
        }
        let mut segments = Vec::new();
        let mut skipped_quiet = 0;
        for (name, clip) in clips {
            let clip = resample(&clip, WORKING_RATE)?;
            let x = clip.channel(0);
            for (k, chunk) in x.chunks_exact(len).enumerate() {
                if rms_dbfs(chunk) < cfg.min_rms_dbfs {
                    skipped_quiet += 1;
                    continue;
                }
                segments.push(SpeechSegment {
                    reference: format!("{name}#{k}"),
                    audio: AudioBuffer::mono(chunk.to_vec(), WORKING_RATE)?,
                });
            }
        }
        if segments.is_empty() {
            return Err(Error::Corpus("no segment passes the length and level requirements".into()));
        }
        Ok(Self { segments, skipped_quiet })
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }
}

/// Speech-like test signal: voiced syllables (harmonic series on a gliding
/// pitch, three formant resonances) alternating with noise bursts and short
/// pauses. Peak 0.5.
pub fn synthetic_speech(seed: u64, secs: f64, sample_rate: u32) -> AudioBuffer {
    let fs = sample_rate as f64;
    let n = (secs * fs).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; n];
    let mut t0 = 0usize;
    while t0 < n {
        let dur = (rng.gen_range(0.12..0.3) * fs) as usize;
        let end = (t0 + dur).min(n);
        let kind: f64 = rng.gen();
        if kind < 0.7 {
            let f0a = rng.gen_range(95.0..230.0);
            let f0b = f0a * rng.gen_range(0.8..1.25);
            let formants = [
                (rng.gen_range(300.0..900.0), 90.0),
                (rng.gen_range(900.0..2400.0), 130.0),
                (rng.gen_range(2400.0..3600.0), 200.0),
            ];
            let mut phase = rng.gen_range(0.0..TAU);
            for (i, v) in x[t0..end].iter_mut().enumerate() {
                let u = i as f64 / (end - t0) as f64;
                let f0 = f0a + (f0b - f0a) * u;
                phase += TAU * f0 / fs;
                let env = (std::f64::consts::PI * u).sin().powi(2);
                let mut s = 0.0;
                let mut h = 1;
                while h as f64 * f0 < 0.45 * fs {
                    let f = h as f64 * f0;
                    let amp: f64 = formants
                        .iter()
                        .map(|(fc, bw)| 1.0 / (1.0 + ((f - fc) / bw).powi(2)))
                        .sum::<f64>()
                        + 0.02;
                    s += amp * (h as f64 * phase).sin() / (h as f64).sqrt();
                    h += 1;
                }
                *v = env * s;
            }
        } else if kind < 0.85 {
            // fricative: differenced white noise
            let mut prev = 0.0;
            for (i, v) in x[t0..end].iter_mut().enumerate() {
                let u = i as f64 / (end - t0) as f64;
                let w: f64 = StandardNormal.sample(&mut rng);
                *v = 0.3 * (std::f64::consts::PI * u).sin() * (w - prev);
                prev = w;
            }
        }
        t0 = end;
    }
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        x.iter_mut().for_each(|v| *v *= 0.5 / peak);
    }
    AudioBuffer::mono(x, sample_rate).expect("mono buffer from a single channel")
}

/// Writes `n_clips` synthetic clips of `secs` seconds into `dir` as
/// `synth_<k>.wav`.
pub fn write_synthetic_corpus(dir: impl AsRef<Path>, n_clips: usize, secs: f64, seed: u64) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    for k in 0..n_clips {
        let clip = synthetic_speech(seed.wrapping_add(k as u64), secs, WORKING_RATE);
        write_audio(dir.join(format!("synth_{k:04}.wav")), &clip)?;
    }
    Ok(())
}
