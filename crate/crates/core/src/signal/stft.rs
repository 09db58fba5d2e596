//! Centered, reflect-padded STFT with weighted overlap-add synthesis.

use std::f64::consts::PI;

use num_complex::Complex64;
use realfft::RealFftPlanner;
use serde::{Deserialize, Serialize};

use super::AudioBuffer;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    /// Periodic Hann window.
    Hann,
    /// Rectangular window.
    Rect,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StftConfig {
    pub window: WindowKind,
    pub window_len: usize,
    pub fft_len: usize,
    pub hop: usize,
    pub sample_rate: u32,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            window: WindowKind::Hann,
            window_len: 1024,
            fft_len: 1024,
            hop: 256,
            sample_rate: super::WORKING_RATE,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hop == 0 || self.hop > self.window_len || self.window_len > self.fft_len {
            return Err(Error::Config(format!(
                "stft requires 0 < hop <= window_len <= fft_len (got {} / {} / {})",
                self.hop, self.window_len, self.fft_len
            )));
        }
        if self.fft_len % 2 != 0 {
            return Err(Error::Config("fft_len must be even".into()));
        }
        if self.sample_rate == 0 {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        // every sample must be covered by a nonzero window value (NOLA)
        let w = self.window();
        let mut cover = vec![0.0; self.hop];
        for (n, x) in w.iter().enumerate() {
            cover[n % self.hop] += x * x;
        }
        if cover.iter().any(|&c| c < 1e-10) {
            return Err(Error::Config(
                "window/hop pair violates the overlap-add condition".into(),
            ));
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.fft_len / 2 + 1
    }

    pub fn bin_width_hz(&self) -> f64 {
        self.sample_rate as f64 / self.fft_len as f64
    }

    pub fn bin_frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_width_hz()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.n_bins()).map(|k| self.bin_frequency(k)).collect()
    }

    pub fn nyquist(&self) -> f64 {
        self.sample_rate as f64 / 2.0
    }

    /// Number of frames produced for a signal of `len` samples.
    pub fn frame_count(&self, len: usize) -> usize {
        1 + len / self.hop
    }

    /// Analysis/synthesis window zero-padded and centered to `fft_len`.
    pub fn window(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.fft_len];
        let offset = (self.fft_len - self.window_len) / 2;
        for n in 0..self.window_len {
            w[offset + n] = match self.window {
                WindowKind::Hann => {
                    0.5 - 0.5 * (2.0 * PI * n as f64 / self.window_len as f64).cos()
                }
                WindowKind::Rect => 1.0,
            };
        }
        w
    }
}

/// Complex STFT coefficients stored channel-major as `[channel][frame][bin]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    config: StftConfig,
    n_channels: usize,
    n_frames: usize,
    signal_len: usize,
    data: Vec<Complex64>,
}

impl ComplexSpectrogram {
    pub fn zeros(config: StftConfig, n_channels: usize, n_frames: usize, signal_len: usize) -> Self {
        Self {
            config,
            n_channels,
            n_frames,
            signal_len,
            data: vec![Complex64::new(0.0, 0.0); n_channels * n_frames * config.n_bins()],
        }
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_bins(&self) -> usize {
        self.config.n_bins()
    }

    /// Length of the time-domain signal this spectrogram synthesizes to.
    pub fn signal_len(&self) -> usize {
        self.signal_len
    }

    fn offset(&self, ch: usize, frame: usize) -> usize {
        (ch * self.n_frames + frame) * self.n_bins()
    }

    pub fn get(&self, ch: usize, frame: usize, bin: usize) -> Complex64 {
        self.data[self.offset(ch, frame) + bin]
    }

    pub fn set(&mut self, ch: usize, frame: usize, bin: usize, value: Complex64) {
        let o = self.offset(ch, frame);
        self.data[o + bin] = value;
    }

    pub fn frame(&self, ch: usize, frame: usize) -> &[Complex64] {
        let o = self.offset(ch, frame);
        &self.data[o..o + self.n_bins()]
    }

    pub fn frame_mut(&mut self, ch: usize, frame: usize) -> &mut [Complex64] {
        let o = self.offset(ch, frame);
        let n = self.n_bins();
        &mut self.data[o..o + n]
    }

    /// All coefficients of one channel, frame-major.
    pub fn channel(&self, ch: usize) -> &[Complex64] {
        let o = self.offset(ch, 0);
        &self.data[o..o + self.n_frames * self.n_bins()]
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// Single-channel copy.
    pub fn extract(&self, ch: usize) -> ComplexSpectrogram {
        Self {
            config: self.config,
            n_channels: 1,
            n_frames: self.n_frames,
            signal_len: self.signal_len,
            data: self.channel(ch).to_vec(),
        }
    }

    /// True when both spectrograms share config, channel and frame counts.
    pub fn same_grid(&self, other: &ComplexSpectrogram) -> bool {
        self.config == other.config
            && self.n_channels == other.n_channels
            && self.n_frames == other.n_frames
    }

    pub(crate) fn check_same_grid(&self, other: &ComplexSpectrogram) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{}ch x {} frames vs {}ch x {} frames",
                self.n_channels, self.n_frames, other.n_channels, other.n_frames
            )))
        }
    }
}

/// Reflect index into `[0, len)` without repeating the edge sample.
fn reflect(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let m = i.rem_euclid(period);
    if m < len as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

pub fn stft(buffer: &AudioBuffer, cfg: &StftConfig) -> Result<ComplexSpectrogram> {
    cfg.validate()?;
    if buffer.sample_rate() != cfg.sample_rate {
        return Err(Error::SampleRateMismatch {
            expected: cfg.sample_rate,
            actual: buffer.sample_rate(),
        });
    }
    if buffer.is_empty() {
        return Err(Error::EmptySignal);
    }
    let len = buffer.len();
    let n_frames = cfg.frame_count(len);
    let n_bins = cfg.n_bins();
    let pad = (cfg.fft_len / 2) as isize;
    let window = cfg.window();
    let mut planner = RealFftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(cfg.fft_len);
    let mut frame = fft.make_input_vec();
    let mut spectrum = fft.make_output_vec();
    let mut scratch = fft.make_scratch_vec();
    let mut out = ComplexSpectrogram::zeros(*cfg, buffer.num_channels(), n_frames, len);

    for (ch, x) in buffer.channels().iter().enumerate() {
        for t in 0..n_frames {
            let start = (t * cfg.hop) as isize - pad;
            for (n, slot) in frame.iter_mut().enumerate() {
                *slot = x[reflect(start + n as isize, len)] * window[n];
            }
            fft.process_with_scratch(&mut frame, &mut spectrum, &mut scratch)
                .expect("fft buffer sizes are fixed by the plan");
            out.frame_mut(ch, t)[..n_bins].copy_from_slice(&spectrum);
        }
    }
    Ok(out)
}

pub fn istft(spec: &ComplexSpectrogram, cfg: &StftConfig) -> Result<AudioBuffer> {
    cfg.validate()?;
    if spec.n_bins() != cfg.n_bins() || spec.config().hop != cfg.hop {
        return Err(Error::GridMismatch(format!(
            "spectrogram has {} bins / hop {}, config expects {} / {}",
            spec.n_bins(),
            spec.config().hop,
            cfg.n_bins(),
            cfg.hop
        )));
    }
    let n_frames = spec.n_frames();
    let pad = cfg.fft_len / 2;
    let padded_len = (n_frames - 1) * cfg.hop + cfg.fft_len;
    let out_len = spec.signal_len();
    let window = cfg.window();
    let mut planner = RealFftPlanner::<f64>::new();
    let ifft = planner.plan_fft_inverse(cfg.fft_len);
    let mut spectrum = ifft.make_input_vec();
    let mut frame = ifft.make_output_vec();
    let mut scratch = ifft.make_scratch_vec();
    let scale = 1.0 / cfg.fft_len as f64;

    let mut norm = vec![0.0; padded_len];
    for t in 0..n_frames {
        for (n, w) in window.iter().enumerate() {
            norm[t * cfg.hop + n] += w * w;
        }
    }

    let mut channels = Vec::with_capacity(spec.n_channels());
    for ch in 0..spec.n_channels() {
        let mut acc = vec![0.0; padded_len];
        for t in 0..n_frames {
            spectrum.copy_from_slice(spec.frame(ch, t));
            // the inverse real FFT requires purely real DC and Nyquist bins
            spectrum[0].im = 0.0;
            let last = spectrum.len() - 1;
            spectrum[last].im = 0.0;
            ifft.process_with_scratch(&mut spectrum, &mut frame, &mut scratch)
                .expect("fft buffer sizes are fixed by the plan");
            let base = t * cfg.hop;
            for (n, (x, w)) in frame.iter().zip(&window).enumerate() {
                acc[base + n] += x * scale * w;
            }
        }
        let y: Vec<f64> = (0..out_len)
            .map(|i| {
                let j = i + pad;
                if j < padded_len && norm[j] > 1e-10 {
                    acc[j] / norm[j]
                } else {
                    0.0
                }
            })
            .collect();
        channels.push(y);
    }
    Ok(AudioBuffer::from_parts_unchecked(channels, cfg.sample_rate))
}
