//! Synthesis of array recordings from an image-source list.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use realfft::RealFftPlanner;
use serde::{Deserialize, Serialize};

use super::room::ImageSourceList;
use super::sphere::{ArrayGeometry, SphereModes};
use crate::error::{Error, Result};
use crate::geometry::dot;
use crate::signal::AudioBuffer;

/// Produces per-microphone transfer functions of an image-source field.
pub trait RecordingRenderer: Send + Sync {
    fn name(&self) -> &'static str;

    /// One-sided spectra (`fft_len / 2 + 1` bins) of every microphone's room
    /// response on an `fft_len`-point grid, shape `[mic][bin]`. Responses
    /// are circular in `fft_len`.
    fn transfer_functions(
        &self,
        images: &ImageSourceList,
        geom: &ArrayGeometry,
        speed_of_sound: f64,
        sample_rate: u32,
        fft_len: usize,
    ) -> Result<Vec<Vec<Complex64>>>;
}

/// Evaluates every image source's plane-wave response in closed form at
/// every bin. Exact fractional delays, cost grows with bins × images.
#[derive(Debug, Default, Clone, Copy)]
pub struct ExactRenderer;

impl RecordingRenderer for ExactRenderer {
    fn name(&self) -> &'static str {
        "exact"
    }

    fn transfer_functions(
        &self,
        images: &ImageSourceList,
        geom: &ArrayGeometry,
        speed_of_sound: f64,
        sample_rate: u32,
        fft_len: usize,
    ) -> Result<Vec<Vec<Complex64>>> {
        let mics = geom.world_mic_units();
        let n_bins = fft_len / 2 + 1;
        let per_bin: Vec<Vec<Complex64>> = (0..n_bins)
            .into_par_iter()
            .map(|k| {
                let f = k as f64 * sample_rate as f64 / fft_len as f64;
                let modes = SphereModes::new(2.0 * PI * f * geom.radius / speed_of_sound);
                let mut acc = vec![Complex64::new(0.0, 0.0); mics.len()];
                let taper = band_edge_taper(f, sample_rate);
                if taper == 0.0 {
                    return acc;
                }
                for img in &images.entries {
                    let u = img.direction.unit();
                    let phase = Complex64::from_polar(img.gain * taper, -2.0 * PI * f * img.delay);
                    for (a, m) in acc.iter_mut().zip(&mics) {
                        *a += phase * modes.response(dot(*m, u));
                    }
                }
                acc
            })
            .collect();
        Ok((0..mics.len())
            .map(|m| per_bin.iter().map(|row| row[m]).collect())
            .collect())
    }
}

const TABLE_DESIGN_LEN: usize = 1024;

/// Raised-cosine roll-off over the top 10% of the band, standing in for the
/// anti-aliasing response of the recording chain. Both renderers apply it,
/// which also keeps tabulated kernels short.
pub fn band_edge_taper(f: f64, sample_rate: u32) -> f64 {
    let nyq = sample_rate as f64 / 2.0;
    let start = 0.9 * nyq;
    if f <= start {
        1.0
    } else if f >= nyq {
        0.0
    } else {
        0.5 + 0.5 * (PI * (f - start) / (nyq - start)).cos()
    }
}

/// Precomputed band-limited sphere impulse responses on a grid of incidence
/// angles and fractional delays, interpolated bilinearly per image source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableSpec {
    pub angles: usize,
    pub fractions: usize,
    pub taps: usize,
}

impl Default for TableSpec {
    fn default() -> Self {
        Self {
            angles: 513,
            fractions: 32,
            taps: 96,
        }
    }
}

struct KernelTable {
    spec: TableSpec,
    lead: usize,
    /// `[angle][fraction 0..=fractions][tap]`
    data: Vec<f64>,
}

impl KernelTable {
    fn build(spec: TableSpec, radius: f64, speed_of_sound: f64, sample_rate: u32) -> Self {
        let n = TABLE_DESIGN_LEN;
        let n_bins = n / 2 + 1;
        // most of the sphere response trails the geometric arrival
        let lead = spec.taps * 5 / 12;
        let freqs: Vec<f64> = (0..n_bins)
            .map(|k| k as f64 * sample_rate as f64 / n as f64)
            .collect();
        let modes: Vec<SphereModes> = freqs
            .iter()
            .map(|&f| SphereModes::new(2.0 * PI * f * radius / speed_of_sound))
            .collect();
        let rows: Vec<Vec<f64>> = (0..spec.angles)
            .into_par_iter()
            .map(|ai| {
                let theta = PI * ai as f64 / (spec.angles - 1) as f64;
                let resp: Vec<Complex64> = modes
                    .iter()
                    .zip(&freqs)
                    .map(|(m, &f)| m.response(theta.cos()) * band_edge_taper(f, sample_rate))
                    .collect();
                let mut planner = RealFftPlanner::<f64>::new();
                let ifft = planner.plan_fft_inverse(n);
                let mut spectrum = ifft.make_input_vec();
                let mut out = ifft.make_output_vec();
                let mut row = Vec::with_capacity((spec.fractions + 1) * spec.taps);
                for q in 0..=spec.fractions {
                    let arrival = lead as f64 + q as f64 / spec.fractions as f64;
                    for (k, s) in spectrum.iter_mut().enumerate() {
                        *s = resp[k] * Complex64::from_polar(1.0, -2.0 * PI * k as f64 * arrival / n as f64);
                    }
                    spectrum[0].im = 0.0;
                    spectrum[n_bins - 1].im = 0.0;
                    ifft.process(&mut spectrum, &mut out)
                        .expect("fft buffer sizes are fixed by the plan");
                    for (t, &x) in out.iter().take(spec.taps).enumerate() {
                        let rel = t as f64 - arrival;
                        let span = if rel < 0.0 {
                            arrival
                        } else {
                            spec.taps as f64 - 1.0 - arrival
                        };
                        row.push(x / n as f64 * tukey(rel / span, 0.25));
                    }
                }
                row
            })
            .collect();
        Self {
            spec,
            lead,
            data: rows.concat(),
        }
    }

    fn kernel(&self, angle: usize, fraction: usize) -> &[f64] {
        let o = (angle * (self.spec.fractions + 1) + fraction) * self.spec.taps;
        &self.data[o..o + self.spec.taps]
    }
}

/// Tukey window over `x ∈ [-1, 1]`, flat in the middle `1 - alpha`.
fn tukey(x: f64, alpha: f64) -> f64 {
    let a = x.abs();
    if a >= 1.0 {
        0.0
    } else if a <= 1.0 - alpha {
        1.0
    } else {
        0.5 * (1.0 + (PI * (a - 1.0 + alpha) / alpha).cos())
    }
}

type TableKey = (u64, u64, u32, usize, usize, usize);

/// Time-domain renderer driven by a cached kernel table.
#[derive(Default)]
pub struct TabulatedRenderer {
    spec: TableSpec,
    cache: Mutex<HashMap<TableKey, Arc<KernelTable>>>,
}

impl TabulatedRenderer {
    pub fn new(spec: TableSpec) -> Self {
        Self {
            spec,
            cache: Mutex::new(HashMap::new()),
        }
    }

    fn table(&self, radius: f64, speed_of_sound: f64, sample_rate: u32) -> Arc<KernelTable> {
        let key = (
            radius.to_bits(),
            speed_of_sound.to_bits(),
            sample_rate,
            self.spec.angles,
            self.spec.fractions,
            self.spec.taps,
        );
        let mut cache = self.cache.lock().expect("kernel cache poisoned");
        cache
            .entry(key)
            .or_insert_with(|| {
                Arc::new(KernelTable::build(self.spec, radius, speed_of_sound, sample_rate))
            })
            .clone()
    }

    /// Per-microphone impulse responses of length `len`, circularly wrapped.
    pub fn impulse_responses(
        &self,
        images: &ImageSourceList,
        geom: &ArrayGeometry,
        speed_of_sound: f64,
        sample_rate: u32,
        len: usize,
    ) -> Vec<Vec<f64>> {
        let table = self.table(geom.radius, speed_of_sound, sample_rate);
        let spec = table.spec;
        let taps = spec.taps;
        let mics = geom.world_mic_units();
        mics.par_iter()
            .map(|m| {
                let mut rir = vec![0.0; len];
                let mut tmp = vec![0.0; taps];
                for img in &images.entries {
                    let c = dot(*m, img.direction.unit()).clamp(-1.0, 1.0);
                    let pos_a = c.acos() / PI * (spec.angles - 1) as f64;
                    let a0 = (pos_a.floor() as usize).min(spec.angles - 2);
                    let wa = pos_a - a0 as f64;
                    let d = img.delay * sample_rate as f64;
                    let whole = d.floor();
                    let pos_q = (d - whole) * spec.fractions as f64;
                    let q0 = (pos_q.floor() as usize).min(spec.fractions - 1);
                    let wq = pos_q - q0 as f64;
                    let g = img.gain;
                    let w00 = g * (1.0 - wa) * (1.0 - wq);
                    let w01 = g * (1.0 - wa) * wq;
                    let w10 = g * wa * (1.0 - wq);
                    let w11 = g * wa * wq;
                    let (k00, k01) = (table.kernel(a0, q0), table.kernel(a0, q0 + 1));
                    let (k10, k11) = (table.kernel(a0 + 1, q0), table.kernel(a0 + 1, q0 + 1));
                    for t in 0..taps {
                        tmp[t] = w00 * k00[t] + w01 * k01[t] + w10 * k10[t] + w11 * k11[t];
                    }
                    let base = whole as i64 - table.lead as i64;
                    if base >= 0 && (base as usize) + taps <= len {
                        let b = base as usize;
                        for (r, x) in rir[b..b + taps].iter_mut().zip(&tmp) {
                            *r += x;
                        }
                    } else {
                        for (t, x) in tmp.iter().enumerate() {
                            let idx = (base + t as i64).rem_euclid(len as i64) as usize;
                            rir[idx] += x;
                        }
                    }
                }
                rir
            })
            .collect()
    }
}

impl RecordingRenderer for TabulatedRenderer {
    fn name(&self) -> &'static str {
        "tabulated"
    }

    fn transfer_functions(
        &self,
        images: &ImageSourceList,
        geom: &ArrayGeometry,
        speed_of_sound: f64,
        sample_rate: u32,
        fft_len: usize,
    ) -> Result<Vec<Vec<Complex64>>> {
        let rirs = self.impulse_responses(images, geom, speed_of_sound, sample_rate, fft_len);
        let mut planner = RealFftPlanner::<f64>::new();
        let fft = planner.plan_fft_forward(fft_len);
        Ok(rirs
            .into_iter()
            .map(|mut rir| {
                let mut spec = fft.make_output_vec();
                fft.process(&mut rir, &mut spec)
                    .expect("fft buffer sizes are fixed by the plan");
                spec
            })
            .collect())
    }
}

/// Additive white Gaussian sensor noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Mean signal power over mean noise power, dB.
    pub snr_db: f64,
    pub seed: u64,
}

/// Renders an `M`-channel array recording of `source` (same length as the
/// source) by frequency-domain convolution with the rendered responses.
pub fn simulate_recording(
    images: &ImageSourceList,
    source: &AudioBuffer,
    geom: &ArrayGeometry,
    speed_of_sound: f64,
    renderer: &dyn RecordingRenderer,
    noise: Option<NoiseSpec>,
) -> Result<AudioBuffer> {
    if images.is_empty() {
        return Err(Error::EmptyImageList);
    }
    if source.num_channels() != 1 {
        return Err(Error::ChannelCount {
            expected: 1,
            actual: source.num_channels(),
        });
    }
    let fs = source.sample_rate();
    let len = source.len();
    let reach = (images.max_delay() * fs as f64).ceil() as usize + 128;
    let fft_len = (len + reach).next_power_of_two();
    let transfer = renderer.transfer_functions(images, geom, speed_of_sound, fs, fft_len)?;

    let mut planner = RealFftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(fft_len);
    let ifft = planner.plan_fft_inverse(fft_len);
    let mut padded = vec![0.0; fft_len];
    padded[..len].copy_from_slice(source.channel(0));
    let mut x = fft.make_output_vec();
    fft.process(&mut padded, &mut x)
        .expect("fft buffer sizes are fixed by the plan");

    let scale = 1.0 / fft_len as f64;
    let mut channels: Vec<Vec<f64>> = transfer
        .iter()
        .map(|h| {
            let mut y: Vec<Complex64> = x.iter().zip(h).map(|(a, b)| a * b).collect();
            y[0].im = 0.0;
            let last = y.len() - 1;
            y[last].im = 0.0;
            let mut out = ifft.make_output_vec();
            ifft.process(&mut y, &mut out)
                .expect("fft buffer sizes are fixed by the plan");
            out.truncate(len);
            out.iter_mut().for_each(|v| *v *= scale);
            out
        })
        .collect();

    if let Some(noise) = noise {
        let count = (channels.len() * len).max(1) as f64;
        let power = channels.iter().flatten().map(|v| v * v).sum::<f64>() / count;
        let sigma = (power / 10f64.powf(noise.snr_db / 10.0)).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        for v in channels.iter_mut().flatten() {
            let n: f64 = StandardNormal.sample(&mut rng);
            *v += sigma * n;
        }
    }
    AudioBuffer::new(channels, fs)
}

/// Room impulse responses of every microphone as a multichannel buffer of
/// `len` samples, for inspection.
pub fn render_rirs(
    images: &ImageSourceList,
    geom: &ArrayGeometry,
    speed_of_sound: f64,
    sample_rate: u32,
    len: usize,
    renderer: &dyn RecordingRenderer,
) -> Result<AudioBuffer> {
    if images.is_empty() {
        return Err(Error::EmptyImageList);
    }
    let fft_len = len.next_power_of_two().max(2);
    let transfer = renderer.transfer_functions(images, geom, speed_of_sound, sample_rate, fft_len)?;
    let mut planner = RealFftPlanner::<f64>::new();
    let ifft = planner.plan_fft_inverse(fft_len);
    let channels = transfer
        .into_iter()
        .map(|mut h| {
            h[0].im = 0.0;
            let last = h.len() - 1;
            h[last].im = 0.0;
            let mut out = ifft.make_output_vec();
            ifft.process(&mut h, &mut out)
                .expect("fft buffer sizes are fixed by the plan");
            out.truncate(len);
            out.iter_mut().for_each(|v| *v /= fft_len as f64);
            out
        })
        .collect();
    AudioBuffer::new(channels, sample_rate)
}
