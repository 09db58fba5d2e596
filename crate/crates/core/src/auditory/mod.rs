//! Auditory front end: middle ear, gammatone filterbank, compression and
//! hair-cell transduction, followed by ILD, IPD and IVS extraction.

mod cues;
mod export;
mod filters;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::AudioBuffer;

pub use cues::{extract_ild, extract_ipd, extract_itf, extract_ivs, ild_band, ipd_sample, ivs_band};
pub use export::{read_cue_maps, write_cue_maps, CUE_MAP_FORMAT, CUE_MAP_VERSION};
pub use filters::{
    compress_sample, dc_blocked_gammatone, erb_hz, erb_number, erb_number_to_hz, gammatone_erb_factor, haircell_band,
    middle_ear_filter, Biquad, Gammatone,
};

/// Magnitude floor of the ILD ratio.
pub const EPS: f64 = 1e-12;

/// Floor of the ITF-based cues. The ITF is quadratic in the compressed
/// signal and lies near 1e-12 in high bands during pauses, so any fixed
/// floor above underflow would make IPD and IVS depend on input level.
pub const ITF_FLOOR: f64 = f64::MIN_POSITIVE;

/// What the ILD low-pass acts on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IldSmoothing {
    /// Real and imaginary parts of the compressed band signal.
    Complex,
    /// Magnitude of the compressed band signal.
    #[default]
    Envelope,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditoryConfig {
    pub n_bands: usize,
    pub f_lo: f64,
    pub f_hi: f64,
    pub middle_ear_lo_hz: f64,
    pub middle_ear_hi_hz: f64,
    pub gammatone_order: usize,
    pub compression_exp: f64,
    pub haircell_order: usize,
    pub haircell_cutoff_hz: f64,
    /// Second-order Butterworth smoothing ahead of the ILD.
    pub ild_cutoff_hz: f64,
    pub ild_smoothing: IldSmoothing,
    pub ipd_limit_hz: f64,
    /// IVS integration time constant in cycles of the band centre.
    pub ivs_tau_cycles: f64,
    pub itf_gammatone_order: usize,
}

impl Default for AuditoryConfig {
    fn default() -> Self {
        Self {
            n_bands: 29,
            f_lo: 50.0,
            f_hi: 6000.0,
            middle_ear_lo_hz: 500.0,
            middle_ear_hi_hz: 2000.0,
            gammatone_order: 3,
            compression_exp: 0.4,
            haircell_order: 5,
            haircell_cutoff_hz: 770.0,
            ild_cutoff_hz: 30.0,
            ild_smoothing: IldSmoothing::default(),
            ipd_limit_hz: 1400.0,
            ivs_tau_cycles: 5.0,
            itf_gammatone_order: 2,
        }
    }
}

impl AuditoryConfig {
    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("auditory: {m}")));
        let nyq = sample_rate as f64 / 2.0;
        if self.n_bands < 2 {
            return bad(format!("need at least 2 bands, got {}", self.n_bands));
        }
        if !(self.f_lo > 0.0 && self.f_lo < self.f_hi && self.f_hi < nyq) {
            return bad(format!("need 0 < f_lo < f_hi < {nyq} Hz"));
        }
        let positive = [
            self.middle_ear_lo_hz,
            self.middle_ear_hi_hz,
            self.compression_exp,
            self.haircell_cutoff_hz,
            self.ild_cutoff_hz,
            self.ipd_limit_hz,
            self.ivs_tau_cycles,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return bad("cutoffs, exponent and time constant must be positive".into());
        }
        if self.middle_ear_lo_hz >= self.middle_ear_hi_hz || self.middle_ear_hi_hz >= nyq {
            return bad("middle-ear band must satisfy lo < hi < Nyquist".into());
        }
        if self.haircell_cutoff_hz >= nyq || self.ild_cutoff_hz >= nyq {
            return bad("low-pass cutoffs must lie below Nyquist".into());
        }
        for (name, o) in [
            ("gammatone_order", self.gammatone_order),
            ("itf_gammatone_order", self.itf_gammatone_order),
            ("haircell_order", self.haircell_order),
        ] {
            if o == 0 || o > 8 {
                return bad(format!("{name} must be in 1..=8, got {o}"));
            }
        }
        Ok(())
    }
}

/// Band centres uniformly spaced in ERB-rate from `f_lo` to `f_hi`.
pub fn erb_centers(cfg: &AuditoryConfig) -> Vec<f64> {
    let (e0, e1) = (erb_number(cfg.f_lo), erb_number(cfg.f_hi));
    let step = (e1 - e0) / (cfg.n_bands - 1) as f64;
    let mut c: Vec<f64> = (0..cfg.n_bands).map(|k| erb_number_to_hz(e0 + step * k as f64)).collect();
    c[0] = cfg.f_lo;
    c[cfg.n_bands - 1] = cfg.f_hi;
    c
}

/// Bands used for IPD: those whose lower ERB edge lies below the limit.
pub fn ipd_band_count(cfg: &AuditoryConfig) -> usize {
    erb_centers(cfg)
        .iter()
        .take_while(|&&f| f - erb_hz(f) / 2.0 < cfg.ipd_limit_hz)
        .count()
}

/// Per-band complex signals, `[band][sample]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandSignals {
    pub center_freqs: Vec<f64>,
    pub bands: Vec<Vec<Complex64>>,
}

impl BandSignals {
    pub fn n_bands(&self) -> usize {
        self.bands.len()
    }

    pub fn len(&self) -> usize {
        self.bands.first().map_or(0, |b| b.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Cue trajectories sampled at the audio rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditoryCueMaps {
    pub sample_rate: u32,
    pub center_freqs: Vec<f64>,
    /// dB, `[band][t]`.
    pub ild: Vec<Vec<f64>>,
    /// Radians in (-π, π], low bands only.
    pub ipd: Vec<Vec<f64>>,
    /// In [0, 1].
    pub ivs: Vec<Vec<f64>>,
}

impl AuditoryCueMaps {
    pub fn n_samples(&self) -> usize {
        self.ild.first().map_or(0, |b| b.len())
    }

    pub fn n_bands(&self) -> usize {
        self.ild.len()
    }

    pub fn n_ipd_bands(&self) -> usize {
        self.ipd.len()
    }
}

pub fn middle_ear(x: &[f64], sample_rate: u32, cfg: &AuditoryConfig) -> Vec<f64> {
    let mut y = x.to_vec();
    for s in middle_ear_filter(cfg.middle_ear_lo_hz, cfg.middle_ear_hi_hz, sample_rate as f64) {
        s.run(&mut y);
    }
    y
}

pub fn gammatone_bank(x: &[f64], sample_rate: u32, centers: &[f64], order: usize) -> BandSignals {
    let bands = centers
        .par_iter()
        .map(|&fc| Gammatone::new(fc, order, sample_rate as f64).filter(x))
        .collect();
    BandSignals {
        center_freqs: centers.to_vec(),
        bands,
    }
}

pub fn compress(bands: &BandSignals, exponent: f64) -> BandSignals {
    BandSignals {
        center_freqs: bands.center_freqs.clone(),
        bands: bands
            .bands
            .iter()
            .map(|b| b.iter().map(|z| compress_sample(*z, exponent)).collect())
            .collect(),
    }
}

pub fn haircell(bands: &BandSignals, sample_rate: u32, cfg: &AuditoryConfig) -> Vec<Vec<f64>> {
    bands
        .bands
        .par_iter()
        .map(|b| haircell_band(b, cfg.haircell_cutoff_hz, cfg.haircell_order, sample_rate as f64))
        .collect()
}

/// Full binaural analysis of a two-channel buffer.
pub fn analyze(binaural: &AudioBuffer, cfg: &AuditoryConfig) -> Result<AuditoryCueMaps> {
    if binaural.num_channels() != 2 {
        return Err(Error::ChannelCount {
            expected: 2,
            actual: binaural.num_channels(),
        });
    }
    let fs = binaural.sample_rate();
    cfg.validate(fs)?;
    let centers = erb_centers(cfg);
    let n_ipd = ipd_band_count(cfg);
    let ears: Vec<Vec<f64>> = (0..2).map(|c| middle_ear(binaural.channel(c), fs, cfg)).collect();
    let per_band: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = centers
        .par_iter()
        .enumerate()
        .map(|(k, &fc)| {
            let gt = Gammatone::new(fc, cfg.gammatone_order, fs as f64);
            let mut comp = Vec::with_capacity(2);
            let mut g = Vec::with_capacity(2);
            for ear in &ears {
                let c: Vec<Complex64> = gt.filter(ear).iter().map(|z| compress_sample(*z, cfg.compression_exp)).collect();
                let hc = haircell_band(&c, cfg.haircell_cutoff_hz, cfg.haircell_order, fs as f64);
                g.push(dc_blocked_gammatone(fc, cfg.itf_gammatone_order, fs as f64, &hc));
                comp.push(c);
            }
            let ild = ild_band(&comp[0], &comp[1], fs, cfg);
            let itf: Vec<Complex64> = g[0].iter().zip(&g[1]).map(|(l, r)| l * r.conj()).collect();
            let ipd = if k < n_ipd {
                itf.iter().map(|z| ipd_sample(*z)).collect()
            } else {
                Vec::new()
            };
            let ivs = ivs_band(&itf, fc, fs, cfg.ivs_tau_cycles);
            (ild, ipd, ivs)
        })
        .collect();
    let mut maps = AuditoryCueMaps {
        sample_rate: fs,
        center_freqs: centers,
        ild: Vec::with_capacity(cfg.n_bands),
        ipd: Vec::with_capacity(n_ipd),
        ivs: Vec::with_capacity(cfg.n_bands),
    };
    for (k, (ild, ipd, ivs)) in per_band.into_iter().enumerate() {
        maps.ild.push(ild);
        if k < n_ipd {
            maps.ipd.push(ipd);
        }
        maps.ivs.push(ivs);
    }
    Ok(maps)
}
