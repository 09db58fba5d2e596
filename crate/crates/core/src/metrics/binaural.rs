use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::signal::{check_binaural, SPEC_EPS};
use super::LossWeights;
use crate::auditory::{analyze, AuditoryConfig, AuditoryCueMaps};
use crate::error::{Error, Result};
use crate::signal::{stft, AudioBuffer, ComplexSpectrogram, StftConfig};

/// Shortest signed arc from `b` to `a`, in (-π, π].
pub fn wrapped_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

/// Cue losses plus their weighted combination. STFT-based terms leave `ivs`
/// at zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BinauralTerms {
    pub ild: f64,
    pub ipd: f64,
    pub ivs: f64,
    pub combined: f64,
}

fn check_cue_grid(a: &AuditoryCueMaps, b: &AuditoryCueMaps) -> Result<()> {
    let shape = |m: &AuditoryCueMaps| (m.n_bands(), m.n_ipd_bands(), m.ivs.len(), m.n_samples());
    if shape(a) != shape(b) || a.center_freqs != b.center_freqs {
        return Err(Error::GridMismatch(format!(
            "cue maps {:?} vs {:?} (ild bands, ipd bands, ivs bands, samples)",
            shape(a),
            shape(b)
        )));
    }
    Ok(())
}

fn mse(a: &[Vec<f64>], b: &[Vec<f64>], diff: impl Fn(f64, f64) -> f64) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (x, y) in a.iter().zip(b) {
        for (p, q) in x.iter().zip(y) {
            let d = diff(*p, *q);
            sum += d * d;
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Mean squared ILD, wrapped IPD and IVS differences between two cue maps.
pub fn auditory_binaural_loss(
    reference: &AuditoryCueMaps,
    estimate: &AuditoryCueMaps,
    w: &LossWeights,
) -> Result<BinauralTerms> {
    check_cue_grid(reference, estimate)?;
    let ild = mse(&reference.ild, &estimate.ild, |a, b| a - b);
    let ipd = mse(&reference.ipd, &estimate.ipd, wrapped_diff);
    let ivs = mse(&reference.ivs, &estimate.ivs, |a, b| a - b);
    Ok(BinauralTerms {
        ild,
        ipd,
        ivs,
        combined: w.delta * ild + w.lambda * ipd + w.kappa * ivs,
    })
}

/// ILD and IPD read directly off the binaural STFT, compared over every
/// cell.
pub fn stft_binaural_loss(
    reference: &ComplexSpectrogram,
    estimate: &ComplexSpectrogram,
    w: &LossWeights,
) -> Result<BinauralTerms> {
    reference.check_same_grid(estimate)?;
    if reference.n_channels() != 2 {
        return Err(Error::ChannelCount {
            expected: 2,
            actual: reference.n_channels(),
        });
    }
    let cues = |s: &ComplexSpectrogram, t: usize, k: usize| {
        let (l, r) = (s.get(0, t, k), s.get(1, t, k));
        let ild = 20.0 * ((l.norm() + SPEC_EPS) / (r.norm() + SPEC_EPS)).log10();
        let x = l * r.conj();
        let ipd = if x.norm() == 0.0 { 0.0 } else { x.arg() };
        (ild, ipd)
    };
    let (mut s_ild, mut s_ipd) = (0.0, 0.0);
    let n = reference.n_frames() * reference.n_bins();
    for t in 0..reference.n_frames() {
        for k in 0..reference.n_bins() {
            let (ia, pa) = cues(reference, t, k);
            let (ib, pb) = cues(estimate, t, k);
            s_ild += (ia - ib) * (ia - ib);
            s_ipd += wrapped_diff(pa, pb).powi(2);
        }
    }
    let (ild, ipd) = if n == 0 { (0.0, 0.0) } else { (s_ild / n as f64, s_ipd / n as f64) };
    Ok(BinauralTerms {
        ild,
        ipd,
        ivs: 0.0,
        combined: w.delta_stft * ild + w.lambda_stft * ipd,
    })
}

/// Binaural loss evaluated on time-domain pairs.
pub trait BinauralLoss: Send + Sync {
    fn name(&self) -> &'static str;
    fn evaluate(&self, reference: &AudioBuffer, estimate: &AudioBuffer, w: &LossWeights) -> Result<BinauralTerms>;
}

#[derive(Debug, Clone, Default)]
pub struct AuditoryLoss {
    pub config: AuditoryConfig,
}

impl BinauralLoss for AuditoryLoss {
    fn name(&self) -> &'static str {
        "auditory"
    }

    fn evaluate(&self, reference: &AudioBuffer, estimate: &AudioBuffer, w: &LossWeights) -> Result<BinauralTerms> {
        check_binaural(reference, estimate)?;
        let a = analyze(reference, &self.config)?;
        let b = analyze(estimate, &self.config)?;
        auditory_binaural_loss(&a, &b, w)
    }
}

#[derive(Debug, Clone, Default)]
pub struct StftLoss {
    pub stft: StftConfig,
}

impl BinauralLoss for StftLoss {
    fn name(&self) -> &'static str {
        "stft"
    }

    fn evaluate(&self, reference: &AudioBuffer, estimate: &AudioBuffer, w: &LossWeights) -> Result<BinauralTerms> {
        check_binaural(reference, estimate)?;
        stft_binaural_loss(&stft(reference, &self.stft)?, &stft(estimate, &self.stft)?, w)
    }
}
