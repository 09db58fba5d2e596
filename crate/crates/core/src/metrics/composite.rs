use serde::{Deserialize, Serialize};

use super::binaural::BinauralTerms;

pub const EMA_DECAY: f64 = 0.99;
pub const EMA_FLOOR: f64 = 1e-8;

/// Which binaural term enters the composite loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinauralVariant {
    Auditory,
    Stft,
}

/// Raw loss values of one batch: negative weighted SI-SDR, STFT,
/// magnitude STFT and the three binaural cue terms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossComponents {
    pub si_sdr: f64,
    pub stft: f64,
    pub mag_stft: f64,
    pub binaural: BinauralTerms,
}

impl LossComponents {
    pub fn to_array(&self) -> [f64; 6] {
        [
            self.si_sdr,
            self.stft,
            self.mag_stft,
            self.binaural.ild,
            self.binaural.ipd,
            self.binaural.ivs,
        ]
    }
}

/// Running averages that normalise each component, carried between calls.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NormalizerState {
    pub ema: [Option<f64>; 6],
}

/// Weighted sum of components, each divided by its running average. The
/// average starts at the first value seen, so the first call normalises
/// every component to exactly 1 (or -1 for the negative SI-SDR term).
pub fn composite_loss(components: [f64; 6], weights: [f64; 6], state: NormalizerState) -> (f64, NormalizerState) {
    let mut next = state;
    let mut total = 0.0;
    for i in 0..6 {
        let v = components[i];
        let avg = match state.ema[i] {
            None => v,
            Some(m) => EMA_DECAY * m + (1.0 - EMA_DECAY) * v,
        };
        next.ema[i] = Some(avg);
        total += weights[i] * v / avg.abs().max(EMA_FLOOR);
    }
    (total, next)
}
