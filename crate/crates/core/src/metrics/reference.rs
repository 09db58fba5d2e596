use serde::{Deserialize, Serialize};

use super::binaural::{auditory_binaural_loss, stft_binaural_loss, BinauralTerms};
use super::composite::LossComponents;
use super::signal::{mag_stft_loss, stft_loss, weighted_si_sdr_loss};
use super::LossWeights;
use crate::auditory::{analyze, AuditoryConfig};
use crate::error::Result;
use crate::signal::{stft, AudioBuffer, StftConfig};

/// Raw training-loss terms of one pair under both binaural variants, the
/// values an external re-implementation is checked against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReference {
    pub id: String,
    /// Negative ear-weighted SI-SDR.
    pub si_sdr: f64,
    pub stft: f64,
    pub mag_stft: f64,
    pub auditory: BinauralTerms,
    pub stft_binaural: BinauralTerms,
}

impl LossReference {
    pub fn components(&self, auditory: bool) -> LossComponents {
        LossComponents {
            si_sdr: self.si_sdr,
            stft: self.stft,
            mag_stft: self.mag_stft,
            binaural: if auditory { self.auditory } else { self.stft_binaural },
        }
    }
}

pub fn loss_reference(
    id: &str,
    reference: &AudioBuffer,
    estimate: &AudioBuffer,
    stft_cfg: &StftConfig,
    auditory: &AuditoryConfig,
    weights: &LossWeights,
    cutoff_hz: f64,
) -> Result<LossReference> {
    let si = weighted_si_sdr_loss(reference, estimate, weights.ear_weights)?;
    let (sr, se) = (stft(reference, stft_cfg)?, stft(estimate, stft_cfg)?);
    Ok(LossReference {
        id: id.to_string(),
        si_sdr: si,
        stft: stft_loss(&sr, &se, cutoff_hz)?,
        mag_stft: mag_stft_loss(&sr, &se, cutoff_hz)?,
        auditory: auditory_binaural_loss(&analyze(reference, auditory)?, &analyze(estimate, auditory)?, weights)?,
        stft_binaural: stft_binaural_loss(&sr, &se, weights)?,
    })
}
