//! Signal-level and binaural losses, the running-average composite and
//! grouped evaluation reports.

mod binaural;
mod composite;
mod reference;
mod report;
mod signal;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use binaural::{
    auditory_binaural_loss, stft_binaural_loss, wrapped_diff, AuditoryLoss, BinauralLoss, BinauralTerms, StftLoss,
};
pub use composite::{composite_loss, BinauralVariant, LossComponents, NormalizerState, EMA_DECAY, EMA_FLOOR};
pub use reference::{loss_reference, LossReference};
pub use report::{
    evaluate_pairs, item_metrics, rotation_bin, EvalContext, GroupRow, ItemMeta, ItemMetrics, MetricReport,
    CSV_HEADER, ROTATION_BINS,
};
pub use signal::{mag_stft_loss, si_sdr, si_sdr_ears, stft_loss, weighted_si_sdr_loss, SI_SDR_CLAMP_DB, SPEC_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EarWeights {
    pub right: f64,
    pub left: f64,
}

impl EarWeights {
    /// The far (right) ear counts double while training.
    pub fn training() -> Self {
        Self {
            right: 2.0 / 3.0,
            left: 1.0 / 3.0,
        }
    }

    pub fn evaluation() -> Self {
        Self { right: 0.5, left: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub lambda: f64,
    pub kappa: f64,
    pub delta_stft: f64,
    pub lambda_stft: f64,
    pub ear_weights: EarWeights,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            gamma: 0.5,
            delta: 1.0,
            lambda: 1.0,
            kappa: 0.5,
            delta_stft: 1.0,
            lambda_stft: 1.0,
            ear_weights: EarWeights::training(),
        }
    }
}

impl LossWeights {
    pub fn evaluation() -> Self {
        Self {
            ear_weights: EarWeights::evaluation(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.alpha,
            self.beta,
            self.gamma,
            self.delta,
            self.lambda,
            self.kappa,
            self.delta_stft,
            self.lambda_stft,
            self.ear_weights.right,
            self.ear_weights.left,
        ];
        if all.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Config("loss weights must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// Weights for [`composite_loss`] in component order.
    pub fn composite(&self, variant: BinauralVariant) -> [f64; 6] {
        match variant {
            BinauralVariant::Auditory => [self.alpha, self.beta, self.gamma, self.delta, self.lambda, self.kappa],
            BinauralVariant::Stft => [self.alpha, self.beta, self.gamma, self.delta_stft, self.lambda_stft, 0.0],
        }
    }
}
