//! Tool-wide configuration: defaults, overridden by a JSON file, overridden
//! by command-line flags.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::auditory::AuditoryConfig;
use crate::dataset::{DatasetConfig, PipelineConfig, SceneRanges, SegmentConfig};
use crate::error::{Error, Result};
use crate::metrics::{EvalContext, LossWeights};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolConfig {
    pub master_seed: u64,
    pub n_scenes: usize,
    /// `"analytic"` or the path of an HRIR pack.
    pub hrir: String,
    /// Worker threads; `None` uses every core.
    pub jobs: Option<usize>,
    pub ranges: SceneRanges,
    pub segments: SegmentConfig,
    pub pipeline: PipelineConfig,
    pub auditory: AuditoryConfig,
    /// Weights of the training loss (far ear emphasised).
    pub training: LossWeights,
    /// Weights used for reports (ears equal).
    pub evaluation: LossWeights,
    /// LS / MagLS split used by the STFT losses, Hz.
    pub loss_cutoff_hz: f64,
}

impl Default for ToolConfig {
    fn default() -> Self {
        Self {
            master_seed: 0,
            n_scenes: 100,
            hrir: "analytic".into(),
            jobs: None,
            ranges: SceneRanges::default(),
            segments: SegmentConfig::default(),
            pipeline: PipelineConfig::default(),
            auditory: AuditoryConfig::default(),
            training: LossWeights::default(),
            evaluation: LossWeights::evaluation(),
            loss_cutoff_hz: 1500.0,
        }
    }
}

impl ToolConfig {
    /// Defaults, or defaults overridden by the keys present in `path`.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let cfg = match path {
            None => Self::default(),
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
        };
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.ranges.validate()?;
        self.pipeline.stft.validate()?;
        self.pipeline.bsm.validate(&self.pipeline.stft, self.pipeline.array.mic_count())?;
        self.auditory.validate(self.pipeline.stft.sample_rate)?;
        self.training.validate()?;
        self.evaluation.validate()?;
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        if !(self.loss_cutoff_hz >= 0.0) {
            return Err(Error::Config("loss_cutoff_hz must be non-negative".into()));
        }
        Ok(())
    }

    pub fn dataset(&self) -> DatasetConfig {
        DatasetConfig {
            master_seed: self.master_seed,
            n_scenes: self.n_scenes,
            ranges: self.ranges,
            segments: self.segments,
            pipeline: self.pipeline.clone(),
        }
    }

    pub fn eval_context(&self) -> EvalContext {
        EvalContext {
            stft: self.pipeline.stft,
            auditory: self.auditory.clone(),
            weights: self.evaluation,
            cutoff_hz: self.loss_cutoff_hz,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_overrides_only_given_keys() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        fs::write(&p, r#"{"master_seed": 9, "pipeline": {"peak": 0.5}, "auditory": {"n_bands": 20}}"#).unwrap();
        let c = ToolConfig::load(Some(&p)).unwrap();
        assert_eq!(c.master_seed, 9);
        assert_eq!(c.pipeline.peak, 0.5);
        assert_eq!(c.pipeline.renderer, "tabulated");
        assert_eq!(c.auditory.n_bands, 20);
        assert_eq!(c.auditory.f_hi, 6000.0);
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        for text in [r#"{"seed": 1}"#, r#"{"pipeline": {"peek": 1}}"#, r#"{"ranges": {"t60": {"lo": 0.3, "hi": 0.8, "mid": 1}}}"#] {
            let p = dir.path().join("c.json");
            fs::write(&p, text).unwrap();
            assert!(matches!(ToolConfig::load(Some(&p)), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn defaults() {
        let c = ToolConfig::default();
        c.validate().unwrap();
        assert_eq!(c.pipeline.stft.window_len, 1024);
        assert_eq!(c.pipeline.stft.hop, 256);
        assert_eq!(c.training.ear_weights.right, 2.0 / 3.0);
        assert_eq!(c.evaluation.ear_weights.left, 0.5);
        let back: ToolConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
