use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::scene::SceneSpec;
use crate::acoustics::{
    enumerate_images, reflection_for, simulate_recording, ArrayGeometry, ImageLimits, ImageSourceList,
    RecordingRenderer, ReflectionModel,
};
use crate::bsm::{render_binaural, BankMeta, BsmConfig, BsmDesigner, RenderJob};
use crate::error::{Error, Result};
use crate::hrtf::HrtfProvider;
use crate::registry::renderers;
use crate::signal::{istft, stft, AudioBuffer, StftConfig};

/// Everything that turns a scene and a speech clip into a binaural pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub stft: StftConfig,
    pub bsm: BsmConfig,
    pub array: ArrayGeometry,
    /// Registered recording renderer.
    pub renderer: String,
    pub reflection: ReflectionModel,
    /// Image sources are kept up to this multiple of the scene's T60.
    pub rir_length_t60: f64,
    /// Common peak of each normalised pair.
    pub peak: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            stft: StftConfig::default(),
            bsm: BsmConfig::default(),
            array: ArrayGeometry::default(),
            renderer: "tabulated".into(),
            reflection: ReflectionModel::Calibrated,
            rir_length_t60: 1.0,
            peak: 0.9,
        }
    }
}

/// One rendered input/target pair with its shared normalisation gain.
#[derive(Debug, Clone)]
pub struct PairOutput {
    pub input: AudioBuffer,
    pub target: AudioBuffer,
    pub gain: f64,
    pub reflection: f64,
    pub input_filters: BankMeta,
    pub target_filters: BankMeta,
}

/// Shared state for rendering many scenes: the array's design systems,
/// cached filter banks, renderer and HRTFs.
pub struct PairGenerator {
    cfg: PipelineConfig,
    designer: BsmDesigner,
    renderer: Arc<dyn RecordingRenderer>,
    hrtf: Arc<dyn HrtfProvider>,
}

impl PairGenerator {
    pub fn new(cfg: &PipelineConfig, hrtf: Arc<dyn HrtfProvider>) -> Result<Self> {
        if !(cfg.peak > 0.0) || !(cfg.rir_length_t60 > 0.0) {
            return Err(Error::Config("peak and rir_length_t60 must be positive".into()));
        }
        let designer = BsmDesigner::new(&cfg.bsm, &cfg.array, &cfg.stft)?;
        let renderer = renderers().get(&cfg.renderer)?;
        Ok(Self {
            cfg: cfg.clone(),
            designer,
            renderer,
            hrtf,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn designer(&self) -> &BsmDesigner {
        &self.designer
    }

    pub fn hrtf(&self) -> &dyn HrtfProvider {
        self.hrtf.as_ref()
    }

    /// Wall reflection and image sources of a scene.
    pub fn images(&self, scene: &SceneSpec) -> Result<(f64, ImageSourceList)> {
        let fs = self.cfg.stft.sample_rate;
        let r = reflection_for(&scene.room, scene.source_pos, scene.array_pos, self.cfg.reflection, fs)?;
        let images = enumerate_images(
            &scene.room,
            r,
            scene.source_pos,
            scene.array_pos,
            ImageLimits {
                max_delay: scene.room.t60 * self.cfg.rir_length_t60,
                max_order: None,
            },
        )?;
        Ok((r, images))
    }

    /// Array recording with the array at `yaw_deg`.
    pub fn record(&self, images: &ImageSourceList, speech: &AudioBuffer, yaw_deg: f64) -> Result<AudioBuffer> {
        simulate_recording(
            images,
            speech,
            &self.cfg.array.with_yaw(yaw_deg),
            self.cfg.bsm.speed_of_sound,
            self.renderer.as_ref(),
            None,
        )
    }

    /// Binaural rendering of `recording` with the filters of `job`.
    pub fn render(&self, job: &RenderJob, recording: &AudioBuffer) -> Result<(AudioBuffer, BankMeta)> {
        let bank = self.designer.design_job(job, self.hrtf.as_ref())?;
        let mics = stft(recording, &self.cfg.stft)?;
        let ears = render_binaural(&bank, &mics)?;
        Ok((istft(&ears, &self.cfg.stft)?, bank.meta.clone()))
    }

    /// Input: array at the scene yaw, filters compensating the head
    /// rotation. Target: array turned with the head, unrotated filters.
    /// Both are scaled by one gain so the louder reaches `peak`.
    pub fn generate_pair(&self, scene: &SceneSpec, speech: &AudioBuffer) -> Result<PairOutput> {
        if speech.num_channels() != 1 {
            return Err(Error::ChannelCount {
                expected: 1,
                actual: speech.num_channels(),
            });
        }
        if speech.sample_rate() != self.cfg.stft.sample_rate {
            return Err(Error::SampleRateMismatch {
                expected: self.cfg.stft.sample_rate,
                actual: speech.sample_rate(),
            });
        }
        let (reflection, images) = self.images(scene)?;
        let mut out = Vec::with_capacity(2);
        for job in [RenderJob::input(scene.rotation_deg), RenderJob::target(scene.rotation_deg)] {
            let rec = self.record(&images, speech, job.array_yaw_deg(scene.array_yaw_deg))?;
            out.push(self.render(&job, &rec)?);
        }
        let (target, target_filters) = out.pop().expect("two jobs rendered");
        let (input, input_filters) = out.pop().expect("two jobs rendered");
        let loudest = input.peak().max(target.peak());
        let gain = if loudest > 0.0 { self.cfg.peak / loudest } else { 1.0 };
        Ok(PairOutput {
            input: input.scaled(gain),
            target: target.scaled(gain),
            gain,
            reflection,
            input_filters,
            target_filters,
        })
    }
}
