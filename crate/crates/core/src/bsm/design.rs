use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::bank::{assemble_filterbank, magls_start_bin, BankMeta, BsmFilterBank, EarDesigns};
use super::solve::{DesignSystems, MaglsBin, MaglsSettings};
use crate::acoustics::{ArrayGeometry, SteeringSet, DEFAULT_SPEED_OF_SOUND};
use crate::error::{Error, Result};
use crate::geometry::{fibonacci_grid, Direction};
use crate::hrtf::{design_targets, HrtfProvider, HrtfTargets};
use crate::registry::Registry;
use crate::signal::StftConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BsmConfig {
    /// Points of the near-uniform design grid.
    pub design_points: usize,
    /// σ_s² / σ_n².
    pub snr_ratio: f64,
    pub cutoff_hz: f64,
    pub magls: MaglsSettings,
    /// Registered filter design name.
    pub design: String,
    pub speed_of_sound: f64,
}

impl Default for BsmConfig {
    fn default() -> Self {
        Self {
            design_points: 240,
            snr_ratio: 1e3,
            cutoff_hz: 1500.0,
            magls: MaglsSettings::default(),
            design: "bsm-magls".into(),
            speed_of_sound: DEFAULT_SPEED_OF_SOUND,
        }
    }
}

impl BsmConfig {
    pub fn validate(&self, stft: &StftConfig, mics: usize) -> Result<()> {
        if self.design_points < mics {
            return Err(Error::Config(format!(
                "design grid of {} points is smaller than the {mics} microphones",
                self.design_points
            )));
        }
        if !(self.snr_ratio > 0.0) || !self.snr_ratio.is_finite() {
            return Err(Error::Config("snr_ratio must be positive".into()));
        }
        if !(0.0..=stft.nyquist()).contains(&self.cutoff_hz) {
            return Err(Error::Config(format!(
                "cutoff {} Hz outside [0, {}]",
                self.cutoff_hz,
                stft.nyquist()
            )));
        }
        if self.magls.max_iter == 0 || !(self.magls.tol > 0.0) {
            return Err(Error::Config("magls needs max_iter ≥ 1 and tol > 0".into()));
        }
        Ok(())
    }

    pub fn design_grid(&self) -> Vec<Direction> {
        fibonacci_grid(self.design_points)
    }
}

/// A filter design strategy: turns factored systems and HRTF targets into
/// a filter bank.
pub trait FilterDesign: Send + Sync {
    fn name(&self) -> &'static str;

    fn design(
        &self,
        systems: &DesignSystems<'_>,
        targets: &HrtfTargets,
        cfg: &BsmConfig,
        stft: &StftConfig,
    ) -> Result<BsmFilterBank>;
}

fn design_with_cutoff(
    name: &str,
    systems: &DesignSystems<'_>,
    targets: &HrtfTargets,
    cfg: &BsmConfig,
    stft: &StftConfig,
    cutoff_hz: f64,
) -> Result<BsmFilterBank> {
    let start = magls_start_bin(stft, cutoff_hz);
    let n = stft.n_bins();
    let ear = |h: &[Vec<num_complex::Complex64>]| -> Result<_> {
        let ls = systems.ls_filters(h)?;
        let mut magls: Vec<Option<MaglsBin>> = vec![None; start];
        magls.extend(systems.magls_filters(h, &cfg.magls, start..n)?.into_iter().map(Some));
        Ok((ls, magls))
    };
    let (l, r) = rayon::join(|| ear(&targets.left), || ear(&targets.right));
    let (ls_l, mg_l) = l?;
    let (ls_r, mg_r) = r?;
    let meta = BankMeta {
        design: name.into(),
        hrtf: String::new(),
        hrtf_rotation_deg: targets.rotation_deg,
        max_lookup_error_deg: targets.max_lookup_error_deg,
        snr_ratio: cfg.snr_ratio,
        design_directions: systems.directions(),
    };
    assemble_filterbank(
        stft,
        cutoff_hz,
        EarDesigns { ls: &ls_l, magls: &mg_l },
        EarDesigns { ls: &ls_r, magls: &mg_r },
        meta,
    )
}

/// LS below the cutoff, MagLS above.
pub struct BsmMaglsDesign;

impl FilterDesign for BsmMaglsDesign {
    fn name(&self) -> &'static str {
        "bsm-magls"
    }

    fn design(&self, s: &DesignSystems<'_>, t: &HrtfTargets, cfg: &BsmConfig, stft: &StftConfig) -> Result<BsmFilterBank> {
        design_with_cutoff(self.name(), s, t, cfg, stft, cfg.cutoff_hz)
    }
}

/// Complex LS on every bin.
pub struct LsDesign;

impl FilterDesign for LsDesign {
    fn name(&self) -> &'static str {
        "ls"
    }

    fn design(&self, s: &DesignSystems<'_>, t: &HrtfTargets, cfg: &BsmConfig, stft: &StftConfig) -> Result<BsmFilterBank> {
        design_with_cutoff(self.name(), s, t, cfg, stft, stft.nyquist())
    }
}

/// MagLS on every bin.
pub struct MaglsDesign;

impl FilterDesign for MaglsDesign {
    fn name(&self) -> &'static str {
        "magls"
    }

    fn design(&self, s: &DesignSystems<'_>, t: &HrtfTargets, cfg: &BsmConfig, stft: &StftConfig) -> Result<BsmFilterBank> {
        design_with_cutoff(self.name(), s, t, cfg, stft, 0.0)
    }
}

pub fn filter_designs() -> Registry<dyn FilterDesign> {
    let mut r: Registry<dyn FilterDesign> = Registry::new("filter design");
    r.register("bsm-magls", Arc::new(BsmMaglsDesign));
    r.register("ls", Arc::new(LsDesign));
    r.register("magls", Arc::new(MaglsDesign));
    r
}

/// The two branches of the input/target pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RenderConfiguration {
    /// Head turned by φ_rot, array fixed, filters compensate the rotation.
    InputCompensated,
    /// Array turned together with the head.
    TargetAligned,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderJob {
    pub configuration: RenderConfiguration,
    /// Rightward head rotation, degrees.
    pub rotation_deg: f64,
}

impl RenderJob {
    pub fn input(rotation_deg: f64) -> Self {
        Self {
            configuration: RenderConfiguration::InputCompensated,
            rotation_deg,
        }
    }

    pub fn target(rotation_deg: f64) -> Self {
        Self {
            configuration: RenderConfiguration::TargetAligned,
            rotation_deg,
        }
    }

    /// Rotation applied to HRTF lookups, in the array's own frame. With the
    /// array co-rotated the head is aligned with it again.
    pub fn hrtf_rotation_deg(&self) -> f64 {
        match self.configuration {
            RenderConfiguration::InputCompensated => self.rotation_deg,
            RenderConfiguration::TargetAligned => 0.0,
        }
    }

    /// World yaw of the recording array given its unrotated yaw. A rightward
    /// turn is clockwise seen from above, i.e. a negative yaw.
    pub fn array_yaw_deg(&self, base_yaw_deg: f64) -> f64 {
        match self.configuration {
            RenderConfiguration::InputCompensated => base_yaw_deg,
            RenderConfiguration::TargetAligned => base_yaw_deg - self.rotation_deg,
        }
    }
}

/// Steering, factored systems and design strategy for one array geometry,
/// with banks cached per HRTF rotation.
pub struct BsmDesigner {
    cfg: BsmConfig,
    stft: StftConfig,
    grid: Vec<Direction>,
    steering: SteeringSet,
    design: Arc<dyn FilterDesign>,
    cache: Mutex<HashMap<(usize, u64), Arc<BsmFilterBank>>>,
}

impl BsmDesigner {
    /// Steering is evaluated in the array's own frame (yaw ignored).
    pub fn new(cfg: &BsmConfig, geom: &ArrayGeometry, stft: &StftConfig) -> Result<Self> {
        stft.validate()?;
        cfg.validate(stft, geom.mic_count())?;
        let design = filter_designs().get(&cfg.design)?;
        let grid = cfg.design_grid();
        let local = geom.with_yaw(0.0);
        let steering = SteeringSet::new(&local, &grid, &stft.frequencies(), cfg.speed_of_sound);
        // factor once up front so configuration errors surface here
        DesignSystems::new(&steering, cfg.snr_ratio)?;
        Ok(Self {
            cfg: cfg.clone(),
            stft: *stft,
            grid,
            steering,
            design,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &BsmConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &[Direction] {
        &self.grid
    }

    pub fn steering(&self) -> &SteeringSet {
        &self.steering
    }

    pub fn systems(&self) -> Result<DesignSystems<'_>> {
        DesignSystems::new(&self.steering, self.cfg.snr_ratio)
    }

    pub fn targets(&self, hrtf: &dyn HrtfProvider, rotation_deg: f64) -> Result<HrtfTargets> {
        design_targets(hrtf, &self.grid, rotation_deg, &self.stft)
    }

    /// Filters for HRTF targets looked up with `rotation_deg`.
    pub fn design(&self, hrtf: &dyn HrtfProvider, rotation_deg: f64) -> Result<Arc<BsmFilterBank>> {
        // keyed by provider identity: two sets can share a name
        let key = (hrtf as *const dyn HrtfProvider as *const () as usize, rotation_deg.to_bits());
        if let Some(b) = self.cache.lock().expect("bank cache poisoned").get(&key) {
            return Ok(b.clone());
        }
        let targets = self.targets(hrtf, rotation_deg)?;
        let systems = self.systems()?;
        let mut bank = self.design.design(&systems, &targets, &self.cfg, &self.stft)?;
        bank.meta.hrtf = hrtf.name();
        let bank = Arc::new(bank);
        self.cache
            .lock()
            .expect("bank cache poisoned")
            .entry(key)
            .or_insert(bank.clone());
        Ok(bank)
    }

    pub fn design_job(&self, job: &RenderJob, hrtf: &dyn HrtfProvider) -> Result<Arc<BsmFilterBank>> {
        self.design(hrtf, job.hrtf_rotation_deg())
    }
}

/// One-shot filter design for a render job.
pub fn build_job_filters(
    job: &RenderJob,
    cfg: &BsmConfig,
    geom: &ArrayGeometry,
    hrtf: &dyn HrtfProvider,
    stft: &StftConfig,
) -> Result<BsmFilterBank> {
    let designer = BsmDesigner::new(cfg, geom, stft)?;
    Ok((*designer.design_job(job, hrtf)?).clone())
}
