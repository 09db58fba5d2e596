//! Name-keyed registries of interchangeable strategies.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use crate::acoustics::{ExactRenderer, RecordingRenderer, TabulatedRenderer};
use crate::error::{Error, Result};
use crate::hrtf::{load_hrir_pack, AnalyticHrtf, HrtfProvider};
use crate::metrics::{AuditoryLoss, BinauralLoss, StftLoss};

pub struct Registry<T: ?Sized> {
    kind: &'static str,
    entries: BTreeMap<String, Arc<T>>,
}

impl<T: ?Sized> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: BTreeMap::new(),
        }
    }

    /// Adds or replaces a strategy.
    pub fn register(&mut self, name: impl Into<String>, item: Arc<T>) {
        self.entries.insert(name.into(), item);
    }

    pub fn get(&self, name: &str) -> Result<Arc<T>> {
        self.entries
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownStrategy {
                kind: self.kind,
                name: name.to_string(),
                available: self.names().join(", "),
            })
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.keys().cloned().collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }
}

pub fn renderers() -> Registry<dyn RecordingRenderer> {
    let mut r: Registry<dyn RecordingRenderer> = Registry::new("renderer");
    r.register("exact", Arc::new(ExactRenderer));
    r.register("tabulated", Arc::new(TabulatedRenderer::default()));
    r
}

/// `"analytic"` or the path of an HRIR pack.
pub fn hrtf_provider(spec: &str) -> Result<Arc<dyn HrtfProvider>> {
    if spec == "analytic" {
        return Ok(Arc::new(AnalyticHrtf::default()));
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(Error::HrirPack(format!("{spec}: no such file")));
    }
    Ok(Arc::new(load_hrir_pack(path)?))
}

pub fn binaural_losses() -> Registry<dyn BinauralLoss> {
    let mut r: Registry<dyn BinauralLoss> = Registry::new("binaural loss");
    r.register("auditory", Arc::new(AuditoryLoss::default()));
    r.register("stft", Arc::new(StftLoss::default()));
    r
}

pub use crate::bsm::filter_designs;
