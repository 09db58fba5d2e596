use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pipeline::{PairGenerator, PipelineConfig};
use super::scene::{sample_scene, scene_rng, SceneRanges, SceneSpec, Split};
use super::speech::{SegmentConfig, SpeechCorpus};
use crate::error::{Error, Result};
use crate::hrtf::HrtfProvider;
use crate::metrics::rotation_bin;
use crate::signal::write_audio;

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const MANIFEST_VERSION: u32 = 1;
pub const MIN_SCENES: usize = 10;

// keeps the speech draw independent of the geometry draw
const SPEECH_STREAM_SALT: u64 = 0x5bd1_e995_9e37_79b9;
const SPLIT_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub master_seed: u64,
    pub n_scenes: usize,
    pub ranges: SceneRanges,
    pub segments: SegmentConfig,
    pub pipeline: PipelineConfig,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            master_seed: 0,
            n_scenes: 100,
            ranges: SceneRanges::default(),
            segments: SegmentConfig::default(),
            pipeline: PipelineConfig::default(),
        }
    }
}

/// One line of the manifest. Paths are relative to the dataset root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    pub version: u32,
    pub id: String,
    pub split: Split,
    pub rotation_bin: Option<String>,
    pub input: String,
    pub target: String,
    pub samples: usize,
    pub sample_rate: u32,
    /// Common gain applied to input and target.
    pub gain: f64,
    pub reflection: f64,
    pub scene: SceneSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub scenes: usize,
    pub skipped: usize,
    pub skipped_indices: Vec<u64>,
    pub splits: SplitSizes,
    pub manifest: PathBuf,
}

/// 80/10/10 split of scene indices (rounded, test takes the remainder),
/// shuffled by a stream of the master seed reserved for this purpose.
pub fn assign_splits(master_seed: u64, n_scenes: usize) -> Vec<Split> {
    let n_train = (0.8 * n_scenes as f64).round() as usize;
    let n_val = ((0.1 * n_scenes as f64).round() as usize).min(n_scenes - n_train);
    let mut order: Vec<usize> = (0..n_scenes).collect();
    order.shuffle(&mut scene_rng(master_seed, SPLIT_STREAM));
    let mut splits = vec![Split::Test; n_scenes];
    for (rank, &i) in order.iter().enumerate() {
        if rank < n_train {
            splits[i] = Split::Train;
        } else if rank < n_train + n_val {
            splits[i] = Split::Val;
        }
    }
    splits
}

/// Scene `index` with its split and speech segment filled in, or `None`
/// when its geometry is infeasible.
pub fn plan_scene(
    cfg: &DatasetConfig,
    corpus: &SpeechCorpus,
    index: u64,
    split: Split,
) -> Result<Option<(SceneSpec, usize)>> {
    let mut scene = match sample_scene(cfg.master_seed, index, &cfg.ranges) {
        Ok(s) => s,
        Err(Error::Infeasible(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let mut rng = scene_rng(cfg.master_seed ^ SPEECH_STREAM_SALT, index);
    let seg = rand::Rng::gen_range(&mut rng, 0..corpus.len());
    scene.split = split;
    scene.speech_ref = corpus.segments[seg].reference.clone();
    Ok(Some((scene, seg)))
}

pub fn pair_paths(scene: &SceneSpec) -> (String, String) {
    let dir = scene.split.as_str();
    (
        format!("{dir}/{}_input.wav", scene.id),
        format!("{dir}/{}_target.wav", scene.id),
    )
}

/// Samples, renders and writes every scene, then the manifest. Output
/// bytes depend only on the config, corpus and HRTFs, not on `jobs`.
pub fn build_dataset(
    cfg: &DatasetConfig,
    corpus: &SpeechCorpus,
    hrtf: Arc<dyn HrtfProvider>,
    out_dir: impl AsRef<Path>,
    jobs: Option<usize>,
) -> Result<DatasetSummary> {
    if cfg.n_scenes < MIN_SCENES {
        return Err(Error::Config(format!("need at least {MIN_SCENES} scenes, got {}", cfg.n_scenes)));
    }
    if corpus.is_empty() {
        return Err(Error::Corpus("no speech segments".into()));
    }
    cfg.ranges.validate()?;
    let out = out_dir.as_ref();
    for s in Split::ALL {
        fs::create_dir_all(out.join(s.as_str()))?;
    }
    let generator = PairGenerator::new(&cfg.pipeline, hrtf)?;
    let splits = assign_splits(cfg.master_seed, cfg.n_scenes);

    let work = || -> Result<Vec<Option<ManifestRecord>>> {
        (0..cfg.n_scenes)
            .into_par_iter()
            .map(|i| -> Result<Option<ManifestRecord>> {
                let Some((scene, seg)) = plan_scene(cfg, corpus, i as u64, splits[i])? else {
                    return Ok(None);
                };
                let pair = generator.generate_pair(&scene, &corpus.segments[seg].audio)?;
                let (input, target) = pair_paths(&scene);
                write_audio(out.join(&input), &pair.input)?;
                write_audio(out.join(&target), &pair.target)?;
                Ok(Some(ManifestRecord {
                    version: MANIFEST_VERSION,
                    id: scene.id.clone(),
                    split: scene.split,
                    rotation_bin: rotation_bin(scene.rotation_deg),
                    input,
                    target,
                    samples: pair.input.len(),
                    sample_rate: pair.input.sample_rate(),
                    gain: pair.gain,
                    reflection: pair.reflection,
                    scene,
                }))
            })
            .collect()
    };
    let results = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };

    let mut skipped_indices = Vec::new();
    let mut records = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Some(r) => records.push(r),
            None => skipped_indices.push(i as u64),
        }
    }
    let manifest = out.join(MANIFEST_FILE);
    write_manifest(&manifest, &records)?;
    let count = |s: Split| records.iter().filter(|r| r.split == s).count();
    Ok(DatasetSummary {
        scenes: records.len(),
        skipped: skipped_indices.len(),
        skipped_indices,
        splits: SplitSizes {
            train: count(Split::Train),
            val: count(Split::Val),
            test: count(Split::Test),
        },
        manifest,
    })
}

pub fn write_manifest(path: impl AsRef<Path>, records: &[ManifestRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: ManifestRecord = serde_json::from_str(&line)?;
        if r.version != MANIFEST_VERSION {
            return Err(Error::Config(format!(
                "manifest version {} (supported: {MANIFEST_VERSION})",
                r.version
            )));
        }
        out.push(r);
    }
    Ok(out)
}
