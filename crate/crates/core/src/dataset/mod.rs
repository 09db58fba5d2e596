//! Scene sampling, input/target pair rendering and the on-disk dataset
//! (WAV tree plus JSON-lines manifest).

mod manifest;
mod pipeline;
mod scene;
mod speech;

pub use manifest::{
    assign_splits, build_dataset, pair_paths, plan_scene, read_manifest, write_manifest, DatasetConfig,
    DatasetSummary, ManifestRecord, SplitSizes, MANIFEST_FILE, MANIFEST_VERSION, MIN_SCENES,
};
pub use pipeline::{PairGenerator, PairOutput, PipelineConfig};
pub use scene::{sample_scene, scene_id, scene_rng, Range, SceneRanges, SceneSpec, Split, MAX_REJECTIONS};
pub use speech::{
    rms_dbfs, synthetic_speech, write_synthetic_corpus, SegmentConfig, SpeechCorpus, SpeechSegment,
};
