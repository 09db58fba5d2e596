use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use bsmkit::auditory::{analyze, write_cue_maps};
use bsmkit::bsm::{BsmDesigner, FilterMethod, MaglsOrigin};
use bsmkit::config::ToolConfig;
use bsmkit::dataset::{
    build_dataset, read_manifest, synthetic_speech, PairGenerator, SceneSpec, Split, SpeechCorpus,
};
use bsmkit::hrtf::HrtfProvider;
use bsmkit::metrics::{
    auditory_binaural_loss, evaluate_pairs, loss_reference, ItemMeta, LossReference, MetricReport,
};
use bsmkit::registry::hrtf_provider;
use bsmkit::signal::{read_audio, write_audio, AudioBuffer};
use bsmkit::Error;

#[derive(Parser)]
#[command(name = "bsmkit", version, about = "Head-rotation compensated binaural signal matching toolkit")]
struct Cli {
    /// JSON config; keys override defaults, flags override keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (output never depends on it).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// "analytic" or the path of an HRIR pack.
    #[arg(long, global = true)]
    hrir: Option<String>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate scenes and write the input/target WAV tree and manifest.
    Dataset(DatasetArgs),
    /// Render the input/target pair of one scene.
    Render(RenderArgs),
    /// Score a directory of estimates against the dataset targets.
    Evaluate(EvaluateArgs),
    /// Dump the auditory cue maps of a binaural WAV.
    Cues(CuesArgs),
    /// Design and dump the filter bank for a scene or rotation.
    Filters(FiltersArgs),
}

#[derive(Args)]
struct DatasetArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    scenes: Option<usize>,
    /// Directory of mono speech WAVs.
    #[arg(long, conflicts_with = "synthetic")]
    corpus: Option<PathBuf>,
    /// Use N generated speech-like clips instead of a corpus.
    #[arg(long, value_name = "N")]
    synthetic: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    /// SceneSpec JSON, or {"scene": SceneSpec, "hrir": ...}.
    scene: PathBuf,
    /// Overrides the scene's head rotation.
    #[arg(long)]
    rotation_deg: Option<f64>,
    /// Corpus holding the scene's speech clip; generated speech otherwise.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Dataset root holding the reference WAVs.
    #[arg(long)]
    ref_dir: PathBuf,
    /// Directory with one estimate per scene: <id>.wav or a unique <id>_*.wav.
    #[arg(long)]
    est_dir: PathBuf,
    /// Defaults to <ref-dir>/manifest.jsonl.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitArg,
    /// Writes report.csv and report.json here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Format printed to stdout.
    #[arg(long, value_enum, default_value = "csv")]
    report_format: ReportFormat,
    /// Also write training-loss terms per pair as JSON lines.
    #[arg(long)]
    loss_reference: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
    All,
}

#[derive(Args)]
struct CuesArgs {
    /// Binaural WAV (channel 0 left, 1 right).
    wav: PathBuf,
    /// Reference WAV; adds the binaural loss terms to the summary.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FiltersArgs {
    /// Scene whose input filters are dumped.
    #[arg(long, conflicts_with = "rotation_deg")]
    scene: Option<PathBuf>,
    #[arg(long)]
    rotation_deg: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

struct Failure {
    code: &'static str,
    message: String,
    exit: u8,
}

impl Failure {
    fn user(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            exit: 2,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, exit) = match &e {
            Error::Config(_) | Error::UnknownStrategy { .. } | Error::Infeasible(_) => ("INVALID_CONFIG", 2),
            Error::Corpus(_) => ("INVALID_CORPUS", 2),
            Error::HrirPack(_) | Error::DuplicateDirection { .. } | Error::EmptyHrtfSet => ("INVALID_HRTF", 2),
            Error::Json(_) => ("INVALID_INPUT", 2),
            Error::Wav(_)
            | Error::UnsupportedEncoding(_)
            | Error::ChannelCount { .. }
            | Error::SampleRateMismatch { .. }
            | Error::LengthMismatch(_)
            | Error::EmptySignal
            | Error::ZeroReference => ("INVALID_AUDIO", 2),
            Error::Io(_) => ("IO_ERROR", 1),
            _ => ("INTERNAL", 1),
        };
        Self {
            code,
            message: e.to_string(),
            exit,
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", json!({"error": {"code": f.code, "message": f.message}}));
            ExitCode::from(f.exit)
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = ToolConfig::load(cli.config.as_deref())?;
    if let Some(j) = cli.jobs {
        cfg.jobs = Some(j);
    }
    if let Some(h) = cli.hrir {
        cfg.hrir = h;
    }
    if let Command::Dataset(a) = &cli.cmd {
        if let Some(s) = a.seed {
            cfg.master_seed = s;
        }
        if let Some(n) = a.scenes {
            cfg.n_scenes = n;
        }
    }
    cfg.validate()?;
    if let Some(n) = cfg.jobs {
        // only fails when a global pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.cmd {
        Command::Dataset(a) => cmd_dataset(&cfg, a),
        Command::Render(a) => cmd_render(cfg, a),
        Command::Evaluate(a) => cmd_evaluate(&cfg, a),
        Command::Cues(a) => cmd_cues(&cfg, a),
        Command::Filters(a) => cmd_filters(&cfg, a),
    }
}

fn print_json<T: Serialize>(value: &T) -> CliResult<()> {
    println!("{}", serde_json::to_string_pretty(value).map_err(Error::from)?);
    Ok(())
}

fn load_hrtf(spec: &str) -> CliResult<Arc<dyn HrtfProvider>> {
    if spec != "analytic" && !Path::new(spec).exists() {
        return Err(Failure::user("HRTF_NOT_FOUND", format!("hrir pack not found: {spec}")));
    }
    Ok(hrtf_provider(spec)?)
}

fn load_corpus(dir: &Path, cfg: &ToolConfig) -> CliResult<SpeechCorpus> {
    if !dir.is_dir() {
        return Err(Failure::user(
            "CORPUS_NOT_FOUND",
            format!("corpus directory not found: {}", dir.display()),
        ));
    }
    Ok(SpeechCorpus::load(dir, &cfg.segments)?)
}

const SYNTHETIC_CLIP_SECS: f64 = 6.0;

fn synthetic_corpus(n: usize, cfg: &ToolConfig) -> CliResult<SpeechCorpus> {
    if n == 0 {
        return Err(Failure::user("INVALID_CONFIG", "--synthetic needs at least one clip"));
    }
    let fs = cfg.pipeline.stft.sample_rate;
    let clips = (0..n)
        .map(|k| (format!("synth_{k:04}"), synthetic_speech(cfg.master_seed.wrapping_add(k as u64), SYNTHETIC_CLIP_SECS, fs)))
        .collect();
    Ok(SpeechCorpus::from_clips(clips, &cfg.segments)?)
}

fn cmd_dataset(cfg: &ToolConfig, a: DatasetArgs) -> CliResult<()> {
    let corpus = match (&a.corpus, a.synthetic) {
        (Some(dir), _) => load_corpus(dir, cfg)?,
        (None, Some(n)) => synthetic_corpus(n, cfg)?,
        (None, None) => return Err(Failure::user("CORPUS_NOT_FOUND", "give --corpus DIR or --synthetic N")),
    };
    let hrtf = load_hrtf(&cfg.hrir)?;
    let summary = build_dataset(&cfg.dataset(), &corpus, hrtf, &a.out, cfg.jobs)?;
    print_json(&json!({
        "scenes": summary.scenes,
        "skipped": summary.skipped,
        "skipped_indices": summary.skipped_indices,
        "skipped_segments": corpus.skipped_quiet,
        "splits": summary.splits,
        "manifest": summary.manifest,
    }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RenderSpec {
    scene: SceneSpec,
    #[serde(default)]
    hrir: Option<String>,
}

fn read_render_spec(path: &Path) -> CliResult<RenderSpec> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::user("INVALID_INPUT", format!("{}: {e}", path.display())))?;
    if let Ok(scene) = serde_json::from_str::<SceneSpec>(&text) {
        return Ok(RenderSpec { scene, hrir: None });
    }
    serde_json::from_str(&text).map_err(|e| Failure::user("INVALID_SPEC", format!("{}: {e}", path.display())))
}

fn speech_for(scene: &SceneSpec, corpus: Option<&Path>, cfg: &ToolConfig) -> CliResult<AudioBuffer> {
    let Some(dir) = corpus else {
        return Ok(synthetic_speech(scene.index, cfg.segments.segment_secs, cfg.pipeline.stft.sample_rate));
    };
    let corpus = load_corpus(dir, cfg)?;
    corpus
        .segments
        .iter()
        .find(|s| s.reference == scene.speech_ref)
        .map(|s| s.audio.clone())
        .ok_or_else(|| {
            Failure::user(
                "INVALID_SPEC",
                format!("speech segment '{}' not in {}", scene.speech_ref, dir.display()),
            )
        })
}

fn rel_diff(a: &AudioBuffer, b: &AudioBuffer) -> (f64, f64) {
    let (mut num, mut den, mut max) = (0.0, 0.0, 0.0f64);
    for ch in 0..a.num_channels() {
        for (x, y) in a.channel(ch).iter().zip(b.channel(ch)) {
            num += (x - y) * (x - y);
            den += y * y;
            max = max.max((x - y).abs());
        }
    }
    let rel = if den > 0.0 { (num / den).sqrt() } else { num.sqrt() };
    (max, rel)
}

fn cmd_render(mut cfg: ToolConfig, a: RenderArgs) -> CliResult<()> {
    let spec = read_render_spec(&a.scene)?;
    if let Some(h) = spec.hrir {
        cfg.hrir = h;
    }
    let mut scene = spec.scene;
    if let Some(r) = a.rotation_deg {
        if !r.is_finite() {
            return Err(Failure::user("INVALID_INPUT", "--rotation-deg must be finite"));
        }
        scene.rotation_deg = r;
    }
    let hrtf = load_hrtf(&cfg.hrir)?;
    let speech = speech_for(&scene, a.corpus.as_deref(), &cfg)?;
    let generator = PairGenerator::new(&cfg.pipeline, hrtf)?;
    let pair = generator.generate_pair(&scene, &speech)?;

    fs::create_dir_all(&a.out).map_err(Error::from)?;
    write_audio(a.out.join("input.wav"), &pair.input)?;
    write_audio(a.out.join("target.wav"), &pair.target)?;
    let designer = generator.designer();
    designer.design(generator.hrtf(), scene.rotation_deg)?.save(a.out.join("input.bank"))?;
    designer.design(generator.hrtf(), 0.0)?.save(a.out.join("target.bank"))?;

    let (max_abs, rel) = rel_diff(&pair.input, &pair.target);
    let report = json!({
        "id": scene.id,
        "rotation_deg": scene.rotation_deg,
        "samples": pair.input.len(),
        "source_samples": speech.len(),
        "sample_rate": pair.input.sample_rate(),
        "gain": pair.gain,
        "reflection": pair.reflection,
        "diff": {
            "identical": pair.input == pair.target,
            "max_abs": max_abs,
            "relative_l2": rel,
        },
    });
    fs::write(a.out.join("render.json"), serde_json::to_vec_pretty(&report).map_err(Error::from)?)
        .map_err(Error::from)?;
    print_json(&report)
}

fn find_estimate(dir: &Path, id: &str) -> CliResult<Option<PathBuf>> {
    let exact = dir.join(format!("{id}.wav"));
    if exact.is_file() {
        return Ok(Some(exact));
    }
    let prefix = format!("{id}_");
    let mut found = Vec::new();
    for entry in fs::read_dir(dir).map_err(Error::from)? {
        let name = entry.map_err(Error::from)?.file_name();
        let name = name.to_string_lossy();
        if name.starts_with(&prefix) && name.ends_with(".wav") {
            found.push(dir.join(name.as_ref()));
        }
    }
    found.sort();
    match found.len() {
        0 => Ok(None),
        1 => Ok(found.pop()),
        _ => Err(Failure::user(
            "AMBIGUOUS_ESTIMATE",
            format!("several estimates for {id} in {}", dir.display()),
        )),
    }
}

#[derive(Serialize)]
struct EvaluateOutput<'a> {
    partial: bool,
    missing: &'a [String],
    #[serde(flatten)]
    report: &'a MetricReport,
}

fn cmd_evaluate(cfg: &ToolConfig, a: EvaluateArgs) -> CliResult<()> {
    let manifest = a.manifest.clone().unwrap_or_else(|| a.ref_dir.join(bsmkit::dataset::MANIFEST_FILE));
    if !manifest.is_file() {
        return Err(Failure::user("MANIFEST_NOT_FOUND", format!("{} not found", manifest.display())));
    }
    if !a.est_dir.is_dir() {
        return Err(Failure::user("ESTIMATES_NOT_FOUND", format!("{} is not a directory", a.est_dir.display())));
    }
    let wanted = match a.split {
        SplitArg::Train => Some(Split::Train),
        SplitArg::Val => Some(Split::Val),
        SplitArg::Test => Some(Split::Test),
        SplitArg::All => None,
    };
    let rows: Vec<_> = read_manifest(&manifest)?
        .into_iter()
        .filter(|r| wanted.map_or(true, |s| r.split == s))
        .collect();

    let mut pairs = Vec::new();
    let mut missing = Vec::new();
    for r in &rows {
        match find_estimate(&a.est_dir, &r.id)? {
            Some(est) => {
                let reference = read_audio(a.ref_dir.join(&r.target))?;
                let estimate = read_audio(&est)?;
                let meta = ItemMeta {
                    id: r.id.clone(),
                    rotation_deg: r.scene.rotation_deg,
                };
                pairs.push((reference, estimate, meta));
            }
            None => {
                eprintln!("warning: no estimate for {}", r.id);
                missing.push(r.id.clone());
            }
        }
    }
    if pairs.is_empty() {
        return Err(Failure::user("ESTIMATES_NOT_FOUND", "no estimate matches a manifest row"));
    }
    let report = evaluate_pairs(&pairs, &cfg.eval_context())?;
    let out = EvaluateOutput {
        partial: !missing.is_empty(),
        missing: &missing,
        report: &report,
    };
    let json_text = serde_json::to_string_pretty(&out).map_err(Error::from)?;
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir).map_err(Error::from)?;
        fs::write(dir.join("report.json"), &json_text).map_err(Error::from)?;
        report.write_csv(dir.join("report.csv"))?;
    }
    if let Some(path) = &a.loss_reference {
        write_loss_reference(path, &pairs, cfg)?;
    }
    match a.report_format {
        ReportFormat::Csv => print!("{}", report.to_csv()),
        ReportFormat::Json => println!("{json_text}"),
    }
    Ok(())
}

fn write_loss_reference(path: &Path, pairs: &[(AudioBuffer, AudioBuffer, ItemMeta)], cfg: &ToolConfig) -> CliResult<()> {
    use rayon::prelude::*;
    let refs: Vec<LossReference> = pairs
        .par_iter()
        .map(|(r, e, m)| {
            loss_reference(&m.id, r, e, &cfg.pipeline.stft, &cfg.auditory, &cfg.training, cfg.loss_cutoff_hz)
        })
        .collect::<bsmkit::Result<_>>()?;
    let mut text = String::new();
    for r in &refs {
        text.push_str(&serde_json::to_string(r).map_err(Error::from)?);
        text.push('\n');
    }
    fs::write(path, text).map_err(Error::from)?;
    Ok(())
}

fn cmd_cues(cfg: &ToolConfig, a: CuesArgs) -> CliResult<()> {
    let read = |p: &Path| -> CliResult<AudioBuffer> {
        if !p.is_file() {
            return Err(Failure::user("INVALID_INPUT", format!("{} not found", p.display())));
        }
        Ok(read_audio(p)?)
    };
    let audio = read(&a.wav)?;
    let maps = analyze(&audio, &cfg.auditory)?;
    write_cue_maps(&a.out, &maps)?;
    let mean = |m: &[Vec<f64>]| -> Vec<f64> {
        m.iter().map(|b| b.iter().sum::<f64>() / b.len().max(1) as f64).collect()
    };
    let mut summary = json!({
        "samples": maps.n_samples(),
        "sample_rate": maps.sample_rate,
        "center_freqs": maps.center_freqs,
        "mean_ild_db": mean(&maps.ild),
        "mean_ivs": mean(&maps.ivs),
        "ipd_bands": maps.n_ipd_bands(),
    });
    if let Some(rp) = &a.reference {
        let reference = analyze(&read(rp)?, &cfg.auditory)?;
        let terms = auditory_binaural_loss(&reference, &maps, &cfg.evaluation)?;
        summary["loss"] = serde_json::to_value(terms).map_err(Error::from)?;
    }
    print_json(&summary)
}

fn cmd_filters(cfg: &ToolConfig, a: FiltersArgs) -> CliResult<()> {
    let mut hrir = cfg.hrir.clone();
    let rotation = match (&a.scene, a.rotation_deg) {
        (Some(p), _) => {
            let spec = read_render_spec(p)?;
            if let Some(h) = spec.hrir {
                hrir = h;
            }
            spec.scene.rotation_deg
        }
        (None, Some(r)) if r.is_finite() => r,
        _ => return Err(Failure::user("INVALID_INPUT", "give --scene PATH or a finite --rotation-deg")),
    };
    let hrtf = load_hrtf(&hrir)?;
    let designer = BsmDesigner::new(&cfg.pipeline.bsm, &cfg.pipeline.array, &cfg.pipeline.stft)?;
    let bank = designer.design(hrtf.as_ref(), rotation)?;
    bank.save(&a.out)?;

    let stats: Vec<_> = bank.magls_left.iter().chain(&bank.magls_right).flatten().collect();
    let origin = |o: MaglsOrigin| stats.iter().filter(|s| s.origin == o).count();
    print_json(&json!({
        "path": a.out,
        "rotation_deg": rotation,
        "bins": bank.methods.len(),
        "mics": bank.mics,
        "ls_bins": bank.methods.iter().filter(|m| **m == FilterMethod::Ls).count(),
        "magls_bins": bank.methods.iter().filter(|m| **m == FilterMethod::Magls).count(),
        "magls_converged": stats.iter().filter(|s| s.converged).count(),
        "magls_origin": {
            "initial": origin(MaglsOrigin::Initial),
            "ls_restart": origin(MaglsOrigin::LsRestart),
            "best_iterate": origin(MaglsOrigin::BestIterate),
        },
        "meta": bank.meta,
    }))
}
