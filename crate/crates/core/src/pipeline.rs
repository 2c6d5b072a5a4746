//! Experiment lifecycle behind the command-line verbs: prepare a feature
//! cache, train a framework, evaluate it, fuse prediction files, and
//! collate reports.
//!
//! Cache layout (under the resolved cache directory):
//!
//! ```text
//! cache.json               prepared kinds and format version
//! manifest.csv             cycle_id,recording_id,patient_id,label,split
//! <kind>/<rec>__<NNN>.rkft one feature file per cycle and kind
//! ```
//!
//! Training output (under `out_dir`): `checkpoint/`, `history.csv` and
//! `run.json` (the resolved config). Evaluation writes
//! `predictions_<split>.csv`, `report_<split>.json` and `report_<split>.md`.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::{AugmentConfig, SoftLabel};
use crate::dataio::{
    extract_cycle, fix_duration, load_recording, make_split, parse_annotations, parse_split_table, scan_dataset,
    CycleRecord, Label, Split,
};
use crate::error::{Error, Result};
use crate::features::{extract, read_feature_file, write_feature_file, Spectrogram, SpectrogramKind, CYCLE_SECONDS};
use crate::fusion::{concat_embedding_rows, fuse_prediction_sets, PredictionSet};
use crate::metrics::{confusion, icbhi_scores, MetricsReport};
use crate::models::{
    build_backbone, build_inception_net, fixture_embedding_provider, load_checkpoint, save_checkpoint,
    spectrogram_batch, BackboneName, EmbeddingProvider, InceptionSpec, Network, NetworkTapProvider, NUM_CLASSES,
};
use crate::seed::subseed;
use crate::train::{embed_all, train_mlp_on_vectors, train_model, LabeledSpectrogram, TrainConfig, TrainHistory};

/// Overrides every configured cache location.
pub const CACHE_ENV: &str = "RESPKIT_CACHE_DIR";

const CACHE_VERSION: u32 = 1;
const EVAL_CHUNK: usize = 8;

/// Source of frozen embeddings for the transfer-learning framework.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProviderConfig {
    /// Deterministic stand-in shaped like a pretrained global-pooling layer.
    Fixture {
        #[serde(default = "default_provider_dim")]
        dim: usize,
        #[serde(default)]
        seed: u64,
    },
}

fn default_provider_dim() -> usize {
    2048
}

impl ProviderConfig {
    pub fn build(&self) -> Result<Box<dyn EmbeddingProvider>> {
        match *self {
            ProviderConfig::Fixture { dim, seed } => Ok(Box::new(fixture_embedding_provider(dim, seed)?)),
        }
    }
}

/// Which framework `train` builds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "framework", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    /// Inception network trained on wavelet scalograms.
    Inception { spec: String },
    /// Benchmark backbone trained from scratch on wavelet scalograms.
    Backbone { name: BackboneName },
    /// MLP head over provider embeddings of log-mel spectrograms.
    Embedding { provider: ProviderConfig },
    /// MLP head over a trained inception network's "GMP" tap concatenated
    /// with provider embeddings.
    EarlyFusion { checkpoint: PathBuf, provider: ProviderConfig },
    /// As early fusion, reading the "FC2" tap instead.
    MiddleFusion { checkpoint: PathBuf, provider: ProviderConfig },
}

impl ModelConfig {
    fn fusion_tap(&self) -> Option<(&Path, &'static str)> {
        match self {
            ModelConfig::EarlyFusion { checkpoint, .. } => Some((checkpoint, "GMP")),
            ModelConfig::MiddleFusion { checkpoint, .. } => Some((checkpoint, "FC2")),
            _ => None,
        }
    }

    fn provider(&self) -> Option<&ProviderConfig> {
        match self {
            ModelConfig::Embedding { provider }
            | ModelConfig::EarlyFusion { provider, .. }
            | ModelConfig::MiddleFusion { provider, .. } => Some(provider),
            _ => None,
        }
    }

    /// Spectrogram kinds the model reads.
    pub fn required_kinds(&self) -> Result<Vec<SpectrogramKind>> {
        let mut kinds = match self {
            ModelConfig::Inception { .. } | ModelConfig::Backbone { .. } => vec![SpectrogramKind::Wavelet],
            _ => vec![],
        };
        if let Some((path, _)) = self.fusion_tap() {
            let net = load_checkpoint(path)?;
            match net.input_contract() {
                crate::models::InputContract::Spectrogram { kind } => kinds.push(kind),
                _ => return Err(Error::Config(format!("{} is not a spectrogram network", path.display()))),
            }
        }
        if let Some(p) = self.provider() {
            kinds.push(p.build()?.input_kind());
        }
        kinds.dedup();
        Ok(kinds)
    }
}

fn default_features() -> Vec<SpectrogramKind> {
    vec![SpectrogramKind::Wavelet, SpectrogramKind::LogMel]
}

/// Everything one run needs; a stored config plus its seed reproduces it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Directory holding `<stem>.wav` / `<stem>.txt` pairs.
    pub dataset_dir: PathBuf,
    /// Two-column `<stem> <train|test>` table.
    pub split_file: PathBuf,
    /// Feature cache; defaults to `<out_dir>/cache`, and `RESPKIT_CACHE_DIR`
    /// overrides both.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    /// Kinds `prepare` extracts.
    #[serde(default = "default_features")]
    pub features: Vec<SpectrogramKind>,
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    /// Spectrogram augmentation for frameworks I and II; defaults to the
    /// settings for the model's input kind.
    #[serde(default)]
    pub augment: Option<AugmentConfig>,
    pub out_dir: PathBuf,
    /// Root of every random substream (initialization, order, augmentation,
    /// dropout). Replaces `train.seed`.
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentConfig {
    /// Read a JSON config, resolving relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut cfg: Self =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.dataset_dir);
        fix(&mut cfg.split_file);
        fix(&mut cfg.out_dir);
        if let Some(c) = cfg.cache_dir.as_mut() {
            fix(c);
        }
        match &mut cfg.model {
            ModelConfig::EarlyFusion { checkpoint, .. } | ModelConfig::MiddleFusion { checkpoint, .. } => fix(checkpoint),
            _ => {}
        }
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn cache_dir(&self) -> PathBuf {
        match std::env::var_os(CACHE_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.cache_dir.clone().unwrap_or_else(|| self.out_dir.join("cache")),
        }
    }

    /// Training settings with the root seed applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }
}

/// One row of `manifest.csv`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow {
    pub cycle_id: String,
    pub recording_id: String,
    pub patient_id: String,
    pub label: Label,
    pub split: Split,
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheInfo {
    version: u32,
    kinds: Vec<SpectrogramKind>,
}

fn feature_path(cache: &Path, kind: SpectrogramKind, recording_id: &str, index: usize) -> PathBuf {
    cache.join(kind.to_string()).join(format!("{recording_id}__{index:03}.rkft"))
}

fn write_manifest(path: &Path, rows: &[ManifestRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["cycle_id", "recording_id", "patient_id", "label", "split"])?;
    for r in rows {
        w.write_record([
            r.cycle_id.as_str(),
            &r.recording_id,
            &r.patient_id,
            r.label.as_str(),
            &r.split.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Read `manifest.csv` from a prepared cache.
pub fn read_manifest(cache: &Path) -> Result<Vec<ManifestRow>> {
    let path = cache.join("manifest.csv");
    if !path.is_file() {
        return Err(Error::Config(format!("no prepared cache at {} (run prepare first)", cache.display())));
    }
    let mut r = csv::Reader::from_path(&path)?;
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |message: String| Error::Parse { line: i + 2, message };
        if rec.len() != 5 {
            return Err(bad(format!("expected 5 fields, found {}", rec.len())));
        }
        rows.push(ManifestRow {
            cycle_id: rec[0].to_string(),
            recording_id: rec[1].to_string(),
            patient_id: rec[2].to_string(),
            label: rec[3].parse().map_err(|e: Error| bad(e.to_string()))?,
            split: rec[4].parse().map_err(|e: Error| bad(e.to_string()))?,
        });
    }
    Ok(rows)
}

fn cycle_index(row: &ManifestRow) -> Result<usize> {
    row.cycle_id
        .rsplit_once('#')
        .and_then(|(_, i)| i.parse().ok())
        .ok_or_else(|| Error::Integrity(format!("malformed cycle id `{}`", row.cycle_id)))
}

/// What `prepare` produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrepareSummary {
    pub cache_dir: PathBuf,
    pub cycles: usize,
    pub train_cycles: usize,
    pub test_cycles: usize,
}

/// Scan the dataset, check the split, and write one feature file per cycle
/// and configured kind plus the manifest.
pub fn cmd_prepare(cfg: &ExperimentConfig) -> Result<PrepareSummary> {
    if cfg.features.is_empty() {
        return Err(Error::Config("no feature kinds configured".into()));
    }
    let files = scan_dataset(&cfg.dataset_dir)?;
    let mut records = Vec::new();
    for f in &files {
        records.extend(parse_annotations(&fs::read_to_string(&f.annotations)?, &f.recording_id)?);
    }
    let table = parse_split_table(&fs::read_to_string(&cfg.split_file)?)?;
    let assignment = make_split(&records, &table)?;

    let cache = cfg.cache_dir();
    for kind in &cfg.features {
        fs::create_dir_all(cache.join(kind.to_string()))?;
    }
    let clips: Vec<_> = files
        .par_iter()
        .map(|f| load_recording(&f.wav).map(|c| (f.recording_id.clone(), Arc::new(c))))
        .collect::<Result<_>>()?;
    let clips: BTreeMap<String, _> = clips.into_iter().collect();
    let jobs: Vec<(&CycleRecord, SpectrogramKind)> =
        records.iter().flat_map(|r| cfg.features.iter().map(move |&k| (r, k))).collect();
    jobs.par_iter().try_for_each(|&(rec, kind)| -> Result<()> {
        let clip = fix_duration(&extract_cycle(&clips[&rec.recording_id], rec)?, CYCLE_SECONDS)?;
        let spec = extract(&clip, kind)?;
        write_feature_file(&feature_path(&cache, kind, &rec.recording_id, rec.index), rec, &spec)
    })?;

    let rows: Vec<ManifestRow> = records
        .iter()
        .map(|r| ManifestRow {
            cycle_id: r.cycle_id(),
            recording_id: r.recording_id.clone(),
            patient_id: r.patient_id.clone(),
            label: r.label,
            split: assignment.get(&r.recording_id).expect("assigned by make_split"),
        })
        .collect();
    write_manifest(&cache.join("manifest.csv"), &rows)?;
    let info = CacheInfo {
        version: CACHE_VERSION,
        kinds: cfg.features.clone(),
    };
    fs::write(cache.join("cache.json"), serde_json::to_string_pretty(&info)?)?;
    let train_cycles = rows.iter().filter(|r| r.split == Split::Train).count();
    log::info!("prepared {} cycles into {}", rows.len(), cache.display());
    Ok(PrepareSummary {
        cache_dir: cache,
        cycles: rows.len(),
        train_cycles,
        test_cycles: rows.len() - train_cycles,
    })
}

fn check_cache_kinds(cache: &Path, model: &ModelConfig) -> Result<()> {
    let path = cache.join("cache.json");
    let text = fs::read_to_string(&path)
        .map_err(|_| Error::Config(format!("no prepared cache at {} (run prepare first)", cache.display())))?;
    let info: CacheInfo = serde_json::from_str(&text)?;
    if info.version != CACHE_VERSION {
        return Err(Error::Config(format!("cache version {} (expected {CACHE_VERSION})", info.version)));
    }
    for kind in model.required_kinds()? {
        if !info.kinds.contains(&kind) {
            return Err(Error::Config(format!(
                "model needs {kind} features but the cache at {} holds {:?}",
                cache.display(),
                info.kinds.iter().map(|k| k.to_string()).collect::<Vec<_>>()
            )));
        }
    }
    Ok(())
}

/// Load one kind of cached feature for `rows`; a missing file is an
/// integrity error.
pub fn load_features(cache: &Path, kind: SpectrogramKind, rows: &[&ManifestRow]) -> Result<Vec<Spectrogram>> {
    rows.iter()
        .map(|row| {
            let path = feature_path(cache, kind, &row.recording_id, cycle_index(row)?);
            if !path.is_file() {
                return Err(Error::Integrity(format!("cycle {} has no {kind} features in the cache", row.cycle_id)));
            }
            let file = read_feature_file(&path)?;
            if file.record.cycle_id() != row.cycle_id || file.spectrogram.kind() != kind {
                return Err(Error::Integrity(format!("{} does not hold {} {kind}", path.display(), row.cycle_id)));
            }
            Ok(file.spectrogram)
        })
        .collect()
}

fn split_rows(manifest: &[ManifestRow], split: Split) -> Vec<&ManifestRow> {
    manifest.iter().filter(|r| r.split == split).collect()
}

/// Embedding matrix for the vector-input frameworks.
fn vector_inputs(cfg: &ExperimentConfig, cache: &Path, rows: &[&ManifestRow]) -> Result<Array2<f32>> {
    let provider = cfg
        .model
        .provider()
        .ok_or_else(|| Error::Config("model has no embedding provider".into()))?
        .build()?;
    let specs = load_features(cache, provider.input_kind(), rows)?;
    let provided = embed_all(provider.as_ref(), specs.iter())?;
    match cfg.model.fusion_tap() {
        None => Ok(provided),
        Some((checkpoint, tap)) => {
            let tapper = NetworkTapProvider::new(load_checkpoint(checkpoint)?, tap)?;
            let specs = load_features(cache, tapper.input_kind(), rows)?;
            let tapped = embed_all(&tapper, specs.iter())?;
            concat_embedding_rows(tapped.view(), provided.view())
        }
    }
}

fn build_spectrogram_model(model: &ModelConfig, seed: u64) -> Result<Network> {
    let init = subseed(seed, "init");
    match model {
        ModelConfig::Inception { spec } => build_inception_net(&InceptionSpec::by_name(spec)?, init),
        ModelConfig::Backbone { name } => build_backbone(name.as_str(), init),
        _ => unreachable!("vector frameworks are built by the trainer"),
    }
}

fn is_spectrogram_model(model: &ModelConfig) -> bool {
    matches!(model, ModelConfig::Inception { .. } | ModelConfig::Backbone { .. })
}

/// What `train` produced.
#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub checkpoint: PathBuf,
    pub history: TrainHistory,
    pub param_count: usize,
}

/// Train the configured framework on the train split.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<TrainSummary> {
    let cache = cfg.cache_dir();
    check_cache_kinds(&cache, &cfg.model)?;
    let manifest = read_manifest(&cache)?;
    let rows = split_rows(&manifest, Split::Train);
    if rows.is_empty() {
        return Err(Error::Config("the train split is empty".into()));
    }
    let labels: Vec<SoftLabel> = rows.iter().map(|r| SoftLabel::one_hot(r.label)).collect();
    let train_cfg = cfg.train_config();
    let (net, history) = if is_spectrogram_model(&cfg.model) {
        let net = build_spectrogram_model(&cfg.model, cfg.seed)?;
        let kind = SpectrogramKind::Wavelet;
        let set: Vec<LabeledSpectrogram> = load_features(&cache, kind, &rows)?
            .into_iter()
            .zip(&labels)
            .map(|(spectrogram, &label)| LabeledSpectrogram { spectrogram, label })
            .collect();
        let augment = cfg.augment.unwrap_or_else(|| AugmentConfig::for_kind(kind));
        train_model(net, &set, &train_cfg, &augment)?
    } else {
        let x = vector_inputs(cfg, &cache, &rows)?;
        train_mlp_on_vectors(x.view(), &labels, &train_cfg)?
    };
    fs::create_dir_all(&cfg.out_dir)?;
    let checkpoint = cfg.out_dir.join("checkpoint");
    save_checkpoint(&net, &checkpoint)?;
    history.save_csv(&cfg.out_dir.join("history.csv"))?;
    cfg.save(&cfg.out_dir.join("run.json"))?;
    Ok(TrainSummary {
        checkpoint,
        history,
        param_count: net.param_count(),
    })
}

/// Probabilities for every cycle in `rows` from a trained checkpoint.
fn predict(cfg: &ExperimentConfig, net: &Network, cache: &Path, rows: &[&ManifestRow]) -> Result<PredictionSet> {
    let probs: Array2<f32> = if is_spectrogram_model(&cfg.model) {
        let specs = load_features(cache, SpectrogramKind::Wavelet, rows)?;
        let mut out = Array2::zeros((rows.len(), NUM_CLASSES));
        for (c, chunk) in specs.chunks(EVAL_CHUNK).enumerate() {
            let refs: Vec<&Spectrogram> = chunk.iter().collect();
            let p = net.forward(spectrogram_batch(&refs)?)?;
            out.slice_mut(ndarray::s![c * EVAL_CHUNK..c * EVAL_CHUNK + chunk.len(), ..]).assign(&p);
        }
        out
    } else {
        net.forward(vector_inputs(cfg, cache, rows)?.into_dyn())?
    };
    let mut set = PredictionSet::new(net.descriptor().label());
    for (row, p) in rows.iter().zip(probs.rows()) {
        let mut v = [0.0f64; NUM_CLASSES];
        v.iter_mut().zip(p).for_each(|(d, &s)| *d = s as f64);
        let sum: f64 = v.iter().sum();
        v.iter_mut().for_each(|d| *d /= sum);
        set.insert(row.cycle_id.clone(), v)?;
    }
    Ok(set)
}

/// Score `predicted` against the manifest labels of `split`; every cycle of
/// the split must be present.
pub fn score_predictions(manifest: &[ManifestRow], split: Split, predicted: &BTreeMap<String, usize>) -> Result<MetricsReport> {
    let rows = split_rows(manifest, split);
    if predicted.len() != rows.len() {
        return Err(Error::Integrity(format!(
            "{} predictions for {} {split} cycles",
            predicted.len(),
            rows.len()
        )));
    }
    let mut truth = Vec::with_capacity(rows.len());
    let mut pred = Vec::with_capacity(rows.len());
    for row in rows {
        let p = predicted
            .get(&row.cycle_id)
            .ok_or_else(|| Error::Integrity(format!("no prediction for {split} cycle {}", row.cycle_id)))?;
        truth.push(row.label.index());
        pred.push(*p);
    }
    icbhi_scores(&confusion(&truth, &pred)?)
}

fn write_report(out_dir: &Path, stem: &str, name: &str, report: &MetricsReport) -> Result<()> {
    fs::write(out_dir.join(format!("{stem}.json")), report.to_json()?)?;
    fs::write(out_dir.join(format!("{stem}.md")), report.to_markdown(name))?;
    Ok(())
}

/// What `evaluate` produced.
#[derive(Debug, Clone)]
pub struct EvaluateSummary {
    pub framework: String,
    pub predictions: PathBuf,
    pub report: MetricsReport,
}

/// Predict every cycle of `split` with the trained checkpoint and score it.
pub fn cmd_evaluate(cfg: &ExperimentConfig, split: Split) -> Result<EvaluateSummary> {
    let cache = cfg.cache_dir();
    check_cache_kinds(&cache, &cfg.model)?;
    let manifest = read_manifest(&cache)?;
    let net = load_checkpoint(&cfg.out_dir.join("checkpoint"))?;
    let rows = split_rows(&manifest, split);
    if rows.is_empty() {
        return Err(Error::Config(format!("the {split} split is empty")));
    }
    let set = predict(cfg, &net, &cache, &rows)?;
    let predictions = cfg.out_dir.join(format!("predictions_{split}.csv"));
    set.write_csv(BufWriter::new(File::create(&predictions)?))?;
    let report = score_predictions(&manifest, split, &set.labels())?;
    write_report(&cfg.out_dir, &format!("report_{split}"), &set.framework_id, &report)?;
    Ok(EvaluateSummary {
        framework: set.framework_id,
        predictions,
        report,
    })
}

/// What `fuse` produced.
#[derive(Debug, Clone)]
pub struct FuseSummary {
    pub fused: PathBuf,
    pub labels: PathBuf,
    pub report: MetricsReport,
}

/// Late (product-rule) fusion of two or more prediction files.
pub fn cmd_fuse(cfg: &ExperimentConfig, inputs: &[PathBuf], split: Split) -> Result<FuseSummary> {
    if inputs.len() < 2 {
        return Err(Error::Config(format!("fusion needs at least 2 prediction files, got {}", inputs.len())));
    }
    let sets: Vec<PredictionSet> = inputs
        .iter()
        .map(|p| {
            let id = p.file_stem().and_then(|s| s.to_str()).unwrap_or("predictions");
            PredictionSet::read_csv(id, File::open(p)?)
        })
        .collect::<Result<_>>()?;
    let fused = fuse_prediction_sets(&sets)?;
    let manifest = read_manifest(&cfg.cache_dir())?;
    let report = score_predictions(&manifest, split, &fused.labels())?;
    fs::create_dir_all(&cfg.out_dir)?;
    let fused_path = cfg.out_dir.join(format!("fused_{split}.csv"));
    let labels_path = cfg.out_dir.join(format!("fused_labels_{split}.csv"));
    fused.write_csv(BufWriter::new(File::create(&fused_path)?))?;
    fused.write_labels_csv(BufWriter::new(File::create(&labels_path)?))?;
    write_report(&cfg.out_dir, &format!("report_fused_{split}"), "late fusion (PROD)", &report)?;
    Ok(FuseSummary {
        fused: fused_path,
        labels: labels_path,
        report,
    })
}

/// Collate report JSON files into one markdown table at
/// `<out_dir>/summary.md`; rows are named after the parent directory and
/// file stem.
pub fn cmd_report(reports: &[PathBuf], out_dir: &Path) -> Result<String> {
    if reports.is_empty() {
        return Err(Error::Config("no report files given".into()));
    }
    let mut md = String::from("| System | Spec. | Sen. | ICB. |\n|---|---|---|---|\n");
    for path in reports {
        let report: MetricsReport = serde_json::from_str(&fs::read_to_string(path)?)
            .map_err(|e| Error::Format {
                path: path.clone(),
                message: e.to_string(),
            })?;
        let parent = path.parent().and_then(|p| p.file_name()).and_then(|s| s.to_str()).unwrap_or("");
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
        let name = if parent.is_empty() { stem.to_string() } else { format!("{parent}/{stem}") };
        md.push_str(&format!(
            "| {name} | {:.1} | {:.1} | {:.1} |\n",
            crate::metrics::round1(report.spec),
            crate::metrics::round1(report.sen),
            crate::metrics::round1(report.icb)
        ));
    }
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("summary.md"), &md)?;
    Ok(md)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_and_defaults() {
        let json = r#"{
            "dataset_dir": "data/audio",
            "split_file": "data/split.txt",
            "model": {"framework": "inception", "spec": "Inc-01"},
            "out_dir": "runs/inc01",
            "train": {"epochs": 2}
        }"#;
        let cfg: ExperimentConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.train.epochs, 2);
        assert_eq!(cfg.train.batch_size, 100);
        assert_eq!(cfg.features, default_features());
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert!(serde_json::from_str::<ExperimentConfig>(&json.replace("\"train\"", "\"trian\"")).is_err());
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![ManifestRow {
            cycle_id: "101_1b1_Al_sc_Meditron#000".into(),
            recording_id: "101_1b1_Al_sc_Meditron".into(),
            patient_id: "101".into(),
            label: Label::Both,
            split: Split::Test,
        }];
        write_manifest(&dir.path().join("manifest.csv"), &rows).unwrap();
        assert_eq!(read_manifest(dir.path()).unwrap(), rows);
        assert_eq!(cycle_index(&rows[0]).unwrap(), 0);
    }

    #[test]
    fn scoring_requires_every_cycle() {
        let rows: Vec<ManifestRow> = [Label::Normal, Label::Wheeze]
            .iter()
            .enumerate()
            .map(|(i, &label)| ManifestRow {
                cycle_id: format!("r#{i:03}"),
                recording_id: "r".into(),
                patient_id: "1".into(),
                label,
                split: Split::Test,
            })
            .collect();
        let mut pred = BTreeMap::from([("r#000".to_string(), 0usize)]);
        assert!(matches!(score_predictions(&rows, Split::Test, &pred), Err(Error::Integrity(_))));
        pred.insert("r#001".into(), 2);
        let r = score_predictions(&rows, Split::Test, &pred).unwrap();
        assert_eq!((r.spec, r.sen), (100.0, 100.0));
    }
}
