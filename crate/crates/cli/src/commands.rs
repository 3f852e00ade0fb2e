use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ecglite::dsp::{stft_spectrogram, Preprocessor, QualityVerdict};
use ecglite::eval::svg::{bar_chart, confusion_heatmap, line_chart, Series};
use ecglite::eval::{compute_metrics, confusion_matrix, metrics_csv, MetricsRow, DEFAULT_THRESHOLD};
use ecglite::labels::{select_label, BinaryLabel, Superclass};
use ecglite::model_format::{
    convert, decode_model, encode_checkpoint, encode_model, size_report, Checkpoint, DecodedModel, Dtype,
};
use ecglite::nn::{predict, train_model, History, LabeledSet, Tensor};
use ecglite::synthetic::{generate_dataset, write_ptbxl_layout};
use ecglite::wfdb::{load_index, read_record, EcgRecord, FoldSplit};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cache::{self, cache_key, cache_path};
use crate::config::PipelineConfig;
use crate::manifest::{read_file, write_file, RunManifest};
use crate::CliError;

pub const DATASET_FILE: &str = "dataset.json";
pub const PREPROCESS_FILE: &str = "preprocess.json";
pub const MODEL_F32: &str = "model_f32.ecgm";
pub const MODEL_F16: &str = "model_f16.ecgm";
pub const CHECKPOINT: &str = "checkpoint.ecgc";
pub const HISTORY: &str = "history.csv";

const PREDICT_CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub ecg_id: u32,
    pub fold: u8,
    pub superclass: Superclass,
    pub label: u8,
    /// WFDB record base path relative to the dataset root.
    pub record: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dropped {
    pub ecg_id: u32,
    pub reason: String,
}

/// Output of `ingest`: labelled records and their fold split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFile {
    pub resolution: u32,
    pub records: Vec<DatasetEntry>,
    pub split: FoldSplit,
    pub dropped: Vec<Dropped>,
    pub superclass_counts: BTreeMap<String, usize>,
    pub normal: usize,
    pub abnormal: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedEntry {
    pub ecg_id: u32,
    pub key: String,
    pub repaired_samples: usize,
}

/// Output of `preprocess`: which records passed the quality gate and
/// where their conditioned signals live.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessFile {
    pub cache_dir: PathBuf,
    pub kept: Vec<CachedEntry>,
    pub dropped: Vec<Dropped>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, hint: &str) -> Result<T, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Pipeline(format!("{}: {e} ({hint})", path.display())))?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::Pipeline(format!("{}: {e}", path.display())))
}

fn json_bytes<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializes");
    s.push('\n');
    s.into_bytes()
}

pub fn synth(cfg: &PipelineConfig, records: usize, data_seed: u64) -> Result<RunManifest, CliError> {
    let root = cfg.dataset_root()?;
    let mut synthetic = cfg.synthetic.clone();
    synthetic.sampling_rate = cfg.sampling_rate();
    let set = generate_dataset(records, &synthetic, data_seed);
    let index = write_ptbxl_layout(root, &set)?;
    let mut m = RunManifest::new("synth", cfg);
    m.data_seed = Some(data_seed);
    m.note("records", index.rows.len());
    m.note(
        "abnormal",
        set.iter().filter(|r| r.label() == BinaryLabel::Abnormal).count(),
    );
    m.save(&cfg.output_dir)?;
    Ok(m)
}

pub fn ingest(cfg: &PipelineConfig) -> Result<RunManifest, CliError> {
    let root = cfg.dataset_root()?;
    let csv_path = root.join("ptbxl_database.csv");
    let text = std::fs::read_to_string(&csv_path).map_err(|e| CliError::io(&csv_path, e))?;
    let index = load_index(&text)?;

    let mut records = Vec::new();
    let mut dropped = Vec::new();
    let mut superclass_counts = BTreeMap::new();
    let mut split = FoldSplit::default();
    for row in &index.rows {
        match select_label(&row.scp_codes, &cfg.labels) {
            Ok(d) => {
                *superclass_counts.entry(d.superclass.as_str().to_string()).or_insert(0) += 1;
                match row.strat_fold {
                    9 => split.val.push(row.ecg_id),
                    10 => split.test.push(row.ecg_id),
                    _ => split.train.push(row.ecg_id),
                }
                records.push(DatasetEntry {
                    ecg_id: row.ecg_id,
                    fold: row.strat_fold,
                    superclass: d.superclass,
                    label: d.label.value(),
                    record: if cfg.resolution == 500 {
                        row.filename_hr.clone()
                    } else {
                        row.filename_lr.clone()
                    },
                });
            }
            Err(e) => dropped.push(Dropped {
                ecg_id: row.ecg_id,
                reason: e.to_string(),
            }),
        }
    }
    let abnormal = records.iter().filter(|r| r.label == 1).count();
    let file = DatasetFile {
        resolution: cfg.resolution,
        normal: records.len() - abnormal,
        abnormal,
        records,
        split,
        dropped,
        superclass_counts,
    };
    log::info!(
        "ingest: {} labelled ({} train / {} val / {} test), {} without a usable label",
        file.records.len(),
        file.split.train.len(),
        file.split.val.len(),
        file.split.test.len(),
        file.dropped.len()
    );

    let mut m = RunManifest::new("ingest", cfg);
    m.write(&cfg.output_dir, DATASET_FILE, &json_bytes(&file))?;
    m.note("labelled", file.records.len());
    m.note("unlabelled", file.dropped.len());
    m.note("normal", file.normal);
    m.note("abnormal", file.abnormal);
    m.note("train", file.split.train.len());
    m.note("val", file.split.val.len());
    m.note("test", file.split.test.len());
    m.save(&cfg.output_dir)?;
    Ok(m)
}

fn load_dataset(cfg: &PipelineConfig) -> Result<DatasetFile, CliError> {
    let file: DatasetFile = read_json(&cfg.output_dir.join(DATASET_FILE), "run `ingest` first")?;
    if file.resolution != cfg.resolution {
        return Err(CliError::Pipeline(format!(
            "{} was ingested at {} Hz but the config asks for {} Hz; rerun `ingest`",
            DATASET_FILE, file.resolution, cfg.resolution
        )));
    }
    Ok(file)
}

enum Conditioned {
    Kept(CachedEntry),
    Dropped(Dropped),
}

fn condition_one(
    cfg: &PipelineConfig,
    pre: &Preprocessor,
    root: &Path,
    cache_dir: &Path,
    entry: &DatasetEntry,
) -> Result<Conditioned, CliError> {
    let key = cache_key(entry.ecg_id, cfg.resolution, &cfg.preprocess);
    let path = cache_path(cache_dir, &key);
    let cached = match std::fs::read(&path).ok().and_then(|b| cache::decode(&b)) {
        Some(hit) => hit,
        None => {
            let raw = read_record(&root.join(&entry.record))?;
            if raw.record.sampling_rate != cfg.sampling_rate() {
                return Err(CliError::Pipeline(format!(
                    "record {} is sampled at {} Hz, expected {}",
                    entry.record, raw.record.sampling_rate, cfg.resolution
                )));
            }
            let (mut record, verdict) = pre.record_gated(&raw.record)?;
            record.ecg_id = entry.ecg_id;
            let fresh = cache::CachedRecord {
                record,
                verdict,
                repaired_samples: raw.repaired_samples,
            };
            write_file(&path, &cache::encode(&fresh))?;
            fresh
        }
    };
    let (processed, repaired_samples) = (&cached.record, cached.repaired_samples);
    Ok(match cached.verdict {
        QualityVerdict::Keep => Conditioned::Kept(CachedEntry {
            ecg_id: entry.ecg_id,
            key,
            repaired_samples,
        }),
        QualityVerdict::Drop {
            channel,
            residual_fraction,
        } => Conditioned::Dropped(Dropped {
            ecg_id: entry.ecg_id,
            reason: format!(
                "lead {} keeps {:.1}% of its energy below the baseline band",
                processed.lead_names.get(channel).map_or("?", |s| s.as_str()),
                residual_fraction * 100.0
            ),
        }),
    })
}

/// Conditions every ingested record into the cache. `jobs` bounds the
/// worker pool; the result does not depend on it.
pub fn preprocess(cfg: &PipelineConfig, jobs: Option<usize>) -> Result<RunManifest, CliError> {
    let dataset = load_dataset(cfg)?;
    let root = cfg.dataset_root()?.to_path_buf();
    let cache_dir = cfg.cache_dir();
    let pre = Preprocessor::new(&cfg.preprocess, cfg.sampling_rate())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Pipeline(format!("worker pool: {e}")))?;
    let results: Vec<Result<Conditioned, CliError>> = pool.install(|| {
        dataset
            .records
            .par_iter()
            .map(|e| condition_one(cfg, &pre, &root, &cache_dir, e))
            .collect()
    });
    let mut file = PreprocessFile {
        cache_dir: cache_dir.clone(),
        kept: Vec::new(),
        dropped: Vec::new(),
    };
    for r in results {
        match r? {
            Conditioned::Kept(k) => file.kept.push(k),
            Conditioned::Dropped(d) => file.dropped.push(d),
        }
    }
    log::info!(
        "preprocess: {} kept, {} rejected by the quality gate",
        file.kept.len(),
        file.dropped.len()
    );
    let mut m = RunManifest::new("preprocess", cfg);
    m.write(&cfg.output_dir, PREPROCESS_FILE, &json_bytes(&file))?;
    m.note("kept", file.kept.len());
    m.note("quality_dropped", file.dropped.len());
    m.note(
        "repaired_samples",
        file.kept.iter().map(|k| k.repaired_samples).sum::<usize>(),
    );
    m.save(&cfg.output_dir)?;
    Ok(m)
}

/// Conditioned records of one split, restricted to the configured leads.
struct SplitData {
    ids: Vec<u32>,
    set: LabeledSet,
}

fn load_split(cfg: &PipelineConfig, ids: &[u32]) -> Result<SplitData, CliError> {
    let dataset = load_dataset(cfg)?;
    let pre: PreprocessFile = read_json(&cfg.output_dir.join(PREPROCESS_FILE), "run `preprocess` first")?;
    let labels: BTreeMap<u32, u8> = dataset.records.iter().map(|r| (r.ecg_id, r.label)).collect();
    let keys: BTreeMap<u32, &str> = pre.kept.iter().map(|k| (k.ecg_id, k.key.as_str())).collect();
    let leads = cfg.leads.leads();
    let mut samples = Vec::new();
    let mut targets = Vec::new();
    let mut kept_ids = Vec::new();
    for id in ids {
        let (Some(key), Some(&label)) = (keys.get(id), labels.get(id)) else {
            continue;
        };
        let rec = cache::load(&cache_path(&pre.cache_dir, key))?.record;
        let sel = rec.select_leads(&leads).ok_or_else(|| {
            CliError::Pipeline(format!(
                "record {id} lacks one of the leads {} (has {})",
                leads.join(","),
                rec.lead_names.join(",")
            ))
        })?;
        samples.push(sel.samples);
        targets.push(label as f64);
        kept_ids.push(*id);
    }
    if samples.is_empty() {
        return Err(CliError::Pipeline("split is empty after preprocessing".into()));
    }
    Ok(SplitData {
        ids: kept_ids,
        set: LabeledSet::from_samples(&samples, targets)?,
    })
}

pub fn train(cfg: &PipelineConfig) -> Result<RunManifest, CliError> {
    let dataset = load_dataset(cfg)?;
    let train = load_split(cfg, &dataset.split.train)?;
    let val = load_split(cfg, &dataset.split.val).ok();
    let length = train.set.inputs.shape()[2];
    let config = cfg.model.model_config(cfg.leads.n_channels(), length);
    log::info!(
        "train: {} records ({} val), {} leads x {} samples, {} epochs",
        train.set.len(),
        val.as_ref().map_or(0, |v| v.set.len()),
        config.in_channels,
        length,
        cfg.train.epochs
    );
    let outcome = train_model(&train.set, val.as_ref().map(|v| &v.set), &config, &cfg.train)?;

    let model = encode_model(&config, &outcome.params, Dtype::F32)?;
    let checkpoint = encode_checkpoint(&Checkpoint {
        config: config.clone(),
        train: cfg.train.clone(),
        params: outcome.params,
        adam: outcome.adam,
        history: outcome.history.clone(),
    })?;
    let mut m = RunManifest::new("train", cfg);
    m.write(&cfg.output_dir, MODEL_F32, &model)?;
    m.write(&cfg.output_dir, CHECKPOINT, &checkpoint)?;
    m.write(&cfg.output_dir, HISTORY, outcome.history.to_csv().as_bytes())?;
    m.note("train_records", train.set.len());
    m.note("val_records", val.as_ref().map_or(0, |v| v.set.len()));
    m.note("input_length", length);
    m.note("class_weights", outcome.class_weights);
    if let Some(last) = outcome.history.epochs.last() {
        m.note("final_epoch", last);
    }
    m.note("model_bytes", model.len());
    m.note("checkpoint_bytes", checkpoint.len());
    m.save(&cfg.output_dir)?;
    Ok(m)
}

pub fn quantize(cfg: &PipelineConfig, input: Option<&Path>) -> Result<RunManifest, CliError> {
    let input = input
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.output_dir.join(MODEL_F32));
    let f32_bytes = read_file(&input)?;
    let f16_bytes = convert(&f32_bytes, Dtype::F16)?;
    let before = size_report(&f32_bytes)?;
    let after = size_report(&f16_bytes)?;
    let mut csv = String::from("dtype,total_bytes,header_bytes,payload_bytes,checksum_bytes\n");
    for r in [&before, &after] {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.dtype, r.total, r.header, r.payload, r.checksum
        ));
    }
    let mut m = RunManifest::new("quantize", cfg);
    m.write(&cfg.output_dir, MODEL_F16, &f16_bytes)?;
    m.write(&cfg.output_dir, "model_sizes.csv", csv.as_bytes())?;
    m.note("f32_bytes", before.total);
    m.note("f16_bytes", after.total);
    if let Ok(ck) = std::fs::metadata(cfg.output_dir.join(CHECKPOINT)) {
        let cut = |n: usize| 100.0 * (1.0 - n as f64 / ck.len() as f64);
        m.note("checkpoint_bytes", ck.len());
        m.note("f32_reduction_pct", cut(before.total));
        m.note("f16_reduction_pct", cut(after.total));
    }
    m.save(&cfg.output_dir)?;
    Ok(m)
}

fn load_model(path: &Path) -> Result<DecodedModel, CliError> {
    let bytes =
        std::fs::read(path).map_err(|e| CliError::Pipeline(format!("cannot read model {}: {e}", path.display())))?;
    decode_model(&bytes).map_err(|e| CliError::Pipeline(format!("{}: {e}", path.display())))
}

fn check_input(model: &DecodedModel, channels: usize, length: usize, what: &str) -> Result<(), CliError> {
    if model.config.in_channels != channels || model.config.input_length != length {
        return Err(CliError::Pipeline(format!(
            "model expects {} leads x {} samples, {what} has {channels} x {length}",
            model.config.in_channels, model.config.input_length
        )));
    }
    Ok(())
}

fn probabilities(model: &DecodedModel, inputs: &Tensor) -> Result<Vec<f64>, CliError> {
    let (n, c, l) = (inputs.shape()[0], inputs.shape()[1], inputs.shape()[2]);
    let width = c * l;
    let mut probs = Vec::with_capacity(n);
    for start in (0..n).step_by(PREDICT_CHUNK) {
        let end = (start + PREDICT_CHUNK).min(n);
        let chunk: Vec<f32> = inputs.data()[start * width..end * width]
            .iter()
            .map(|&v| v as f32)
            .collect();
        let x = Tensor::from_vec(&[end - start, c, l], chunk)?;
        probs.extend(predict(&model.config, &model.params, &x)?.into_iter().map(f64::from));
    }
    Ok(probs)
}

fn model_name(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned())
}

/// Scores each model on the test split. Without explicit models, the
/// F32 model and (if present) its F16 conversion are evaluated.
pub fn evaluate(cfg: &PipelineConfig, models: &[PathBuf]) -> Result<RunManifest, CliError> {
    let models: Vec<PathBuf> = if models.is_empty() {
        let f16 = cfg.output_dir.join(MODEL_F16);
        let mut v = vec![cfg.output_dir.join(MODEL_F32)];
        if f16.exists() {
            v.push(f16);
        }
        v
    } else {
        models.to_vec()
    };
    let decoded = models.iter().map(|p| load_model(p)).collect::<Result<Vec<_>, _>>()?;
    let dataset = load_dataset(cfg)?;
    let test = load_split(cfg, &dataset.split.test)?;
    let shape = test.set.inputs.shape().to_vec();

    let mut m = RunManifest::new("evaluate", cfg);
    let mut rows = Vec::new();
    for (path, model) in models.iter().zip(&decoded) {
        check_input(model, shape[1], shape[2], "the test split")?;
        let probs = probabilities(model, &test.set.inputs)?;
        let cm = confusion_matrix(&probs, &test.set.labels, DEFAULT_THRESHOLD)?;
        let metrics = compute_metrics(&cm)?;
        let name = model_name(path);
        log::info!(
            "evaluate {name}: accuracy {:.2} precision {:.2} recall {:.2} f1 {:.2}",
            metrics.accuracy,
            metrics.precision,
            metrics.recall,
            metrics.f1
        );
        let title = format!("{name} ({} leads)", cfg.leads.n_channels());
        m.write(
            &cfg.output_dir,
            &format!("confusion_{name}.csv"),
            cm.to_csv().as_bytes(),
        )?;
        m.write(
            &cfg.output_dir,
            &format!("confusion_{name}.svg"),
            confusion_heatmap(&cm, &title).as_bytes(),
        )?;
        m.note(&format!("{name}_confusion"), cm);
        m.note(&format!("{name}_metrics"), metrics);
        rows.push(MetricsRow {
            name,
            samples: cm.total(),
            metrics,
        });
    }
    m.write(&cfg.output_dir, "metrics.csv", metrics_csv(&rows).as_bytes())?;
    m.note("test_records", test.ids.len());
    m.save(&cfg.output_dir)?;
    Ok(m)
}

/// WFDB base path with any `.hea`/`.dat` extension stripped.
fn record_base(path: &Path) -> PathBuf {
    match path.extension().and_then(|e| e.to_str()) {
        Some("hea" | "dat") => path.with_extension(""),
        _ => path.to_path_buf(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Inference {
    pub probability: f64,
    pub label: BinaryLabel,
}

pub fn infer(cfg: &PipelineConfig, model_path: &Path, record: &Path) -> Result<(Inference, RunManifest), CliError> {
    let model = load_model(model_path)?;
    let raw = read_record(&record_base(record))?.record;
    let leads = cfg.leads.leads();
    let sel = raw.select_leads(&leads).ok_or_else(|| {
        CliError::Pipeline(format!(
            "{} lacks one of the leads {} (has {})",
            record.display(),
            leads.join(","),
            raw.lead_names.join(",")
        ))
    })?;
    let conditioned = Preprocessor::new(&cfg.preprocess, sel.sampling_rate)?.record(&sel)?;
    check_input(&model, conditioned.n_channels(), conditioned.n_samples(), "the record")?;
    let data: Vec<f64> = conditioned.samples.iter().flatten().copied().collect();
    let x = Tensor::from_vec(&[1, conditioned.n_channels(), conditioned.n_samples()], data)?;
    let probability = probabilities(&model, &x)?[0];
    let label = if probability >= DEFAULT_THRESHOLD {
        BinaryLabel::Abnormal
    } else {
        BinaryLabel::Normal
    };
    let out = Inference { probability, label };
    let mut m = RunManifest::new("infer", cfg);
    m.note("model", model_path.display().to_string());
    m.note("record", record.display().to_string());
    m.note("result", out);
    m.save(&cfg.output_dir)?;
    Ok((out, m))
}

fn history_from_csv(text: &str) -> History {
    let mut h = History::default();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() < 4 {
            continue;
        }
        let opt = |s: &str| s.parse::<f64>().ok();
        h.epochs.push(ecglite::nn::EpochRecord {
            epoch: f[0].parse().unwrap_or(0),
            train_loss: opt(f[1]).unwrap_or(f64::NAN),
            val_loss: opt(f[2]),
            val_accuracy: opt(f[3]),
        });
    }
    h
}

/// Regenerates figures from what earlier stages left behind: label
/// distributions from `ingest`, a spectrogram of one conditioned record,
/// and training curves if a history exists.
pub fn report(cfg: &PipelineConfig, record_id: Option<u32>) -> Result<RunManifest, CliError> {
    let out = &cfg.output_dir;
    let dataset = load_dataset(cfg)?;
    let mut m = RunManifest::new("report", cfg);

    let bars: Vec<(String, f64)> = Superclass::ALL
        .iter()
        .map(|s| {
            let n = dataset.superclass_counts.get(s.as_str()).copied().unwrap_or(0);
            (s.as_str().to_string(), n as f64)
        })
        .collect();
    m.write(
        out,
        "superclass_distribution.svg",
        bar_chart("Records per superclass", &bars, "records").as_bytes(),
    )?;
    let binary = vec![
        ("normal".to_string(), dataset.normal as f64),
        ("abnormal".to_string(), dataset.abnormal as f64),
    ];
    m.write(
        out,
        "label_distribution.svg",
        bar_chart("Binary labels", &binary, "records").as_bytes(),
    )?;

    let pre: Option<PreprocessFile> = read_json(&out.join(PREPROCESS_FILE), "").ok();
    if let Some(pre) = pre {
        let chosen = match record_id {
            Some(id) => pre
                .kept
                .iter()
                .find(|k| k.ecg_id == id)
                .ok_or_else(|| CliError::Pipeline(format!("record {id} is not in the preprocessing cache")))?,
            None => {
                let first_test = dataset
                    .split
                    .test
                    .iter()
                    .find_map(|id| pre.kept.iter().find(|k| k.ecg_id == *id));
                first_test
                    .or(pre.kept.first())
                    .ok_or_else(|| CliError::Pipeline("no preprocessed records to draw a spectrogram from".into()))?
            }
        };
        let rec: EcgRecord = cache::load(&cache_path(&pre.cache_dir, &chosen.key))?.record;
        let lead = cfg.leads.leads().into_iter().next().unwrap_or_else(|| "I".into());
        let x = rec
            .channel(&lead)
            .ok_or_else(|| CliError::Pipeline(format!("record {} has no lead {lead}", chosen.ecg_id)))?;
        let window = 256.min(x.len());
        let spec = stft_spectrogram(x, rec.sampling_rate, window, (window / 2).max(1))?;
        m.write(out, "spectrogram.csv", spec.to_csv().as_bytes())?;
        m.note("spectrogram_record", chosen.ecg_id);
        m.note("spectrogram_lead", lead);
    }

    if let Ok(text) = std::fs::read_to_string(out.join(HISTORY)) {
        let h = history_from_csv(&text);
        let pts = |f: &dyn Fn(&ecglite::nn::EpochRecord) -> Option<f64>| -> Vec<(f64, f64)> {
            h.epochs
                .iter()
                .filter_map(|e| f(e).map(|v| (e.epoch as f64, v)))
                .collect()
        };
        let loss = [
            Series {
                name: "train".into(),
                points: pts(&|e| Some(e.train_loss)),
            },
            Series {
                name: "val".into(),
                points: pts(&|e| e.val_loss),
            },
        ];
        m.write(out, "history_loss.svg", line_chart("Loss", &loss, "epoch").as_bytes())?;
        let acc = [Series {
            name: "val".into(),
            points: pts(&|e| e.val_accuracy.map(|a| 100.0 * a)),
        }];
        m.write(
            out,
            "history_accuracy.svg",
            line_chart("Validation accuracy (%)", &acc, "epoch").as_bytes(),
        )?;
    }
    m.save(out)?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_record_extensions() {
        assert_eq!(record_base(Path::new("a/00001_lr.hea")), Path::new("a/00001_lr"));
        assert_eq!(record_base(Path::new("a/00001_lr.dat")), Path::new("a/00001_lr"));
        assert_eq!(record_base(Path::new("a/00001_lr")), Path::new("a/00001_lr"));
    }

    #[test]
    fn history_csv_round_trip() {
        let h = History {
            epochs: vec![
                ecglite::nn::EpochRecord {
                    epoch: 1,
                    train_loss: 0.5,
                    val_loss: None,
                    val_accuracy: None,
                },
                ecglite::nn::EpochRecord {
                    epoch: 2,
                    train_loss: 0.25,
                    val_loss: Some(0.3),
                    val_accuracy: Some(0.75),
                },
            ],
        };
        assert_eq!(history_from_csv(&h.to_csv()), h);
    }
}
