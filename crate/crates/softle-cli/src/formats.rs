//! On-disk formats: line-delimited JSON datasets and annotations, JSON
//! checkpoints, CSV training logs, and the run manifest. Every writer goes
//! through write-then-rename so a failed command never leaves a partial
//! artifact, and every float is serialized with shortest-round-trip
//! precision so re-reading reproduces it bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use softle_core::config::Arch;
use softle_core::labeling::ShortcutAnnotation;
use softle_core::model::Layer;
use softle_core::pipeline::TrainingLog;
use softle_core::{ClassifierParams, Dataset, Sample, SplitTag};

use crate::config_file::FullConfig;
use crate::error::CliError;

/// Write `contents` to `path` atomically: a temp sibling plus rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let file_name = path
        .file_name()
        .ok_or_else(|| CliError::Io(format!("{}: not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", file_name.to_string_lossy()));
    fs::write(&tmp, contents).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn read_to_string(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        write!(out, "{b:02x}").expect("string write");
    }
    out
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

// ---------------------------------------------------------------- datasets

#[derive(Serialize, Deserialize)]
struct DatasetHeader {
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "F")]
    f: usize,
    split_tag: String,
}

#[derive(Serialize, Deserialize)]
struct DatasetRecord {
    id: u64,
    gold: usize,
    features: Vec<f64>,
}

/// Line-delimited dataset file: a header declaring `K`, `F`, `split_tag`,
/// then one record per sample with `id`, `gold`, `features`.
pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<(), CliError> {
    let header = DatasetHeader {
        k: dataset.num_classes(),
        f: dataset.num_features(),
        split_tag: dataset.split_tag().as_str().into(),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for s in dataset.samples() {
        let rec = DatasetRecord { id: s.id, gold: s.gold_class, features: s.features.clone() };
        out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
        out.push('\n');
    }
    write_atomic(path, &out)
}

pub fn load_dataset(path: &Path) -> Result<Dataset, CliError> {
    let text = read_to_string(path)?;
    let mut lines = text.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| CliError::config(format!("{}: empty dataset", path.display())))?;
    let header: DatasetHeader = serde_json::from_str(header_line)
        .map_err(|e| CliError::config(format!("{}: bad header: {e}", path.display())))?;
    let split = SplitTag::parse(&header.split_tag)
        .ok_or_else(|| CliError::config(format!("{}: unknown split_tag '{}'", path.display(), header.split_tag)))?;
    let mut samples = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: DatasetRecord = serde_json::from_str(line)
            .map_err(|e| CliError::config(format!("{}: record {}: {e}", path.display(), i + 1)))?;
        samples.push(Sample { id: rec.id, gold_class: rec.gold, features: rec.features });
    }
    if samples.is_empty() {
        return Err(CliError::config(format!("{}: empty dataset", path.display())));
    }
    Dataset::new(samples, header.k, header.f, split).map_err(CliError::from)
}

// -------------------------------------------------------------- checkpoints

#[derive(Serialize, Deserialize)]
struct LayerFile {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

/// JSON checkpoint: architecture, declared shape, row-major weights and
/// biases per layer, and the flat config the model was trained with.
#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    arch: String,
    num_inputs: usize,
    num_outputs: usize,
    layers: Vec<LayerFile>,
    config: BTreeMap<String, String>,
}

const CHECKPOINT_FORMAT: &str = "softle-checkpoint-v1";

fn config_map(cfg: &FullConfig) -> BTreeMap<String, String> {
    cfg.render()
        .lines()
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

pub fn save_checkpoint(model: &ClassifierParams, cfg: &FullConfig, path: &Path) -> Result<(), CliError> {
    let arch = match model.arch {
        Arch::Linear => "linear".to_string(),
        Arch::Mlp { hidden } => format!("mlp:{hidden}"),
    };
    let file = CheckpointFile {
        format: CHECKPOINT_FORMAT.into(),
        arch,
        num_inputs: model.num_inputs,
        num_outputs: model.num_outputs,
        layers: model
            .layers
            .iter()
            .map(|l| LayerFile {
                rows: l.rows,
                cols: l.cols,
                weights: l.weights.clone(),
                biases: l.biases.clone(),
            })
            .collect(),
        config: config_map(cfg),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("checkpoint serializes");
    text.push('\n');
    write_atomic(path, &text)
}

pub fn load_checkpoint(path: &Path) -> Result<ClassifierParams, CliError> {
    let text = read_to_string(path)?;
    let file: CheckpointFile = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("{}: bad checkpoint: {e}", path.display())))?;
    if file.format != CHECKPOINT_FORMAT {
        return Err(CliError::config(format!(
            "{}: unsupported checkpoint format '{}'",
            path.display(),
            file.format
        )));
    }
    let arch = if file.arch == "linear" {
        Arch::Linear
    } else if let Some(h) = file.arch.strip_prefix("mlp:") {
        Arch::Mlp {
            hidden: h
                .parse()
                .map_err(|_| CliError::config(format!("{}: bad arch '{}'", path.display(), file.arch)))?,
        }
    } else {
        return Err(CliError::config(format!("{}: bad arch '{}'", path.display(), file.arch)));
    };
    let layers: Vec<Layer> = file
        .layers
        .into_iter()
        .map(|l| Layer { rows: l.rows, cols: l.cols, weights: l.weights, biases: l.biases })
        .collect();
    for l in &layers {
        if l.weights.len() != l.rows * l.cols || l.biases.len() != l.rows {
            return Err(CliError::config(format!("{}: layer shape mismatch", path.display())));
        }
    }
    let model = ClassifierParams { arch, num_inputs: file.num_inputs, num_outputs: file.num_outputs, layers };
    if !model.all_finite() {
        return Err(CliError::config(format!("{}: non-finite parameters", path.display())));
    }
    Ok(model)
}

// -------------------------------------------------------------- annotations

#[derive(Serialize, Deserialize)]
struct AnnotationRecord {
    id: u64,
    sigma: f64,
    s: f64,
}

/// Line-delimited annotations: `id`, `sigma` (teacher gold-class
/// confidence), `s` (shortcut degree, 0 for below-threshold samples).
pub fn save_annotations(annotations: &[ShortcutAnnotation], path: &Path) -> Result<(), CliError> {
    let mut out = String::new();
    for a in annotations {
        let rec = AnnotationRecord { id: a.sample_id, sigma: a.sigma, s: a.shortcut_degree };
        out.push_str(&serde_json::to_string(&rec).expect("annotation serializes"));
        out.push('\n');
    }
    write_atomic(path, &out)
}

pub fn load_annotations(path: &Path) -> Result<Vec<ShortcutAnnotation>, CliError> {
    let text = read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: AnnotationRecord = serde_json::from_str(line)
            .map_err(|e| CliError::config(format!("{}: record {}: {e}", path.display(), i + 1)))?;
        out.push(ShortcutAnnotation {
            sample_id: rec.id,
            sigma: rec.sigma,
            over_confident: rec.s > 0.0,
            shortcut_degree: rec.s,
        });
    }
    if out.is_empty() {
        return Err(CliError::config(format!("{}: empty annotations", path.display())));
    }
    Ok(out)
}

// ------------------------------------------------------------ training logs

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV with one row per epoch.
pub fn save_training_log(log: &TrainingLog, path: &Path) -> Result<(), CliError> {
    let mut out = String::from(
        "epoch,loss_kind,mean_loss,train_accuracy,train_overconfidence,id_accuracy,ood_accuracy,id_overconfidence,ood_overconfidence\n",
    );
    for e in &log.epochs {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            e.epoch,
            e.loss_kind.as_str(),
            e.mean_loss,
            e.train_accuracy,
            e.train_overconfidence,
            opt_cell(e.id_accuracy),
            opt_cell(e.ood_accuracy),
            opt_cell(e.id_overconfidence),
            opt_cell(e.ood_overconfidence),
        )
        .expect("string write");
    }
    write_atomic(path, &out)
}

// ---------------------------------------------------------------- manifest

/// What one command consumed and produced: the config hash, the seed, and
/// SHA-256 of every input and output file (paths relative to the run
/// directory). `run-all` leaves one record per chained step.
#[derive(Serialize, Deserialize, Default)]
pub struct Manifest {
    pub format_version: u32,
    pub tool_version: String,
    pub commands: BTreeMap<String, CommandRecord>,
}

#[derive(Serialize, Deserialize)]
pub struct CommandRecord {
    pub config_sha256: String,
    pub seed: u64,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl Manifest {
    pub fn load_or_default(dir: &Path) -> Result<Manifest, CliError> {
        let path = dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(Manifest {
                format_version: 1,
                tool_version: env!("CARGO_PKG_VERSION").into(),
                commands: BTreeMap::new(),
            });
        }
        let text = read_to_string(&path)?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: bad manifest: {e}", path.display())))
    }

    /// Record one command's provenance and persist the manifest.
    pub fn record(
        dir: &Path,
        verb: &str,
        cfg: &FullConfig,
        inputs: &[&str],
        outputs: &[&str],
    ) -> Result<(), CliError> {
        let mut manifest = Manifest::load_or_default(dir)?;
        let hash_all = |names: &[&str]| -> Result<BTreeMap<String, String>, CliError> {
            names
                .iter()
                .map(|n| Ok(((*n).to_string(), sha256_file(&dir.join(n))?)))
                .collect()
        };
        manifest.commands.insert(
            verb.to_string(),
            CommandRecord {
                config_sha256: sha256_hex(cfg.render().as_bytes()),
                seed: cfg.run.seed,
                inputs: hash_all(inputs)?,
                outputs: hash_all(outputs)?,
            },
        );
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        write_atomic(&dir.join(MANIFEST_FILE), &text)
    }
}
