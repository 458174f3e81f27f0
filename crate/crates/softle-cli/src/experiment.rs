//! Verb implementations. Every verb reads and writes a fixed set of files
//! inside one run directory, records its provenance in the manifest, and
//! is a pure function of (config, directory contents), so re-running any
//! verb with the same inputs reproduces its outputs byte for byte.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use softle_core::baselines::{self, BaselineKind};
use softle_core::data::LabelVector;
use softle_core::eval::{self, EvalReport, HISTOGRAM_BINS};
use softle_core::labeling::{self, ShortcutAnnotation};
use softle_core::pipeline::{self, EvalSets};
use softle_core::Dataset;

use crate::config_file::FullConfig;
use crate::error::CliError;
use crate::formats;

pub const TRAIN_FILE: &str = "train.jsonl";
pub const ID_TEST_FILE: &str = "id_test.jsonl";
pub const OOD_TEST_FILE: &str = "ood_test.jsonl";
pub const CONFIG_FILE: &str = "config";
pub const TEACHER_CKPT: &str = "teacher.ckpt";
pub const TEACHER_LOG: &str = "teacher_train_log.csv";
pub const ANNOTATIONS_FILE: &str = "annotations.jsonl";
pub const STUDENT_CKPT: &str = "student.ckpt";
pub const STUDENT_LOG: &str = "train_log.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const HISTOGRAMS_FILE: &str = "histograms.csv";
pub const REPORT_FILE: &str = "report";

pub fn baseline_ckpt(kind: BaselineKind) -> String {
    format!("baseline_{}.ckpt", kind.as_str())
}

pub fn baseline_log(kind: BaselineKind) -> String {
    format!("baseline_{}_log.csv", kind.as_str())
}

fn require(dir: &Path, name: &str, what: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    if !path.exists() {
        return Err(CliError::Io(format!("missing {what}: {}", path.display())));
    }
    Ok(path)
}

fn load_train(dir: &Path) -> Result<Dataset, CliError> {
    formats::load_dataset(&require(dir, TRAIN_FILE, "training dataset")?)
}

fn load_eval_sets(dir: &Path) -> Result<(Dataset, Dataset), CliError> {
    let id = formats::load_dataset(&require(dir, ID_TEST_FILE, "ID test dataset")?)?;
    let ood = formats::load_dataset(&require(dir, OOD_TEST_FILE, "OOD test dataset")?)?;
    Ok((id, ood))
}

/// Eval sets are optional for training verbs: when the test files exist
/// the per-epoch log includes held-out metrics, otherwise those columns
/// stay empty.
fn optional_eval_sets(dir: &Path) -> Result<Option<(Dataset, Dataset)>, CliError> {
    if dir.join(ID_TEST_FILE).exists() && dir.join(OOD_TEST_FILE).exists() {
        Ok(Some(load_eval_sets(dir)?))
    } else {
        Ok(None)
    }
}

pub fn gen_data(cfg: &FullConfig, dir: &Path) -> Result<(), CliError> {
    let (train, id_test, ood_test) = softle_core::datagen::generate(&cfg.data, cfg.run.seed)?;
    formats::save_dataset(&train, &dir.join(TRAIN_FILE))?;
    formats::save_dataset(&id_test, &dir.join(ID_TEST_FILE))?;
    formats::save_dataset(&ood_test, &dir.join(OOD_TEST_FILE))?;
    formats::write_atomic(&dir.join(CONFIG_FILE), &cfg.render())?;
    formats::Manifest::record(
        dir,
        "gen-data",
        cfg,
        &[],
        &[TRAIN_FILE, ID_TEST_FILE, OOD_TEST_FILE, CONFIG_FILE],
    )
}

pub fn train_teacher(cfg: &FullConfig, dir: &Path) -> Result<(), CliError> {
    let train = load_train(dir)?;
    let sets = optional_eval_sets(dir)?;
    let eval_sets = sets.as_ref().map(|(id, ood)| EvalSets { id_test: id, ood_test: ood });
    let (teacher, log) = pipeline::train_teacher(&train, &cfg.run, eval_sets)?;
    formats::save_checkpoint(&teacher, cfg, &dir.join(TEACHER_CKPT))?;
    formats::save_training_log(&log, &dir.join(TEACHER_LOG))?;
    formats::Manifest::record(dir, "train-teacher", cfg, &[TRAIN_FILE], &[TEACHER_CKPT, TEACHER_LOG])
}

pub fn encode(cfg: &FullConfig, dir: &Path) -> Result<(), CliError> {
    let train = load_train(dir)?;
    let teacher = formats::load_checkpoint(&require(dir, TEACHER_CKPT, "teacher checkpoint")?)?;
    let encoded = labeling::encode_labels(&train, &teacher, &cfg.run)?;
    let annotations: Vec<ShortcutAnnotation> = encoded.into_iter().map(|(a, _)| a).collect();
    formats::save_annotations(&annotations, &dir.join(ANNOTATIONS_FILE))?;
    formats::Manifest::record(dir, "encode", cfg, &[TRAIN_FILE, TEACHER_CKPT], &[ANNOTATIONS_FILE])
}

/// Rebuild the (K+1)-class labels from persisted annotations: a positive
/// shortcut degree means the sample was over-confident and gets the soft
/// label, zero keeps the hard one.
fn labels_from_annotations(
    train: &Dataset,
    annotations: &[ShortcutAnnotation],
) -> Result<Vec<LabelVector>, CliError> {
    if annotations.len() != train.len() {
        return Err(CliError::config(format!(
            "annotation count {} does not match training set size {}",
            annotations.len(),
            train.len()
        )));
    }
    let k = train.num_classes();
    train
        .samples()
        .iter()
        .zip(annotations)
        .map(|(sample, ann)| {
            if ann.sample_id != sample.id {
                return Err(CliError::config(format!(
                    "annotation id {} does not match sample id {}",
                    ann.sample_id, sample.id
                )));
            }
            let label = if ann.shortcut_degree > 0.0 {
                LabelVector::soft(sample.gold_class, ann.shortcut_degree, k)?
            } else {
                LabelVector::hard(sample.gold_class, k)?
            };
            Ok(label)
        })
        .collect()
}

pub fn train_student(cfg: &FullConfig, dir: &Path) -> Result<(), CliError> {
    let train = load_train(dir)?;
    let annotations = formats::load_annotations(&require(dir, ANNOTATIONS_FILE, "annotations")?)?;
    let labels = labels_from_annotations(&train, &annotations)?;
    let sets = optional_eval_sets(dir)?;
    let eval_sets = sets.as_ref().map(|(id, ood)| EvalSets { id_test: id, ood_test: ood });
    let (student, log) = pipeline::train_student(&train, Some(&labels), &cfg.run, eval_sets)?;
    formats::save_checkpoint(&student, cfg, &dir.join(STUDENT_CKPT))?;
    formats::save_training_log(&log, &dir.join(STUDENT_LOG))?;
    formats::Manifest::record(
        dir,
        "train-student",
        cfg,
        &[TRAIN_FILE, ANNOTATIONS_FILE],
        &[STUDENT_CKPT, STUDENT_LOG],
    )
}

pub fn train_baseline(cfg: &FullConfig, dir: &Path, kind: BaselineKind) -> Result<(), CliError> {
    let train = load_train(dir)?;
    let sets = optional_eval_sets(dir)?;
    let eval_sets = sets.as_ref().map(|(id, ood)| EvalSets { id_test: id, ood_test: ood });
    let mut inputs = vec![TRAIN_FILE.to_string()];
    let (model, log) = match kind {
        BaselineKind::None => baselines::train_standard(&train, &cfg.run, eval_sets)?,
        BaselineKind::Reweighting => {
            let annotations =
                formats::load_annotations(&require(dir, ANNOTATIONS_FILE, "annotations")?)?;
            inputs.push(ANNOTATIONS_FILE.into());
            baselines::train_reweighted(&train, &annotations, &cfg.run, eval_sets)?
        }
        BaselineKind::Poe => {
            let teacher =
                formats::load_checkpoint(&require(dir, TEACHER_CKPT, "teacher checkpoint")?)?;
            inputs.push(TEACHER_CKPT.into());
            baselines::train_poe(&train, &teacher, &cfg.run, eval_sets)?
        }
    };
    let ckpt = baseline_ckpt(kind);
    let log_file = baseline_log(kind);
    formats::save_checkpoint(&model, cfg, &dir.join(&ckpt))?;
    formats::save_training_log(&log, &dir.join(&log_file))?;
    let input_refs: Vec<&str> = inputs.iter().map(String::as_str).collect();
    formats::Manifest::record(
        dir,
        &format!("train-baseline-{}", kind.as_str()),
        cfg,
        &input_refs,
        &[&ckpt, &log_file],
    )
}

/// The models `evaluate` scores, in report order, with the file each one
/// is loaded from. Only files that exist are scored.
fn method_files(cfg: &FullConfig) -> Vec<(String, String)> {
    vec![
        ("teacher".into(), TEACHER_CKPT.into()),
        (format!("softle-{}", cfg.schedule_name()), STUDENT_CKPT.into()),
        ("none".into(), baseline_ckpt(BaselineKind::None)),
        ("reweighting".into(), baseline_ckpt(BaselineKind::Reweighting)),
        ("poe".into(), baseline_ckpt(BaselineKind::Poe)),
    ]
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn evaluate(cfg: &FullConfig, dir: &Path) -> Result<(), CliError> {
    let (id_test, ood_test) = load_eval_sets(dir)?;
    let mut reports: Vec<EvalReport> = Vec::new();
    let mut inputs = vec![ID_TEST_FILE.to_string(), OOD_TEST_FILE.to_string()];
    for (method, file) in method_files(cfg) {
        let path = dir.join(&file);
        if !path.exists() {
            continue;
        }
        let model = formats::load_checkpoint(&path)?;
        reports.push(eval::evaluate_model(
            &model,
            &id_test,
            &ood_test,
            cfg.run.xi,
            Some(&cfg.data),
            &method,
            cfg.run.seed,
        )?);
        inputs.push(file);
    }
    if reports.is_empty() {
        return Err(CliError::Io(format!(
            "missing model checkpoint: nothing to evaluate in {}",
            dir.display()
        )));
    }

    let mut metrics = String::from(
        "method,seed,id_accuracy,ood_accuracy,avg_accuracy,id_overconfidence_ratio,ood_overconfidence_ratio,shortcut_weight_mass\n",
    );
    let mut hist = String::from("method,split,bin_low,bin_high,count\n");
    for r in &reports {
        writeln!(
            metrics,
            "{},{},{},{},{},{},{},{}",
            r.method,
            r.seed,
            r.id_accuracy,
            r.ood_accuracy,
            r.avg_accuracy,
            r.id_overconfidence_ratio,
            r.ood_overconfidence_ratio,
            opt_cell(r.shortcut_weight_mass),
        )
        .expect("string write");
        for (split, h) in
            [("id_test", &r.id_misclassified_histogram), ("ood_test", &r.ood_misclassified_histogram)]
        {
            for bin in 0..HISTOGRAM_BINS {
                let (lo, hi) = eval::ConfidenceHistogram::bin_edges(bin);
                writeln!(hist, "{},{split},{lo},{hi},{}", r.method, h.counts[bin])
                    .expect("string write");
            }
        }
    }
    formats::write_atomic(&dir.join(METRICS_FILE), &metrics)?;
    formats::write_atomic(&dir.join(HISTOGRAMS_FILE), &hist)?;
    let input_refs: Vec<&str> = inputs.iter().map(String::as_str).collect();
    formats::Manifest::record(dir, "evaluate", cfg, &input_refs, &[METRICS_FILE, HISTOGRAMS_FILE])
}

fn parse_cell(cell: &str, context: &str) -> Result<f64, CliError> {
    cell.parse()
        .map_err(|_| CliError::config(format!("bad number '{cell}' in {context}")))
}

/// Render the human-readable report from the metrics and histogram tables.
pub fn report(cfg: &FullConfig, dir: &Path) -> Result<(), CliError> {
    let metrics = formats::read_to_string(&require(dir, METRICS_FILE, "metrics table")?)?;
    let hist = formats::read_to_string(&require(dir, HISTOGRAMS_FILE, "histogram table")?)?;

    let mut out = String::new();
    writeln!(out, "SoftLE experiment report").expect("string write");
    writeln!(out, "========================").expect("string write");
    writeln!(
        out,
        "config {}  seed {}  schedule {}",
        formats::sha256_hex(cfg.render().as_bytes()),
        cfg.run.seed,
        cfg.schedule_name()
    )
    .expect("string write");
    writeln!(out).expect("string write");
    writeln!(
        out,
        "{:<14} {:>8} {:>8} {:>8} {:>8} {:>8} {:>9}",
        "method", "id_acc", "ood_acc", "avg", "oc_id", "oc_ood", "sc_mass"
    )
    .expect("string write");
    for line in metrics.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 8 {
            return Err(CliError::config(format!("bad metrics row '{line}'")));
        }
        let mass = if cells[7].is_empty() {
            "-".to_string()
        } else {
            format!("{:.6}", parse_cell(cells[7], METRICS_FILE)?)
        };
        writeln!(
            out,
            "{:<14} {:>8.6} {:>8.6} {:>8.6} {:>8.6} {:>8.6} {:>9}",
            cells[0],
            parse_cell(cells[2], METRICS_FILE)?,
            parse_cell(cells[3], METRICS_FILE)?,
            parse_cell(cells[4], METRICS_FILE)?,
            parse_cell(cells[5], METRICS_FILE)?,
            parse_cell(cells[6], METRICS_FILE)?,
            mass,
        )
        .expect("string write");
    }
    writeln!(out).expect("string write");
    writeln!(out, "misclassified-confidence histograms (bin_low bin_high count)").expect("string write");
    let mut current = String::new();
    for line in hist.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 5 {
            return Err(CliError::config(format!("bad histogram row '{line}'")));
        }
        let section = format!("{} / {}", cells[0], cells[1]);
        if section != current {
            writeln!(out, "[{section}]").expect("string write");
            current = section;
        }
        writeln!(out, "{} {} {}", cells[2], cells[3], cells[4]).expect("string write");
    }
    formats::write_atomic(&dir.join(REPORT_FILE), &out)?;
    formats::Manifest::record(dir, "report", cfg, &[METRICS_FILE, HISTOGRAMS_FILE], &[REPORT_FILE])
}

/// The full chain with one config: gen-data → train-teacher → encode →
/// train-student → evaluate → report.
pub fn run_all(cfg: &FullConfig, dir: &Path) -> Result<(), CliError> {
    gen_data(cfg, dir)?;
    train_teacher(cfg, dir)?;
    encode(cfg, dir)?;
    train_student(cfg, dir)?;
    evaluate(cfg, dir)?;
    report(cfg, dir)
}
