//! Orchestration of the debiasing recipe: teacher training on hard
//! K-class labels, student training on K+1 classes with the hard/soft
//! epoch schedule, and dummy-excluding inference.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::{Arch, OptimizerKind, RunConfig, ScheduleMode};
use crate::data::{Dataset, LabelVector};
use crate::error::Error;
use crate::eval;
use crate::model::{
    backprop_from_logit_grad, cross_entropy, forward, softmax, ClassifierParams,
    Optimizer, PROB_FLOOR,
};
use crate::rng::{substream, Stream};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// Cross-entropy against the (K+1)-extended one-hot label.
    Hard,
    /// Cross-entropy against the encoded soft label.
    Soft,
}

impl LossKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            LossKind::Hard => "HL",
            LossKind::Soft => "SL",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    pub loss_kind: LossKind,
    pub train_accuracy: f64,
    /// Fraction of training samples with max task-class confidence > xi.
    pub train_overconfidence: f64,
    pub id_accuracy: Option<f64>,
    pub ood_accuracy: Option<f64>,
    pub id_overconfidence: Option<f64>,
    pub ood_overconfidence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
}

impl TrainingLog {
    pub fn loss_kinds(&self) -> Vec<LossKind> {
        self.epochs.iter().map(|e| e.loss_kind).collect()
    }
}

/// Which loss each student epoch uses, given the schedule mode and the
/// hard-label epoch count `n` (clamped to the total).
pub fn loss_schedule(mode: ScheduleMode, hard_epochs: usize, total_epochs: usize) -> Vec<LossKind> {
    let n = hard_epochs.min(total_epochs);
    (0..total_epochs)
        .map(|e| match mode {
            ScheduleMode::HardFirst if e < n => LossKind::Hard,
            ScheduleMode::HardLast if e >= total_epochs - n => LossKind::Hard,
            ScheduleMode::AllSoft => LossKind::Soft,
            _ => LossKind::Soft,
        })
        .collect()
}

/// Optional held-out sets whose accuracy and over-confidence ratio are
/// logged each epoch.
#[derive(Clone, Copy)]
pub struct EvalSets<'a> {
    pub id_test: &'a Dataset,
    pub ood_test: &'a Dataset,
}

pub(crate) enum Objective<'a> {
    /// One-hot gold labels, zero-extended to the model arity.
    Hard,
    /// Per-epoch switch between hard-extended and encoded soft labels.
    Scheduled { soft: Option<&'a [LabelVector]> },
    /// Hard labels with a fixed per-sample loss weight.
    Reweighted { weights: &'a [f64] },
    /// Softmax over student logits plus frozen teacher log-probabilities.
    Poe { teacher: &'a ClassifierParams },
}

pub(crate) struct TrainSpec<'a> {
    pub objective: Objective<'a>,
    pub num_outputs: usize,
    pub arch: Arch,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub init_stream: Stream,
    pub shuffle_stream: Stream,
    /// Linear warm-up over the first 10% of steps, then linear decay to 0.
    pub lr_warmup: bool,
    pub schedule: Vec<LossKind>,
}

fn one_hot(gold: usize, num_outputs: usize, buf: &mut Vec<f64>) {
    buf.clear();
    buf.resize(num_outputs, 0.0);
    buf[gold] = 1.0;
}

fn learning_rate_at(base: f64, warmup: bool, step: usize, total_steps: usize) -> f64 {
    if !warmup {
        return base;
    }
    let warm = (total_steps / 10).max(1);
    if step < warm {
        base * (step + 1) as f64 / warm as f64
    } else {
        let rest = (total_steps - warm).max(1);
        base * (total_steps - step) as f64 / rest as f64
    }
}

fn shuffled_indices(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    // Fisher-Yates
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        idx.swap(i, j);
    }
    idx
}

pub(crate) fn train_loop(
    train: &Dataset,
    cfg: &RunConfig,
    spec: TrainSpec<'_>,
    eval_sets: Option<EvalSets<'_>>,
) -> Result<(ClassifierParams, TrainingLog)> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidDataset("cannot train on an empty dataset".into()));
    }
    let k = train.num_classes();
    if let Objective::Scheduled { soft: Some(labels) } = &spec.objective {
        if labels.len() != train.len() {
            return Err(Error::ShapeMismatch {
                context: "soft labels per training sample",
                expected: train.len(),
                actual: labels.len(),
            });
        }
    }
    if spec.schedule.contains(&LossKind::Soft) {
        if let Objective::Scheduled { soft: None } = &spec.objective {
            return Err(Error::InvalidConfig(
                "schedule contains soft-label epochs but no soft labels were provided".into(),
            ));
        }
    }

    let mut params = ClassifierParams::init(
        spec.arch,
        train.num_features(),
        spec.num_outputs,
        &mut substream(cfg.seed, spec.init_stream),
    );
    let mut shuffle_rng = substream(cfg.seed, spec.shuffle_stream);
    let mut optimizer = Optimizer::new(spec.optimizer, &params);

    let batches_per_epoch = train.len().div_ceil(cfg.batch_size);
    let total_steps = spec.schedule.len() * batches_per_epoch;
    let mut step = 0usize;
    let mut target = Vec::new();
    let mut log = TrainingLog::default();

    for (epoch, kind) in spec.schedule.iter().copied().enumerate() {
        let order = shuffled_indices(train.len(), &mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = params.zeros_like();
            let inv = 1.0 / batch.len() as f64;
            for &i in batch {
                let sample = &train.samples()[i];
                let (loss, sample_grads, weight) = match &spec.objective {
                    Objective::Hard | Objective::Scheduled { .. } if kind == LossKind::Hard => {
                        one_hot(sample.gold_class, spec.num_outputs, &mut target);
                        let fwd = forward(&params, &sample.features)?;
                        let loss = cross_entropy(&fwd.probs, &target)?;
                        let g: Vec<f64> =
                            fwd.probs.iter().zip(&target).map(|(p, y)| p - y).collect();
                        (loss, backprop_from_logit_grad(&params, &sample.features, &fwd, &g), 1.0)
                    }
                    Objective::Hard => unreachable!("hard objective schedules only hard epochs"),
                    Objective::Scheduled { soft } => {
                        let y = soft.expect("checked above").get(i).expect("aligned").probs();
                        let fwd = forward(&params, &sample.features)?;
                        let loss = cross_entropy(&fwd.probs, y)?;
                        let g: Vec<f64> = fwd.probs.iter().zip(y).map(|(p, yj)| p - yj).collect();
                        (loss, backprop_from_logit_grad(&params, &sample.features, &fwd, &g), 1.0)
                    }
                    Objective::Reweighted { weights } => {
                        one_hot(sample.gold_class, spec.num_outputs, &mut target);
                        let fwd = forward(&params, &sample.features)?;
                        let loss = cross_entropy(&fwd.probs, &target)?;
                        let g: Vec<f64> =
                            fwd.probs.iter().zip(&target).map(|(p, y)| p - y).collect();
                        let grads = backprop_from_logit_grad(&params, &sample.features, &fwd, &g);
                        (loss, grads, weights[i])
                    }
                    Objective::Poe { teacher } => {
                        one_hot(sample.gold_class, spec.num_outputs, &mut target);
                        let fwd = forward(&params, &sample.features)?;
                        let teacher_fwd = forward(teacher, &sample.features)?;
                        let combined: Vec<f64> = fwd
                            .logits
                            .iter()
                            .zip(&teacher_fwd.probs)
                            .map(|(z, pt)| z + libm::log(pt.max(PROB_FLOOR)))
                            .collect();
                        let p_comb = softmax(&combined);
                        let loss = cross_entropy(&p_comb, &target)?;
                        let g: Vec<f64> = p_comb.iter().zip(&target).map(|(p, y)| p - y).collect();
                        (loss, backprop_from_logit_grad(&params, &sample.features, &fwd, &g), 1.0)
                    }
                };
                if !loss.is_finite() {
                    return Err(Error::Divergence { epoch });
                }
                epoch_loss += weight * loss;
                grads.accumulate(&sample_grads, weight * inv);
            }
            let lr = learning_rate_at(spec.learning_rate, spec.lr_warmup, step, total_steps);
            optimizer.step(&mut params, &grads, lr)?;
            step += 1;
        }
        if !params.all_finite() {
            return Err(Error::Divergence { epoch });
        }

        let train_accuracy = eval::accuracy(&params, train, spec.num_outputs == k + 1)?;
        let train_overconfidence = eval::overconfidence_ratio(&params, train, cfg.xi)?;
        let (mut id_acc, mut ood_acc, mut id_oc, mut ood_oc) = (None, None, None, None);
        if let Some(sets) = eval_sets {
            id_acc = Some(eval::accuracy(&params, sets.id_test, spec.num_outputs == k + 1)?);
            ood_acc = Some(eval::accuracy(&params, sets.ood_test, spec.num_outputs == k + 1)?);
            id_oc = Some(eval::overconfidence_ratio(&params, sets.id_test, cfg.xi)?);
            ood_oc = Some(eval::overconfidence_ratio(&params, sets.ood_test, cfg.xi)?);
        }
        log.epochs.push(EpochRecord {
            epoch,
            mean_loss: epoch_loss / train.len() as f64,
            loss_kind: kind,
            train_accuracy,
            train_overconfidence,
            id_accuracy: id_acc,
            ood_accuracy: ood_acc,
            id_overconfidence: id_oc,
            ood_overconfidence: ood_oc,
        });
    }
    Ok((params, log))
}

/// Train the biased teacher: hard K-class cross-entropy, constant
/// learning rate, always linear so the shortcut-weight probe applies.
/// The teacher's optimizer and learning rate come from the dedicated
/// config fields.
pub fn train_teacher(
    train: &Dataset,
    cfg: &RunConfig,
    eval_sets: Option<EvalSets<'_>>,
) -> Result<(ClassifierParams, TrainingLog)> {
    let spec = TrainSpec {
        objective: Objective::Hard,
        num_outputs: train.num_classes(),
        arch: Arch::Linear,
        optimizer: cfg.teacher_optimizer,
        learning_rate: cfg.teacher_learning_rate,
        init_stream: Stream::TeacherInit,
        shuffle_stream: Stream::TeacherShuffle,
        lr_warmup: false,
        schedule: alloc::vec![LossKind::Hard; cfg.teacher_epochs],
    };
    train_loop(train, cfg, spec, eval_sets)
}

/// Train the debiased student on K+1 classes. Epochs marked hard by the
/// schedule use the original one-hot labels extended with a zero dummy
/// entry; soft epochs use the encoded labels. `soft_labels` may be `None`
/// only when the schedule never reaches a soft epoch.
pub fn train_student(
    train: &Dataset,
    soft_labels: Option<&[LabelVector]>,
    cfg: &RunConfig,
    eval_sets: Option<EvalSets<'_>>,
) -> Result<(ClassifierParams, TrainingLog)> {
    if let Some(labels) = soft_labels {
        for (i, l) in labels.iter().enumerate() {
            if l.num_classes() != train.num_classes() {
                return Err(Error::InvalidConfig(format!(
                    "soft label {i} has {} classes, dataset has {}",
                    l.num_classes(),
                    train.num_classes()
                )));
            }
        }
    }
    let spec = TrainSpec {
        objective: Objective::Scheduled { soft: soft_labels },
        num_outputs: train.num_classes() + 1,
        arch: cfg.arch,
        optimizer: cfg.optimizer,
        learning_rate: cfg.learning_rate,
        init_stream: Stream::StudentInit,
        shuffle_stream: Stream::StudentShuffle,
        lr_warmup: true,
        schedule: loss_schedule(cfg.schedule_mode, cfg.warmup_epochs, cfg.student_epochs),
    };
    train_loop(train, cfg, spec, eval_sets)
}

/// Predict a task class from a (K+1)-output student: argmax over the
/// first K probabilities, dummy ignored, ties broken toward the lowest
/// index.
pub fn infer(student: &ClassifierParams, x: &[f64]) -> Result<usize> {
    if student.num_outputs < 2 {
        return Err(Error::ModelMismatch("student must have at least 2 outputs".into()));
    }
    let fwd = forward(student, x)?;
    Ok(argmax_task_class(&fwd.probs, student.num_outputs - 1))
}

/// Argmax over the first `k` entries with lowest-index tie-breaking.
pub(crate) fn argmax_task_class(probs: &[f64], k: usize) -> usize {
    let mut best = 0usize;
    let mut best_p = probs[0];
    for (i, p) in probs.iter().enumerate().take(k).skip(1) {
        if *p > best_p {
            best_p = *p;
            best = i;
        }
    }
    best
}
