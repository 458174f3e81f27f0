//! Comparison debiasing methods driven by the same frozen teacher:
//! example reweighting (down-weight samples the teacher is confident on)
//! and product of experts (train through the combined teacher-student
//! distribution, infer with the student alone).

use alloc::vec;
use alloc::vec::Vec;

use crate::config::RunConfig;
use crate::data::Dataset;
use crate::error::Error;
use crate::labeling::ShortcutAnnotation;
use crate::model::{check_arity, ClassifierParams};
use crate::pipeline::{train_loop, EvalSets, LossKind, Objective, TrainSpec, TrainingLog};
use crate::rng::Stream;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    /// Standard hard-label K-class training (the "original" model).
    None,
    Reweighting,
    Poe,
}

impl BaselineKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BaselineKind::None => "none",
            BaselineKind::Reweighting => "reweighting",
            BaselineKind::Poe => "poe",
        }
    }

    pub fn parse(s: &str) -> Option<BaselineKind> {
        match s {
            "none" => Some(BaselineKind::None),
            "reweighting" => Some(BaselineKind::Reweighting),
            "poe" => Some(BaselineKind::Poe),
            _ => None,
        }
    }
}

/// Standard hard-label K-class training from a fresh init with the
/// student's architecture, optimizer, and epoch budget — the fair
/// "original model" comparison for the debiasing methods.
pub fn train_standard(
    train: &Dataset,
    cfg: &RunConfig,
    eval_sets: Option<EvalSets<'_>>,
) -> Result<(ClassifierParams, TrainingLog)> {
    let spec = TrainSpec {
        objective: Objective::Hard,
        num_outputs: train.num_classes(),
        arch: cfg.arch,
        optimizer: cfg.optimizer,
        learning_rate: cfg.learning_rate,
        init_stream: Stream::BaselineInit,
        shuffle_stream: Stream::BaselineShuffle,
        lr_warmup: true,
        schedule: vec![LossKind::Hard; cfg.student_epochs],
    };
    train_loop(train, cfg, spec, eval_sets)
}

/// Example reweighting: per-sample loss weight `1 - sigma_i`, where
/// `sigma_i` is the frozen teacher's gold-class confidence from the
/// annotation pass. Weights are fixed before training starts.
pub fn train_reweighted(
    train: &Dataset,
    annotations: &[ShortcutAnnotation],
    cfg: &RunConfig,
    eval_sets: Option<EvalSets<'_>>,
) -> Result<(ClassifierParams, TrainingLog)> {
    if annotations.len() != train.len() {
        return Err(Error::ShapeMismatch {
            context: "annotations per training sample",
            expected: train.len(),
            actual: annotations.len(),
        });
    }
    let weights: Vec<f64> = annotations.iter().map(|a| 1.0 - a.sigma).collect();
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::NonFinite { context: "reweighting weights" });
    }
    let spec = TrainSpec {
        objective: Objective::Reweighted { weights: &weights },
        num_outputs: train.num_classes(),
        arch: cfg.arch,
        optimizer: cfg.optimizer,
        learning_rate: cfg.learning_rate,
        init_stream: Stream::BaselineInit,
        shuffle_stream: Stream::BaselineShuffle,
        lr_warmup: true,
        schedule: vec![LossKind::Hard; cfg.student_epochs],
    };
    train_loop(train, cfg, spec, eval_sets)
}

/// Product of experts: the training loss is cross-entropy of
/// `softmax(z_student + log p_teacher)` against the hard label; gradients
/// flow only into the student and inference uses the student alone.
pub fn train_poe(
    train: &Dataset,
    teacher: &ClassifierParams,
    cfg: &RunConfig,
    eval_sets: Option<EvalSets<'_>>,
) -> Result<(ClassifierParams, TrainingLog)> {
    check_arity(teacher, train.num_classes())?;
    let spec = TrainSpec {
        objective: Objective::Poe { teacher },
        num_outputs: train.num_classes(),
        arch: cfg.arch,
        optimizer: cfg.optimizer,
        learning_rate: cfg.learning_rate,
        init_stream: Stream::BaselineInit,
        shuffle_stream: Stream::BaselineShuffle,
        lr_warmup: true,
        schedule: vec![LossKind::Hard; cfg.student_epochs],
    };
    train_loop(train, cfg, spec, eval_sets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Arch, OptimizerKind};
    use crate::data::{Sample, SplitTag};
    use crate::eval;
    use crate::model::{backward, forward, softmax, Layer};
    use crate::pipeline::{argmax_task_class, train_teacher};

    fn toy() -> Dataset {
        let mut samples = Vec::new();
        for i in 0..30u64 {
            let c = (i % 3) as usize;
            let mut features = vec![0.1; 3];
            features[c] = 1.0;
            samples.push(Sample { id: i, gold_class: c, features });
        }
        Dataset::new(samples, 3, 3, SplitTag::Train).unwrap()
    }

    fn cfg() -> RunConfig {
        RunConfig {
            student_epochs: 8,
            learning_rate: 0.1,
            batch_size: 5,
            optimizer: OptimizerKind::Adam,
            seed: 3,
            ..RunConfig::default()
        }
    }

    fn uniform_teacher(k: usize, f: usize) -> ClassifierParams {
        ClassifierParams {
            arch: Arch::Linear,
            num_inputs: f,
            num_outputs: k,
            layers: vec![Layer {
                rows: k,
                cols: f,
                weights: vec![0.0; k * f],
                biases: vec![0.0; k],
            }],
        }
    }

    #[test]
    fn uniform_weights_match_unweighted_argmax() {
        let d = toy();
        let c = cfg();
        // teacher uniformly uncertain: sigma = 1/3 everywhere
        let annotations: Vec<ShortcutAnnotation> = d
            .samples()
            .iter()
            .map(|s| ShortcutAnnotation {
                sample_id: s.id,
                sigma: 1.0 / 3.0,
                over_confident: false,
                shortcut_degree: 0.0,
            })
            .collect();
        let (weighted, _) = train_reweighted(&d, &annotations, &c, None).unwrap();
        // same streams and schedule, unit weights
        let unit: Vec<ShortcutAnnotation> = annotations
            .iter()
            .map(|a| ShortcutAnnotation { sigma: 0.0, ..a.clone() })
            .collect();
        let (unweighted, _) = train_reweighted(&d, &unit, &c, None).unwrap();
        for s in d.samples() {
            let a = argmax_task_class(&forward(&weighted, &s.features).unwrap().probs, 3);
            let b = argmax_task_class(&forward(&unweighted, &s.features).unwrap().probs, 3);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn fully_confident_sample_contributes_zero_gradient() {
        let ann = ShortcutAnnotation {
            sample_id: 0,
            sigma: 1.0,
            over_confident: true,
            shortcut_degree: 0.465,
        };
        assert_eq!(1.0 - ann.sigma, 0.0);
        // weight 0 scales the accumulated gradient to exactly zero; training
        // with a single such sample leaves the init untouched under SGD
        let d = Dataset::new(
            vec![Sample { id: 0, gold_class: 0, features: vec![1.0, 0.0, 0.0] }],
            3,
            3,
            SplitTag::Train,
        )
        .unwrap();
        let c = RunConfig { optimizer: OptimizerKind::Sgd, student_epochs: 2, ..cfg() };
        let (trained, _) = train_reweighted(&d, &[ann], &c, None).unwrap();
        let mut rng = crate::rng::substream(c.seed, Stream::BaselineInit);
        let init = ClassifierParams::init(c.arch, 3, 3, &mut rng);
        assert_eq!(trained, init);
    }

    #[test]
    fn poe_with_uniform_teacher_matches_standard_gradients() {
        // log of a uniform distribution shifts every combined logit equally,
        // so the combined softmax equals the student softmax exactly
        let d = toy();
        let teacher = uniform_teacher(3, 3);
        let mut rng = crate::rng::substream(9, Stream::BaselineInit);
        let student = ClassifierParams::init(Arch::Linear, 3, 3, &mut rng);
        for s in d.samples() {
            let mut y = vec![0.0; 3];
            y[s.gold_class] = 1.0;
            let plain = backward(&student, &s.features, &y).unwrap();
            let fwd = forward(&student, &s.features).unwrap();
            let t = forward(&teacher, &s.features).unwrap();
            let combined: Vec<f64> = fwd
                .logits
                .iter()
                .zip(&t.probs)
                .map(|(z, p)| z + libm::log(*p))
                .collect();
            let pc = softmax(&combined);
            let g: Vec<f64> = pc.iter().zip(&y).map(|(p, yj)| p - yj).collect();
            let poe = crate::model::backprop_from_logit_grad(&student, &s.features, &fwd, &g);
            for (a, b) in plain.layers.iter().zip(&poe.layers) {
                for (x, y) in a.weights.iter().zip(&b.weights) {
                    assert!((x - y).abs() <= 1e-10);
                }
                for (x, y) in a.biases.iter().zip(&b.biases) {
                    assert!((x - y).abs() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn poe_perfect_teacher_zeroes_gold_logit_gradient() {
        let d = toy();
        // teacher with probability ~1 on the gold class of sample 0
        let mut teacher = uniform_teacher(3, 3);
        teacher.layers[0].biases[0] = 40.0;
        let student = uniform_teacher(3, 3);
        let s = &d.samples()[0];
        assert_eq!(s.gold_class, 0);
        let fwd = forward(&student, &s.features).unwrap();
        let t = forward(&teacher, &s.features).unwrap();
        let combined: Vec<f64> = fwd
            .logits
            .iter()
            .zip(&t.probs)
            .map(|(z, p)| z + libm::log(p.max(crate::model::PROB_FLOOR)))
            .collect();
        let pc = softmax(&combined);
        // combined prediction is already (numerically) certain and correct
        assert!(pc[0] > 1.0 - 1e-9);
        assert!((pc[0] - 1.0).abs() < 1e-9, "gold logit gradient ~ 0");
    }

    #[test]
    fn baselines_train_and_score_on_toy_data() {
        let d = toy();
        let c = cfg();
        let (teacher, _) = train_teacher(&d, &c, None).unwrap();
        let anns = crate::labeling::encode_labels(&d, &teacher, &c).unwrap();
        let annotations: Vec<ShortcutAnnotation> = anns.into_iter().map(|(a, _)| a).collect();
        let (er, _) = train_reweighted(&d, &annotations, &c, None).unwrap();
        let (poe, _) = train_poe(&d, &teacher, &c, None).unwrap();
        let (std_model, _) = train_standard(&d, &c, None).unwrap();
        for m in [&er, &poe, &std_model] {
            assert_eq!(m.num_outputs, 3);
            assert!(eval::accuracy(m, &d, false).unwrap() > 0.9);
        }
    }
}
