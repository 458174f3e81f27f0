//! Metrics: ID/OOD accuracy, over-confidence ratios, misclassified-
//! confidence histograms, and the shortcut-weight probe for linear models.
//!
//! Student confidences are always taken over the first K classes and
//! renormalized, so teacher and student live on the same [0, 1] scale and
//! every metric is invariant to shifts of the dummy logit.

use crate::config::Arch;
use crate::data::Dataset;
use crate::datagen::BiasedDatasetSpec;
use crate::error::Error;
use crate::model::{forward, ClassifierParams};
use crate::pipeline::argmax_task_class;
use crate::Result;

pub const HISTOGRAM_BINS: usize = 10;

/// Predicted task class and renormalized task-class confidence for one
/// input. For K-output models this is the plain argmax and max softmax.
fn predict_with_confidence(
    model: &ClassifierParams,
    features: &[f64],
    num_classes: usize,
) -> Result<(usize, f64)> {
    let fwd = forward(model, features)?;
    if model.num_outputs == num_classes {
        let pred = argmax_task_class(&fwd.probs, num_classes);
        Ok((pred, fwd.probs[pred]))
    } else if model.num_outputs == num_classes + 1 {
        let task_mass: f64 = fwd.probs[..num_classes].iter().sum();
        let pred = argmax_task_class(&fwd.probs, num_classes);
        Ok((pred, fwd.probs[pred] / task_mass))
    } else {
        Err(Error::ModelMismatch(alloc::format!(
            "model has {} outputs for a {num_classes}-class dataset",
            model.num_outputs
        )))
    }
}

fn check_model_arity(model: &ClassifierParams, dataset: &Dataset, dummy_excluded: bool) -> Result<()> {
    let expected = dataset.num_classes() + usize::from(dummy_excluded);
    if model.num_outputs != expected {
        return Err(Error::ModelMismatch(alloc::format!(
            "model has {} outputs, expected {expected}",
            model.num_outputs
        )));
    }
    Ok(())
}

/// Fraction of samples whose predicted task class matches gold. Students
/// are scored with the dummy class excluded.
pub fn accuracy(model: &ClassifierParams, dataset: &Dataset, dummy_excluded: bool) -> Result<f64> {
    check_model_arity(model, dataset, dummy_excluded)?;
    let k = dataset.num_classes();
    let mut correct = 0usize;
    for s in dataset.samples() {
        let (pred, _) = predict_with_confidence(model, &s.features, k)?;
        if pred == s.gold_class {
            correct += 1;
        }
    }
    Ok(correct as f64 / dataset.len().max(1) as f64)
}

/// Fraction of samples whose max task-class confidence exceeds `xi`.
pub fn overconfidence_ratio(model: &ClassifierParams, dataset: &Dataset, xi: f64) -> Result<f64> {
    let k = dataset.num_classes();
    let mut over = 0usize;
    for s in dataset.samples() {
        let (_, conf) = predict_with_confidence(model, &s.features, k)?;
        if conf > xi {
            over += 1;
        }
    }
    Ok(over as f64 / dataset.len().max(1) as f64)
}

/// Histogram of max task-class confidence among misclassified samples.
/// Ten equal-width bins over [0, 1]; the top bin is closed at 1.0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfidenceHistogram {
    pub counts: [u64; HISTOGRAM_BINS],
}

impl ConfidenceHistogram {
    pub fn bin_edges(bin: usize) -> (f64, f64) {
        (bin as f64 / HISTOGRAM_BINS as f64, (bin + 1) as f64 / HISTOGRAM_BINS as f64)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Fraction of histogram mass in the top bin (confidence > 0.9).
    pub fn top_bin_fraction(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            self.counts[HISTOGRAM_BINS - 1] as f64 / total as f64
        }
    }
}

pub fn misclassified_confidence_histogram(
    model: &ClassifierParams,
    dataset: &Dataset,
) -> Result<ConfidenceHistogram> {
    let k = dataset.num_classes();
    let mut hist = ConfidenceHistogram::default();
    for s in dataset.samples() {
        let (pred, conf) = predict_with_confidence(model, &s.features, k)?;
        if pred != s.gold_class {
            let bin = ((conf * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1);
            hist.counts[bin] += 1;
        }
    }
    Ok(hist)
}

/// Fraction of a linear model's absolute weight mass sitting on the
/// shortcut columns, averaged over the K task-class rows (the dummy row,
/// if present, is excluded).
pub fn shortcut_weight_mass(model: &ClassifierParams, spec: &BiasedDatasetSpec) -> Result<f64> {
    if model.arch != Arch::Linear {
        return Err(Error::ModelMismatch("shortcut_weight_mass requires a linear model".into()));
    }
    if model.num_inputs != spec.num_features() {
        return Err(Error::ShapeMismatch {
            context: "shortcut_weight_mass inputs",
            expected: spec.num_features(),
            actual: model.num_inputs,
        });
    }
    let layer = &model.layers[0];
    let task_rows = spec.k.min(model.num_outputs);
    let mut sum_ratio = 0.0;
    for r in 0..task_rows {
        let row = &layer.weights[r * layer.cols..(r + 1) * layer.cols];
        let total: f64 = row.iter().map(|w| libm::fabs(*w)).sum();
        let shortcut: f64 = row[spec.f_signal..].iter().map(|w| libm::fabs(*w)).sum();
        sum_ratio += if total > 0.0 { shortcut / total } else { 0.0 };
    }
    Ok(sum_ratio / task_rows as f64)
}

/// Everything the reporting layer needs about one trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub method: alloc::string::String,
    pub seed: u64,
    pub id_accuracy: f64,
    pub ood_accuracy: f64,
    /// Mean of ID and OOD accuracy.
    pub avg_accuracy: f64,
    pub id_overconfidence_ratio: f64,
    pub ood_overconfidence_ratio: f64,
    pub id_misclassified_histogram: ConfidenceHistogram,
    pub ood_misclassified_histogram: ConfidenceHistogram,
    /// Only for linear models scored against a known generative spec.
    pub shortcut_weight_mass: Option<f64>,
}

pub fn evaluate_model(
    model: &ClassifierParams,
    id_test: &Dataset,
    ood_test: &Dataset,
    xi: f64,
    data_spec: Option<&BiasedDatasetSpec>,
    method: &str,
    seed: u64,
) -> Result<EvalReport> {
    let dummy = model.num_outputs == id_test.num_classes() + 1;
    let id_accuracy = accuracy(model, id_test, dummy)?;
    let ood_accuracy = accuracy(model, ood_test, dummy)?;
    let mass = match (model.arch, data_spec) {
        (Arch::Linear, Some(spec)) => Some(shortcut_weight_mass(model, spec)?),
        _ => None,
    };
    Ok(EvalReport {
        method: method.into(),
        seed,
        id_accuracy,
        ood_accuracy,
        avg_accuracy: (id_accuracy + ood_accuracy) / 2.0,
        id_overconfidence_ratio: overconfidence_ratio(model, id_test, xi)?,
        ood_overconfidence_ratio: overconfidence_ratio(model, ood_test, xi)?,
        id_misclassified_histogram: misclassified_confidence_histogram(model, id_test)?,
        ood_misclassified_histogram: misclassified_confidence_histogram(model, ood_test)?,
        shortcut_weight_mass: mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Sample, SplitTag};
    use crate::model::Layer;
    use alloc::vec;

    fn const_model(probs: &[f64], num_inputs: usize) -> ClassifierParams {
        let mut layer = Layer {
            rows: probs.len(),
            cols: num_inputs,
            weights: vec![0.0; probs.len() * num_inputs],
            biases: vec![0.0; probs.len()],
        };
        for (b, p) in layer.biases.iter_mut().zip(probs) {
            *b = libm::log(*p);
        }
        ClassifierParams {
            arch: Arch::Linear,
            num_inputs,
            num_outputs: probs.len(),
            layers: vec![layer],
        }
    }

    fn tiny_dataset(golds: &[usize]) -> Dataset {
        let samples = golds
            .iter()
            .enumerate()
            .map(|(i, g)| Sample { id: i as u64, gold_class: *g, features: vec![0.0] })
            .collect();
        Dataset::new(samples, 3, 1, SplitTag::IdTest).unwrap()
    }

    #[test]
    fn perfect_model_accuracy_one() {
        let model = const_model(&[0.8, 0.1, 0.1], 1);
        let d = tiny_dataset(&[0, 0, 0]);
        assert_eq!(accuracy(&model, &d, false).unwrap(), 1.0);
        assert_eq!(misclassified_confidence_histogram(&model, &d).unwrap().total(), 0);
    }

    #[test]
    fn dummy_dominant_student_scored_as_if_dummy_absent() {
        let model = const_model(&[0.05, 0.25, 0.1, 0.6], 1);
        let d = tiny_dataset(&[1, 1]);
        assert_eq!(accuracy(&model, &d, true).unwrap(), 1.0);
    }

    #[test]
    fn uniform_model_overconfidence_zero() {
        let model = const_model(&[1.0 / 3.0; 3], 1);
        let d = tiny_dataset(&[0, 1, 2]);
        assert_eq!(overconfidence_ratio(&model, &d, 0.9).unwrap(), 0.0);
    }

    #[test]
    fn saturated_model_overconfidence_one() {
        let mut model = const_model(&[1.0 / 3.0; 3], 1);
        model.layers[0].biases[0] += 100.0;
        let d = tiny_dataset(&[0, 1, 2]);
        assert_eq!(overconfidence_ratio(&model, &d, 0.9).unwrap(), 1.0);
    }

    #[test]
    fn uniform_model_histogram_mass_in_one_bin() {
        let model = const_model(&[1.0 / 3.0; 3], 1);
        let d = tiny_dataset(&[1, 2, 1, 2]);
        let hist = misclassified_confidence_histogram(&model, &d).unwrap();
        assert_eq!(hist.total(), 4, "uniform model predicts class 0, all misclassified");
        assert_eq!(hist.counts[3], 4, "1/3 falls in bin [0.3, 0.4)");
    }

    #[test]
    fn student_metrics_invariant_to_dummy_logit_shift() {
        let mut model = const_model(&[0.3, 0.3, 0.2, 0.2], 1);
        let d = tiny_dataset(&[0, 1, 2]);
        let base = (
            accuracy(&model, &d, true).unwrap(),
            overconfidence_ratio(&model, &d, 0.5).unwrap(),
            misclassified_confidence_histogram(&model, &d).unwrap(),
        );
        model.layers[0].biases[3] += 30.0;
        assert_eq!(accuracy(&model, &d, true).unwrap(), base.0);
        assert_eq!(overconfidence_ratio(&model, &d, 0.5).unwrap(), base.1);
        assert_eq!(misclassified_confidence_histogram(&model, &d).unwrap(), base.2);
    }

    #[test]
    fn shortcut_mass_extremes() {
        let spec = BiasedDatasetSpec { f_signal: 2, f_shortcut: 3, ..Default::default() };
        let mut model = const_model(&[0.3, 0.3, 0.4], 5);
        // all weight on signal columns
        for r in 0..3 {
            model.layers[0].weights[r * 5] = 1.0;
        }
        assert_eq!(shortcut_weight_mass(&model, &spec).unwrap(), 0.0);
        // all weight on shortcut columns
        for w in model.layers[0].weights.iter_mut() {
            *w = 0.0;
        }
        for r in 0..3 {
            model.layers[0].weights[r * 5 + 3] = -2.0;
        }
        assert_eq!(shortcut_weight_mass(&model, &spec).unwrap(), 1.0);
    }

    #[test]
    fn report_avg_is_exact_mean() {
        let model = const_model(&[0.8, 0.1, 0.1], 1);
        let id = tiny_dataset(&[0, 1]);
        let ood = tiny_dataset(&[1, 2]);
        let r = evaluate_model(&model, &id, &ood, 0.9, None, "test", 0).unwrap();
        assert_eq!(r.avg_accuracy, (r.id_accuracy + r.ood_accuracy) / 2.0);
        assert_eq!(r.id_accuracy, 0.5);
        assert_eq!(r.ood_accuracy, 0.0);
    }
}
