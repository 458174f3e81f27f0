//! Shortcut-degree quantification and dummy-class soft-label encoding.
//!
//! A frozen teacher scores every training sample; samples whose gold-class
//! confidence exceeds the threshold `xi` get a shortcut degree
//! `s = log_alpha(sigma + beta)` which becomes the dummy-class mass of a
//! smoothed (K+1)-class label. Everything else keeps its hard label.

use alloc::vec::Vec;

use crate::config::RunConfig;
use crate::data::{Dataset, LabelVector};
use crate::error::Error;
use crate::model::{check_arity, forward, ClassifierParams};
use crate::Result;

/// Per-sample record of what the teacher thought and what it implied.
#[derive(Debug, Clone, PartialEq)]
pub struct ShortcutAnnotation {
    pub sample_id: u64,
    /// Teacher softmax probability on the gold class.
    pub sigma: f64,
    pub over_confident: bool,
    /// `log_alpha(sigma + beta)` when over-confident, else 0.
    pub shortcut_degree: f64,
}

/// `log_alpha(sigma + beta)` for over-confident samples, 0 otherwise.
///
/// With a validated config (`xi + beta > 1 < alpha - beta`) the result is
/// strictly inside (0, 1) whenever `sigma > xi`, so it can serve directly
/// as the dummy-class probability mass.
pub fn shortcut_degree(sigma: f64, cfg: &RunConfig) -> f64 {
    if sigma > cfg.xi {
        libm::log(sigma + cfg.beta) / libm::log(cfg.alpha)
    } else {
        0.0
    }
}

/// Score every training sample with the frozen teacher and emit its
/// annotation plus (K+1)-class label, in input order.
pub fn encode_labels(
    train: &Dataset,
    teacher: &ClassifierParams,
    cfg: &RunConfig,
) -> Result<Vec<(ShortcutAnnotation, LabelVector)>> {
    cfg.validate()?;
    check_arity(teacher, train.num_classes())?;
    let k = train.num_classes();
    let mut out = Vec::with_capacity(train.len());
    for sample in train.samples() {
        let fwd = forward(teacher, &sample.features)?;
        let sigma = fwd.probs[sample.gold_class];
        let s = shortcut_degree(sigma, cfg);
        let over_confident = sigma > cfg.xi;
        if over_confident {
            // sigma > xi >= 0.5 forces gold to also be the argmax class.
            let argmax = fwd
                .probs
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite probs"))
                .map(|(i, _)| i)
                .expect("non-empty probs");
            if argmax != sample.gold_class {
                return Err(Error::ModelMismatch(alloc::format!(
                    "over-confident sample {} has argmax {} != gold {}",
                    sample.id,
                    argmax,
                    sample.gold_class
                )));
            }
        }
        let label = if over_confident {
            LabelVector::soft(sample.gold_class, s, k)?
        } else {
            LabelVector::hard(sample.gold_class, k)?
        };
        debug_assert!(label.sums_to_one());
        out.push((
            ShortcutAnnotation {
                sample_id: sample.id,
                sigma,
                over_confident,
                shortcut_degree: s,
            },
            label,
        ));
    }
    Ok(out)
}
