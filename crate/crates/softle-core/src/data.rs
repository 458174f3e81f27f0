use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::Result;

pub const LABEL_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitTag {
    Train,
    IdTest,
    OodTest,
}

impl SplitTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::IdTest => "id_test",
            SplitTag::OodTest => "ood_test",
        }
    }

    pub fn parse(s: &str) -> Option<SplitTag> {
        match s {
            "train" => Some(SplitTag::Train),
            "id_test" => Some(SplitTag::IdTest),
            "ood_test" => Some(SplitTag::OodTest),
            _ => None,
        }
    }
}

/// One classification example: a dense feature vector and a gold class.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: u64,
    pub gold_class: usize,
    pub features: Vec<f64>,
}

/// An ordered collection of samples with a fixed class count and feature
/// dimension. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    num_classes: usize,
    num_features: usize,
    split_tag: SplitTag,
}

impl Dataset {
    pub fn new(
        samples: Vec<Sample>,
        num_classes: usize,
        num_features: usize,
        split_tag: SplitTag,
    ) -> Result<Dataset> {
        if num_classes == 0 || num_features == 0 {
            return Err(Error::InvalidDataset(format!(
                "K and F must be positive (K={num_classes}, F={num_features})"
            )));
        }
        let mut ids: Vec<u64> = Vec::with_capacity(samples.len());
        for (idx, s) in samples.iter().enumerate() {
            if s.features.len() != num_features {
                return Err(Error::InvalidDataset(format!(
                    "sample {idx} (id {}) has {} features, expected {num_features}",
                    s.id,
                    s.features.len()
                )));
            }
            if s.gold_class >= num_classes {
                return Err(Error::InvalidDataset(format!(
                    "sample {idx} (id {}) has gold_class {} >= K={num_classes}",
                    s.id, s.gold_class
                )));
            }
            ids.push(s.id);
        }
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidDataset("duplicate sample id".into()));
        }
        Ok(Dataset { samples, num_classes, num_features, split_tag })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn split_tag(&self) -> SplitTag {
        self.split_tag
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelKind {
    Hard,
    Soft,
}

/// A length-(K+1) training target. The dummy class sits at the last index:
/// hard vectors put 1 on the gold class and 0 on the dummy; soft vectors
/// put `1 - s` on the gold class and the shortcut degree `s` on the dummy.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVector {
    probs: Vec<f64>,
    kind: LabelKind,
}

impl LabelVector {
    /// One-hot over K classes, extended with a zero dummy entry.
    pub fn hard(gold: usize, num_classes: usize) -> Result<LabelVector> {
        if gold >= num_classes {
            return Err(Error::ShapeMismatch {
                context: "LabelVector::hard gold class",
                expected: num_classes,
                actual: gold,
            });
        }
        let mut probs = vec![0.0; num_classes + 1];
        probs[gold] = 1.0;
        Ok(LabelVector { probs, kind: LabelKind::Hard })
    }

    /// `1 - s` on the gold class, `s` on the dummy class.
    pub fn soft(gold: usize, shortcut_degree: f64, num_classes: usize) -> Result<LabelVector> {
        if gold >= num_classes {
            return Err(Error::ShapeMismatch {
                context: "LabelVector::soft gold class",
                expected: num_classes,
                actual: gold,
            });
        }
        if !(shortcut_degree > 0.0 && shortcut_degree < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "soft label requires s in (0,1), got {shortcut_degree}"
            )));
        }
        let mut probs = vec![0.0; num_classes + 1];
        probs[gold] = 1.0 - shortcut_degree;
        probs[num_classes] = shortcut_degree;
        let v = LabelVector { probs, kind: LabelKind::Soft };
        debug_assert!(v.sums_to_one());
        Ok(v)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn kind(&self) -> LabelKind {
        self.kind
    }

    /// Number of task classes K (vector length minus the dummy).
    pub fn num_classes(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn dummy_mass(&self) -> f64 {
        *self.probs.last().expect("non-empty label vector")
    }

    pub fn sums_to_one(&self) -> bool {
        let sum: f64 = self.probs.iter().sum();
        (sum - 1.0).abs() <= LABEL_SUM_TOL
    }
}
