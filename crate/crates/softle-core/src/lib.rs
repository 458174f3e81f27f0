//! Core algorithms for a teacher/student soft-label debiasing laboratory.
//!
//! A biased teacher is trained on hard labels, its softmax confidences are
//! turned into per-sample shortcut degrees, and those degrees are encoded
//! into an extra dummy class that smooths the student's training targets.
//! The dummy class is dropped again at inference time. Synthetic datasets
//! with controllable spurious correlations, two comparison baselines
//! (example reweighting and product of experts), and evaluation metrics
//! round out the toolbox.
//!
//! The crate is `no_std` compatible (`alloc` required); disable the default
//! `std` feature for embedded or wasm use. All file formats and the CLI
//! live in the companion `softle-cli` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod baselines;
pub mod config;
pub mod data;
pub mod datagen;
pub mod error;
pub mod eval;
pub mod labeling;
pub mod model;
pub mod pipeline;
pub mod rng;

pub use config::{Arch, OptimizerKind, RunConfig, ScheduleMode};
pub use data::{Dataset, LabelKind, LabelVector, Sample, SplitTag};
pub use error::Error;
pub use model::{ClassifierParams, ForwardResult};

pub type Result<T> = core::result::Result<T, Error>;
