//! Flat key-value config files. Keys mirror the `RunConfig` and
//! `BiasedDatasetSpec` field names exactly; unknown keys are an error so a
//! typo cannot silently fall back to a default.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use softle_core::config::{Arch, OptimizerKind, RunConfig, ScheduleMode};
use softle_core::datagen::{BiasedDatasetSpec, OodMode};

use crate::error::CliError;

/// Everything a run needs: training hyperparameters plus the generative
/// spec of the synthetic benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct FullConfig {
    pub run: RunConfig,
    pub data: BiasedDatasetSpec,
}

impl Default for FullConfig {
    fn default() -> Self {
        FullConfig { run: RunConfig::default(), data: BiasedDatasetSpec::default() }
    }
}

fn arch_name(arch: Arch) -> String {
    match arch {
        Arch::Linear => "linear".into(),
        Arch::Mlp { hidden } => format!("mlp:{hidden}"),
    }
}

fn parse_arch(s: &str) -> Result<Arch, CliError> {
    if s == "linear" {
        return Ok(Arch::Linear);
    }
    if let Some(h) = s.strip_prefix("mlp:") {
        let hidden = h
            .parse()
            .map_err(|_| CliError::config(format!("invalid mlp hidden size '{h}'")))?;
        return Ok(Arch::Mlp { hidden });
    }
    Err(CliError::config(format!("unknown arch '{s}' (expected 'linear' or 'mlp:<hidden>')")))
}

fn optimizer_name(o: OptimizerKind) -> &'static str {
    match o {
        OptimizerKind::Sgd => "sgd",
        OptimizerKind::Adam => "adam",
    }
}

fn parse_optimizer(s: &str) -> Result<OptimizerKind, CliError> {
    match s {
        "sgd" => Ok(OptimizerKind::Sgd),
        "adam" => Ok(OptimizerKind::Adam),
        _ => Err(CliError::config(format!("unknown optimizer '{s}'"))),
    }
}

fn schedule_mode_name(m: ScheduleMode) -> &'static str {
    match m {
        ScheduleMode::HardFirst => "F",
        ScheduleMode::HardLast => "L",
        ScheduleMode::AllSoft => "none",
    }
}

impl FullConfig {
    /// Canonical key = value rendering; parsing it back is the identity.
    pub fn render(&self) -> String {
        let r = &self.run;
        let d = &self.data;
        let mut out = String::new();
        let mut kv = |k: &str, v: String| writeln!(out, "{k} = {v}").expect("string write");
        kv("xi", r.xi.to_string());
        kv("alpha", r.alpha.to_string());
        kv("beta", r.beta.to_string());
        kv("teacher_epochs", r.teacher_epochs.to_string());
        kv("student_epochs", r.student_epochs.to_string());
        kv("warmup_epochs", r.warmup_epochs.to_string());
        kv("schedule_mode", schedule_mode_name(r.schedule_mode).into());
        kv("learning_rate", r.learning_rate.to_string());
        kv("teacher_learning_rate", r.teacher_learning_rate.to_string());
        kv("batch_size", r.batch_size.to_string());
        kv("seed", r.seed.to_string());
        kv("optimizer", optimizer_name(r.optimizer).into());
        kv("teacher_optimizer", optimizer_name(r.teacher_optimizer).into());
        kv("arch", arch_name(r.arch));
        kv("k", d.k.to_string());
        kv("f_signal", d.f_signal.to_string());
        kv("f_shortcut", d.f_shortcut.to_string());
        kv("rho", d.rho.to_string());
        kv("signal_strength", d.signal_strength.to_string());
        kv("noise_sigma", d.noise_sigma.to_string());
        kv("n_train", d.n_train.to_string());
        kv("n_id", d.n_id.to_string());
        kv("n_ood", d.n_ood.to_string());
        kv("ood_mode", d.ood_mode.as_str().into());
        out
    }

    /// Parse `key = value` lines over the defaults. Blank lines and `#`
    /// comments are skipped; unknown or repeated keys are errors.
    pub fn parse(text: &str) -> Result<FullConfig, CliError> {
        let mut cfg = FullConfig::default();
        let mut seen = BTreeSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("line {}: expected 'key = value', got '{line}'", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(CliError::config(format!("duplicate key '{key}'")));
            }
            cfg.set(key, value)?;
        }
        Ok(cfg)
    }

    /// Apply one key. Shared by file parsing and CLI overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
            value
                .parse()
                .map_err(|_| CliError::config(format!("invalid value '{value}' for key '{key}'")))
        }
        let r = &mut self.run;
        let d = &mut self.data;
        match key {
            "xi" => r.xi = num(key, value)?,
            "alpha" => r.alpha = num(key, value)?,
            "beta" => r.beta = num(key, value)?,
            "teacher_epochs" => r.teacher_epochs = num(key, value)?,
            "student_epochs" => r.student_epochs = num(key, value)?,
            "warmup_epochs" => r.warmup_epochs = num(key, value)?,
            "schedule_mode" => self.set_schedule(value)?,
            "learning_rate" => r.learning_rate = num(key, value)?,
            "teacher_learning_rate" => r.teacher_learning_rate = num(key, value)?,
            "batch_size" => r.batch_size = num(key, value)?,
            "seed" => r.seed = num(key, value)?,
            "optimizer" => r.optimizer = parse_optimizer(value)?,
            "teacher_optimizer" => r.teacher_optimizer = parse_optimizer(value)?,
            "arch" => r.arch = parse_arch(value)?,
            "k" => d.k = num(key, value)?,
            "f_signal" => d.f_signal = num(key, value)?,
            "f_shortcut" => d.f_shortcut = num(key, value)?,
            "rho" => d.rho = num(key, value)?,
            "signal_strength" => d.signal_strength = num(key, value)?,
            "noise_sigma" => d.noise_sigma = num(key, value)?,
            "n_train" => d.n_train = num(key, value)?,
            "n_id" => d.n_id = num(key, value)?,
            "n_ood" => d.n_ood = num(key, value)?,
            "ood_mode" => {
                d.ood_mode = OodMode::parse(value)
                    .ok_or_else(|| CliError::config(format!("unknown ood_mode '{value}'")))?
            }
            _ => return Err(CliError::config(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    /// Accepts the ablation-row names `F2`, `L2`, `none`; a digit also sets
    /// `warmup_epochs`.
    pub fn set_schedule(&mut self, value: &str) -> Result<(), CliError> {
        let (mode, n) = ScheduleMode::parse(value).map_err(CliError::from)?;
        self.run.schedule_mode = mode;
        if let Some(n) = n {
            self.run.warmup_epochs = n;
        }
        Ok(())
    }

    /// Name of the configured schedule row, e.g. `F2`.
    pub fn schedule_name(&self) -> String {
        self.run.schedule_mode.name(self.run.warmup_epochs)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.run.validate()?;
        self.data.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_parse_round_trip() {
        let cfg = FullConfig::default();
        assert_eq!(FullConfig::parse(&cfg.render()).unwrap(), cfg);
    }

    #[test]
    fn round_trip_non_default() {
        let mut cfg = FullConfig::default();
        cfg.set("arch", "linear").unwrap();
        cfg.set("schedule_mode", "L3").unwrap();
        cfg.set("learning_rate", "0.125").unwrap();
        cfg.set("seed", "9").unwrap();
        assert_eq!(cfg.run.warmup_epochs, 3);
        assert_eq!(FullConfig::parse(&cfg.render()).unwrap(), cfg);
    }

    #[test]
    fn unknown_key_is_error() {
        assert!(FullConfig::parse("learning_rte = 0.1\n").is_err());
    }

    #[test]
    fn duplicate_key_is_error() {
        assert!(FullConfig::parse("seed = 1\nseed = 2\n").is_err());
    }

    #[test]
    fn comments_and_blanks_skipped() {
        let cfg = FullConfig::parse("# comment\n\nseed = 5\n").unwrap();
        assert_eq!(cfg.run.seed, 5);
    }

    #[test]
    fn float_values_round_trip_exactly() {
        let mut cfg = FullConfig::default();
        cfg.set("signal_strength", "0.1000000000000001").unwrap();
        let back = FullConfig::parse(&cfg.render()).unwrap();
        assert_eq!(back.data.signal_strength, 0.100_000_000_000_000_1);
    }
}
