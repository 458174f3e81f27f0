use alloc::format;
use alloc::string::String;

use crate::error::Error;
use crate::Result;

/// Classifier architecture. The linear model keeps the shortcut-weight
/// probe exactly interpretable; the MLP shows the method does not depend
/// on linearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arch {
    Linear,
    /// One hidden tanh layer of the given width.
    Mlp { hidden: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// When the student trains on hard (K+1)-extended one-hot labels instead of
/// the encoded soft labels. The epoch count `n` comes from
/// [`RunConfig::warmup_epochs`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleMode {
    /// Hard-label loss for the first `n` epochs, soft labels afterwards.
    HardFirst,
    /// Soft labels first, hard-label loss for the last `n` epochs.
    HardLast,
    /// Soft labels for every epoch (the "without replacing" ablation).
    AllSoft,
}

impl ScheduleMode {
    /// Parse the ablation-row names: `F2`, `L2`, `none` (the digit sets the
    /// hard-label epoch count and may be omitted).
    pub fn parse(s: &str) -> Result<(ScheduleMode, Option<usize>)> {
        if s.eq_ignore_ascii_case("none") {
            return Ok((ScheduleMode::AllSoft, None));
        }
        let (mode, rest) = match s.as_bytes().first() {
            Some(b'F') | Some(b'f') => (ScheduleMode::HardFirst, &s[1..]),
            Some(b'L') | Some(b'l') => (ScheduleMode::HardLast, &s[1..]),
            _ => return Err(Error::InvalidConfig(format!("unknown schedule mode '{s}'"))),
        };
        if rest.is_empty() {
            return Ok((mode, None));
        }
        let n: usize = rest
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("unknown schedule mode '{s}'")))?;
        Ok((mode, Some(n)))
    }

    pub fn name(&self, n: usize) -> String {
        match self {
            ScheduleMode::HardFirst => format!("F{n}"),
            ScheduleMode::HardLast => format!("L{n}"),
            ScheduleMode::AllSoft => String::from("none"),
        }
    }
}

/// Hyperparameters for one experiment. `xi` is the over-confidence
/// threshold; `alpha` and `beta` shape the shortcut-degree map
/// `log_alpha(sigma + beta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub xi: f64,
    pub alpha: f64,
    pub beta: f64,
    pub teacher_epochs: usize,
    pub student_epochs: usize,
    /// Hard-label epoch count for the F/L schedules.
    pub warmup_epochs: usize,
    pub schedule_mode: ScheduleMode,
    /// Student (and baseline) learning rate; the teacher has its own.
    pub learning_rate: f64,
    pub teacher_learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Student optimizer. The teacher is trained separately (see
    /// `teacher_optimizer`): plain SGD keeps the biased teacher hooked on
    /// the large-amplitude shortcut indicators, while the scale-adaptive
    /// student optimizer can still pick up the low-amplitude signal.
    pub optimizer: OptimizerKind,
    pub teacher_optimizer: OptimizerKind,
    /// Student architecture. The teacher is always linear so the
    /// shortcut-weight probe applies to it.
    pub arch: Arch,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            xi: 0.9,
            alpha: 1.48,
            beta: 0.2,
            teacher_epochs: 20,
            student_epochs: 12,
            warmup_epochs: 2,
            schedule_mode: ScheduleMode::HardFirst,
            learning_rate: 0.05,
            teacher_learning_rate: 0.5,
            batch_size: 32,
            seed: 0,
            optimizer: OptimizerKind::Adam,
            teacher_optimizer: OptimizerKind::Sgd,
            arch: Arch::Mlp { hidden: 16 },
        }
    }
}

impl RunConfig {
    /// Reject configs for which the shortcut degree could leave (0, 1).
    /// `xi + beta > 1` makes the log argument exceed 1 for over-confident
    /// samples, and `alpha > 1 + beta` keeps the result below 1.
    pub fn validate(&self) -> Result<()> {
        if !(self.xi > 0.0 && self.xi < 1.0) {
            return Err(Error::InvalidConfig(format!("xi must be in (0,1), got {}", self.xi)));
        }
        if self.beta < 0.0 {
            return Err(Error::InvalidConfig(format!("beta must be >= 0, got {}", self.beta)));
        }
        if self.alpha <= 1.0 + self.beta {
            return Err(Error::InvalidConfig(format!(
                "alpha must exceed 1 + beta ({} <= {})",
                self.alpha,
                1.0 + self.beta
            )));
        }
        if self.xi + self.beta <= 1.0 {
            return Err(Error::InvalidConfig(format!(
                "xi + beta must exceed 1 ({} + {})",
                self.xi, self.beta
            )));
        }
        if self.teacher_epochs == 0 || self.student_epochs == 0 {
            return Err(Error::InvalidConfig(String::from("epoch counts must be positive")));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.teacher_learning_rate > 0.0 && self.teacher_learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "teacher_learning_rate must be positive, got {}",
                self.teacher_learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig(String::from("batch_size must be positive")));
        }
        if let Arch::Mlp { hidden } = self.arch {
            if hidden == 0 {
                return Err(Error::InvalidConfig(String::from("hidden size must be positive")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_alpha_below_one_plus_beta() {
        let cfg = RunConfig { alpha: 1.1, beta: 0.2, ..RunConfig::default() };
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn rejects_xi_beta_at_most_one() {
        let cfg = RunConfig { xi: 0.7, beta: 0.2, ..RunConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn schedule_parse() {
        assert_eq!(ScheduleMode::parse("F2").unwrap(), (ScheduleMode::HardFirst, Some(2)));
        assert_eq!(ScheduleMode::parse("L2").unwrap(), (ScheduleMode::HardLast, Some(2)));
        assert_eq!(ScheduleMode::parse("none").unwrap(), (ScheduleMode::AllSoft, None));
        assert_eq!(ScheduleMode::parse("F").unwrap(), (ScheduleMode::HardFirst, None));
        assert!(ScheduleMode::parse("Q3").is_err());
    }
}
