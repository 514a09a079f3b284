//! Flat `key = value` configuration.
//!
//! Blank lines and `#` comments are ignored. Keys cover every training
//! hyperparameter plus the experiment settings; command-line `--set`
//! overrides go through the same [`Settings::apply`] path.
//!
//! ```text
//! # hyperparameters
//! gamma = 0.95
//! learning_rate = 0.002
//! epochs = 200
//! # experiment
//! n_seeds = 20
//! base_seed = 0
//! ```

use std::collections::BTreeSet;
use std::path::Path;
use std::str::FromStr;

use gridx::{TrainConfig, WrongMassScope};

use crate::variant::Variant;
use crate::HarnessError;

/// Every key accepted by [`Settings::apply`].
pub const KEYS: &[&str] = &[
    "method",
    "representation",
    "head",
    "entropy",
    "gamma",
    "learning_rate",
    "batch_size",
    "epochs",
    "grad_clip",
    "f0",
    "f_decay",
    "epsilon_explore",
    "n_seeds",
    "base_seed",
    "workers",
    "test_episodes",
    "wrong_mass_scope",
    "checkpoints",
];

/// Keys that a variant decides for itself.
const VARIANT_KEYS: [&str; 4] = ["method", "representation", "head", "entropy"];

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    /// Hyperparameters shared by all runs. The seed field is overwritten per run.
    pub train: TrainConfig,
    pub n_seeds: usize,
    pub base_seed: u64,
    pub workers: usize,
    /// Evaluation episodes per test instance.
    pub test_episodes: usize,
    pub wrong_mass_scope: WrongMassScope,
    /// Save a checkpoint and an epoch log for every run.
    pub checkpoints: bool,
    explicit: BTreeSet<&'static str>,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            n_seeds: 20,
            base_seed: 0,
            workers: 1,
            test_episodes: 1,
            wrong_mass_scope: WrongMassScope::AllStates,
            checkpoints: false,
            explicit: BTreeSet::new(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, HarnessError> {
    value
        .parse()
        .map_err(|_| HarnessError::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, HarnessError> {
    match value {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(HarnessError::Config(format!("{key}: expected a boolean, got {value:?}"))),
    }
}

impl Settings {
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        let key = KEYS
            .iter()
            .copied()
            .find(|k| *k == key)
            .ok_or_else(|| HarnessError::Config(format!("unknown key {key:?}")))?;
        let t = &mut self.train;
        match key {
            "method" => t.method = value.parse()?,
            "representation" => t.representation = value.parse()?,
            "head" => t.head = value.parse()?,
            "entropy" => t.entropy_enabled = parse_bool(key, value)?,
            "gamma" => t.gamma = parse(key, value)?,
            "learning_rate" => t.learning_rate = parse(key, value)?,
            "batch_size" => t.batch_size = parse(key, value)?,
            "epochs" => t.epochs = parse(key, value)?,
            "grad_clip" => t.grad_clip = parse(key, value)?,
            "f0" => t.f0 = parse(key, value)?,
            "f_decay" => t.f_decay = parse(key, value)?,
            "epsilon_explore" => t.epsilon_explore = parse(key, value)?,
            "n_seeds" => self.n_seeds = parse(key, value)?,
            "base_seed" => self.base_seed = parse(key, value)?,
            "workers" => self.workers = parse(key, value)?,
            "test_episodes" => self.test_episodes = parse(key, value)?,
            "wrong_mass_scope" => {
                self.wrong_mass_scope = match value {
                    "visited" => WrongMassScope::Visited,
                    "all_states" => WrongMassScope::AllStates,
                    _ => return Err(HarnessError::Config(format!("{key}: expected visited or all_states"))),
                }
            }
            "checkpoints" => self.checkpoints = parse_bool(key, value)?,
            _ => unreachable!("key list and match arms disagree"),
        }
        self.explicit.insert(key);
        Ok(())
    }

    /// Parses `key=value` (spaces around `=` allowed).
    pub fn apply_assignment(&mut self, line: &str) -> Result<(), HarnessError> {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| HarnessError::Config(format!("expected key=value, got {line:?}")))?;
        self.apply(k.trim(), v.trim())
    }

    pub fn parse_str(&mut self, text: &str) -> Result<(), HarnessError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            self.apply_assignment(line)
                .map_err(|e| HarnessError::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let mut s = Settings::default();
        s.parse_str(&text)?;
        Ok(s)
    }

    /// Checks ranges, and that explicitly set variant keys agree with every
    /// requested variant.
    pub fn validate(&self, variants: &[Variant]) -> Result<(), HarnessError> {
        if self.n_seeds == 0 || self.workers == 0 || self.test_episodes == 0 {
            return Err(HarnessError::Config("n_seeds, workers and test_episodes must be positive".into()));
        }
        for &v in variants {
            let cfg = self.run_config(v, 0);
            for key in VARIANT_KEYS.iter().filter(|k| self.explicit.contains(*k)) {
                let agrees = match *key {
                    "method" => self.train.method == cfg.method,
                    "representation" => self.train.representation == cfg.representation,
                    "head" => self.train.head == cfg.head,
                    _ => self.train.entropy_enabled == cfg.entropy_enabled,
                };
                if !agrees {
                    return Err(HarnessError::Config(format!("{key} conflicts with variant {v}")));
                }
            }
            cfg.validate()?;
        }
        Ok(())
    }

    /// Seed of run `index` in a cell.
    pub fn seed(&self, index: usize) -> u64 {
        self.base_seed + index as u64
    }

    pub fn run_config(&self, variant: Variant, seed: u64) -> TrainConfig {
        TrainConfig { seed, ..variant.configure(&self.train) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_with_comments() {
        let mut s = Settings::default();
        s.parse_str("# header\n\nepochs = 12  # short\nlearning_rate=0.01\nwrong_mass_scope = visited\ncheckpoints = on\n")
            .unwrap();
        assert_eq!(s.train.epochs, 12);
        assert_eq!(s.train.learning_rate, 0.01);
        assert_eq!(s.wrong_mass_scope, WrongMassScope::Visited);
        assert!(s.checkpoints);
    }

    #[test]
    fn every_key_is_settable() {
        let values = [
            "reinforce", "egocentric", "mirror", "true", "0.9", "0.001", "5", "3", "10", "0.2", "0.98", "0.05",
            "4", "7", "2", "3", "all_states", "false",
        ];
        assert_eq!(values.len(), KEYS.len());
        let mut s = Settings::default();
        for (k, v) in KEYS.iter().zip(values) {
            s.apply(k, v).unwrap_or_else(|e| panic!("{k}: {e}"));
        }
        assert_eq!(s.base_seed, 7);
        assert_eq!(s.train.f_decay, 0.98);
    }

    #[test]
    fn bad_input_is_a_config_error() {
        let mut s = Settings::default();
        assert!(s.apply("nope", "1").is_err());
        assert!(s.apply("epochs", "ten").is_err());
        assert!(s.apply_assignment("epochs").is_err());
        assert!(s.parse_str("gamma = 0.9\nbatch_size = -1\n").unwrap_err().to_string().contains("line 2"));
    }

    #[test]
    fn variant_conflicts_are_rejected() {
        let mut s = Settings::default();
        s.apply("head", "linear").unwrap();
        assert!(s.validate(&[Variant::ReinforceEgoLinear]).is_ok());
        assert!(s.validate(&[Variant::ReinforceEgoMirror]).is_err());
        let mut s = Settings::default();
        s.apply("gamma", "2").unwrap();
        assert!(s.validate(&[Variant::ReinforceEgoLinear]).is_err());
    }
}
