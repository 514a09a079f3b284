use std::fmt;
use std::str::FromStr;

use gridx::{HeadKind, Method, Representation, TrainConfig};

use crate::HarnessError;

/// The five learner/representation/head combinations of the experiment
/// matrix, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    QAbsoluteLinear,
    ReinforceAbsoluteLinear,
    ReinforceEgoLinear,
    ReinforceEgoMirror,
    ReinforceEgoMirrorEntropy,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::QAbsoluteLinear,
        Variant::ReinforceAbsoluteLinear,
        Variant::ReinforceEgoLinear,
        Variant::ReinforceEgoMirror,
        Variant::ReinforceEgoMirrorEntropy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::QAbsoluteLinear => "q_absolute_linear",
            Variant::ReinforceAbsoluteLinear => "reinforce_absolute_linear",
            Variant::ReinforceEgoLinear => "reinforce_ego_linear",
            Variant::ReinforceEgoMirror => "reinforce_ego_mirror",
            Variant::ReinforceEgoMirrorEntropy => "reinforce_ego_mirror_entropy",
        }
    }

    pub fn method(self) -> Method {
        match self {
            Variant::QAbsoluteLinear => Method::QLearning,
            _ => Method::Reinforce,
        }
    }

    pub fn representation(self) -> Representation {
        match self {
            Variant::QAbsoluteLinear | Variant::ReinforceAbsoluteLinear => Representation::Absolute,
            _ => Representation::Egocentric,
        }
    }

    pub fn head(self) -> HeadKind {
        match self {
            Variant::ReinforceEgoMirror | Variant::ReinforceEgoMirrorEntropy => HeadKind::Mirror,
            _ => HeadKind::Linear,
        }
    }

    pub fn entropy(self) -> bool {
        self == Variant::ReinforceEgoMirrorEntropy
    }

    /// Value of the `method` CSV column. The entropy variant shares method,
    /// head and representation with the plain mirror run, so its method
    /// label carries a suffix to keep rows distinguishable.
    pub fn method_label(self) -> &'static str {
        match self {
            Variant::QAbsoluteLinear => "q_learning",
            Variant::ReinforceEgoMirrorEntropy => "reinforce_entropy",
            _ => "reinforce",
        }
    }

    pub fn from_columns(method: &str, head: &str, representation: &str) -> Option<Variant> {
        Variant::ALL.into_iter().find(|v| {
            v.method_label() == method && v.head().name() == head && v.representation().name() == representation
        })
    }

    /// Table number (1..=5) that reports this variant.
    pub fn table(self) -> u8 {
        Variant::ALL.iter().position(|&v| v == self).unwrap() as u8 + 1
    }

    pub fn for_table(table: u8) -> Option<Variant> {
        Variant::ALL.get(usize::from(table).checked_sub(1)?).copied()
    }

    /// `base` with the learner, representation, head and entropy switch of
    /// this variant; all other hyperparameters are kept.
    pub fn configure(self, base: &TrainConfig) -> TrainConfig {
        TrainConfig {
            method: self.method(),
            representation: self.representation(),
            head: self.head(),
            entropy_enabled: self.entropy(),
            ..base.clone()
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown variant {s:?}")))
    }
}
