use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Task, DEFAULT_FRACTIONS};
use crate::error::{Error, Result};
use crate::mechanisms::{PrivacyParams, Vocabulary};
use crate::neural::{AttackerTopology, TrainConfig};
use crate::rng::{derive_seed, DEFAULT_SEED};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrivacyModel {
    Baseline,
    Gr,
    Cgt,
    Ldp,
    Mdp,
    Cape,
}

impl PrivacyModel {
    pub const ALL: [PrivacyModel; 6] = [
        PrivacyModel::Baseline,
        PrivacyModel::Gr,
        PrivacyModel::Cgt,
        PrivacyModel::Ldp,
        PrivacyModel::Mdp,
        PrivacyModel::Cape,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PrivacyModel::Baseline => "baseline",
            PrivacyModel::Gr => "gr",
            PrivacyModel::Cgt => "cgt",
            PrivacyModel::Ldp => "ldp",
            PrivacyModel::Mdp => "mdp",
            PrivacyModel::Cape => "cape",
        }
    }

    /// 0.1 for the Laplace mechanisms, 20 for word substitution.
    pub fn default_epsilon(self) -> f64 {
        match self {
            PrivacyModel::Mdp => 20.0,
            _ => 0.1,
        }
    }

    pub fn uses_epsilon(self) -> bool {
        matches!(self, PrivacyModel::Ldp | PrivacyModel::Mdp | PrivacyModel::Cape)
    }

    pub fn uses_lambda(self) -> bool {
        matches!(self, PrivacyModel::Gr | PrivacyModel::Cape)
    }
}

impl fmt::Display for PrivacyModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PrivacyModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PrivacyModel::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let names: Vec<&str> = PrivacyModel::ALL.iter().map(|m| m.name()).collect();
                Error::param("model", format!("unknown model `{s}`; valid models: {}", names.join(", ")))
            })
    }
}

/// Everything needed to reproduce one experiment besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub model: PrivacyModel,
    pub privacy: PrivacyParams,
    pub train: TrainConfig,
    pub attacker: AttackerTopology,
    /// One full run per seed; scores are averaged.
    pub seeds: Vec<u64>,
    pub base_task: Task,
    /// Private attribute the adversary head trains against.
    pub target: Task,
    /// Attributes attacked after training.
    pub attributes: Vec<Task>,
    pub fractions: (f64, f64, f64),
}

impl ExperimentPlan {
    pub fn new(model: PrivacyModel) -> Self {
        Self {
            model,
            privacy: PrivacyParams {
                epsilon: model.default_epsilon(),
                sensitivity: 1.0,
            },
            train: TrainConfig::default(),
            attacker: AttackerTopology::default(),
            seeds: vec![DEFAULT_SEED],
            base_task: Task::Rating,
            target: Task::Gender,
            attributes: Task::PRIVATE.to_vec(),
            fractions: DEFAULT_FRACTIONS,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.privacy.epsilon = epsilon;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.train.lambda = lambda;
        self
    }

    /// `count` seeds derived from `base`.
    pub fn with_seeds(mut self, base: u64, count: usize) -> Self {
        self.seeds = seed_list(base, count);
        self
    }

    pub fn validate(&self, dataset: &Dataset, vocab: Option<&Vocabulary>) -> Result<()> {
        self.train.validate()?;
        if self.model.uses_epsilon() {
            self.privacy.validate()?;
        }
        if self.seeds.is_empty() {
            return Err(Error::param("seeds", "at least one seed is required"));
        }
        if self.attributes.is_empty() {
            return Err(Error::param("attributes", "at least one attribute to attack is required"));
        }
        if !Task::PRIVATE.contains(&self.target) || self.attributes.iter().any(|a| !Task::PRIVATE.contains(a)) {
            return Err(Error::param("target", "attacked attributes must be gender, country or age"));
        }
        if Task::PRIVATE.contains(&self.base_task) {
            return Err(Error::param("base_task", "the base task cannot be a private attribute"));
        }
        if self.model == PrivacyModel::Mdp {
            if let Some(r) = dataset.records().iter().find(|r| r.tokens.is_none()) {
                return Err(Error::MissingTokens { id: r.id.clone() });
            }
            let vocab = vocab.ok_or_else(|| Error::param("vocabulary", "the mdp model needs a vocabulary"))?;
            if vocab.dim() != dataset.dim() {
                return Err(Error::DimMismatch {
                    expected: dataset.dim(),
                    actual: vocab.dim(),
                }
                .context("vocabulary"));
            }
        }
        Ok(())
    }
}

/// Deterministic seeds: the first is `base` itself.
pub fn seed_list(base: u64, count: usize) -> Vec<u64> {
    (0..count)
        .map(|k| if k == 0 { base } else { derive_seed(base, &format!("seed/{k}")) })
        .collect()
}
