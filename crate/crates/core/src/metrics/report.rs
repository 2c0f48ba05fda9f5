use serde::{Deserialize, Serialize};

use super::{accuracy, anova_two_way, macro_f1, micro_f1, variance, AnovaSummary};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TaskScore {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub micro_f1: f64,
}

impl TaskScore {
    pub fn score(predictions: &[usize], labels: &[usize], classes: usize) -> Result<Self> {
        Ok(Self {
            accuracy: accuracy(predictions, labels)?,
            macro_f1: macro_f1(predictions, labels, classes)?,
            micro_f1: micro_f1(predictions, labels, classes)?,
        })
    }

    /// Element-wise mean; used to average over seeds.
    pub fn mean(scores: &[TaskScore]) -> TaskScore {
        let n = scores.len().max(1) as f64;
        TaskScore {
            accuracy: scores.iter().map(|s| s.accuracy).sum::<f64>() / n,
            macro_f1: scores.iter().map(|s| s.macro_f1).sum::<f64>() / n,
            micro_f1: scores.iter().map(|s| s.micro_f1).sum::<f64>() / n,
        }
    }
}

/// Leakage measured for one demographic attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackerScore {
    pub attribute: String,
    /// Fresh attacker retrained on the frozen representation. This is the
    /// reported leakage figure.
    pub fresh: TaskScore,
    /// Adversary head trained alongside the model, when the attribute was the
    /// training-time target.
    pub co_trained: Option<TaskScore>,
    /// Macro-F1 of always guessing the majority class on the test labels.
    pub majority_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub base: TaskScore,
    pub attackers: Vec<AttackerScore>,
    /// σ² of the fresh-attacker macro-F1 across attributes.
    pub attacker_f1_variance: f64,
}

impl MetricsReport {
    pub fn new(base: TaskScore, attackers: Vec<AttackerScore>) -> Self {
        let f1: Vec<f64> = attackers.iter().map(|a| a.fresh.macro_f1).collect();
        Self {
            base,
            attacker_f1_variance: variance(&f1),
            attackers,
        }
    }

    pub fn attacker(&self, attribute: &str) -> Option<&AttackerScore> {
        self.attackers.iter().find(|a| a.attribute == attribute)
    }

    /// Averages reports with identical attribute lists (e.g. across seeds).
    pub fn mean(reports: &[MetricsReport]) -> MetricsReport {
        let Some(first) = reports.first() else {
            return MetricsReport::new(TaskScore::default(), Vec::new());
        };
        let n = reports.len() as f64;
        let base = TaskScore::mean(&reports.iter().map(|r| r.base).collect::<Vec<_>>());
        let attackers = first
            .attackers
            .iter()
            .enumerate()
            .map(|(k, a)| {
                let fresh: Vec<TaskScore> = reports.iter().map(|r| r.attackers[k].fresh).collect();
                let co: Vec<TaskScore> = reports.iter().filter_map(|r| r.attackers[k].co_trained).collect();
                AttackerScore {
                    attribute: a.attribute.clone(),
                    fresh: TaskScore::mean(&fresh),
                    co_trained: (co.len() == reports.len()).then(|| TaskScore::mean(&co)),
                    majority_f1: reports.iter().map(|r| r.attackers[k].majority_f1).sum::<f64>() / n,
                }
            })
            .collect();
        MetricsReport::new(base, attackers)
    }

    /// ANOVA over the fresh-attacker macro-F1 grid: one row per report,
    /// one column per attribute.
    pub fn anova(reports: &[MetricsReport]) -> Result<AnovaSummary> {
        let grid: Vec<Vec<f64>> = reports
            .iter()
            .map(|r| r.attackers.iter().map(|a| a.fresh.macro_f1).collect())
            .collect();
        anova_two_way(&grid)
    }
}
