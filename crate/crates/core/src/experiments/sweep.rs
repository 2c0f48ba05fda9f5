use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::plan::{ExperimentPlan, PrivacyModel};
use super::run::{run_experiment, train_model, TrainedModel};
use crate::data::{Dataset, Task};
use crate::error::{Error, Result};
use crate::mechanisms::Vocabulary;
use crate::metrics::MetricsReport;
use crate::neural::AttackerTopology;
use crate::rng::derive_seed;

pub const DEFAULT_LAMBDAS: [f64; 5] = [0.1, 0.5, 1.0, 1.5, 2.0];
pub const DEFAULT_EPSILONS: [f64; 9] = [0.01, 0.1, 0.5, 1.0, 5.0, 10.0, 20.0, 50.0, 100.0];
pub const DEFAULT_DEPTHS: [usize; 5] = [1, 2, 3, 4, 5];
pub const DEFAULT_WIDTHS: [usize; 4] = [50, 100, 200, 500];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    /// Rows λ, columns ε.
    LambdaEpsilon,
    /// Rows attacker depth, columns attacker width.
    Topology,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellScores {
    pub base_f1: f64,
    /// Fresh-attacker macro-F1 on the plan's target attribute.
    pub attacker_f1: f64,
    /// Same attribute without any privacy mechanism.
    pub reference_attacker_f1: f64,
    /// `(attacker_f1 - reference) / reference`.
    pub relative_change: f64,
    pub co_trained_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub row: f64,
    pub col: f64,
    pub seeds: Vec<u64>,
    pub scores: Option<CellScores>,
    /// Set when the cell failed; the sweep carries on.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub kind: SweepKind,
    pub plan: ExperimentPlan,
    pub rows: Vec<f64>,
    pub cols: Vec<f64>,
    /// Row-major.
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    pub fn cell(&self, row: usize, col: usize) -> &SweepCell {
        &self.cells[row * self.cols.len() + col]
    }

    /// `metric` per cell, `None` where the cell failed.
    pub fn grid(&self, metric: impl Fn(&CellScores) -> f64) -> Vec<Vec<Option<f64>>> {
        (0..self.rows.len())
            .map(|i| (0..self.cols.len()).map(|j| self.cell(i, j).scores.as_ref().map(&metric)).collect())
            .collect()
    }

    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| c.error.is_some()).count()
    }
}

fn relative(value: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        0.0
    } else {
        (value - reference) / reference
    }
}

fn target_f1(report: &MetricsReport, target: Task) -> Result<(f64, Option<f64>)> {
    let a = report
        .attacker(target.name())
        .ok_or_else(|| Error::param("attributes", format!("target `{target}` is not among the attacked attributes")))?;
    Ok((a.fresh.macro_f1, a.co_trained.map(|s| s.macro_f1)))
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::param("workers", e.to_string()))
}

/// Seeds of cell `(i, j)`: a stable hash of each base seed and the cell
/// coordinates, independent of scheduling.
pub fn cell_seeds(base: &[u64], i: usize, j: usize) -> Vec<u64> {
    base.iter()
        .enumerate()
        .map(|(k, &s)| derive_seed(s, &format!("cell/{i}/{j}/{k}")))
        .collect()
}

/// One [`run_experiment`] per (λ, ε) cell. Attacker scores refer to the
/// plan's target attribute; the reference is a non-private run with the
/// plan's own seeds.
pub fn sweep_lambda_epsilon(
    base: &ExperimentPlan,
    lambdas: &[f64],
    epsilons: &[f64],
    dataset: &Dataset,
    vocab: Option<&Vocabulary>,
    workers: usize,
) -> Result<SweepResult> {
    if lambdas.is_empty() || epsilons.is_empty() {
        return Err(Error::param("grid", "λ and ε lists must be non-empty"));
    }
    base.validate(dataset, vocab)?;
    let reference_plan = ExperimentPlan {
        model: PrivacyModel::Baseline,
        ..base.clone()
    };
    let (reference, _) = target_f1(&run_experiment(&reference_plan, dataset, vocab)?, base.target)?;

    let coords: Vec<(usize, usize)> = (0..lambdas.len())
        .flat_map(|i| (0..epsilons.len()).map(move |j| (i, j)))
        .collect();
    let run_cell = |&(i, j): &(usize, usize)| -> SweepCell {
        let plan = ExperimentPlan {
            seeds: cell_seeds(&base.seeds, i, j),
            ..base.clone().with_lambda(lambdas[i]).with_epsilon(epsilons[j])
        };
        let outcome = run_experiment(&plan, dataset, vocab).and_then(|r| {
            let (f1, co) = target_f1(&r, base.target)?;
            Ok(CellScores {
                base_f1: r.base.macro_f1,
                attacker_f1: f1,
                reference_attacker_f1: reference,
                relative_change: relative(f1, reference),
                co_trained_f1: co,
            })
        });
        SweepCell {
            row: lambdas[i],
            col: epsilons[j],
            seeds: plan.seeds,
            error: outcome.as_ref().err().map(ToString::to_string),
            scores: outcome.ok(),
        }
    };
    let cells = pool(workers)?.install(|| coords.par_iter().map(run_cell).collect());
    Ok(SweepResult {
        kind: SweepKind::LambdaEpsilon,
        plan: base.clone(),
        rows: lambdas.to_vec(),
        cols: epsilons.to_vec(),
        cells,
    })
}

/// Non-private and private attacker F1 per (depth, width) cell.
///
/// Models are trained once per seed and shared by all cells; each cell only
/// refits attackers, so a cell equals a standalone run whose plan has that
/// topology and the same seeds.
pub fn sweep_attacker_topology(
    base: &ExperimentPlan,
    depths: &[usize],
    widths: &[usize],
    dataset: &Dataset,
    vocab: Option<&Vocabulary>,
    workers: usize,
) -> Result<SweepResult> {
    if depths.is_empty() || widths.is_empty() {
        return Err(Error::param("grid", "depth and width lists must be non-empty"));
    }
    if depths.contains(&0) || widths.contains(&0) {
        return Err(Error::param("grid", "depths and widths must be positive"));
    }
    base.validate(dataset, vocab)?;
    let reference_plan = ExperimentPlan {
        model: PrivacyModel::Baseline,
        ..base.clone()
    };
    let pool = pool(workers)?;

    let jobs: Vec<(&ExperimentPlan, u64)> = [&reference_plan, base]
        .into_iter()
        .flat_map(|p| base.seeds.iter().map(move |&s| (p, s)))
        .collect();
    let trained: Vec<Result<TrainedModel>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(p, s)| {
                train_model(p, dataset, vocab, s).map_err(|e| e.context(format!("model {} seed {s}", p.model)))
            })
            .collect()
    });
    let (reference_models, private_models) = trained.split_at(base.seeds.len());

    let coords: Vec<(usize, usize)> = (0..depths.len())
        .flat_map(|i| (0..widths.len()).map(move |j| (i, j)))
        .collect();
    let mean_report = |plan: &ExperimentPlan, models: &[Result<TrainedModel>], topology| -> Result<MetricsReport> {
        let reports = models
            .iter()
            .map(|m| match m {
                Ok(m) => m.report(plan, topology),
                Err(e) => Err(Error::param("training", e.to_string())),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MetricsReport::mean(&reports))
    };
    let run_cell = |&(i, j): &(usize, usize)| -> SweepCell {
        let topology = AttackerTopology {
            depth: depths[i],
            width: widths[j],
        };
        let outcome = (|| {
            let reference = mean_report(&reference_plan, reference_models, topology)?;
            let private = mean_report(base, private_models, topology)?;
            let (reference_f1, _) = target_f1(&reference, base.target)?;
            let (f1, co) = target_f1(&private, base.target)?;
            Ok::<_, Error>(CellScores {
                base_f1: private.base.macro_f1,
                attacker_f1: f1,
                reference_attacker_f1: reference_f1,
                relative_change: relative(f1, reference_f1),
                co_trained_f1: co,
            })
        })();
        SweepCell {
            row: depths[i] as f64,
            col: widths[j] as f64,
            seeds: base.seeds.clone(),
            error: outcome.as_ref().err().map(ToString::to_string),
            scores: outcome.ok(),
        }
    };
    let cells = pool.install(|| coords.par_iter().map(run_cell).collect());
    Ok(SweepResult {
        kind: SweepKind::Topology,
        plan: base.clone(),
        rows: depths.iter().map(|&d| d as f64).collect(),
        cols: widths.iter().map(|&w| w as f64).collect(),
        cells,
    })
}
