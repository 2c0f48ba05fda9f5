//! CSV and markdown report files.
//!
//! `results.csv` has one row per (run, task): the base task row carries the
//! base-head scores, each attacker row the fresh-attacker scores, the
//! co-trained adversary score where one exists, and the majority-class F1.
//! Every row repeats the full run configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::deviation::DeviationReport;
use super::plan::ExperimentPlan;
use super::sweep::{SweepKind, SweepResult};
use crate::error::{Error, Result};
use crate::metrics::{anova_two_way, variance, AnovaSummary, MetricsReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub dataset: String,
    pub model: String,
    pub epsilon: f64,
    pub sensitivity: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub cgt_step: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub attacker_depth: usize,
    pub attacker_width: usize,
    /// Semicolon-separated.
    pub seeds: String,
    pub target: String,
    pub task: String,
    /// `base` or `attacker`.
    pub role: String,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub co_trained_macro_f1: Option<f64>,
    pub majority_f1: Option<f64>,
}

impl ResultRow {
    /// Identifies the run a row belongs to.
    pub fn run_key(&self) -> String {
        format!(
            "{} {} eps={} lambda={} depth={} width={}",
            self.dataset, self.model, self.epsilon, self.lambda, self.attacker_depth, self.attacker_width
        )
    }
}

fn join_seeds(seeds: &[u64]) -> String {
    seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(";")
}

pub fn result_rows(dataset: &str, plan: &ExperimentPlan, report: &MetricsReport) -> Vec<ResultRow> {
    let row = |task: &str, role: &str, s: &crate::metrics::TaskScore| ResultRow {
        dataset: dataset.to_string(),
        model: plan.model.name().to_string(),
        epsilon: plan.privacy.epsilon,
        sensitivity: plan.privacy.sensitivity,
        lambda: plan.train.lambda,
        alpha: plan.train.alpha,
        cgt_step: plan.train.cgt_step,
        learning_rate: plan.train.learning_rate,
        epochs: plan.train.epochs,
        batch_size: plan.train.batch_size,
        attacker_depth: plan.attacker.depth,
        attacker_width: plan.attacker.width,
        seeds: join_seeds(&plan.seeds),
        target: plan.target.name().to_string(),
        task: task.to_string(),
        role: role.to_string(),
        accuracy: s.accuracy,
        macro_f1: s.macro_f1,
        micro_f1: s.micro_f1,
        co_trained_macro_f1: None,
        majority_f1: None,
    };
    let mut rows = vec![row(plan.base_task.name(), "base", &report.base)];
    for a in &report.attackers {
        let mut r = row(&a.attribute, "attacker", &a.fresh);
        r.co_trained_macro_f1 = a.co_trained.map(|s| s.macro_f1);
        r.majority_f1 = Some(a.majority_f1);
        rows.push(r);
    }
    rows
}

fn to_csv<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::param("csv", e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::param("csv", e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn results_csv(rows: &[ResultRow]) -> Result<String> {
    to_csv(rows)
}

pub fn read_results_csv(text: &str, origin: &str) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| Error::Parse {
                path: origin.into(),
                line: i + 2,
                reason: e.to_string(),
            })
        })
        .collect()
}

#[derive(Serialize)]
struct SweepRow<'a> {
    kind: &'a str,
    dataset: &'a str,
    model: &'a str,
    target: &'a str,
    lambda: f64,
    epsilon: f64,
    attacker_depth: usize,
    attacker_width: usize,
    sensitivity: f64,
    alpha: f64,
    cgt_step: f64,
    learning_rate: f64,
    epochs: usize,
    batch_size: usize,
    seeds: String,
    base_f1: Option<f64>,
    attacker_f1: Option<f64>,
    reference_attacker_f1: Option<f64>,
    relative_change: Option<f64>,
    co_trained_f1: Option<f64>,
    status: &'a str,
    error: &'a str,
}

pub fn sweep_csv(result: &SweepResult, dataset: &str) -> Result<String> {
    let p = &result.plan;
    let kind = match result.kind {
        SweepKind::LambdaEpsilon => "lambda-epsilon",
        SweepKind::Topology => "topology",
    };
    let rows = result.cells.iter().map(|c| {
        let (lambda, epsilon, depth, width) = match result.kind {
            SweepKind::LambdaEpsilon => (c.row, c.col, p.attacker.depth, p.attacker.width),
            SweepKind::Topology => (p.train.lambda, p.privacy.epsilon, c.row as usize, c.col as usize),
        };
        SweepRow {
            kind,
            dataset,
            model: p.model.name(),
            target: p.target.name(),
            lambda,
            epsilon,
            attacker_depth: depth,
            attacker_width: width,
            sensitivity: p.privacy.sensitivity,
            alpha: p.train.alpha,
            cgt_step: p.train.cgt_step,
            learning_rate: p.train.learning_rate,
            epochs: p.train.epochs,
            batch_size: p.train.batch_size,
            seeds: join_seeds(&c.seeds),
            base_f1: c.scores.map(|s| s.base_f1),
            attacker_f1: c.scores.map(|s| s.attacker_f1),
            reference_attacker_f1: c.scores.map(|s| s.reference_attacker_f1),
            relative_change: c.scores.map(|s| s.relative_change),
            co_trained_f1: c.scores.and_then(|s| s.co_trained_f1),
            status: if c.error.is_some() { "failed" } else { "ok" },
            error: c.error.as_deref().unwrap_or(""),
        }
    });
    to_csv(rows)
}

pub fn deviation_csv(report: &DeviationReport) -> Result<String> {
    to_csv(&report.rows)
}

pub fn projection_csv(report: &DeviationReport) -> Result<String> {
    to_csv(&report.projection)
}

/// Fresh-attacker macro-F1 grid: one row per run, one column per attacked
/// attribute, both in first-seen order. Runs missing an attribute are
/// dropped.
pub fn attacker_grid(rows: &[ResultRow]) -> (Vec<String>, Vec<String>, Vec<Vec<f64>>) {
    let mut runs: Vec<String> = Vec::new();
    let mut attributes: Vec<String> = Vec::new();
    let mut values: BTreeMap<(String, String), f64> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.role == "attacker") {
        let key = r.run_key();
        if !runs.contains(&key) {
            runs.push(key.clone());
        }
        if !attributes.contains(&r.task) {
            attributes.push(r.task.clone());
        }
        values.insert((key, r.task.clone()), r.macro_f1);
    }
    let mut kept = Vec::new();
    let mut grid = Vec::new();
    for run in runs {
        let row: Option<Vec<f64>> = attributes.iter().map(|a| values.get(&(run.clone(), a.clone())).copied()).collect();
        if let Some(row) = row {
            kept.push(run);
            grid.push(row);
        }
    }
    (kept, attributes, grid)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.3}"))
}

fn anova_table(out: &mut String, a: &AnovaSummary) {
    let _ = writeln!(out, "| Source | SS | df | F | P | F-crit |");
    let _ = writeln!(out, "|---|---|---|---|---|---|");
    let _ = writeln!(
        out,
        "| Rows (runs) | {:.6} | {} | {:.4} | {:.4} | {:.4} |",
        a.ss_row, a.df_row, a.f_row, a.p_row, a.fcrit_row
    );
    let _ = writeln!(
        out,
        "| Columns (attributes) | {:.6} | {} | {:.4} | {:.4} | {:.4} |",
        a.ss_col, a.df_col, a.f_col, a.p_col, a.fcrit_col
    );
    let _ = writeln!(out, "| Error | {:.6} | {} | | | |", a.ss_error, a.df_error);
    let _ = writeln!(out, "| Total | {:.6} | {} | | | |", a.ss_total, a.df_total);
}

fn sweep_section(out: &mut String, s: &SweepResult) {
    let (title, row_name, col_name) = match s.kind {
        SweepKind::LambdaEpsilon => ("λ × ε sweep", "λ", "ε"),
        SweepKind::Topology => ("Attacker topology sweep", "depth", "width"),
    };
    let _ = writeln!(out, "## {title} ({}, target {})\n", s.plan.model, s.plan.target);
    let tables: [(&str, fn(&super::sweep::CellScores) -> f64); 3] = [
        ("Base F1", |c| c.base_f1),
        ("Attacker F1", |c| c.attacker_f1),
        ("Relative attacker change", |c| c.relative_change),
    ];
    for (name, metric) in tables {
        let grid = s.grid(metric);
        let _ = writeln!(out, "{name}\n");
        let _ = write!(out, "| {row_name} \\ {col_name} |");
        for c in &s.cols {
            let _ = write!(out, " {c} |");
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "|---|{}", "---|".repeat(s.cols.len()));
        for (r, values) in s.rows.iter().zip(&grid) {
            let _ = write!(out, "| {r} |");
            for v in values {
                let _ = write!(out, " {} |", fmt_opt(*v));
            }
            let _ = writeln!(out);
        }
        let _ = writeln!(out);
    }
    if s.failures() > 0 {
        let _ = writeln!(out, "Failed cells:\n");
        for c in s.cells.iter().filter(|c| c.error.is_some()) {
            let _ = writeln!(out, "- ({}, {}): {}", c.row, c.col, c.error.as_deref().unwrap_or(""));
        }
        let _ = writeln!(out);
    }
}

/// Markdown summary of whatever reports are available.
pub fn markdown_report(results: &[ResultRow], sweeps: &[&SweepResult], deviation: Option<&DeviationReport>) -> String {
    let mut out = String::from("# Privacy leakage report\n\n");
    if !results.is_empty() {
        let (runs, attributes, grid) = attacker_grid(results);
        let _ = writeln!(out, "## Runs\n");
        let _ = write!(out, "| Run | Base F1 |");
        for a in &attributes {
            let _ = write!(out, " {a} F1 |");
        }
        let _ = writeln!(out, " σ² |");
        let _ = writeln!(out, "|---|---|{}---|", "---|".repeat(attributes.len()));
        for (run, values) in runs.iter().zip(&grid) {
            let base = results
                .iter()
                .find(|r| r.role == "base" && &r.run_key() == run)
                .map(|r| r.macro_f1);
            let _ = write!(out, "| {run} | {} |", fmt_opt(base));
            for v in values {
                let _ = write!(out, " {v:.3} |");
            }
            let _ = writeln!(out, " {:.4} |", variance(values));
        }
        let _ = writeln!(out);
        if grid.len() >= 2 && attributes.len() >= 2 {
            match anova_two_way(&grid) {
                Ok(a) => {
                    let _ = writeln!(out, "### Two-way ANOVA of attacker F1 (significance 0.05)\n");
                    anova_table(&mut out, &a);
                    let _ = writeln!(out);
                }
                Err(e) => {
                    let _ = writeln!(out, "ANOVA unavailable: {e}\n");
                }
            }
        }
    }
    for s in sweeps {
        sweep_section(&mut out, s);
    }
    if let Some(d) = deviation {
        let _ = writeln!(out, "## Embedding deviation\n");
        let _ = writeln!(out, "| Mechanism | ε | Records | Dim | Mean Euclidean | Mean cosine distance |");
        let _ = writeln!(out, "|---|---|---|---|---|---|");
        for r in &d.rows {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {:.3} | {:.3} |",
                r.mechanism,
                r.epsilon.map_or_else(|| "-".to_string(), |e| e.to_string()),
                r.records,
                r.dim,
                r.mean_euclidean,
                r.mean_cosine
            );
        }
        let _ = writeln!(out);
    }
    out
}
