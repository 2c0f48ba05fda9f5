//! Experiment orchestration: single runs, parameter sweeps, deviation
//! analysis and report files.

mod deviation;
mod plan;
mod report;
mod run;
mod sweep;

pub use plan::{seed_list, ExperimentPlan, PrivacyModel};
pub use run::{embedding_matrix, mdp_embeddings, run_experiment, run_seed, run_seeds, train_model, TrainedModel};
pub use deviation::{embedding_deviation, pca_2d, privatize_dataset, DeviationMechanism, DeviationReport, DeviationRow, ProjectionPoint};
pub use sweep::{
    cell_seeds, sweep_attacker_topology, sweep_lambda_epsilon, CellScores, SweepCell, SweepKind, SweepResult,
    DEFAULT_DEPTHS, DEFAULT_EPSILONS, DEFAULT_LAMBDAS, DEFAULT_WIDTHS,
};
pub use report::{
    attacker_grid, deviation_csv, markdown_report, projection_csv, read_results_csv, result_rows, results_csv, sweep_csv,
    ResultRow,
};
