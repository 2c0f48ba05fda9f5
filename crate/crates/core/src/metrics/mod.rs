//! Accuracy, F1, variance and two-way ANOVA with F-distribution tails.

mod anova;
mod classification;
mod fdist;
mod report;

pub use anova::{anova_two_way, AnovaSummary, SIGNIFICANCE};
pub use classification::{
    accuracy, macro_f1, majority_class, majority_f1, micro_f1, per_class_f1, variance,
};
pub use fdist::{f_quantile, f_survival, ln_gamma, reg_inc_beta};
pub use report::{AttackerScore, MetricsReport, TaskScore};
