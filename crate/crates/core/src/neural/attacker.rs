//! Post-hoc attacker: a fresh classifier fitted on frozen representations.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::layers::{softmax, Mlp};
use super::network::{argmax_rows, check_labels, cross_entropy_grad, mean_cross_entropy};
use super::train::{epoch_batches, gather, gather_labels, TrainConfig};
use crate::error::{Error, Result};
use crate::rng::RandomSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackerTopology {
    /// Number of hidden layers.
    pub depth: usize,
    /// Units per hidden layer.
    pub width: usize,
}

impl Default for AttackerTopology {
    fn default() -> Self {
        Self { depth: 1, width: 200 }
    }
}

/// Labelled feature rows.
#[derive(Debug, Clone, Copy)]
pub struct Labeled<'a> {
    pub x: ArrayView2<'a, f64>,
    pub labels: &'a [usize],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attacker {
    pub model: Mlp,
    /// Epoch (0-based) whose parameters were kept.
    pub best_epoch: usize,
}

impl Attacker {
    /// Trains a ReLU MLP with `topology` hidden layers on `train` by SGD.
    ///
    /// When `validation` is given, the parameters after the epoch with the
    /// lowest validation loss are kept; otherwise the final ones.
    pub fn fit(
        train: Labeled<'_>,
        validation: Option<Labeled<'_>>,
        classes: usize,
        topology: AttackerTopology,
        cfg: &TrainConfig,
        rng: &RandomSource,
    ) -> Result<Self> {
        cfg.validate()?;
        if topology.depth == 0 || topology.width == 0 || classes == 0 {
            return Err(Error::param("topology", "depth, width and classes must be positive"));
        }
        let n = train.x.nrows();
        check_labels(train.labels, n, classes)?;
        if let Some(v) = &validation {
            check_labels(v.labels, v.x.nrows(), classes)?;
            if v.x.ncols() != train.x.ncols() {
                return Err(Error::DimMismatch {
                    expected: train.x.ncols(),
                    actual: v.x.ncols(),
                });
            }
        }
        let mut widths = vec![topology.width; topology.depth];
        widths.push(classes);
        let mut model = Mlp::init(train.x.ncols(), &widths, false, &mut rng.derive("init"));
        let mut batches = rng.derive("batches");

        let mut best = (f64::INFINITY, model.clone(), 0);
        for epoch in 0..cfg.epochs {
            for (b, idx) in epoch_batches(n, cfg.batch_size, &mut batches).iter().enumerate() {
                let xb = gather(&train.x, idx);
                let yb = gather_labels(train.labels, idx);
                let (logits, cache) = model.forward_cached(xb.view());
                let loss = mean_cross_entropy(&logits, &yb);
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        epoch,
                        batch: b,
                        head: "attacker".into(),
                    });
                }
                let (grads, _) = model.backward(&cache, cross_entropy_grad(&logits, &yb));
                model.apply(&grads, cfg.learning_rate);
            }
            if let Some(v) = &validation {
                let loss = mean_cross_entropy(&model.forward(v.x), v.labels);
                if loss < best.0 {
                    best = (loss, model.clone(), epoch);
                }
            }
        }
        Ok(match validation {
            Some(_) => Self {
                model: best.1,
                best_epoch: best.2,
            },
            None => Self {
                model,
                best_epoch: cfg.epochs - 1,
            },
        })
    }

    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<ndarray::Array2<f64>> {
        if x.ncols() != self.model.inputs() {
            return Err(Error::DimMismatch {
                expected: self.model.inputs(),
                actual: x.ncols(),
            });
        }
        Ok(softmax(&self.model.forward(x)))
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.predict_proba(x)?))
    }
}
