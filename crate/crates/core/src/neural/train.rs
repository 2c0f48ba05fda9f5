//! Mini-batch SGD for single-task, joint (baseline / gradient reversal)
//! training.

use std::fmt::Write as _;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::layers::MlpGrads;
use super::network::{check_labels, head_backward, trunk_forward, Network};
use crate::error::{Error, Result};
use crate::rng::{RandomSource, DEFAULT_SEED};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Adversarial weight λ.
    pub lambda: f64,
    /// Cross-gradient mix α between original and perturbed inputs.
    pub alpha: f64,
    /// Cross-gradient input perturbation step.
    pub cgt_step: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            alpha: 0.5,
            cgt_step: 5.0,
            learning_rate: 0.01,
            epochs: 50,
            batch_size: 64,
            seed: DEFAULT_SEED,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::param("lambda", format!("must be finite and >= 0, got {}", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::param("alpha", format!("must lie in [0, 1], got {}", self.alpha)));
        }
        if !(self.cgt_step >= 0.0 && self.cgt_step.is_finite()) {
            return Err(Error::param("cgt_step", format!("must be finite and >= 0, got {}", self.cgt_step)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::param(
                "learning_rate",
                format!("must be positive, got {}", self.learning_rate),
            ));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::param("epochs", "epochs and batch size must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JointMode {
    /// Trunk learns the base task only; the adversary head trains on the
    /// detached representation.
    Baseline,
    /// The adversary's representation gradient enters the trunk negated and
    /// scaled by λ.
    GradientReversal,
}

/// Inputs with base-task labels and the private labels the adversary head
/// learns.
#[derive(Debug, Clone, Copy)]
pub struct JointData<'a> {
    pub x: ArrayView2<'a, f64>,
    pub base_head: &'a str,
    pub base_labels: &'a [usize],
    pub adversary_head: &'a str,
    pub private_labels: &'a [usize],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub epoch: usize,
    pub task: String,
    pub loss: f64,
}

/// Mean training loss per epoch and task.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LossCurve {
    pub points: Vec<LossPoint>,
}

impl LossCurve {
    pub fn push(&mut self, epoch: usize, task: &str, loss: f64) {
        self.points.push(LossPoint {
            epoch,
            task: task.to_string(),
            loss,
        });
    }

    pub fn task(&self, task: &str) -> Vec<f64> {
        self.points.iter().filter(|p| p.task == task).map(|p| p.loss).collect()
    }

    pub fn extend(&mut self, other: LossCurve) {
        self.points.extend(other.points);
    }

    /// `epoch,task,loss` with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,task,loss\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{},{:?}", p.epoch, p.task, p.loss);
        }
        out
    }
}

/// Shuffled mini-batches for one epoch.
pub(crate) fn epoch_batches(n: usize, batch_size: usize, rng: &mut RandomSource) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

/// Stream that orders mini-batches; shared by every trainer so equal seeds
/// visit equal batches.
pub(crate) fn batch_stream(seed: u64) -> RandomSource {
    RandomSource::new(seed).derive("batches")
}

pub(crate) fn gather(x: &ArrayView2<f64>, idx: &[usize]) -> Array2<f64> {
    x.select(Axis(0), idx)
}

pub(crate) fn gather_labels(labels: &[usize], idx: &[usize]) -> Vec<usize> {
    idx.iter().map(|&i| labels[i]).collect()
}

/// Per-batch gradients of joint training.
#[derive(Debug, Clone, PartialEq)]
pub struct JointGradients {
    pub base_loss: f64,
    pub adversary_loss: f64,
    pub trunk: MlpGrads,
    pub base_head: MlpGrads,
    pub adversary_head: MlpGrads,
}

pub fn joint_gradients(
    net: &Network,
    x: ArrayView2<f64>,
    base_head: &str,
    base_labels: &[usize],
    adversary_head: &str,
    private_labels: &[usize],
    mode: JointMode,
    lambda: f64,
) -> Result<JointGradients> {
    let base = net.head(base_head)?;
    let adversary = net.head(adversary_head)?;
    if x.ncols() != net.input_dim() {
        return Err(Error::DimMismatch {
            expected: net.input_dim(),
            actual: x.ncols(),
        });
    }
    check_labels(base_labels, x.nrows(), base.outputs())?;
    check_labels(private_labels, x.nrows(), adversary.outputs())?;

    let (rep, cache) = trunk_forward(net, x);
    let (base_grads, mut d_rep, base_loss) = head_backward(base, rep.view(), base_labels);
    let (adv_grads, d_rep_adv, adversary_loss) = head_backward(adversary, rep.view(), private_labels);
    if mode == JointMode::GradientReversal && lambda != 0.0 {
        d_rep.scaled_add(-lambda, &d_rep_adv);
    }
    let (trunk, _) = net.trunk.backward(&cache, d_rep);
    Ok(JointGradients {
        base_loss,
        adversary_loss,
        trunk,
        base_head: base_grads,
        adversary_head: adv_grads,
    })
}

/// Trains the trunk and both heads jointly. Returns the loss curve of both
/// heads.
pub fn train_joint(net: &mut Network, data: JointData<'_>, cfg: &TrainConfig, mode: JointMode) -> Result<LossCurve> {
    cfg.validate()?;
    let n = data.x.nrows();
    if n == 0 {
        return Err(Error::Empty("no training rows"));
    }
    let mut rng = batch_stream(cfg.seed);
    let mut curve = LossCurve::default();
    for epoch in 0..cfg.epochs {
        let (mut base_sum, mut adv_sum) = (0.0, 0.0);
        for (b, idx) in epoch_batches(n, cfg.batch_size, &mut rng).iter().enumerate() {
            let xb = gather(&data.x, idx);
            let yb = gather_labels(data.base_labels, idx);
            let zb = gather_labels(data.private_labels, idx);
            let g = joint_gradients(
                net,
                xb.view(),
                data.base_head,
                &yb,
                data.adversary_head,
                &zb,
                mode,
                cfg.lambda,
            )?;
            for (loss, head) in [(g.base_loss, data.base_head), (g.adversary_loss, data.adversary_head)] {
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        epoch,
                        batch: b,
                        head: head.to_string(),
                    });
                }
            }
            base_sum += g.base_loss * idx.len() as f64;
            adv_sum += g.adversary_loss * idx.len() as f64;

            net.trunk.apply(&g.trunk, cfg.learning_rate);
            net.heads.get_mut(data.base_head).expect("checked").apply(&g.base_head, cfg.learning_rate);
            net.heads
                .get_mut(data.adversary_head)
                .expect("checked")
                .apply(&g.adversary_head, cfg.learning_rate);
        }
        curve.push(epoch, data.base_head, base_sum / n as f64);
        curve.push(epoch, data.adversary_head, adv_sum / n as f64);
    }
    Ok(curve)
}

/// Trains the trunk and one head on a single task.
pub fn train_plain(
    net: &mut Network,
    x: ArrayView2<f64>,
    labels: &[usize],
    head: &str,
    cfg: &TrainConfig,
) -> Result<LossCurve> {
    cfg.validate()?;
    net.head(head)?;
    let n = x.nrows();
    if n == 0 {
        return Err(Error::Empty("no training rows"));
    }
    let mut rng = batch_stream(cfg.seed);
    let mut curve = LossCurve::default();
    for epoch in 0..cfg.epochs {
        let mut sum = 0.0;
        for (b, idx) in epoch_batches(n, cfg.batch_size, &mut rng).iter().enumerate() {
            let xb = gather(&x, idx);
            let yb = gather_labels(labels, idx);
            let g = net.backward(xb.view(), &yb, head)?;
            if !g.loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: b,
                    head: head.to_string(),
                });
            }
            sum += g.loss * idx.len() as f64;
            net.trunk.apply(&g.trunk, cfg.learning_rate);
            net.heads.get_mut(head).expect("checked").apply(&g.head, cfg.learning_rate);
        }
        curve.push(epoch, head, sum / n as f64);
    }
    Ok(curve)
}
