//! Cross-gradient training of two separate networks: one for the base task,
//! one for the private attribute. Each network also learns from inputs
//! pushed up its own loss gradient.

use ndarray::{Array2, ArrayView2};

use super::layers::MlpGrads;
use super::network::Network;
use super::train::{batch_stream, epoch_batches, gather, gather_labels, JointData, LossCurve, TrainConfig};
use crate::error::{Error, Result};

/// Step along the per-example input gradient: `x + step · ∂ℓ_i/∂x_i`.
///
/// `Network::backward` returns the gradient of the batch mean, which is the
/// per-example gradient divided by the batch size.
fn perturb(x: &Array2<f64>, mean_input_grad: &Array2<f64>, step: f64) -> Array2<f64> {
    let scale = step * x.nrows() as f64;
    let mut out = x.clone();
    out.scaled_add(scale, mean_input_grad);
    out
}

fn blended(orig: MlpGrads, perturbed: Option<MlpGrads>, alpha: f64) -> MlpGrads {
    match perturbed {
        None => orig,
        Some(p) => {
            let mut g = orig;
            g.blend(1.0 - alpha, &p, alpha);
            g
        }
    }
}

fn finite(loss: f64, epoch: usize, batch: usize, head: &str) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteLoss {
            epoch,
            batch,
            head: head.to_string(),
        })
    }
}

/// `net_b` learns `data.base_head`, `net_p` learns `data.adversary_head`.
/// Per batch the base network trains on `(1-α)·L_b(X) + α·L_b(X_b)` with
/// `X_b = X + step·∇_X L_b`, and symmetrically for the private network.
/// With `α = 0` or `step = 0` the extra passes are skipped and both networks
/// follow exactly the trajectory of [`train_plain`](super::train_plain).
pub fn train_cgt(net_b: &mut Network, net_p: &mut Network, data: JointData<'_>, cfg: &TrainConfig) -> Result<LossCurve> {
    cfg.validate()?;
    net_b.head(data.base_head)?;
    net_p.head(data.adversary_head)?;
    let n = data.x.nrows();
    if n == 0 {
        return Err(Error::Empty("no training rows"));
    }
    let mixing = cfg.alpha != 0.0 && cfg.cgt_step != 0.0;
    let mut rng_b = batch_stream(cfg.seed);
    let mut rng_p = batch_stream(cfg.seed);
    let mut curve = LossCurve::default();

    for epoch in 0..cfg.epochs {
        let (mut sum_b, mut sum_p) = (0.0, 0.0);
        // Identical streams: both networks see the same batches, and each
        // matches what a plain training with this seed would visit.
        let batches = epoch_batches(n, cfg.batch_size, &mut rng_b);
        let batches_p = epoch_batches(n, cfg.batch_size, &mut rng_p);
        debug_assert_eq!(batches, batches_p);

        for (b, idx) in batches.iter().enumerate() {
            let xb = gather(&data.x, idx);
            let yb = gather_labels(data.base_labels, idx);
            let zb = gather_labels(data.private_labels, idx);

            let gb = net_b.backward(xb.view(), &yb, data.base_head)?;
            let gp = net_p.backward(xb.view(), &zb, data.adversary_head)?;
            finite(gb.loss, epoch, b, data.base_head)?;
            finite(gp.loss, epoch, b, data.adversary_head)?;
            sum_b += gb.loss * idx.len() as f64;
            sum_p += gp.loss * idx.len() as f64;

            let (pert_b, pert_p) = if mixing {
                let x_p = perturb(&xb, &gp.input, cfg.cgt_step);
                let x_b = perturb(&xb, &gb.input, cfg.cgt_step);
                let pb = net_b.backward(x_b.view(), &yb, data.base_head)?;
                let pp = net_p.backward(x_p.view(), &zb, data.adversary_head)?;
                (Some(pb), Some(pp))
            } else {
                (None, None)
            };

            let trunk_b = blended(gb.trunk, pert_b.as_ref().map(|g| g.trunk.clone()), cfg.alpha);
            let head_b = blended(gb.head, pert_b.map(|g| g.head), cfg.alpha);
            let trunk_p = blended(gp.trunk, pert_p.as_ref().map(|g| g.trunk.clone()), cfg.alpha);
            let head_p = blended(gp.head, pert_p.map(|g| g.head), cfg.alpha);

            net_b.trunk.apply(&trunk_b, cfg.learning_rate);
            net_b.heads.get_mut(data.base_head).expect("checked").apply(&head_b, cfg.learning_rate);
            net_p.trunk.apply(&trunk_p, cfg.learning_rate);
            net_p
                .heads
                .get_mut(data.adversary_head)
                .expect("checked")
                .apply(&head_p, cfg.learning_rate);
        }
        curve.push(epoch, data.base_head, sum_b / n as f64);
        curve.push(epoch, data.adversary_head, sum_p / n as f64);
    }
    Ok(curve)
}

/// Perturbation of a batch along one network's per-example loss gradient.
pub fn cross_gradient_inputs(net: &Network, x: ArrayView2<f64>, labels: &[usize], head: &str, step: f64) -> Result<Array2<f64>> {
    let g = net.backward(x, labels, head)?;
    Ok(perturb(&x.to_owned(), &g.input, step))
}
