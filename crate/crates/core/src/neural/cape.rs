use ndarray::{Array2, ArrayView2};

use super::network::Network;
use super::train::{train_joint, JointData, JointMode, LossCurve, TrainConfig};
use crate::error::Result;
use crate::mechanisms::{ldp_perturb, PrivacyParams};
use crate::rng::RandomSource;

/// Row-wise [`ldp_perturb`]. Row `i` draws from its own sub-stream of `rng`,
/// so the noise on a row does not depend on the others.
pub fn ldp_perturb_rows(x: ArrayView2<f64>, params: &PrivacyParams, rng: &RandomSource) -> Result<Array2<f64>> {
    params.validate()?;
    let mut out = Array2::zeros(x.raw_dim());
    for (i, (row, mut dst)) in x.rows().into_iter().zip(out.rows_mut()).enumerate() {
        let mut stream = rng.derive_indexed("ldp-row", i as u64);
        let noisy = ldp_perturb(&row.to_vec(), params, &mut stream)?;
        dst.assign(&ndarray::ArrayView1::from(&noisy));
    }
    Ok(out)
}

/// Local-DP noise on the inputs followed by gradient-reversal training.
///
/// Training inputs are perturbed once, with a stream derived from `cfg.seed`;
/// the perturbed matrix is returned so later stages can reuse it.
/// Evaluation inputs must be passed through [`ldp_perturb_rows`] with a
/// different stream.
pub fn train_cape(
    net: &mut Network,
    data: JointData<'_>,
    cfg: &TrainConfig,
    params: &PrivacyParams,
) -> Result<(LossCurve, Array2<f64>)> {
    cfg.validate()?;
    params.validate()?;
    let noisy = ldp_perturb_rows(data.x, params, &RandomSource::new(cfg.seed).derive("cape/train-noise"))?;
    let curve = train_joint(
        net,
        JointData {
            x: noisy.view(),
            ..data
        },
        cfg,
        JointMode::GradientReversal,
    )?;
    Ok((curve, noisy))
}
