use super::PrivacyParams;
use crate::error::Result;
use crate::rng::RandomSource;
use crate::vector::normalize_minmax;

/// Min-max normalizes `v` then adds i.i.d. Laplace(0, Δf/ε) noise to every
/// component. The result is not clamped back into [0, 1].
pub fn ldp_perturb(v: &[f64], params: &PrivacyParams, rng: &mut RandomSource) -> Result<Vec<f64>> {
    params.validate()?;
    let mut out = normalize_minmax(v);
    add_laplace(&mut out, params.laplace_scale(), rng);
    Ok(out)
}

/// Same as [`ldp_perturb`] but also returns the normalized input, which
/// deviation analysis compares against.
pub fn ldp_perturb_normalized(
    v: &[f64],
    params: &PrivacyParams,
    rng: &mut RandomSource,
) -> Result<(Vec<f64>, Vec<f64>)> {
    params.validate()?;
    let normalized = normalize_minmax(v);
    let mut noisy = normalized.clone();
    add_laplace(&mut noisy, params.laplace_scale(), rng);
    Ok((normalized, noisy))
}

fn add_laplace(v: &mut [f64], scale: f64, rng: &mut RandomSource) {
    for x in v.iter_mut() {
        *x += rng.laplace(scale);
    }
}
