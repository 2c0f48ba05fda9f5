//! Monte Carlo check of the ε-DP inequality for scalar mechanisms.
//!
//! The mechanism is run on the adjacent inputs 0 and 1 (distance Δf = 1),
//! both output samples are histogrammed over the same bins, and the largest
//! absolute log-ratio of bin frequencies is compared against ε.

use super::PrivacyParams;
use crate::error::{Error, Result};
use crate::rng::RandomSource;

pub const MIN_TRIALS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct DpCheck {
    /// Largest |ln(p_0 / p_1)| over bins occupied by either sample;
    /// `+inf` when some bin is occupied by only one of them.
    pub max_log_ratio: f64,
    /// Standard error of the log-ratio in the bin attaining the maximum.
    pub std_error: f64,
    /// Histogram range `[lo, hi)`.
    pub range: (f64, f64),
    /// Per-bin `(ln ratio, standard error)`; `None` for bins neither sample hit.
    pub bins: Vec<Option<(f64, f64)>>,
}

impl DpCheck {
    /// Every occupied bin satisfies `|ln ratio| <= ε + slack · se`.
    pub fn within(&self, epsilon: f64, slack_se: f64) -> bool {
        self.bins
            .iter()
            .flatten()
            .all(|&(lr, se)| lr.is_finite() && lr.abs() <= epsilon + slack_se * se)
    }
}

/// Scalar Laplace mechanism `x + Lap(Δf/ε)`.
pub fn laplace_mechanism(params: PrivacyParams) -> impl FnMut(f64, &mut RandomSource) -> f64 {
    let scale = params.laplace_scale();
    move |x, rng| x + rng.laplace(scale)
}

/// Histograms over `[-5/ε, 1 + 5/ε)`; samples outside the range are dropped.
pub fn dp_empirical_check<M>(
    mut mechanism: M,
    epsilon: f64,
    trials: usize,
    bins: usize,
    rng: &mut RandomSource,
) -> Result<DpCheck>
where
    M: FnMut(f64, &mut RandomSource) -> f64,
{
    if bins < 2 {
        return Err(Error::param("bins", format!("need at least 2, got {bins}")));
    }
    if trials < MIN_TRIALS {
        return Err(Error::param("trials", format!("need at least {MIN_TRIALS}, got {trials}")));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::param("epsilon", format!("must be positive and finite, got {epsilon}")));
    }
    let lo = -5.0 / epsilon;
    let hi = 1.0 + 5.0 / epsilon;
    let width = (hi - lo) / bins as f64;

    let mut counts = [vec![0u64; bins], vec![0u64; bins]];
    for (input, hist) in counts.iter_mut().enumerate() {
        let mut stream = rng.derive_indexed("dp-check-input", input as u64);
        for _ in 0..trials {
            let y = mechanism(input as f64, &mut stream);
            if y >= lo && y < hi {
                let b = (((y - lo) / width) as usize).min(bins - 1);
                hist[b] += 1;
            }
        }
    }

    let n = trials as f64;
    let per_bin: Vec<Option<(f64, f64)>> = counts[0]
        .iter()
        .zip(&counts[1])
        .map(|(&a, &b)| match (a, b) {
            (0, 0) => None,
            (0, _) | (_, 0) => Some((f64::INFINITY, f64::INFINITY)),
            (a, b) => {
                let (a, b) = (a as f64, b as f64);
                // Delta method on ln(a/n) - ln(b/n) for binomial counts.
                let se = ((1.0 - a / n) / a + (1.0 - b / n) / b).sqrt();
                Some(((a / b).ln(), se))
            }
        })
        .collect();

    let (max_log_ratio, std_error) = per_bin
        .iter()
        .flatten()
        .fold((0.0f64, 0.0f64), |acc, &(lr, se)| if lr.abs() > acc.0 { (lr.abs(), se) } else { acc });

    Ok(DpCheck {
        max_log_ratio,
        std_error,
        range: (lo, hi),
        bins: per_bin,
    })
}
