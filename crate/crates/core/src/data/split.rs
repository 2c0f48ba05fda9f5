use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RandomSource;
use crate::vector::squared_euclidean;

pub const DEFAULT_FRACTIONS: (f64, f64, f64) = (0.7, 0.1, 0.2);

/// Disjoint train / validation / test index sets covering the dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Adversarial split: a random centroid record and its nearest neighbors in
/// embedding space (Euclidean, ties by index) form the test set of
/// `ceil(test_fraction * n)` records. The rest is shuffled and cut
/// train:validation in proportion to the remaining fractions.
pub fn wasserstein_split(
    embeddings: &[&[f64]],
    rng: &mut RandomSource,
    fractions: (f64, f64, f64),
) -> Result<DatasetSplit> {
    let n = embeddings.len();
    if n < 10 {
        return Err(Error::param("records", format!("need at least 10 records to split, got {n}")));
    }
    let (train_f, val_f, test_f) = fractions;
    if [train_f, val_f, test_f].iter().any(|f| !(0.0..=1.0).contains(f))
        || (train_f + val_f + test_f - 1.0).abs() > 1e-9
    {
        return Err(Error::param(
            "fractions",
            format!("must be in [0, 1] and sum to 1, got ({train_f}, {val_f}, {test_f})"),
        ));
    }
    if test_f <= 0.0 {
        return Err(Error::param("fractions", "test fraction must be positive"));
    }

    let centroid = rng.below(n);
    let test_size = ((test_f * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    let mut by_distance: Vec<(f64, usize)> = embeddings
        .iter()
        .enumerate()
        .map(|(i, e)| (squared_euclidean(e, embeddings[centroid]), i))
        .collect();
    by_distance.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    // The centroid itself always belongs to the test set, even if duplicated.
    let mut test: Vec<usize> = std::iter::once(centroid)
        .chain(by_distance.iter().map(|&(_, i)| i).filter(|&i| i != centroid))
        .take(test_size)
        .collect();

    let mut in_test = vec![false; n];
    test.iter().for_each(|&i| in_test[i] = true);
    let mut rest: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
    rng.shuffle(&mut rest);
    let val_size = if train_f + val_f > 0.0 {
        (rest.len() as f64 * val_f / (train_f + val_f)).round() as usize
    } else {
        0
    };
    let validation = rest.split_off(rest.len() - val_size);
    let mut train = rest;

    train.sort_unstable();
    let mut validation = validation;
    validation.sort_unstable();
    test.sort_unstable();
    Ok(DatasetSplit {
        train,
        validation,
        test,
    })
}
