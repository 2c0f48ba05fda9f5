use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::run::{embedding_matrix, mdp_embeddings, mdp_swap};
use crate::data::Dataset;
use crate::vector::Embedding;
use crate::error::{Error, Result};
use crate::mechanisms::{PrivacyParams, Vocabulary};
use crate::neural::ldp_perturb_rows;
use crate::rng::RandomSource;
use crate::vector::{distance, normalize_minmax, Metric};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DeviationMechanism {
    Identity,
    Ldp(PrivacyParams),
    Mdp { epsilon: f64 },
}

impl DeviationMechanism {
    pub fn name(&self) -> &'static str {
        match self {
            DeviationMechanism::Identity => "identity",
            DeviationMechanism::Ldp(_) => "ldp",
            DeviationMechanism::Mdp { .. } => "mdp",
        }
    }

    pub fn epsilon(&self) -> Option<f64> {
        match self {
            DeviationMechanism::Identity => None,
            DeviationMechanism::Ldp(p) => Some(p.epsilon),
            DeviationMechanism::Mdp { epsilon } => Some(*epsilon),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationRow {
    pub mechanism: String,
    pub epsilon: Option<f64>,
    pub records: usize,
    pub dim: usize,
    pub mean_euclidean: f64,
    pub mean_cosine: f64,
}

/// One record's position on the first two principal axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionPoint {
    /// `original` or the mechanism name.
    pub source: String,
    pub id: String,
    pub pc1: f64,
    pub pc2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub rows: Vec<DeviationRow>,
    pub projection: Vec<ProjectionPoint>,
}

/// Principal axes of the rows of `x`: returns the column means and a
/// `2 × dim` matrix whose rows are the top two unit eigenvectors of the
/// covariance, each oriented so its largest-magnitude component is positive.
pub fn pca_2d(x: ArrayView2<f64>) -> Result<(Vec<f64>, Array2<f64>)> {
    let (n, m) = x.dim();
    if n < 2 || m < 2 {
        return Err(Error::param("projection", "need at least 2 rows and 2 columns"));
    }
    let mean = x.mean_axis(Axis(0)).expect("non-empty");
    let centered = &x - &mean;
    let cov = centered.t().dot(&centered) / (n - 1) as f64;
    let eig = SymmetricEigen::new(DMatrix::from_fn(m, m, |i, j| cov[[i, j]]));
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut axes = Array2::zeros((2, m));
    for (row, &k) in order.iter().take(2).enumerate() {
        let v = eig.eigenvectors.column(k);
        let pivot = v.iter().copied().fold(0.0f64, |best, c| if c.abs() > best.abs() { c } else { best });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for j in 0..m {
            axes[[row, j]] = sign * v[j];
        }
    }
    Ok((mean.to_vec(), axes))
}

fn mean_distances(a: &Array2<f64>, b: &Array2<f64>) -> Result<(f64, f64)> {
    let n = a.nrows() as f64;
    let (mut euc, mut cos) = (0.0, 0.0);
    for (u, v) in a.rows().into_iter().zip(b.rows()) {
        let (u, v) = (u.as_slice().expect("standard layout"), v.as_slice().expect("standard layout"));
        euc += distance(u, v, Metric::Euclidean)?;
        cos += distance(u, v, Metric::CosineDistance)?;
    }
    Ok((euc / n, cos / n))
}

/// Mean paired Euclidean and cosine distance between each record and its
/// privatized version, plus 2-D principal-component coordinates.
///
/// LDP is compared in the space it perturbs, i.e. against the min-max
/// normalized embedding; MDP against the original embedding. The projection
/// axes are fitted on the original embeddings and every point set is
/// projected onto them.
pub fn embedding_deviation(
    dataset: &Dataset,
    vocab: Option<&Vocabulary>,
    mechanisms: &[DeviationMechanism],
    rng: &RandomSource,
) -> Result<DeviationReport> {
    if dataset.is_empty() {
        return Err(Error::Empty("dataset slice is empty"));
    }
    if mechanisms.is_empty() {
        return Err(Error::param("mechanisms", "at least one mechanism is required"));
    }
    let original = embedding_matrix(dataset);
    let (mean, axes) = pca_2d(original.view())?;
    let project = |source: &str, x: &Array2<f64>, out: &mut Vec<ProjectionPoint>| {
        let coords = (x - &ndarray::Array1::from(mean.clone())).dot(&axes.t());
        for (row, r) in coords.rows().into_iter().zip(dataset.records()) {
            out.push(ProjectionPoint {
                source: source.to_string(),
                id: r.id.clone(),
                pc1: row[0],
                pc2: row[1],
            });
        }
    };

    let mut rows = Vec::with_capacity(mechanisms.len());
    let mut projection = Vec::new();
    project("original", &original, &mut projection);
    for mech in mechanisms {
        let stream = rng.derive(mech.name());
        let (reference, privatized) = match mech {
            DeviationMechanism::Identity => (original.clone(), original.clone()),
            DeviationMechanism::Ldp(p) => {
                let mut normalized = original.clone();
                for mut row in normalized.rows_mut() {
                    let v = normalize_minmax(row.as_slice().expect("standard layout"));
                    row.assign(&ndarray::ArrayView1::from(&v[..]));
                }
                (normalized, ldp_perturb_rows(original.view(), p, &stream)?)
            }
            DeviationMechanism::Mdp { epsilon } => {
                if let Some(r) = dataset.records().iter().find(|r| r.tokens.is_none()) {
                    return Err(Error::MissingTokens { id: r.id.clone() });
                }
                let vocab = vocab.ok_or_else(|| Error::param("vocabulary", "the mdp mechanism needs a vocabulary"))?;
                (original.clone(), mdp_embeddings(dataset, vocab, *epsilon, &stream)?)
            }
        };
        let (euc, cos) = mean_distances(&reference, &privatized)?;
        rows.push(DeviationRow {
            mechanism: mech.name().to_string(),
            epsilon: mech.epsilon(),
            records: dataset.len(),
            dim: dataset.dim(),
            mean_euclidean: euc,
            mean_cosine: cos,
        });
        project(mech.name(), &privatized, &mut projection);
    }
    Ok(DeviationReport { rows, projection })
}

fn rows_to_embeddings(x: &Array2<f64>) -> Result<Vec<Embedding>> {
    x.rows().into_iter().map(|r| Embedding::new(r.to_vec())).collect()
}

/// Privatized copy of `dataset`. LDP replaces embeddings with noisy
/// normalized ones; MDP swaps tokens and re-embeds them. Record `i` draws
/// from the same sub-stream as in [`embedding_deviation`].
pub fn privatize_dataset(
    dataset: &Dataset,
    vocab: Option<&Vocabulary>,
    mechanism: DeviationMechanism,
    rng: &RandomSource,
) -> Result<Dataset> {
    let stream = rng.derive(mechanism.name());
    match mechanism {
        DeviationMechanism::Identity => Ok(dataset.clone()),
        DeviationMechanism::Ldp(p) => {
            let x = ldp_perturb_rows(embedding_matrix(dataset).view(), &p, &stream)?;
            dataset.with_embeddings(rows_to_embeddings(&x)?)
        }
        DeviationMechanism::Mdp { epsilon } => {
            let vocab = vocab.ok_or_else(|| Error::param("vocabulary", "the mdp mechanism needs a vocabulary"))?;
            let (x, tokens) = mdp_swap(dataset, vocab, epsilon, &stream)?;
            let out = dataset.with_embeddings(rows_to_embeddings(&x)?)?;
            let mut records = out.into_records();
            for (r, t) in records.iter_mut().zip(tokens) {
                r.tokens = Some(t);
            }
            Dataset::new(records)
        }
    }
}
