//! Exact nearest-neighbor search over a [`Vocabulary`].
//!
//! [`PivotIndex`] is a LAESA-style index: distances from every entry to a few
//! pivot entries are precomputed, and the triangle inequality gives the lower
//! bound `max_p |d(q, p) - d(w, p)| <= d(q, w)`. Entries whose bound exceeds
//! the best distance found so far are skipped. Surviving candidates are scored
//! with the same squared-distance routine as the exhaustive scan, so both
//! paths return the same index, ties included (lowest index wins).

use super::Vocabulary;
use crate::error::{Error, Result};
use crate::vector::squared_euclidean;

const DEFAULT_PIVOTS: usize = 16;

/// Relative slack on the pruning bound; covers rounding in the sqrt'd pivot
/// distances so pruning never drops a true minimum.
const PRUNE_SLACK: f64 = 1e-9;

pub fn nearest_exhaustive(query: &[f64], vocab: &Vocabulary) -> Result<usize> {
    check_query(query, vocab)?;
    let mut best = (f64::INFINITY, 0usize);
    for i in 0..vocab.len() {
        let d = squared_euclidean(query, vocab.vector(i));
        if d < best.0 {
            best = (d, i);
        }
    }
    Ok(best.1)
}

fn check_query(query: &[f64], vocab: &Vocabulary) -> Result<()> {
    if vocab.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    if query.len() != vocab.dim() {
        return Err(Error::DimMismatch {
            expected: vocab.dim(),
            actual: query.len(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct PivotIndex<'v> {
    vocab: &'v Vocabulary,
    pivots: Vec<usize>,
    /// Row-major `len × pivots` table of entry-to-pivot distances.
    table: Vec<f64>,
}

impl<'v> PivotIndex<'v> {
    pub fn new(vocab: &'v Vocabulary) -> Result<Self> {
        Self::with_pivots(vocab, DEFAULT_PIVOTS)
    }

    /// Pivots are picked by farthest-first traversal from entry 0.
    pub fn with_pivots(vocab: &'v Vocabulary, count: usize) -> Result<Self> {
        if vocab.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        let n = vocab.len();
        let count = count.clamp(1, n);
        let mut pivots = vec![0usize];
        let mut min_dist: Vec<f64> = (0..n)
            .map(|i| squared_euclidean(vocab.vector(i), vocab.vector(0)))
            .collect();
        while pivots.len() < count {
            let (far, &d) = min_dist
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
                .expect("non-empty");
            if d == 0.0 {
                break;
            }
            pivots.push(far);
            for (i, m) in min_dist.iter_mut().enumerate() {
                *m = m.min(squared_euclidean(vocab.vector(i), vocab.vector(far)));
            }
        }

        let k = pivots.len();
        let mut table = Vec::with_capacity(n * k);
        for i in 0..n {
            for &p in &pivots {
                table.push(squared_euclidean(vocab.vector(i), vocab.vector(p)).sqrt());
            }
        }
        Ok(Self {
            vocab,
            pivots,
            table,
        })
    }

    pub fn vocab(&self) -> &'v Vocabulary {
        self.vocab
    }

    pub fn nearest(&self, query: &[f64]) -> Result<usize> {
        check_query(query, self.vocab)?;
        let k = self.pivots.len();
        let to_pivot: Vec<f64> = self
            .pivots
            .iter()
            .map(|&p| squared_euclidean(query, self.vocab.vector(p)).sqrt())
            .collect();
        let bounds: Vec<f64> = self
            .table
            .chunks_exact(k)
            .map(|row| {
                row.iter()
                    .zip(&to_pivot)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .collect();

        // Seed with the entry that has the smallest bound.
        let start = bounds
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .expect("non-empty");
        let mut best_sq = squared_euclidean(query, self.vocab.vector(start));
        let mut best = start;
        let mut cutoff = best_sq.sqrt() * (1.0 + PRUNE_SLACK) + PRUNE_SLACK;

        for (i, &lb) in bounds.iter().enumerate() {
            if lb > cutoff || i == start {
                continue;
            }
            let d = squared_euclidean(query, self.vocab.vector(i));
            if d < best_sq || (d == best_sq && i < best) {
                best_sq = d;
                best = i;
                cutoff = best_sq.sqrt() * (1.0 + PRUNE_SLACK) + PRUNE_SLACK;
            }
        }
        Ok(best)
    }
}
