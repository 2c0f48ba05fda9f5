use serde::{Deserialize, Serialize};

use super::{nearest_exhaustive, PivotIndex, Vocabulary};
use crate::error::{Error, Result};
use crate::rng::RandomSource;
use crate::vector::norm;

/// Noise vector `u * l`: `u` a uniformly random unit direction (a normalized
/// standard-normal draw), `l ~ Gamma(shape = m, scale = 1/ε)`.
pub fn mdp_noise(rng: &mut RandomSource, dim: usize, epsilon: f64) -> Result<Vec<f64>> {
    if !(epsilon > 0.0) || epsilon.is_nan() {
        return Err(Error::param("epsilon", format!("must be > 0, got {epsilon}")));
    }
    if dim == 0 {
        return Err(Error::param("dim", "must be at least 1"));
    }
    let mut dir: Vec<f64>;
    let mut len;
    loop {
        dir = (0..dim).map(|_| rng.standard_normal()).collect();
        len = norm(&dir);
        if len > 0.0 {
            break;
        }
    }
    let magnitude = rng.gamma(dim as f64, 1.0 / epsilon)?;
    for x in dir.iter_mut() {
        *x *= magnitude / len;
    }
    Ok(dir)
}

/// Exhaustive nearest word by Euclidean distance, lowest index on ties.
pub fn nearest_word<'v>(v: &[f64], vocab: &'v Vocabulary) -> Result<&'v str> {
    nearest_exhaustive(v, vocab).map(|i| vocab.word(i))
}

/// Result of privatizing one token sequence.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MdpOutcome {
    pub tokens: Vec<String>,
    /// Tokens missing from the vocabulary; passed through unchanged.
    pub oov: usize,
    /// In-vocabulary tokens whose replacement is the original word.
    pub self_swaps: usize,
}

impl MdpOutcome {
    pub fn in_vocab(&self) -> usize {
        self.tokens.len() - self.oov
    }
}

/// Reusable word-swap mechanism backed by a [`PivotIndex`].
#[derive(Debug, Clone)]
pub struct MdpSwapper<'v> {
    index: PivotIndex<'v>,
    epsilon: f64,
}

impl<'v> MdpSwapper<'v> {
    pub fn new(vocab: &'v Vocabulary, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || epsilon.is_nan() {
            return Err(Error::param("epsilon", format!("must be > 0, got {epsilon}")));
        }
        Ok(Self {
            index: PivotIndex::new(vocab)?,
            epsilon,
        })
    }

    pub fn vocab(&self) -> &'v Vocabulary {
        self.index.vocab()
    }

    /// Swaps one in-vocabulary word; `None` for OOV.
    pub fn swap_index(&self, word: &str, rng: &mut RandomSource) -> Result<Option<usize>> {
        let vocab = self.index.vocab();
        let Some(i) = vocab.index_of(word) else {
            return Ok(None);
        };
        let mut noisy = mdp_noise(rng, vocab.dim(), self.epsilon)?;
        noisy.iter_mut().zip(vocab.vector(i)).for_each(|(n, x)| *n += x);
        self.index.nearest(&noisy).map(Some)
    }

    pub fn privatize<S: AsRef<str>>(&self, words: &[S], rng: &mut RandomSource) -> Result<MdpOutcome> {
        let vocab = self.index.vocab();
        let mut out = MdpOutcome {
            tokens: Vec::with_capacity(words.len()),
            ..Default::default()
        };
        for w in words {
            let w = w.as_ref();
            match self.swap_index(w, rng)? {
                Some(j) => {
                    let swapped = vocab.word(j);
                    if swapped == w {
                        out.self_swaps += 1;
                    }
                    out.tokens.push(swapped.to_string());
                }
                None => {
                    out.oov += 1;
                    out.tokens.push(w.to_string());
                }
            }
        }
        Ok(out)
    }
}

/// One-shot convenience over [`MdpSwapper`]; builds the index per call.
pub fn mdp_privatize_sequence<S: AsRef<str>>(
    words: &[S],
    vocab: &Vocabulary,
    epsilon: f64,
    rng: &mut RandomSource,
) -> Result<MdpOutcome> {
    MdpSwapper::new(vocab, epsilon)?.privatize(words, rng)
}
