//! Synthetic reviews with planted demographic signal.
//!
//! Every factor (rating and each private attribute) owns one unit direction
//! per class; directions are mutually orthonormal whenever the dimension
//! allows. A "profile" is the tuple of class labels of all factors with
//! non-zero strength, and its mean is the sum of `strength * direction` over
//! those factors. Each profile owns a small pool of words whose vectors are
//! the profile mean plus Gaussian noise of standard deviation
//! `sqrt(tokens_per_record)`. A record draws its tokens from its profile's
//! pool, and its embedding is the mean of its token vectors, so embeddings
//! are the profile mean plus roughly unit Gaussian noise and the vocabulary
//! re-embeds any (possibly privatized) token sequence consistently.
//!
//! Factors with zero strength do not take part in the profile key, so their
//! labels are independent of both tokens and embeddings.

use serde::{Deserialize, Serialize};

use super::{AgeBin, EmbeddingRecord, REFERENCE_YEAR};
use crate::error::{Error, Result};
use crate::mechanisms::Vocabulary;
use crate::rng::RandomSource;
use crate::vector::Embedding;

pub const GENDERS: [&str; 2] = ["male", "female"];
const GENDER_WEIGHTS: [f64; 2] = [0.6, 0.4];
pub const COUNTRIES: [&str; 4] = ["GB", "US", "DK", "FR"];
const COUNTRY_WEIGHTS: [f64; 4] = [0.4, 0.3, 0.2, 0.1];
const AGE_WEIGHTS: [f64; 3] = [0.45, 0.35, 0.2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalStrengths {
    pub rating: f64,
    pub gender: f64,
    pub country: f64,
    pub age: f64,
}

impl Default for SignalStrengths {
    fn default() -> Self {
        Self {
            rating: 5.0,
            gender: 5.0,
            country: 3.0,
            age: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub records: usize,
    pub dim: usize,
    pub signals: SignalStrengths,
    pub words_per_profile: usize,
    pub tokens_per_record: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            records: 10_000,
            dim: 64,
            signals: SignalStrengths::default(),
            words_per_profile: 16,
            tokens_per_record: 8,
            seed: crate::rng::DEFAULT_SEED,
        }
    }
}

pub struct SyntheticData {
    pub records: Vec<EmbeddingRecord>,
    pub vocabulary: Vocabulary,
}

/// Class counts per factor: rating, gender, country, age.
const CLASSES: [usize; 4] = [5, 2, 4, 3];

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    if spec.records == 0 {
        return Err(Error::param("records", "must request at least one record"));
    }
    if spec.dim == 0 {
        return Err(Error::param("dim", "must be at least 1"));
    }
    if spec.words_per_profile == 0 || spec.tokens_per_record == 0 {
        return Err(Error::param("words", "words_per_profile and tokens_per_record must be positive"));
    }
    let s = spec.signals;
    let strengths = [s.rating, s.gender, s.country, s.age];
    if strengths.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
        return Err(Error::param("signals", format!("strengths must be finite and >= 0, got {strengths:?}")));
    }

    let root = RandomSource::new(spec.seed);
    let directions = class_directions(spec.dim, &mut root.derive("directions"));
    let active: Vec<usize> = (0..4).filter(|&f| strengths[f] > 0.0).collect();

    // Profiles enumerate the label tuples of the active factors.
    let profile_count: usize = active.iter().map(|&f| CLASSES[f]).product();
    let word_sd = (spec.tokens_per_record as f64).sqrt();
    let mut word_rng = root.derive("words");
    let mut entries = Vec::with_capacity(profile_count * spec.words_per_profile);
    for p in 0..profile_count {
        let labels = decode_profile(p, &active);
        let mut mean = vec![0.0; spec.dim];
        for (&f, &label) in active.iter().zip(&labels) {
            let dir = &directions[f][label];
            mean.iter_mut().zip(dir).for_each(|(m, d)| *m += strengths[f] * d);
        }
        for w in 0..spec.words_per_profile {
            let v: Vec<f64> = mean.iter().map(|m| m + word_sd * word_rng.standard_normal()).collect();
            entries.push((format!("w{}", p * spec.words_per_profile + w), v));
        }
    }
    let vocabulary = Vocabulary::new(entries)?;

    let mut label_rng = root.derive("labels");
    let mut token_rng = root.derive("tokens");
    let width = spec.records.to_string().len().max(5);
    let mut records = Vec::with_capacity(spec.records);
    for i in 0..spec.records {
        let rating = label_rng.below(5);
        let gender = weighted(&mut label_rng, &GENDER_WEIGHTS);
        let country = weighted(&mut label_rng, &COUNTRY_WEIGHTS);
        let age_bin = weighted(&mut label_rng, &AGE_WEIGHTS);
        let age = match AgeBin::ALL[age_bin] {
            AgeBin::Under36 => 18 + label_rng.below(18),
            AgeBin::From36To45 => 36 + label_rng.below(10),
            AgeBin::Over46 => 46 + label_rng.below(35),
        } as i32;

        let all = [rating, gender, country, age_bin];
        let profile = encode_profile(&active.iter().map(|&f| all[f]).collect::<Vec<_>>(), &active);
        let mut tokens = Vec::with_capacity(spec.tokens_per_record);
        let mut embedding = vec![0.0; spec.dim];
        for _ in 0..spec.tokens_per_record {
            let w = profile * spec.words_per_profile + token_rng.below(spec.words_per_profile);
            embedding.iter_mut().zip(vocabulary.vector(w)).for_each(|(e, x)| *e += x);
            tokens.push(vocabulary.word(w).to_string());
        }
        embedding.iter_mut().for_each(|e| *e /= spec.tokens_per_record as f64);

        records.push(EmbeddingRecord {
            id: format!("r{i:0width$}"),
            embedding: Embedding::new(embedding)?,
            tokens: Some(tokens),
            rating: rating as u8 + 1,
            gender: GENDERS[gender].to_string(),
            country: COUNTRIES[country].to_string(),
            birth_year: REFERENCE_YEAR - age,
        });
    }
    Ok(SyntheticData {
        records,
        vocabulary,
    })
}

fn weighted(rng: &mut RandomSource, weights: &[f64]) -> usize {
    let u = rng.open01() * weights.iter().sum::<f64>();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

fn decode_profile(mut p: usize, active: &[usize]) -> Vec<usize> {
    active
        .iter()
        .map(|&f| {
            let label = p % CLASSES[f];
            p /= CLASSES[f];
            label
        })
        .collect()
}

fn encode_profile(labels: &[usize], active: &[usize]) -> usize {
    labels
        .iter()
        .zip(active)
        .rev()
        .fold(0, |acc, (&label, &f)| acc * CLASSES[f] + label)
}

/// `directions[factor][class]`: unit vectors, Gram-Schmidt orthonormalized
/// while the dimension has room.
fn class_directions(dim: usize, rng: &mut RandomSource) -> Vec<Vec<Vec<f64>>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    CLASSES
        .iter()
        .map(|&k| {
            (0..k)
                .map(|_| {
                    let mut v: Vec<f64> = (0..dim).map(|_| rng.standard_normal()).collect();
                    if basis.len() < dim {
                        for b in &basis {
                            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                            v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
                        }
                    }
                    let n = crate::vector::norm(&v);
                    v.iter_mut().for_each(|x| *x /= n);
                    if basis.len() < dim {
                        basis.push(v.clone());
                    }
                    v
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Dataset, Task};

    fn spec(records: usize, signals: SignalStrengths) -> SyntheticSpec {
        SyntheticSpec {
            records,
            signals,
            seed: 17,
            ..SyntheticSpec::default()
        }
    }

    #[test]
    fn profile_codec_round_trips() {
        let active = [0, 2, 3];
        for p in 0..60 {
            assert_eq!(encode_profile(&decode_profile(p, &active), &active), p);
        }
    }

    #[test]
    fn directions_are_orthonormal() {
        let dirs = class_directions(64, &mut RandomSource::new(1));
        let flat: Vec<&Vec<f64>> = dirs.iter().flatten().collect();
        assert_eq!(flat.len(), 14);
        for (i, a) in flat.iter().enumerate() {
            for (j, b) in flat.iter().enumerate() {
                let dot: f64 = a.iter().zip(b.iter()).map(|(x, y)| x * y).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn embeddings_are_token_means() {
        let data = generate_synthetic(&spec(50, SignalStrengths::default())).unwrap();
        for r in &data.records {
            let mean = data.vocabulary.mean_vector(r.tokens.as_ref().unwrap()).unwrap();
            for (a, b) in mean.iter().zip(r.embedding.iter()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        let ds = Dataset::new(data.records).unwrap();
        assert_eq!(ds.classes(Task::Gender), 2);
        assert_eq!(ds.classes(Task::Country), 4);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_synthetic(&spec(30, SignalStrengths::default())).unwrap();
        let b = generate_synthetic(&spec(30, SignalStrengths::default())).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.vocabulary, b.vocabulary);
    }

    #[test]
    fn zero_records_rejected() {
        assert!(generate_synthetic(&spec(0, SignalStrengths::default())).is_err());
        let mut bad = SignalStrengths::default();
        bad.gender = -1.0;
        assert!(generate_synthetic(&spec(10, bad)).is_err());
    }

    /// Plug-in mutual information between a label and one coordinate, the
    /// coordinate cut at its deciles.
    fn mutual_information(labels: &[usize], classes: usize, x: &[f64]) -> f64 {
        let mut sorted = x.to_vec();
        sorted.sort_by(f64::total_cmp);
        let cuts: Vec<f64> = (1..10).map(|q| sorted[q * sorted.len() / 10]).collect();
        let n = x.len() as f64;
        let mut joint = vec![vec![0.0; 10]; classes];
        for (&l, &v) in labels.iter().zip(x) {
            let b = cuts.iter().filter(|&&c| v >= c).count();
            joint[l][b] += 1.0;
        }
        let pl: Vec<f64> = joint.iter().map(|row| row.iter().sum::<f64>() / n).collect();
        let pb: Vec<f64> = (0..10).map(|b| joint.iter().map(|row| row[b]).sum::<f64>() / n).collect();
        let mut mi = 0.0;
        for l in 0..classes {
            for b in 0..10 {
                let p = joint[l][b] / n;
                if p > 0.0 {
                    mi += p * (p / (pl[l] * pb[b])).ln();
                }
            }
        }
        mi
    }

    #[test]
    fn zero_strength_attribute_is_independent() {
        let mut signals = SignalStrengths::default();
        signals.gender = 0.0;
        let data = generate_synthetic(&spec(10_000, signals)).unwrap();
        let ds = Dataset::new(data.records).unwrap();
        let gender = ds.labels(Task::Gender);
        let country = ds.labels(Task::Country);
        let mut max_gender = 0.0f64;
        let mut max_country = 0.0f64;
        for j in 0..ds.dim() {
            let col: Vec<f64> = ds.records().iter().map(|r| r.embedding[j]).collect();
            max_gender = max_gender.max(mutual_information(&gender, 2, &col));
            max_country = max_country.max(mutual_information(&country, 4, &col));
        }
        assert!(max_gender < 0.01, "gender MI {max_gender}");
        // Sanity check that the estimator does see planted signal.
        assert!(max_country > 0.05, "country MI {max_country}");
    }
}
