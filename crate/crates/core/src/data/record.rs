use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::Embedding;

pub const REFERENCE_YEAR: i32 = 2021;
pub const RATING_CLASSES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgeBin {
    Under36,
    #[serde(rename = "36to45")]
    From36To45,
    Over46,
}

impl AgeBin {
    pub const ALL: [AgeBin; 3] = [AgeBin::Under36, AgeBin::From36To45, AgeBin::Over46];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            AgeBin::Under36 => "under36",
            AgeBin::From36To45 => "36to45",
            AgeBin::Over46 => "over46",
        }
    }
}

/// Bins the age reached in `reference_year`: under 36, 36 to 45, 46 and over.
pub fn bin_age(birth_year: i32, reference_year: i32) -> Result<AgeBin> {
    if birth_year > reference_year {
        return Err(Error::param(
            "birth_year",
            format!("{birth_year} is after the reference year {reference_year}"),
        ));
    }
    Ok(match reference_year - birth_year {
        age if age < 36 => AgeBin::Under36,
        36..=45 => AgeBin::From36To45,
        _ => AgeBin::Over46,
    })
}

pub fn one_hot(label: usize, classes: usize) -> Result<Vec<f64>> {
    if label >= classes {
        return Err(Error::LabelOutOfRange { label, classes });
    }
    let mut v = vec![0.0; classes];
    v[label] = 1.0;
    Ok(v)
}

/// A prediction target: the base task or one of the private attributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Rating,
    Gender,
    Country,
    Age,
}

impl Task {
    pub const PRIVATE: [Task; 3] = [Task::Gender, Task::Country, Task::Age];

    pub fn name(self) -> &'static str {
        match self {
            Task::Rating => "rating",
            Task::Gender => "gender",
            Task::Country => "country",
            Task::Age => "age",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rating" => Ok(Task::Rating),
            "gender" => Ok(Task::Gender),
            "country" | "location" => Ok(Task::Country),
            "age" => Ok(Task::Age),
            other => Err(Error::param(
                "task",
                format!("unknown task `{other}` (expected rating, gender, country or age)"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub id: String,
    pub embedding: Embedding,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vec<String>>,
    /// Review score, 1 to 5.
    pub rating: u8,
    pub gender: String,
    pub country: String,
    pub birth_year: i32,
}

impl EmbeddingRecord {
    pub fn age_bin(&self) -> AgeBin {
        // Validated on construction of a `Dataset`.
        bin_age(self.birth_year, REFERENCE_YEAR).unwrap_or(AgeBin::Under36)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=5).contains(&self.rating) {
            return Err(Error::param("rating", format!("must be 1..=5, got {}", self.rating)));
        }
        bin_age(self.birth_year, REFERENCE_YEAR)?;
        if self.gender.is_empty() || self.country.is_empty() {
            return Err(Error::param("labels", "gender and country must be non-empty"));
        }
        Ok(())
    }
}

/// Validated records with frozen category vocabularies.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<EmbeddingRecord>,
    dim: usize,
    genders: Vec<String>,
    countries: Vec<String>,
}

impl Dataset {
    pub fn new(records: Vec<EmbeddingRecord>) -> Result<Self> {
        let dim = records.first().ok_or(Error::Empty("dataset has no records"))?.embedding.dim();
        for r in &records {
            r.validate().map_err(|e| e.context(format!("record `{}`", r.id)))?;
            if r.embedding.dim() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    actual: r.embedding.dim(),
                }
                .context(format!("record `{}`", r.id)));
            }
        }
        let categories = |f: fn(&EmbeddingRecord) -> &String| {
            let mut v: Vec<String> = records.iter().map(|r| f(r).clone()).collect();
            v.sort();
            v.dedup();
            v
        };
        let genders = categories(|r| &r.gender);
        let countries = categories(|r| &r.country);
        Ok(Self {
            records,
            dim,
            genders,
            countries,
        })
    }

    pub fn records(&self) -> &[EmbeddingRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<EmbeddingRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn categories(&self, task: Task) -> Vec<String> {
        match task {
            Task::Rating => (1..=5).map(|r| r.to_string()).collect(),
            Task::Gender => self.genders.clone(),
            Task::Country => self.countries.clone(),
            Task::Age => AgeBin::ALL.iter().map(|b| b.name().to_string()).collect(),
        }
    }

    pub fn classes(&self, task: Task) -> usize {
        match task {
            Task::Rating => RATING_CLASSES,
            Task::Gender => self.genders.len(),
            Task::Country => self.countries.len(),
            Task::Age => AgeBin::ALL.len(),
        }
    }

    pub fn label(&self, index: usize, task: Task) -> usize {
        let r = &self.records[index];
        let find = |cats: &[String], v: &String| cats.binary_search(v).expect("frozen category");
        match task {
            Task::Rating => usize::from(r.rating - 1),
            Task::Gender => find(&self.genders, &r.gender),
            Task::Country => find(&self.countries, &r.country),
            Task::Age => r.age_bin().index(),
        }
    }

    pub fn labels(&self, task: Task) -> Vec<usize> {
        (0..self.len()).map(|i| self.label(i, task)).collect()
    }

    pub fn has_tokens(&self) -> bool {
        self.records.iter().all(|r| r.tokens.is_some())
    }

    /// Copy with every embedding replaced; categories stay frozen.
    pub fn with_embeddings(&self, embeddings: Vec<Embedding>) -> Result<Self> {
        if embeddings.len() != self.len() {
            return Err(Error::DimMismatch {
                expected: self.len(),
                actual: embeddings.len(),
            });
        }
        let mut out = self.clone();
        for (r, e) in out.records.iter_mut().zip(embeddings) {
            r.embedding = e;
        }
        out.dim = out.records[0].embedding.dim();
        if out.records.iter().any(|r| r.embedding.dim() != out.dim) {
            return Err(Error::param("embeddings", "mixed dimensions"));
        }
        Ok(out)
    }
}
