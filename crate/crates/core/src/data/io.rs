//! JSON-lines dataset files and the binary embedding sidecar.
//!
//! Each line is one record:
//!
//! ```text
//! {"id": "r1", "embedding": [0.1, ...], "tokens": ["good", ...],
//!  "rating": 4, "gender": "female", "country": "GB", "birth_year": 1988}
//! ```
//!
//! Instead of `embedding`, a line may carry `"embedding_row": <n>`, the row
//! index into a sidecar matrix stored next to the dataset with the extension
//! `.emb`. Sidecar layout, all little-endian:
//!
//! | offset | size | field                         |
//! |--------|------|-------------------------------|
//! | 0      | 8    | magic `PLEMB\0\0\x01`          |
//! | 8      | 8    | dims (u64)                    |
//! | 16     | 8    | count (u64)                   |
//! | 24     | 8·dims·count | row-major f64 values  |

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Dataset, EmbeddingRecord};
use crate::error::{Error, Result};
use crate::vector::Embedding;

pub const SIDECAR_MAGIC: [u8; 8] = *b"PLEMB\0\0\x01";
const SIDECAR_HEADER: usize = 24;

#[derive(Debug, Deserialize)]
struct Row {
    id: String,
    #[serde(default)]
    embedding: Option<Vec<f64>>,
    #[serde(default)]
    embedding_row: Option<usize>,
    #[serde(default)]
    tokens: Option<Vec<String>>,
    rating: i64,
    gender: String,
    country: String,
    birth_year: i32,
}

#[derive(Serialize)]
struct RowOut<'a> {
    id: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    embedding: Option<&'a [f64]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    embedding_row: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tokens: Option<&'a [String]>,
    rating: u8,
    gender: &'a str,
    country: &'a str,
    birth_year: i32,
}

pub fn sidecar_path(dataset: &Path) -> PathBuf {
    dataset.with_extension("emb")
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, reason: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };

    let mut sidecar: Option<Sidecar> = None;
    let mut records = Vec::new();
    let mut dim: Option<usize> = None;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Row = serde_json::from_str(&line).map_err(|e| parse_err(lineno, e.to_string()))?;
        let values = match (row.embedding, row.embedding_row) {
            (Some(v), None) => v,
            (None, Some(k)) => {
                if sidecar.is_none() {
                    sidecar = Some(Sidecar::read(&sidecar_path(path))?);
                }
                let sc = sidecar.as_ref().expect("loaded above");
                sc.row(k)
                    .ok_or_else(|| {
                        parse_err(lineno, format!("embedding_row {k} out of range ({} rows)", sc.count))
                    })?
                    .to_vec()
            }
            _ => {
                return Err(parse_err(
                    lineno,
                    format!("record `{}` needs exactly one of `embedding`, `embedding_row`", row.id),
                ))
            }
        };
        let embedding =
            Embedding::new(values).map_err(|e| parse_err(lineno, format!("record `{}`: {e}", row.id)))?;
        match dim {
            None => dim = Some(embedding.dim()),
            Some(d) if d != embedding.dim() => {
                return Err(parse_err(
                    lineno,
                    format!("record `{}` has dim {}, earlier records have {d}", row.id, embedding.dim()),
                ))
            }
            _ => {}
        }
        let rating = u8::try_from(row.rating)
            .ok()
            .filter(|r| (1..=5).contains(r))
            .ok_or_else(|| {
                parse_err(lineno, format!("record `{}`: rating must be 1..=5, got {}", row.id, row.rating))
            })?;
        let record = EmbeddingRecord {
            id: row.id,
            embedding,
            tokens: row.tokens,
            rating,
            gender: row.gender,
            country: row.country,
            birth_year: row.birth_year,
        };
        record
            .validate()
            .map_err(|e| parse_err(lineno, format!("record `{}`: {e}", record.id)))?;
        records.push(record);
    }
    Dataset::new(records).map_err(|e| e.context(format!("loading {}", path.display())))
}

/// Writes records with inline embeddings.
pub fn save_dataset(path: impl AsRef<Path>, records: &[EmbeddingRecord]) -> Result<()> {
    write_rows(path.as_ref(), records, false)
}

/// Writes records with `embedding_row` references plus the `.emb` sidecar.
pub fn save_dataset_with_sidecar(path: impl AsRef<Path>, records: &[EmbeddingRecord]) -> Result<()> {
    let path = path.as_ref();
    let dim = records.first().map_or(0, |r| r.embedding.dim());
    let mut buf = Vec::with_capacity(SIDECAR_HEADER + 8 * dim * records.len());
    buf.extend_from_slice(&SIDECAR_MAGIC);
    buf.extend_from_slice(&(dim as u64).to_le_bytes());
    buf.extend_from_slice(&(records.len() as u64).to_le_bytes());
    for r in records {
        if r.embedding.dim() != dim {
            return Err(Error::DimMismatch {
                expected: dim,
                actual: r.embedding.dim(),
            });
        }
        for x in r.embedding.iter() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    let sc = sidecar_path(path);
    fs::write(&sc, buf).map_err(|e| Error::io(&sc, e))?;
    write_rows(path, records, true)
}

fn write_rows(path: &Path, records: &[EmbeddingRecord], by_row: bool) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (k, r) in records.iter().enumerate() {
        let row = RowOut {
            id: &r.id,
            embedding: (!by_row).then(|| r.embedding.as_slice()),
            embedding_row: by_row.then_some(k),
            tokens: r.tokens.as_deref(),
            rating: r.rating,
            gender: &r.gender,
            country: &r.country,
            birth_year: r.birth_year,
        };
        serde_json::to_writer(&mut w, &row)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

struct Sidecar {
    dims: usize,
    count: usize,
    values: Vec<f64>,
}

impl Sidecar {
    fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let bad = |reason: &str| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            reason: reason.to_string(),
        };
        if bytes.len() < SIDECAR_HEADER || bytes[..8] != SIDECAR_MAGIC {
            return Err(bad("not an embedding sidecar (bad magic)"));
        }
        let dims = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let count = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes")) as usize;
        let body = &bytes[SIDECAR_HEADER..];
        if dims.checked_mul(count).and_then(|n| n.checked_mul(8)) != Some(body.len()) {
            return Err(bad("payload size does not match header"));
        }
        let values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Ok(Self { dims, count, values })
    }

    fn row(&self, k: usize) -> Option<&[f64]> {
        (k < self.count).then(|| &self.values[k * self.dims..(k + 1) * self.dims])
    }
}
