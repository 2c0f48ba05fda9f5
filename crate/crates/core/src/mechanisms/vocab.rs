use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Ordered word → vector table. Vectors are stored row-major in one buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    dim: usize,
    words: Vec<String>,
    vectors: Vec<f64>,
    lookup: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new(entries: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let dim = entries.first().ok_or(Error::EmptyVocabulary)?.1.len();
        if dim == 0 {
            return Err(Error::param("vocabulary", "vectors must have at least one component"));
        }
        let mut words = Vec::with_capacity(entries.len());
        let mut vectors = Vec::with_capacity(entries.len() * dim);
        let mut lookup = HashMap::with_capacity(entries.len());
        for (i, (word, v)) in entries.into_iter().enumerate() {
            if v.len() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    actual: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::param("vocabulary", format!("word `{word}` has a non-finite component")));
            }
            if lookup.insert(word.clone(), i).is_some() {
                return Err(Error::param("vocabulary", format!("duplicate word `{word}`")));
            }
            words.push(word);
            vectors.extend_from_slice(&v);
        }
        Ok(Self {
            dim,
            words,
            vectors,
            lookup,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn word(&self, index: usize) -> &str {
        &self.words[index]
    }

    pub fn vector(&self, index: usize) -> &[f64] {
        &self.vectors[index * self.dim..(index + 1) * self.dim]
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.lookup.get(word).copied()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index_of(word).map(|i| self.vector(i))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.words
            .iter()
            .zip(self.vectors.chunks_exact(self.dim))
            .map(|(w, v)| (w.as_str(), v))
    }

    /// Mean of the token vectors of an in-vocabulary sequence; OOV tokens are
    /// skipped. `None` when no token is known.
    pub fn mean_vector<S: AsRef<str>>(&self, tokens: &[S]) -> Option<Vec<f64>> {
        let mut acc = vec![0.0; self.dim];
        let mut hits = 0usize;
        for t in tokens {
            if let Some(v) = self.get(t.as_ref()) {
                acc.iter_mut().zip(v).for_each(|(a, x)| *a += x);
                hits += 1;
            }
        }
        (hits > 0).then(|| acc.into_iter().map(|a| a / hits as f64).collect())
    }

    /// Reads the text format: a `dim <m> count <n>` header, then one
    /// `word<TAB>v1 v2 ... vm` line per entry.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines().enumerate();
        let parse_err = |line: usize, reason: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            reason,
        };

        let (_, header) = lines.next().ok_or_else(|| parse_err(1, "missing header".into()))?;
        let header = header.map_err(|e| Error::io(path, e))?;
        let (dim, count) = parse_header(&header).ok_or_else(|| {
            parse_err(1, format!("expected `dim <m> count <n>`, found `{header}`"))
        })?;

        let mut entries = Vec::with_capacity(count);
        for (i, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            let lineno = i + 1;
            if line.is_empty() {
                continue;
            }
            let (word, rest) = line
                .split_once('\t')
                .ok_or_else(|| parse_err(lineno, "missing tab between word and vector".into()))?;
            let v = rest
                .split_ascii_whitespace()
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| parse_err(lineno, format!("bad number: {e}")))?;
            if v.len() != dim {
                return Err(parse_err(lineno, format!("expected {dim} components, found {}", v.len())));
            }
            entries.push((word.to_string(), v));
        }
        if entries.len() != count {
            return Err(parse_err(
                1,
                format!("header declares {count} entries, file has {}", entries.len()),
            ));
        }
        Self::new(entries).map_err(|e| e.context(format!("loading {}", path.display())))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let write = |w: &mut BufWriter<fs::File>| -> std::io::Result<()> {
            writeln!(w, "dim {} count {}", self.dim, self.len())?;
            for (word, v) in self.iter() {
                write!(w, "{word}\t")?;
                for (j, x) in v.iter().enumerate() {
                    if j > 0 {
                        w.write_all(b" ")?;
                    }
                    // `{:?}` prints the shortest repr that round-trips.
                    write!(w, "{x:?}")?;
                }
                w.write_all(b"\n")?;
            }
            w.flush()
        };
        write(&mut w).map_err(|e| Error::io(path, e))
    }
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let mut it = line.split_ascii_whitespace();
    match (it.next()?, it.next()?, it.next()?, it.next()?, it.next()) {
        ("dim", m, "count", n, None) => Some((m.parse().ok()?, n.parse().ok()?)),
        _ => None,
    }
}
