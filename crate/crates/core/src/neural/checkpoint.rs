//! Plain-text checkpoint format.
//!
//! ```text
//! network 1
//! mlp <name> <relu_output 0|1> <layers>
//! dense <inputs> <outputs>
//! <inputs lines of `outputs` weights>
//! <one line of `outputs` biases>
//! ...
//! ```
//!
//! The first `mlp` block is the trunk (named `trunk`), the rest are heads.
//! Floats are written in shortest round-trip form, so a reload is exact.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::layers::{Dense, Mlp};
use super::network::Network;
use crate::error::{Error, Result};

const MAGIC: &str = "network 1";
const TRUNK: &str = "trunk";

fn write_floats<'a>(out: &mut String, xs: impl Iterator<Item = &'a f64>) {
    let mut first = true;
    for x in xs {
        if !first {
            out.push(' ');
        }
        first = false;
        let _ = write!(out, "{x:?}");
    }
    out.push('\n');
}

fn write_mlp(out: &mut String, name: &str, mlp: &Mlp) {
    let _ = writeln!(out, "mlp {name} {} {}", u8::from(mlp.relu_output), mlp.layers.len());
    for layer in &mlp.layers {
        let _ = writeln!(out, "dense {} {}", layer.inputs(), layer.outputs());
        for row in layer.weights.rows() {
            write_floats(out, row.iter());
        }
        write_floats(out, layer.bias.iter());
    }
}

pub fn to_text(net: &Network) -> String {
    let mut out = format!("{MAGIC}\n");
    write_mlp(&mut out, TRUNK, &net.trunk);
    for (name, head) in &net.heads {
        write_mlp(&mut out, name, head);
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    path: std::path::PathBuf,
    line: usize,
}

impl<'a> Lines<'a> {
    fn err(&self, reason: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line: self.line,
            reason: reason.into(),
        }
    }

    fn next_line(&mut self) -> Option<&'a str> {
        self.inner.next().map(|(i, l)| {
            self.line = i + 1;
            l
        })
    }

    fn expect_line(&mut self) -> Result<&'a str> {
        self.next_line().ok_or_else(|| self.err("unexpected end of file"))
    }

    fn floats(&mut self, count: usize) -> Result<Vec<f64>> {
        let line = self.expect_line()?;
        let xs: Vec<f64> = line
            .split_ascii_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| self.err(format!("bad number: {e}")))?;
        if xs.len() != count {
            return Err(self.err(format!("expected {count} values, found {}", xs.len())));
        }
        if xs.iter().any(|x| !x.is_finite()) {
            return Err(self.err("non-finite parameter"));
        }
        Ok(xs)
    }

    fn usize_field(&self, s: Option<&str>, what: &str) -> Result<usize> {
        s.and_then(|t| t.parse().ok())
            .ok_or_else(|| self.err(format!("missing or invalid {what}")))
    }

    fn mlp(&mut self, header: &'a str) -> Result<(&'a str, Mlp)> {
        let mut parts = header.split_ascii_whitespace();
        if parts.next() != Some("mlp") {
            return Err(self.err("expected `mlp` block"));
        }
        let name = parts.next().ok_or_else(|| self.err("missing block name"))?;
        let relu_output = match parts.next() {
            Some("0") => false,
            Some("1") => true,
            _ => return Err(self.err("relu flag must be 0 or 1")),
        };
        let count = self.usize_field(parts.next(), "layer count")?;
        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let line = self.expect_line()?;
            let mut p = line.split_ascii_whitespace();
            if p.next() != Some("dense") {
                return Err(self.err("expected `dense` layer"));
            }
            let inputs = self.usize_field(p.next(), "input count")?;
            let outputs = self.usize_field(p.next(), "output count")?;
            if let Some(prev) = layers.last().map(Dense::outputs) {
                if prev != inputs {
                    return Err(self.err(format!("layer expects {inputs} inputs, previous layer has {prev} outputs")));
                }
            }
            let mut flat = Vec::with_capacity(inputs * outputs);
            for _ in 0..inputs {
                flat.extend(self.floats(outputs)?);
            }
            let weights = Array2::from_shape_vec((inputs, outputs), flat).expect("shape counted");
            let bias = Array1::from(self.floats(outputs)?);
            layers.push(Dense { weights, bias });
        }
        Ok((name, Mlp { layers, relu_output }))
    }
}

pub fn from_text(text: &str, origin: &str) -> Result<Network> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        path: origin.into(),
        line: 0,
    };
    if lines.expect_line()?.trim() != MAGIC {
        return Err(lines.err("not a network checkpoint"));
    }
    let header = lines.expect_line()?;
    let (name, trunk) = lines.mlp(header)?;
    if name != TRUNK {
        return Err(lines.err("first block must be the trunk"));
    }
    let mut heads = BTreeMap::new();
    while let Some(header) = lines.next_line() {
        if header.trim().is_empty() {
            continue;
        }
        let (name, head) = lines.mlp(header)?;
        if head.inputs() != trunk.outputs() {
            return Err(lines.err(format!("head `{name}` does not match trunk width")));
        }
        if heads.insert(name.to_string(), head).is_some() {
            return Err(lines.err(format!("duplicate head `{name}`")));
        }
    }
    Ok(Network { trunk, heads })
}

pub fn save_network(net: &Network, path: &Path) -> Result<()> {
    std::fs::write(path, to_text(net)).map_err(|e| Error::io(path, e))
}

pub fn load_network(path: &Path) -> Result<Network> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_text(&text, &path.display().to_string())
}
