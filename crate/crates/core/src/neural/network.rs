use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::layers::{softmax, Mlp, MlpCache, MlpGrads};
use crate::error::{Error, Result};
use crate::rng::RandomSource;

pub const DEFAULT_TRUNK: [usize; 2] = [64, 64];
pub const DEFAULT_HEAD_HIDDEN: [usize; 1] = [200];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadSpec {
    pub name: String,
    pub classes: usize,
    pub hidden: Vec<usize>,
}

impl HeadSpec {
    /// One 200-unit hidden layer in front of the softmax output.
    pub fn standard(name: impl Into<String>, classes: usize) -> Self {
        Self {
            name: name.into(),
            classes,
            hidden: DEFAULT_HEAD_HIDDEN.to_vec(),
        }
    }
}

/// Shared ReLU trunk feeding named softmax classifier heads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub trunk: Mlp,
    pub heads: BTreeMap<String, Mlp>,
}

/// Gradients of the mean cross-entropy of one head over a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub loss: f64,
    pub trunk: MlpGrads,
    pub head: MlpGrads,
    /// Gradient w.r.t. the trunk output, before trunk back-propagation.
    pub representation: Array2<f64>,
    /// Gradient w.r.t. the network input.
    pub input: Array2<f64>,
}

impl Network {
    pub fn new(input_dim: usize, trunk: &[usize], heads: &[HeadSpec], rng: &mut RandomSource) -> Result<Self> {
        if input_dim == 0 || trunk.is_empty() || trunk.contains(&0) {
            return Err(Error::param("architecture", "input and trunk widths must be positive"));
        }
        let trunk_net = Mlp::init(input_dim, trunk, true, &mut rng.derive("init/trunk"));
        let mut map = BTreeMap::new();
        for h in heads {
            if h.classes < 1 || h.hidden.contains(&0) {
                return Err(Error::param("architecture", format!("head `{}` has an empty layer", h.name)));
            }
            let mut widths = h.hidden.clone();
            widths.push(h.classes);
            let head = Mlp::init(trunk_net.outputs(), &widths, false, &mut rng.derive(&format!("init/head/{}", h.name)));
            if map.insert(h.name.clone(), head).is_some() {
                return Err(Error::param("architecture", format!("duplicate head `{}`", h.name)));
            }
        }
        Ok(Self {
            trunk: trunk_net,
            heads: map,
        })
    }

    /// Two 64-unit trunk layers and 200-unit heads.
    pub fn standard(input_dim: usize, heads: &[(&str, usize)], rng: &mut RandomSource) -> Result<Self> {
        let specs: Vec<HeadSpec> = heads.iter().map(|&(n, k)| HeadSpec::standard(n, k)).collect();
        Self::new(input_dim, &DEFAULT_TRUNK, &specs, rng)
    }

    pub fn input_dim(&self) -> usize {
        self.trunk.inputs()
    }

    pub fn representation_dim(&self) -> usize {
        self.trunk.outputs()
    }

    pub fn head(&self, name: &str) -> Result<&Mlp> {
        self.heads.get(name).ok_or_else(|| Error::UnknownHead(name.to_string()))
    }

    pub fn classes(&self, head: &str) -> Result<usize> {
        self.head(head).map(Mlp::outputs)
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimMismatch {
                expected: self.input_dim(),
                actual: x.ncols(),
            });
        }
        Ok(())
    }

    /// Trunk output for every row of `x`.
    pub fn representation(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        Ok(self.trunk.forward(x))
    }

    /// Class probabilities of a single input.
    pub fn forward(&self, x: &[f64], head: &str) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, x.len()), x).expect("row vector");
        Ok(self.predict_proba(view, head)?.into_raw_vec_and_offset().0)
    }

    pub fn predict_proba(&self, x: ArrayView2<f64>, head: &str) -> Result<Array2<f64>> {
        let h = self.head(head)?;
        let rep = self.representation(x)?;
        Ok(softmax(&h.forward(rep.view())))
    }

    pub fn predict(&self, x: ArrayView2<f64>, head: &str) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.predict_proba(x, head)?))
    }

    pub fn loss(&self, x: ArrayView2<f64>, labels: &[usize], head: &str) -> Result<f64> {
        let h = self.head(head)?;
        check_labels(labels, x.nrows(), h.outputs())?;
        let logits = h.forward(self.representation(x)?.view());
        Ok(mean_cross_entropy(&logits, labels))
    }

    /// Exact gradients of the mean cross-entropy of `head` over the batch.
    pub fn backward(&self, x: ArrayView2<f64>, labels: &[usize], head: &str) -> Result<Gradients> {
        self.check_input(&x)?;
        let h = self.head(head)?;
        check_labels(labels, x.nrows(), h.outputs())?;
        let (rep, trunk_cache) = self.trunk.forward_cached(x);
        let (head_grads, d_rep, loss) = head_backward(h, rep.view(), labels);
        let (trunk_grads, d_input) = self.trunk.backward(&trunk_cache, d_rep.clone());
        Ok(Gradients {
            loss,
            trunk: trunk_grads,
            head: head_grads,
            representation: d_rep,
            input: d_input,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.trunk.is_finite() && self.heads.values().all(Mlp::is_finite)
    }
}

/// Forward and backward through one head given trunk output `rep`.
/// Returns head gradients, gradient w.r.t. `rep`, and the mean loss.
pub(crate) fn head_backward(head: &Mlp, rep: ArrayView2<f64>, labels: &[usize]) -> (MlpGrads, Array2<f64>, f64) {
    let (logits, cache) = head.forward_cached(rep);
    let loss = mean_cross_entropy(&logits, labels);
    let d_logits = cross_entropy_grad(&logits, labels);
    let (grads, d_rep) = head.backward(&cache, d_logits);
    (grads, d_rep, loss)
}

pub(crate) fn trunk_forward(net: &Network, x: ArrayView2<f64>) -> (Array2<f64>, MlpCache) {
    net.trunk.forward_cached(x)
}

/// `(softmax(logits) - onehot(labels)) / batch`.
pub(crate) fn cross_entropy_grad(logits: &Array2<f64>, labels: &[usize]) -> Array2<f64> {
    let mut p = softmax(logits);
    let b = labels.len() as f64;
    for (mut row, &y) in p.rows_mut().into_iter().zip(labels) {
        row[y] -= 1.0;
        row.mapv_inplace(|v| v / b);
    }
    p
}

pub(crate) fn mean_cross_entropy(logits: &Array2<f64>, labels: &[usize]) -> f64 {
    let mut total = 0.0;
    for (row, &y) in logits.rows().into_iter().zip(labels) {
        let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        let lse = row.iter().map(|&x| (x - max).exp()).sum::<f64>().ln() + max;
        total += lse - row[y];
    }
    total / labels.len() as f64
}

pub(crate) fn check_labels(labels: &[usize], rows: usize, classes: usize) -> Result<()> {
    if labels.len() != rows {
        return Err(Error::DimMismatch {
            expected: rows,
            actual: labels.len(),
        });
    }
    if rows == 0 {
        return Err(Error::Empty("batch has no rows"));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::LabelOutOfRange {
            label: bad,
            classes,
        });
    }
    Ok(())
}

pub fn argmax_rows(p: &Array2<f64>) -> Vec<usize> {
    p.rows()
        .into_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
                .0
        })
        .collect()
}
