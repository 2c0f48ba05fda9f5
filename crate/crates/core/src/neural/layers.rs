use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::rng::RandomSource;

/// Fully connected layer `y = x W + b`, `W` stored `inputs × outputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    /// Glorot-uniform weights, zero bias.
    pub fn init(inputs: usize, outputs: usize, rng: &mut RandomSource) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let weights = Array2::from_shape_fn((inputs, outputs), |_| rng.uniform(-limit, limit));
        Self {
            weights,
            bias: Array1::zeros(outputs),
        }
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weights: Array2::zeros((inputs, outputs)),
            bias: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weights.ncols()
    }

    fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.weights) + &self.bias
    }
}

/// Stack of dense layers. Every layer but the last is followed by ReLU; the
/// last one is ReLU'd only when `relu_output` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub relu_output: bool,
}

/// Activations saved by a forward pass: `inputs[k]` fed layer `k`,
/// `pre[k]` is its affine output before any activation.
pub struct MlpCache {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<Dense>,
}

impl Mlp {
    /// `widths` lists the layer output sizes in order.
    pub fn init(inputs: usize, widths: &[usize], relu_output: bool, rng: &mut RandomSource) -> Self {
        let mut layers = Vec::with_capacity(widths.len());
        let mut fan_in = inputs;
        for &w in widths {
            layers.push(Dense::init(fan_in, w, rng));
            fan_in = w;
        }
        Self {
            layers,
            relu_output,
        }
    }

    pub fn inputs(&self) -> usize {
        self.layers.first().map_or(0, Dense::inputs)
    }

    pub fn outputs(&self) -> usize {
        self.layers.last().map_or(0, Dense::outputs)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    fn activates(&self, k: usize) -> bool {
        k + 1 < self.layers.len() || self.relu_output
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut h = x.to_owned();
        for (k, layer) in self.layers.iter().enumerate() {
            h = layer.forward(h.view());
            if self.activates(k) {
                h.mapv_inplace(relu);
            }
        }
        h
    }

    pub fn forward_cached(&self, x: ArrayView2<f64>) -> (Array2<f64>, MlpCache) {
        let mut cache = MlpCache {
            inputs: Vec::with_capacity(self.layers.len()),
            pre: Vec::with_capacity(self.layers.len()),
        };
        let mut h = x.to_owned();
        for (k, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(h.view());
            cache.inputs.push(h);
            h = if self.activates(k) { z.mapv(relu) } else { z.clone() };
            cache.pre.push(z);
        }
        (h, cache)
    }

    /// Back-propagates `d_out` (gradient w.r.t. this MLP's output) and returns
    /// parameter gradients plus the gradient w.r.t. the input.
    pub fn backward(&self, cache: &MlpCache, d_out: Array2<f64>) -> (MlpGrads, Array2<f64>) {
        let mut delta = d_out;
        let mut grads = Vec::with_capacity(self.layers.len());
        for (k, layer) in self.layers.iter().enumerate().rev() {
            if self.activates(k) {
                ndarray::Zip::from(&mut delta)
                    .and(&cache.pre[k])
                    .for_each(|d, &z| {
                        if z <= 0.0 {
                            *d = 0.0;
                        }
                    });
            }
            let gw = cache.inputs[k].t().dot(&delta);
            let gb = delta.sum_axis(Axis(0));
            delta = delta.dot(&layer.weights.t());
            grads.push(Dense {
                weights: gw,
                bias: gb,
            });
        }
        grads.reverse();
        (MlpGrads { layers: grads }, delta)
    }

    /// `θ ← θ - lr · g`.
    pub fn apply(&mut self, grads: &MlpGrads, lr: f64) {
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            layer.weights.scaled_add(-lr, &g.weights);
            layer.bias.scaled_add(-lr, &g.bias);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|x| x.is_finite()))
    }

    /// Flat view of all parameters in a fixed order.
    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }
}

impl MlpGrads {
    pub fn flat(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
    }

    /// `self ← a · self + b · other`.
    pub fn blend(&mut self, a: f64, other: &MlpGrads, b: f64) {
        for (x, y) in self.layers.iter_mut().zip(&other.layers) {
            x.weights.zip_mut_with(&y.weights, |p, &q| *p = a * *p + b * q);
            x.bias.zip_mut_with(&y.bias, |p, &q| *p = a * *p + b * q);
        }
    }
}

/// NaN passes through so non-finite inputs surface in the loss.
#[inline]
fn relu(x: f64) -> f64 {
    if x < 0.0 {
        0.0
    } else {
        x
    }
}

/// Row-wise softmax of logits, shifted by the row max.
pub fn softmax(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        row.mapv_inplace(|x| (x - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|x| x / sum);
    }
    out
}
