//! Python bindings. Structured results cross the boundary as plain dicts and
//! lists.

use std::fmt::Display;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyTuple;

use privleak_core::data::{self, SignalStrengths, SyntheticSpec, Task};
use privleak_core::experiments::{self, DeviationMechanism, ExperimentPlan, PrivacyModel};
use privleak_core::mechanisms::{self, MdpSwapper, PrivacyParams};
use privleak_core::metrics;
use privleak_core::rng::DEFAULT_SEED;
use privleak_core::{Metric, RandomSource};

fn value_err(e: impl Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Serializes through JSON into native Python objects.
fn to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(value_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "Dataset", module = "privleak")]
struct PyDataset {
    inner: data::Dataset,
}

#[pymethods]
impl PyDataset {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: data::load_dataset(path).map_err(value_err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        data::save_dataset(path, self.inner.records()).map_err(value_err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn ids(&self) -> Vec<String> {
        self.inner.records().iter().map(|r| r.id.clone()).collect()
    }

    fn embeddings(&self) -> Vec<Vec<f64>> {
        self.inner.records().iter().map(|r| r.embedding.as_slice().to_vec()).collect()
    }

    fn tokens(&self) -> Vec<Option<Vec<String>>> {
        self.inner.records().iter().map(|r| r.tokens.clone()).collect()
    }

    /// Integer labels of `task`: rating, gender, country or age.
    fn labels(&self, task: &str) -> PyResult<Vec<usize>> {
        let task: Task = task.parse().map_err(value_err)?;
        Ok(self.inner.labels(task))
    }

    fn __repr__(&self) -> String {
        format!("Dataset(records={}, dim={})", self.inner.len(), self.inner.dim())
    }
}

#[pyclass(name = "Vocabulary", module = "privleak")]
struct PyVocabulary {
    inner: mechanisms::Vocabulary,
}

#[pymethods]
impl PyVocabulary {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: mechanisms::Vocabulary::load(path).map_err(value_err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(value_err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn words(&self) -> Vec<String> {
        self.inner.iter().map(|(w, _)| w.to_string()).collect()
    }

    fn vector(&self, word: &str) -> Option<Vec<f64>> {
        self.inner.get(word).map(<[f64]>::to_vec)
    }
}

#[pyfunction]
#[pyo3(signature = (n=10_000, dim=64, seed=DEFAULT_SEED, rating_signal=5.0, gender_signal=5.0, country_signal=3.0, age_signal=3.0))]
fn generate_synthetic<'py>(
    py: Python<'py>,
    n: usize,
    dim: usize,
    seed: u64,
    rating_signal: f64,
    gender_signal: f64,
    country_signal: f64,
    age_signal: f64,
) -> PyResult<Bound<'py, PyTuple>> {
    let spec = SyntheticSpec {
        records: n,
        dim,
        signals: SignalStrengths {
            rating: rating_signal,
            gender: gender_signal,
            country: country_signal,
            age: age_signal,
        },
        seed,
        ..SyntheticSpec::default()
    };
    let out = data::generate_synthetic(&spec).map_err(value_err)?;
    let dataset = PyDataset {
        inner: data::Dataset::new(out.records).map_err(value_err)?,
    };
    let vocab = PyVocabulary { inner: out.vocabulary };
    PyTuple::new(py, [Py::new(py, dataset)?.into_any(), Py::new(py, vocab)?.into_any()])
}

/// Min-max normalization followed by Laplace noise.
#[pyfunction]
#[pyo3(signature = (vector, epsilon, sensitivity=1.0, seed=DEFAULT_SEED))]
fn ldp_perturb(vector: Vec<f64>, epsilon: f64, sensitivity: f64, seed: u64) -> PyResult<Vec<f64>> {
    let params = PrivacyParams::with_sensitivity(epsilon, sensitivity).map_err(value_err)?;
    mechanisms::ldp_perturb(&vector, &params, &mut RandomSource::new(seed)).map_err(value_err)
}

/// Noisy nearest-word substitution of each token.
#[pyfunction]
#[pyo3(signature = (tokens, vocab, epsilon, seed=DEFAULT_SEED))]
fn mdp_privatize(tokens: Vec<String>, vocab: &PyVocabulary, epsilon: f64, seed: u64) -> PyResult<Vec<String>> {
    let swapper = MdpSwapper::new(&vocab.inner, epsilon).map_err(value_err)?;
    Ok(swapper
        .privatize(&tokens, &mut RandomSource::new(seed))
        .map_err(value_err)?
        .tokens)
}

#[pyfunction]
#[pyo3(signature = (a, b, metric="euclidean"))]
fn distance(a: Vec<f64>, b: Vec<f64>, metric: &str) -> PyResult<f64> {
    let metric = match metric {
        "euclidean" => Metric::Euclidean,
        "cosine" => Metric::CosineDistance,
        other => return Err(value_err(format!("unknown metric `{other}` (euclidean or cosine)"))),
    };
    privleak_core::distance(&a, &b, metric).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (df1, df2, significance=0.05))]
fn f_quantile(df1: f64, df2: f64, significance: f64) -> PyResult<f64> {
    metrics::f_quantile(df1, df2, significance).map_err(value_err)
}

#[pyfunction]
fn f_survival(df1: f64, df2: f64, x: f64) -> PyResult<f64> {
    metrics::f_survival(df1, df2, x).map_err(value_err)
}

#[pyfunction]
fn anova_two_way<'py>(py: Python<'py>, grid: Vec<Vec<f64>>) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &metrics::anova_two_way(&grid).map_err(value_err)?)
}

/// Trains `model` and attacks every private attribute; returns one dict per
/// results row.
#[pyfunction]
#[pyo3(signature = (dataset, model, vocab=None, epsilon=None, lambda_=None, epochs=None, seeds=1, seed=DEFAULT_SEED, attacker_depth=1, attacker_width=200))]
#[allow(clippy::too_many_arguments)]
fn run_experiment<'py>(
    py: Python<'py>,
    dataset: &PyDataset,
    model: &str,
    vocab: Option<&PyVocabulary>,
    epsilon: Option<f64>,
    lambda_: Option<f64>,
    epochs: Option<usize>,
    seeds: usize,
    seed: u64,
    attacker_depth: usize,
    attacker_width: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let model: PrivacyModel = model.parse().map_err(value_err)?;
    let mut plan = ExperimentPlan::new(model).with_seeds(seed, seeds);
    if let Some(e) = epsilon {
        plan = plan.with_epsilon(e);
    }
    if let Some(l) = lambda_ {
        plan = plan.with_lambda(l);
    }
    if let Some(e) = epochs {
        plan.train.epochs = e;
    }
    plan.attacker.depth = attacker_depth;
    plan.attacker.width = attacker_width;
    let vocab = vocab.map(|v| &v.inner);
    let report = py
        .detach(|| experiments::run_experiment(&plan, &dataset.inner, vocab))
        .map_err(value_err)?;
    to_py(py, &experiments::result_rows("python", &plan, &report))
}

/// Mean original-vs-privatized distances for LDP and, when a vocabulary is
/// given, MDP.
#[pyfunction]
#[pyo3(signature = (dataset, vocab=None, epsilon_ldp=0.1, epsilon_mdp=20.0, seed=DEFAULT_SEED))]
fn embedding_deviation<'py>(
    py: Python<'py>,
    dataset: &PyDataset,
    vocab: Option<&PyVocabulary>,
    epsilon_ldp: f64,
    epsilon_mdp: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let mut mechs = vec![DeviationMechanism::Ldp(PrivacyParams::new(epsilon_ldp).map_err(value_err)?)];
    if vocab.is_some() {
        mechs.push(DeviationMechanism::Mdp { epsilon: epsilon_mdp });
    }
    let report = experiments::embedding_deviation(&dataset.inner, vocab.map(|v| &v.inner), &mechs, &RandomSource::new(seed))
        .map_err(value_err)?;
    to_py(py, &report.rows)
}

#[pymodule]
fn privleak(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("DEFAULT_SEED", DEFAULT_SEED)?;
    m.add("MODELS", PrivacyModel::ALL.map(PrivacyModel::name).to_vec())?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyVocabulary>()?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(ldp_perturb, m)?)?;
    m.add_function(wrap_pyfunction!(mdp_privatize, m)?)?;
    m.add_function(wrap_pyfunction!(distance, m)?)?;
    m.add_function(wrap_pyfunction!(f_quantile, m)?)?;
    m.add_function(wrap_pyfunction!(f_survival, m)?)?;
    m.add_function(wrap_pyfunction!(anova_two_way, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(embedding_deviation, m)?)?;
    Ok(())
}
