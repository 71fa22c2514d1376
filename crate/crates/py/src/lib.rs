//! Python bindings for `sraal-core`.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sraal_core::alcore::{run_experiment as run_core, AlConfig, Strategy};
use sraal_core::cli::RunConfig;
use sraal_core::data::{self, SyntheticKind, SyntheticSpec};
use sraal_core::kcenter::{self, EmbeddingSet};
use sraal_core::nets::LatentCode;
use sraal_core::oui::{self, ProbVector};
use sraal_core::{losses, Error};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn prob_vector(probs: Vec<f64>) -> PyResult<ProbVector> {
    ProbVector::new(probs).map_err(to_py)
}

/// Online uncertainty indicator of one probability vector.
#[pyfunction]
pub fn oui_score(probs: Vec<f64>) -> PyResult<f64> {
    Ok(oui::oui_score(&prob_vector(probs)?).value())
}

/// Entropy normalized by `ln C`.
#[pyfunction]
pub fn entropy_indicator(probs: Vec<f64>) -> PyResult<f64> {
    Ok(oui::entropy_indicator(&prob_vector(probs)?))
}

/// `1 - sd / sd_max`.
#[pyfunction]
pub fn sd_indicator(probs: Vec<f64>) -> PyResult<f64> {
    Ok(oui::sd_indicator(&prob_vector(probs)?))
}

#[pyfunction]
pub fn variance(probs: Vec<f64>) -> PyResult<f64> {
    Ok(oui::variance(&prob_vector(probs)?))
}

/// Smallest variance of a `classes`-vector whose maximum is `max_prob`.
#[pyfunction]
pub fn min_var(classes: usize, max_prob: f64) -> PyResult<f64> {
    oui::min_var(classes, max_prob).map_err(to_py)
}

/// `KL(N(mean, exp(log_variance)) || N(0, I))`.
#[pyfunction]
pub fn kl_gaussian(mean: Vec<f64>, log_variance: Vec<f64>) -> PyResult<f64> {
    Ok(losses::kl_gaussian(&LatentCode::new(mean, log_variance).map_err(to_py)?))
}

/// Relabeled discriminator loss on plain outputs.
#[pyfunction]
pub fn disc_loss(d_labeled: Vec<f64>, d_unlabeled: Vec<f64>, scores: Vec<f64>) -> PyResult<f64> {
    losses::disc_loss_value(&d_labeled, &d_unlabeled, &scores).map_err(to_py)
}

#[pyfunction]
pub fn binary_disc_loss(d_labeled: Vec<f64>, d_unlabeled: Vec<f64>) -> PyResult<f64> {
    losses::binary_disc_loss_value(&d_labeled, &d_unlabeled).map_err(to_py)
}

#[pyfunction]
pub fn gen_adv_loss(d_labeled: Vec<f64>, d_unlabeled: Vec<f64>) -> PyResult<f64> {
    losses::gen_adv_loss_value(&d_labeled, &d_unlabeled).map_err(to_py)
}

fn embeddings(points: Vec<Vec<f64>>, ids: Option<Vec<usize>>) -> PyResult<EmbeddingSet> {
    let ids = ids.unwrap_or_else(|| (0..points.len()).collect());
    EmbeddingSet::new(points, ids).map_err(to_py)
}

/// Greedy k-center selection. Returns `(ids in selection order, covering radius)`.
#[pyfunction]
#[pyo3(signature = (points, m, seeds=1, seed=0, start=None, ids=None))]
pub fn greedy_kcenter(
    points: Vec<Vec<f64>>,
    m: usize,
    seeds: usize,
    seed: u64,
    start: Option<Vec<usize>>,
    ids: Option<Vec<usize>>,
) -> PyResult<(Vec<usize>, f64)> {
    let emb = embeddings(points, ids)?;
    let sel = match start {
        Some(s) => kcenter::greedy_kcenter_from(&emb, m, &s),
        None => kcenter::greedy_kcenter(&emb, m, seeds, &mut ChaCha8Rng::seed_from_u64(seed)),
    }
    .map_err(to_py)?;
    Ok((sel.ids, sel.radius))
}

#[pyfunction]
#[pyo3(signature = (points, centers, ids=None))]
pub fn covering_radius(points: Vec<Vec<f64>>, centers: Vec<usize>, ids: Option<Vec<usize>>) -> PyResult<f64> {
    kcenter::covering_radius(&embeddings(points, ids)?, &centers).map_err(to_py)
}

/// Largest relative gradient error per loss, as `(name, error)` pairs.
#[pyfunction]
#[pyo3(signature = (seed=0, trials=20))]
pub fn gradcheck(seed: u64, trials: usize) -> PyResult<Vec<(String, f64)>> {
    let checks = sraal_core::gradsuite::run_gradcheck(seed, trials, false).map_err(to_py)?;
    Ok(checks.into_iter().map(|c| (c.name.to_string(), c.max_rel_error)).collect())
}

/// A labeled feature dataset with a fixed train/test split.
#[pyclass(name = "Dataset", frozen)]
pub struct PyDataset {
    inner: data::Dataset,
}

#[pymethods]
impl PyDataset {
    /// Generates a synthetic dataset. `kind` is `gaussian-blobs`,
    /// `two-moons` or `rings`.
    #[staticmethod]
    #[pyo3(signature = (kind="gaussian-blobs", n=2000, d=32, classes=8, dispersion=1.0, radius=3.0, seed=0))]
    pub fn synthetic(
        kind: &str,
        n: usize,
        d: usize,
        classes: usize,
        dispersion: f64,
        radius: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let kind = match kind {
            "gaussian-blobs" => SyntheticKind::GaussianBlobs,
            "two-moons" => SyntheticKind::TwoMoons,
            "rings" => SyntheticKind::Rings,
            other => return Err(PyValueError::new_err(format!("unknown dataset kind `{other}`"))),
        };
        let spec = SyntheticSpec {
            kind,
            n,
            d,
            classes,
            dispersion,
            radius,
            seed,
        };
        Ok(PyDataset {
            inner: data::generate(&spec).map_err(to_py)?,
        })
    }

    /// Loads a labeled feature CSV (`f0..f{d-1},label`).
    #[staticmethod]
    #[pyo3(signature = (path, classes=None, seed=0))]
    pub fn from_csv(path: std::path::PathBuf, classes: Option<usize>, seed: u64) -> PyResult<Self> {
        Ok(PyDataset {
            inner: data::load_csv(&path, true, classes, seed).map_err(to_py)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn classes(&self) -> usize {
        self.inner.classes()
    }

    #[getter]
    fn train_ids(&self) -> Vec<usize> {
        self.inner.train_ids().to_vec()
    }

    #[getter]
    fn test_ids(&self) -> Vec<usize> {
        self.inner.test_ids().to_vec()
    }

    fn features(&self, id: usize) -> PyResult<Vec<f64>> {
        if id >= self.inner.len() {
            return Err(PyValueError::new_err(format!("id {id} out of range")));
        }
        Ok(self.inner.features(id).to_vec())
    }
}

/// One curve row: `(iteration, labeled_fraction, test_accuracy,
/// mean_indicator, disc_loss, seconds)`.
pub type CurveRow = (usize, f64, f64, f64, Option<f64>, f64);

/// Runs one active-learning trial. `config` is optional TOML using the
/// same keys as the `sraal run` config file (dataset keys are ignored).
#[pyfunction]
#[pyo3(signature = (dataset, strategy, seed=0, config=None))]
pub fn run_experiment(
    py: Python<'_>,
    dataset: &PyDataset,
    strategy: &str,
    seed: u64,
    config: Option<&str>,
) -> PyResult<Vec<CurveRow>> {
    let strategy: Strategy = strategy.parse().map_err(to_py)?;
    let al: AlConfig = match config {
        Some(text) => RunConfig::parse(text).map_err(to_py)?.al_config(),
        None => AlConfig::default(),
    };
    let ds = &dataset.inner;
    let curve = py.detach(|| run_core(ds, &al, strategy, seed)).map_err(to_py)?;
    Ok(curve
        .records
        .into_iter()
        .map(|r| (r.iteration, r.labeled_fraction, r.test_accuracy, r.mean_indicator, r.disc_loss, r.seconds))
        .collect())
}

#[pymodule]
pub fn sraal(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(oui_score, m)?)?;
    m.add_function(wrap_pyfunction!(entropy_indicator, m)?)?;
    m.add_function(wrap_pyfunction!(sd_indicator, m)?)?;
    m.add_function(wrap_pyfunction!(variance, m)?)?;
    m.add_function(wrap_pyfunction!(min_var, m)?)?;
    m.add_function(wrap_pyfunction!(kl_gaussian, m)?)?;
    m.add_function(wrap_pyfunction!(disc_loss, m)?)?;
    m.add_function(wrap_pyfunction!(binary_disc_loss, m)?)?;
    m.add_function(wrap_pyfunction!(gen_adv_loss, m)?)?;
    m.add_function(wrap_pyfunction!(greedy_kcenter, m)?)?;
    m.add_function(wrap_pyfunction!(covering_radius, m)?)?;
    m.add_function(wrap_pyfunction!(gradcheck, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_class::<PyDataset>()?;
    Ok(())
}
