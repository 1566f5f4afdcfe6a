//! Python bindings for `iso-core`.
//!
//! The module is importable as `isoplay`. Strategies and losses cross the
//! boundary as plain lists of floats; metrics come back as dicts.

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use iso_core::harness::{self, HarnessError, RunConfig};
use iso_core::metrics::{self, BoundTerms, RunMetrics};
use iso_core::{game, generators, learning};

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn harness_err(e: HarnessError) -> PyErr {
    match e {
        HarnessError::Config(_) => PyValueError::new_err(e.to_string()),
        HarnessError::Runtime(_) => PyRuntimeError::new_err(e.to_string()),
        HarnessError::Io(_) => PyIOError::new_err(e.to_string()),
    }
}

fn strategies(raw: Vec<Vec<f64>>) -> PyResult<Vec<game::MixedStrategy>> {
    raw.into_iter()
        .map(|p| game::MixedStrategy::new(p).map_err(value_err))
        .collect()
}

/// Bilinear game: features per player and joint action, plus context vectors.
#[pyclass(name = "GameSpec", module = "isoplay", frozen)]
struct PyGameSpec {
    inner: game::GameSpec,
}

#[pymethods]
impl PyGameSpec {
    /// `features[j]` is player `j`'s flattened `K^J x d` block in joint-action order.
    #[new]
    fn new(
        players: usize,
        actions: usize,
        dim: usize,
        features: Vec<Vec<f64>>,
        contexts: Vec<Vec<f64>>,
    ) -> PyResult<Self> {
        let inner =
            game::GameSpec::new(players, actions, dim, features, contexts).map_err(value_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let inner = game::GameSpec::from_toml_str(text).map_err(value_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn random_bilinear(
        players: usize,
        actions: usize,
        dim: usize,
        contexts: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let inner = generators::random_bilinear(players, actions, dim, contexts, seed)
            .map_err(value_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn zero_sum_2p(actions: usize, seed: u64) -> PyResult<Self> {
        let inner = generators::zero_sum_2p(actions, seed).map_err(value_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn cyclic_demo() -> Self {
        Self {
            inner: generators::cyclic_demo(),
        }
    }

    #[staticmethod]
    fn separable(players: usize, actions: usize, contexts: usize, seed: u64) -> PyResult<Self> {
        let inner = generators::separable(players, actions, contexts, seed).map_err(value_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn players(&self) -> usize {
        self.inner.num_players()
    }

    #[getter]
    fn actions(&self) -> usize {
        self.inner.num_actions()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.feature_dim()
    }

    #[getter]
    fn contexts(&self) -> usize {
        self.inner.num_contexts()
    }

    fn context(&self, z: usize) -> PyResult<Vec<f64>> {
        if z >= self.inner.num_contexts() {
            return Err(value_err(format!("context {z} out of range")));
        }
        Ok(self.inner.context(z).to_vec())
    }

    /// Loss vector of `player` against the opponents' strategies (in player order, skipping `player`).
    fn loss_vector(
        &self,
        player: usize,
        opponents: Vec<Vec<f64>>,
        context: usize,
    ) -> PyResult<Vec<f64>> {
        let opponents = strategies(opponents)?;
        let loss =
            game::loss_vector(&self.inner, player, &opponents, context).map_err(value_err)?;
        Ok(loss.values().to_vec())
    }

    fn expected_cost(
        &self,
        player: usize,
        profile: Vec<Vec<f64>>,
        context: usize,
    ) -> PyResult<f64> {
        let profile = game::JointProfile::new(strategies(profile)?);
        game::expected_cost(&self.inner, player, &profile, context).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "GameSpec(players={}, actions={}, dim={}, contexts={})",
            self.inner.num_players(),
            self.inner.num_actions(),
            self.inner.feature_dim(),
            self.inner.num_contexts()
        )
    }
}

/// Per-player strategies and losses of one round.
type RoundLists = (Vec<Vec<f64>>, Vec<Vec<f64>>);

/// One optimistic Hedge learner per (player, context).
#[pyclass(name = "LearnerBank", module = "isoplay")]
struct PyLearnerBank {
    inner: learning::LearnerBank,
}

#[pymethods]
impl PyLearnerBank {
    #[new]
    fn new(players: usize, contexts: usize, actions: usize, eta: f64) -> PyResult<Self> {
        let inner =
            learning::LearnerBank::new(players, contexts, actions, eta).map_err(value_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn for_game(spec: &PyGameSpec, eta: f64) -> PyResult<Self> {
        let inner = learning::LearnerBank::for_game(&spec.inner, eta).map_err(value_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_snapshot(text: &str) -> PyResult<Self> {
        let inner = learning::LearnerBank::from_snapshot(text).map_err(value_err)?;
        Ok(Self { inner })
    }

    fn to_snapshot(&self) -> String {
        self.inner.to_snapshot()
    }

    #[getter]
    fn eta(&self) -> f64 {
        self.inner.eta()
    }

    fn distribution(&self, player: usize, context: usize) -> PyResult<Vec<f64>> {
        let w = self
            .inner
            .current_distribution(player, context)
            .map_err(value_err)?;
        Ok(w.probs().to_vec())
    }

    /// `(cumulative_loss, optimism_hint, updates_applied)` for one learner.
    fn state(&self, player: usize, context: usize) -> PyResult<(Vec<f64>, Vec<f64>, u64)> {
        let s = self.inner.state(player, context).map_err(value_err)?;
        Ok((
            s.cumulative_loss.clone(),
            s.optimism_hint.clone(),
            s.updates_applied,
        ))
    }

    fn apply_update(&mut self, player: usize, context: usize, loss: Vec<f64>) -> PyResult<()> {
        let loss = game::LossVector::new(loss).map_err(value_err)?;
        self.inner
            .apply_update(player, context, &loss)
            .map_err(value_err)
    }

    /// Plays one routed round; returns `(strategies, losses)` per player.
    fn play_round(
        &mut self,
        spec: &PyGameSpec,
        predictions: Vec<usize>,
        realized: usize,
    ) -> PyResult<RoundLists> {
        let out = learning::iso_grpo_round(&mut self.inner, &predictions, realized, &spec.inner)
            .map_err(value_err)?;
        let strategies = out
            .profile
            .strategies()
            .iter()
            .map(|s| s.probs().to_vec())
            .collect();
        let losses = out.losses.iter().map(|l| l.values().to_vec()).collect();
        Ok((strategies, losses))
    }
}

fn bound_dict<'py>(py: Python<'py>, b: &BoundTerms) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("init", b.init)?;
    d.set_item("mistakes", b.mistakes)?;
    d.set_item("variation", b.variation)?;
    d.set_item("total", b.total)?;
    d.set_item("total_slack2", b.total_slack2)?;
    Ok(d)
}

fn metrics_dict<'py>(py: Python<'py>, m: &RunMetrics) -> PyResult<Bound<'py, PyDict>> {
    let players = m
        .players
        .iter()
        .map(|p| {
            let d = PyDict::new(py);
            d.set_item("mistakes", p.mistakes)?;
            d.set_item("contextual_regret", p.contextual_regret)?;
            d.set_item("external_regret", p.external_regret)?;
            d.set_item("variation", p.variation.clone())?;
            d.set_item("bound", bound_dict(py, &p.bound)?)?;
            d.set_item("exact_bound_ok", p.exact_bound_ok)?;
            d.set_item("slack2_bound_ok", p.slack2_bound_ok)?;
            d.set_item("average_strategy", p.average_strategy.clone())?;
            Ok(d)
        })
        .collect::<PyResult<Vec<_>>>()?;
    let cce = PyDict::new(py);
    cce.set_item("per_player", m.cce.per_player.clone())?;
    cce.set_item("epsilon", m.cce.epsilon)?;
    cce.set_item("bound_rhs", m.cce.bound_rhs)?;
    cce.set_item("bound_rhs_max", m.cce.bound_rhs_max)?;
    cce.set_item("satisfied", m.cce.satisfied)?;
    let d = PyDict::new(py);
    d.set_item("eta", m.eta)?;
    d.set_item("players", players)?;
    d.set_item("cce", cce)?;
    Ok(d)
}

/// Finished run: realized contexts, metrics and CSV renderings.
#[pyclass(name = "RunResult", module = "isoplay", frozen)]
struct PyRunResult {
    inner: harness::RunResult,
}

#[pymethods]
impl PyRunResult {
    #[getter]
    fn run_id(&self) -> &str {
        &self.inner.run_id
    }

    #[getter]
    fn eta(&self) -> f64 {
        self.inner.eta()
    }

    #[getter]
    fn contexts(&self) -> Vec<usize> {
        self.inner.contexts.clone()
    }

    #[getter]
    fn spec(&self) -> PyGameSpec {
        PyGameSpec {
            inner: self.inner.spec.clone(),
        }
    }

    fn metrics<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        metrics_dict(py, &self.inner.metrics)
    }

    fn trace_csv(&self) -> String {
        harness::trace_csv(&self.inner)
    }

    fn summary_csv(&self) -> String {
        let spec = &self.inner.spec;
        harness::summary_header(spec.num_players(), spec.num_contexts())
            + &harness::summary_row(&self.inner)
    }
}

/// Runs a TOML run config for one seed without touching the filesystem
/// (except for `game.kind = "file"` specs).
#[pyfunction]
#[pyo3(signature = (config_toml, seed = 0))]
fn run(config_toml: &str, seed: u64) -> PyResult<PyRunResult> {
    let config = RunConfig::from_toml_str(config_toml).map_err(harness_err)?;
    let inner =
        harness::execute(&config, seed, &harness::single_run_id(seed)).map_err(harness_err)?;
    Ok(PyRunResult { inner })
}

/// Runs a config for one seed and writes traces, summary and config echo into `out_dir`.
#[pyfunction]
#[pyo3(signature = (config_path, out_dir, seed = 0))]
fn run_to_dir(
    config_path: std::path::PathBuf,
    out_dir: std::path::PathBuf,
    seed: u64,
) -> PyResult<PyRunResult> {
    let config = RunConfig::load(&config_path).map_err(harness_err)?;
    let inner = harness::run_single(&config, seed, &out_dir).map_err(harness_err)?;
    Ok(PyRunResult { inner })
}

#[pyfunction]
fn eta_rule(contexts: usize, actions: usize, mistakes: u64, sum_variation: f64) -> f64 {
    metrics::eta_rule(contexts, actions, mistakes, sum_variation)
}

#[pyfunction]
fn rvu_bound<'py>(
    py: Python<'py>,
    contexts: usize,
    actions: usize,
    eta: f64,
    mistakes: u64,
    variations: Vec<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let b = metrics::rvu_bound(contexts, actions, eta, mistakes, &variations).map_err(value_err)?;
    bound_dict(py, &b)
}

#[pyfunction]
fn softmax(logits: Vec<f64>) -> Vec<f64> {
    learning::softmax(&logits)
}

#[pymodule]
fn isoplay(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGameSpec>()?;
    m.add_class::<PyLearnerBank>()?;
    m.add_class::<PyRunResult>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(run_to_dir, m)?)?;
    m.add_function(wrap_pyfunction!(eta_rule, m)?)?;
    m.add_function(wrap_pyfunction!(rvu_bound, m)?)?;
    m.add_function(wrap_pyfunction!(softmax, m)?)?;
    Ok(())
}
