//! Python bindings: `pyedasim.Config`, `pyedasim.run`, `pyedasim.compare`,
//! `pyedasim.sweep` and the per-byte radio cost helpers.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use edasim::energy::{rx_energy as core_rx, tx_energy as core_tx};
use edasim::experiment::{self, ExperimentError};
use edasim::output;
use edasim::sim::PacketCounts;
use edasim::{Constituent, PolicyKind, SimConfig, SimError, SubCategory, SweepParam, SweepSpec};

fn config_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn sim_err(e: SimError) -> PyErr {
    match e {
        SimError::Config(c) => config_err(c),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn experiment_err(e: ExperimentError) -> PyErr {
    match e {
        ExperimentError::InvalidSpec(_) => PyValueError::new_err(e.to_string()),
        ExperimentError::Sim { .. } => PyRuntimeError::new_err(e.to_string()),
    }
}

fn parse_policy(name: &str) -> PyResult<PolicyKind> {
    match name {
        "random" => Ok(PolicyKind::Random),
        "selective" => Ok(PolicyKind::Selective),
        other => Err(PyValueError::new_err(format!("unknown policy {other:?}"))),
    }
}

fn parse_policies(name: &str) -> PyResult<Vec<PolicyKind>> {
    if name == "both" {
        Ok(PolicyKind::ALL.to_vec())
    } else {
        parse_policy(name).map(|p| vec![p])
    }
}

fn counts_dict<'py>(py: Python<'py>, c: PacketCounts) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("individual", c.individual)?;
    d.set_item("local", c.local)?;
    d.set_item("global", c.global)?;
    Ok(d)
}

/// Simulation parameters. Defaults match `SimConfig::default()` in Rust.
#[pyclass(name = "Config", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: SimConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    fn new() -> Self {
        Self {
            inner: SimConfig::default(),
        }
    }

    /// Parse a JSON document; missing keys take their defaults.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        SimConfig::from_json_str(text)
            .map(|inner| Self { inner })
            .map_err(config_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        edasim::load_config(&path)
            .map(|inner| Self { inner })
            .map_err(config_err)
    }

    fn to_json(&self) -> String {
        self.inner.to_json_string()
    }

    fn with_policy(&self, policy: &str) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.with_policy(parse_policy(policy)?),
        })
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(config_err)
    }

    #[getter]
    fn policy(&self) -> &'static str {
        self.inner.protocol.policy.name()
    }

    #[getter]
    fn node_count(&self) -> u32 {
        self.inner.deployment.node_count
    }

    #[setter]
    fn set_node_count(&mut self, v: u32) {
        self.inner.deployment.node_count = v;
    }

    #[getter]
    fn tx_radius(&self) -> f64 {
        self.inner.deployment.tx_radius
    }

    #[setter]
    fn set_tx_radius(&mut self, v: f64) {
        self.inner.deployment.tx_radius = v;
    }

    #[getter]
    fn sensing_radius(&self) -> f64 {
        self.inner.deployment.sensing_radius
    }

    #[setter]
    fn set_sensing_radius(&mut self, v: f64) {
        self.inner.deployment.sensing_radius = v;
    }

    #[getter]
    fn event_rate(&self) -> f64 {
        self.inner.traffic.event_rate
    }

    #[setter]
    fn set_event_rate(&mut self, v: f64) {
        self.inner.traffic.event_rate = v;
    }

    #[getter]
    fn max_events(&self) -> u64 {
        self.inner.traffic.max_events
    }

    #[setter]
    fn set_max_events(&mut self, v: u64) {
        self.inner.traffic.max_events = v;
    }

    #[getter]
    fn max_sim_time(&self) -> f64 {
        self.inner.experiment.max_sim_time
    }

    #[setter]
    fn set_max_sim_time(&mut self, v: f64) {
        self.inner.experiment.max_sim_time = v;
    }

    #[getter]
    fn battery_capacity(&self) -> f64 {
        self.inner.energy.battery_capacity
    }

    #[setter]
    fn set_battery_capacity(&mut self, v: f64) {
        self.inner.energy.battery_capacity = v;
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(policy={}, nodes={}, tx_radius={}, sensing_radius={})",
            self.policy(),
            self.inner.deployment.node_count,
            self.inner.deployment.tx_radius,
            self.inner.deployment.sensing_radius
        )
    }
}

/// Outcome of one run.
#[pyclass(name = "SimResult", frozen)]
struct PySimResult {
    inner: edasim::SimResult,
}

#[pymethods]
impl PySimResult {
    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn policy(&self) -> String {
        self.inner.policy.clone()
    }

    #[getter]
    fn monitored_node(&self) -> u32 {
        self.inner.monitored_node.0
    }

    #[getter]
    fn lifetime(&self) -> f64 {
        self.inner.lifetime
    }

    #[getter]
    fn censored(&self) -> bool {
        self.inner.censored
    }

    #[getter]
    fn end_time(&self) -> f64 {
        self.inner.end_time
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.ledgers.len()
    }

    #[getter]
    fn env_events(&self) -> u64 {
        self.inner.env_events
    }

    #[getter]
    fn generated(&self) -> u64 {
        self.inner.generated
    }

    #[getter]
    fn delivered(&self) -> u64 {
        self.inner.delivered
    }

    #[getter]
    fn dropped(&self) -> u64 {
        self.inner.dropped
    }

    #[getter]
    fn collisions(&self) -> u64 {
        self.inner.collisions
    }

    /// Ledger of one node (the monitored node by default) as
    /// `{constituent: {subcategory: joules}}`.
    #[pyo3(signature = (node=None))]
    fn ledger<'py>(&self, py: Python<'py>, node: Option<usize>) -> PyResult<Bound<'py, PyDict>> {
        let ledger = match node {
            None => self.inner.monitored_ledger(),
            Some(i) => self
                .inner
                .ledgers
                .get(i)
                .ok_or_else(|| PyValueError::new_err(format!("no node {i}")))?,
        };
        let out = PyDict::new(py);
        for c in Constituent::ALL {
            let inner = PyDict::new(py);
            for sub in SubCategory::ALL.iter().filter(|s| s.constituent() == c) {
                inner.set_item(sub.name(), ledger.get(*sub))?;
            }
            out.set_item(c.name(), inner)?;
        }
        Ok(out)
    }

    /// Per-constituent totals of the monitored node.
    fn totals<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let ledger = self.inner.monitored_ledger();
        let out = PyDict::new(py);
        for c in Constituent::ALL {
            out.set_item(c.name(), ledger.constituent_total(c))?;
        }
        Ok(out)
    }

    /// Packet counters of the monitored node.
    fn counts<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        counts_dict(py, self.inner.monitored_counts())
    }

    fn ledger_csv(&self) -> String {
        output::ledger_csv(&self.inner)
    }

    fn summary_csv(&self) -> String {
        output::summary_csv(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "SimResult(policy={}, seed={}, monitored={}, lifetime={}, censored={})",
            self.inner.policy,
            self.inner.seed,
            self.inner.monitored_node.0,
            output::fmt_num(self.inner.lifetime),
            self.inner.censored
        )
    }
}

/// Simulate one seed.
#[pyfunction]
#[pyo3(signature = (config, seed=1, policy=None))]
fn run(py: Python<'_>, config: &PyConfig, seed: u64, policy: Option<&str>) -> PyResult<PySimResult> {
    let cfg = match policy {
        Some(p) => config.inner.with_policy(parse_policy(p)?),
        None => config.inner.clone(),
    };
    let inner = py.detach(|| edasim::run(&cfg, seed)).map_err(sim_err)?;
    Ok(PySimResult { inner })
}

/// Run both policies on `seeds` matched seeds and return summary statistics.
#[pyfunction]
#[pyo3(signature = (config, seeds=50, parallel=true))]
fn compare<'py>(py: Python<'py>, config: &PyConfig, seeds: u32, parallel: bool) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config.inner.clone();
    let rep = py
        .detach(|| experiment::compare_policies(&cfg, seeds, parallel))
        .map_err(experiment_err)?;
    let out = PyDict::new(py);
    out.set_item("seeds", rep.pairs.len())?;
    out.set_item("random_mean_lifetime", rep.random.mean_lifetime)?;
    out.set_item("selective_mean_lifetime", rep.selective.mean_lifetime)?;
    out.set_item("random_median_lifetime", rep.random.median_lifetime)?;
    out.set_item("selective_median_lifetime", rep.selective.median_lifetime)?;
    out.set_item("selective_win_rate", rep.selective_win_rate)?;
    out.set_item("global_rate", rep.global_rate)?;
    out.set_item("local_rate", rep.local_rate)?;
    out.set_item("individual_rate", rep.individual_rate)?;
    out.set_item("csv", output::compare_csv(&rep))?;
    Ok(out)
}

/// Sweep `sensing_radius` or `tx_radius` over `steps` evenly spaced values.
#[pyfunction]
#[pyo3(signature = (config, param, min, max, steps=8, seeds=20, policy="both"))]
#[allow(clippy::too_many_arguments)]
fn sweep<'py>(
    py: Python<'py>,
    config: &PyConfig,
    param: &str,
    min: f64,
    max: f64,
    steps: u32,
    seeds: u32,
    policy: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let param = match param {
        "sensing_radius" => SweepParam::SensingRadius,
        "tx_radius" => SweepParam::TxRadius,
        other => return Err(PyValueError::new_err(format!("unknown sweep parameter {other:?}"))),
    };
    let spec = SweepSpec {
        param,
        min,
        max,
        steps,
        seeds,
    };
    let policies = parse_policies(policy)?;
    let cfg = config.inner.clone();
    let outcome = py
        .detach(|| experiment::sweep(&cfg, &spec, &policies, true))
        .map_err(experiment_err)?;
    let means = PyDict::new(py);
    for p in &outcome.points {
        let entry = match means.get_item(p.policy.name())? {
            Some(list) => list,
            None => {
                let list = pyo3::types::PyList::empty(py).into_any();
                means.set_item(p.policy.name(), &list)?;
                list
            }
        };
        entry.call_method1("append", ((p.param_value, p.mean_lifetime),))?;
    }
    let argmax = PyDict::new(py);
    for (p, _, value) in &outcome.argmax {
        argmax.set_item(p.name(), *value)?;
    }
    let out = PyDict::new(py);
    out.set_item("mean_lifetime", means)?;
    out.set_item("argmax", argmax)?;
    out.set_item("csv", output::sweep_csv(&outcome))?;
    Ok(out)
}

/// Joules to send `bytes` over `distance` meters under the config's radio model.
#[pyfunction]
fn tx_energy(config: &PyConfig, bytes: u32, distance: f64) -> f64 {
    core_tx(bytes, distance, &config.inner.energy)
}

/// Joules to receive `bytes` under the config's radio model.
#[pyfunction]
fn rx_energy(config: &PyConfig, bytes: u32) -> f64 {
    core_rx(bytes, &config.inner.energy)
}

#[pymodule]
fn pyedasim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PySimResult>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(tx_energy, m)?)?;
    m.add_function(wrap_pyfunction!(rx_energy, m)?)?;
    Ok(())
}
