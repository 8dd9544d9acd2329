//! Python bindings for the blicket environment, hypothesis engine, trial
//! harness and statistics.

use std::sync::Arc;

use blicket_core::analysis::{self, AnalysisError};
use blicket_core::backend::{ChatBackend, HttpBackend, SimulatedSampler};
use blicket_core::dsl;
use blicket_core::env::{
    self as core_env, parse_command, render_initial_observation, BlicketMask, EnvConfig, EnvState,
    OpeningVariant, Placement, Rule, Transcript,
};
use blicket_core::harness::{self, AgentKind, ScenarioKind, TrialConfig, TrialRecord};
use blicket_core::hypothesis::{self as hyp, HypothesisSpace, ObservationPair};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_rule(rule: &str) -> PyResult<Rule> {
    rule.parse().map_err(value_err)
}

fn stats_err(e: AnalysisError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// One episode of the text environment.
#[pyclass(name = "Env")]
pub struct PyEnv {
    state: EnvState,
    transcript: Transcript,
}

#[pymethods]
impl PyEnv {
    #[new]
    #[pyo3(signature = (num_objects, rule, num_blickets = 2, horizon = 32, seed = 0))]
    fn new(
        num_objects: usize,
        rule: &str,
        num_blickets: usize,
        horizon: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let state = core_env::init_env(EnvConfig {
            num_objects,
            num_blickets,
            rule: parse_rule(rule)?,
            horizon,
            seed,
        })
        .map_err(value_err)?;
        Ok(Self::from_state(state))
    }

    /// Episode with an explicit blicket set and starting placement.
    #[staticmethod]
    #[pyo3(signature = (blickets, rule, placement, horizon = 32))]
    fn fixed(
        blickets: Vec<bool>,
        rule: &str,
        placement: Vec<bool>,
        horizon: usize,
    ) -> PyResult<Self> {
        if blickets.len() != placement.len() {
            return Err(value_err("blickets and placement differ in length"));
        }
        let state = EnvState::new(
            BlicketMask::from_bools(&blickets),
            parse_rule(rule)?,
            Placement::from_bools(&placement),
            horizon,
        );
        Ok(Self::from_state(state))
    }

    /// Applies one text command; returns (observation text, light on).
    fn step(&mut self, command: &str) -> PyResult<(String, bool)> {
        let action = parse_command(command, self.state.num_objects()).map_err(value_err)?;
        let (next, event) = self.state.apply_action(action).map_err(value_err)?;
        self.transcript.push(&event);
        self.state = next;
        Ok((event.text, event.light_on))
    }

    #[getter]
    fn num_objects(&self) -> usize {
        self.state.num_objects()
    }

    #[getter]
    fn placement(&self) -> Vec<bool> {
        self.state.placement.to_vec()
    }

    #[getter]
    fn light_on(&self) -> bool {
        self.state.light_on
    }

    #[getter]
    fn step_count(&self) -> usize {
        self.state.step
    }

    #[getter]
    fn done(&self) -> bool {
        self.state.is_closed()
    }

    #[getter]
    fn blickets(&self) -> Vec<bool> {
        self.state.blicket_mask.to_vec()
    }

    #[getter]
    fn rule(&self) -> String {
        self.state.rule.to_string()
    }

    #[getter]
    fn transcript(&self) -> String {
        self.transcript.as_str().to_string()
    }

    fn __repr__(&self) -> String {
        format!(
            "Env(num_objects={}, rule={}, step={}, light_on={})",
            self.state.num_objects(),
            self.state.rule,
            self.state.step,
            self.state.light_on
        )
    }
}

impl PyEnv {
    fn from_state(state: EnvState) -> Self {
        let opening = render_initial_observation(&state, OpeningVariant::Default);
        Self {
            transcript: Transcript::new(&opening, "\n\n"),
            state,
        }
    }
}

/// Hypotheses still consistent with the observations seen so far.
#[pyclass(name = "Belief")]
pub struct PyBelief {
    inner: hyp::Belief,
}

#[pymethods]
impl PyBelief {
    #[new]
    fn new(num_objects: usize) -> PyResult<Self> {
        let space = HypothesisSpace::new(num_objects).map_err(value_err)?;
        Ok(Self {
            inner: hyp::Belief::uniform(space),
        })
    }

    /// New belief keeping hypotheses that predict `light_on` at `placement`.
    fn filter(&self, placement: Vec<bool>, light_on: bool) -> PyResult<Self> {
        let obs = ObservationPair::new(self.placement(placement)?, light_on);
        Ok(Self {
            inner: self.inner.filter(&obs).map_err(value_err)?,
        })
    }

    fn entropy(&self) -> PyResult<f64> {
        self.inner.entropy().map_err(value_err)
    }

    fn info_gain(&self, placement: Vec<bool>, light_on: bool) -> PyResult<f64> {
        let obs = ObservationPair::new(self.placement(placement)?, light_on);
        self.inner.info_gain(&obs).map_err(value_err)
    }

    fn expected_info_gain(&self, placement: Vec<bool>) -> PyResult<f64> {
        let x = self.placement(placement)?;
        self.inner.expected_info_gain(&x).map_err(value_err)
    }

    #[getter]
    fn support_size(&self) -> usize {
        self.inner.support_size()
    }

    #[getter]
    fn distinct_functions(&self) -> usize {
        self.inner.distinct_functions()
    }

    fn is_resolved(&self) -> bool {
        self.inner.is_resolved()
    }

    /// Surviving hypotheses in DSL form.
    fn hypotheses(&self) -> Vec<String> {
        self.inner
            .support()
            .map(|h| dsl::render_hypothesis(&h))
            .collect()
    }

    fn __len__(&self) -> usize {
        self.inner.support_size()
    }
}

impl PyBelief {
    fn placement(&self, values: Vec<bool>) -> PyResult<Placement> {
        let n = self.inner.space().num_objects();
        if values.len() != n {
            return Err(value_err(format!(
                "expected {n} placement flags, got {}",
                values.len()
            )));
        }
        Ok(Placement::from_bools(&values))
    }
}

/// Parses one DSL line into (blicket flags, rule).
#[pyfunction]
fn parse_hypothesis(text: &str, num_objects: usize) -> PyResult<(Vec<bool>, String)> {
    let h = dsl::parse_hypothesis(text, num_objects).map_err(value_err)?;
    Ok((h.mask.to_vec(), h.rule.to_string()))
}

#[pyfunction]
fn render_hypothesis(blickets: Vec<bool>, rule: &str) -> PyResult<String> {
    let h = hyp::Hypothesis::new(BlicketMask::from_bools(&blickets), parse_rule(rule)?);
    Ok(dsl::render_hypothesis(&h))
}

/// All well-formed hypotheses found in free text, deduplicated.
#[pyfunction]
fn extract_hypotheses(text: &str, num_objects: usize) -> Vec<String> {
    dsl::extract_hypotheses(text, num_objects)
        .iter()
        .map(dsl::render_hypothesis)
        .collect()
}

fn backend_for(config: &TrialConfig) -> PyResult<Option<Arc<dyn ChatBackend>>> {
    if let Some(backend) = &config.backend {
        let http = HttpBackend::new(backend.clone()).map_err(value_err)?;
        return Ok(Some(Arc::new(http)));
    }
    match config.agent_kind {
        AgentKind::Sampling => {
            let space = HypothesisSpace::new(config.num_objects).map_err(value_err)?;
            Ok(Some(Arc::new(SimulatedSampler::full_space(space))))
        }
        kind if kind.needs_backend() => Err(value_err(format!(
            "agent {} needs a backend section in the config",
            kind.as_str()
        ))),
        _ => Ok(None),
    }
}

fn run_config(py: Python<'_>, config: TrialConfig) -> PyResult<String> {
    let backend = backend_for(&config)?;
    let record = py
        .detach(|| harness::run_trial(&config, backend))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    harness::record_to_line(&record).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Runs one trial and returns its record as a JSON line. The sampling agent
/// uses the built-in simulated sampler.
#[pyfunction]
#[pyo3(signature = (num_objects, rule, agent = "oracle", seed = 0, num_blickets = 2, horizon = 32))]
fn run_trial(
    py: Python<'_>,
    num_objects: usize,
    rule: &str,
    agent: &str,
    seed: u64,
    num_blickets: usize,
    horizon: usize,
) -> PyResult<String> {
    let kind: AgentKind = agent.parse().map_err(value_err)?;
    let mut config = TrialConfig::new(num_objects, parse_rule(rule)?, kind, seed);
    config.num_blickets = num_blickets;
    config.horizon = horizon;
    run_config(py, config)
}

/// Runs a trial from a full JSON trial config. An HTTP backend reads its
/// key from the environment variable the config names.
#[pyfunction]
fn run_trial_config(py: Python<'_>, config_json: &str) -> PyResult<String> {
    let config: TrialConfig = serde_json::from_str(config_json).map_err(value_err)?;
    run_config(py, config)
}

/// Per-trial metrics of a record JSON line, as JSON.
#[pyfunction]
fn trial_metrics(record_json: &str) -> PyResult<String> {
    let record: TrialRecord = serde_json::from_str(record_json).map_err(value_err)?;
    let space = HypothesisSpace::new(record.config.num_objects).map_err(value_err)?;
    let metrics = analysis::trial_metrics(&record, space).map_err(stats_err)?;
    serde_json::to_string(&metrics).map_err(value_err)
}

/// (training transcript, test transcript, question) for a scenario kind.
#[pyfunction]
fn scenario(kind: &str) -> PyResult<(String, String, String)> {
    let kind: ScenarioKind = kind.parse().map_err(value_err)?;
    let s = harness::build_scenario(kind);
    Ok((s.training_transcript, s.test_transcript, s.question))
}

#[pyfunction]
fn machine_output(blickets: Vec<bool>, rule: &str, placement: Vec<bool>) -> PyResult<bool> {
    if blickets.len() != placement.len() {
        return Err(value_err("blickets and placement differ in length"));
    }
    Ok(core_env::machine_output(
        parse_rule(rule)?,
        &BlicketMask::from_bools(&blickets),
        &Placement::from_bools(&placement),
    ))
}

/// (rho, p value)
#[pyfunction]
fn spearman(xs: Vec<f64>, ys: Vec<f64>) -> PyResult<(f64, f64)> {
    let c = analysis::spearman(&xs, &ys).map_err(stats_err)?;
    Ok((c.rho, c.p_value))
}

/// (t, df, p value, stars)
#[pyfunction]
fn welch_t_test(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, f64, f64, String)> {
    let t = analysis::welch_t_test(&a, &b).map_err(stats_err)?;
    Ok((t.t, t.df, t.p_value, t.stars.to_string()))
}

#[pyfunction]
fn normalized_progress(rho_model: f64, rho_random: f64) -> PyResult<f64> {
    analysis::normalized_progress(rho_model, rho_random).map_err(stats_err)
}

#[pyfunction]
fn elimination_progress(total: usize, remaining: usize) -> PyResult<f64> {
    analysis::elimination_progress(total, remaining).map_err(stats_err)
}

#[pymodule]
fn blicket(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEnv>()?;
    m.add_class::<PyBelief>()?;
    m.add_function(wrap_pyfunction!(parse_hypothesis, m)?)?;
    m.add_function(wrap_pyfunction!(render_hypothesis, m)?)?;
    m.add_function(wrap_pyfunction!(extract_hypotheses, m)?)?;
    m.add_function(wrap_pyfunction!(run_trial, m)?)?;
    m.add_function(wrap_pyfunction!(run_trial_config, m)?)?;
    m.add_function(wrap_pyfunction!(trial_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(scenario, m)?)?;
    m.add_function(wrap_pyfunction!(machine_output, m)?)?;
    m.add_function(wrap_pyfunction!(spearman, m)?)?;
    m.add_function(wrap_pyfunction!(welch_t_test, m)?)?;
    m.add_function(wrap_pyfunction!(normalized_progress, m)?)?;
    m.add_function(wrap_pyfunction!(elimination_progress, m)?)?;
    Ok(())
}
