//! Python bindings: models, events, path simulation, the final-size oracle
//! and the estimators.

use std::collections::BTreeMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use epirare::estimators::{
    self, IbpsOptions, Instrumental, Schedule, TemporalOptions, TimeGrid, Variant, WeightRule,
};
use epirare::harness::{parse_config, sweep as run_sweep, Overrides};
use epirare::models::{self, StopRule};
use epirare::{
    EpidemicPath, EventSpec, HivParams, ModelParams, ReedFrostParams, SeedSpec, SirParams,
};

fn err(e: epirare::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn seed_spec(seed: u64, replication: u64) -> SeedSpec {
    SeedSpec::new(seed).with_replication(replication)
}

#[pyclass(name = "Model", frozen, from_py_object)]
#[derive(Clone)]
struct Model {
    inner: ModelParams,
}

#[pymethods]
impl Model {
    #[staticmethod]
    #[pyo3(signature = (lam, gamma, s0, i0, scaling = "mass_action", n = None))]
    fn sir(
        lam: f64,
        gamma: f64,
        s0: u64,
        i0: u64,
        scaling: &str,
        n: Option<f64>,
    ) -> PyResult<Self> {
        let mut p = match scaling {
            "mass_action" => SirParams::mass_action(lam, gamma, s0, i0),
            "unscaled" => SirParams::unscaled(lam, gamma, s0, i0),
            other => return Err(PyValueError::new_err(format!("unknown scaling `{other}`"))),
        };
        if let Some(n) = n {
            p.n = n;
        }
        p.validate().map_err(err)?;
        Ok(Model {
            inner: ModelParams::Sir(p),
        })
    }

    #[staticmethod]
    fn reed_frost(q: f64, s0: u64, i0: u64) -> PyResult<Self> {
        Ok(Model {
            inner: ModelParams::ReedFrost(ReedFrostParams::new(q, s0, i0).map_err(err)?),
        })
    }

    #[staticmethod]
    #[pyo3(signature = (lam, gamma1, gamma2, c, s0, i0, detection_ages = Vec::new()))]
    fn hiv(
        lam: f64,
        gamma1: f64,
        gamma2: f64,
        c: f64,
        s0: u64,
        i0: u64,
        detection_ages: Vec<f64>,
    ) -> PyResult<Self> {
        let p = HivParams {
            lambda: lam,
            gamma1,
            gamma2,
            c,
            s0,
            i0,
            initial_detection_ages: detection_ages,
        };
        p.validate().map_err(err)?;
        Ok(Model {
            inner: ModelParams::Hiv(p),
        })
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.inner.name()
    }

    fn __repr__(&self) -> String {
        format!("Model({:?})", self.inner)
    }
}

#[pyclass(name = "Event", frozen, from_py_object)]
#[derive(Clone)]
struct Event {
    inner: EventSpec,
}

impl Event {
    fn checked(inner: EventSpec) -> PyResult<Self> {
        inner.validate().map_err(err)?;
        Ok(Event { inner })
    }
}

#[pymethods]
impl Event {
    #[staticmethod]
    fn duration(t: f64) -> PyResult<Self> {
        Event::checked(EventSpec::Duration { t })
    }

    #[staticmethod]
    fn final_size(n_c: u64) -> PyResult<Self> {
        Event::checked(EventSpec::FinalSize { n_c })
    }

    #[staticmethod]
    fn incidence(t: f64, n_i: u64) -> PyResult<Self> {
        Event::checked(EventSpec::Incidence { t, n_i })
    }

    #[staticmethod]
    fn diagnoses_increment(t: f64, u: f64, n_r: u64) -> PyResult<Self> {
        Event::checked(EventSpec::DiagnosesIncrement { t, u, n_r })
    }

    #[staticmethod]
    fn cumulative_infections(t: usize, n_c: u64) -> PyResult<Self> {
        Event::checked(EventSpec::CumulativeInfections { t, n_c })
    }

    fn __repr__(&self) -> String {
        format!("Event({:?})", self.inner)
    }
}

#[pyclass(name = "Path", frozen)]
struct Path {
    inner: EpidemicPath,
}

#[pymethods]
impl Path {
    fn times(&self) -> Vec<f64> {
        self.inner.events().iter().map(|e| e.time).collect()
    }

    fn kinds(&self) -> Vec<&'static str> {
        self.inner.events().iter().map(|e| e.kind.label()).collect()
    }

    /// `(s, i, r)` after each event.
    fn states(&self) -> Vec<(u64, u64, u64)> {
        self.inner
            .events()
            .iter()
            .map(|e| (e.state_after.s, e.state_after.i, e.state_after.r))
            .collect()
    }

    fn state_at(&self, t: f64) -> PyResult<(u64, u64, u64)> {
        let s = self.inner.state_at(t).map_err(err)?;
        Ok((s.s, s.i, s.r))
    }

    /// `None` while the epidemic is still active at the horizon.
    fn extinction_time(&self) -> Option<f64> {
        self.inner.extinction_time().finite()
    }

    fn ever_infected(&self) -> u64 {
        self.inner.ever_infected()
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.inner.horizon()
    }

    fn to_csv(&self) -> PyResult<String> {
        self.inner.to_csv_string().map_err(err)
    }

    fn __len__(&self) -> usize {
        self.inner.events().len()
    }
}

#[pyclass(name = "Estimate", frozen, get_all)]
struct Estimate {
    value: f64,
    std_error: f64,
    per_level: Vec<f64>,
    replications: usize,
    values: Vec<f64>,
    diagnostics: BTreeMap<&'static str, u64>,
}

impl From<estimators::Estimate> for Estimate {
    fn from(e: estimators::Estimate) -> Self {
        let d = e.diagnostics;
        Estimate {
            value: e.value,
            std_error: e.std_error,
            per_level: e.per_level,
            replications: e.replications,
            values: e.values,
            diagnostics: BTreeMap::from([
                ("extinct_ensembles", d.extinct_ensembles),
                ("zero_runs", d.zero_runs),
                ("zero_weight_iterations", d.zero_weight_iterations),
                ("likelihood_overflow", d.likelihood_overflow),
                ("no_progress", d.no_progress),
                ("restarts", d.restarts),
            ]),
        }
    }
}

#[pymethods]
impl Estimate {
    fn __repr__(&self) -> String {
        format!(
            "Estimate(value={:.4e}, std_error={:.3e}, replications={})",
            self.value, self.std_error, self.replications
        )
    }
}

/// Simulates one continuous-time path up to `horizon` (default: extinction).
#[pyfunction]
#[pyo3(signature = (model, horizon = None, seed = 0))]
fn simulate(model: &Model, horizon: Option<f64>, seed: u64) -> PyResult<Path> {
    let stop = horizon.map_or(StopRule::Extinction, StopRule::Horizon);
    let inner = models::simulate(&model.inner, stop, &SeedSpec::new(seed)).map_err(err)?;
    Ok(Path { inner })
}

/// Reed-Frost trajectory as `(S_t, I_t)` pairs for `t = 0..=generations`.
#[pyfunction]
#[pyo3(signature = (model, generations, seed = 0))]
fn simulate_generations(model: &Model, generations: usize, seed: u64) -> PyResult<Vec<(u64, u64)>> {
    let ModelParams::ReedFrost(p) = &model.inner else {
        return Err(PyValueError::new_err(
            "generation paths need a Reed-Frost model",
        ));
    };
    let g = models::rf_simulate(p, generations, &SeedSpec::new(seed)).map_err(err)?;
    Ok(g.s.into_iter().zip(g.i).collect())
}

/// Exact distribution of the number of new infections of the SIR model.
#[pyfunction]
fn exact_final_size(model: &Model) -> PyResult<Vec<f64>> {
    let ModelParams::Sir(p) = &model.inner else {
        return Err(PyValueError::new_err(
            "the final-size oracle needs an SIR model",
        ));
    };
    epirare::oracle::exact_final_size(p).map_err(err)
}

/// `P{i0 + k >= n_c}` under a final-size distribution.
#[pyfunction]
fn tail_pf(dist: Vec<f64>, i0: u64, n_c: u64) -> f64 {
    epirare::oracle::tail_pf(&dist, i0, n_c)
}

#[pyfunction]
#[pyo3(signature = (model, event, n, seed = 0, replication = 0))]
fn cmc(model: &Model, event: &Event, n: usize, seed: u64, replication: u64) -> PyResult<Estimate> {
    Ok(
        estimators::cmc(&model.inner, &event.inner, n, &seed_spec(seed, replication))
            .map_err(err)?
            .into(),
    )
}

/// Importance sampling under `lam`/`gamma` (SIR) or `q` (Reed-Frost).
#[pyfunction]
#[pyo3(signature = (model, event, n, lam = None, gamma = None, q = None, seed = 0, replication = 0))]
#[allow(clippy::too_many_arguments)]
fn importance_sampling(
    model: &Model,
    event: &Event,
    n: usize,
    lam: Option<f64>,
    gamma: Option<f64>,
    q: Option<f64>,
    seed: u64,
    replication: u64,
) -> PyResult<Estimate> {
    let instr = match (Instrumental::of(&model.inner).map_err(err)?, q) {
        (Instrumental::Sir { lambda, gamma: g }, None) => Instrumental::Sir {
            lambda: lam.unwrap_or(lambda),
            gamma: gamma.unwrap_or(g),
        },
        (Instrumental::ReedFrost { .. }, Some(q)) => Instrumental::ReedFrost { q },
        (i, _) => {
            return Err(PyValueError::new_err(format!(
                "instrumental parameters do not fit {i:?}"
            )))
        }
    };
    let e = estimators::importance_sampling(
        &model.inner,
        &event.inner,
        n,
        &instr,
        &seed_spec(seed, replication),
    )
    .map_err(err)?;
    Ok(e.into())
}

#[pyfunction]
#[pyo3(signature = (model, event, n, iterations, seed = 0, replication = 0))]
fn cross_entropy(
    model: &Model,
    event: &Event,
    n: usize,
    iterations: usize,
    seed: u64,
    replication: u64,
) -> PyResult<Estimate> {
    let out = estimators::ce_estimate(
        &model.inner,
        &event.inner,
        n,
        iterations,
        &seed_spec(seed, replication),
    )
    .map_err(err)?;
    Ok(out.estimate.into())
}

/// Splitting with adaptive (`keep`) or fixed (`levels`) levels.
#[pyfunction]
#[pyo3(signature = (model, event, n, keep = None, levels = None, variant = "multinomial", weight = "indicator", alpha = 0.0, restart_on_extinction = None, seed = 0, replication = 0))]
#[allow(clippy::too_many_arguments)]
fn ibps(
    model: &Model,
    event: &Event,
    n: usize,
    keep: Option<f64>,
    levels: Option<Vec<f64>>,
    variant: &str,
    weight: &str,
    alpha: f64,
    restart_on_extinction: Option<u32>,
    seed: u64,
    replication: u64,
) -> PyResult<Estimate> {
    let schedule = match (keep, levels) {
        (Some(k), None) => Schedule::Adaptive { keep: k },
        (None, Some(l)) => Schedule::Fixed(l),
        _ => {
            return Err(PyValueError::new_err(
                "give exactly one of `keep` and `levels`",
            ))
        }
    };
    let variant = match variant {
        "multinomial" => Variant::Multinomial,
        "keep_all" => Variant::KeepAll,
        other => return Err(PyValueError::new_err(format!("unknown variant `{other}`"))),
    };
    let weight = match weight {
        "indicator" => WeightRule::Indicator,
        "potential_v" => WeightRule::PotentialV(alpha),
        "potential_delta_v" => WeightRule::PotentialDeltaV(alpha),
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown weight rule `{other}`"
            )))
        }
    };
    let opts = IbpsOptions {
        n,
        schedule,
        variant,
        weight,
        restart_on_extinction,
    };
    let out = estimators::ibps_estimate(
        &model.inner,
        &event.inner,
        &opts,
        &seed_spec(seed, replication),
    )
    .map_err(err)?;
    Ok(out.estimate.into())
}

/// Splitting in time for `P{τ > t}` on a fixed grid or with an adaptive
/// keep count.
#[pyfunction]
#[pyo3(signature = (model, t, n, grid = None, keep_count = None, seed = 0, replication = 0))]
fn temporal(
    model: &Model,
    t: f64,
    n: usize,
    grid: Option<Vec<f64>>,
    keep_count: Option<usize>,
    seed: u64,
    replication: u64,
) -> PyResult<Estimate> {
    let grid = match (grid, keep_count) {
        (Some(g), None) => TimeGrid::Fixed(g),
        (None, Some(k)) => TimeGrid::Adaptive { keep_count: k },
        (None, None) => TimeGrid::Fixed(Vec::new()),
        _ => {
            return Err(PyValueError::new_err(
                "give at most one of `grid` and `keep_count`",
            ))
        }
    };
    let opts = TemporalOptions {
        n,
        grid,
        restart_on_extinction: None,
    };
    let e =
        estimators::temporal_split_estimate(&model.inner, t, &opts, &seed_spec(seed, replication))
            .map_err(err)?;
    Ok(e.into())
}

/// Runs every section of a TOML config and returns the CSV table.
#[pyfunction]
#[pyo3(signature = (config, timing = false))]
fn sweep(config: &str, timing: bool) -> PyResult<String> {
    let configs = parse_config(config, &Overrides::default()).map_err(err)?;
    let mut out = Vec::new();
    run_sweep(&configs, timing, &mut out).map_err(err)?;
    String::from_utf8(out).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn pyepirare(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    m.add_class::<Event>()?;
    m.add_class::<Path>()?;
    m.add_class::<Estimate>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_generations, m)?)?;
    m.add_function(wrap_pyfunction!(exact_final_size, m)?)?;
    m.add_function(wrap_pyfunction!(tail_pf, m)?)?;
    m.add_function(wrap_pyfunction!(cmc, m)?)?;
    m.add_function(wrap_pyfunction!(importance_sampling, m)?)?;
    m.add_function(wrap_pyfunction!(cross_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(ibps, m)?)?;
    m.add_function(wrap_pyfunction!(temporal, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    Ok(())
}
