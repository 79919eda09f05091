//! Python bindings for the one-shot device dependence toolkit.
//!
//! Exposes the copula maps, dataset handling, fitting, and the Monte
//! Carlo harness as the `oneshot_copula_py` extension module. The layer
//! is a thin translation: all numerics live in the core crate, and every
//! core error surfaces as `ValueError` (or `IOError` for file problems).

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use oneshot_copula::copulas::{self, CopulaFamily};
use oneshot_copula::data_model::{
    validate_dataset, CellCounts, OneShotDataset, TestCondition,
};
use oneshot_copula::datasets;
use oneshot_copula::inference::{self, CellWeighting, FitConfig, FitResult, ThetaVector};
use oneshot_copula::simulation::{
    self, builtin_scenario, MarginalFamily, MarginalModel, SimScenario, BUILTIN_SCENARIOS,
};
use oneshot_copula::Error;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse_family(name: &str) -> PyResult<CopulaFamily> {
    CopulaFamily::parse(name).map_err(to_py_err)
}

fn parse_weighting(name: &str) -> PyResult<CellWeighting> {
    match name {
        "unit-share" => Ok(CellWeighting::UnitShare),
        "uniform" => Ok(CellWeighting::Uniform),
        other => Err(PyValueError::new_err(format!(
            "unknown weighting {other:?} (expected 'unit-share' or 'uniform')"
        ))),
    }
}

/// Copula CDF `C(u, v; alpha)` for family `"gh"` or `"frank"`.
#[pyfunction]
fn copula_cdf(family: &str, u: f64, v: f64, alpha: f64) -> PyResult<f64> {
    copulas::copula_cdf(parse_family(family)?, u, v, alpha).map_err(to_py_err)
}

/// Copula density `c(u, v; alpha)`.
#[pyfunction]
fn copula_pdf(family: &str, u: f64, v: f64, alpha: f64) -> PyResult<f64> {
    let f = parse_family(family)?;
    match f {
        CopulaFamily::GumbelHougaard => copulas::gh_pdf(u, v, alpha),
        CopulaFamily::Frank => copulas::frank_pdf(u, v, alpha),
    }
    .map_err(to_py_err)
}

/// Kendall's tau implied by the dependence parameter.
#[pyfunction]
fn copula_tau(family: &str, alpha: f64) -> PyResult<f64> {
    copulas::copula_tau(parse_family(family)?, alpha).map_err(to_py_err)
}

/// Dependence parameter implied by Kendall's tau (inverse of `copula_tau`).
#[pyfunction]
fn alpha_from_tau(family: &str, tau: f64) -> PyResult<f64> {
    let f = parse_family(family)?;
    match f {
        CopulaFamily::GumbelHougaard => copulas::gh_alpha_from_tau(tau),
        CopulaFamily::Frank => copulas::frank_alpha_from_tau(tau),
    }
    .map_err(to_py_err)
}

/// First-order Frank approximation `tau ~= alpha / 9`, advisory for
/// weak dependence (within 0.03 of the exact map on `|alpha| <= 3`).
#[pyfunction]
fn frank_tau_approx(alpha: f64) -> f64 {
    copulas::frank_tau_approx(alpha)
}

/// Dependence parameter at stress `x` under the family's link:
/// `1 + exp(a0 + a1 x)` for Gumbel-Hougaard, `a0 + a1 x` for Frank.
#[pyfunction]
fn link_alpha(family: &str, a0: f64, a1: f64, x: f64) -> PyResult<f64> {
    Ok(copulas::link_alpha(
        parse_family(family)?,
        ThetaVector::new(a0, a1),
        x,
    ))
}

/// A one-shot experiment: cells of `(inspection_time, stress, n0, n1,
/// n2, n12)` counts, where n0 devices showed no failure, n1/n2 exactly
/// one failure mode, and n12 both.
#[pyclass(frozen)]
struct Dataset {
    name: String,
    inner: OneShotDataset,
}

impl Dataset {
    fn build(name: String, inner: OneShotDataset) -> Self {
        Dataset { name, inner }
    }
}

#[pymethods]
impl Dataset {
    #[new]
    #[pyo3(signature = (cells, name="dataset"))]
    fn new(cells: Vec<(f64, f64, u64, u64, u64, u64)>, name: &str) -> Self {
        let cells = cells
            .into_iter()
            .map(|(it, x, n0, n1, n2, n12)| {
                (
                    TestCondition {
                        inspection_time: it,
                        stress: x,
                    },
                    CellCounts::new(n0, n1, n2, n12),
                )
            })
            .collect();
        Dataset::build(name.to_string(), OneShotDataset::new(cells))
    }

    /// The embedded example study. Only `"serial-sacrifice"` exists.
    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        if name != "serial-sacrifice" {
            return Err(PyValueError::new_err(format!(
                "unknown builtin dataset {name:?} (available: serial-sacrifice)"
            )));
        }
        let named = datasets::serial_sacrifice();
        Ok(Dataset::build(named.name, named.dataset))
    }

    /// Loads a `inspection_time,stress,n0,n1,n2,n12` CSV file.
    #[staticmethod]
    fn from_csv(path: PathBuf) -> PyResult<Self> {
        let named = datasets::load_csv(&path).map_err(to_py_err)?;
        Ok(Dataset::build(named.name, named.dataset))
    }

    /// Writes the dataset in the same CSV format `from_csv` reads.
    fn to_csv(&self, path: PathBuf) -> PyResult<()> {
        datasets::write_csv(&self.inner, &path).map_err(to_py_err)
    }

    fn to_csv_string(&self) -> String {
        datasets::to_csv_string(&self.inner)
    }

    #[getter]
    fn name(&self) -> &str {
        &self.name
    }

    /// Cells as `(inspection_time, stress, n0, n1, n2, n12)` tuples.
    #[getter]
    fn cells(&self) -> Vec<(f64, f64, u64, u64, u64, u64)> {
        self.inner
            .cells()
            .iter()
            .map(|(c, n)| (c.inspection_time, c.stress, n.n0, n.n1, n.n2, n.n12))
            .collect()
    }

    /// Distinct stress levels, ascending.
    #[getter]
    fn stress_levels(&self) -> Vec<f64> {
        self.inner.stress_levels().to_vec()
    }

    #[getter]
    fn total_units(&self) -> u64 {
        self.inner.total_units()
    }

    /// `(violations, warnings)`; fitting rejects data with violations.
    fn validate(&self) -> (Vec<String>, Vec<String>) {
        let report = validate_dataset(&self.inner);
        (report.violations, report.warnings)
    }

    fn __len__(&self) -> usize {
        self.inner.cells().len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(name={:?}, cells={}, units={})",
            self.name,
            self.inner.cells().len(),
            self.inner.total_units()
        )
    }
}

/// One fitted model: link coefficients, the dependence they imply at
/// each stress level, and the fit diagnostics.
#[pyclass(frozen)]
struct FitOutcome {
    #[pyo3(get)]
    family: String,
    #[pyo3(get)]
    beta: f64,
    #[pyo3(get)]
    a0: f64,
    #[pyo3(get)]
    a1: f64,
    #[pyo3(get)]
    objective_value: f64,
    #[pyo3(get)]
    abias_percent: f64,
    #[pyo3(get)]
    converged: bool,
    #[pyo3(get)]
    iterations: usize,
    #[pyo3(get)]
    floor_events: u64,
    #[pyo3(get)]
    weighting: String,
    #[pyo3(get)]
    start_used: (f64, f64),
    /// `(stress, alpha)` pairs, ascending in stress.
    #[pyo3(get)]
    alpha_by_stress: Vec<(f64, f64)>,
    /// `(stress, tau)` pairs aligned with `alpha_by_stress`.
    #[pyo3(get)]
    tau_by_stress: Vec<(f64, f64)>,
}

impl FitOutcome {
    fn from_result(family: CopulaFamily, r: FitResult) -> Self {
        FitOutcome {
            family: family.name().to_string(),
            beta: r.beta,
            a0: r.theta_hat.a0,
            a1: r.theta_hat.a1,
            objective_value: r.objective_value,
            abias_percent: r.abias_percent,
            converged: r.converged,
            iterations: r.iterations,
            floor_events: r.floor_events,
            weighting: r.weighting.name().to_string(),
            start_used: (r.start_used.a0, r.start_used.a1),
            alpha_by_stress: r.alpha_by_stress,
            tau_by_stress: r.tau_by_stress,
        }
    }
}

#[pymethods]
impl FitOutcome {
    fn __repr__(&self) -> String {
        format!(
            "FitOutcome(family={:?}, beta={:?}, a0={:.6}, a1={:.6}, converged={})",
            self.family,
            self.beta,
            self.a0,
            self.a1,
            if self.converged { "True" } else { "False" }
        )
    }
}

/// Fits the copula dependence model to a dataset.
///
/// `beta = 0` is the quasi maximum likelihood estimate; `beta > 0` trades
/// efficiency for robustness to contaminated cells. `weighting` defaults
/// to `"unit-share"` at beta = 0 and `"uniform"` otherwise;
/// `eval_stresses` adds stress levels to the per-stress report; `start`
/// overrides the data-driven initial point.
#[pyfunction]
#[pyo3(signature = (dataset, family, beta=0.0, weighting=None, eval_stresses=vec![], start=None))]
fn fit(
    py: Python<'_>,
    dataset: &Dataset,
    family: &str,
    beta: f64,
    weighting: Option<&str>,
    eval_stresses: Vec<f64>,
    start: Option<(f64, f64)>,
) -> PyResult<FitOutcome> {
    let f = parse_family(family)?;
    let config = FitConfig {
        beta,
        weighting: weighting.map(parse_weighting).transpose()?,
        eval_stresses,
        start: start.map(|(a0, a1)| ThetaVector::new(a0, a1)),
        ..FitConfig::default()
    };
    let result = py
        .detach(|| inference::fit(&dataset.inner, f, &config))
        .map_err(to_py_err)?;
    Ok(FitOutcome::from_result(f, result))
}

/// Sample Kendall's tau from concordant and discordant failure-mode
/// pairs at one stress level of a dataset.
#[pyfunction]
fn kendall_tau_hat(dataset: &Dataset, stress: f64) -> PyResult<f64> {
    inference::kendall_tau_hat(&dataset.inner, stress).map_err(to_py_err)
}

/// Data-driven starting point for the fit, as `(a0, a1)`.
#[pyfunction]
fn initialize_theta(dataset: &Dataset, family: &str) -> PyResult<(f64, f64)> {
    let theta =
        inference::initialize_theta(&dataset.inner, parse_family(family)?).map_err(to_py_err)?;
    Ok((theta.a0, theta.a1))
}

/// A synthetic-data experiment: marginal lifetime model, true copula,
/// test plan, and optional contamination of the lowest-stress cells.
#[pyclass(frozen)]
struct Scenario {
    inner: SimScenario,
}

#[pymethods]
impl Scenario {
    #[new]
    #[pyo3(signature = (copula, a0, a1, stresses, inspection_times, k_star,
                        marginal="weibull", s0=3.5, s1=-0.02, r0_mode1=2.0, r0_mode2=2.1,
                        r1=-0.03, contaminate=false, normal_stress_x0=25.0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        copula: &str,
        a0: f64,
        a1: f64,
        stresses: Vec<f64>,
        inspection_times: Vec<f64>,
        k_star: u64,
        marginal: &str,
        s0: f64,
        s1: f64,
        r0_mode1: f64,
        r0_mode2: f64,
        r1: f64,
        contaminate: bool,
        normal_stress_x0: f64,
    ) -> PyResult<Self> {
        let sc = SimScenario {
            stresses,
            inspection_times,
            k_star,
            marginal: MarginalModel {
                family: MarginalFamily::parse(marginal).map_err(to_py_err)?,
                s0,
                s1,
                r0_mode1,
                r0_mode2,
                r1,
            },
            copula: parse_family(copula)?,
            theta_true: ThetaVector::new(a0, a1),
            contaminate,
            normal_stress_x0,
        };
        sc.validate().map_err(to_py_err)?;
        Ok(Scenario { inner: sc })
    }

    /// One of the six named study designs (see `builtin_scenarios()`),
    /// with the device count and contamination switch applied.
    #[staticmethod]
    #[pyo3(signature = (name, k_star=100, contaminate=false))]
    fn builtin(name: &str, k_star: u64, contaminate: bool) -> PyResult<Self> {
        let mut sc = builtin_scenario(name).map_err(to_py_err)?;
        sc.k_star = k_star;
        sc.contaminate = contaminate;
        sc.validate().map_err(to_py_err)?;
        Ok(Scenario { inner: sc })
    }

    #[getter]
    fn copula(&self) -> &'static str {
        self.inner.copula.name()
    }

    #[getter]
    fn marginal(&self) -> &'static str {
        self.inner.marginal.family.name()
    }

    /// True link coefficients `(a0, a1)`.
    #[getter]
    fn theta_true(&self) -> (f64, f64) {
        (self.inner.theta_true.a0, self.inner.theta_true.a1)
    }

    #[getter]
    fn stresses(&self) -> Vec<f64> {
        self.inner.stresses.clone()
    }

    #[getter]
    fn inspection_times(&self) -> Vec<f64> {
        self.inner.inspection_times.clone()
    }

    #[getter]
    fn k_star(&self) -> u64 {
        self.inner.k_star
    }

    #[getter]
    fn contaminate(&self) -> bool {
        self.inner.contaminate
    }

    #[getter]
    fn normal_stress_x0(&self) -> f64 {
        self.inner.normal_stress_x0
    }

    /// Model category probabilities `(pi0, pi1, pi2, pi12)` at one test
    /// condition under the scenario's true parameters.
    fn true_cell_probs(&self, inspection_time: f64, stress: f64) -> PyResult<(f64, f64, f64, f64)> {
        let p = simulation::true_cell_probs(&self.inner, inspection_time, stress)
            .map_err(to_py_err)?;
        Ok((p.pi0, p.pi1, p.pi2, p.pi12))
    }

    /// Draws one seeded dataset (contaminated if the scenario says so).
    fn simulate(&self, seed: u64) -> PyResult<Dataset> {
        let ds = simulation::simulate_dataset(&self.inner, seed).map_err(to_py_err)?;
        Ok(Dataset::build(format!("simulated-{seed}"), ds))
    }

    /// Runs the replicated study, fitting every beta to each replication.
    /// Deterministic in `seed` for any thread count.
    fn monte_carlo(
        &self,
        py: Python<'_>,
        betas: Vec<f64>,
        replications: u64,
        seed: u64,
    ) -> PyResult<MonteCarloReport> {
        let summary = py
            .detach(|| simulation::monte_carlo(&self.inner, &betas, replications, seed))
            .map_err(to_py_err)?;
        Ok(MonteCarloReport { inner: summary })
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(copula={:?}, marginal={:?}, k_star={}, contaminate={})",
            self.inner.copula.name(),
            self.inner.marginal.family.name(),
            self.inner.k_star,
            if self.inner.contaminate { "True" } else { "False" }
        )
    }
}

/// Mean estimates per tuning parameter from a replicated study.
#[pyclass(frozen)]
struct MonteCarloReport {
    inner: simulation::MCSummary,
}

#[pymethods]
impl MonteCarloReport {
    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn replications(&self) -> u64 {
        self.inner.replications
    }

    /// True values the means are compared against: keys `a0`, `a1`,
    /// `alpha0`, `tau0`, `x0`.
    #[getter]
    fn truth<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let t = self.inner.truth;
        let d = PyDict::new(py);
        d.set_item("a0", t.a0)?;
        d.set_item("a1", t.a1)?;
        d.set_item("alpha0", t.alpha0)?;
        d.set_item("tau0", t.tau0)?;
        d.set_item("x0", t.x0)?;
        Ok(d)
    }

    /// One dict per beta: mean estimates over converged replications and
    /// the converged/failed counts.
    #[getter]
    fn rows<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.inner
            .rows
            .iter()
            .map(|r| {
                let d = PyDict::new(py);
                d.set_item("beta", r.beta)?;
                d.set_item("mean_a0", r.mean_a0)?;
                d.set_item("mean_a1", r.mean_a1)?;
                d.set_item("mean_alpha0", r.mean_alpha0)?;
                d.set_item("mean_tau0", r.mean_tau0)?;
                d.set_item("converged_replications", r.converged_replications)?;
                d.set_item("failed_replications", r.failed_replications)?;
                Ok(d)
            })
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "MonteCarloReport(replications={}, betas={}, seed={})",
            self.inner.replications,
            self.inner.rows.len(),
            self.inner.seed
        )
    }
}

/// Names accepted by `Scenario.builtin`, in canonical order.
#[pyfunction]
fn builtin_scenarios() -> Vec<&'static str> {
    BUILTIN_SCENARIOS.to_vec()
}

#[pymodule]
fn oneshot_copula_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("DEFAULT_SEED", oneshot_copula::cli::DEFAULT_SEED)?;
    m.add_function(wrap_pyfunction!(copula_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(copula_pdf, m)?)?;
    m.add_function(wrap_pyfunction!(copula_tau, m)?)?;
    m.add_function(wrap_pyfunction!(alpha_from_tau, m)?)?;
    m.add_function(wrap_pyfunction!(frank_tau_approx, m)?)?;
    m.add_function(wrap_pyfunction!(link_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(kendall_tau_hat, m)?)?;
    m.add_function(wrap_pyfunction!(initialize_theta, m)?)?;
    m.add_function(wrap_pyfunction!(builtin_scenarios, m)?)?;
    m.add_class::<Dataset>()?;
    m.add_class::<FitOutcome>()?;
    m.add_class::<Scenario>()?;
    m.add_class::<MonteCarloReport>()?;
    Ok(())
}
