//! Python bindings. Samples are passed as lists of rows (`list[list[float]]`).

use copeq_core as core;
use core::clustering::{cluster_copulas as cluster_core, cluster_copulas_tuned as cluster_tuned};
use core::harness::{builtin_design, emit_report, run_experiment as run_core, ExperimentConfig, ReportFormat};
use core::io::{load_csv as load_core, CsvOptions, LabeledSample};
use core::ksample::{Pairing, TestConfig as CoreConfig};
use core::samplers::{CopulaFamily, CopulaSpec as CoreSpec};
use core::tuning::TuningConfig;
use core::{Error, Sample, TiesPolicy};
use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::DegenerateVariance { .. } => PyArithmeticError::new_err(e.to_string()),
        Error::Io(_) => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn sample(rows: &[Vec<f64>]) -> PyResult<Sample> {
    Sample::from_rows(rows).map_err(to_py)
}

fn samples(data: &[Vec<Vec<f64>>]) -> PyResult<Vec<Sample>> {
    data.iter().map(|s| sample(s)).collect()
}

fn rows(s: &Sample) -> Vec<Vec<f64>> {
    s.rows().map(<[f64]>::to_vec).collect()
}

fn py_bool(b: bool) -> &'static str {
    if b {
        "True"
    } else {
        "False"
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(to_py)
}

/// Settings of the K-sample test.
#[pyclass(module = "copeq", frozen, get_all)]
struct TestConfig {
    d_max: usize,
    alpha: f64,
    pairing: String,
    level: f64,
    ties: String,
}

#[pymethods]
impl TestConfig {
    #[new]
    #[pyo3(signature = (d_max=3, alpha=1.0, pairing="paired", level=0.05, ties="error"))]
    fn new(d_max: usize, alpha: f64, pairing: &str, level: f64, ties: &str) -> PyResult<Self> {
        let cfg = Self {
            d_max,
            alpha,
            pairing: pairing.to_owned(),
            level,
            ties: ties.to_owned(),
        };
        cfg.core()?.validate().map_err(to_py)?;
        Ok(cfg)
    }

    fn __repr__(&self) -> String {
        format!(
            "TestConfig(d_max={}, alpha={}, pairing='{}', level={}, ties='{}')",
            self.d_max, self.alpha, self.pairing, self.level, self.ties
        )
    }
}

impl TestConfig {
    fn core(&self) -> PyResult<CoreConfig> {
        Ok(CoreConfig {
            d_max: self.d_max,
            alpha_penalty: self.alpha,
            pairing: parse::<Pairing>(&self.pairing)?,
            level: self.level,
            ties: parse::<TiesPolicy>(&self.ties)?,
            ..CoreConfig::default()
        })
    }
}

fn config(cfg: Option<&TestConfig>) -> PyResult<CoreConfig> {
    match cfg {
        Some(c) => c.core(),
        None => Ok(CoreConfig::default()),
    }
}

/// Outcome of the K-sample test. Population indices are 0-based.
#[pyclass(module = "copeq", frozen, get_all)]
struct TestResult {
    statistic: f64,
    raw_statistic: f64,
    s_selected: usize,
    selected_pair: (usize, usize),
    /// `(ell, m, D)` for every pair.
    d_per_pair: Vec<(usize, usize, usize)>,
    sigma2_hat: f64,
    p_value: f64,
    reject: bool,
    degenerate: bool,
    alpha: f64,
    level: f64,
}

#[pymethods]
impl TestResult {
    fn __repr__(&self) -> String {
        format!(
            "TestResult(statistic={:?}, p_value={:?}, reject={}, s_selected={})",
            self.statistic,
            self.p_value,
            py_bool(self.reject),
            self.s_selected
        )
    }
}

impl From<core::TestResult> for TestResult {
    fn from(r: core::TestResult) -> Self {
        Self {
            statistic: r.statistic,
            raw_statistic: r.raw_statistic,
            s_selected: r.s_selected,
            selected_pair: r.selected_pair,
            d_per_pair: r.d_per_pair.iter().map(|d| (d.ell, d.m, d.d)).collect(),
            sigma2_hat: r.sigma2_hat,
            p_value: r.p_value,
            reject: r.reject,
            degenerate: r.degenerate,
            alpha: r.alpha_penalty,
            level: r.level,
        }
    }
}

#[pyclass(module = "copeq", frozen, get_all)]
struct TuningResult {
    alpha_hat: f64,
    exhausted: bool,
    n_reps: usize,
    /// `(alpha, n_single, unanimous)` per grid value.
    table: Vec<(f64, usize, bool)>,
}

#[pymethods]
impl TuningResult {
    fn __repr__(&self) -> String {
        format!(
            "TuningResult(alpha_hat={:?}, exhausted={}, n_reps={})",
            self.alpha_hat,
            py_bool(self.exhausted),
            self.n_reps
        )
    }
}

#[pyclass(module = "copeq", frozen, get_all)]
struct ClusterPartition {
    clusters: Vec<Vec<usize>>,
    /// `(candidate, cluster, statistic, p_value, alpha, accepted)` per test.
    trail: Vec<(usize, Vec<usize>, f64, f64, f64, bool)>,
}

#[pymethods]
impl ClusterPartition {
    /// Sorted clusters, sorted by smallest member.
    fn canonical(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = self
            .clusters
            .iter()
            .map(|c| {
                let mut c = c.clone();
                c.sort_unstable();
                c
            })
            .collect();
        out.sort();
        out
    }

    fn __repr__(&self) -> String {
        format!("ClusterPartition(clusters={:?})", self.clusters)
    }
}

/// A copula family at a given Kendall's tau.
#[pyclass(module = "copeq", frozen)]
struct CopulaSpec {
    inner: CoreSpec,
}

#[pymethods]
impl CopulaSpec {
    #[new]
    #[pyo3(signature = (family, tau, p, df=None))]
    fn new(family: &str, tau: f64, p: usize, df: Option<f64>) -> PyResult<Self> {
        let mut inner = CoreSpec::new(parse::<CopulaFamily>(family)?, tau, p).map_err(to_py)?;
        if let Some(df) = df {
            inner = inner.with_df(df).map_err(to_py)?;
        }
        Ok(Self { inner })
    }

    #[getter]
    fn family(&self) -> &'static str {
        self.inner.family.name()
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.inner.tau
    }

    #[getter]
    fn p(&self) -> usize {
        self.inner.p
    }

    #[getter]
    fn df(&self) -> f64 {
        self.inner.df
    }

    /// Draws `n` rows with the given seed.
    #[pyo3(signature = (n, seed=0))]
    fn sample(&self, n: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
        Ok(rows(&core::sample_copula(&self.inner, n, seed).map_err(to_py)?))
    }

    fn __repr__(&self) -> String {
        format!("CopulaSpec('{}', tau={}, p={})", self.inner.family.name(), self.inner.tau, self.inner.p)
    }
}

/// Rank transform of each column, scaled to `(0, 1]`.
#[pyfunction]
#[pyo3(signature = (data, ties="error"))]
fn pseudo_observations(data: Vec<Vec<f64>>, ties: &str) -> PyResult<Vec<Vec<f64>>> {
    let ps = core::pseudo_observations(&sample(&data)?, parse(ties)?).map_err(to_py)?;
    Ok((0..ps.n()).map(|i| ps.row(i)).collect())
}

#[pyfunction]
#[pyo3(signature = (data, ties="error"))]
fn spearman_rho(data: Vec<Vec<f64>>, ties: &str) -> PyResult<f64> {
    let ps = core::pseudo_observations(&sample(&data)?, parse(ties)?).map_err(to_py)?;
    core::spearman_rho(&ps).map_err(to_py)
}

/// Legendre copula coefficients up to norm `d_max`, as `(index, value)` pairs.
#[pyfunction]
#[pyo3(signature = (data, d_max=3, ties="error"))]
fn coefficient_table(data: Vec<Vec<f64>>, d_max: usize, ties: &str) -> PyResult<Vec<(Vec<usize>, f64)>> {
    let ps = core::pseudo_observations(&sample(&data)?, parse(ties)?).map_err(to_py)?;
    let t = core::coefficient_table(&ps, d_max).map_err(to_py)?;
    Ok(t.entries().iter().map(|(j, v)| (j.as_slice().to_vec(), *v)).collect())
}

/// Multi-indices of norm `d` with at least two positive coordinates.
#[pyfunction]
fn enumerate_shell(d: usize, p: usize) -> PyResult<Vec<Vec<usize>>> {
    let s = core::enumerate_shell(d, p).map_err(to_py)?;
    Ok(s.iter().map(|j| j.as_slice().to_vec()).collect())
}

/// 1-based rank of the pair `(ell, m)` among `k` populations.
#[pyfunction]
fn pair_rank(ell: usize, m: usize, k: usize) -> PyResult<usize> {
    core::pair_rank(ell, m, k).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (samples, config=None))]
fn ksample_test(samples: Vec<Vec<Vec<f64>>>, config: Option<&TestConfig>) -> PyResult<TestResult> {
    let s = self::samples(&samples)?;
    Ok(core::ksample_test(&s, &self::config(config)?).map_err(to_py)?.into())
}

/// Symmetric matrix of pairwise p-values.
#[pyfunction]
#[pyo3(signature = (samples, config=None))]
fn pairwise_anova(samples: Vec<Vec<Vec<f64>>>, config: Option<&TestConfig>) -> PyResult<Vec<Vec<f64>>> {
    let s = self::samples(&samples)?;
    core::pairwise_anova(&s, &self::config(config)?).map_err(to_py)
}

/// With `retune`, every test re-tunes alpha on the populations it involves
/// and the config's alpha only ranks candidates.
#[pyfunction]
#[pyo3(signature = (samples, config=None, retune=false, k_prime=3, n_reps=20, seed=0))]
fn cluster_copulas(
    samples: Vec<Vec<Vec<f64>>>,
    config: Option<&TestConfig>,
    retune: bool,
    k_prime: usize,
    n_reps: usize,
    seed: u64,
) -> PyResult<ClusterPartition> {
    let s = self::samples(&samples)?;
    let cfg = self::config(config)?;
    let part = if retune {
        let tcfg = TuningConfig {
            k_prime,
            n_reps,
            seed,
            ..TuningConfig::default()
        };
        cluster_tuned(&s, &cfg, &tcfg)
    } else {
        cluster_core(&s, &cfg)
    }
    .map_err(to_py)?;
    Ok(ClusterPartition {
        clusters: part.clusters,
        trail: part
            .trail
            .into_iter()
            .map(|r| (r.candidate, r.cluster, r.statistic, r.p_value, r.alpha, r.accepted))
            .collect(),
    })
}

/// Smallest grid alpha for which every random split selects a single pair.
#[pyfunction]
#[pyo3(signature = (samples, config=None, k_prime=3, n_reps=20, seed=0, alpha_grid=None))]
fn tune_alpha(
    samples: Vec<Vec<Vec<f64>>>,
    config: Option<&TestConfig>,
    k_prime: usize,
    n_reps: usize,
    seed: u64,
    alpha_grid: Option<Vec<f64>>,
) -> PyResult<TuningResult> {
    let s = self::samples(&samples)?;
    let tcfg = TuningConfig {
        k_prime,
        n_reps,
        seed,
        alpha_grid: alpha_grid.unwrap_or_else(core::tuning::default_grid),
    };
    let t = core::tune_alpha(&s, &tcfg, &self::config(config)?).map_err(to_py)?;
    Ok(TuningResult {
        alpha_hat: t.alpha_hat,
        exhausted: t.exhausted,
        n_reps: t.n_reps,
        table: t.table.iter().map(|r| (r.alpha, r.n_single, r.unanimous)).collect(),
    })
}

fn labeled(data: Vec<LabeledSample>) -> Vec<(String, Vec<Vec<f64>>)> {
    data.into_iter().map(|l| (l.label, rows(&l.sample))).collect()
}

/// Reads a CSV file into `(label, rows)` pairs, one per group.
#[pyfunction]
#[pyo3(signature = (path, group_col=None))]
fn load_csv(path: &str, group_col: Option<String>) -> PyResult<Vec<(String, Vec<Vec<f64>>)>> {
    let opts = CsvOptions {
        group_col,
        ..CsvOptions::default()
    };
    Ok(labeled(load_core(path, &opts).map_err(to_py)?))
}

/// The bundled Iris data as `(species, rows)` pairs.
#[pyfunction]
fn iris() -> Vec<(String, Vec<Vec<f64>>)> {
    labeled(core::io::iris())
}

/// Runs a built-in design (by name) or a config text and returns the report.
#[pyfunction]
#[pyo3(signature = (design, overrides=None, format="csv"))]
fn run_experiment(design: &str, overrides: Option<Vec<(String, String)>>, format: &str) -> PyResult<String> {
    let text = builtin_design(design).unwrap_or(design);
    let cfg = ExperimentConfig::parse(text, &overrides.unwrap_or_default()).map_err(to_py)?;
    let report = run_core(&cfg).map_err(to_py)?;
    let bytes = emit_report(&report, parse::<ReportFormat>(format)?).map_err(to_py)?;
    String::from_utf8(bytes).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn copeq(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<TestConfig>()?;
    m.add_class::<TestResult>()?;
    m.add_class::<TuningResult>()?;
    m.add_class::<ClusterPartition>()?;
    m.add_class::<CopulaSpec>()?;
    m.add_function(wrap_pyfunction!(pseudo_observations, m)?)?;
    m.add_function(wrap_pyfunction!(spearman_rho, m)?)?;
    m.add_function(wrap_pyfunction!(coefficient_table, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_shell, m)?)?;
    m.add_function(wrap_pyfunction!(pair_rank, m)?)?;
    m.add_function(wrap_pyfunction!(ksample_test, m)?)?;
    m.add_function(wrap_pyfunction!(pairwise_anova, m)?)?;
    m.add_function(wrap_pyfunction!(cluster_copulas, m)?)?;
    m.add_function(wrap_pyfunction!(tune_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(load_csv, m)?)?;
    m.add_function(wrap_pyfunction!(iris, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
