//! Python bindings for the speclab core: domains, boundary grids, spectra,
//! per-mode boundary functionals, packet statistics, asymptotic fits, and
//! the config-driven experiment pipeline.
//!
//! The wrappers own their core values and stay thin: constructors build the
//! core object, methods forward and convert. Fit results come back as plain
//! dicts so downstream analysis can stay in Python.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use std::path::Path;

use speclab_core::functionals::{
    self, compute_functionals, make_weight, SpectrumFunctionals, WeightForm,
};
use speclab_core::geometry::{build_grid, BoundaryGrid, DomainSpec, GridSize, Point};
use speclab_core::harness;
use speclab_core::mps;
use speclab_core::packets;
use speclab_core::spectra::{self, ModeFamily};
use speclab_core::Error;

fn err(e: Error) -> PyErr {
    if e.is_config() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn parse_weight_form(form: &str, param: u32) -> PyResult<WeightForm> {
    match form {
        "cos_theta" => Ok(WeightForm::CosTheta { p: param }),
        "sin_theta" => Ok(WeightForm::SinTheta { p: param }),
        "legendre_polar" => Ok(WeightForm::LegendrePolar { degree: param }),
        "curvature_centered" => Ok(WeightForm::CurvatureCentered),
        "constant" => Ok(WeightForm::Constant),
        other => Err(PyValueError::new_err(format!(
            "unknown weight form '{other}'; expected cos_theta, sin_theta, \
             legendre_polar, curvature_centered, or constant"
        ))),
    }
}

/// Bounded strictly convex domain: disk, ellipse, perturbed disk, or ball.
#[pyclass(frozen)]
struct Domain {
    spec: DomainSpec,
}

#[pymethods]
impl Domain {
    #[staticmethod]
    fn disk(radius: f64) -> PyResult<Self> {
        Ok(Domain { spec: DomainSpec::disk(radius).map_err(err)? })
    }

    #[staticmethod]
    fn ball(radius: f64) -> PyResult<Self> {
        Ok(Domain { spec: DomainSpec::ball(radius).map_err(err)? })
    }

    #[staticmethod]
    fn ellipse(a: f64, b: f64) -> PyResult<Self> {
        Ok(Domain { spec: DomainSpec::ellipse(a, b).map_err(err)? })
    }

    #[staticmethod]
    fn perturbed_disk(radius: f64, amplitude: f64, frequency: u32) -> PyResult<Self> {
        Ok(Domain { spec: DomainSpec::perturbed_disk(radius, amplitude, frequency).map_err(err)? })
    }

    /// Same domain with the Rellich base point moved to (x, y, z).
    #[pyo3(signature = (x, y, z = 0.0))]
    fn with_x0(&self, x: f64, y: f64, z: f64) -> PyResult<Self> {
        Ok(Domain { spec: self.spec.clone().with_x0(Point::new(x, y, z)).map_err(err)? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.spec.dim
    }

    fn volume(&self) -> f64 {
        self.spec.volume()
    }

    fn boundary_measure(&self) -> f64 {
        self.spec.boundary_measure()
    }

    /// Leading Weyl constant: N(Lambda) / Lambda^{d/2} as Lambda grows.
    fn weyl_reference(&self) -> f64 {
        self.spec.weyl_reference()
    }

    /// Two-term Weyl estimate of N(lambda).
    fn two_term_weyl(&self, lambda: f64) -> f64 {
        self.spec.two_term_weyl(lambda)
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.spec.kind)
    }
}

/// Discretized boundary with quadrature weights, normals, curvature, and
/// support-function samples.
#[pyclass(frozen)]
struct Grid {
    grid: BoundaryGrid,
}

#[pymethods]
impl Grid {
    /// Periodic-trapezoid curve grid (planar domains).
    #[staticmethod]
    fn curve(domain: &Domain, n_nodes: usize) -> PyResult<Self> {
        Ok(Grid { grid: build_grid(&domain.spec, GridSize::Curve(n_nodes)).map_err(err)? })
    }

    /// Gauss-Legendre x uniform product grid on the sphere.
    #[staticmethod]
    fn sphere(domain: &Domain, n_polar: usize, n_azimuth: usize) -> PyResult<Self> {
        Ok(Grid {
            grid: build_grid(&domain.spec, GridSize::Sphere { n_polar, n_azimuth })
                .map_err(err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.grid.len()
    }

    fn measure(&self) -> f64 {
        self.grid.measure()
    }

    /// (min, max) of the support function g = <x - x0, nu>; both positive
    /// on strictly convex boundaries, and 2*lambda/max <= E <= 2*lambda/min.
    fn g_bounds(&self) -> PyResult<(f64, f64)> {
        self.grid.g_bounds().map_err(err)
    }

    /// Mean of the boundary mean curvature.
    #[getter]
    fn h_bar(&self) -> f64 {
        self.grid.h_bar
    }
}

/// Zero-mean-calibrated boundary weight with certified moment level.
#[pyclass(frozen)]
struct Weight {
    w: functionals::Weight,
}

#[pymethods]
impl Weight {
    /// Build a named closed-form weight on a grid and certify its level.
    /// `form` is one of cos_theta, sin_theta, legendre_polar,
    /// curvature_centered, constant; `param` is the frequency or degree.
    /// `level` > 0 moment-projects the raw samples before certifying.
    #[staticmethod]
    #[pyo3(signature = (name, form, param, level, grid))]
    fn make(name: &str, form: &str, param: u32, level: u8, grid: &Grid) -> PyResult<Self> {
        let wf = parse_weight_form(form, param)?;
        Ok(Weight { w: make_weight(name, wf, level, &grid.grid).map_err(err)? })
    }

    #[getter]
    fn name(&self) -> String {
        self.w.name.clone()
    }

    /// Certified moment level: 0 none, 1 zero mean, 2 zero mean and zero
    /// curvature moment.
    #[getter]
    fn level(&self) -> u8 {
        self.w.level
    }

    #[getter]
    fn mu0(&self) -> f64 {
        self.w.mu0
    }

    #[getter]
    fn mu1(&self) -> f64 {
        self.w.mu1
    }

    #[getter]
    fn sup_norm(&self) -> f64 {
        self.w.sup_norm
    }
}

/// Dirichlet spectrum with boundary flux traces.
#[pyclass(frozen)]
struct Spectrum {
    inner: spectra::Spectrum,
}

#[pymethods]
impl Spectrum {
    /// Closed-form disk spectrum: Bessel zeros, cos/sin pairs for m >= 1.
    #[staticmethod]
    fn disk(radius: f64, k_count: usize) -> PyResult<Self> {
        Ok(Spectrum { inner: spectra::disk_spectrum(radius, k_count).map_err(err)? })
    }

    /// Closed-form ball spectrum: spherical Bessel zeros, (2l+1)-multiplets.
    #[staticmethod]
    fn ball(radius: f64, k_count: usize) -> PyResult<Self> {
        Ok(Spectrum { inner: spectra::ball_spectrum(radius, k_count).map_err(err)? })
    }

    /// Collocation spectrum on a planar domain over a lambda window.
    /// Heuristic solver sizing; raise `basis_order` for boundary
    /// perturbations that couple distant angular orders.
    #[staticmethod]
    #[pyo3(signature = (domain, lambda_lo, lambda_hi, seed = 7, basis_order = None))]
    fn collocated(
        domain: &Domain,
        lambda_lo: f64,
        lambda_hi: f64,
        seed: u64,
        basis_order: Option<usize>,
    ) -> PyResult<Self> {
        let mut config =
            mps::MpsConfig::for_window(&domain.spec, lambda_lo, lambda_hi, seed).map_err(err)?;
        if let Some(order) = basis_order {
            config.basis_order = order;
            config.n_boundary = config.n_boundary.max(2 * order + 16);
            config.n_interior = config.n_interior.max(order);
        }
        config.validate(&domain.spec).map_err(err)?;
        let pairs = mps::scan_and_refine(&domain.spec, &config).map_err(err)?;
        Ok(Spectrum { inner: mps::to_spectrum(&domain.spec, &pairs).map_err(err)? })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Eigenvalue of 1-based mode k.
    fn lam(&self, k: usize) -> PyResult<f64> {
        Ok(self.inner.mode(k).map_err(err)?.lambda)
    }

    fn lambdas(&self) -> Vec<f64> {
        self.inner.modes.iter().map(|m| m.lambda).collect()
    }

    fn max_lambda(&self) -> f64 {
        self.inner.max_lambda()
    }

    /// Number of eigenvalues strictly below lambda.
    fn count_below(&self, lambda: f64) -> usize {
        self.inner.count_below(lambda)
    }

    /// Human-readable family label of 1-based mode k.
    fn family(&self, k: usize) -> PyResult<String> {
        Ok(match self.inner.mode(k).map_err(err)?.family {
            ModeFamily::Disk { m, n, parity } => {
                format!("disk(m={m}, n={n}, {})", format!("{parity:?}").to_lowercase())
            }
            ModeFamily::Ball { l, n, q } => format!("ball(l={l}, n={n}, q={q})"),
            ModeFamily::Collocated { class, index } => {
                format!("collocated(class={class}, index={index})")
            }
        })
    }

    /// Dimensions of the degenerate eigenspaces, in spectral order.
    fn eigenspace_sizes(&self) -> Vec<usize> {
        self.inner.eigenspace_ranges().iter().map(|r| r.len()).collect()
    }

    /// True when the 1-based window {k, ..., k+n-1} contains only whole
    /// eigenspaces.
    fn aligned(&self, k: usize, n: usize) -> bool {
        packets::is_eigenspace_aligned(&self.inner, k, n)
    }

    fn domain(&self) -> Domain {
        Domain { spec: self.inner.domain.clone() }
    }
}

/// Per-mode boundary functionals (E, E_w, E_|w|, Rellich residual) for one
/// spectrum-grid pair; all packet statistics read from here.
#[pyclass(frozen)]
struct Functionals {
    inner: SpectrumFunctionals,
}

#[pymethods]
impl Functionals {
    #[staticmethod]
    fn compute(spectrum: &Spectrum, grid: &Grid, weights: Vec<PyRef<'_, Weight>>) -> PyResult<Self> {
        let ws: Vec<functionals::Weight> = weights.iter().map(|w| w.w.clone()).collect();
        Ok(Functionals {
            inner: compute_functionals(&spectrum.inner, &grid.grid, &ws).map_err(err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn lambdas(&self) -> Vec<f64> {
        self.inner.lambdas.clone()
    }

    /// Boundary energies E_k = integral of |d_n u_k|^2.
    fn energies(&self) -> Vec<f64> {
        self.inner.energies.clone()
    }

    /// Relative Rellich residuals |integral g rho - 2 lambda| / (2 lambda).
    fn rellich_residuals(&self) -> Vec<f64> {
        self.inner.rellich.clone()
    }

    fn max_rellich_residual(&self) -> f64 {
        self.inner.rellich.iter().fold(0.0_f64, |a, r| a.max(*r))
    }

    /// Weighted energies E_k(w) for a named weight.
    fn weighted(&self, name: &str) -> PyResult<Vec<f64>> {
        let i = self.inner.weight_index(name).map_err(err)?;
        Ok(self.inner.weighted[i].clone())
    }

    fn weighted_abs(&self, name: &str) -> PyResult<Vec<f64>> {
        let i = self.inner.weight_index(name).map_err(err)?;
        Ok(self.inner.weighted_abs[i].clone())
    }

    /// Correlation coefficients C_k(w) = E_k(w) / E_k.
    fn correlations(&self, name: &str) -> PyResult<Vec<f64>> {
        let i = self.inner.weight_index(name).map_err(err)?;
        Ok(self
            .inner
            .weighted[i]
            .iter()
            .zip(&self.inner.energies)
            .map(|(w, e)| w / e)
            .collect())
    }

    /// Cumulative boundary energy S(Lambda) = sum of E_j over lambda_j <= Lambda.
    fn s_lambda(&self, lambda: f64) -> PyResult<f64> {
        self.inner.s_lambda(lambda).map_err(err)
    }

    /// Cumulative pairing Q_Lambda(w) = sum of E_j(w) over lambda_j <= Lambda.
    fn q_pairing(&self, lambda: f64, name: &str) -> PyResult<f64> {
        self.inner.q_lambda_pairing(lambda, name).map_err(err)
    }
}

/// Threshold exponent theta(d, level): packets must grow faster than
/// k^theta for guaranteed cancellation; reported floored at zero.
#[pyfunction]
fn threshold_exponent(d: u32, level: u8) -> PyResult<f64> {
    packets::threshold_exponent(d, level).map_err(err)
}

/// Envelope value k^theta / N_k at the invoked moment level.
#[pyfunction]
fn cancellation_rate_bound(k: usize, n_k: usize, d: u32, level: u8) -> PyResult<f64> {
    packets::cancellation_rate_bound(k, n_k, d, level).map_err(err)
}

/// Packet length N_k = max(n_min, ceil(k^alpha)).
#[pyfunction]
fn packet_size(k: usize, alpha: f64, n_min: usize) -> usize {
    packets::packet_size(k, alpha, n_min)
}

fn fit_dict<'py>(py: Python<'py>, fit: &packets::RateFit) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("slope", fit.slope)?;
    d.set_item("intercept", fit.intercept)?;
    d.set_item("r_squared", fit.r_squared)?;
    d.set_item("n_points", fit.n_points)?;
    Ok(d)
}

/// Least-squares line through (log x, log |y|).
#[pyfunction]
fn rate_fit<'py>(py: Python<'py>, xs: Vec<f64>, ys: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let fit = packets::rate_fit(&xs, &ys).map_err(err)?;
    fit_dict(py, &fit)
}

/// Batch packet statistics over a k list. `corr_weights` pairs weight
/// names with the moment level to invoke for the envelope. Returns one
/// dict per k with ratio, correlation averages, envelopes, and alignment.
#[pyfunction]
#[pyo3(signature = (spectrum, functionals, alpha, n_min, k_list, corr_weights))]
fn packet_stats<'py>(
    py: Python<'py>,
    spectrum: &Spectrum,
    functionals: &Functionals,
    alpha: f64,
    n_min: usize,
    k_list: Vec<usize>,
    corr_weights: Vec<(String, u8)>,
) -> PyResult<Bound<'py, PyList>> {
    let schedule = packets::PacketSchedule::new(alpha, n_min, k_list).map_err(err)?;
    let stats = packets::packet_stats(&spectrum.inner, &functionals.inner, &schedule, &corr_weights)
        .map_err(err)?;
    let out = PyList::empty(py);
    for s in &stats {
        let d = PyDict::new(py);
        d.set_item("k", s.k)?;
        d.set_item("n_k", s.n_k)?;
        d.set_item("lambda_k", s.lambda_k)?;
        d.set_item("packet_energy", s.packet_energy)?;
        d.set_item("ratio", s.ratio)?;
        let corr = PyDict::new(py);
        let env = PyDict::new(py);
        for (i, (name, _)) in corr_weights.iter().enumerate() {
            corr.set_item(name, s.corr_avg[i])?;
            env.set_item(name, s.envelope[i])?;
        }
        d.set_item("corr_avg", corr)?;
        d.set_item("envelope", env)?;
        d.set_item("aligned", s.aligned)?;
        out.append(d)?;
    }
    Ok(out)
}

/// Single-mode to packet energy ratio E_k / sum over the window of n modes.
#[pyfunction]
fn window_ratio(functionals: &Functionals, k: usize, n: usize) -> PyResult<f64> {
    packets::window_ratio(&functionals.inner, k, n).map_err(err)
}

/// Direct per-mode packet pairing vs cumulative Q differencing; the two
/// agree on eigenspace-aligned windows.
#[pyfunction]
fn telescoping_pair(
    spectrum: &Spectrum,
    functionals: &Functionals,
    k: usize,
    n: usize,
    weight_name: &str,
) -> PyResult<(f64, f64)> {
    packets::telescoping_pair(&spectrum.inner, &functionals.inner, k, n, weight_name).map_err(err)
}

/// One-term counting fit N(Lambda) ~ constant * Lambda^{d/2} with the
/// predicted constant for reference.
#[pyfunction]
fn weyl_count_fit<'py>(
    py: Python<'py>,
    spectrum: &Spectrum,
    lambda_lo: f64,
    lambda_hi: f64,
    n_samples: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let fit =
        packets::weyl_count_fit(&spectrum.inner, lambda_lo, lambda_hi, n_samples).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("exponent", fit.exponent)?;
    d.set_item("r_squared", fit.r_squared)?;
    d.set_item("constant", fit.constant)?;
    d.set_item("reference", fit.reference)?;
    Ok(d)
}

/// Cumulative boundary-energy fit S(Lambda) ~ constant * Lambda^{1 + d/2}.
#[pyfunction]
fn weyl_boundary_fit<'py>(
    py: Python<'py>,
    functionals: &Functionals,
    d: usize,
    lambda_lo: f64,
    lambda_hi: f64,
    n_samples: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let fit = packets::weyl_boundary_fit(&functionals.inner, d, lambda_lo, lambda_hi, n_samples)
        .map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("exponent", fit.exponent)?;
    out.set_item("r_squared", fit.r_squared)?;
    out.set_item("constant", fit.constant)?;
    Ok(out)
}

/// Two-term pairing regression Q(Lambda; w) against Lambda^{(d+1)/2} and
/// Lambda^{d/2}; zero-mean weights should zero the leading coefficient.
#[pyfunction]
fn weyl_pairing_fit<'py>(
    py: Python<'py>,
    functionals: &Functionals,
    d: usize,
    weight_name: &str,
    lambda_lo: f64,
    lambda_hi: f64,
    n_samples: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let fit = packets::weyl_pairing_fit(
        &functionals.inner,
        d,
        weight_name,
        lambda_lo,
        lambda_hi,
        n_samples,
    )
    .map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("leading", fit.leading)?;
    out.set_item("leading_se", fit.leading_se)?;
    out.set_item("second", fit.second)?;
    out.set_item("second_se", fit.second_se)?;
    out.set_item("r_squared", fit.r_squared)?;
    out.set_item("leading_share", fit.leading_share)?;
    out.set_item("consistent_with_zero", fit.consistent_with_zero)?;
    Ok(out)
}

/// Max relative change of eigenspace density, energy, and weighted energy
/// under a seeded random orthogonal remix of one eigenspace's basis.
#[pyfunction]
fn basis_mixing_check(
    spectrum: &Spectrum,
    grid: &Grid,
    weight: &Weight,
    eigenspace_id: usize,
    seed: u64,
) -> PyResult<f64> {
    packets::basis_mixing_check(&spectrum.inner, &grid.grid, &weight.w, eigenspace_id, seed)
        .map_err(err)
}

/// Run the full experiment pipeline from a config file, with optional
/// `key=value` overrides. Returns overall pass/fail, per-check results,
/// and the artifact list.
#[pyfunction]
#[pyo3(signature = (config_path, overrides = vec![]))]
fn run<'py>(
    py: Python<'py>,
    config_path: &str,
    overrides: Vec<String>,
) -> PyResult<Bound<'py, PyDict>> {
    let loaded = harness::load_config(Path::new(config_path), &overrides).map_err(err)?;
    let report = harness::run_all(&loaded).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("passed", report.passed)?;
    let checks = PyList::empty(py);
    for c in &report.checks {
        let d = PyDict::new(py);
        d.set_item("name", &c.name)?;
        d.set_item("passed", c.passed)?;
        d.set_item("detail", &c.detail)?;
        checks.append(d)?;
    }
    out.set_item("checks", checks)?;
    out.set_item("artifacts", report.artifacts.clone())?;
    Ok(out)
}

#[pymodule]
fn speclab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Domain>()?;
    m.add_class::<Grid>()?;
    m.add_class::<Weight>()?;
    m.add_class::<Spectrum>()?;
    m.add_class::<Functionals>()?;
    m.add_function(wrap_pyfunction!(threshold_exponent, m)?)?;
    m.add_function(wrap_pyfunction!(cancellation_rate_bound, m)?)?;
    m.add_function(wrap_pyfunction!(packet_size, m)?)?;
    m.add_function(wrap_pyfunction!(rate_fit, m)?)?;
    m.add_function(wrap_pyfunction!(packet_stats, m)?)?;
    m.add_function(wrap_pyfunction!(window_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(telescoping_pair, m)?)?;
    m.add_function(wrap_pyfunction!(weyl_count_fit, m)?)?;
    m.add_function(wrap_pyfunction!(weyl_boundary_fit, m)?)?;
    m.add_function(wrap_pyfunction!(weyl_pairing_fit, m)?)?;
    m.add_function(wrap_pyfunction!(basis_mixing_check, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
