//! Python bindings. Matrices cross the boundary as nested lists of complex numbers.

use num_complex::Complex64 as C64;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

use ::susyspec as core;
use ::susyspec::{BoundaryFrame, CMatrix, CompactFunction, MSource, Side};

create_exception!(susyspec, NumericalError, PyException);

fn err(e: core::Error) -> PyErr {
    if e.is_numerical() {
        NumericalError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn rows(m: &CMatrix) -> Vec<Vec<C64>> {
    (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect()).collect()
}

fn side(s: &str) -> PyResult<Side> {
    match s {
        "+" | "plus" => Ok(Side::Plus),
        "-" | "minus" => Ok(Side::Minus),
        _ => Err(PyValueError::new_err(format!("side must be '+' or '-', got '{s}'"))),
    }
}

#[pyclass(name = "Profile", module = "susyspec", frozen)]
struct Profile {
    inner: core::PotentialProfile,
}

#[pymethods]
impl Profile {
    #[staticmethod]
    fn free(m: usize) -> Self {
        Profile { inner: core::PotentialProfile::free(m) }
    }

    #[staticmethod]
    fn constant(m: usize, c: f64) -> Self {
        Profile { inner: core::PotentialProfile::constant(m, c) }
    }

    #[staticmethod]
    fn sign(c: f64) -> Self {
        Profile { inner: core::PotentialProfile::sign(c) }
    }

    #[staticmethod]
    fn truncated_sign(c: f64, a: f64) -> Self {
        Profile { inner: core::PotentialProfile::truncated_sign(c, a) }
    }

    #[staticmethod]
    fn noncommuting() -> Self {
        Profile { inner: core::PotentialProfile::noncommuting() }
    }

    /// Parses a profile from configuration text.
    #[staticmethod]
    fn from_config(text: &str) -> PyResult<Self> {
        Ok(Profile { inner: core::parse_profile(text).map_err(err)? })
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m
    }

    #[getter]
    fn x0(&self) -> f64 {
        self.inner.x0
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.inner.breakpoints()
    }

    fn phi(&self, x: f64) -> Vec<Vec<C64>> {
        rows(&self.inner.eval_phi(x))
    }

    fn __repr__(&self) -> String {
        format!("Profile(m={}, x0={}, segments={})", self.inner.m, self.inner.x0, self.inner.segments.len())
    }
}

#[pyclass(name = "Numerics", module = "susyspec", skip_from_py_object)]
#[derive(Clone, Default)]
struct Numerics {
    inner: core::Numerics,
}

#[pymethods]
impl Numerics {
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(kwargs: Option<&Bound<'_, pyo3::types::PyDict>>) -> PyResult<Self> {
        let mut n = core::Numerics::default();
        if let Some(kw) = kwargs {
            for (k, v) in kw.iter() {
                let key: String = k.extract()?;
                match key.as_str() {
                    "tol_ode" => n.tol_ode = v.extract()?,
                    "tol_psd" => n.tol_psd = v.extract()?,
                    "delta_spec" => n.delta_spec = v.extract()?,
                    "cond_max" => n.cond_max = v.extract()?,
                    "overflow" => n.overflow = v.extract()?,
                    "eps_schedule" => n.eps_schedule = v.extract()?,
                    "tail_decay_lengths" => n.tail_decay_lengths = v.extract()?,
                    "suite_tol" => n.suite_tol = v.extract()?,
                    _ => return Err(PyValueError::new_err(format!("unknown numerics key '{key}'"))),
                }
            }
        }
        n.validate().map_err(PyValueError::new_err)?;
        Ok(Numerics { inner: n })
    }

    #[getter]
    fn tol_ode(&self) -> f64 {
        self.inner.tol_ode
    }

    #[getter]
    fn suite_tol(&self) -> f64 {
        self.inner.suite_tol
    }

    #[getter]
    fn eps_schedule(&self) -> Vec<f64> {
        self.inner.eps_schedule.clone()
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

fn numerics(n: Option<&Numerics>) -> core::Numerics {
    n.map(|n| n.inner.clone()).unwrap_or_default()
}

/// Half-line Dirac m-function at the standard boundary frame.
#[pyfunction]
#[pyo3(signature = (profile, zeta, side = "+", x0 = None, numerics = None))]
fn halfline_m_dirac(
    profile: &Profile,
    zeta: C64,
    side: &str,
    x0: Option<f64>,
    numerics: Option<&Numerics>,
) -> PyResult<Vec<Vec<C64>>> {
    let p = &profile.inner;
    let num = self::numerics(numerics);
    let w = core::halfline_m_dirac(
        p,
        zeta,
        x0.unwrap_or(p.x0),
        &BoundaryFrame::standard(p.m),
        self::side(side)?,
        None,
        &num,
    )
    .map_err(err)?;
    Ok(rows(&w.m))
}

/// Dirichlet-type m-function of `H_j` on one half-line.
#[pyfunction]
#[pyo3(signature = (profile, z, side = "+", j = 1, x0 = None, numerics = None))]
fn mhat(
    profile: &Profile,
    z: C64,
    side: &str,
    j: u8,
    x0: Option<f64>,
    numerics: Option<&Numerics>,
) -> PyResult<Vec<Vec<C64>>> {
    let p = &profile.inner;
    let m = core::mhat(p, z, x0.unwrap_or(p.x0), self::side(side)?, j, &self::numerics(numerics)).map_err(err)?;
    Ok(rows(&m))
}

/// Full-line 2m x 2m Weyl matrix of `H_j`.
#[pyfunction]
#[pyo3(signature = (profile, z, j = 1, x0 = None, numerics = None))]
fn mhat_full(
    profile: &Profile,
    z: C64,
    j: u8,
    x0: Option<f64>,
    numerics: Option<&Numerics>,
) -> PyResult<Vec<Vec<C64>>> {
    let p = &profile.inner;
    let m = core::mhat_full(p, z, x0.unwrap_or(p.x0), j, &self::numerics(numerics)).map_err(err)?;
    Ok(rows(&m.matrix()))
}

/// Green's function of `H_j`; `side=None` gives the whole line, `'+'`/`'-'` the Dirichlet half-line.
#[pyfunction]
#[pyo3(signature = (profile, z, x, xp, j = 1, side = None, x0 = None, numerics = None))]
#[allow(clippy::too_many_arguments)]
fn green_schrodinger(
    profile: &Profile,
    z: C64,
    x: f64,
    xp: f64,
    j: u8,
    side: Option<&str>,
    x0: Option<f64>,
    numerics: Option<&Numerics>,
) -> PyResult<Vec<Vec<C64>>> {
    let p = &profile.inner;
    let num = self::numerics(numerics);
    let x0 = x0.unwrap_or(p.x0);
    let g = match side {
        None => core::green_schrodinger_fullline(p, j, z, x0, x, xp, &num),
        Some(s) => core::green_schrodinger_halfline(p, j, z, x0, self::side(s)?, x, xp, &num),
    }
    .map_err(err)?;
    Ok(rows(&g))
}

#[pyfunction]
#[pyo3(signature = (profile, zeta, x, xp, x0 = None, numerics = None))]
fn green_dirac(
    profile: &Profile,
    zeta: C64,
    x: f64,
    xp: f64,
    x0: Option<f64>,
    numerics: Option<&Numerics>,
) -> PyResult<Vec<Vec<C64>>> {
    let p = &profile.inner;
    let g = core::green_dirac(
        p,
        zeta,
        x0.unwrap_or(p.x0),
        &BoundaryFrame::standard(p.m),
        x,
        xp,
        &self::numerics(numerics),
    )
    .map_err(err)?;
    Ok(rows(&g))
}

/// Stieltjes-inverted density of `which` ("MD+", "Mhat+1", "Mhat1", ...) on a grid.
/// Returns `(densities, extrapolation_residual)`.
#[pyfunction]
#[pyo3(signature = (profile, which, lambdas, x0 = None, numerics = None))]
fn spectral_density(
    profile: &Profile,
    which: &str,
    lambdas: Vec<f64>,
    x0: Option<f64>,
    numerics: Option<&Numerics>,
) -> PyResult<(Vec<Vec<Vec<C64>>>, Vec<f64>)> {
    let p = &profile.inner;
    let num = self::numerics(numerics);
    let src = MSource::parse(which).map_err(err)?;
    let d = core::spectral_density(p, src, x0.unwrap_or(p.x0), &lambdas, &num.eps_schedule, &num).map_err(err)?;
    Ok((d.densities.iter().map(rows).collect(), d.extrapolation_residual))
}

/// Probed point mass of `which` at `location`; returns `(mass, spread, detected)`.
#[pyfunction]
#[pyo3(signature = (profile, which, location, x0 = None, numerics = None))]
fn point_mass(
    profile: &Profile,
    which: &str,
    location: f64,
    x0: Option<f64>,
    numerics: Option<&Numerics>,
) -> PyResult<(Vec<Vec<C64>>, f64, bool)> {
    let p = &profile.inner;
    let src = MSource::parse(which).map_err(err)?;
    let a = core::probe_point_mass(
        p,
        src,
        x0.unwrap_or(p.x0),
        location,
        &core::spectral::ATOM_PROBE_EPS,
        &self::numerics(numerics),
    )
    .map_err(err)?;
    Ok((rows(&a.mass), a.spread, a.detected))
}

/// Parseval check for `v 1_[a, b]`; returns `(norm_sq, total, relative_error)`.
#[pyfunction]
#[pyo3(signature = (profile, j, a, b, v, window = 400.0, k_panel = 0.25, target = 0.02, x0 = None, numerics = None))]
#[allow(clippy::too_many_arguments)]
fn parseval_indicator(
    profile: &Profile,
    j: u8,
    a: f64,
    b: f64,
    v: Vec<C64>,
    window: f64,
    k_panel: f64,
    target: f64,
    x0: Option<f64>,
    numerics: Option<&Numerics>,
) -> PyResult<(f64, f64, f64)> {
    let p = &profile.inner;
    let f = CompactFunction::Indicator { a, b, v };
    let opts = core::ParsevalOptions { window, k_panel, target, ..Default::default() };
    let r = core::parseval_check(p, j, &f, x0.unwrap_or(p.x0), &opts, &self::numerics(numerics)).map_err(err)?;
    Ok((r.norm_sq, r.total, r.relative_error))
}

/// Dimensions of the kernels of `H1` and `H2`.
#[pyfunction]
#[pyo3(signature = (profile, numerics = None))]
fn kernel_dims(profile: &Profile, numerics: Option<&Numerics>) -> PyResult<(usize, usize)> {
    let (a, b) = core::kernel_modes(&profile.inner, None, &self::numerics(numerics)).map_err(err)?;
    Ok((a.dim_kernel, b.dim_kernel))
}

/// Rows `(identity, tag, residual, tolerance, passed)` of the identity suite.
#[pyfunction]
#[pyo3(signature = (profile, x0 = None, numerics = None))]
fn identity_suite(
    profile: &Profile,
    x0: Option<f64>,
    numerics: Option<&Numerics>,
) -> PyResult<Vec<(String, String, f64, f64, bool)>> {
    let p = &profile.inner;
    let zetas: Vec<C64> = core::susy::suite::DEFAULT_SUITE_ZETAS.iter().map(|&(a, b)| C64::new(a, b)).collect();
    let r = core::susy_identity_suite(p, &zetas, x0.unwrap_or(p.x0), &self::numerics(numerics)).map_err(err)?;
    Ok(r.rows.into_iter().map(|row| (row.name, row.tag, row.residual, row.tolerance, row.passed)).collect())
}

/// Decay fit of the difference of full-line `Mhat_1` along a ray; returns `(fitted_a, deltas)`.
#[pyfunction]
#[pyo3(signature = (p1, p2, theta, r_min = 4.0, r_max = 400.0, n_radii = 12, log_z_weight = 0.0, numerics = None))]
#[allow(clippy::too_many_arguments)]
fn bm_decay(
    p1: &Profile,
    p2: &Profile,
    theta: f64,
    r_min: f64,
    r_max: f64,
    n_radii: usize,
    log_z_weight: f64,
    numerics: Option<&Numerics>,
) -> PyResult<(f64, Vec<f64>)> {
    let radii = core::uniqueness::log_radii(r_min, r_max, n_radii);
    let fit = core::bm_decay_experiment(
        &p1.inner,
        &p2.inner,
        p1.inner.x0,
        theta,
        &radii,
        &core::BmOptions { log_z_weight },
        &self::numerics(numerics),
    )
    .map_err(err)?;
    Ok((fit.fitted_a, fit.deltas))
}

#[pymodule]
#[pyo3(name = "susyspec")]
fn susyspec_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Profile>()?;
    m.add_class::<Numerics>()?;
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add_function(wrap_pyfunction!(halfline_m_dirac, m)?)?;
    m.add_function(wrap_pyfunction!(mhat, m)?)?;
    m.add_function(wrap_pyfunction!(mhat_full, m)?)?;
    m.add_function(wrap_pyfunction!(green_schrodinger, m)?)?;
    m.add_function(wrap_pyfunction!(green_dirac, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_density, m)?)?;
    m.add_function(wrap_pyfunction!(point_mass, m)?)?;
    m.add_function(wrap_pyfunction!(parseval_indicator, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_dims, m)?)?;
    m.add_function(wrap_pyfunction!(identity_suite, m)?)?;
    m.add_function(wrap_pyfunction!(bm_decay, m)?)?;
    Ok(())
}
