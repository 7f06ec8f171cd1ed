//! Spectral measures by Stieltjes inversion, the generalized Fourier transform of `H_j`,
//! and a Parseval check.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{hermitian_imag, hermitian_real, identity, mat_exp, max_abs, zeros, CMatrix};
use crate::numerics::{validate_eps_schedule, Numerics};
use crate::potential::PotentialProfile;
use crate::propagate::{check_index, Propagator, System};
use crate::quad;
use crate::susy::{mhat, mhat_full};
use crate::weyl::{fullline_m_dirac, BoundaryFrame, Side, WeylEngine};

/// Which Herglotz function a density is taken from. Minus-side functions are negated so that all are Herglotz.
fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MSource {
    DiracHalf(Side),
    DiracFull,
    MhatHalf(Side, u8),
    MhatFull(u8),
}

impl MSource {
    /// Accepts `MD+`, `MD-`, `MD`, `Mhat+1`, `Mhat-2`, `Mhat1`, `Mhat2`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown m-function source '{s}' (expected MD+, MD-, MD, Mhat+j, Mhat-j or Mhatj)"));
        let side_of = |c: char| match c {
            '+' => Some(Side::Plus),
            '-' => Some(Side::Minus),
            _ => None,
        };
        if let Some(rest) = s.strip_prefix("Mhat") {
            let mut chars = rest.chars();
            let first = chars.next().ok_or_else(bad)?;
            if let Some(side) = side_of(first) {
                let j: u8 = chars.as_str().parse().map_err(|_| bad())?;
                check_index(j)?;
                return Ok(MSource::MhatHalf(side, j));
            }
            let j: u8 = rest.parse().map_err(|_| bad())?;
            check_index(j)?;
            return Ok(MSource::MhatFull(j));
        }
        if let Some(rest) = s.strip_prefix("MD") {
            return match rest {
                "" => Ok(MSource::DiracFull),
                "+" => Ok(MSource::DiracHalf(Side::Plus)),
                "-" => Ok(MSource::DiracHalf(Side::Minus)),
                _ => Err(bad()),
            };
        }
        Err(bad())
    }

    pub fn label(&self) -> String {
        match *self {
            MSource::DiracHalf(side) => format!("MD{}", side.label()),
            MSource::DiracFull => "MD".into(),
            MSource::MhatHalf(side, j) => format!("Mhat{}{j}", side.label()),
            MSource::MhatFull(j) => format!("Mhat{j}"),
        }
    }

    pub fn is_dirac(&self) -> bool {
        matches!(self, MSource::DiracHalf(_) | MSource::DiracFull)
    }

    /// Herglotz-oriented value at `w`, which is `zeta` for Dirac sources and `z` otherwise.
    pub fn evaluate(&self, p: &PotentialProfile, x0: f64, w: C64, num: &Numerics) -> Result<CMatrix> {
        let a0 = BoundaryFrame::standard(p.m);
        match *self {
            MSource::DiracHalf(side) => {
                let e = WeylEngine::new(p, w, num)?;
                Ok(e.solution(side, x0, &a0)?.m * C64::new(side.sign(), 0.0))
            }
            MSource::DiracFull => {
                let e = WeylEngine::new(p, w, num)?;
                let mp = e.solution(Side::Plus, x0, &a0)?.m;
                let mm = e.solution(Side::Minus, x0, &a0)?.m;
                Ok(fullline_m_dirac(&mp, &mm, num.cond_max)?.matrix())
            }
            MSource::MhatHalf(side, j) => Ok(mhat(p, w, x0, side, j, num)? * C64::new(side.sign(), 0.0)),
            MSource::MhatFull(j) => Ok(mhat_full(p, w, x0, j, num)?.matrix()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDensityEstimate {
    pub source: MSource,
    pub x0: f64,
    pub lambda_grid: Vec<f64>,
    /// `(1/pi) Im M(lambda + i0)`, extrapolated from the schedule.
    pub densities: Vec<CMatrix>,
    pub eps_schedule: Vec<f64>,
    /// Change between the last two extrapolants, per grid point.
    pub extrapolation_residual: Vec<f64>,
}

/// Linear extrapolation to `eps = 0` from consecutive pairs; returns the last extrapolant and its last change.
pub fn richardson(eps: &[f64], values: &[CMatrix]) -> (CMatrix, f64) {
    let ext: Vec<CMatrix> = eps
        .windows(2)
        .zip(values.windows(2))
        .map(|(e, v)| (&v[1] * re(e[0]) - &v[0] * re(e[1])) / C64::new(e[0] - e[1], 0.0))
        .collect();
    let last = ext.last().cloned().unwrap_or_else(|| values[values.len() - 1].clone());
    let change = if ext.len() >= 2 { max_abs(&(&ext[ext.len() - 1] - &ext[ext.len() - 2])) } else { f64::INFINITY };
    (last, change)
}

pub fn spectral_density(
    p: &PotentialProfile,
    source: MSource,
    x0: f64,
    lambda_grid: &[f64],
    eps_schedule: &[f64],
    num: &Numerics,
) -> Result<SpectralDensityEstimate> {
    validate_eps_schedule(eps_schedule).map_err(Error::InvalidArgument)?;
    let per_point: Vec<Result<(CMatrix, f64)>> = lambda_grid
        .par_iter()
        .map(|&lambda| {
            let vals = eps_schedule
                .iter()
                .map(|&eps| {
                    source
                        .evaluate(p, x0, C64::new(lambda, eps), num)
                        .map(|m| hermitian_imag(&m) * re(1.0 / std::f64::consts::PI))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(richardson(eps_schedule, &vals))
        })
        .collect();
    let mut densities = Vec::with_capacity(lambda_grid.len());
    let mut residual = Vec::with_capacity(lambda_grid.len());
    for r in per_point {
        let (d, c) = r?;
        densities.push(d);
        residual.push(c);
    }
    Ok(SpectralDensityEstimate {
        source,
        x0,
        lambda_grid: lambda_grid.to_vec(),
        densities,
        eps_schedule: eps_schedule.to_vec(),
        extrapolation_residual: residual,
    })
}

pub const ATOM_PROBE_EPS: [f64; 3] = [1e-4, 5e-5, 2.5e-5];
/// Largest relative change between successive probe values still read as a point mass.
pub const ATOM_SPREAD_MAX: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMass {
    pub location: f64,
    pub mass: CMatrix,
    /// Relative change between the last two raw probe values; a continuous density gives O(1) here.
    pub spread: f64,
    pub detected: bool,
}

/// Mass of `source` at `location`, from `eps M(location - eps)` below the spectrum or `eps Im M(location + i eps)` inside it.
pub fn probe_point_mass(
    p: &PotentialProfile,
    source: MSource,
    x0: f64,
    location: f64,
    probe_eps: &[f64],
    num: &Numerics,
) -> Result<PointMass> {
    validate_eps_schedule(probe_eps).map_err(Error::InvalidArgument)?;
    let real_approach = !source.is_dirac() && location - probe_eps[0] < 0.0;
    let raw = probe_eps
        .iter()
        .map(|&e| {
            if real_approach {
                source.evaluate(p, x0, C64::new(location - e, 0.0), num).map(|m| hermitian_real(&m) * re(e))
            } else {
                source.evaluate(p, x0, C64::new(location, e), num).map(|m| hermitian_imag(&m) * re(e))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let n = raw.len();
    let scale = max_abs(&raw[n - 1]);
    let spread = if scale > 0.0 { max_abs(&(&raw[n - 1] - &raw[n - 2])) / scale } else { f64::INFINITY };
    let (mass, _) = richardson(probe_eps, &raw);
    let detected = spread <= ATOM_SPREAD_MAX && max_abs(&mass) > 1e-8;
    Ok(PointMass { location, mass, spread, detected })
}

/// Compactly supported `C^m`-valued test function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CompactFunction {
    /// `v` on `[a, b]`.
    Indicator { a: f64, b: f64, v: Vec<C64> },
    /// `v e^{-rate |x - center|}` for `|x - center| <= half_width`.
    ExpDecay { center: f64, rate: f64, half_width: f64, v: Vec<C64> },
    /// Uniform samples on `[a, b]`, linearly interpolated.
    Samples { a: f64, b: f64, values: Vec<Vec<C64>> },
    Combination(Vec<(C64, CompactFunction)>),
}

impl CompactFunction {
    pub fn dim(&self) -> usize {
        match self {
            CompactFunction::Indicator { v, .. } | CompactFunction::ExpDecay { v, .. } => v.len(),
            CompactFunction::Samples { values, .. } => values.first().map_or(0, |v| v.len()),
            CompactFunction::Combination(list) => list.first().map_or(0, |(_, f)| f.dim()),
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        match self {
            CompactFunction::Indicator { a, b, .. } if !(a < b) => bad(format!("empty support [{a}, {b}]")),
            CompactFunction::ExpDecay { half_width, rate, .. } if !(*half_width > 0.0) || !rate.is_finite() => {
                bad(format!("exp-decay function needs half_width > 0 and finite rate, got {half_width}, {rate}"))
            }
            CompactFunction::Samples { a, b, values } if !(a < b) || values.len() < 2 => {
                bad(format!("sampled function needs a < b and at least 2 samples, got [{a}, {b}] with {}", values.len()))
            }
            CompactFunction::Samples { values, .. } if values.iter().any(|v| v.len() != m) => {
                bad(format!("every sample must have length m = {m}"))
            }
            CompactFunction::Combination(list) if list.is_empty() => bad("empty combination".into()),
            CompactFunction::Combination(list) => list.iter().try_for_each(|(_, f)| f.validate(m)),
            f if f.dim() != m => bad(format!("function has {} components, profile has m = {m}", f.dim())),
            _ => Ok(()),
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match self {
            CompactFunction::Indicator { a, b, .. } | CompactFunction::Samples { a, b, .. } => (*a, *b),
            CompactFunction::ExpDecay { center, half_width, .. } => (center - half_width, center + half_width),
            CompactFunction::Combination(list) => list
                .iter()
                .map(|(_, f)| f.support())
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, r), (a, b)| (l.min(a), r.max(b))),
        }
    }

    /// Points where the function is not smooth.
    pub fn breaks(&self) -> Vec<f64> {
        match self {
            CompactFunction::Indicator { a, b, .. } => vec![*a, *b],
            CompactFunction::ExpDecay { center, half_width, .. } => {
                vec![center - half_width, *center, center + half_width]
            }
            CompactFunction::Samples { a, b, values } => {
                let n = values.len() - 1;
                (0..=n).map(|k| a + (b - a) * k as f64 / n as f64).collect()
            }
            CompactFunction::Combination(list) => list.iter().flat_map(|(_, f)| f.breaks()).collect(),
        }
    }

    /// Value as an m x 1 column.
    pub fn eval(&self, x: f64) -> CMatrix {
        let col = |v: &[C64], s: f64| CMatrix::from_iterator(v.len(), 1, v.iter().map(|c| c * s));
        match self {
            CompactFunction::Indicator { a, b, v } => col(v, if x >= *a && x <= *b { 1.0 } else { 0.0 }),
            CompactFunction::ExpDecay { center, rate, half_width, v } => {
                let d = (x - center).abs();
                col(v, if d <= *half_width { (-rate * d).exp() } else { 0.0 })
            }
            CompactFunction::Samples { a, b, values } => {
                let m = values[0].len();
                if x < *a || x > *b {
                    return zeros(m, 1);
                }
                let n = values.len() - 1;
                let t = ((x - a) / (b - a) * n as f64).clamp(0.0, n as f64);
                let k = (t.floor() as usize).min(n - 1);
                let s = t - k as f64;
                CMatrix::from_iterator(m, 1, (0..m).map(|i| values[k][i] * (1.0 - s) + values[k + 1][i] * s))
            }
            CompactFunction::Combination(list) => {
                let mut out = zeros(self.dim(), 1);
                for (c, f) in list {
                    out += f.eval(x) * *c;
                }
                out
            }
        }
    }

    /// `||f||^2` by the same composite rule used for the transform.
    pub fn norm_sq(&self, breaks: &[f64]) -> f64 {
        nodes_for(self, breaks, 0.25).iter().map(|(x, w)| w * self.eval(*x).norm_squared()).sum()
    }
}

fn nodes_for(f: &CompactFunction, profile_breaks: &[f64], width: f64) -> Vec<(f64, f64)> {
    let (a, b) = f.support();
    let mut breaks = f.breaks();
    breaks.extend_from_slice(profile_breaks);
    quad::composite_nodes(&quad::panels(a, b, &breaks, width))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformCoefficients {
    pub j: u8,
    pub lambda: f64,
    /// `int c(lambda, x)* f(x) dx`.
    pub h0: Vec<C64>,
    /// `int s(lambda, x)* f(x) dx`.
    pub h1: Vec<C64>,
}

impl TransformCoefficients {
    /// `(h0; h1)` as a 2m x 1 column.
    pub fn stacked(&self) -> CMatrix {
        CMatrix::from_iterator(2 * self.h0.len(), 1, self.h0.iter().chain(&self.h1).copied())
    }
}

fn constant_phi(p: &PotentialProfile, pieces: &[crate::potential::Piece], s: f64, t: f64) -> Option<CMatrix> {
    if t <= p.lo() {
        return Some(p.tail_left.clone());
    }
    if s >= p.hi() {
        return Some(p.tail_right.clone());
    }
    pieces.iter().find(|q| q.a <= s && t <= q.b && q.constant).map(|q| q.base.clone())
}

/// Fundamental matrices `[[c, s], [c^[1,j], s^[1,j]]]` at the nodes of consecutive panels.
/// On constant pieces one set of node exponentials is reused for every panel of the same width.
fn frames_on_panels(
    p: &PotentialProfile,
    system: System,
    x0: f64,
    panels: &[(f64, f64)],
    num: &Numerics,
) -> Result<Vec<CMatrix>> {
    let prop = Propagator::new(p, system, num);
    let pieces = p.pieces();
    let (nodes, _) = quad::gl16();
    let mut out = Vec::with_capacity(panels.len() * nodes.len());
    let mut cursor: Option<(f64, CMatrix)> = None;
    let mut cache: Option<(f64, CMatrix, Vec<CMatrix>, CMatrix)> = None;
    for &(s, t) in panels {
        let ys = match &cursor {
            Some((x, y)) if *x == s => y.clone(),
            _ => prop.advance(&identity(2 * p.m), x0, s)?,
        };
        let h = t - s;
        let xs: Vec<f64> = nodes.iter().map(|u| s + 0.5 * h * (u + 1.0)).collect();
        let end = match constant_phi(p, &pieces, s, t) {
            Some(phi) => {
                let k = system.generator(&phi);
                let hit = matches!(&cache, Some((w, kk, _, _)) if *w == h && *kk == k);
                if !hit {
                    let exps = xs.iter().map(|x| mat_exp(&(&k * C64::new(x - s, 0.0)))).collect();
                    let full = mat_exp(&(&k * C64::new(h, 0.0)));
                    cache = Some((h, k, exps, full));
                }
                let (_, _, exps, full) = cache.as_ref().expect("cache filled above");
                out.extend(exps.iter().map(|e| e * &ys));
                full * &ys
            }
            None => {
                let mut targets = xs.clone();
                targets.push(t);
                let mut vals = prop.march(&ys, s, &targets)?;
                let end = vals.pop().expect("end point requested");
                out.extend(vals);
                end
            }
        };
        if !crate::matcore::is_finite(&end) || max_abs(&end) > num.overflow {
            return Err(Error::ill("transform", format!("fundamental system overflowed near x = {t}")));
        }
        cursor = Some((t, end));
    }
    Ok(out)
}

fn transform_width(lambda: f64) -> f64 {
    (3.0 / (1.0 + lambda.abs().sqrt())).min(0.5)
}

/// Generalized Fourier coefficients of `f` for `H_j` at real `lambda`.
pub fn transform_hat(
    p: &PotentialProfile,
    j: u8,
    f: &CompactFunction,
    x0: f64,
    lambda: f64,
    num: &Numerics,
) -> Result<TransformCoefficients> {
    check_index(j)?;
    f.validate(p.m)?;
    if !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("lambda must be finite, got {lambda}")));
    }
    let m = p.m;
    let (a, b) = f.support();
    let mut breaks = f.breaks();
    breaks.extend(p.nodes());
    let panels = quad::panels(a, b, &breaks, transform_width(lambda));
    let frames = frames_on_panels(p, System::Schrodinger { j, z: C64::new(lambda, 0.0) }, x0, &panels, num)?;
    let nodes = quad::composite_nodes(&panels);
    let mut h0 = zeros(m, 1);
    let mut h1 = zeros(m, 1);
    for ((x, w), y) in nodes.iter().zip(&frames) {
        let fx = f.eval(*x) * C64::new(*w, 0.0);
        h0 += y.view((0, 0), (m, m)).adjoint() * &fx;
        h1 += y.view((0, m), (m, m)).adjoint() * &fx;
    }
    Ok(TransformCoefficients { j, lambda, h0: h0.iter().copied().collect(), h1: h1.iter().copied().collect() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsevalOptions {
    /// Upper end of the spectral window `[0, window]`.
    pub window: f64,
    /// Largest panel in the variable `k = sqrt(lambda)`.
    pub k_panel: f64,
    /// Relative offsets `eta` for `z = lambda (1 + i eta)`, extrapolated to 0.
    pub eta_schedule: Vec<f64>,
    pub target: f64,
    /// Extra point-mass candidates besides 0.
    pub candidates: Vec<f64>,
    pub include_atoms: bool,
}

impl Default for ParsevalOptions {
    fn default() -> Self {
        ParsevalOptions {
            window: 400.0,
            k_panel: 0.25,
            eta_schedule: vec![1e-2, 5e-3, 2.5e-3],
            target: 0.02,
            candidates: Vec::new(),
            include_atoms: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomContribution {
    pub atom: PointMass,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsevalReport {
    pub j: u8,
    pub norm_sq: f64,
    /// Absolutely continuous part over the window.
    pub continuum: f64,
    pub atoms: Vec<AtomContribution>,
    /// Estimated contribution beyond the window, already included in `total`.
    pub tail_estimate: f64,
    pub tail_uncertainty: f64,
    pub total: f64,
    pub relative_error: f64,
    /// Same comparison with the point masses left out.
    pub relative_error_without_atoms: f64,
}

/// Compares `||f||^2` with `int (f^, dOmega_j f^)` over `[0, window]` plus probed point masses and a tail estimate.
pub fn parseval_check(
    p: &PotentialProfile,
    j: u8,
    f: &CompactFunction,
    x0: f64,
    opts: &ParsevalOptions,
    num: &Numerics,
) -> Result<ParsevalReport> {
    check_index(j)?;
    f.validate(p.m)?;
    validate_eps_schedule(&opts.eta_schedule).map_err(Error::InvalidArgument)?;
    if !(opts.window > 0.0) || !(opts.k_panel > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "window and k_panel must be positive, got {} and {}",
            opts.window, opts.k_panel
        )));
    }
    let norm_sq = f.norm_sq(&p.nodes());
    let source = MSource::MhatFull(j);
    let mut atoms = Vec::new();
    if opts.include_atoms {
        let mut locations = vec![0.0];
        locations.extend(opts.candidates.iter().copied());
        for loc in locations {
            let atom = probe_point_mass(p, source, x0, loc, &ATOM_PROBE_EPS, num)?;
            if atom.detected {
                let h = transform_hat(p, j, f, x0, loc, num)?.stacked();
                let contribution = (h.adjoint() * &atom.mass * &h)[(0, 0)].re;
                atoms.push(AtomContribution { atom, contribution });
            }
        }
    }

    // The ray z = lambda (1 + i eta) reaches the real axis as lambda -> 0, so the proximity guard is lifted here.
    let relaxed = Numerics { delta_spec: f64::MIN_POSITIVE, ..num.clone() };
    let kmax = opts.window.sqrt();
    let panels = quad::panels(0.0, kmax, &[0.25 * kmax, 0.5 * kmax], opts.k_panel);
    let nodes = quad::composite_nodes(&panels);
    let values: Vec<Result<f64>> = nodes
        .par_iter()
        .map(|&(k, _)| {
            let lambda = k * k;
            let h = transform_hat(p, j, f, x0, lambda, num)?.stacked();
            let dens = opts
                .eta_schedule
                .iter()
                .map(|&eta| {
                    let z = C64::new(lambda, lambda * eta);
                    let mut mm = mhat_full(p, z, x0, j, &relaxed)?.matrix();
                    for a in &atoms {
                        mm += &a.atom.mass / (z - a.atom.location);
                    }
                    Ok(hermitian_imag(&mm) * re(1.0 / std::f64::consts::PI))
                })
                .collect::<Result<Vec<_>>>()?;
            let (rho, _) = richardson(&opts.eta_schedule, &dens);
            Ok(2.0 * k * (h.adjoint() * rho * &h)[(0, 0)].re)
        })
        .collect();
    let mut continuum = 0.0;
    let mut upper = 0.0;
    let mut middle = 0.0;
    for ((k, w), v) in nodes.iter().zip(values) {
        let g = w * v?;
        continuum += g;
        if *k > 0.5 * kmax {
            upper += g;
        } else if *k > 0.25 * kmax {
            middle += g;
        }
    }
    // The integrand falls like k^-2 for a jump in f, so the mass beyond K matches the mass on [K/2, K].
    let tail_estimate = upper;
    let tail_uncertainty = (upper - 0.5 * middle).abs();
    let atom_total: f64 = atoms.iter().map(|a| a.contribution).sum();
    let total = continuum + tail_estimate + atom_total;
    let rel = |v: f64| if norm_sq > 0.0 { (v - norm_sq).abs() / norm_sq } else { v.abs() };
    if norm_sq > 0.0 && tail_uncertainty > opts.target * norm_sq {
        return Err(Error::WindowTooSmall { tail: tail_uncertainty / norm_sq, tolerance: opts.target });
    }
    Ok(ParsevalReport {
        j,
        norm_sq,
        continuum,
        tail_estimate,
        tail_uncertainty,
        relative_error: rel(total),
        relative_error_without_atoms: rel(continuum + tail_estimate),
        total,
        atoms,
    })
}
