//! High-energy closeness of full-line `Mhat_1` for two profiles that agree near `x0`.
//!
//! If the profiles coincide on `[x0 - a, x0 + a]` the difference decays like
//! `e^{-2 a Im sqrt(z)}` along rays, so a straight-line fit of `log |Delta|`
//! against `Im sqrt(z)` has slope `-2a`.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{op_norm, principal_zeta};
use crate::numerics::Numerics;
use crate::potential::PotentialProfile;
use crate::susy::mhat_full;

/// Deltas at or below this are excluded from the fit.
pub const DELTA_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub ray_angle: f64,
    pub radii: Vec<f64>,
    pub deltas: Vec<f64>,
    /// `Im sqrt(z)` per radius.
    pub im_sqrt: Vec<f64>,
    /// Weight `w` of the `w log|z|` term added to `log |Delta|` before fitting.
    pub log_z_weight: f64,
    pub fitted_a: f64,
    pub intercept: f64,
    /// Root-mean-square deviation of the fitted line.
    pub fit_residual: f64,
    pub usable: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BmOptions {
    pub log_z_weight: f64,
}

impl Default for BmOptions {
    fn default() -> Self {
        BmOptions { log_z_weight: 0.0 }
    }
}

/// `n` log-spaced radii in `[lo, hi]`.
pub fn log_radii(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|k| (lo.ln() + (hi.ln() - lo.ln()) * k as f64 / (n - 1) as f64).exp()).collect()
}

fn check_ray(p1: &PotentialProfile, p2: &PotentialProfile, theta: f64, radii: &[f64]) -> Result<()> {
    if p1.m != p2.m {
        return Err(Error::InvalidArgument(format!("profiles have m = {} and m = {}", p1.m, p2.m)));
    }
    let s = theta.sin();
    if !theta.is_finite() || s.abs() < 1e-12 {
        return Err(Error::InvalidArgument(format!("ray angle {theta} lies on the real axis")));
    }
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
        return Err(Error::InvalidArgument("radii must be positive and finite".into()));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("radii must be strictly increasing".into()));
    }
    Ok(())
}

/// `||Mhat_1^(1)(z, x0) - Mhat_1^(2)(z, x0)||` at `z = r e^{i theta}`.
pub fn bm_deltas(
    p1: &PotentialProfile,
    p2: &PotentialProfile,
    x0: f64,
    theta: f64,
    radii: &[f64],
    num: &Numerics,
) -> Result<Vec<f64>> {
    check_ray(p1, p2, theta, radii)?;
    radii
        .par_iter()
        .map(|&r| {
            let z = C64::from_polar(r, theta);
            let a = mhat_full(p1, z, x0, 1, num)?.matrix();
            let b = mhat_full(p2, z, x0, 1, num)?.matrix();
            Ok(op_norm(&(a - b)))
        })
        .collect()
}

pub fn bm_decay_experiment(
    p1: &PotentialProfile,
    p2: &PotentialProfile,
    x0: f64,
    theta: f64,
    radii: &[f64],
    opts: &BmOptions,
    num: &Numerics,
) -> Result<DecayFit> {
    let deltas = bm_deltas(p1, p2, x0, theta, radii, num)?;
    let im_sqrt: Vec<f64> = radii
        .iter()
        .map(|&r| principal_zeta(C64::from_polar(r, theta)).map(|sp| sp.zeta.im))
        .collect::<Result<_>>()?;
    let pts: Vec<(f64, f64)> = (0..radii.len())
        .filter(|&k| deltas[k] > DELTA_FLOOR && deltas[k].is_finite())
        .map(|k| (im_sqrt[k], deltas[k].ln() + opts.log_z_weight * radii[k].ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::DegenerateFit { usable: pts.len() });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::DegenerateFit { usable: pts.len() });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / n).sqrt();
    Ok(DecayFit {
        ray_angle: theta,
        radii: radii.to_vec(),
        deltas,
        im_sqrt,
        log_z_weight: opts.log_z_weight,
        fitted_a: -slope / 2.0,
        intercept,
        fit_residual: rms,
        usable: pts.len(),
    })
}
