//! Half-line and full-line Weyl-Titchmarsh data of the Dirac operator.
//!
//! The decaying solutions are written down in closed form on each constant
//! tail and transported inward across the active region, which is the
//! numerically stable direction. Writing them in the basis `Psi(zeta, ., x0, alpha)`
//! as `(C1; C2)` gives `M = C2 C1^{-1}` and the normalized Weyl solution
//! `U(x) = Y(x) C1^{-1}`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{
    bottom_half, from_blocks, hermitian_eigen, identity, invert, j_form, max_abs, top_half, vstack, zeros,
    CMatrix,
};
use crate::numerics::Numerics;
use crate::potential::PotentialProfile;
use crate::propagate::{Propagator, System};
use crate::quad;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Side::Plus => "+",
            Side::Minus => "-",
        }
    }
}

/// Boundary condition `alpha = (alpha1 alpha2)` with `alpha alpha* = I`, `alpha J alpha* = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFrame {
    alpha: CMatrix,
}

const FRAME_TOL: f64 = 1e-12;

impl BoundaryFrame {
    pub fn new(alpha: CMatrix) -> Result<Self> {
        let m = alpha.nrows();
        if m == 0 || alpha.ncols() != 2 * m {
            return Err(Error::InvalidArgument(format!(
                "boundary frame must be m x 2m, got {}x{}",
                alpha.nrows(),
                alpha.ncols()
            )));
        }
        let gram = &alpha * alpha.adjoint();
        let iso = &alpha * j_form(m) * alpha.adjoint();
        let e1 = max_abs(&(gram - identity(m)));
        let e2 = max_abs(&iso);
        if e1 > FRAME_TOL || e2 > FRAME_TOL {
            return Err(Error::InvalidArgument(format!(
                "boundary frame violates alpha alpha* = I or alpha J alpha* = 0 (residuals {e1:.2e}, {e2:.2e})"
            )));
        }
        Ok(BoundaryFrame { alpha })
    }

    /// `alpha0 = (I 0)`.
    pub fn standard(m: usize) -> Self {
        Self::rotation(m, 0.0)
    }

    /// `(cos(theta) I, sin(theta) I)`.
    pub fn rotation(m: usize, theta: f64) -> Self {
        let mut alpha = zeros(m, 2 * m);
        for k in 0..m {
            alpha[(k, k)] = C64::new(theta.cos(), 0.0);
            alpha[(k, m + k)] = C64::new(theta.sin(), 0.0);
        }
        BoundaryFrame { alpha }
    }

    /// `(cos(Theta) W, sin(Theta) W)` for Hermitian `Theta` and unitary `W`; every admissible frame has this form.
    pub fn from_hermitian_unitary(theta: &CMatrix, w: &CMatrix) -> Result<Self> {
        let cos = crate::matcore::hermitian_function(theta, |t| C64::new(t.cos(), 0.0));
        let sin = crate::matcore::hermitian_function(theta, |t| C64::new(t.sin(), 0.0));
        let m = theta.nrows();
        let mut alpha = zeros(m, 2 * m);
        alpha.view_mut((0, 0), (m, m)).copy_from(&(cos * w));
        alpha.view_mut((0, m), (m, m)).copy_from(&(sin * w));
        BoundaryFrame::new(alpha)
    }

    pub fn m(&self) -> usize {
        self.alpha.nrows()
    }

    pub fn alpha(&self) -> &CMatrix {
        &self.alpha
    }

    pub fn alpha1(&self) -> CMatrix {
        self.alpha.columns(0, self.m()).into_owned()
    }

    pub fn alpha2(&self) -> CMatrix {
        self.alpha.columns(self.m(), self.m()).into_owned()
    }

    /// `Psi(x0) = (alpha*  J alpha*)`.
    pub fn psi0(&self) -> CMatrix {
        let m = self.m();
        let a_star = self.alpha.adjoint();
        let ja = j_form(m) * &a_star;
        let mut out = zeros(2 * m, 2 * m);
        out.view_mut((0, 0), (2 * m, m)).copy_from(&a_star);
        out.view_mut((0, m), (2 * m, m)).copy_from(&ja);
        out
    }

    /// Inverse of `psi0`, which is `(alpha; -alpha J)`.
    pub fn psi0_inv(&self) -> CMatrix {
        vstack(&self.alpha, &(-(&self.alpha * j_form(self.m()))))
    }
}

/// Closed-form decaying solutions on one constant tail.
#[derive(Debug, Clone)]
pub(crate) struct TailModel {
    side: Side,
    /// Where the tail begins (last breakpoint on that side).
    pub anchor: f64,
    /// `[[U diag(zeta)], [U diag(c -+ kappa)]]`.
    vectors: CMatrix,
    pub kappa: Vec<C64>,
}

impl TailModel {
    fn new(h: &CMatrix, zeta: C64, side: Side, anchor: f64) -> Self {
        let m = h.nrows();
        let (c, u) = hermitian_eigen(h);
        let kappa: Vec<C64> = c.iter().map(|&ck| (C64::new(ck * ck, 0.0) - zeta * zeta).sqrt()).collect();
        let mut top = zeros(m, m);
        let mut bot = zeros(m, m);
        for k in 0..m {
            let lower = match side {
                Side::Plus => C64::new(c[k], 0.0) - kappa[k],
                Side::Minus => C64::new(c[k], 0.0) + kappa[k],
            };
            for r in 0..m {
                top[(r, k)] = u[(r, k)] * zeta;
                bot[(r, k)] = u[(r, k)] * lower;
            }
        }
        TailModel { side, anchor, vectors: vstack(&top, &bot), kappa }
    }

    fn decay(&self, x: f64) -> Vec<C64> {
        let d = x - self.anchor;
        self.kappa
            .iter()
            .map(|&k| match self.side {
                Side::Plus => (-k * d).exp(),
                Side::Minus => (k * d).exp(),
            })
            .collect()
    }

    fn frame_at(&self, x: f64) -> CMatrix {
        let e = self.decay(x);
        let mut y = self.vectors.clone();
        for (k, ek) in e.iter().enumerate() {
            let mut col = y.column_mut(k);
            col *= *ek;
        }
        y
    }

    fn contains(&self, x: f64) -> bool {
        match self.side {
            Side::Plus => x >= self.anchor,
            Side::Minus => x <= self.anchor,
        }
    }

    /// `int Y* W Y` over the part of the tail beyond `start` (which must lie in the tail).
    fn gram(&self, start: f64, weight: &CMatrix) -> CMatrix {
        let m = self.kappa.len();
        let core = self.vectors.adjoint() * weight * &self.vectors;
        let e = self.decay(start);
        let mut out = zeros(m, m);
        for k in 0..m {
            for l in 0..m {
                let denom = self.kappa[k].conj() + self.kappa[l];
                out[(k, l)] = e[k].conj() * core[(k, l)] * e[l] / denom;
            }
        }
        out
    }

    fn min_re_kappa(&self) -> f64 {
        self.kappa.iter().map(|k| k.re).fold(f64::INFINITY, f64::min)
    }
}

/// Dirac Weyl machinery at one spectral parameter.
pub(crate) struct WeylEngine<'a> {
    pub profile: &'a PotentialProfile,
    pub num: &'a Numerics,
    pub zeta: C64,
    prop: Propagator,
}

impl<'a> WeylEngine<'a> {
    pub fn new(profile: &'a PotentialProfile, zeta: C64, num: &'a Numerics) -> Result<Self> {
        if !zeta.is_finite() || zeta.im == 0.0 {
            return Err(Error::InvalidArgument(format!(
                "Dirac spectral parameter must be finite and non-real, got {zeta}"
            )));
        }
        Ok(WeylEngine { profile, num, zeta, prop: Propagator::new(profile, System::Dirac { zeta }, num) })
    }

    pub fn tail(&self, side: Side) -> TailModel {
        match side {
            Side::Plus => TailModel::new(&self.profile.tail_right, self.zeta, side, self.profile.hi()),
            Side::Minus => TailModel::new(&self.profile.tail_left, self.zeta, side, self.profile.lo()),
        }
    }

    /// Sampling cut-off beyond which the tail contributes below `e^{-decay lengths}`.
    pub fn default_l(&self, side: Side) -> f64 {
        let t = self.tail(side);
        t.anchor + side.sign() * self.num.tail_decay_lengths / t.min_re_kappa()
    }

    /// Unnormalized decaying solutions (2m x m) at each `x`.
    pub fn raw_frames(&self, side: Side, xs: &[f64]) -> Result<Vec<CMatrix>> {
        let tail = self.tail(side);
        let mut out = vec![zeros(0, 0); xs.len()];
        let mut inner = Vec::new();
        let mut inner_idx = Vec::new();
        for (i, &x) in xs.iter().enumerate() {
            if tail.contains(x) {
                out[i] = tail.frame_at(x);
            } else {
                inner.push(x);
                inner_idx.push(i);
            }
        }
        if !inner.is_empty() {
            let start = tail.frame_at(tail.anchor);
            let ys = self.prop.march(&start, tail.anchor, &inner)?;
            for (i, y) in inner_idx.into_iter().zip(ys) {
                out[i] = y;
            }
        }
        Ok(out)
    }

    pub fn solution(&self, side: Side, x0: f64, alpha: &BoundaryFrame) -> Result<DiracWeylSolution> {
        if alpha.m() != self.profile.m {
            return Err(Error::InvalidArgument(format!(
                "boundary frame has m = {}, profile has m = {}",
                alpha.m(),
                self.profile.m
            )));
        }
        let y0 = self.raw_frames(side, &[x0])?.remove(0);
        let coeff = alpha.psi0_inv() * &y0;
        let c1 = top_half(&coeff);
        let c2 = bottom_half(&coeff);
        let c1_inv = invert(&c1, self.num.cond_max, &format!("M^D_{} at zeta = {}", side.label(), self.zeta))?;
        let m = c2 * &c1_inv;
        Ok(DiracWeylSolution { side, zeta: self.zeta, x0, alpha: alpha.clone(), m, right: c1_inv })
    }

    /// `int U* W U` over the half-line on `sol`'s side of its reference point, unoriented.
    pub fn half_line_gram(&self, sol: &DiracWeylSolution, weight: &CMatrix) -> Result<CMatrix> {
        let side = sol.side;
        let tail = self.tail(side);
        let x0 = sol.x0;
        let m = self.profile.m;
        let mut total = zeros(m, m);
        let (a, b) = match side {
            Side::Plus => (x0, tail.anchor),
            Side::Minus => (tail.anchor, x0),
        };
        if a < b {
            let width = self.panel_width();
            let nodes = quad::composite_nodes(&quad::panels(a, b, &self.profile.nodes(), width));
            let xs: Vec<f64> = nodes.iter().map(|n| n.0).collect();
            let ys = self.raw_frames(side, &xs)?;
            for ((_, w), y) in nodes.iter().zip(&ys) {
                total += y.adjoint() * weight * y * C64::new(*w, 0.0);
            }
        }
        let start = match side {
            Side::Plus => x0.max(tail.anchor),
            Side::Minus => x0.min(tail.anchor),
        };
        total += tail.gram(start, weight);
        Ok(sol.right.adjoint() * total * &sol.right)
    }

    pub fn panel_width(&self) -> f64 {
        (2.0 / (1.0 + self.zeta.norm() + self.profile.phi_scale())).min(0.5)
    }
}

/// Normalized Weyl solution `U(x) = Y(x) C1^{-1}` together with its m-function.
#[derive(Debug, Clone)]
pub struct DiracWeylSolution {
    pub side: Side,
    pub zeta: C64,
    pub x0: f64,
    pub alpha: BoundaryFrame,
    pub m: CMatrix,
    pub(crate) right: CMatrix,
}

impl DiracWeylSolution {
    pub(crate) fn normalize(&self, raw: &CMatrix) -> CMatrix {
        raw * &self.right
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfLineDiracWeyl {
    pub side: Side,
    pub zeta: C64,
    pub x0: f64,
    pub alpha: BoundaryFrame,
    #[serde(rename = "M")]
    pub m: CMatrix,
    pub trunc_l: f64,
    pub tail_residual: f64,
}

fn resolve_l(engine: &WeylEngine, side: Side, l: Option<f64>) -> Result<f64> {
    let anchor = engine.tail(side).anchor;
    match l {
        None => Ok(engine.default_l(side)),
        Some(l) if !l.is_finite() => Err(Error::InvalidArgument(format!("L must be finite, got {l}"))),
        Some(l) if (l - anchor) * side.sign() < 0.0 => Err(Error::InvalidArgument(format!(
            "L = {l} does not lie beyond the last breakpoint {anchor} on the {} side",
            side.label()
        ))),
        Some(l) => Ok(l),
    }
}

/// `M^D_\pm(zeta, x0, alpha)`. Matching happens at the last breakpoint, where
/// the tail solutions are exact, so `L` only records the sampling cut-off.
pub fn halfline_m_dirac(
    p: &PotentialProfile,
    zeta: C64,
    x0: f64,
    alpha: &BoundaryFrame,
    side: Side,
    l: Option<f64>,
    num: &Numerics,
) -> Result<HalfLineDiracWeyl> {
    let engine = WeylEngine::new(p, zeta, num)?;
    let trunc_l = resolve_l(&engine, side, l)?;
    let sol = engine.solution(side, x0, alpha)?;
    Ok(HalfLineDiracWeyl {
        side,
        zeta,
        x0,
        alpha: alpha.clone(),
        m: sol.m,
        trunc_l,
        // Tails are exactly constant, so the closed-form match leaves nothing behind.
        tail_residual: 0.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiracWeylSamples {
    pub weyl: HalfLineDiracWeyl,
    /// `(x, U(x))` with `U` of size 2m x m.
    pub samples: Vec<(f64, CMatrix)>,
}

#[allow(clippy::too_many_arguments)]
pub fn weyl_solutions_dirac(
    p: &PotentialProfile,
    zeta: C64,
    x0: f64,
    alpha: &BoundaryFrame,
    side: Side,
    l: Option<f64>,
    xs: &[f64],
    num: &Numerics,
) -> Result<DiracWeylSamples> {
    let engine = WeylEngine::new(p, zeta, num)?;
    let trunc_l = resolve_l(&engine, side, l)?;
    let sol = engine.solution(side, x0, alpha)?;
    let raw = engine.raw_frames(side, xs)?;
    let samples = xs.iter().zip(raw).map(|(&x, y)| (x, sol.normalize(&y))).collect();
    Ok(DiracWeylSamples {
        weyl: HalfLineDiracWeyl {
            side,
            zeta,
            x0,
            alpha: alpha.clone(),
            m: sol.m.clone(),
            trunc_l,
            tail_residual: 0.0,
        },
        samples,
    })
}

/// Re-expresses an m-function given in frame `gamma` in frame `alpha`.
pub fn rotate_boundary_frame(
    m: &CMatrix,
    alpha: &BoundaryFrame,
    gamma: &BoundaryFrame,
    cond_max: f64,
) -> Result<CMatrix> {
    let j = j_form(alpha.m());
    let g_star = gamma.alpha().adjoint();
    let a = alpha.alpha();
    let a_g = a * &g_star;
    let a_jg = a * &j * &g_star;
    let num = -&a_jg + &a_g * m;
    let den = &a_g + &a_jg * m;
    Ok(num * invert(&den, cond_max, "boundary frame rotation")?)
}

/// Blocks of a full-line Weyl matrix built from two half-line functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullLineM {
    pub b00: CMatrix,
    pub b01: CMatrix,
    pub b10: CMatrix,
    pub b11: CMatrix,
    /// `|M+ W^-1 M- - M- W^-1 M+|`, both admissible forms of the last block.
    pub ordering_residual: f64,
}

impl FullLineM {
    pub fn matrix(&self) -> CMatrix {
        from_blocks(&self.b00, &self.b01, &self.b10, &self.b11)
    }
}

pub(crate) fn fullline_blocks(mplus: &CMatrix, mminus: &CMatrix, cond_max: f64, what: &str) -> Result<FullLineM> {
    let w = mminus - mplus;
    let w_inv = invert(&w, cond_max, what)?;
    let sum = mminus + mplus;
    let half = C64::new(0.5, 0.0);
    let b11 = mplus * &w_inv * mminus;
    let b11_alt = mminus * &w_inv * mplus;
    Ok(FullLineM {
        b01: &w_inv * &sum * half,
        b10: &sum * &w_inv * half,
        ordering_residual: max_abs(&(&b11 - &b11_alt)),
        b11,
        b00: w_inv,
    })
}

pub fn fullline_m_dirac(mplus: &CMatrix, mminus: &CMatrix, cond_max: f64) -> Result<FullLineM> {
    fullline_blocks(mplus, mminus, cond_max, "full-line Dirac matrix (M- - M+ singular)")
}

/// Green's matrix of `D`. The solution decaying at `-inf` sits on the left when `x <= x'`.
#[allow(clippy::too_many_arguments)]
pub fn green_dirac(
    p: &PotentialProfile,
    zeta: C64,
    x0: f64,
    alpha: &BoundaryFrame,
    x: f64,
    xp: f64,
    num: &Numerics,
) -> Result<CMatrix> {
    Ok(green_dirac_many(p, zeta, x0, alpha, &[(x, xp)], num)?.remove(0))
}

pub(crate) fn green_dirac_many(
    p: &PotentialProfile,
    zeta: C64,
    x0: f64,
    alpha: &BoundaryFrame,
    pairs: &[(f64, f64)],
    num: &Numerics,
) -> Result<Vec<CMatrix>> {
    let e = WeylEngine::new(p, zeta, num)?;
    let eb = WeylEngine::new(p, zeta.conj(), num)?;
    let plus = e.solution(Side::Plus, x0, alpha)?;
    let minus = e.solution(Side::Minus, x0, alpha)?;
    let plus_b = eb.solution(Side::Plus, x0, alpha)?;
    let minus_b = eb.solution(Side::Minus, x0, alpha)?;
    let w_inv = invert(&(&minus.m - &plus.m), num.cond_max, "Dirac Green's matrix (M- - M+ singular)")?;
    let mut out = Vec::with_capacity(pairs.len());
    for &(x, xp) in pairs {
        let (left, right) = if x <= xp {
            let l = minus.normalize(&e.raw_frames(Side::Minus, &[x])?[0]);
            let r = plus_b.normalize(&eb.raw_frames(Side::Plus, &[xp])?[0]);
            (l, r)
        } else {
            let l = plus.normalize(&e.raw_frames(Side::Plus, &[x])?[0]);
            let r = minus_b.normalize(&eb.raw_frames(Side::Minus, &[xp])?[0]);
            (l, r)
        };
        out.push(left * &w_inv * right.adjoint());
    }
    Ok(out)
}

/// `Im zeta int U* U` against `Im M`, and its real-part analogue, for tests and the suite.
pub fn norm_identities(
    p: &PotentialProfile,
    zeta: C64,
    x0: f64,
    alpha: &BoundaryFrame,
    side: Side,
    num: &Numerics,
) -> Result<(CMatrix, CMatrix, CMatrix)> {
    let e = WeylEngine::new(p, zeta, num)?;
    let sol = e.solution(side, x0, alpha)?;
    let m = p.m;
    let full = e.half_line_gram(&sol, &identity(2 * m))?;
    let s3 = crate::matcore::sigma3(m);
    let diff = e.half_line_gram(&sol, &s3)?;
    Ok((sol.m, full * C64::new(side.sign(), 0.0), diff * C64::new(side.sign(), 0.0)))
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use crate::matcore::I;
    use rand::Rng;

    /// Random admissible frame `(cos(Theta) W, sin(Theta) W)`.
    pub fn random_frame<R: Rng>(m: usize, rng: &mut R) -> BoundaryFrame {
        let g = CMatrix::from_fn(m, m, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let theta = crate::matcore::hermitian_real(&g);
        let g2 = CMatrix::from_fn(m, m, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let h2 = crate::matcore::hermitian_real(&g2);
        let w = crate::matcore::mat_exp(&(h2 * I));
        BoundaryFrame::from_hermitian_unitary(&theta, &w).expect("valid frame")
    }
}
