//! Schroedinger Weyl theory of `H1 = A*A` and `H2 = AA*` read off the Dirac data.
//!
//! With `U = (u1; u2)` the normalized Dirac Weyl solution at the standard
//! frame and `zeta^2 = z`, `Im zeta > 0`:
//! ```text
//! psi_1 = u1,           psi_1^[1,1] = zeta u2,           Mhat_1 = zeta M
//! psi_2 = u2 M^{-1},    psi_2^[1,2] = -zeta u1 M^{-1},   Mhat_2 = -zeta M^{-1}
//! ```

pub mod suite;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{
    from_blocks, hermitian_imag, invert, max_abs, principal_zeta_with_margin, scalar, zeros,
    CMatrix, SpectralPoint,
};
use crate::numerics::Numerics;
use crate::potential::PotentialProfile;
use crate::propagate::{check_index, fundamental_schrodinger_at, wronskian, Propagator, System};
use crate::quad;
use crate::weyl::{fullline_blocks, BoundaryFrame, DiracWeylSolution, FullLineM, Side, WeylEngine};

pub use suite::{susy_identity_suite, SuiteReport, SuiteRow};

/// `Mhat_{+-,0,j}` from the Dirac m-function at the standard frame.
pub fn schrodinger_weyl_m(mdirac: &CMatrix, sp: &SpectralPoint, j: u8, cond_max: f64) -> Result<CMatrix> {
    check_index(j)?;
    let m = mdirac.nrows();
    match j {
        1 => Ok(mdirac * sp.zeta),
        _ => Ok(invert(mdirac, cond_max, "Mhat_2 (Dirac m-function singular)")? * scalar(m, -sp.zeta)),
    }
}

/// One half-line Schroedinger Weyl solution, evaluated through its Dirac partner.
pub(crate) struct SchrodingerSide<'a> {
    pub engine: WeylEngine<'a>,
    pub sol: DiracWeylSolution,
    pub j: u8,
    pub zeta: C64,
    pub mhat: CMatrix,
    /// Right factor turning `u_j` into `psi_j`.
    right: CMatrix,
}

impl<'a> SchrodingerSide<'a> {
    pub fn new(p: &'a PotentialProfile, z: C64, x0: f64, side: Side, j: u8, num: &'a Numerics) -> Result<Self> {
        check_index(j)?;
        let sp = principal_zeta_with_margin(z, num.delta_spec)?;
        let engine = WeylEngine::new(p, sp.zeta, num)?;
        let sol = engine.solution(side, x0, &BoundaryFrame::standard(p.m))?;
        let (mhat, right) = if j == 1 {
            (&sol.m * sp.zeta, crate::matcore::identity(p.m))
        } else {
            let inv = invert(&sol.m, num.cond_max, &format!("Mhat_{}_2 at z = {z}", side.label()))?;
            (&inv * (-sp.zeta), inv)
        };
        Ok(SchrodingerSide { engine, sol, j, zeta: sp.zeta, mhat, right })
    }

    pub fn side(&self) -> Side {
        self.sol.side
    }

    /// `(psi(x), psi^[1,j](x))` at each point.
    pub fn psi_at(&self, xs: &[f64]) -> Result<Vec<(CMatrix, CMatrix)>> {
        let m = self.engine.profile.m;
        let raw = self.engine.raw_frames(self.side(), xs)?;
        Ok(raw
            .iter()
            .map(|y| {
                let u = self.sol.normalize(y);
                let u1 = u.rows(0, m).into_owned();
                let u2 = u.rows(m, m).into_owned();
                if self.j == 1 {
                    (u1, u2 * self.zeta)
                } else {
                    (&u2 * &self.right, &u1 * &self.right * (-self.zeta))
                }
            })
            .collect())
    }

    /// `int psi* psi` over the half-line, unoriented.
    pub fn gram(&self) -> Result<CMatrix> {
        let m = self.engine.profile.m;
        let mut weight = zeros(2 * m, 2 * m);
        let off = if self.j == 1 { 0 } else { m };
        for k in 0..m {
            weight[(off + k, off + k)] = C64::new(1.0, 0.0);
        }
        let g = self.engine.half_line_gram(&self.sol, &weight)?;
        Ok(self.right.adjoint() * g * &self.right)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiSample {
    pub x: f64,
    pub psi: CMatrix,
    pub psi_qd: CMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchrodingerWeyl {
    pub j: u8,
    pub side: Side,
    pub z: C64,
    pub x0: f64,
    pub mhat: CMatrix,
    pub trunc_l: f64,
    pub psi_samples: Vec<PsiSample>,
    /// Largest disagreement with the direct `c + s Mhat` route, relative to the size of the cancelling terms.
    pub route_residual: f64,
}

/// `Mhat_{+-,0,j}(z, x0)` for a profile.
pub fn mhat(p: &PotentialProfile, z: C64, x0: f64, side: Side, j: u8, num: &Numerics) -> Result<CMatrix> {
    Ok(SchrodingerSide::new(p, z, x0, side, j, num)?.mhat)
}

#[allow(clippy::too_many_arguments)]
pub fn schrodinger_weyl_solutions(
    p: &PotentialProfile,
    sp: &SpectralPoint,
    x0: f64,
    side: Side,
    j: u8,
    l: Option<f64>,
    xs: &[f64],
    num: &Numerics,
) -> Result<SchrodingerWeyl> {
    let s = SchrodingerSide::new(p, sp.z, x0, side, j, num)?;
    let anchor = match side {
        Side::Plus => p.hi(),
        Side::Minus => p.lo(),
    };
    let trunc_l = match l {
        None => s.engine.default_l(side),
        Some(l) if (l - anchor) * side.sign() < 0.0 || !l.is_finite() => {
            return Err(Error::InvalidArgument(format!(
                "L = {l} does not lie beyond the last breakpoint {anchor} on the {} side",
                side.label()
            )))
        }
        Some(l) => l,
    };
    let psi = s.psi_at(xs)?;
    let direct = fundamental_schrodinger_at(p, j, sp.z, x0, xs, num)?;
    let mut route_residual: f64 = 0.0;
    for ((f, fq), fr) in psi.iter().zip(&direct) {
        let d = &fr.c + &fr.s * &s.mhat;
        let dq = &fr.c_qd + &fr.s_qd * &s.mhat;
        let scale = 1.0 + max_abs(&fr.c).max(max_abs(&(&fr.s * &s.mhat)));
        let scale_q = 1.0 + max_abs(&fr.c_qd).max(max_abs(&(&fr.s_qd * &s.mhat)));
        route_residual = route_residual.max(max_abs(&(f - d)) / scale).max(max_abs(&(fq - dq)) / scale_q);
    }
    Ok(SchrodingerWeyl {
        j,
        side,
        z: sp.z,
        x0,
        mhat: s.mhat.clone(),
        trunc_l,
        psi_samples: xs
            .iter()
            .zip(psi)
            .map(|(&x, (psi, psi_qd))| PsiSample { x, psi, psi_qd })
            .collect(),
        route_residual,
    })
}

/// Green's function of the half-line operator with a Dirichlet condition at `x0`.
#[allow(clippy::too_many_arguments)]
pub fn green_schrodinger_halfline(
    p: &PotentialProfile,
    j: u8,
    z: C64,
    x0: f64,
    side: Side,
    x: f64,
    xp: f64,
    num: &Numerics,
) -> Result<CMatrix> {
    check_index(j)?;
    for v in [x, xp] {
        if (v - x0) * side.sign() < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "point {v} is not on the {} half-line from x0 = {x0}",
                side.label()
            )));
        }
    }
    let here = SchrodingerSide::new(p, z, x0, side, j, num)?;
    let there = SchrodingerSide::new(p, z.conj(), x0, side, j, num)?;
    // The factor at the point nearer to x0 is the Dirichlet solution s.
    let near_is_x = (x - x0).abs() <= (xp - x0).abs();
    let g = if near_is_x {
        let s = fundamental_schrodinger_at(p, j, z, x0, &[x], num)?.remove(0).s;
        let psi = there.psi_at(&[xp])?.remove(0).0;
        s * psi.adjoint()
    } else {
        let psi = here.psi_at(&[x])?.remove(0).0;
        let s = fundamental_schrodinger_at(p, j, z.conj(), x0, &[xp], num)?.remove(0).s;
        psi * s.adjoint()
    };
    Ok(g * C64::new(side.sign(), 0.0))
}

/// Green's function of `H_j` on the whole line.
pub fn green_schrodinger_fullline(
    p: &PotentialProfile,
    j: u8,
    z: C64,
    x0: f64,
    x: f64,
    xp: f64,
    num: &Numerics,
) -> Result<CMatrix> {
    Ok(green_schrodinger_fullline_many(p, j, z, x0, &[(x, xp)], num)?.remove(0))
}

pub(crate) fn green_schrodinger_fullline_many(
    p: &PotentialProfile,
    j: u8,
    z: C64,
    x0: f64,
    pairs: &[(f64, f64)],
    num: &Numerics,
) -> Result<Vec<CMatrix>> {
    let plus = SchrodingerSide::new(p, z, x0, Side::Plus, j, num)?;
    let minus = SchrodingerSide::new(p, z, x0, Side::Minus, j, num)?;
    let plus_b = SchrodingerSide::new(p, z.conj(), x0, Side::Plus, j, num)?;
    let minus_b = SchrodingerSide::new(p, z.conj(), x0, Side::Minus, j, num)?;
    let w_inv = invert(
        &(&minus.mhat - &plus.mhat),
        num.cond_max,
        &format!("H_{j} Green's function at z = {z} (Mhat- - Mhat+ singular)"),
    )?;
    let mut out = Vec::with_capacity(pairs.len());
    for &(x, xp) in pairs {
        let (l, r) = if x <= xp {
            (minus.psi_at(&[x])?.remove(0).0, plus_b.psi_at(&[xp])?.remove(0).0)
        } else {
            (plus.psi_at(&[x])?.remove(0).0, minus_b.psi_at(&[xp])?.remove(0).0)
        };
        out.push(l * &w_inv * r.adjoint());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullLineSchrodingerM {
    pub j: u8,
    pub blocks: FullLineM,
}

impl FullLineSchrodingerM {
    pub fn matrix(&self) -> CMatrix {
        self.blocks.matrix()
    }
}

pub fn fullline_m_schrodinger(
    mhat_plus: &CMatrix,
    mhat_minus: &CMatrix,
    j: u8,
    cond_max: f64,
) -> Result<FullLineSchrodingerM> {
    check_index(j)?;
    Ok(FullLineSchrodingerM {
        j,
        blocks: fullline_blocks(
            mhat_plus,
            mhat_minus,
            cond_max,
            &format!("full-line H_{j} matrix (Mhat- - Mhat+ singular)"),
        )?,
    })
}

/// Full-line `Mhat_j(z, x0)` straight from a profile.
pub fn mhat_full(p: &PotentialProfile, z: C64, x0: f64, j: u8, num: &Numerics) -> Result<FullLineSchrodingerM> {
    let plus = mhat(p, z, x0, Side::Plus, j, num)?;
    let minus = mhat(p, z, x0, Side::Minus, j, num)?;
    fullline_m_schrodinger(&plus, &minus, j, num.cond_max)
}

/// `Im Mhat` against `Im z int psi* psi`; returns `(Im Mhat, oriented right side)`.
pub fn herglotz_identity(
    p: &PotentialProfile,
    z: C64,
    x0: f64,
    side: Side,
    j: u8,
    num: &Numerics,
) -> Result<(CMatrix, CMatrix)> {
    let s = SchrodingerSide::new(p, z, x0, side, j, num)?;
    let g = s.gram()?;
    Ok((hermitian_imag(&s.mhat), g * C64::new(z.im * side.sign(), 0.0)))
}

/// The finite-`x` version: `Im z int_{x0}^{x} psi* psi` against `Im Mhat - W(psi*, psi)(x) / 2i`.
pub fn partial_herglotz_identity(
    p: &PotentialProfile,
    z: C64,
    x0: f64,
    side: Side,
    j: u8,
    x: f64,
    num: &Numerics,
) -> Result<(CMatrix, CMatrix)> {
    let s = SchrodingerSide::new(p, z, x0, side, j, num)?;
    let (a, b, orient) = if x >= x0 { (x0, x, 1.0) } else { (x, x0, -1.0) };
    let nodes = quad::composite_nodes(&quad::panels(a, b, &p.nodes(), s.engine.panel_width()));
    let xs: Vec<f64> = nodes.iter().map(|n| n.0).collect();
    let vals = s.psi_at(&xs)?;
    let mut integral = zeros(p.m, p.m);
    for ((_, w), (f, _)) in nodes.iter().zip(&vals) {
        integral += f.adjoint() * f * C64::new(*w, 0.0);
    }
    let lhs = integral * C64::new(z.im * orient, 0.0);
    let (f, fq) = s.psi_at(&[x])?.remove(0);
    let w = wronskian(&f.adjoint(), &fq.adjoint(), &f, &fq);
    let rhs = hermitian_imag(&s.mhat) - w / C64::new(0.0, 2.0);
    Ok((lhs, rhs))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum L2Status {
    SquareIntegrable,
    Growing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelModeReport {
    pub j: u8,
    /// `(x, Y(x))` where the columns of `Y` solve `A u = 0` (j = 1) or `A* v = 0` (j = 2).
    pub mode_matrix: Vec<(f64, CMatrix)>,
    pub l2_status: Vec<L2Status>,
    pub dim_kernel: usize,
}

/// Zero modes of `A` (kernel of `H1`) and of `A*` (kernel of `H2`), classified by tail exponents.
pub fn kernel_modes(
    p: &PotentialProfile,
    l: Option<f64>,
    num: &Numerics,
) -> Result<(KernelModeReport, KernelModeReport)> {
    let m = p.m;
    let x0 = p.x0;
    // At zeta = 0 the Dirac system splits into u1' = -phi u1 and u2' = phi u2.
    let prop = Propagator::new(p, System::Dirac { zeta: C64::new(0.0, 0.0) }, num);
    let to_hi = prop.advance(&crate::matcore::identity(2 * m), p.hi(), x0)?;
    let to_lo = prop.advance(&crate::matcore::identity(2 * m), p.lo(), x0)?;
    let half = l.unwrap_or(10.0).abs().max(1e-3);
    let xs: Vec<f64> = (0..=40).map(|k| x0 - half + 2.0 * half * k as f64 / 40.0).collect();
    let mut reports = Vec::new();
    for j in [1u8, 2u8] {
        let off = if j == 1 { 0 } else { m };
        // u' = -s phi u with s = +1 for A and -1 for A*: an eigenvalue h of the tail decays at +inf iff s h > 0.
        let s = if j == 1 { 1.0 } else { -1.0 };
        let pick = |h: &CMatrix, want_positive: bool| -> CMatrix {
            let (vals, vecs) = crate::matcore::hermitian_eigen(h);
            let cols: Vec<usize> = (0..m)
                .filter(|&k| {
                    let e = s * vals[k];
                    if want_positive {
                        e > 0.0
                    } else {
                        e < 0.0
                    }
                })
                .collect();
            let mut out = zeros(m, cols.len());
            for (dst, &k) in cols.iter().enumerate() {
                out.set_column(dst, &vecs.column(k));
            }
            out
        };
        let right = pick(&p.tail_right, true);
        let left = pick(&p.tail_left, false);
        let t_hi = to_hi.view((off, off), (m, m)).into_owned();
        let t_lo = to_lo.view((off, off), (m, m)).into_owned();
        let sp = orthonormal_columns(&(t_hi * right));
        let sm = orthonormal_columns(&(t_lo * left));
        let basis = intersection_basis(&sp, &sm);
        let dim = basis.ncols();
        let full = complete_basis(&basis, m);
        let mut status = vec![L2Status::Growing; m];
        for st in status.iter_mut().take(dim) {
            *st = L2Status::SquareIntegrable;
        }
        let mut y0 = zeros(2 * m, m);
        y0.view_mut((off, 0), (m, m)).copy_from(&full);
        let samples = prop.march(&y0, x0, &xs)?;
        let mode_matrix = xs
            .iter()
            .zip(samples)
            .map(|(&x, y)| (x, y.view((off, 0), (m, m)).into_owned()))
            .collect();
        reports.push(KernelModeReport { j, mode_matrix, l2_status: status, dim_kernel: dim });
    }
    let second = reports.pop().expect("two reports");
    let first = reports.pop().expect("two reports");
    Ok((first, second))
}

fn orthonormal_columns(a: &CMatrix) -> CMatrix {
    if a.ncols() == 0 {
        return a.clone();
    }
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > 1e-10 * smax)
        .collect();
    let mut out = zeros(a.nrows(), keep.len());
    for (dst, &k) in keep.iter().enumerate() {
        out.set_column(dst, &u.column(k));
    }
    out
}

/// Orthonormal basis of the intersection of two column spaces given by orthonormal bases.
fn intersection_basis(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let n = a.nrows();
    if a.ncols() == 0 || b.ncols() == 0 {
        return zeros(n, 0);
    }
    // x is in both spaces iff |P_a x| = |P_b x| = |x|; take the eigenvectors of P_a P_b P_a with eigenvalue 1.
    let pa = a * a.adjoint();
    let pb = b * b.adjoint();
    let prod = &pa * &pb * &pa;
    let (vals, vecs) = crate::matcore::hermitian_eigen(&prod);
    let keep: Vec<usize> = (0..n).filter(|&k| vals[k] > 1.0 - 1e-8).collect();
    let mut out = zeros(n, keep.len());
    for (dst, &k) in keep.iter().enumerate() {
        out.set_column(dst, &vecs.column(k));
    }
    out
}

/// Extends orthonormal columns to an orthonormal basis of C^m, keeping the given ones first.
fn complete_basis(basis: &CMatrix, m: usize) -> CMatrix {
    let proj = crate::matcore::identity(m) - basis * basis.adjoint();
    let (vals, vecs) = crate::matcore::hermitian_eigen(&proj);
    let mut out = zeros(m, m);
    for k in 0..basis.ncols() {
        out.set_column(k, &basis.column(k));
    }
    let mut dst = basis.ncols();
    for k in (0..m).rev() {
        if dst == m {
            break;
        }
        if vals[k] > 0.5 {
            out.set_column(dst, &vecs.column(k));
            dst += 1;
        }
    }
    out
}

/// Checks that the zero mode of `H1` is annihilated by `A`: propagates `H1` at `z = 0` from
/// `(u(x0), 0)` and returns `max |u^[1,1]| / max |u|` together with the distance to the first-order mode.
pub fn zero_mode_transfer_residual(p: &PotentialProfile, num: &Numerics) -> Result<Option<(f64, f64)>> {
    let (k1, _) = kernel_modes(p, None, num)?;
    if k1.dim_kernel == 0 {
        return Ok(None);
    }
    let m = p.m;
    let u0 = k1.mode_matrix.iter().find(|(x, _)| *x == p.x0).map(|(_, y)| y.column(0).into_owned());
    let u0 = match u0 {
        Some(u) => u,
        None => {
            // The sample grid is centred on x0, so this is reached only through rounding.
            let prop = Propagator::new(p, System::Dirac { zeta: C64::new(0.0, 0.0) }, num);
            let (x, y) = &k1.mode_matrix[20];
            let mut y0 = zeros(2 * m, 1);
            y0.view_mut((0, 0), (m, 1)).copy_from(&y.column(0));
            prop.advance(&y0, *x, p.x0)?.rows(0, m).into_owned().column(0).into_owned()
        }
    };
    let prop = Propagator::new(p, System::Schrodinger { j: 1, z: C64::new(0.0, 0.0) }, num);
    let mut y0 = zeros(2 * m, 1);
    y0.view_mut((0, 0), (m, 1)).copy_from(&u0);
    let xs: Vec<f64> = k1.mode_matrix.iter().map(|(x, _)| *x).collect();
    let ys = prop.march(&y0, p.x0, &xs)?;
    let mut qd: f64 = 0.0;
    let mut size: f64 = 0.0;
    let mut diff: f64 = 0.0;
    for (y, (_, mode)) in ys.iter().zip(&k1.mode_matrix) {
        size = size.max(max_abs(&y.rows(0, m).into_owned()));
        qd = qd.max(max_abs(&y.rows(m, m).into_owned()));
        let col = CMatrix::from_iterator(m, 1, mode.column(0).iter().copied());
        diff = diff.max(max_abs(&(y.rows(0, m).into_owned() - col)));
    }
    Ok(Some((qd / size, diff / size)))
}

/// The two block conjugations linking the Dirac and Schroedinger full-line matrices.
pub fn block_conjugation_residuals(
    p: &PotentialProfile,
    zeta: C64,
    x0: f64,
    num: &Numerics,
) -> Result<(f64, f64)> {
    let m = p.m;
    let e = WeylEngine::new(p, zeta, num)?;
    let a0 = BoundaryFrame::standard(m);
    let mp = e.solution(Side::Plus, x0, &a0)?.m;
    let mm = e.solution(Side::Minus, x0, &a0)?.m;
    let md = crate::weyl::fullline_m_dirac(&mp, &mm, num.cond_max)?.matrix();
    let sp = SpectralPoint { z: zeta * zeta, zeta };
    let h1 = fullline_m_schrodinger(
        &schrodinger_weyl_m(&mp, &sp, 1, num.cond_max)?,
        &schrodinger_weyl_m(&mm, &sp, 1, num.cond_max)?,
        1,
        num.cond_max,
    )?
    .matrix();
    let h2 = fullline_m_schrodinger(
        &schrodinger_weyl_m(&mp, &sp, 2, num.cond_max)?,
        &schrodinger_weyl_m(&mm, &sp, 2, num.cond_max)?,
        2,
        num.cond_max,
    )?
    .matrix();
    let id = crate::matcore::identity(m);
    let z0 = zeros(m, m);
    let left1 = from_blocks(&(&id / zeta), &z0, &z0, &id);
    let right1 = from_blocks(&id, &z0, &z0, &(&id * zeta));
    let r1 = crate::matcore::rel_residual(&(left1 * &md * right1), &h1);
    let mp_inv = invert(&mp, num.cond_max, "M+ inverse")?;
    let mm_inv = invert(&mm, num.cond_max, "M- inverse")?;
    let left2 = from_blocks(&(&mp * (-C64::new(1.0, 0.0) / zeta)), &z0, &z0, &mm_inv);
    let right2 = from_blocks(&(-&mm), &z0, &z0, &(&mp_inv * zeta));
    let r2 = crate::matcore::rel_residual(&(left2 * &md * right2), &h2);
    Ok((r1, r2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{herglotz_defect, principal_zeta, rel_residual};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn num() -> Numerics {
        Numerics::default()
    }

    #[test]
    fn free_mhat_at_minus_one() {
        let p = PotentialProfile::free(1);
        for j in [1, 2] {
            assert!((mhat(&p, c(-1.0, 0.0), 0.0, Side::Plus, j, &num()).unwrap()[(0, 0)] + 1.0).norm() < 1e-12);
            assert!((mhat(&p, c(-1.0, 0.0), 0.0, Side::Minus, j, &num()).unwrap()[(0, 0)] - 1.0).norm() < 1e-12);
        }
    }

    #[test]
    fn from_dirac_value() {
        let sp = principal_zeta(c(-1.0, 0.0)).unwrap();
        let m1 = schrodinger_weyl_m(&scalar(1, c(0.0, 1.0)), &sp, 1, 1e12).unwrap();
        let m2 = schrodinger_weyl_m(&scalar(1, c(0.0, 1.0)), &sp, 2, 1e12).unwrap();
        assert!((m1[(0, 0)] + 1.0).norm() < 1e-15);
        assert!((m2[(0, 0)] + 1.0).norm() < 1e-15);
        assert!(schrodinger_weyl_m(&zeros(1, 1), &sp, 2, 1e12).is_err());
    }

    #[test]
    fn constant_profile_and_shift_identity() {
        // Mhat = Dirichlet-type m-function of V = c^2 plus phi(x0).
        let p = PotentialProfile::constant(1, 1.0);
        let v = mhat(&p, c(-1.0, 0.0), 0.0, Side::Plus, 1, &num()).unwrap()[(0, 0)];
        assert!((v - c(1.0 - 2f64.sqrt(), 0.0)).norm() < 1e-12);
        let plain = -(c(1.0, 0.0) - c(-1.0, 0.0)).sqrt();
        assert!((v - (plain + 1.0)).norm() < 1e-12);
    }

    #[test]
    fn duality_at_random_points() {
        for p in [PotentialProfile::sign(1.0), PotentialProfile::noncommuting()] {
            for z in [c(-1.0, 0.3), c(2.0, 1.0), c(0.5, -0.7)] {
                for side in [Side::Plus, Side::Minus] {
                    let a = mhat(&p, z, 0.0, side, 1, &num()).unwrap();
                    let b = mhat(&p, z, 0.0, side, 2, &num()).unwrap();
                    let prod = a * b;
                    assert!(rel_residual(&prod, &scalar(p.m, -z)) < 1e-10);
                }
            }
        }
    }

    #[test]
    fn weyl_samples_free_and_normalization() {
        let p = PotentialProfile::free(1);
        let sp = principal_zeta(c(-1.0, 0.0)).unwrap();
        let w = schrodinger_weyl_solutions(&p, &sp, 0.0, Side::Plus, 1, None, &[1.0, 0.0], &num()).unwrap();
        assert!((w.psi_samples[0].psi[(0, 0)] - c((-1.0f64).exp(), 0.0)).norm() < 1e-12);
        assert!((w.psi_samples[1].psi[(0, 0)] - c(1.0, 0.0)).norm() < 1e-14);
        assert!((&w.psi_samples[1].psi_qd - &w.mhat).norm() < 1e-14);
        assert!(w.route_residual < 1e-8);
    }

    #[test]
    fn weyl_routes_agree_on_matrix_profile() {
        let p = PotentialProfile::noncommuting();
        let sp = principal_zeta(c(1.5, 0.8)).unwrap();
        let xs = [-2.0, -0.5, 0.0, 0.4, 1.5, 3.0];
        for side in [Side::Plus, Side::Minus] {
            for j in [1, 2] {
                let w = schrodinger_weyl_solutions(&p, &sp, 0.0, side, j, None, &xs, &num()).unwrap();
                assert!(w.route_residual < 1e-8, "{side:?} {j} {}", w.route_residual);
            }
        }
    }

    #[test]
    fn sign_profile_weyl_solution_is_square_integrable() {
        let p = PotentialProfile::sign(1.0);
        let z = c(-0.5, 0.0);
        let n = num();
        let s = SchrodingerSide::new(&p, z, 0.0, Side::Plus, 1, &n).unwrap();
        let total = s.gram().unwrap()[(0, 0)].re;
        // Truncated integrals converge to the full one.
        let mut prev = 0.0;
        for l in [2.0, 5.0, 10.0, 20.0] {
            let nodes = quad::composite_nodes(&quad::panels(0.0, l, &[], 0.25));
            let xs: Vec<f64> = nodes.iter().map(|n| n.0).collect();
            let v: f64 = s.psi_at(&xs).unwrap().iter().zip(&nodes).map(|((f, _), (_, w))| w * f[(0, 0)].norm_sqr()).sum();
            assert!(v > prev);
            prev = v;
        }
        assert!((prev - total).abs() < 1e-10 * total);
        // psi = e^{-sqrt(1.5) x}
        assert!((total - 1.0 / (2.0 * 1.5f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn halfline_green_free() {
        let p = PotentialProfile::free(1);
        let g = green_schrodinger_halfline(&p, 1, c(-1.0, 0.0), 0.0, Side::Plus, 0.5, 1.0, &num()).unwrap();
        assert!((g[(0, 0)] - c(0.5f64.sinh() * (-1.0f64).exp(), 0.0)).norm() < 1e-12);
        assert!((g[(0, 0)].re - 0.19170024978210182).abs() < 1e-12);
        let g0 = green_schrodinger_halfline(&p, 1, c(-1.0, 0.0), 0.0, Side::Plus, 0.0, 1.0, &num()).unwrap();
        assert!(g0[(0, 0)].norm() < 1e-15);
        let gm = green_schrodinger_halfline(&p, 1, c(-1.0, 0.0), 0.0, Side::Minus, -0.5, -1.0, &num()).unwrap();
        assert!((gm[(0, 0)] - g[(0, 0)]).norm() < 1e-12);
        assert!(green_schrodinger_halfline(&p, 1, c(-1.0, 0.0), 0.0, Side::Plus, -0.5, 1.0, &num()).is_err());
    }

    #[test]
    fn halfline_green_symmetry() {
        for p in [PotentialProfile::sign(1.0), PotentialProfile::noncommuting()] {
            let z = c(0.7, 0.9);
            for side in [Side::Plus, Side::Minus] {
                for j in [1, 2] {
                    let (x, xp) = (0.3 * side.sign(), 1.4 * side.sign());
                    let a = green_schrodinger_halfline(&p, j, z, 0.0, side, x, xp, &num()).unwrap();
                    let b = green_schrodinger_halfline(&p, j, z.conj(), 0.0, side, xp, x, &num()).unwrap();
                    assert!(max_abs(&(a.adjoint() - b)) < 1e-9);
                }
            }
        }
    }

    #[test]
    fn fullline_green_values() {
        let free = PotentialProfile::free(1);
        let g = green_schrodinger_fullline(&free, 1, c(-1.0, 0.0), 0.0, 0.0, 1.0, &num()).unwrap();
        assert!((g[(0, 0)].re - 0.5 * (-1.0f64).exp()).abs() < 1e-12);
        let sign = PotentialProfile::sign(1.0);
        let g1 = green_schrodinger_fullline(&sign, 1, c(-0.01, 0.0), 0.0, 0.0, 0.0, &num()).unwrap();
        assert!((g1[(0, 0)].re - 1.0 / (2.0 * (1.01f64.sqrt() - 1.0))).abs() < 1e-8);
        assert!((g1[(0, 0)].re - 100.2493781).abs() < 1e-6);
        let g2 = green_schrodinger_fullline(&sign, 2, c(-1e-6, 0.0), 0.0, 0.0, 0.0, &num()).unwrap();
        assert!((g2[(0, 0)].re - 0.25).abs() < 1e-6);
    }

    #[test]
    fn fullline_green_symmetry_and_reference_independence() {
        let p = PotentialProfile::noncommuting();
        let z = c(-0.3, 0.6);
        for j in [1, 2] {
            let a = green_schrodinger_fullline(&p, j, z, 0.0, -0.4, 0.9, &num()).unwrap();
            let b = green_schrodinger_fullline(&p, j, z.conj(), 0.0, 0.9, -0.4, &num()).unwrap();
            assert!(max_abs(&(a.adjoint() - &b)) < 1e-9);
            let c0 = green_schrodinger_fullline(&p, j, z, 0.7, -0.4, 0.9, &num()).unwrap();
            assert!(max_abs(&(a - c0)) < 1e-9);
        }
    }

    #[test]
    fn free_fullline_mhat() {
        let p = PotentialProfile::free(1);
        let f = mhat_full(&p, c(-1.0, 0.0), 0.0, 1, &num()).unwrap();
        let expect = CMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-0.5, 0.0)]);
        assert!(max_abs(&(f.matrix() - expect)) < 1e-12);
    }

    #[test]
    fn block_conjugations() {
        for p in [PotentialProfile::free(1), PotentialProfile::sign(1.0), PotentialProfile::noncommuting()] {
            let (r1, r2) = block_conjugation_residuals(&p, c(0.4, 0.9), 0.0, &num()).unwrap();
            assert!(r1 < 1e-9 && r2 < 1e-8, "{r1} {r2}");
        }
    }

    #[test]
    fn herglotz_properties() {
        for p in [PotentialProfile::sign(1.0), PotentialProfile::noncommuting()] {
            for z in [c(-1.0, 0.5), c(1.5, 0.2), c(3.0, 2.0)] {
                for j in [1, 2] {
                    let mp = mhat(&p, z, 0.0, Side::Plus, j, &num()).unwrap();
                    let mm = mhat(&p, z, 0.0, Side::Minus, j, &num()).unwrap();
                    assert!(herglotz_defect(&mp) >= -1e-10);
                    assert!(herglotz_defect(&(-&mm)) >= -1e-10);
                    assert!(crate::matcore::smallest_singular_value(&mp) > 1e-8);
                    let mpb = mhat(&p, z.conj(), 0.0, Side::Plus, j, &num()).unwrap();
                    assert!(max_abs(&(mpb - mp.adjoint())) < 1e-9);
                    let full = fullline_m_schrodinger(&mp, &mm, j, 1e12).unwrap();
                    assert!(herglotz_defect(&full.matrix()) >= -1e-10);
                }
            }
        }
    }

    #[test]
    fn fundamental_and_partial_identities() {
        let p = PotentialProfile::noncommuting();
        for side in [Side::Plus, Side::Minus] {
            for j in [1, 2] {
                let (lhs, rhs) = herglotz_identity(&p, c(0.5, 0.7), 0.0, side, j, &num()).unwrap();
                assert!(max_abs(&(&lhs - &rhs)) <= 1e-6 * max_abs(&lhs));
                let x = 1.7 * side.sign();
                let (a, b) = partial_herglotz_identity(&p, c(0.5, 0.7), 0.0, side, j, x, &num()).unwrap();
                assert!(max_abs(&(&a - &b)) <= 1e-6 * (1.0 + max_abs(&a)));
            }
        }
    }

    #[test]
    fn kernel_dimensions() {
        let dims = |p: &PotentialProfile| {
            let (a, b) = kernel_modes(p, None, &num()).unwrap();
            (a.dim_kernel, b.dim_kernel)
        };
        assert_eq!(dims(&PotentialProfile::sign(1.0)), (1, 0));
        assert_eq!(dims(&PotentialProfile::sign(-1.0)), (0, 1));
        assert_eq!(dims(&PotentialProfile::free(1)), (0, 0));
        assert_eq!(dims(&PotentialProfile::free(2)), (0, 0));
        // sigma_3 on the left and sigma_1 on the right: one decaying direction on each side, generically transverse.
        let (a, b) = kernel_modes(&PotentialProfile::noncommuting(), None, &num()).unwrap();
        assert!(a.dim_kernel <= 1 && b.dim_kernel <= 1);
    }

    #[test]
    fn sign_zero_mode_shape() {
        let (k1, _) = kernel_modes(&PotentialProfile::sign(1.0), Some(5.0), &num()).unwrap();
        assert_eq!(k1.l2_status[0], L2Status::SquareIntegrable);
        for (x, y) in &k1.mode_matrix {
            let u = y[(0, 0)] / k1.mode_matrix[20].1[(0, 0)];
            assert!((u.re - (-x.abs()).exp()).abs() < 1e-12);
        }
        let (qd, diff) = zero_mode_transfer_residual(&PotentialProfile::sign(1.0), &num()).unwrap().unwrap();
        assert!(qd <= 1e-8 && diff <= 1e-8);
    }
}
