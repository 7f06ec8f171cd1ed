//! Residual table cross-checking the Dirac and Schroedinger sides against each other.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{block_conjugation_residuals, green_schrodinger_fullline_many, SchrodingerSide};
use crate::error::Result;
use crate::matcore::{
    block, hermitian_real, invert, mat_exp, max_abs, rel_residual, sigma3, zeros, CMatrix, SpectralPoint, I,
};
use crate::numerics::Numerics;
use crate::potential::PotentialProfile;
use crate::propagate::{propagate_dirac, wronskian};
use crate::quad;
use crate::weyl::{fullline_m_dirac, green_dirac_many, BoundaryFrame, Side, WeylEngine};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub name: String,
    pub tag: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub rows: Vec<SuiteRow>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }

    pub fn max_residual(&self) -> f64 {
        self.rows.iter().map(|r| r.residual).fold(0.0, f64::max)
    }
}

pub const DEFAULT_SUITE_ZETAS: [(f64, f64); 3] = [(0.6, 0.8), (-0.9, 0.5), (0.3, 1.7)];

const GREEN_PAIRS: [(f64, f64); 4] = [(-0.7, 0.4), (0.4, -0.7), (0.3, 1.2), (-1.5, -0.2)];

/// Runs every identity at each `zeta` (upper half-plane) and reports the worst residual per identity.
pub fn susy_identity_suite(p: &PotentialProfile, zetas: &[C64], x0: f64, num: &Numerics) -> Result<SuiteReport> {
    let per_zeta: Vec<Result<Vec<(&'static str, &'static str, f64)>>> =
        zetas.par_iter().map(|&zeta| rows_at(p, zeta, x0, num)).collect();
    let mut rows: Vec<SuiteRow> = Vec::new();
    for res in per_zeta {
        for (name, tag, r) in res? {
            match rows.iter_mut().find(|row| row.name == name) {
                Some(row) => row.residual = row.residual.max(r),
                None => rows.push(SuiteRow {
                    name: name.to_string(),
                    tag: tag.to_string(),
                    residual: r,
                    tolerance: num.suite_tol,
                    passed: false,
                }),
            }
        }
    }
    for row in &mut rows {
        row.passed = row.residual.is_finite() && row.residual <= row.tolerance;
    }
    Ok(SuiteReport { rows })
}

fn rows_at(p: &PotentialProfile, zeta: C64, x0: f64, num: &Numerics) -> Result<Vec<(&'static str, &'static str, f64)>> {
    let m = p.m;
    let z = zeta * zeta;
    let sp = SpectralPoint { z, zeta };
    let a0 = BoundaryFrame::standard(m);
    let mut out = Vec::new();

    // Dirac Green's matrix against the partner Green's functions.
    let gd = green_dirac_many(p, zeta, x0, &a0, &GREEN_PAIRS, num)?;
    let mut diag: f64 = 0.0;
    let mut offd: f64 = 0.0;
    let mut sides = Vec::new();
    for j in [1u8, 2u8] {
        let g = green_schrodinger_fullline_many(p, j, z, x0, &GREEN_PAIRS, num)?;
        let plus = SchrodingerSide::new(p, z, x0, Side::Plus, j, num)?;
        let minus = SchrodingerSide::new(p, z, x0, Side::Minus, j, num)?;
        let plus_b = SchrodingerSide::new(p, z.conj(), x0, Side::Plus, j, num)?;
        let minus_b = SchrodingerSide::new(p, z.conj(), x0, Side::Minus, j, num)?;
        let w_inv = invert(&(&minus.mhat - &plus.mhat), num.cond_max, "partner Wronskian")?;
        for (k, &(x, xp)) in GREEN_PAIRS.iter().enumerate() {
            let gdj = block(&gd[k], (j - 1) as usize, (j - 1) as usize, m);
            diag = diag.max(rel_residual(&gdj, &(&g[k] * zeta)));
            let (l, r) = if x <= xp {
                (minus.psi_at(&[x])?.remove(0), plus_b.psi_at(&[xp])?.remove(0))
            } else {
                (plus.psi_at(&[x])?.remove(0), minus_b.psi_at(&[xp])?.remove(0))
            };
            let off = &l.1 * &w_inv * r.0.adjoint();
            let (bi, bj, sign) = if j == 1 { (1, 0, 1.0) } else { (0, 1, -1.0) };
            offd = offd.max(rel_residual(&block(&gd[k], bi, bj, m), &(off * C64::new(sign, 0.0))));
        }
        sides.push((plus, minus));
    }
    out.push(("green-diagonal-blocks", "resolvent-blocks", diag));
    out.push(("green-offdiagonal-blocks", "resolvent-blocks", offd));

    // M1 M2 = -z on both half-lines.
    let mut dual: f64 = 0.0;
    for k in 0..2 {
        let (a, b) = if k == 0 {
            (&sides[0].0.mhat, &sides[1].0.mhat)
        } else {
            (&sides[0].1.mhat, &sides[1].1.mhat)
        };
        dual = dual.max(rel_residual(&(a * b), &crate::matcore::scalar(m, -z)));
    }
    out.push(("partner-duality", "duality", dual));

    let (r1, r2) = block_conjugation_residuals(p, zeta, x0, num)?;
    out.push(("block-conjugation-h1", "block-conjugation", r1));
    out.push(("block-conjugation-h2", "block-conjugation", r2));

    // W(psi+(zbar)*, psi-(z)) is constant and equals Mhat- - Mhat+.
    let mut wr: f64 = 0.0;
    for (jdx, j) in [1u8, 2u8].into_iter().enumerate() {
        let plus_b = SchrodingerSide::new(p, z.conj(), x0, Side::Plus, j, num)?;
        let minus = &sides[jdx].1;
        let target = &minus.mhat - &sides[jdx].0.mhat;
        let xs = [-1.3, -0.2, x0, 0.6, 1.9];
        let a = plus_b.psi_at(&xs)?;
        let b = minus.psi_at(&xs)?;
        for (fa, fb) in a.iter().zip(&b) {
            let w = wronskian(&fa.0.adjoint(), &fa.1.adjoint(), &fb.0, &fb.1);
            wr = wr.max(rel_residual(&w, &target));
        }
    }
    out.push(("wronskian-denominator", "wronskian", wr));

    // psi = c + s Mhat by direct propagation of the partner systems.
    let mut route: f64 = 0.0;
    for side in [Side::Plus, Side::Minus] {
        for j in [1u8, 2u8] {
            let xs: Vec<f64> = [0.0, 0.5, 1.5].iter().map(|d| x0 + side.sign() * d).collect();
            let w = super::schrodinger_weyl_solutions(p, &sp, x0, side, j, None, &xs, num)?;
            route = route.max(w.route_residual);
        }
    }
    out.push(("weyl-solution-route", "weyl-solutions", route));

    out.push(("frame-derivative", "frame-derivative", frame_derivative_residual(p, zeta, x0, num)?));

    // M(-zeta) = -M(zeta) and its full-line form.
    let e = WeylEngine::new(p, zeta, num)?;
    let en = WeylEngine::new(p, -zeta, num)?;
    let mut half: f64 = 0.0;
    let mut ms = Vec::new();
    for side in [Side::Plus, Side::Minus] {
        let a = e.solution(side, x0, &a0)?.m;
        let b = en.solution(side, x0, &a0)?.m;
        half = half.max(rel_residual(&b, &(-&a)));
        ms.push((a, b));
    }
    out.push(("odd-symmetry-halfline", "odd-symmetry", half));
    let full = fullline_m_dirac(&ms[0].0, &ms[1].0, num.cond_max)?.matrix();
    let full_neg = fullline_m_dirac(&ms[0].1, &ms[1].1, num.cond_max)?.matrix();
    let s3 = sigma3(m);
    out.push(("odd-symmetry-fullline", "odd-symmetry", rel_residual(&full_neg, &(-(&s3 * full * &s3)))));
    Ok(out)
}

/// Two fixed frames, neither the standard one.
fn suite_frames(m: usize) -> (BoundaryFrame, BoundaryFrame) {
    let h = |k: f64| CMatrix::from_fn(m, m, |r, c| C64::new(0.3 * k + 0.1 * (r + 2 * c) as f64, 0.2 * (r as f64 - c as f64)));
    let theta1 = hermitian_real(&h(1.0));
    let theta2 = hermitian_real(&h(2.3));
    let w1 = mat_exp(&(hermitian_real(&h(0.7)) * I));
    let w2 = mat_exp(&(hermitian_real(&h(-1.1)) * I));
    (
        BoundaryFrame::from_hermitian_unitary(&theta1, &w1).expect("fixed frame is admissible"),
        BoundaryFrame::from_hermitian_unitary(&theta2, &w2).expect("fixed frame is admissible"),
    )
}

/// `(Psi1* S1 Psi2)' = -(zeta2 + conj(zeta1)) Psi1* S3 Psi2`, integrated over an interval straddling the breakpoints.
fn frame_derivative_residual(p: &PotentialProfile, zeta: C64, x0: f64, num: &Numerics) -> Result<f64> {
    let m = p.m;
    let (f1, f2) = suite_frames(m);
    let zeta2 = C64::new(-0.4, 1.1) * zeta.norm();
    let s1 = crate::matcore::sigma1(m);
    let s3 = sigma3(m);
    let (a, b) = (p.lo().min(x0) - 0.5, p.hi().max(x0) + 0.75);
    let nodes = quad::composite_nodes(&quad::panels(a, b, &p.nodes(), 0.25));
    let psi = |zeta: C64, f: &BoundaryFrame, x: f64| propagate_dirac(p, zeta, x0, f, x, num).map(|d| d.psi);
    let mut integral = zeros(2 * m, 2 * m);
    for (x, w) in &nodes {
        let p1 = psi(zeta, &f1, *x)?;
        let p2 = psi(zeta2, &f2, *x)?;
        integral += p1.adjoint() * &s3 * p2 * C64::new(*w, 0.0);
    }
    let rhs = integral * (-(zeta2 + zeta.conj()));
    let lhs = psi(zeta, &f1, b)?.adjoint() * &s1 * psi(zeta2, &f2, b)?
        - psi(zeta, &f1, a)?.adjoint() * &s1 * psi(zeta2, &f2, a)?;
    Ok(max_abs(&(lhs - &rhs)) / (1.0 + max_abs(&rhs)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zetas() -> Vec<C64> {
        DEFAULT_SUITE_ZETAS.iter().map(|&(a, b)| C64::new(a, b)).collect()
    }

    #[test]
    fn free_profile_suite() {
        let num = Numerics { suite_tol: 1e-10, ..Numerics::default() };
        let r = susy_identity_suite(&PotentialProfile::free(1), &zetas(), 0.0, &num).unwrap();
        for row in &r.rows {
            assert!(row.passed, "{row:?}");
        }
        assert_eq!(r.rows.len(), 10);
    }

    #[test]
    fn sign_profile_suite() {
        let r = susy_identity_suite(&PotentialProfile::sign(1.0), &zetas(), 0.0, &Numerics::default()).unwrap();
        assert!(r.all_passed(), "{:#?}", r.rows);
    }

    #[test]
    fn noncommuting_suite() {
        let num = Numerics { suite_tol: 1e-7, ..Numerics::default() };
        let r = susy_identity_suite(&PotentialProfile::noncommuting(), &zetas(), 0.0, &num).unwrap();
        assert!(r.all_passed(), "{:#?}", r.rows);
    }

    #[test]
    fn detects_a_broken_relation() {
        // Swapping the Schroedinger index breaks the diagonal-block identity.
        let p = PotentialProfile::sign(1.0);
        let zeta = C64::new(0.6, 0.8);
        let g1 = green_schrodinger_fullline_many(&p, 1, zeta * zeta, 0.0, &[(0.2, 0.5)], &Numerics::default()).unwrap();
        let gd = green_dirac_many(&p, zeta, 0.0, &BoundaryFrame::standard(1), &[(0.2, 0.5)], &Numerics::default()).unwrap();
        assert!(rel_residual(&block(&gd[0], 1, 1, 1), &(&g1[0] * zeta)) > 1e-3);
    }
}
