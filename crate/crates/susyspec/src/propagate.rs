//! Fundamental solutions of the Dirac system and of the two quasi-derivative
//! Schroedinger systems.
//!
//! Dirac, `U = (u1; u2)`:
//! ```text
//! u1' = -phi u1 + zeta u2,    u2' = phi u2 - zeta u1
//! ```
//! Schroedinger `H_j`, `F = (f; f^[1,j])` with `f^[1,1] = f' + phi f`, `f^[1,2] = f' - phi f`:
//! ```text
//! F' = [[(-1)^j phi, I], [-z I, (-1)^(j+1) phi]] F
//! ```
//! Constant pieces are crossed with one matrix exponential; affine pieces
//! with an embedded Dormand-Prince 5(4) stepper.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{block, from_blocks, identity, is_finite, mat_exp, max_abs, scalar, CMatrix};
use crate::numerics::Numerics;
use crate::potential::{Piece, PotentialProfile};
use crate::weyl::BoundaryFrame;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum System {
    Dirac { zeta: C64 },
    Schrodinger { j: u8, z: C64 },
}

impl System {
    pub fn generator(&self, phi: &CMatrix) -> CMatrix {
        let m = phi.nrows();
        match *self {
            System::Dirac { zeta } => from_blocks(&(-phi), &scalar(m, zeta), &scalar(m, -zeta), phi),
            System::Schrodinger { j, z } => {
                let s = if j == 1 { -1.0 } else { 1.0 };
                from_blocks(
                    &(phi * C64::new(s, 0.0)),
                    &identity(m),
                    &scalar(m, -z),
                    &(phi * C64::new(-s, 0.0)),
                )
            }
        }
    }
}

/// Propagates solution matrices of one system over the whole line.
pub struct Propagator {
    system: System,
    pieces: Vec<Piece>,
    lo: f64,
    hi: f64,
    k_left: CMatrix,
    k_right: CMatrix,
    tol: f64,
    overflow: f64,
}

impl Propagator {
    pub fn new(p: &PotentialProfile, system: System, num: &Numerics) -> Self {
        Propagator {
            system,
            pieces: p.pieces(),
            lo: p.lo(),
            hi: p.hi(),
            k_left: system.generator(&p.tail_left),
            k_right: system.generator(&p.tail_right),
            tol: num.tol_ode,
            overflow: num.overflow,
        }
    }

    pub fn system(&self) -> System {
        self.system
    }

    /// Sub-intervals of `[min(a,b), max(a,b)]` in travel order, each with its piece (None for tails).
    fn route(&self, a: f64, b: f64) -> Vec<(f64, f64, Option<usize>)> {
        let (l, r) = if a <= b { (a, b) } else { (b, a) };
        let mut parts = Vec::new();
        if l < self.lo {
            parts.push((l, r.min(self.lo), None));
        }
        for (k, p) in self.pieces.iter().enumerate() {
            let s = l.max(p.a);
            let t = r.min(p.b);
            if s < t {
                parts.push((s, t, Some(k)));
            }
        }
        if r > self.hi {
            parts.push((l.max(self.hi), r, None));
        }
        if a > b {
            parts.reverse();
            parts.into_iter().map(|(s, t, k)| (t, s, k)).collect()
        } else {
            parts
        }
    }

    /// Transports the solution matrix `y` (2m x k) from `a` to `b`.
    pub fn advance(&self, y: &CMatrix, a: f64, b: f64) -> Result<CMatrix> {
        let mut y = y.clone();
        if a == b {
            return Ok(y);
        }
        for (s, t, piece) in self.route(a, b) {
            y = match piece {
                None => {
                    let k = if s.max(t) <= self.lo { &self.k_left } else { &self.k_right };
                    mat_exp(&(k * C64::new(t - s, 0.0))) * y
                }
                Some(i) if self.pieces[i].constant => {
                    let k = self.system.generator(&self.pieces[i].base);
                    mat_exp(&(k * C64::new(t - s, 0.0))) * y
                }
                Some(i) => self.dopri(&y, s, t, &self.pieces[i])?,
            };
            self.guard(&y, t)?;
        }
        Ok(y)
    }

    fn guard(&self, y: &CMatrix, x: f64) -> Result<()> {
        let n = max_abs(y);
        if !is_finite(y) || n > self.overflow {
            return Err(Error::ill(
                "propagation",
                format!("solution norm {n:.3e} exceeded {:.1e} at x = {x}", self.overflow),
            ));
        }
        Ok(())
    }

    /// Values at each target, marching outward from `a` in both directions. Output order follows `targets`.
    pub fn march(&self, y0: &CMatrix, a: f64, targets: &[f64]) -> Result<Vec<CMatrix>> {
        let mut out: Vec<Option<CMatrix>> = vec![None; targets.len()];
        let mut up: Vec<usize> = (0..targets.len()).filter(|&i| targets[i] >= a).collect();
        let mut down: Vec<usize> = (0..targets.len()).filter(|&i| targets[i] < a).collect();
        up.sort_by(|&i, &j| targets[i].total_cmp(&targets[j]));
        down.sort_by(|&i, &j| targets[j].total_cmp(&targets[i]));
        for order in [up, down] {
            let mut x = a;
            let mut y = y0.clone();
            for i in order {
                y = self.advance(&y, x, targets[i])?;
                x = targets[i];
                out[i] = Some(y.clone());
            }
        }
        Ok(out.into_iter().map(|v| v.expect("every target visited")).collect())
    }

    /// Dormand-Prince 5(4) across one affine piece, from `s` to `t` (either direction).
    fn dopri(&self, y0: &CMatrix, s: f64, t: f64, piece: &Piece) -> Result<CMatrix> {
        const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
        const A: [[f64; 6]; 7] = [
            [0.0; 6],
            [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
            [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
            [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
            [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
            [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
            [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
        ];
        const E: [f64; 7] = [
            71.0 / 57600.0,
            0.0,
            -71.0 / 16695.0,
            71.0 / 1920.0,
            -17253.0 / 339200.0,
            22.0 / 525.0,
            -1.0 / 40.0,
        ];
        let gen = |x: f64| self.system.generator(&piece.eval(x));
        let dir = (t - s).signum();
        let span = (t - s).abs();
        let kscale = 1.0 + max_abs(&gen(s)).max(max_abs(&gen(t)));
        let mut h = (0.5 / kscale).min(span);
        let mut x = s;
        let mut y = y0.clone();
        let mut k1 = gen(x) * &y;
        let mut steps = 0usize;
        while (t - x) * dir > 0.0 {
            steps += 1;
            if steps > 2_000_000 {
                return Err(Error::ill("propagation", format!("step limit reached near x = {x}")));
            }
            if h >= (t - x).abs() {
                h = (t - x).abs();
            }
            let hs = h * dir;
            let mut ks: Vec<CMatrix> = Vec::with_capacity(7);
            ks.push(k1.clone());
            for i in 1..7 {
                let mut yi = y.clone();
                for (jj, kj) in ks.iter().enumerate().take(i) {
                    let a = A[i][jj];
                    if a != 0.0 {
                        yi += kj * C64::new(hs * a, 0.0);
                    }
                }
                ks.push(gen(x + C[i] * hs) * yi);
            }
            let mut y_new = y.clone();
            let mut err = CMatrix::zeros(y.nrows(), y.ncols());
            for (i, k) in ks.iter().enumerate() {
                if i < 6 && A[6][i] != 0.0 {
                    y_new += k * C64::new(hs * A[6][i], 0.0);
                }
                if E[i] != 0.0 {
                    err += k * C64::new(hs * E[i], 0.0);
                }
            }
            // Column-wise relative error norm.
            let mut enorm: f64 = 0.0;
            for c in 0..y.ncols() {
                let scale = y.column(c).norm().max(y_new.column(c).norm()).max(1e-300);
                enorm = enorm.max(err.column(c).norm() / (self.tol * scale));
            }
            if !enorm.is_finite() {
                return Err(Error::ill("propagation", format!("non-finite step near x = {x}")));
            }
            if enorm <= 1.0 {
                x = if (h - (t - x).abs()).abs() <= 0.0 { t } else { x + hs };
                y = y_new;
                k1 = ks.pop().expect("seven stages");
                self.guard(&y, x)?;
            }
            let factor = if enorm == 0.0 { 5.0 } else { (0.9 * enorm.powf(-0.2)).clamp(0.2, 5.0) };
            h *= factor;
            if h < 1e-14 * (1.0 + x.abs()) {
                return Err(Error::ill("propagation", format!("step size underflow near x = {x}")));
            }
        }
        Ok(y)
    }
}

/// Fundamental matrix of the Dirac system, normalized by a boundary frame at `x0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiracFrame {
    pub zeta: C64,
    pub x: f64,
    /// `[[theta1, phi1], [theta2, phi2]]`.
    pub psi: CMatrix,
}

/// `Psi(zeta, x, x0, alpha)` with `Psi(x0) = (alpha*, J alpha*)`.
pub fn propagate_dirac(
    p: &PotentialProfile,
    zeta: C64,
    x0: f64,
    alpha: &BoundaryFrame,
    x: f64,
    num: &Numerics,
) -> Result<DiracFrame> {
    if !zeta.is_finite() {
        return Err(Error::InvalidArgument(format!("zeta must be finite, got {zeta}")));
    }
    let prop = Propagator::new(p, System::Dirac { zeta }, num);
    let psi = prop.advance(&alpha.psi0(), x0, x)?;
    Ok(DiracFrame { zeta, x, psi })
}

/// Dirichlet/Neumann-type fundamental system of `H_j` normalized at `x0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchrodingerFrame {
    pub j: u8,
    pub z: C64,
    pub x: f64,
    pub s: CMatrix,
    pub c: CMatrix,
    pub s_qd: CMatrix,
    pub c_qd: CMatrix,
}

impl SchrodingerFrame {
    fn from_state(j: u8, z: C64, x: f64, y: &CMatrix) -> Self {
        let m = y.nrows() / 2;
        SchrodingerFrame {
            j,
            z,
            x,
            c: block(y, 0, 0, m),
            c_qd: block(y, 1, 0, m),
            s: block(y, 0, 1, m),
            s_qd: block(y, 1, 1, m),
        }
    }
}

pub fn fundamental_schrodinger(
    p: &PotentialProfile,
    j: u8,
    z: C64,
    x0: f64,
    x: f64,
    num: &Numerics,
) -> Result<SchrodingerFrame> {
    Ok(fundamental_schrodinger_at(p, j, z, x0, &[x], num)?.remove(0))
}

/// Fundamental system at several points, marching outward from `x0`.
pub fn fundamental_schrodinger_at(
    p: &PotentialProfile,
    j: u8,
    z: C64,
    x0: f64,
    xs: &[f64],
    num: &Numerics,
) -> Result<Vec<SchrodingerFrame>> {
    check_index(j)?;
    if !z.is_finite() {
        return Err(Error::InvalidArgument(format!("z must be finite, got {z}")));
    }
    let prop = Propagator::new(p, System::Schrodinger { j, z }, num);
    let ys = prop.march(&identity(2 * p.m), x0, xs)?;
    Ok(xs.iter().zip(&ys).map(|(&x, y)| SchrodingerFrame::from_state(j, z, x, y)).collect())
}

pub(crate) fn check_index(j: u8) -> Result<()> {
    if j == 1 || j == 2 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("partner index j must be 1 or 2, got {j}")))
    }
}

/// `F G_qd - F_qd G`; the caller passes the already conjugated left factor.
pub fn wronskian(f: &CMatrix, f_qd: &CMatrix, g: &CMatrix, g_qd: &CMatrix) -> CMatrix {
    f * g_qd - f_qd * g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{j_form, rel_residual, I};
    use crate::potential::{Segment, Shape};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn num() -> Numerics {
        Numerics::default()
    }

    fn smooth_profile() -> PotentialProfile {
        PotentialProfile {
            m: 1,
            x0: 0.0,
            segments: vec![
                Segment {
                    from: -1.0,
                    to: 0.5,
                    shape: Shape::Linear { h0: scalar(1, c(-0.5, 0.0)), h1: scalar(1, c(1.0, 0.0)) },
                    line: None,
                },
                Segment {
                    from: 0.5,
                    to: 2.0,
                    shape: Shape::Samples(vec![scalar(1, c(1.0, 0.0)), scalar(1, c(0.3, 0.0)), scalar(1, c(0.7, 0.0))]),
                    line: None,
                },
            ],
            tail_left: scalar(1, c(-0.5, 0.0)),
            tail_right: scalar(1, c(0.7, 0.0)),
        }
    }

    /// Classical RK4 at a fixed step, used as an independent oracle.
    fn rk4(p: &PotentialProfile, sys: System, y0: &CMatrix, a: f64, b: f64, h: f64) -> CMatrix {
        let n = ((b - a).abs() / h).round() as usize;
        let h = (b - a) / n as f64;
        let f = |x: f64, y: &CMatrix| sys.generator(&p.eval_phi(x)) * y;
        let mut y = y0.clone();
        for k in 0..n {
            let x = a + k as f64 * h;
            // Stage points are nudged inward so the right-limit convention never reads across a jump.
            let xm = x + 0.5 * h;
            let x1 = x + h * (1.0 - 1e-8);
            let x0 = x + h * 1e-8;
            let k1 = f(x0, &y);
            let k2 = f(xm, &(&y + &k1 * c(0.5 * h, 0.0)));
            let k3 = f(xm, &(&y + &k2 * c(0.5 * h, 0.0)));
            let k4 = f(x1, &(&y + &k3 * c(h, 0.0)));
            y += (k1 + k2 * c(2.0, 0.0) + k3 * c(2.0, 0.0) + k4) * c(h / 6.0, 0.0);
        }
        y
    }

    #[test]
    fn free_dirac_closed_form() {
        let p = PotentialProfile::free(1);
        let f = propagate_dirac(&p, I, 0.0, &BoundaryFrame::standard(1), 1.0, &num()).unwrap();
        let ch = 1.0f64.cosh();
        let sh = 1.0f64.sinh();
        let expect = CMatrix::from_row_slice(2, 2, &[c(ch, 0.0), c(0.0, sh), c(0.0, -sh), c(ch, 0.0)]);
        assert!(max_abs(&(&f.psi - &expect)) < 1e-13);
        assert!((f.psi[(0, 0)].re - 1.543080635).abs() < 1e-9);
        assert!((f.psi[(0, 1)].im - 1.175201194).abs() < 1e-9);
    }

    #[test]
    fn normalization_at_reference_point() {
        let p = PotentialProfile::noncommuting();
        let f = propagate_dirac(&p, c(0.3, 1.2), 0.4, &BoundaryFrame::standard(2), 0.4, &num()).unwrap();
        assert_eq!(f.psi, identity(4));
        let s = fundamental_schrodinger(&p, 2, c(0.3, 1.2), 0.4, 0.4, &num()).unwrap();
        assert_eq!(s.c, identity(2));
        assert_eq!(s.s_qd, identity(2));
        assert_eq!(max_abs(&s.s), 0.0);
        assert_eq!(max_abs(&s.c_qd), 0.0);
    }

    #[test]
    fn sign_profile_against_fine_rk4() {
        let p = PotentialProfile::sign(1.0);
        let sys = System::Dirac { zeta: I };
        let exact = propagate_dirac(&p, I, 0.0, &BoundaryFrame::standard(1), 0.5, &num()).unwrap();
        let oracle = rk4(&p, sys, &identity(2), 0.0, 0.5, 1e-5);
        assert!(max_abs(&(&exact.psi - &oracle)) < 1e-9, "{}", max_abs(&(&exact.psi - &oracle)));
        // Across the jump, from the left.
        let exact = propagate_dirac(&p, I, -0.5, &BoundaryFrame::standard(1), 0.5, &num()).unwrap();
        let oracle = rk4(&p, sys, &identity(2), -0.5, 0.0, 1e-5);
        let oracle = rk4(&p, sys, &oracle, 0.0, 0.5, 1e-5);
        assert!(max_abs(&(&exact.psi - &oracle)) < 1e-9, "{}", max_abs(&(&exact.psi - &oracle)));
    }

    #[test]
    fn affine_pieces_against_fine_rk4() {
        let p = smooth_profile();
        for sys in [System::Dirac { zeta: c(0.7, 0.9) }, System::Schrodinger { j: 2, z: c(-2.0, 1.0) }] {
            let prop = Propagator::new(&p, sys, &num());
            let y = prop.advance(&identity(2), -0.3, 1.7).unwrap();
            let mut oracle = rk4(&p, sys, &identity(2), -0.3, 0.5, 1e-4);
            oracle = rk4(&p, sys, &oracle, 0.5, 1.25, 1e-4);
            oracle = rk4(&p, sys, &oracle, 1.25, 1.7, 1e-4);
            assert!(rel_residual(&y, &oracle) < 1e-9, "{}", rel_residual(&y, &oracle));
        }
    }

    #[test]
    fn free_schrodinger_hyperbolic() {
        let p = PotentialProfile::free(1);
        let f = fundamental_schrodinger(&p, 1, c(-1.0, 0.0), 0.0, 1.0, &num()).unwrap();
        assert!((f.s[(0, 0)] - c(1.175201194, 0.0)).norm() < 1e-9);
        assert!((f.c[(0, 0)] - c(1.543080635, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn dirac_schrodinger_connection() {
        // s1 = phi1 / zeta on the sign profile, where s1 is the H1 solution.
        let p = PotentialProfile::sign(1.0);
        let zeta = c(0.4, 1.1);
        for x in [-1.5, -0.2, 0.7, 2.0] {
            let d = propagate_dirac(&p, zeta, 0.0, &BoundaryFrame::standard(1), x, &num()).unwrap();
            let s1 = fundamental_schrodinger(&p, 1, zeta * zeta, 0.0, x, &num()).unwrap();
            let s2 = fundamental_schrodinger(&p, 2, zeta * zeta, 0.0, x, &num()).unwrap();
            assert!((s1.s[(0, 0)] - d.psi[(0, 1)] / zeta).norm() < 1e-12);
            assert!((s1.c[(0, 0)] - d.psi[(0, 0)]).norm() < 1e-12);
            assert!((s2.s[(0, 0)] - d.psi[(1, 0)] / (-zeta)).norm() < 1e-12);
            assert!((s2.c[(0, 0)] - d.psi[(1, 1)]).norm() < 1e-12);
        }
    }

    #[test]
    fn free_schrodinger_at_zeta_i_matches_sine() {
        let p = PotentialProfile::free(1);
        let d = propagate_dirac(&p, I, 0.0, &BoundaryFrame::standard(1), 1.0, &num()).unwrap();
        let s1 = d.psi[(0, 1)] / I;
        assert!((s1 - c(1.175201194, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn symplectic_identity_at_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for p in [PotentialProfile::sign(1.0), PotentialProfile::noncommuting(), smooth_profile()] {
            let m = p.m;
            let zeta = c(0.6, 0.8);
            let alpha = crate::weyl::test_support::random_frame(m, &mut rng);
            let prop = Propagator::new(&p, System::Dirac { zeta }, &num());
            let prop_bar = Propagator::new(&p, System::Dirac { zeta: zeta.conj() }, &num());
            let xs: Vec<f64> = (0..20).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let a = prop.march(&alpha.psi0(), 0.0, &xs).unwrap();
            let b = prop_bar.march(&alpha.psi0(), 0.0, &xs).unwrap();
            for (pa, pb) in a.iter().zip(&b) {
                let lhs = pb.adjoint() * j_form(m) * pa;
                assert!(max_abs(&(lhs - j_form(m))) < 1e-9);
            }
        }
    }

    #[test]
    fn susy_transfer_columnwise() {
        // u1^[1,1] = zeta u2 and u2^[1,2] = -zeta u1 for any Dirac solution.
        let p = smooth_profile();
        let zeta = c(0.5, 1.3);
        let h = 1e-6;
        let prop = Propagator::new(&p, System::Dirac { zeta }, &num());
        for x in [-0.6, 0.1, 0.9, 1.6] {
            let ys = prop.march(&identity(2), 0.0, &[x - h, x, x + h]).unwrap();
            let phi = p.eval_phi(x)[(0, 0)];
            for col in 0..2 {
                let d1 = (ys[2][(0, col)] - ys[0][(0, col)]) / (2.0 * h);
                let d2 = (ys[2][(1, col)] - ys[0][(1, col)]) / (2.0 * h);
                let u1 = ys[1][(0, col)];
                let u2 = ys[1][(1, col)];
                assert!((d1 + phi * u1 - zeta * u2).norm() < 1e-6);
                assert!((d2 - phi * u2 + zeta * u1).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn tolerance_refinement_converges() {
        let p = smooth_profile();
        let mut fine = num();
        let coarse = Numerics { tol_ode: 1e-8, ..num() };
        fine.tol_ode = 0.5e-8;
        let sys = System::Schrodinger { j: 1, z: c(3.0, 0.5) };
        let a = Propagator::new(&p, sys, &coarse).advance(&identity(2), -1.0, 2.0).unwrap();
        let b = Propagator::new(&p, sys, &fine).advance(&identity(2), -1.0, 2.0).unwrap();
        assert!(rel_residual(&a, &b) < 10.0 * 1e-8);
    }

    #[test]
    fn overflow_is_reported() {
        let p = PotentialProfile::free(1);
        let e = propagate_dirac(&p, c(0.0, 50.0), 0.0, &BoundaryFrame::standard(1), 10.0, &num()).unwrap_err();
        match e {
            Error::IllConditioned { detail, .. } => assert!(detail.contains("x =")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wronskian_of_normalized_pair_is_identity() {
        let p = PotentialProfile::noncommuting();
        let f = fundamental_schrodinger(&p, 1, c(-1.0, 0.5), 0.0, 0.0, &num()).unwrap();
        let w = wronskian(&f.c.adjoint(), &f.c_qd.adjoint(), &f.s, &f.s_qd);
        assert!(max_abs(&(w - identity(2))) == 0.0);
    }
}
