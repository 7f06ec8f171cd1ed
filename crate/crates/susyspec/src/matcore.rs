//! Dense complex small-matrix kernels shared by every other module.
//!
//! Matrices here are at most `2m x 2m` with `m` in the single digits, so
//! everything is plain `DMatrix<Complex64>` with LU and Hermitian
//! eigen-decompositions from nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Default margin kept between a Schroedinger energy and the half-axis `[0, inf)`.
pub const DEFAULT_DELTA_SPEC: f64 = 1e-6;

/// A complex energy together with its momentum on the branch `Im zeta > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralPoint {
    pub z: C64,
    pub zeta: C64,
}

impl SpectralPoint {
    /// Builds the point from a Dirac spectral parameter; any non-real `zeta` is accepted.
    pub fn from_zeta(zeta: C64) -> Result<Self> {
        if zeta.im == 0.0 || !zeta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "Dirac spectral parameter must be finite and non-real, got {zeta}"
            )));
        }
        Ok(SpectralPoint { z: zeta * zeta, zeta })
    }
}

/// Distance from `z` to the closed half-axis `[0, inf)`.
pub fn distance_to_positive_axis(z: C64) -> f64 {
    if z.re >= 0.0 {
        z.im.abs()
    } else {
        z.norm()
    }
}

/// Square root of `z` with positive imaginary part.
pub fn principal_zeta(z: C64) -> Result<SpectralPoint> {
    principal_zeta_with_margin(z, DEFAULT_DELTA_SPEC)
}

pub fn principal_zeta_with_margin(z: C64, margin: f64) -> Result<SpectralPoint> {
    let distance = distance_to_positive_axis(z);
    if !z.is_finite() || distance < margin || distance == 0.0 {
        return Err(Error::SpectrumProximity {
            z,
            distance,
            margin,
        });
    }
    // sqrt(-z) has Re > 0 off the positive axis, so i*sqrt(-z) has Im > 0.
    let zeta = I * (-z).sqrt();
    Ok(SpectralPoint { z, zeta })
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn zeros(r: usize, c: usize) -> CMatrix {
    CMatrix::zeros(r, c)
}

pub fn scalar(n: usize, s: C64) -> CMatrix {
    CMatrix::from_diagonal_element(n, n, s)
}

/// Largest entry modulus.
pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().fold(0.0_f64, |acc, v| acc.max(v.norm()))
}

/// `max|a - b| / (1 + max|b|)`.
pub fn rel_residual(a: &CMatrix, b: &CMatrix) -> f64 {
    max_abs(&(a - b)) / (1.0 + max_abs(b))
}

pub fn is_finite(a: &CMatrix) -> bool {
    a.iter().all(|v| v.is_finite())
}

pub fn one_norm(a: &CMatrix) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `(A - A^*) / 2i`.
pub fn hermitian_imag(a: &CMatrix) -> CMatrix {
    (a - a.adjoint()) / (2.0 * I)
}

/// `(A + A^*) / 2`.
pub fn hermitian_real(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * C64::new(0.5, 0.0)
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(h: &CMatrix) -> (Vec<f64>, CMatrix) {
    let herm = hermitian_real(h);
    let eig = SymmetricEigen::new(herm);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = zeros(h.nrows(), h.ncols());
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Smallest eigenvalue of `Im M`; non-negative for Herglotz values in the upper half-plane.
pub fn herglotz_defect(m: &CMatrix) -> f64 {
    let (values, _) = hermitian_eigen(&hermitian_imag(m));
    values.first().copied().unwrap_or(0.0)
}

pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Spectral norm.
pub fn op_norm(a: &CMatrix) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

pub fn smallest_singular_value(a: &CMatrix) -> f64 {
    singular_values(a).last().copied().unwrap_or(0.0)
}

/// Inverse by partially pivoted LU, refused when the 1-norm condition number exceeds `cond_max`.
pub fn invert(a: &CMatrix, cond_max: f64, context: &str) -> Result<CMatrix> {
    if a.nrows() != a.ncols() {
        return Err(Error::InvalidArgument(format!(
            "{context}: cannot invert a {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    let inv = a
        .clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::ill(context, "matrix is exactly singular"))?;
    let cond = one_norm(a) * one_norm(&inv);
    if !cond.is_finite() || cond > cond_max || !is_finite(&inv) {
        return Err(Error::ill(
            context,
            format!("condition estimate {cond:.3e} exceeds {cond_max:.1e}"),
        ));
    }
    Ok(inv)
}

/// Copy of the `(bi, bj)` block of size `n x n`.
pub fn block(a: &CMatrix, bi: usize, bj: usize, n: usize) -> CMatrix {
    a.view((bi * n, bj * n), (n, n)).into_owned()
}

/// Assembles `[[a, b], [c, d]]` from equally sized square blocks.
pub fn from_blocks(a: &CMatrix, b: &CMatrix, c: &CMatrix, d: &CMatrix) -> CMatrix {
    let n = a.nrows();
    let mut out = zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(a);
    out.view_mut((0, n), (n, n)).copy_from(b);
    out.view_mut((n, 0), (n, n)).copy_from(c);
    out.view_mut((n, n), (n, n)).copy_from(d);
    out
}

/// Stacks two blocks vertically.
pub fn vstack(top: &CMatrix, bottom: &CMatrix) -> CMatrix {
    let mut out = zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.view_mut((0, 0), top.shape()).copy_from(top);
    out.view_mut((top.nrows(), 0), bottom.shape()).copy_from(bottom);
    out
}

pub fn top_half(a: &CMatrix) -> CMatrix {
    let n = a.nrows() / 2;
    a.rows(0, n).into_owned()
}

pub fn bottom_half(a: &CMatrix) -> CMatrix {
    let n = a.nrows() / 2;
    a.rows(n, n).into_owned()
}

/// The symplectic form `[[0, -I], [I, 0]]`.
pub fn j_form(m: usize) -> CMatrix {
    let id = identity(m);
    let z = zeros(m, m);
    from_blocks(&z, &(-&id), &id, &z)
}

/// `diag(I, -I)`.
pub fn sigma3(m: usize) -> CMatrix {
    let id = identity(m);
    let z = zeros(m, m);
    from_blocks(&id, &z, &z, &(-&id))
}

/// `[[0, I], [I, 0]]`.
pub fn sigma1(m: usize) -> CMatrix {
    let id = identity(m);
    let z = zeros(m, m);
    from_blocks(&z, &id, &id, &z)
}

/// Applies a scalar function to a Hermitian matrix through its eigen-decomposition.
pub fn hermitian_function(h: &CMatrix, f: impl Fn(f64) -> C64) -> CMatrix {
    let (values, vectors) = hermitian_eigen(h);
    let d = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        values.len(),
        values.iter().map(|&v| f(v)),
    ));
    &vectors * d * vectors.adjoint()
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring around a [13/13] Pade approximant.
pub fn mat_exp(a: &CMatrix) -> CMatrix {
    assert!(a.is_square(), "mat_exp needs a square matrix");
    let n = a.nrows();
    if n == 0 {
        return zeros(0, 0);
    }
    if n == 1 {
        return CMatrix::from_element(1, 1, a[(0, 0)].exp());
    }
    let norm = one_norm(a);
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = a * C64::new(2f64.powi(-squarings), 0.0);
    let mut r = pade13(&scaled);
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

fn pade13(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    let b = |k: usize| C64::new(PADE13[k], 0.0);
    let id = identity(n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9))
        + &a6 * b(7)
        + &a4 * b(5)
        + &a2 * b(3)
        + &id * b(1);
    let u = a * u_inner;
    let v = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8))
        + &a6 * b(6)
        + &a4 * b(4)
        + &a2 * b(2)
        + &id * b(0);
    let p = &v + &u;
    let q = &v - &u;
    q.lu().solve(&p).expect("Pade denominator is well conditioned after scaling")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// Truncated Taylor series with enough terms for the norms used below.
    fn series_exp(a: &CMatrix) -> CMatrix {
        let n = a.nrows();
        let mut term = identity(n);
        let mut sum = identity(n);
        for k in 1..80 {
            term = &term * a / c(k as f64, 0.0);
            sum += &term;
        }
        sum
    }

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> CMatrix {
        CMatrix::from_fn(n, n, |_, _| c(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale)))
    }

    #[test]
    fn zeta_of_negative_one_is_i() {
        let sp = principal_zeta(c(-1.0, 0.0)).unwrap();
        assert_relative_eq!(sp.zeta.re, 0.0, epsilon = 1e-15);
        assert_relative_eq!(sp.zeta.im, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn zeta_of_i_is_on_the_diagonal() {
        let sp = principal_zeta(I).unwrap();
        assert_relative_eq!(sp.zeta.re, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_relative_eq!(sp.zeta.im, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
    }

    #[test]
    fn zeta_on_the_spectrum_is_refused() {
        assert!(matches!(
            principal_zeta(c(4.0, 0.0)),
            Err(Error::SpectrumProximity { .. })
        ));
        assert!(principal_zeta(c(4.0, 1e-8)).is_err());
        assert!(principal_zeta(c(0.0, 0.0)).is_err());
        assert!(principal_zeta(c(-1e-3, 0.0)).is_ok());
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let e = mat_exp(&zeros(2, 2));
        assert_eq!(e, identity(2));
    }

    #[test]
    fn exp_of_diagonal() {
        let mut a = zeros(2, 2);
        a[(0, 0)] = c(1.0, 0.0);
        a[(1, 1)] = c(2.0, 0.0);
        let e = mat_exp(&a);
        assert_relative_eq!(e[(0, 0)].re, std::f64::consts::E, epsilon = 1e-12);
        assert_relative_eq!(e[(1, 1)].re, std::f64::consts::E * std::f64::consts::E, epsilon = 1e-11);
        assert!(e[(0, 1)].norm() < 1e-15 && e[(1, 0)].norm() < 1e-15);
    }

    #[test]
    fn exp_of_rotation_generator_matches_series() {
        let a = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(-PI / 2.0, 0.0), c(PI / 2.0, 0.0), c(0.0, 0.0)]);
        let oracle = series_exp(&a);
        let e = mat_exp(&a);
        let expected = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        assert!(max_abs(&(&oracle - &expected)) < 1e-14);
        assert!(max_abs(&(&e - &expected)) < 1e-14);
    }

    #[test]
    fn exp_matches_series_on_random_4x4() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let a = random_matrix(&mut rng, 4, 1.5);
            let oracle = series_exp(&a);
            let e = mat_exp(&a);
            assert!(max_abs(&(&e - &oracle)) <= 1e-12 * max_abs(&oracle), "{}", max_abs(&(&e - &oracle)));
        }
    }

    #[test]
    fn exp_inverse_pair_for_hermitian_generators() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let g = random_matrix(&mut rng, 4, 1.0);
            let h = hermitian_real(&g);
            let h = &h * c(10.0 / op_norm(&h), 0.0);
            let a = &h * I;
            let prod = mat_exp(&a) * mat_exp(&(-&a));
            assert!(max_abs(&(prod - identity(4))) < 1e-10);
            // For A = H itself the product carries a condition number of e^20, so only a relative bound is meaningful.
            let (e, f) = (mat_exp(&h), mat_exp(&(-&h)));
            let prod = &e * &f;
            assert!(max_abs(&(prod - identity(4))) < 1e-10 * op_norm(&e) * op_norm(&f));
        }
    }

    #[test]
    fn herglotz_defect_examples() {
        assert_relative_eq!(herglotz_defect(&scalar(2, I)), 1.0, epsilon = 1e-15);
        let h = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.5, 0.5), c(0.5, -0.5), c(-2.0, 0.0)]);
        assert!(herglotz_defect(&h).abs() < 1e-15);
        let mut d = zeros(2, 2);
        d[(0, 0)] = I;
        d[(1, 1)] = -I;
        assert_relative_eq!(herglotz_defect(&d), -1.0, epsilon = 1e-15);
    }

    #[test]
    fn invert_refuses_singular() {
        let a = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0, 0.0)]);
        assert!(matches!(invert(&a, 1e12, "t"), Err(Error::IllConditioned { .. })));
        let b = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0 + 1e-14, 0.0)]);
        assert!(invert(&b, 1e12, "t").is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn zeta_branch_is_consistent_under_conjugation(re in -50.0..50.0f64, im in 1e-3..50.0f64, lower in any::<bool>()) {
                let z = if lower { c(re, -im) } else { c(re, im) };
                let a = principal_zeta(z).unwrap().zeta;
                let b = principal_zeta(z.conj()).unwrap().zeta;
                prop_assert!((b + a.conj()).norm() <= 1e-14 * (1.0 + a.norm()));
                prop_assert!(a.im > 0.0);
                prop_assert!((a * a - z).norm() <= 1e-14 * z.norm());
            }

            #[test]
            fn herglotz_defect_ignores_hermitian_shifts(
                entries in proptest::collection::vec(-5.0..5.0f64, 16),
            ) {
                let m = CMatrix::from_fn(2, 2, |i, j| c(entries[2 * i + j], entries[4 + 2 * i + j]));
                let g = CMatrix::from_fn(2, 2, |i, j| c(entries[8 + 2 * i + j], entries[12 + 2 * i + j]));
                let h = hermitian_real(&g);
                prop_assert!((herglotz_defect(&m) - herglotz_defect(&(&m + &h))).abs() < 1e-12);
            }
        }
    }
}
