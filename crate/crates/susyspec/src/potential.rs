//! The coefficient `phi` and its Miura images `V_j = phi^2 + (-1)^j phi'`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{max_abs, scalar, zeros, CMatrix};
use num_complex::Complex64 as C64;

/// Relative tolerance of the Hermitian check applied to every input matrix.
pub const HERMITIAN_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Shape {
    Constant(CMatrix),
    /// `phi(x) = h0 + (x - from) * h1`.
    Linear { h0: CMatrix, h1: CMatrix },
    /// Values on an equispaced grid spanning the segment, linearly interpolated.
    Samples(Vec<CMatrix>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub from: f64,
    pub to: f64,
    pub shape: Shape,
    /// Config line the segment was declared on, for error messages.
    #[serde(default)]
    pub line: Option<usize>,
}

/// An affine stretch `phi(x) = base + (x - a) * slope` on `[a, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub a: f64,
    pub b: f64,
    pub base: CMatrix,
    pub slope: CMatrix,
    pub constant: bool,
}

impl Piece {
    pub fn eval(&self, x: f64) -> CMatrix {
        if self.constant {
            self.base.clone()
        } else {
            &self.base + &self.slope * C64::new(x - self.a, 0.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialProfile {
    pub m: usize,
    /// Default reference point.
    pub x0: f64,
    pub segments: Vec<Segment>,
    pub tail_left: CMatrix,
    pub tail_right: CMatrix,
}

pub fn is_hermitian(h: &CMatrix) -> bool {
    h.is_square() && max_abs(&(h - h.adjoint())) <= HERMITIAN_TOL * (1.0 + max_abs(h))
}

fn real(v: f64) -> C64 {
    C64::new(v, 0.0)
}

impl PotentialProfile {
    /// Checks contiguity, dimensions and hermiticity.
    pub fn validate(&self) -> Result<()> {
        let v = |line: Option<usize>, msg: String| Error::Validation { line, msg };
        if self.m == 0 {
            return Err(v(None, "matrix size m must be at least 1".into()));
        }
        if !self.x0.is_finite() {
            return Err(v(None, "x0 must be finite".into()));
        }
        if self.segments.is_empty() {
            return Err(v(None, "at least one [segment] is required".into()));
        }
        let check = |h: &CMatrix, what: &str, line: Option<usize>| -> Result<()> {
            if h.nrows() != self.m || h.ncols() != self.m {
                return Err(v(
                    line,
                    format!("{what} is {}x{}, expected {}x{}", h.nrows(), h.ncols(), self.m, self.m),
                ));
            }
            if h.iter().any(|z| !z.is_finite()) {
                return Err(v(line, format!("{what} has non-finite entries")));
            }
            if !is_hermitian(h) {
                return Err(v(line, format!("{what} is not Hermitian")));
            }
            Ok(())
        };
        check(&self.tail_left, "left tail", None)?;
        check(&self.tail_right, "right tail", None)?;
        for (k, s) in self.segments.iter().enumerate() {
            if !(s.from.is_finite() && s.to.is_finite() && s.from < s.to) {
                return Err(v(s.line, format!("segment {} has invalid range [{}, {}]", k + 1, s.from, s.to)));
            }
            if k > 0 {
                let prev = &self.segments[k - 1];
                if s.from > prev.to {
                    return Err(v(s.line, format!("gap between segments: [{}, {}] then [{}, {}]", prev.from, prev.to, s.from, s.to)));
                }
                if s.from < prev.to {
                    return Err(v(s.line, format!("overlapping segments: [{}, {}] then [{}, {}]", prev.from, prev.to, s.from, s.to)));
                }
            }
            match &s.shape {
                Shape::Constant(h) => check(h, "segment matrix", s.line)?,
                Shape::Linear { h0, h1 } => {
                    check(h0, "linear segment offset", s.line)?;
                    check(h1, "linear segment slope", s.line)?;
                }
                Shape::Samples(list) => {
                    if list.len() < 2 {
                        return Err(v(s.line, "sampled segment needs at least 2 samples".into()));
                    }
                    for h in list {
                        check(h, "sample matrix", s.line)?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Left end of the active region.
    pub fn lo(&self) -> f64 {
        self.segments.first().map(|s| s.from).unwrap_or(0.0)
    }

    /// Right end of the active region.
    pub fn hi(&self) -> f64 {
        self.segments.last().map(|s| s.to).unwrap_or(0.0)
    }

    /// Segment boundaries, ascending.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.segments.iter().map(|s| s.from).collect();
        b.push(self.hi());
        b
    }

    /// Affine pieces of the active region, in order. Sampled segments contribute one piece per sample interval.
    pub fn pieces(&self) -> Vec<Piece> {
        let mut out = Vec::new();
        for s in &self.segments {
            match &s.shape {
                Shape::Constant(h) => out.push(Piece {
                    a: s.from,
                    b: s.to,
                    base: h.clone(),
                    slope: zeros(self.m, self.m),
                    constant: true,
                }),
                Shape::Linear { h0, h1 } => out.push(Piece {
                    a: s.from,
                    b: s.to,
                    base: h0.clone(),
                    slope: h1.clone(),
                    constant: max_abs(h1) == 0.0,
                }),
                Shape::Samples(list) => {
                    let n = list.len() - 1;
                    let h = (s.to - s.from) / n as f64;
                    for k in 0..n {
                        let a = s.from + k as f64 * h;
                        let b = if k + 1 == n { s.to } else { s.from + (k + 1) as f64 * h };
                        let slope = (&list[k + 1] - &list[k]) / real(h);
                        out.push(Piece {
                            a,
                            b,
                            constant: max_abs(&slope) == 0.0,
                            base: list[k].clone(),
                            slope,
                        });
                    }
                }
            }
        }
        out
    }

    /// Every point where `phi` or its derivative may fail to be smooth.
    pub fn nodes(&self) -> Vec<f64> {
        let pieces = self.pieces();
        let mut b: Vec<f64> = pieces.iter().map(|p| p.a).collect();
        b.push(self.hi());
        b
    }

    /// `phi(x)`, taking the right limit at breakpoints.
    pub fn eval_phi(&self, x: f64) -> CMatrix {
        self.piece_at(x).map(|p| p.eval(x)).unwrap_or_else(|| {
            if x < self.lo() {
                self.tail_left.clone()
            } else {
                self.tail_right.clone()
            }
        })
    }

    /// Right derivative of `phi`.
    pub fn eval_dphi(&self, x: f64) -> CMatrix {
        self.piece_at(x).map(|p| p.slope).unwrap_or_else(|| zeros(self.m, self.m))
    }

    /// `phi(x-)`.
    pub fn eval_phi_left(&self, x: f64) -> CMatrix {
        if x <= self.lo() {
            return self.tail_left.clone();
        }
        if x > self.hi() {
            return self.tail_right.clone();
        }
        let pieces = self.pieces();
        let p = pieces
            .iter()
            .find(|p| p.a < x && x <= p.b)
            .expect("x inside the active region");
        p.eval(x)
    }

    fn piece_at(&self, x: f64) -> Option<Piece> {
        if x < self.lo() || x >= self.hi() {
            return None;
        }
        self.pieces().into_iter().find(|p| p.a <= x && x < p.b)
    }

    pub fn miura_image(&self, j: u8) -> MiuraImage {
        assert!(j == 1 || j == 2, "Miura index must be 1 or 2");
        let sign = if j == 1 { -1.0 } else { 1.0 };
        let mut deltas = Vec::new();
        for x in self.nodes() {
            let jump = self.eval_phi(x) - self.eval_phi_left(x);
            let scale = 1.0 + max_abs(&self.eval_phi(x));
            if max_abs(&jump) > HERMITIAN_TOL * scale {
                deltas.push((x, jump * real(sign)));
            }
        }
        MiuraImage {
            j,
            profile: self.clone(),
            deltas,
        }
    }

    /// Same profile with `phi` replaced by `-phi`.
    pub fn negated(&self) -> PotentialProfile {
        let neg = |h: &CMatrix| -h;
        PotentialProfile {
            m: self.m,
            x0: self.x0,
            tail_left: neg(&self.tail_left),
            tail_right: neg(&self.tail_right),
            segments: self
                .segments
                .iter()
                .map(|s| Segment {
                    from: s.from,
                    to: s.to,
                    line: s.line,
                    shape: match &s.shape {
                        Shape::Constant(h) => Shape::Constant(neg(h)),
                        Shape::Linear { h0, h1 } => Shape::Linear { h0: neg(h0), h1: neg(h1) },
                        Shape::Samples(v) => Shape::Samples(v.iter().map(neg).collect()),
                    },
                })
                .collect(),
        }
    }

    /// Largest `|phi|` over pieces and tails, used to size steps and panels.
    pub fn phi_scale(&self) -> f64 {
        let mut s = crate::matcore::op_norm(&self.tail_left).max(crate::matcore::op_norm(&self.tail_right));
        for p in self.pieces() {
            s = s.max(crate::matcore::op_norm(&p.eval(p.a)));
            s = s.max(crate::matcore::op_norm(&p.eval(p.b)));
        }
        s
    }

    // Builders for the standard test profiles.

    /// `phi = 0` everywhere.
    pub fn free(m: usize) -> Self {
        Self::constant(m, 0.0)
    }

    /// `phi = c I` everywhere.
    pub fn constant(m: usize, c: f64) -> Self {
        let h = scalar(m, real(c));
        PotentialProfile {
            m,
            x0: 0.0,
            segments: vec![Segment {
                from: -1.0,
                to: 1.0,
                shape: Shape::Constant(h.clone()),
                line: None,
            }],
            tail_left: h.clone(),
            tail_right: h,
        }
    }

    /// `phi = c sgn(x)`, scalar.
    pub fn sign(c: f64) -> Self {
        let minus = scalar(1, real(-c));
        let plus = scalar(1, real(c));
        PotentialProfile {
            m: 1,
            x0: 0.0,
            segments: vec![
                Segment { from: -1.0, to: 0.0, shape: Shape::Constant(minus.clone()), line: None },
                Segment { from: 0.0, to: 1.0, shape: Shape::Constant(plus.clone()), line: None },
            ],
            tail_left: minus,
            tail_right: plus,
        }
    }

    /// `phi = c sgn(x)` on `[-a, a]` and zero outside.
    pub fn truncated_sign(c: f64, a: f64) -> Self {
        PotentialProfile {
            m: 1,
            x0: 0.0,
            segments: vec![
                Segment { from: -a, to: 0.0, shape: Shape::Constant(scalar(1, real(-c))), line: None },
                Segment { from: 0.0, to: a, shape: Shape::Constant(scalar(1, real(c))), line: None },
            ],
            tail_left: zeros(1, 1),
            tail_right: zeros(1, 1),
        }
    }

    /// 2x2 profile whose two halves do not commute: `sigma_3` left of 0, `sigma_1` right of it.
    pub fn noncommuting() -> Self {
        let s3 = CMatrix::from_row_slice(2, 2, &[real(1.0), real(0.0), real(0.0), real(-1.0)]);
        let s1 = CMatrix::from_row_slice(2, 2, &[real(0.0), real(1.0), real(1.0), real(0.0)]);
        PotentialProfile {
            m: 2,
            x0: 0.0,
            segments: vec![
                Segment { from: -1.0, to: 0.0, shape: Shape::Constant(s3.clone()), line: None },
                Segment { from: 0.0, to: 1.0, shape: Shape::Constant(s1.clone()), line: None },
            ],
            tail_left: s3,
            tail_right: s1,
        }
    }
}

/// `V_j = phi^2 + (-1)^j phi'` split into its absolutely continuous part and its point masses.
#[derive(Debug, Clone)]
pub struct MiuraImage {
    pub j: u8,
    profile: PotentialProfile,
    /// `(x_k, (-1)^j [phi(x_k+) - phi(x_k-)])` at every jump of `phi`.
    pub deltas: Vec<(f64, CMatrix)>,
}

impl MiuraImage {
    pub fn ac_part(&self, x: f64) -> CMatrix {
        let phi = self.profile.eval_phi(x);
        let dphi = self.profile.eval_dphi(x);
        let sign = if self.j == 1 { -1.0 } else { 1.0 };
        &phi * &phi + dphi * real(sign)
    }
}
