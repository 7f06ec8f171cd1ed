//! Weyl-Titchmarsh functions, Green's kernels and spectral measures for
//! one-dimensional supersymmetric Dirac operators
//!
//! ```text
//! D = [[0, A*], [A, 0]],   A = d/dx + phi(x),
//! ```
//!
//! and for their Schroedinger partners `H1 = A*A`, `H2 = AA*`, whose
//! potentials `phi^2 -+ phi'` carry delta terms wherever `phi` jumps.
//!
//! The coefficient `phi` is a piecewise affine or sampled Hermitian matrix
//! function with constant tails. Constant pieces are propagated with exact
//! matrix exponentials, so jumps in `phi` are handled without smoothing,
//! and the Weyl solutions are matched to closed-form decaying tails.

pub mod cli;
pub mod config;
pub mod error;
pub mod matcore;
pub mod numerics;
pub mod potential;
pub mod propagate;
pub mod quad;
pub mod spectral;
pub mod susy;
pub mod uniqueness;
pub mod weyl;

pub use config::{parse_config, parse_profile, Config};
pub use error::{Error, Result};
pub use matcore::{herglotz_defect, mat_exp, principal_zeta, CMatrix, SpectralPoint};
pub use numerics::Numerics;
pub use potential::{MiuraImage, PotentialProfile, Segment, Shape};
pub use propagate::{fundamental_schrodinger, propagate_dirac, wronskian, DiracFrame, SchrodingerFrame};


pub use weyl::{
    fullline_m_dirac, green_dirac, halfline_m_dirac, norm_identities, rotate_boundary_frame, weyl_solutions_dirac,
    BoundaryFrame, Side,
};
pub use susy::{
    fullline_m_schrodinger, green_schrodinger_fullline, green_schrodinger_halfline, kernel_modes, mhat, mhat_full,
    schrodinger_weyl_m, schrodinger_weyl_solutions, susy_identity_suite, FullLineSchrodingerM, KernelModeReport,
    L2Status, SchrodingerWeyl, SuiteReport, SuiteRow,
};
pub use spectral::{
    parseval_check, probe_point_mass, spectral_density, transform_hat, CompactFunction, MSource, ParsevalOptions,
    ParsevalReport, PointMass, SpectralDensityEstimate, TransformCoefficients,
};
pub use uniqueness::{bm_decay_experiment, bm_deltas, BmOptions, DecayFit};
