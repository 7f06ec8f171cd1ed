use serde::{Deserialize, Serialize};

/// Tolerances and margins shared by all computations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Numerics {
    /// Local tolerance of the adaptive stepper on non-constant pieces.
    pub tol_ode: f64,
    /// Slack allowed below zero in Herglotz defect checks.
    pub tol_psd: f64,
    /// Minimal distance between a Schroedinger energy and `[0, inf)`.
    pub delta_spec: f64,
    /// Largest accepted 1-norm condition number for any inversion.
    pub cond_max: f64,
    /// Propagation aborts once a solution norm exceeds this.
    pub overflow: f64,
    /// Stieltjes inversion offsets, strictly decreasing.
    pub eps_schedule: Vec<f64>,
    /// Number of decay lengths between the last breakpoint and the sampling cut-off `L`.
    pub tail_decay_lengths: f64,
    /// Tolerance used by the identity suite for each residual.
    pub suite_tol: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            tol_ode: 1e-10,
            tol_psd: 1e-10,
            delta_spec: 1e-6,
            cond_max: 1e12,
            overflow: 1e150,
            eps_schedule: vec![1e-2, 5e-3, 2.5e-3],
            tail_decay_lengths: 40.0,
            suite_tol: 1e-8,
        }
    }
}

impl Numerics {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("tol_ode", self.tol_ode),
            ("tol_psd", self.tol_psd),
            ("delta_spec", self.delta_spec),
            ("cond_max", self.cond_max),
            ("overflow", self.overflow),
            ("tail_decay_lengths", self.tail_decay_lengths),
            ("suite_tol", self.suite_tol),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be a positive finite number, got {v}"));
            }
        }
        validate_eps_schedule(&self.eps_schedule)
    }
}

pub(crate) fn validate_eps_schedule(eps: &[f64]) -> Result<(), String> {
    if eps.len() < 3 {
        return Err(format!("eps schedule needs at least 3 values, got {}", eps.len()));
    }
    if eps.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err("eps schedule entries must be positive".into());
    }
    if eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err("eps schedule must be strictly decreasing".into());
    }
    Ok(())
}
