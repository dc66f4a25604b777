use crate::error::{Error, Result};

/// Physical, numerical and safety parameters of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    /// Perturbation size, in `[0, 1]`.
    pub epsilon: f64,
    /// Shallowness `(H/L)^2`, in `(0, 1]`.
    pub mu: f64,
    /// Mollifier cutoff; 0 keeps only the 2/3 dealiasing.
    pub delta: f64,
    pub dt: f64,
    pub t_end: f64,
    pub cfl: f64,
    /// Lower and upper bounds for the jacobian `1 + eps h`.
    pub h_star: f64,
    pub h_sup: f64,
    /// Minimum admissible `rho'`.
    pub c_star: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub s_diag: u32,
    pub k_diag: u32,
    /// H^s norm above which a state counts as blown up.
    pub norm_ceiling: f64,
    pub pressure_tol: f64,
    pub pressure_max_iter: usize,
    pub tol_compat: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            mu: 1.0,
            delta: 0.0,
            dt: 1e-3,
            t_end: 1.0,
            cfl: 0.4,
            h_star: 0.1,
            h_sup: 10.0,
            c_star: 1e-3,
            rho_min: 1e-3,
            rho_max: 1e3,
            s_diag: 3,
            k_diag: 3,
            norm_ceiling: 1e8,
            pressure_tol: 1e-10,
            pressure_max_iter: 500,
            tol_compat: 1e-8,
        }
    }
}

fn bad(key: &str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        key: key.into(),
        reason: reason.into(),
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(bad("epsilon", "must lie in [0, 1]"));
        }
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return Err(bad("mu", "must lie in (0, 1]"));
        }
        if !(self.delta >= 0.0) {
            return Err(bad("delta", "must be >= 0"));
        }
        if !(self.dt.is_finite() && self.dt != 0.0) {
            return Err(bad("dt", "must be finite and nonzero"));
        }
        if !(self.cfl > 0.0) {
            return Err(bad("cfl", "must be > 0"));
        }
        if !(self.h_star > 0.0 && self.h_star <= self.h_sup) {
            return Err(bad("h_star", "need 0 < h_star <= h_sup"));
        }
        if !(self.c_star > 0.0) {
            return Err(bad("c_star", "must be > 0"));
        }
        if !(self.rho_min > 0.0 && self.rho_min < self.rho_max) {
            return Err(bad("rho_min", "need 0 < rho_min < rho_max"));
        }
        if self.s_diag < 2 {
            return Err(bad("s_diag", "must be >= 2"));
        }
        if self.k_diag > self.s_diag {
            return Err(bad("k_diag", "must not exceed s_diag"));
        }
        if !(self.pressure_tol > 0.0) || self.pressure_max_iter == 0 {
            return Err(bad(
                "pressure.tol",
                "tolerance and iteration cap must be positive",
            ));
        }
        Ok(())
    }

    /// Non-fatal remarks about the smallness hypotheses of the theory.
    pub fn warnings(&self, max_shear: f64, d: usize) -> Vec<String> {
        let mut out = Vec::new();
        let root = self.mu.sqrt();
        if self.epsilon > root {
            out.push(format!(
                "epsilon = {} exceeds sqrt(mu) = {root:.4}; the existence time is not controlled",
                self.epsilon
            ));
        }
        if max_shear > root {
            out.push(format!(
                "sup |V'| = {max_shear:.4} exceeds sqrt(mu) = {root:.4}; shear smallness fails"
            ));
        }
        let s_needed = d as f64 / 2.0 + 2.5;
        if (self.s_diag as f64) < s_needed {
            out.push(format!(
                "s_diag = {} is below d/2 + 5/2 = {s_needed}; energy is diagnostic only",
                self.s_diag
            ));
        }
        out
    }
}
