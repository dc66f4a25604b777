use super::grid::{Field, Grid};
use crate::error::{Error, Result};

/// Perturbation unknowns `(V, w, eta)` at time `t`.
///
/// `h = -d_r eta` is not stored; geometry is rebuilt from `eta` whenever it
/// is needed, so it can never be stale.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub t: f64,
    /// One field per horizontal component.
    pub v: Vec<Field>,
    pub w: Field,
    pub eta: Field,
}

impl FlowState {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            t: 0.0,
            v: vec![grid.zeros(); grid.d],
            w: grid.zeros(),
            eta: grid.zeros(),
        }
    }

    /// Checks shapes, finiteness and the boundary conditions on `w` and `eta`.
    pub fn check(&self, grid: &Grid) -> Result<()> {
        let n = grid.len();
        if self.v.len() != grid.d
            || self.v.iter().any(|f| f.len() != n)
            || self.w.len() != n
            || self.eta.len() != n
        {
            return Err(Error::InvalidGrid(
                "state shape does not match the grid".into(),
            ));
        }
        if !self.is_finite() {
            return Err(Error::BlownUp {
                t: self.t,
                reason: "non-finite field".into(),
            });
        }
        let bw = grid.boundary_max(&self.w);
        let be = grid.boundary_max(&self.eta);
        if bw != 0.0 || be != 0.0 {
            return Err(Error::InvalidParameter {
                key: "state".into(),
                reason: format!("w and eta must vanish at r = 0, 1 (found {bw:.3e}, {be:.3e})"),
            });
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.fields().all(|f| f.iter().all(|v| v.is_finite()))
    }

    pub fn fields(&self) -> impl Iterator<Item = &Field> {
        self.v
            .iter()
            .chain(std::iter::once(&self.w))
            .chain(std::iter::once(&self.eta))
    }

    pub fn fields_mut(&mut self) -> impl Iterator<Item = &mut Field> {
        self.v
            .iter_mut()
            .chain(std::iter::once(&mut self.w))
            .chain(std::iter::once(&mut self.eta))
    }

    pub fn max_abs(&self) -> f64 {
        self.fields()
            .map(|f| super::grid::max_abs(f))
            .fold(0.0, f64::max)
    }

    /// Sets the boundary rows of `w` and `eta` to zero.
    pub fn impose_boundary(&mut self, grid: &Grid) {
        grid.zero_boundary_rows(&mut self.w);
        grid.zero_boundary_rows(&mut self.eta);
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        let mut out = self.clone();
        out.fields_mut()
            .for_each(|f| f.iter_mut().for_each(|v| *v *= lambda));
        out
    }

    /// `self + a * other`, keeping `self.t`.
    pub fn axpy(&self, a: f64, other: &Self) -> Self {
        let mut out = self.clone();
        for (f, g) in out.fields_mut().zip(other.fields()) {
            f.iter_mut().zip(g).for_each(|(x, y)| *x += a * y);
        }
        out
    }
}
