//! Vertical differences and the isopycnal differential operators.
//!
//! Two vertical differences live here. `dr` is second order everywhere,
//! with one-sided stencils on the boundary rows, and backs the public
//! operators and the diagnostics. `dr_sbp` is central inside and first
//! order on the boundary rows; it is the summation-by-parts partner of the
//! trapezoid rule and backs the pressure operator and the dynamics.

use crate::domain::{Field, Grid};
use crate::error::{Error, Result};
use crate::spectral::SpectralWorkspace;

/// Second-order vertical derivative with one-sided boundary stencils.
pub fn dr(grid: &Grid, f: &[f64]) -> Field {
    let (m, n) = (grid.plane(), grid.nr);
    let inv = 1.0 / grid.dr();
    let mut out = vec![0.0; f.len()];
    for j in 0..m {
        let at = |k: usize| f[k * m + j];
        out[j] = (-3.0 * at(0) + 4.0 * at(1) - at(2)) * 0.5 * inv;
        for k in 1..n - 1 {
            out[k * m + j] = (at(k + 1) - at(k - 1)) * 0.5 * inv;
        }
        out[(n - 1) * m + j] = (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) * 0.5 * inv;
    }
    out
}

/// Summation-by-parts vertical difference: central inside, first order at the ends.
///
/// With trapezoid weights `H`, `H D + (H D)^T = diag(-1, 0, ..., 0, 1)`.
pub fn dr_sbp(grid: &Grid, f: &[f64]) -> Field {
    let (m, n) = (grid.plane(), grid.nr);
    let inv = 1.0 / grid.dr();
    let mut out = vec![0.0; f.len()];
    for j in 0..m {
        let at = |k: usize| f[k * m + j];
        out[j] = (at(1) - at(0)) * inv;
        for k in 1..n - 1 {
            out[k * m + j] = (at(k + 1) - at(k - 1)) * 0.5 * inv;
        }
        out[(n - 1) * m + j] = (at(n - 1) - at(n - 2)) * inv;
    }
    out
}

/// `F(r) = int_0^r f dr'` by the cumulative trapezoid rule.
pub fn cumulative_trapezoid(grid: &Grid, f: &[f64]) -> Field {
    let (m, n) = (grid.plane(), grid.nr);
    let h = grid.dr();
    let mut out = vec![0.0; f.len()];
    for k in 1..n {
        for j in 0..m {
            out[k * m + j] = out[(k - 1) * m + j] + 0.5 * h * (f[(k - 1) * m + j] + f[k * m + j]);
        }
    }
    out
}

/// Geometry of the coordinate map `(x, r) -> (x, -r + eps eta)`.
///
/// Built once per stage from a snapshot of `eta`.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub eps: f64,
    pub eta: Field,
    /// `h = -dr eta` and `J = 1 + eps h` with the second-order difference.
    pub h: Field,
    pub jac: Field,
    /// The same with the summation-by-parts difference.
    pub h_sbp: Field,
    pub jac_sbp: Field,
    pub grad_eta: Vec<Field>,
}

impl Geometry {
    /// Fails with `JacobianDegenerate` when `min J < h_star`.
    pub fn new(ws: &SpectralWorkspace, eta: &[f64], eps: f64, h_star: f64) -> Result<Self> {
        let geo = Self::unchecked(ws, eta, eps);
        let min = geo.min_jacobian().min(crate::sum::min(&geo.jac_sbp));
        if !(min >= h_star) {
            return Err(Error::JacobianDegenerate {
                min_jacobian: min,
                h_star,
            });
        }
        Ok(geo)
    }

    /// Builds the geometry without the admissibility check.
    pub fn unchecked(ws: &SpectralWorkspace, eta: &[f64], eps: f64) -> Self {
        let grid = ws.grid();
        let h: Field = dr(grid, eta).into_iter().map(|v| -v).collect();
        let h_sbp: Field = dr_sbp(grid, eta).into_iter().map(|v| -v).collect();
        let jac = h.iter().map(|v| 1.0 + eps * v).collect();
        let jac_sbp = h_sbp.iter().map(|v| 1.0 + eps * v).collect();
        Self {
            eps,
            eta: eta.to_vec(),
            h,
            jac,
            h_sbp,
            jac_sbp,
            grad_eta: ws.grad_x(eta),
        }
    }

    pub fn flat(grid: &Grid, eps: f64) -> Self {
        Self {
            eps,
            eta: grid.zeros(),
            h: grid.zeros(),
            jac: vec![1.0; grid.len()],
            h_sbp: grid.zeros(),
            jac_sbp: vec![1.0; grid.len()],
            grad_eta: vec![grid.zeros(); grid.d],
        }
    }

    pub fn min_jacobian(&self) -> f64 {
        crate::sum::min(&self.jac)
    }
}

/// `grad^phi_x f = grad_x f + eps (grad_x eta / J) dr f`, products dealiased.
pub fn grad_phi_x(ws: &SpectralWorkspace, geo: &Geometry, f: &[f64]) -> Vec<Field> {
    let mut g = ws.grad_x(f);
    if geo.eps == 0.0 {
        return g;
    }
    let df = dr(ws.grid(), f);
    for (a, ga) in g.iter_mut().enumerate() {
        let slope: Field = geo.grad_eta[a]
            .iter()
            .zip(&geo.jac)
            .map(|(e, j)| geo.eps * e / j)
            .collect();
        let corr = ws.product(&slope, &df);
        ga.iter_mut().zip(corr).for_each(|(o, c)| *o += c);
    }
    g
}

/// `d^phi_r f = -dr f / J`.
pub fn dr_phi(ws: &SpectralWorkspace, geo: &Geometry, f: &[f64]) -> Field {
    dr(ws.grid(), f)
        .iter()
        .zip(&geo.jac)
        .map(|(d, j)| -d / j)
        .collect()
}

/// `sqrt(mu) grad^phi_x . V + d^phi_r w`.
pub fn div_phi_mu(
    ws: &SpectralWorkspace,
    geo: &Geometry,
    v: &[Field],
    w: &[f64],
    mu: f64,
) -> Field {
    let root = mu.sqrt();
    let mut out = dr_phi(ws, geo, w);
    for (a, va) in v.iter().enumerate() {
        let g = grad_phi_x(ws, geo, va);
        out.iter_mut().zip(&g[a]).for_each(|(o, x)| *o += root * x);
    }
    out
}

/// Anisotropic Sobolev norm `sum_{l<=k} |Lambda^(s-l) dr^l f|_{L^2}`.
pub fn sobolev_norm(ws: &SpectralWorkspace, f: &[f64], s: f64, k: u32) -> f64 {
    let grid = ws.grid();
    let mut total = 0.0;
    let mut d = f.to_vec();
    for l in 0..=k {
        if l > 0 {
            d = dr(grid, &d);
        }
        total += grid.norm(&ws.lambda_pow(&d, s - l as f64));
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn dr_of_square_is_exact() {
        // second-order stencils differentiate quadratics exactly
        let g = Grid::line(8, 17).unwrap();
        let f = g.sample(|_, r| r * r);
        let e = g.sample(|_, r| 2.0 * r);
        assert!(max_diff(&dr(&g, &f), &e) < 1e-12);
    }

    #[test]
    fn dr_converges_at_second_order() {
        let err = |nr| {
            let g = Grid::line(8, nr).unwrap();
            let f = g.sample(|_, r| (2.0 * r).sin());
            let e = g.sample(|_, r| 2.0 * (2.0 * r).cos());
            max_diff(&dr(&g, &f), &e)
        };
        let slope = (err(33) / err(65)).log2();
        assert!((slope - 2.0).abs() < 0.1, "{slope}");
    }

    #[test]
    fn sbp_property() {
        let g = Grid::line(8, 9).unwrap();
        let u = g.sample(|x, r| (x[0] + 3.0 * r).sin());
        let v = g.sample(|x, r| (r * r + x[0]).cos());
        let lhs = g.inner(&u, &dr_sbp(&g, &v)) + g.inner(&dr_sbp(&g, &u), &v);
        let m = g.plane();
        let n = g.len();
        let bnd: f64 = (0..m)
            .map(|j| u[n - m + j] * v[n - m + j] - u[j] * v[j])
            .sum::<f64>()
            * g.cell_area();
        assert!((lhs - bnd).abs() < 1e-12);
    }

    #[test]
    fn flat_reduction() {
        let g = Grid::line(16, 9).unwrap();
        let ws = SpectralWorkspace::new(&g);
        let geo = Geometry::flat(&g, 0.3);
        let f = g.sample(|x, r| x[0].sin() * r.cos());
        assert!(max_diff(&grad_phi_x(&ws, &geo, &f)[0], &ws.dx(&f, 0)) < 1e-15);
        let m: Field = dr(&g, &f).iter().map(|v| -v).collect();
        assert!(max_diff(&dr_phi(&ws, &geo, &f), &m) < 1e-15);
    }

    #[test]
    fn dr_phi_of_r_is_inverse_jacobian() {
        let g = Grid::line(16, 17).unwrap();
        let ws = SpectralWorkspace::new(&g);
        let eta = g.sample(|x, r| 0.5 * x[0].sin() * r * (1.0 - r));
        let geo = Geometry::new(&ws, &eta, 0.2, 0.1).unwrap();
        let f = g.sample(|_, r| r);
        let e: Field = geo.jac.iter().map(|j| -1.0 / j).collect();
        assert!(max_diff(&dr_phi(&ws, &geo, &f), &e) < 1e-13);
    }

    #[test]
    fn divergence_at_flat_geometry() {
        let g = Grid::line(32, 33).unwrap();
        let ws = SpectralWorkspace::new(&g);
        let geo = Geometry::flat(&g, 0.1);
        let v = vec![g.sample(|x, _| x[0].sin())];
        let w = g.sample(|x, r| (r - r * r) * x[0].cos());
        let e = g.sample(|x, r| x[0].cos() - (1.0 - 2.0 * r) * x[0].cos());
        assert!(max_diff(&div_phi_mu(&ws, &geo, &v, &w, 1.0), &e) < 1e-12);
    }

    #[test]
    fn sobolev_norm_of_sine() {
        let g = Grid::line(32, 9).unwrap();
        let ws = SpectralWorkspace::new(&g);
        let f = g.sample(|x, _| x[0].sin());
        assert!((sobolev_norm(&ws, &f, 1.0, 0) - (2.0 * PI).sqrt()).abs() < 1e-12);
        assert_eq!(sobolev_norm(&ws, &g.zeros(), 2.0, 2), 0.0);
    }

    #[test]
    fn degenerate_geometry_is_refused() {
        let g = Grid::line(16, 17).unwrap();
        let ws = SpectralWorkspace::new(&g);
        let eta = g.sample(|_, r| 4.0 * r * (1.0 - r));
        assert!(matches!(
            Geometry::new(&ws, &eta, 0.5, 0.1),
            Err(Error::JacobianDegenerate { .. })
        ));
    }
}
