//! The anisotropic Neumann problem for the pressure, the hydrostatic split
//! and the Leray projector.
//!
//! The discrete operator is
//!
//! ```text
//! L P = div_x(J mu rho^-1 Gx P) + D mask(eps mu grad eta . rho^-1 Gx P - rho^-1 Gr P)
//! Gx P = grad_x P + eps (grad eta / J) D P,     Gr P = -D P / J
//! ```
//!
//! with `D` the summation-by-parts difference and `mask` zeroing the two
//! boundary rows, where the flux is prescribed instead. `-L` is symmetric
//! and positive semi-definite in the trapezoid inner product, so conjugate
//! gradients apply. Its kernel holds, for every horizontal mode with zero
//! effective wavenumber, one constant on the even rows and one on the odd rows.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::calculus::{self, cumulative_trapezoid, dr_sbp, Geometry};
use crate::domain::{Field, FlowState, Grid, SimParams, StratificationProfile};
use crate::error::{Error, Result};
use crate::spectral::SpectralWorkspace;
use crate::sum::pairwise_sum_by;

/// How the data of an elliptic problem were supplied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhsForm {
    /// The load is the discrete divergence of a flux; compatible by construction.
    Divergence,
    /// Interior right-hand side plus Neumann data, as written pointwise.
    Pointwise,
}

/// Data of one pressure solve.
#[derive(Debug, Clone)]
pub struct EllipticProblem {
    pub geometry: Geometry,
    /// `1 / rho` per level.
    pub inv_rho: Vec<f64>,
    pub mu: f64,
    /// Interior right-hand side `f` of `div_mu(rho^-1 grad_mu P) = f`.
    pub rhs_interior: Field,
    /// Values of `rho^-1 d^phi_r P` on `r = 0` and `r = 1`.
    pub neumann_top: Vec<f64>,
    pub neumann_bottom: Vec<f64>,
    pub form: RhsForm,
    /// Relative compatibility defect of the load.
    pub compat_defect: f64,
    load: Field,
    load_scale: f64,
}

impl EllipticProblem {
    /// Problem with pointwise data; the load is `J f + D(g on the boundary rows)`.
    #[allow(clippy::too_many_arguments)]
    pub fn pointwise(
        ws: &SpectralWorkspace,
        geometry: Geometry,
        inv_rho: Vec<f64>,
        mu: f64,
        rhs_interior: Field,
        neumann_top: Vec<f64>,
        neumann_bottom: Vec<f64>,
    ) -> Self {
        let grid = ws.grid();
        let (m, n) = (grid.plane(), grid.len());
        let mut bnd = grid.zeros();
        bnd[..m].copy_from_slice(&neumann_top);
        bnd[n - m..].copy_from_slice(&neumann_bottom);
        let flux = dr_sbp(grid, &bnd);
        let load: Field = rhs_interior
            .iter()
            .zip(&geometry.jac_sbp)
            .zip(&flux)
            .map(|((f, j), q)| j * f + q)
            .collect();
        let nulls = NullSpace::new(ws);
        let compat_defect = nulls.defect(grid, &load, 0.0);
        Self {
            geometry,
            inv_rho,
            mu,
            rhs_interior,
            neumann_top,
            neumann_bottom,
            form: RhsForm::Pointwise,
            compat_defect,
            load,
            load_scale: 0.0,
        }
    }

    /// Problem whose load `L P = load` is given directly in divergence form;
    /// `load_scale` is the size of the fluxes it came from.
    pub fn divergence(
        ws: &SpectralWorkspace,
        geometry: Geometry,
        inv_rho: Vec<f64>,
        mu: f64,
        load: Field,
        load_scale: f64,
    ) -> Self {
        let grid = ws.grid();
        let m = grid.plane();
        let rhs_interior = load
            .iter()
            .zip(&geometry.jac_sbp)
            .map(|(l, j)| l / j)
            .collect();
        let compat_defect = NullSpace::new(ws).defect(grid, &load, load_scale);
        Self {
            geometry,
            inv_rho,
            mu,
            rhs_interior,
            neumann_top: vec![0.0; m],
            neumann_bottom: vec![0.0; m],
            form: RhsForm::Divergence,
            compat_defect,
            load,
            load_scale,
        }
    }

    pub fn load(&self) -> &[f64] {
        &self.load
    }
}

/// Solution of a pressure problem with cached gradients.
#[derive(Debug, Clone)]
pub struct PressureField {
    /// Pressure with zero `J`-weighted mean.
    pub p: Field,
    /// `Gx P` and `Gr P`.
    pub grad_x: Vec<Field>,
    pub grad_r: Field,
    /// `(sqrt(mu) Gx P, Gr P)`.
    pub grad_mu_x: Vec<Field>,
    /// Final relative residual of the linear solve.
    pub residual_norm: f64,
    pub iterations: usize,
}

/// Kernel of `L`.
///
/// Every kernel vector is a horizontal pattern (a mode with zero effective
/// wavenumber, which is `+-1` at every point) repeated on the rows of one
/// parity. Products with it reduce to per-level sums.
#[derive(Debug, Clone)]
pub struct NullSpace {
    grid: Grid,
    patterns: Vec<Vec<f64>>,
    weights: Vec<f64>,
    /// Trapezoid weight summed over the rows of each parity.
    parity_weight: [f64; 2],
}

impl NullSpace {
    pub fn new(ws: &SpectralWorkspace) -> Self {
        let grid = *ws.grid();
        let m = grid.plane();
        let mut patterns = Vec::new();
        for j in 0..m {
            let k = ws.derivative_wavevector(j);
            if k[0] != 0.0 || k[1] != 0.0 {
                continue;
            }
            let idx = ws.mode_index(j);
            patterns.push(
                (0..m)
                    .map(|q| {
                        let (a, b) = if grid.d == 1 {
                            (q, 0)
                        } else {
                            (q / grid.nx, q % grid.nx)
                        };
                        let flip = (idx[0] != 0 && a % 2 == 1) != (idx[1] != 0 && b % 2 == 1);
                        if flip {
                            -1.0
                        } else {
                            1.0
                        }
                    })
                    .collect(),
            );
        }
        let w = grid.trapezoid();
        let mut parity_weight = [0.0; 2];
        for (k, wk) in w.iter().enumerate() {
            parity_weight[k % 2] += wk;
        }
        Self { grid, patterns, weights: w, parity_weight }
    }

    /// The kernel vectors as fields.
    pub fn vectors(&self) -> Vec<Field> {
        let m = self.grid.plane();
        let mut out = Vec::new();
        for p in &self.patterns {
            for parity in 0..2 {
                let mut f = self.grid.zeros();
                for k in (parity..self.grid.nr).step_by(2) {
                    f[k * m..(k + 1) * m].copy_from_slice(p);
                }
                out.push(f);
            }
        }
        out
    }

    /// `<f, v>` for every kernel vector, ordered as in [`Self::vectors`],
    /// without the common cell-area factor.
    fn products(&self, f: &[f64], abs: bool) -> Vec<f64> {
        let m = self.grid.plane();
        let mut out = vec![0.0; 2 * self.patterns.len()];
        for (k, level) in f.chunks(m).enumerate() {
            let wk = self.weights[k];
            if abs {
                let s = wk * pairwise_sum_by(m, &|j| level[j].abs());
                for q in 0..self.patterns.len() {
                    out[2 * q + k % 2] += s;
                }
            } else {
                for (q, p) in self.patterns.iter().enumerate() {
                    out[2 * q + k % 2] += wk * pairwise_sum_by(m, &|j| p[j] * level[j]);
                }
            }
        }
        out
    }

    /// Removes the kernel components, orthogonally in the trapezoid product.
    pub fn project_out(&self, _grid: &Grid, f: &mut [f64]) {
        let m = self.grid.plane();
        let c = self.products(f, false);
        for (q, p) in self.patterns.iter().enumerate() {
            for parity in 0..2 {
                let coef = c[2 * q + parity] / (m as f64 * self.parity_weight[parity]);
                for k in (parity..self.grid.nr).step_by(2) {
                    f[k * m..(k + 1) * m]
                        .iter_mut()
                        .zip(p)
                        .for_each(|(x, y)| *x -= coef * y);
                }
            }
        }
    }

    /// `max_v |<f, v>| / max(<|f|, |v|>, scale <1, |v|>)`; 0 for a zero load.
    ///
    /// `scale` is the size of the terms the load was assembled from. Loads
    /// built as differences of large fluxes cancel down to rounding, and
    /// their defect has to be judged against the fluxes, not against itself.
    pub fn defect(&self, _grid: &Grid, f: &[f64], scale: f64) -> f64 {
        let m = self.grid.plane() as f64;
        let signed = self.products(f, false);
        let gross = self.products(f, true);
        signed
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let g = gross[i].max(scale * m * self.parity_weight[i % 2]);
                if g > 0.0 {
                    s.abs() / g
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Exact inverse of the flat (`eta = 0`) operator, mode by mode.
///
/// The flat operator couples row `k` only to rows `k - 2` and `k + 2`, so
/// each mode splits into an even and an odd tridiagonal system.
#[derive(Debug, Clone)]
struct FlatPreconditioner {
    nr: usize,
    h: f64,
    inv_rho: Vec<f64>,
    mu: f64,
    /// `|k|^2` per mode with Nyquist components dropped.
    kk: Vec<f64>,
}

impl FlatPreconditioner {
    fn new(ws: &SpectralWorkspace, inv_rho: &[f64], mu: f64) -> Self {
        let grid = ws.grid();
        let kk = (0..grid.plane())
            .map(|j| {
                let k = ws.derivative_wavevector(j);
                k[0] * k[0] + k[1] * k[1]
            })
            .collect();
        Self {
            nr: grid.nr,
            h: grid.dr(),
            inv_rho: inv_rho.to_vec(),
            mu,
            kk,
        }
    }

    /// Row `k` of `-L_flat`: coefficients of `P[k-2]`, `P[k]`, `P[k+2]`.
    fn row(&self, k: usize, kk: f64) -> (f64, f64, f64) {
        let n = self.nr - 1;
        let s = &self.inv_rho;
        let h2 = self.h * self.h;
        let horiz = self.mu * kk * s[k];
        if k == 0 {
            let c = s[1] / (2.0 * h2);
            (0.0, horiz + c, -c)
        } else if k == n {
            let c = s[n - 1] / (2.0 * h2);
            (-c, horiz + c, 0.0)
        } else {
            let up = if k < n - 1 { s[k + 1] } else { 0.0 } / (4.0 * h2);
            let down = if k > 1 { s[k - 1] } else { 0.0 } / (4.0 * h2);
            (-down, horiz + up + down, -up)
        }
    }

    /// Solves one parity block in place; `pin` drops the first unknown.
    fn solve_block(&self, col: &mut [Complex64], parity: usize, kk: f64, pin: bool) {
        let rows: Vec<usize> = (parity..self.nr).step_by(2).skip(pin as usize).collect();
        if pin {
            col[parity] = Complex64::new(0.0, 0.0);
        }
        let len = rows.len();
        if len == 0 {
            return;
        }
        let mut c_prime = vec![0.0; len];
        let mut d_prime = vec![Complex64::new(0.0, 0.0); len];
        for (i, &k) in rows.iter().enumerate() {
            let (lo, diag, up) = self.row(k, kk);
            let (lo, denom) = if i == 0 {
                (0.0, diag)
            } else {
                (lo, diag - lo * c_prime[i - 1])
            };
            c_prime[i] = up / denom;
            let prev = if i == 0 {
                Complex64::new(0.0, 0.0)
            } else {
                d_prime[i - 1]
            };
            d_prime[i] = (col[k] - prev * lo) / denom;
        }
        col[rows[len - 1]] = d_prime[len - 1];
        for i in (0..len - 1).rev() {
            col[rows[i]] = d_prime[i] - col[rows[i + 1]] * c_prime[i];
        }
    }

    fn apply(&self, ws: &SpectralWorkspace, r: &[f64]) -> Field {
        let m = ws.grid().plane();
        let spec = ws.forward(r);
        let column = |j: usize| {
            let mut col: Vec<Complex64> = (0..self.nr).map(|k| spec[k * m + j]).collect();
            let degenerate = self.kk[j] == 0.0;
            for parity in 0..2 {
                self.solve_block(&mut col, parity, self.kk[j], degenerate);
            }
            col
        };
        let cols: Vec<Vec<Complex64>> = if spec.len() <= 8192 {
            (0..m).map(column).collect()
        } else {
            (0..m).into_par_iter().with_min_len((64 / self.nr).max(1)).map(column).collect()
        };
        let mut out = vec![Complex64::new(0.0, 0.0); spec.len()];
        for (j, col) in cols.iter().enumerate() {
            for (k, v) in col.iter().enumerate() {
                out[k * m + j] = *v;
            }
        }
        ws.inverse(&out)
    }
}

/// Stopping and acceptance criteria of a pressure solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Relative residual target.
    pub tol: f64,
    pub max_iter: usize,
    /// Largest accepted relative compatibility defect.
    pub tol_compat: f64,
    /// Size of the fluxes the load was built from, see [`NullSpace::defect`].
    pub load_scale: f64,
}

impl SolveOptions {
    pub fn new(tol: f64, max_iter: usize, tol_compat: f64) -> Self {
        Self {
            tol,
            max_iter,
            tol_compat,
            load_scale: 0.0,
        }
    }

    pub fn from_params(params: &SimParams) -> Self {
        Self::new(
            params.pressure_tol,
            params.pressure_max_iter,
            params.tol_compat,
        )
    }

    pub fn with_scale(mut self, load_scale: f64) -> Self {
        self.load_scale = load_scale;
        self
    }
}

/// Magnitude of a load assembled as `div_x(F) + D(q)`.
pub fn flux_scale(grid: &Grid, fluxes: &[Field], q: &[f64]) -> f64 {
    use crate::domain::grid::max_abs;
    let f = fluxes.iter().map(|f| max_abs(f)).fold(max_abs(q), f64::max);
    f * (1.0 / grid.dr() + std::f64::consts::PI * grid.nx as f64 / grid.length)
}

/// Iteration count from which a solve recomputes its residual from scratch.
const TRUE_RESIDUAL_AFTER: usize = 8;

/// The discrete pressure operator on a fixed geometry.
pub struct PressureOperator<'a> {
    ws: &'a SpectralWorkspace,
    geo: &'a Geometry,
    /// `1 / rho` broadcast to every grid point.
    inv_rho: Field,
    mu: f64,
    /// `eps grad eta / J` per component.
    slope: Vec<Field>,
    nulls: NullSpace,
    precond: FlatPreconditioner,
}

impl<'a> PressureOperator<'a> {
    pub fn new(ws: &'a SpectralWorkspace, geo: &'a Geometry, inv_rho: &[f64], mu: f64) -> Self {
        let grid = ws.grid();
        let m = grid.plane();
        let inv_rho_field = (0..grid.len()).map(|i| inv_rho[i / m]).collect();
        let slope = geo
            .grad_eta
            .iter()
            .map(|g| {
                g.iter()
                    .zip(&geo.jac_sbp)
                    .map(|(e, j)| geo.eps * e / j)
                    .collect()
            })
            .collect();
        Self {
            ws,
            geo,
            inv_rho: inv_rho_field,
            mu,
            slope,
            nulls: NullSpace::new(ws),
            precond: FlatPreconditioner::new(ws, inv_rho, mu),
        }
    }

    pub fn null_space(&self) -> &NullSpace {
        &self.nulls
    }

    /// `(Gx P, Gr P)`.
    pub fn gradients(&self, p: &[f64]) -> (Vec<Field>, Field) {
        let grid = self.ws.grid();
        let dp = dr_sbp(grid, p);
        let mut gx = self.ws.grad_x(p);
        for (g, s) in gx.iter_mut().zip(&self.slope) {
            g.iter_mut()
                .zip(s)
                .zip(&dp)
                .for_each(|((o, s), d)| *o += s * d);
        }
        let gr = dp
            .iter()
            .zip(&self.geo.jac_sbp)
            .map(|(d, j)| -d / j)
            .collect();
        (gx, gr)
    }

    /// `L P` given precomputed gradients.
    fn apply_from_gradients(&self, gx: &[Field], gr: &[f64]) -> Field {
        let grid = self.ws.grid();
        let (eps, mu) = (self.geo.eps, self.mu);
        let fluxes: Vec<Field> = gx
            .iter()
            .map(|g| {
                g.iter()
                    .zip(&self.geo.jac_sbp)
                    .zip(&self.inv_rho)
                    .map(|((g, j), s)| j * mu * s * g)
                    .collect()
            })
            .collect();
        let mut out = self.ws.div_x(&fluxes);
        let mut q: Field = gr.iter().zip(&self.inv_rho).map(|(g, s)| -s * g).collect();
        if eps != 0.0 {
            for (a, g) in gx.iter().enumerate() {
                let ge = &self.geo.grad_eta[a];
                for i in 0..q.len() {
                    q[i] += eps * mu * ge[i] * self.inv_rho[i] * g[i];
                }
            }
        }
        grid.zero_boundary_rows(&mut q);
        let dq = dr_sbp(grid, &q);
        out.iter_mut().zip(dq).for_each(|(o, d)| *o += d);
        out
    }

    /// `L P`.
    pub fn apply(&self, p: &[f64]) -> Field {
        let (gx, gr) = self.gradients(p);
        self.apply_from_gradients(&gx, &gr)
    }

    /// The energy form `a(P, Q) = <J rho^-1 (mu Gx P . Gx Q + mask Gr P Gr Q)>`.
    pub fn energy_form(&self, p: &[f64], q: &[f64]) -> f64 {
        let grid = self.ws.grid();
        let (gxp, grp) = self.gradients(p);
        let (gxq, grq) = self.gradients(q);
        let m = grid.plane();
        let n = grid.nr;
        let mut dens = grid.zeros();
        for i in 0..dens.len() {
            let k = i / m;
            let mut v = 0.0;
            for a in 0..gxp.len() {
                v += self.mu * gxp[a][i] * gxq[a][i];
            }
            if k != 0 && k != n - 1 {
                v += grp[i] * grq[i];
            }
            dens[i] = self.geo.jac_sbp[i] * self.inv_rho[i] * v;
        }
        grid.integral(&dens)
    }

    fn neg_apply(&self, p: &[f64]) -> Field {
        self.apply(p).into_iter().map(|v| -v).collect()
    }

    /// Solves `L P = load` by preconditioned conjugate gradients.
    pub fn solve(
        &self,
        load: &[f64],
        opts: &SolveOptions,
        warm: Option<&[f64]>,
    ) -> Result<PressureField> {
        let grid = self.ws.grid();
        let (tol, max_iter) = (opts.tol, opts.max_iter);
        let defect = self.nulls.defect(grid, load, opts.load_scale);
        if defect > opts.tol_compat {
            return Err(Error::CompatibilityDefect {
                defect,
                tolerance: opts.tol_compat,
            });
        }
        let mut b: Field = load.iter().map(|v| -v).collect();
        self.nulls.project_out(grid, &mut b);
        let bnorm = grid.norm(&b);
        if bnorm == 0.0 {
            return Ok(self.finish(grid.zeros(), 0.0, 0));
        }
        let mut x = match warm {
            Some(w) if w.len() == b.len() => {
                let mut x = w.to_vec();
                self.nulls.project_out(grid, &mut x);
                x
            }
            _ => grid.zeros(),
        };
        let ax = self.neg_apply(&x);
        let mut r: Field = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        self.nulls.project_out(grid, &mut r);
        let mut rel = grid.norm(&r) / bnorm;
        let mut iterations = 0;
        if rel > tol {
            let mut z = self.precondition(&r);
            let mut p = z.clone();
            let mut rz = grid.inner(&r, &z);
            while iterations < max_iter {
                iterations += 1;
                let ap = self.neg_apply(&p);
                let pap = grid.inner(&p, &ap);
                if !(pap > 0.0) {
                    break;
                }
                let alpha = rz / pap;
                x.iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
                r.iter_mut().zip(&ap).for_each(|(r, a)| *r -= alpha * a);
                self.nulls.project_out(grid, &mut r);
                rel = grid.norm(&r) / bnorm;
                if rel <= tol {
                    break;
                }
                z = self.precondition(&r);
                let rz_new = grid.inner(&r, &z);
                let beta = rz_new / rz;
                rz = rz_new;
                p.iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
            }
            // long runs let the recursive residual drift; report the true one
            if iterations >= TRUE_RESIDUAL_AFTER {
                let ax = self.neg_apply(&x);
                let mut res: Field = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
                self.nulls.project_out(grid, &mut res);
                rel = grid.norm(&res) / bnorm;
            }
            if !(rel <= tol * 10.0) || !rel.is_finite() {
                return Err(Error::NoConvergence {
                    iterations,
                    residual: rel,
                });
            }
        }
        Ok(self.finish(x, rel, iterations))
    }

    fn precondition(&self, r: &[f64]) -> Field {
        let grid = self.ws.grid();
        let mut z = self.precond.apply(self.ws, r);
        self.nulls.project_out(grid, &mut z);
        z
    }

    fn finish(&self, mut p: Field, residual_norm: f64, iterations: usize) -> PressureField {
        let grid = self.ws.grid();
        self.nulls.project_out(grid, &mut p);
        let mean = grid.inner(&p, &self.geo.jac_sbp) / grid.integral(&self.geo.jac_sbp);
        p.iter_mut().for_each(|v| *v -= mean);
        let (grad_x, grad_r) = self.gradients(&p);
        let root = self.mu.sqrt();
        let grad_mu_x = grad_x
            .iter()
            .map(|g| g.iter().map(|v| root * v).collect())
            .collect();
        PressureField {
            p,
            grad_x,
            grad_r,
            grad_mu_x,
            residual_norm,
            iterations,
        }
    }
}

/// Solves an assembled problem.
pub fn solve_neumann(
    ws: &SpectralWorkspace,
    problem: &EllipticProblem,
    tol: f64,
    max_iter: usize,
    tol_compat: f64,
) -> Result<PressureField> {
    let op = PressureOperator::new(ws, &problem.geometry, &problem.inv_rho, problem.mu);
    let opts = SolveOptions::new(tol, max_iter, tol_compat).with_scale(problem.load_scale);
    op.solve(problem.load(), &opts, None)
}

/// Discrete divergence constraint of the perturbation velocity:
/// `C = div_x(h Vbar + J V) + D(grad eta . (Vbar + eps V) - w)`.
///
/// This is `J / eps` times the isopycnal divergence of the full velocity,
/// written so that the background shear never meets a division by `eps`.
/// Pass `vbar = None` to drop the background.
pub fn constraint(
    ws: &SpectralWorkspace,
    geo: &Geometry,
    vbar: Option<&[Vec<f64>]>,
    v: &[Field],
    w: &[f64],
) -> Field {
    constraint_with_scale(ws, geo, vbar, v, w).0
}

/// [`constraint`] together with its [`flux_scale`].
pub fn constraint_with_scale(
    ws: &SpectralWorkspace,
    geo: &Geometry,
    vbar: Option<&[Vec<f64>]>,
    v: &[Field],
    w: &[f64],
) -> (Field, f64) {
    let grid = ws.grid();
    let m = grid.plane();
    let n = grid.len();
    let background = |a: usize, i: usize| vbar.map_or(0.0, |vb| vb[a][i / m]);
    let fluxes: Vec<Field> = (0..grid.d)
        .map(|a| {
            (0..n)
                .map(|i| geo.h_sbp[i] * background(a, i) + geo.jac_sbp[i] * v[a][i])
                .collect()
        })
        .collect();
    let mut out = ws.div_x(&fluxes);
    let mut q: Field = w.iter().map(|x| -x).collect();
    for a in 0..grid.d {
        for i in 0..n {
            q[i] += geo.grad_eta[a][i] * (background(a, i) + geo.eps * v[a][i]);
        }
    }
    let dq = dr_sbp(grid, &q);
    out.iter_mut().zip(dq).for_each(|(o, d)| *o += d);
    let scale = flux_scale(grid, &fluxes, &q);
    (out, scale)
}

/// `|C / J|` in the trapezoid norm.
pub fn divergence_residual(
    ws: &SpectralWorkspace,
    geo: &Geometry,
    vbar: Option<&[Vec<f64>]>,
    v: &[Field],
    w: &[f64],
) -> f64 {
    let c = constraint(ws, geo, vbar, v, w);
    let scaled: Field = c.iter().zip(&geo.jac_sbp).map(|(c, j)| c / j).collect();
    ws.grid().norm(&scaled)
}

/// Output of the Leray projector.
#[derive(Debug, Clone)]
pub struct Projected {
    pub v: Vec<Field>,
    pub w: Field,
    /// Divergence residual after projection.
    pub div_residual: f64,
    pub potential: PressureField,
}

/// Removes the curved-gradient part of `(V, w)`.
///
/// Solves `L psi = C(V, mask w)` with `rho = 1`, `mu = 1` and returns
/// `V - Gx psi`, `mask(w - Gr psi)`. With `vbar` the background shear is
/// included in the constraint, so the full velocity comes out divergence free.
pub fn leray_project(
    ws: &SpectralWorkspace,
    geo: &Geometry,
    vbar: Option<&[Vec<f64>]>,
    v: &[Field],
    w: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Projected> {
    let grid = ws.grid();
    let mut wm = w.to_vec();
    grid.zero_boundary_rows(&mut wm);
    let (c, scale) = constraint_with_scale(ws, geo, vbar, v, &wm);
    let ones = vec![1.0; grid.nr];
    let op = PressureOperator::new(ws, geo, &ones, 1.0);
    let psi = op.solve(
        &c,
        &SolveOptions::new(tol, max_iter, 1e-8).with_scale(scale),
        None,
    )?;
    let v_out: Vec<Field> = v
        .iter()
        .zip(&psi.grad_x)
        .map(|(v, g)| v.iter().zip(g).map(|(a, b)| a - b).collect())
        .collect();
    let mut w_out: Field = wm.iter().zip(&psi.grad_r).map(|(a, b)| a - b).collect();
    grid.zero_boundary_rows(&mut w_out);
    let div_residual = divergence_residual(ws, geo, vbar, &v_out, &w_out);
    Ok(Projected {
        v: v_out,
        w: w_out,
        div_residual,
        potential: psi,
    })
}

/// Hydrostatic pressure `P_h = int_0^r rho b` and the residual of
/// `rho^-1 d^phi_r P_h + b - eps h b / J = 0`.
pub fn hydrostatic_split(
    ws: &SpectralWorkspace,
    geo: &Geometry,
    profile: &StratificationProfile,
    b: &[f64],
) -> (Field, Field) {
    let grid = ws.grid();
    let m = grid.plane();
    let rb: Field = b
        .iter()
        .enumerate()
        .map(|(i, b)| profile.rho[i / m] * b)
        .collect();
    let ph = cumulative_trapezoid(grid, &rb);
    let dphi = calculus::dr_phi(ws, geo, &ph);
    let res = (0..grid.len())
        .map(|i| dphi[i] / profile.rho[i / m] + b[i] - geo.eps * geo.h[i] / geo.jac[i] * b[i])
        .collect();
    (ph, res)
}

/// Pointwise pressure data of a state:
///
/// ```text
/// f = -mu [eps (grad eta . V')^2 / J^2
///          + 2 sum_j (V'_j / J)(eps grad eta . d^phi_j V - d^phi_j w)
///          + eps sum_ij d^phi_i U_j d^phi_j U_i] - d^phi_r b
/// ```
///
/// with Neumann data `-b`. The `1/eps` of the quadratic term has been
/// cancelled by hand, so `eps = 0` is fine. These data are only compatible
/// up to truncation error; the dynamics use the divergence form instead.
pub fn assemble_pressure_rhs(
    ws: &SpectralWorkspace,
    state: &FlowState,
    profile: &StratificationProfile,
    params: &SimParams,
) -> Result<EllipticProblem> {
    let grid = ws.grid();
    let (m, n, d) = (grid.plane(), grid.len(), grid.d);
    let eps = params.epsilon;
    let geo = Geometry::new(ws, &state.eta, eps, params.h_star)?;
    let b = crate::dynamics::buoyancy(grid, state, profile, params)?;
    // du[i][j] = d^phi_i U_j, with index d standing for r
    let comps: Vec<&Field> = state.v.iter().chain(std::iter::once(&state.w)).collect();
    let du: Vec<Vec<Field>> = {
        let mut t = vec![vec![Vec::new(); d + 1]; d + 1];
        for (j, f) in comps.iter().enumerate() {
            let g = calculus::grad_phi_x(ws, &geo, f);
            for (i, gi) in g.into_iter().enumerate() {
                t[i][j] = gi;
            }
            t[d][j] = calculus::dr_phi(ws, &geo, f);
        }
        t
    };
    let mut quad = grid.zeros();
    for i in 0..=d {
        for j in 0..=d {
            let p = ws.product(&du[i][j], &du[j][i]);
            quad.iter_mut().zip(p).for_each(|(q, p)| *q += p);
        }
    }
    let mut shear_dot = grid.zeros();
    let mut cross = grid.zeros();
    for jj in 0..d {
        let vp: Field = (0..n)
            .map(|i| profile.vbar_prime[jj][i / m] / geo.jac[i])
            .collect();
        for i in 0..n {
            shear_dot[i] += geo.grad_eta[jj][i] * profile.vbar_prime[jj][i / m];
        }
        let mut inner = du[jj][d].iter().map(|v| -v).collect::<Field>();
        for ii in 0..d {
            let p = ws.product(&geo.grad_eta[ii], &du[jj][ii]);
            inner.iter_mut().zip(p).for_each(|(o, p)| *o += eps * p);
        }
        let p = ws.product(&vp, &inner);
        cross.iter_mut().zip(p).for_each(|(c, p)| *c += p);
    }
    let db = calculus::dr_phi(ws, &geo, &b);
    let rhs: Field = (0..n)
        .map(|i| {
            let s = shear_dot[i] / geo.jac[i];
            -params.mu * (eps * s * s + 2.0 * cross[i] + eps * quad[i]) - db[i]
        })
        .collect();
    let top = b[..m].iter().map(|v| -v).collect();
    let bottom = b[n - m..].iter().map(|v| -v).collect();
    let inv_rho = profile.rho.iter().map(|r| 1.0 / r).collect();
    Ok(EllipticProblem::pointwise(
        ws, geo, inv_rho, params.mu, rhs, top, bottom,
    ))
}
