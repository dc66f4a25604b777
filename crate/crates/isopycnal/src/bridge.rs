//! Change of variables between isopycnal fields on `r in [0, 1]` and
//! Eulerian fields on `z in [-1, 0]`.
//!
//! Columns are mapped independently. The isopycnal level `r` sits at height
//! `z = -r + eps eta`; below, `s = -z` is used as the ascending abscissa so
//! both directions work with increasing interpolation nodes.

use rayon::prelude::*;

use crate::domain::{Field, FlowState, Grid, SimParams, StratificationProfile};
use crate::error::{Error, Result};
use crate::interp::MonotoneCubic;

/// Below this `eps` the `1/eps` differences are replaced by their Taylor terms.
pub const TAYLOR_EPS: f64 = 1e-6;

/// Eulerian perturbation fields on a uniform `z` grid.
///
/// `grid.nr` counts the `z` nodes, `z_i = -i / (nz - 1)`, and the storage
/// layout is the isopycnal one with `z` in place of `r`. The velocities are
/// perturbations (total `Vbar(-z) + eps v`, `eps w`); `rho` is the total
/// density and `rho_pert` its perturbation `(rho - rho_eq) / eps`, kept so
/// that the map stays invertible as `eps -> 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct EulerianState {
    pub grid: Grid,
    pub eps: f64,
    pub t: f64,
    pub v: Vec<Field>,
    pub w: Field,
    pub rho: Field,
    pub rho_pert: Field,
}

impl EulerianState {
    pub fn z(&self, i: usize) -> f64 {
        -self.grid.r(i)
    }
}

/// `z(x, r) = -r + eps eta` at every grid point.
///
/// Fails when the column is not strictly decreasing with a cell jacobian
/// of at least `h_star`.
pub fn eta_to_z(grid: &Grid, state: &FlowState, params: &SimParams) -> Result<Field> {
    let eps = params.epsilon;
    let z: Field = state.eta.iter().enumerate().map(|(i, e)| -grid.r(i / grid.plane()) + eps * e).collect();
    let m = grid.plane();
    let mut worst = f64::INFINITY;
    for k in 0..grid.nr - 1 {
        for j in 0..m {
            worst = worst.min((z[k * m + j] - z[(k + 1) * m + j]) / grid.dr());
        }
    }
    if !(worst >= params.h_star) {
        return Err(Error::JacobianDegenerate { min_jacobian: worst, h_star: params.h_star });
    }
    Ok(z)
}

/// `(Vbar(s) - Vbar(r)) / eps`, or `-eta Vbar'(r)` for tiny `eps`.
fn shear_shift(profile: &StratificationProfile, c: usize, r: f64, s: f64, eta: f64, eps: f64) -> f64 {
    if eps < TAYLOR_EPS {
        -eta * profile.vbar_prime_at(c, r)
    } else {
        (profile.vbar_at(c, s) - profile.vbar_at(c, r)) / eps
    }
}

fn spline(x: &[f64], y: Vec<f64>) -> Result<MonotoneCubic> {
    MonotoneCubic::new(x.to_vec(), y)
}

/// Interpolates an isopycnal state onto `nz` uniform Eulerian levels.
///
/// Density comes from `rho(x, z(x, r)) = rho_label(r)`; the horizontal
/// velocity is shifted so that `Vbar_eul + eps v_eul` equals `Vbar + eps V`
/// at the same material point.
pub fn to_eulerian(
    grid: &Grid,
    state: &FlowState,
    profile: &StratificationProfile,
    params: &SimParams,
    nz: usize,
) -> Result<EulerianState> {
    let eps = params.epsilon;
    let z = eta_to_z(grid, state, params)?;
    let egrid = Grid::new(grid.d, grid.nx, grid.length, nz)?;
    let (m, nr, d) = (grid.plane(), grid.nr, grid.d);
    let targets: Vec<f64> = (0..nz).map(|i| egrid.r(i)).collect();

    // per column: v components, w, rho, rho_pert on the z nodes
    let columns: Vec<Vec<Vec<f64>>> = (0..m)
        .into_par_iter()
        .map(|j| -> Result<Vec<Vec<f64>>> {
            let s: Vec<f64> = (0..nr).map(|k| -z[k * m + j]).collect();
            let rs: Vec<f64> = (0..nr).map(|k| grid.r(k)).collect();
            let level = spline(&s, rs)?;
            let eta = spline(&s, grid.column(&state.eta, j))?;
            let w = spline(&s, grid.column(&state.w, j))?;
            let vs = (0..d).map(|c| spline(&s, grid.column(&state.v[c], j))).collect::<Result<Vec<_>>>()?;
            let mut out = vec![vec![0.0; nz]; d + 3];
            for (i, &si) in targets.iter().enumerate() {
                let r = level.eval(si)?;
                let e = eta.eval(si)?;
                for c in 0..d {
                    out[c][i] = vs[c].eval(si)? - shear_shift(profile, c, r, si, e, eps);
                }
                out[d][i] = w.eval(si)?;
                let rho = profile.label_density_at(r);
                out[d + 1][i] = rho;
                out[d + 2][i] = if eps < TAYLOR_EPS {
                    profile.label_density_prime_at(si) * e
                } else {
                    (rho - profile.label_density_at(si)) / eps
                };
            }
            out[d][0] = 0.0;
            out[d][nz - 1] = 0.0;
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut fields = vec![egrid.zeros(); d + 3];
    for (j, col) in columns.iter().enumerate() {
        for (f, c) in fields.iter_mut().zip(col) {
            egrid.set_column(f, j, c);
        }
    }
    let rho_pert = fields.pop().unwrap();
    let rho = fields.pop().unwrap();
    let w = fields.pop().unwrap();
    Ok(EulerianState { grid: egrid, eps, t: state.t, v: fields, w, rho, rho_pert })
}

/// Root of the increasing monotone cubic `f(s) = target`, by bisection with
/// Newton polish, to `tol` in `s`.
fn level_of(f: &MonotoneCubic, target: f64, tol: f64, column: usize) -> Result<f64> {
    let (xs, ys) = (f.nodes(), f.values());
    let n = xs.len();
    let fail = || Error::RootFindFailure { column, target };
    let slack = 1e-12 * (ys[n - 1] - ys[0]).abs();
    if target <= ys[0] {
        return if target >= ys[0] - slack { Ok(xs[0]) } else { Err(fail()) };
    }
    if target >= ys[n - 1] {
        return if target <= ys[n - 1] + slack { Ok(xs[n - 1]) } else { Err(fail()) };
    }
    // nearest enclosing node pair
    let i = ys.partition_point(|&v| v <= target) - 1;
    let (mut a, mut b) = (xs[i], xs[i + 1]);
    if ys[i] == target {
        return Ok(a);
    }
    let mut x = 0.5 * (a + b);
    for _ in 0..200 {
        let g = f.eval(x)? - target;
        if g == 0.0 {
            return Ok(x);
        }
        if g < 0.0 {
            a = x;
        } else {
            b = x;
        }
        let slope = f.deriv(x)?;
        let newton = x - g / slope;
        let next = if slope > 0.0 && newton > a && newton < b { newton } else { 0.5 * (a + b) };
        let step = (next - x).abs();
        x = next;
        if step <= tol || b - a <= tol {
            return Ok(x);
        }
    }
    Err(fail())
}

/// Inverts [`to_eulerian`]: finds the height of every isopycnal level by
/// root finding in the density column, then reads the velocities there.
pub fn from_eulerian(
    eul: &EulerianState,
    profile: &StratificationProfile,
    params: &SimParams,
    grid: &Grid,
) -> Result<FlowState> {
    let eg = &eul.grid;
    if eg.d != grid.d || eg.nx != grid.nx || eg.length != grid.length {
        return Err(Error::InvalidGrid("Eulerian and isopycnal horizontal grids differ".into()));
    }
    let eps = params.epsilon;
    let (m, nz, nr, d) = (grid.plane(), eg.nr, grid.nr, grid.d);
    let s: Vec<f64> = (0..nz).map(|i| eg.r(i)).collect();

    let columns: Vec<Vec<Vec<f64>>> = (0..m)
        .into_par_iter()
        .map(|j| -> Result<Vec<Vec<f64>>> {
            let rho = eg.column(&eul.rho, j);
            if let Some(i) = (0..nz - 1).find(|&i| !(rho[i + 1] > rho[i])) {
                return Err(Error::MonotonicityViolation { column: j, z: -s[i] });
            }
            let density = spline(&s, rho)?;
            let pert = spline(&s, eg.column(&eul.rho_pert, j))?;
            let w = spline(&s, eg.column(&eul.w, j))?;
            let vs = (0..d).map(|c| spline(&s, eg.column(&eul.v[c], j))).collect::<Result<Vec<_>>>()?;
            let mut out = vec![vec![0.0; nr]; d + 2];
            for k in 1..nr - 1 {
                let r = grid.r(k);
                let (sk, eta) = if eps < TAYLOR_EPS {
                    let eta = pert.eval(r)? / profile.label_density_prime_at(r);
                    (r - eps * eta, eta)
                } else {
                    let sk = level_of(&density, profile.label_density_at(r), 1e-12, j)?;
                    (sk, (r - sk) / eps)
                };
                for c in 0..d {
                    out[c][k] = vs[c].eval(sk)? + shear_shift(profile, c, r, sk, eta, eps);
                }
                out[d][k] = w.eval(sk)?;
                out[d + 1][k] = eta;
            }
            // the end levels are the lid and the bottom
            for (k, sk) in [(0, 0.0), (nr - 1, 1.0)] {
                for c in 0..d {
                    out[c][k] = vs[c].eval(sk)?;
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut state = FlowState::zeros(grid);
    state.t = eul.t;
    for (j, col) in columns.iter().enumerate() {
        for c in 0..d {
            grid.set_column(&mut state.v[c], j, &col[c]);
        }
        grid.set_column(&mut state.w, j, &col[d]);
        grid.set_column(&mut state.eta, j, &col[d + 1]);
    }
    Ok(state)
}
