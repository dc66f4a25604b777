//! Buoyancy, the right-hand side of the evolution system and RK4 stepping.
//!
//! The tendencies are
//!
//! ```text
//! dV   = -A(V) - rho^-1 Gx P
//! dw   = -A(w) - mu^-1 (rho^-1 Gr P + b)
//! deta = -A(eta) + w
//! A(f) = J_delta P[(P J_delta U) . grad_x (P J_delta f)],   U = Vbar + eps V
//! ```
//!
//! where `P` is the 2/3-rule truncation. The pressure solves `L P = mu S`
//! with `S` the rate of change of the discrete constraint `C` produced by
//! everything except the pressure, so `C` is conserved exactly in
//! continuous time.

use crate::calculus::{self, cumulative_trapezoid, dr_sbp, Geometry};
use crate::domain::{BuoyancyLaw, Field, FlowState, Grid, SimParams, StratificationProfile};
use crate::error::{Error, Result};
use crate::pressure::{self, PressureField, PressureOperator, SolveOptions};
use crate::spectral::{chi, SpectralWorkspace};

/// How far `r - eps eta` may leave `[0, 1]` before the buoyancy refuses.
pub const DOMAIN_MARGIN: f64 = 0.25;

/// Below this `eps` the buoyancy uses its Taylor expansion.
const TAYLOR_EPS: f64 = 1e-6;

/// `b = (1 - rho(r - eps eta) / rho(r)) / eps`, or `N^2 eta` at `eps = 0`.
pub fn buoyancy(
    grid: &Grid,
    state: &FlowState,
    profile: &StratificationProfile,
    params: &SimParams,
) -> Result<Field> {
    let m = grid.plane();
    let eps = params.epsilon;
    match profile.law {
        BuoyancyLaw::Linear { n2, .. } => Ok(state.eta.iter().map(|e| n2 * e).collect()),
        BuoyancyLaw::Full => {
            let mut out = Vec::with_capacity(grid.len());
            for (i, &e) in state.eta.iter().enumerate() {
                let k = i / m;
                let rho = profile.rho[k];
                if eps < TAYLOR_EPS {
                    let (d1, d2) = (profile.rho_prime[k], profile.rho_second[k]);
                    out.push((d1 * e - 0.5 * eps * e * e * d2) / rho);
                    continue;
                }
                let arg = grid.r(k) - eps * e;
                if !(arg >= -DOMAIN_MARGIN && arg <= 1.0 + DOMAIN_MARGIN) {
                    return Err(Error::DomainEscape { value: arg });
                }
                out.push((1.0 - profile.rho_at(arg) / rho) / eps);
            }
            Ok(out)
        }
    }
}

/// `(b - N^2 eta) / eps`, or its limit `-rho'' eta^2 / (2 rho)` at `eps = 0`.
pub fn buoyancy_remainder(
    grid: &Grid,
    state: &FlowState,
    profile: &StratificationProfile,
    params: &SimParams,
) -> Result<Field> {
    let m = grid.plane();
    let eps = params.epsilon;
    if matches!(profile.law, BuoyancyLaw::Linear { .. }) {
        return Ok(grid.zeros());
    }
    if eps < TAYLOR_EPS {
        return Ok(state
            .eta
            .iter()
            .enumerate()
            .map(|(i, e)| -0.5 * profile.rho_second[i / m] * e * e / profile.rho[i / m])
            .collect());
    }
    let b = buoyancy(grid, state, profile, params)?;
    Ok(b.iter()
        .zip(&state.eta)
        .enumerate()
        .map(|(i, (b, e))| (b - profile.rho_prime[i / m] / profile.rho[i / m] * e) / eps)
        .collect())
}

/// Integrates `d_r w = J grad^phi_x . V + grad eta . Vbar'` from `w(0) = 0`.
///
/// Returns `w` and `max |w(r = 1)|`, which vanishes for compatible `V`.
pub fn reconstruct_w(
    ws: &SpectralWorkspace,
    geo: &Geometry,
    v: &[Field],
    profile: &StratificationProfile,
) -> (Field, f64) {
    let grid = ws.grid();
    let (m, n) = (grid.plane(), grid.len());
    let mut rate = grid.zeros();
    for (a, va) in v.iter().enumerate() {
        let g = calculus::grad_phi_x(ws, geo, va);
        for i in 0..n {
            rate[i] += geo.jac[i] * g[a][i] + geo.grad_eta[a][i] * profile.vbar_prime[a][i / m];
        }
    }
    let w = cumulative_trapezoid(grid, &rate);
    let defect = crate::domain::grid::max_abs(&w[n - m..]);
    (w, defect)
}

/// Projects raw data onto the constraint in the geometry of `eta_raw`.
///
/// The full velocity `Vbar + eps V` is made divergence free, which for the
/// perturbation means projecting with the background shear included.
pub fn prepare_initial_data(
    ws: &SpectralWorkspace,
    profile: &StratificationProfile,
    params: &SimParams,
    v_raw: &[Field],
    w_raw: &[f64],
    eta_raw: &[f64],
) -> Result<FlowState> {
    let grid = ws.grid();
    let scale = crate::domain::grid::max_abs(eta_raw).max(1.0);
    let edge = grid.boundary_max(eta_raw);
    if edge > 1e-12 * scale {
        return Err(Error::InvalidParameter {
            key: "eta".into(),
            reason: format!("initial displacement must vanish at r = 0, 1 (found {edge:.3e})"),
        });
    }
    let mut eta = eta_raw.to_vec();
    grid.zero_boundary_rows(&mut eta);
    let geo = Geometry::new(ws, &eta, params.epsilon, params.h_star)?;
    let out = pressure::leray_project(
        ws,
        &geo,
        Some(&profile.vbar),
        v_raw,
        w_raw,
        params.pressure_tol,
        params.pressure_max_iter,
    )?;
    let mut state = FlowState {
        t: 0.0,
        v: out.v,
        w: out.w,
        eta,
    };
    state.impose_boundary(grid);
    Ok(state)
}

/// Time derivatives of `(V, w, eta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tendency {
    pub dv: Vec<Field>,
    pub dw: Field,
    pub deta: Field,
}

impl Tendency {
    pub fn as_state(&self) -> FlowState {
        FlowState {
            t: 0.0,
            v: self.dv.clone(),
            w: self.dw.clone(),
            eta: self.deta.clone(),
        }
    }
}

/// The semi-discrete model: a workspace, a profile and parameters.
#[derive(Clone, Copy)]
pub struct Model<'a> {
    pub ws: &'a SpectralWorkspace,
    pub profile: &'a StratificationProfile,
    pub params: &'a SimParams,
}

impl<'a> Model<'a> {
    pub fn new(
        ws: &'a SpectralWorkspace,
        profile: &'a StratificationProfile,
        params: &'a SimParams,
    ) -> Self {
        Self {
            ws,
            profile,
            params,
        }
    }

    fn grid(&self) -> &Grid {
        self.ws.grid()
    }

    /// Geometry of a state; a degenerate jacobian is reported as blow-up.
    pub fn geometry(&self, state: &FlowState) -> Result<Geometry> {
        Geometry::new(self.ws, &state.eta, self.params.epsilon, self.params.h_star).map_err(|e| {
            match e {
                Error::JacobianDegenerate {
                    min_jacobian,
                    h_star,
                } => Error::BlownUp {
                    t: state.t,
                    reason: format!(
                        "min(1 + eps h) = {min_jacobian:.4e} below h_star = {h_star:.4e}"
                    ),
                },
                other => other,
            }
        })
    }

    /// Full horizontal velocity `Vbar + eps V` per component.
    fn carrier(&self, state: &FlowState) -> Vec<Field> {
        let grid = self.grid();
        let m = grid.plane();
        let eps = self.params.epsilon;
        (0..grid.d)
            .map(|a| {
                state.v[a]
                    .iter()
                    .enumerate()
                    .map(|(i, v)| self.profile.vbar[a][i / m] + eps * v)
                    .collect()
            })
            .collect()
    }

    /// Filter symbol `chi(delta |k|)` times the 2/3 mask.
    fn filter(&self, j: usize) -> f64 {
        if !self.ws.resolved(j) {
            return 0.0;
        }
        let delta = self.params.delta;
        if delta == 0.0 {
            return 1.0;
        }
        let k = self.ws.wavevector(j);
        chi(delta * (k[0] * k[0] + k[1] * k[1]).sqrt())
    }

    /// Mollified, dealiased horizontal advection `A(f)`.
    fn advect(&self, carrier: &[Field], f: &[f64]) -> Field {
        let ws = self.ws;
        let mut prod = vec![0.0; f.len()];
        for (a, u) in carrier.iter().enumerate() {
            let df = ws.apply(f, |j| {
                num_complex::Complex64::new(0.0, ws.derivative_wavevector(j)[a] * self.filter(j))
            });
            prod.iter_mut()
                .zip(u)
                .zip(df)
                .for_each(|((p, u), d)| *p += u * d);
        }
        ws.apply_real(&prod, |j| self.filter(j))
    }

    /// Tendencies and the pressure that produced them.
    pub fn rhs_with_pressure(
        &self,
        state: &FlowState,
        warm: Option<&[f64]>,
    ) -> Result<(Tendency, PressureField)> {
        let grid = *self.grid();
        let ws = self.ws;
        let (m, n, d) = (grid.plane(), grid.len(), grid.d);
        let (eps, mu) = (self.params.epsilon, self.params.mu);
        if !state.is_finite() {
            return Err(Error::BlownUp {
                t: state.t,
                reason: "non-finite field".into(),
            });
        }
        let geo = self.geometry(state)?;
        let b = buoyancy(&grid, state, self.profile, self.params)?;
        let full = self.carrier(state);
        let carrier: Vec<Field> = full
            .iter()
            .map(|u| ws.apply_real(u, |j| self.filter(j)))
            .collect();

        let nv: Vec<Field> = state
            .v
            .iter()
            .map(|f| self.advect(&carrier, f).into_iter().map(|x| -x).collect())
            .collect();
        let aw = self.advect(&carrier, &state.w);
        let nw: Field = aw.iter().zip(&b).map(|(a, b)| -a - b / mu).collect();
        let ae = self.advect(&carrier, &state.eta);
        let mut deta: Field = ae.iter().zip(&state.w).map(|(a, w)| w - a).collect();
        grid.zero_boundary_rows(&mut deta);

        // S = div_x(dh U + J N_V) + D(grad deta . U + eps grad eta . N_V - mask N_w)
        let dh: Field = dr_sbp(&grid, &deta).into_iter().map(|v| -v).collect();
        let fluxes: Vec<Field> = (0..d)
            .map(|a| {
                (0..n)
                    .map(|i| dh[i] * full[a][i] + geo.jac_sbp[i] * nv[a][i])
                    .collect()
            })
            .collect();
        let mut s = ws.div_x(&fluxes);
        let gde = ws.grad_x(&deta);
        let mut q: Field = nw.iter().map(|x| -x).collect();
        grid.zero_boundary_rows(&mut q);
        for a in 0..d {
            for i in 0..n {
                q[i] += gde[a][i] * full[a][i] + eps * geo.grad_eta[a][i] * nv[a][i];
            }
        }
        let dq = dr_sbp(&grid, &q);
        let scale = mu * pressure::flux_scale(&grid, &fluxes, &q);
        s.iter_mut().zip(dq).for_each(|(s, q)| *s = mu * (*s + q));

        let inv_rho: Vec<f64> = self.profile.rho.iter().map(|r| 1.0 / r).collect();
        let op = PressureOperator::new(ws, &geo, &inv_rho, mu);
        let p = op.solve(
            &s,
            &SolveOptions::from_params(self.params).with_scale(scale),
            warm,
        )?;
        let dv: Vec<Field> = (0..d)
            .map(|a| {
                (0..n)
                    .map(|i| nv[a][i] - inv_rho[i / m] * p.grad_x[a][i])
                    .collect()
            })
            .collect();
        let mut dw: Field = (0..n)
            .map(|i| nw[i] - inv_rho[i / m] * p.grad_r[i] / mu)
            .collect();
        grid.zero_boundary_rows(&mut dw);
        Ok((Tendency { dv, dw, deta }, p))
    }

    pub fn rhs(&self, state: &FlowState) -> Result<Tendency> {
        self.rhs_with_pressure(state, None).map(|(t, _)| t)
    }

    /// Largest stable `|dt|` allowed by the Courant condition.
    pub fn cfl_limit(&self, state: &FlowState) -> f64 {
        let speed = self
            .carrier(state)
            .iter()
            .flat_map(|u| u.iter())
            .fold(0.0f64, |a, v| a.max(v.abs()));
        if speed == 0.0 {
            f64::INFINITY
        } else {
            self.params.cfl * self.grid().dx() / speed
        }
    }

    /// One classical RK4 step of size `params.dt`; `warm` carries the last
    /// pressure between calls to speed up the solves.
    pub fn step_warm(&self, state: &FlowState, warm: &mut Option<Field>) -> Result<FlowState> {
        let dt = self.params.dt;
        let limit = self.cfl_limit(state);
        if dt.abs() > limit {
            return Err(Error::CflViolation {
                dt: dt.abs(),
                limit,
            });
        }
        let grid = self.grid();
        let stage = |s: &FlowState, warm: &mut Option<Field>| -> Result<FlowState> {
            let (t, p) = self.rhs_with_pressure(s, warm.as_deref())?;
            *warm = Some(p.p);
            Ok(t.as_state())
        };
        let k1 = stage(state, warm)?;
        let s2 = state.axpy(0.5 * dt, &k1);
        let k2 = stage(&s2, warm)?;
        let s3 = state.axpy(0.5 * dt, &k2);
        let k3 = stage(&s3, warm)?;
        let s4 = state.axpy(dt, &k3);
        let k4 = stage(&s4, warm)?;
        let mut next = state
            .axpy(dt / 6.0, &k1)
            .axpy(dt / 3.0, &k2)
            .axpy(dt / 3.0, &k3)
            .axpy(dt / 6.0, &k4);
        next.impose_boundary(grid);
        next.t = state.t + dt;
        if !next.is_finite() {
            return Err(Error::BlownUp {
                t: next.t,
                reason: "non-finite field".into(),
            });
        }
        Ok(next)
    }

    pub fn step(&self, state: &FlowState) -> Result<FlowState> {
        self.step_warm(state, &mut None)
    }
}

/// `|eps (h1 - h0) / dt + div_x(J (Vbar + eps V))|` at the midpoint state.
///
/// The `eps` is factored out of the flux so the expression stays exact at
/// `eps = 0`: the residual is `eps |(h1 - h0)/dt + div_x(h Vbar + J V)|`.
pub fn h_continuity_residual(
    ws: &SpectralWorkspace,
    profile: &StratificationProfile,
    before: &FlowState,
    after: &FlowState,
    dt: f64,
    params: &SimParams,
) -> f64 {
    let grid = ws.grid();
    let (m, n) = (grid.plane(), grid.len());
    let eps = params.epsilon;
    let h0: Field = dr_sbp(grid, &before.eta).into_iter().map(|v| -v).collect();
    let h1: Field = dr_sbp(grid, &after.eta).into_iter().map(|v| -v).collect();
    let fluxes: Vec<Field> = (0..grid.d)
        .map(|a| {
            (0..n)
                .map(|i| {
                    let h = 0.5 * (h0[i] + h1[i]);
                    let v = 0.5 * (before.v[a][i] + after.v[a][i]);
                    h * profile.vbar[a][i / m] + (1.0 + eps * h) * v
                })
                .collect()
        })
        .collect();
    let div = ws.div_x(&fluxes);
    let res: Field = (0..n)
        .map(|i| eps * ((h1[i] - h0[i]) / dt + div[i]))
        .collect();
    grid.norm(&res)
}
