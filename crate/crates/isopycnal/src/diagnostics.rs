//! Energy functional, good unknowns, commutation residuals and run health.

use crate::calculus::{dr, dr_phi, grad_phi_x, sobolev_norm, Geometry};
use crate::domain::{
    miles_howard_margin, EnergyReport, Field, FlowState, OperatorLabel, SimParams, Status,
    StratificationProfile,
};
use crate::error::{Error, Result};
use crate::pressure::divergence_residual;
use crate::spectral::SpectralWorkspace;
use crate::sum::{min, pairwise_sum_by};

/// Index of the low-order energy, `s0 + 3/2` with `s0 = d/2 + 0.01`.
pub fn low_index(d: usize) -> f64 {
    d as f64 / 2.0 + 1.51
}

/// Coefficients below this fraction of the largest one are treated as
/// rounding noise and dropped before a high-order symbol is applied.
const NOISE_FLOOR: f64 = 1e-13;

/// Multiplies by `sym` after removing FFT noise from the spectrum.
///
/// The symbols here grow like `|xi|^s`, so rounding noise in empty modes would
/// otherwise be amplified by `Nx^s`. Coefficients that small carry no
/// resolvable information.
fn filtered_multiplier(
    ws: &SpectralWorkspace,
    f: &[f64],
    sym: impl Fn(usize) -> num_complex::Complex64,
) -> Field {
    let m = ws.grid().plane();
    let mut c = ws.forward(f);
    let cut = NOISE_FLOOR * c.iter().fold(0.0_f64, |a, z| a.max(z.norm()));
    let table: Vec<_> = (0..m).map(sym).collect();
    for level in c.chunks_mut(m) {
        for (z, t) in level.iter_mut().zip(&table) {
            *z = if z.norm() < cut { 0.0.into() } else { *z * t };
        }
    }
    ws.inverse(&c)
}

fn xi2(ws: &SpectralWorkspace, j: usize) -> f64 {
    let k = ws.wavevector(j);
    k[0] * k[0] + k[1] * k[1]
}

/// Symbol of the horizontal part of `op`, and the number of `dr` it takes.
fn symbol(ws: &SpectralWorkspace, s: u32, op: OperatorLabel, j: usize) -> (f64, u32) {
    let x = xi2(ws, j);
    match op {
        OperatorLabel::LamDr(l) => ((1.0 + x).powf(0.5 * (s as f64 - l as f64)), l),
        OperatorLabel::DsqLam => (x * (1.0 + x).powf(0.5 * (s as f64 - 2.0)), 0),
    }
}

fn vertical(ws: &SpectralWorkspace, f: &[f64], l: u32) -> Field {
    let mut g = f.to_vec();
    for _ in 0..l {
        g = dr(ws.grid(), &g);
    }
    g
}

/// Applies the operator `op` of the regularity-`s` set to `f`.
pub fn apply_operator(ws: &SpectralWorkspace, f: &[f64], s: u32, op: OperatorLabel) -> Field {
    let l = symbol(ws, s, op, 0).1;
    filtered_multiplier(ws, &vertical(ws, f, l), |j| symbol(ws, s, op, j).0.into())
}

/// `L d_x` along `axis` as a single Fourier multiplier.
fn operator_dx(ws: &SpectralWorkspace, f: &[f64], s: u32, op: OperatorLabel, axis: usize) -> Field {
    let l = symbol(ws, s, op, 0).1;
    filtered_multiplier(ws, &vertical(ws, f, l), |j| {
        num_complex::Complex64::new(0.0, ws.derivative_wavevector(j)[axis] * symbol(ws, s, op, j).0)
    })
}

/// Smallest jacobian seen by either vertical difference.
fn min_jacobian(geo: &Geometry) -> f64 {
    geo.min_jacobian().min(min(&geo.jac_sbp))
}

/// `f^L = L f + eps (L eta / J) dr f`.
pub fn good_unknown(
    ws: &SpectralWorkspace,
    geo: &Geometry,
    f: &[f64],
    s: u32,
    op: OperatorLabel,
) -> Field {
    let mut out = apply_operator(ws, f, s, op);
    if geo.eps == 0.0 {
        return out;
    }
    let leta = apply_operator(ws, &geo.eta, s, op);
    let coef: Field = leta
        .iter()
        .zip(&geo.jac)
        .map(|(l, j)| geo.eps * l / j)
        .collect();
    let corr = ws.product(&coef, &dr(ws.grid(), f));
    out.iter_mut().zip(corr).for_each(|(o, c)| *o += c);
    out
}

/// Full curved gradient `(grad^phi_x f, d^phi_r f)`.
fn grad_phi(ws: &SpectralWorkspace, geo: &Geometry, f: &[f64]) -> Vec<Field> {
    let mut g = grad_phi_x(ws, geo, f);
    g.push(dr_phi(ws, geo, f));
    g
}

/// L2 norm of
/// `L grad^phi f - grad^phi f^L - eps (L eta) d^phi_r grad^phi f + (dphi)^{-T} [L; (dphi)^T, grad^phi f]`.
///
/// The identity is exact in the continuum, so this is pure discretization
/// error. `[L; A, g] = L(A g) - (L A) g - A (L g)` is evaluated literally.
pub fn alinhac_commutation_residual(
    ws: &SpectralWorkspace,
    f: &[f64],
    state: &FlowState,
    params: &SimParams,
    op: OperatorLabel,
) -> Result<f64> {
    let grid = ws.grid();
    let d = grid.d;
    let eps = params.epsilon;
    let s = params.s_diag;
    let geo = Geometry::new(ws, &state.eta, eps, params.h_star)?;
    let lam = |g: &[f64]| apply_operator(ws, g, s, op);
    let mul = |a: &[f64], b: &[f64]| ws.product(a, b);

    let g = grad_phi(ws, &geo, f);
    // L grad^phi_x f = (L d_x) f + L(eps (grad eta / J) dr f). Fusing L with
    // d_x keeps FFT rounding from being amplified by the high symbol.
    let df = dr(grid, f);
    let mut lg: Vec<Field> = (0..d)
        .map(|a| {
            let mut out = operator_dx(ws, f, s, op, a);
            if eps != 0.0 {
                let slope: Field = geo.grad_eta[a]
                    .iter()
                    .zip(&geo.jac)
                    .map(|(e, j)| eps * e / j)
                    .collect();
                let corr = lam(&mul(&slope, &df));
                out.iter_mut().zip(corr).for_each(|(o, c)| *o += c);
            }
            out
        })
        .collect();
    lg.push(lam(&g[d]));
    let fl = good_unknown(ws, &geo, f, s, op);
    let gfl = grad_phi(ws, &geo, &fl);
    let leta = lam(&geo.eta);
    // d^phi_r of every component of grad^phi f
    let drg: Vec<Field> = g.iter().map(|c| dr_phi(ws, &geo, c)).collect();

    // (dphi)^T = I' + eps B with I' = diag(1.., -1) and B = [[0, grad eta], [0, -h]].
    // Both operators annihilate constants, so [L; I', g] = 0 and only
    // eps [L; B, g] = eps (L(B g) - (L B) g - B (L g)) is left.
    let bracket = |coef: &[f64], lc: &[f64]| -> Field {
        let a = lam(&mul(coef, &g[d]));
        let b = mul(lc, &g[d]);
        let c = mul(coef, &lg[d]);
        (0..grid.len()).map(|n| eps * (a[n] - b[n] - c[n])).collect()
    };
    let mut comm: Vec<Field> = Vec::with_capacity(d + 1);
    if eps == 0.0 {
        comm.resize(d + 1, grid.zeros());
    } else {
        for e in &geo.grad_eta {
            comm.push(bracket(e, &lam(e)));
        }
        comm.push(bracket(&geo.h, &lam(&geo.h)).iter().map(|x| -x).collect());
    }
    // (dphi)^{-T} = [[I, eps grad eta / J], [0, -1/J]]
    let inv_jac: Field = geo.jac.iter().map(|j| 1.0 / j).collect();
    let comm_r = mul(&inv_jac, &comm[d]);
    let mut back: Vec<Field> = (0..d)
        .map(|i| {
            let p = mul(&geo.grad_eta[i], &comm_r);
            comm[i].iter().zip(p).map(|(x, y)| x + eps * y).collect()
        })
        .collect();
    back.push(comm_r.iter().map(|x| -x).collect());

    let mut total = 0.0;
    for i in 0..=d {
        let corr = mul(&leta, &drg[i]);
        let res: Field = (0..grid.len())
            .map(|n| lg[i][n] - gfl[i][n] - eps * corr[n] + back[i][n])
            .collect();
        total += grid.inner(&res, &res);
    }
    Ok(total.sqrt())
}

/// Squared low norm `|f|^2_{H^{sigma,2}}`.
fn low_energy(ws: &SpectralWorkspace, f: &[f64]) -> f64 {
    sobolev_norm(ws, f, low_index(ws.grid().d), 2).powi(2)
}

fn level_weight(grid_plane: usize, levels: &[f64], len: usize) -> Field {
    (0..len).map(|i| levels[i / grid_plane]).collect()
}

/// Weight fields `rho J` and `rho'`.
fn weights(
    ws: &SpectralWorkspace,
    geo: &Geometry,
    profile: &StratificationProfile,
) -> (Field, Field) {
    let grid = ws.grid();
    let rho = level_weight(grid.plane(), &profile.rho, grid.len());
    let rho_j = rho.iter().zip(&geo.jac).map(|(a, b)| a * b).collect();
    (
        rho_j,
        level_weight(grid.plane(), &profile.rho_prime, grid.len()),
    )
}

struct Parts {
    e0: f64,
    contributions: Vec<(OperatorLabel, [f64; 3])>,
}

fn energy_parts(
    ws: &SpectralWorkspace,
    geo: &Geometry,
    state: &FlowState,
    profile: &StratificationProfile,
    params: &SimParams,
) -> Parts {
    let grid = ws.grid();
    let mu = params.mu;
    let e0 = state.v.iter().map(|v| low_energy(ws, v)).sum::<f64>()
        + mu * low_energy(ws, &state.w)
        + low_energy(ws, &state.eta);
    let (rho_j, rho_p) = weights(ws, geo, profile);
    let contributions = OperatorLabel::set(params.s_diag)
        .into_iter()
        .map(|op| {
            let ev = state
                .v
                .iter()
                .map(|v| {
                    let g = good_unknown(ws, geo, v, params.s_diag, op);
                    grid.inner_weighted(&g, &g, &rho_j)
                })
                .sum::<f64>();
            let gw = good_unknown(ws, geo, &state.w, params.s_diag, op);
            let ew = mu * grid.inner_weighted(&gw, &gw, &rho_j);
            let le = apply_operator(ws, &state.eta, params.s_diag, op);
            (op, [ev, ew, grid.inner_weighted(&le, &le, &rho_p)])
        })
        .collect();
    Parts { e0, contributions }
}

/// `E0` plus the weighted good-unknown energy of every operator in the set.
///
/// Never fails: a degenerate state is reported with `blown_up = true`.
pub fn energy(
    ws: &SpectralWorkspace,
    state: &FlowState,
    profile: &StratificationProfile,
    params: &SimParams,
) -> EnergyReport {
    let geo = Geometry::unchecked(ws, &state.eta, params.epsilon);
    let parts = energy_parts(ws, &geo, state, profile, params);
    let e = parts.e0
        + parts
            .contributions
            .iter()
            .map(|(_, c)| c[0] + c[1] + c[2])
            .sum::<f64>();
    let vbar = profile.has_shear().then_some(profile.vbar.as_slice());
    let status = blowup_monitor(ws, state, params);
    EnergyReport {
        t: state.t,
        e0: parts.e0,
        e,
        contributions: parts.contributions,
        div_residual: divergence_residual(ws, &geo, vbar, &state.v, &state.w),
        min_jacobian: min_jacobian(&geo),
        mh_margin: miles_howard_margin(profile, 1.0),
        blown_up: status.is_blown_up(),
        status,
    }
}

/// Ratio of the energy to the `H^s` size of the unknowns, with its bracket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equivalence {
    pub ratio: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Equivalence {
    pub fn holds(&self) -> bool {
        self.lower <= self.ratio && self.ratio <= self.upper
    }
}

/// Compares `E` with `N = |V|^2_{H^{s,s}} + mu |w|^2_{H^{s,s}} + |eta|^2_{H^{s,s}}`.
///
/// The bracket is assembled per field from the realized weights. With
/// `m, M` the extremes of `rho J` and `rho'`, `theta` the largest relative
/// size of the good-unknown correction `|eps L eta / J dr f| / |L f|`, and
/// `Q = sum_L |L f|^2`:
///
/// - lower: `N <= (s+1) sum_l |L^{s-l} dr^l f|^2 <= (s+1) K (E0 + Q)`, where
///   `K` bounds `(1+x)^s` by `K ((1+x)^sigma + x^2 (1+x)^{s-2})`, and
///   `E >= E0 + m (1-theta)_+^2 Q`;
/// - upper: `E0 <= G^2 N`, `Q <= N` and `E <= E0 + M (1+theta)^2 Q`, with
///   `G` the largest discrete ratio of the low symbol to the high one
///   (1 unless `sigma > s`).
///
/// Returns `None` for the equilibrium, where both sides vanish.
pub fn energy_equivalence_check(
    ws: &SpectralWorkspace,
    state: &FlowState,
    profile: &StratificationProfile,
    params: &SimParams,
) -> Option<Equivalence> {
    let grid = ws.grid();
    let s = params.s_diag;
    let sf = s as f64;
    let sigma = low_index(grid.d);
    let geo = Geometry::unchecked(ws, &state.eta, params.epsilon);
    let parts = energy_parts(ws, &geo, state, profile, params);
    let e = parts.e0
        + parts
            .contributions
            .iter()
            .map(|(_, c)| c[0] + c[1] + c[2])
            .sum::<f64>();
    let high = |f: &[f64]| sobolev_norm(ws, f, sf, s).powi(2);
    let n = state.v.iter().map(|v| high(v)).sum::<f64>()
        + params.mu * high(&state.w)
        + high(&state.eta);
    if n == 0.0 {
        return None;
    }

    let (rho_j, rho_p) = weights(ws, &geo, profile);
    let m = min(&rho_j).min(min(&rho_p));
    let big = rho_j.iter().chain(&rho_p).fold(0.0_f64, |a, &b| a.max(b));
    let mut theta: f64 = 0.0;
    if params.epsilon != 0.0 {
        for op in OperatorLabel::set(s) {
            for f in state.v.iter().chain(std::iter::once(&state.w)) {
                let lf = grid.norm(&apply_operator(ws, f, s, op));
                let gf = good_unknown(ws, &geo, f, s, op);
                let plain = apply_operator(ws, f, s, op);
                let diff: Field = gf.iter().zip(&plain).map(|(a, b)| a - b).collect();
                let c = grid.norm(&diff);
                if c > 0.0 {
                    theta = theta.max(if lf > 0.0 { c / lf } else { f64::INFINITY });
                }
            }
        }
    }
    let k = if sf - 2.0 <= sigma {
        2.0
    } else {
        2f64.powf(sf - sigma)
    };
    let g2 = if sigma > sf {
        let xi2 = (0..grid.plane())
            .map(|j| {
                let w = ws.wavevector(j);
                w[0] * w[0] + w[1] * w[1]
            })
            .fold(0.0, f64::max);
        (1.0 + xi2).powf(sigma - sf)
    } else {
        1.0
    };
    let lower = 1f64.min(m * (1.0 - theta).max(0.0).powi(2)) / (k * (sf + 1.0));
    let upper = g2 + big * (1.0 + theta).powi(2);
    Some(Equivalence {
        ratio: e / n,
        lower,
        upper,
    })
}

/// Classifies a state: non-finite fields, a jacobian outside
/// `[h_star, h_sup]` or an `H^{s_diag}` size above the ceiling count as
/// blown up; a jacobian below `2 h_star` is near-degenerate.
pub fn blowup_monitor(ws: &SpectralWorkspace, state: &FlowState, params: &SimParams) -> Status {
    if !state.is_finite() {
        return Status::BlownUp("non-finite field".into());
    }
    let geo = Geometry::unchecked(ws, &state.eta, params.epsilon);
    let jmin = min_jacobian(&geo);
    if jmin < params.h_star {
        return Status::BlownUp(format!(
            "min jacobian {jmin:.4e} below h_star {:.4e}",
            params.h_star
        ));
    }
    let jmax = geo
        .jac
        .iter()
        .chain(&geo.jac_sbp)
        .fold(0.0_f64, |a, &b| a.max(b));
    if jmax > params.h_sup {
        return Status::BlownUp(format!(
            "max jacobian {jmax:.4e} above h_sup {:.4e}",
            params.h_sup
        ));
    }
    let size = state
        .fields()
        .map(|f| sobolev_norm(ws, f, params.s_diag as f64, params.k_diag).powi(2))
        .sum::<f64>()
        .sqrt();
    if !(size <= params.norm_ceiling) {
        return Status::BlownUp(format!(
            "norm {size:.4e} above ceiling {:.4e}",
            params.norm_ceiling
        ));
    }
    if jmin < 2.0 * params.h_star {
        return Status::JacobianNearDegenerate(jmin);
    }
    Status::Healthy
}

/// Least-squares slope of `ln E` against `t` over the samples with `E > 0`.
pub fn growth_rate_fit(series: &[(f64, f64)]) -> Result<f64> {
    const NEEDED: usize = 10;
    if series.len() < NEEDED {
        return Err(Error::InsufficientData {
            needed: NEEDED,
            got: series.len(),
        });
    }
    let mut pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|p| p.1 > 0.0)
        .map(|&(t, e)| (t, e.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: pts.len(),
        });
    }
    // centring on the first sample keeps a constant series exactly flat
    let y0 = pts[0].1;
    pts.iter_mut().for_each(|p| p.1 -= y0);
    let n = pts.len() as f64;
    let tm = pairwise_sum_by(pts.len(), &|i| pts[i].0) / n;
    let ym = pairwise_sum_by(pts.len(), &|i| pts[i].1) / n;
    let sxy = pairwise_sum_by(pts.len(), &|i| (pts[i].0 - tm) * (pts[i].1 - ym));
    let sxx = pairwise_sum_by(pts.len(), &|i| (pts[i].0 - tm).powi(2));
    if sxx == 0.0 {
        return Err(Error::InsufficientData { needed: 2, got: 1 });
    }
    Ok(sxy / sxx)
}

/// Residual and coefficients of the linear fit `y = a + b cos(W t) + c sin(W t)`.
fn harmonic_residual(t: &[f64], y: &[f64], omega: f64) -> f64 {
    let basis = |i: usize| [1.0, (omega * t[i]).cos(), (omega * t[i]).sin()];
    let n = t.len();
    let mut a = nalgebra::Matrix3::zeros();
    let mut rhs = nalgebra::Vector3::zeros();
    for p in 0..3 {
        for q in 0..3 {
            a[(p, q)] = pairwise_sum_by(n, &|i| basis(i)[p] * basis(i)[q]);
        }
        rhs[p] = pairwise_sum_by(n, &|i| basis(i)[p] * y[i]);
    }
    let Some(coef) = a.lu().solve(&rhs) else {
        return f64::INFINITY;
    };
    pairwise_sum_by(n, &|i| {
        let b = basis(i);
        (y[i] - coef[0] - coef[1] * b[1] - coef[2] * b[2]).powi(2)
    })
}

/// Angular frequency `W` of the best single-harmonic fit to a uniformly
/// sampled series.
///
/// Scans `W` between one cycle over the record and the sampling Nyquist
/// limit, then refines the best scan point by golden-section search.
pub fn oscillation_frequency(t: &[f64], y: &[f64]) -> Result<f64> {
    const NEEDED: usize = 10;
    if t.len() < NEEDED || t.len() != y.len() {
        return Err(Error::InsufficientData {
            needed: NEEDED,
            got: t.len().min(y.len()),
        });
    }
    let span = t[t.len() - 1] - t[0];
    let lo = std::f64::consts::PI / span;
    let hi = std::f64::consts::PI * (t.len() - 1) as f64 / span;
    let scan = 4 * t.len().min(2000);
    let step = (hi - lo) / scan as f64;
    let cost = |w: f64| harmonic_residual(t, y, w);
    let best = (0..=scan)
        .map(|i| lo + i as f64 * step)
        .min_by(|a, b| cost(*a).total_cmp(&cost(*b)))
        .unwrap();
    let (mut a, mut b) = ((best - step).max(lo), (best + step).min(hi));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fd) = (cost(c), cost(d));
    while b - a > 1e-12 * best.max(1.0) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = cost(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = cost(d);
        }
    }
    Ok(0.5 * (a + b))
}
