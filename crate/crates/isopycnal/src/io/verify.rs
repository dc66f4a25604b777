//! Verification suites behind `isopyc verify`.
//!
//! Each suite measures discretization or model properties at the
//! configured resolution and compares them with analytic expectations.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{InitConfig, RunConfig, SUITES};
use super::run::raw_initial_data;
use crate::calculus::{self, div_phi_mu, grad_phi_x, Geometry};
use crate::diagnostics::{
    alinhac_commutation_residual, apply_operator, energy, energy_equivalence_check, growth_rate_fit,
    oscillation_frequency,
};
use crate::domain::{
    DensitySpec, Field, FlowState, Grid, OperatorLabel, ShearSpec, SimParams,
    StratificationProfile,
};
use crate::dynamics::{buoyancy, prepare_initial_data, Model};
use crate::error::{Error, Result};
use crate::pressure::{
    self, constraint, hydrostatic_split, solve_neumann, EllipticProblem, PressureOperator,
    SolveOptions,
};
use crate::spectral::SpectralWorkspace;

/// Acceptance region of a measured value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    AtMost(f64),
    AtLeast(f64),
    Near { target: f64, tol: f64 },
}

impl Bound {
    pub fn admits(&self, v: f64) -> bool {
        match *self {
            Bound::AtMost(b) => v <= b,
            Bound::AtLeast(b) => v >= b,
            Bound::Near { target, tol } => (v - target).abs() <= tol,
        }
    }
}

impl std::fmt::Display for Bound {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Bound::AtMost(b) => write!(f, "<= {b:.3e}"),
            Bound::AtLeast(b) => write!(f, ">= {b:.3e}"),
            Bound::Near { target, tol } => write!(f, "{target} +- {tol}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub measured: f64,
    pub bound: Bound,
}

impl Check {
    fn new(suite: &'static str, name: impl Into<String>, measured: f64, bound: Bound) -> Self {
        Self {
            suite,
            name: name.into(),
            measured,
            bound,
        }
    }

    pub fn passed(&self) -> bool {
        self.bound.admits(self.measured)
    }
}

/// Plain-text table of checks, one line each.
pub fn table(checks: &[Check]) -> String {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0).max(5);
    let mut s = format!(
        "{:<11} {:<width$} {:>12}  {:<22} result\n",
        "suite", "check", "measured", "bound"
    );
    for c in checks {
        let _ = writeln!(
            s,
            "{:<11} {:<width$} {:>12.4e}  {:<22} {}",
            c.suite,
            c.name,
            c.measured,
            c.bound.to_string(),
            if c.passed() { "PASS" } else { "FAIL" }
        );
    }
    s
}

/// Runs one suite by name. Unknown names are a config error.
pub fn run_suite(name: &str, cfg: &RunConfig) -> Result<Vec<Check>> {
    match name {
        "elliptic" => elliptic(cfg),
        "identities" => identities(cfg),
        "waves" => waves(cfg),
        "divergence" => divergence(cfg),
        "bridge" => bridge(cfg),
        "energy" => energy_suite(cfg),
        "sweep" => sweep(cfg),
        other => Err(Error::Config {
            key: "suite".into(),
            reason: format!("unknown suite `{other}`; expected one of {}", SUITES.join(", ")),
        }),
    }
}

fn grid_at(cfg: &RunConfig, nx: usize, nr: usize) -> Result<Grid> {
    Grid::new(cfg.grid.d, nx, cfg.grid.length, nr)
}

fn refine(nr: usize) -> usize {
    2 * (nr - 1) + 1
}

/// `Nr` halved, as given, and doubled.
fn ladder(nr: usize) -> Vec<usize> {
    let half = (nr - 1) / 2 + 1;
    if half >= 9 && (nr - 1) % 2 == 0 {
        vec![half, nr, refine(nr)]
    } else {
        vec![nr, refine(nr), refine(refine(nr))]
    }
}

fn diff(a: &[f64], b: &[f64]) -> Field {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Horizontal phase `2 pi x / L`, so that the mode fits any period.
fn phase(grid: &Grid, x: f64) -> f64 {
    2.0 * PI * x / grid.length
}

fn exp_profile(grid: &Grid, params: &SimParams, shear: ShearSpec) -> Result<StratificationProfile> {
    StratificationProfile::from_spec(&DensitySpec::Exp { n2: 1.0 }, &shear, grid, params)
}

// ---------------------------------------------------------------- elliptic

/// `|P - P*|` for `P* = cos x cos(pi r)` with flat geometry and unit density.
fn manufactured_error(grid: &Grid, mu: f64, tol: f64) -> Result<(Field, f64)> {
    let ws = SpectralWorkspace::new(grid);
    let m = grid.plane();
    let c = 2.0 * PI / grid.length;
    let rhs = grid.sample(|x, r| -(mu * c * c + PI * PI) * (c * x[0]).cos() * (PI * r).cos());
    let prob = EllipticProblem::pointwise(
        &ws,
        Geometry::flat(grid, 0.0),
        vec![1.0; grid.nr],
        mu,
        rhs,
        vec![0.0; m],
        vec![0.0; m],
    );
    let sol = solve_neumann(&ws, &prob, tol, 500, 1e-8)?;
    let exact = grid.sample(|x, r| (c * x[0]).cos() * (PI * r).cos());
    let err = grid.norm(&diff(&sol.p, &exact));
    Ok((sol.p, err))
}

fn elliptic(cfg: &RunConfig) -> Result<Vec<Check>> {
    const S: &str = "elliptic";
    let (nx, tol) = (cfg.grid.nx, cfg.verify.slope_tol);
    let mut out = Vec::new();
    let levels = ladder(cfg.grid.nr);
    for mu in [1.0, 0.25] {
        let errs = levels
            .iter()
            .map(|&nr| Ok(manufactured_error(&grid_at(cfg, nx, nr)?, mu, 1e-12)?.1))
            .collect::<Result<Vec<f64>>>()?;
        for i in 1..levels.len() {
            out.push(Check::new(
                S,
                format!("manufactured slope mu={mu} Nr {}->{}", levels[i - 1], levels[i]),
                (errs[i - 1] / errs[i]).log2(),
                Bound::Near { target: 2.0, tol },
            ));
        }
    }
    // Doubling Nx must not change the solution: the horizontal error is spectral.
    let coarse = grid_at(cfg, nx, cfg.grid.nr)?;
    let fine = grid_at(cfg, 2 * nx, cfg.grid.nr)?;
    let (pc, _) = manufactured_error(&coarse, 1.0, 1e-13)?;
    let (pf, _) = manufactured_error(&fine, 1.0, 1e-13)?;
    let mut horiz: f64 = 0.0;
    for i in 0..coarse.len() {
        let (k, j) = (i / coarse.plane(), i % coarse.plane());
        let jf = match coarse.d {
            1 => 2 * j,
            _ => 2 * (j / nx) * (2 * nx) + 2 * (j % nx),
        };
        horiz = horiz.max((pc[i] - pf[k * fine.plane() + jf]).abs());
    }
    out.push(Check::new(S, "horizontal error", horiz, Bound::AtMost(1e-10)));

    for &nr in &levels {
        let grid = grid_at(cfg, nx, nr)?;
        let ws = SpectralWorkspace::new(&grid);
        let eta = grid.sample(|x, r| 0.5 * phase(&grid, x[0]).sin() * r * (1.0 - r));
        let geo = Geometry::new(&ws, &eta, 0.2, 0.1)?;
        let v = vec![grid.sample(|x, r| phase(&grid, x[0]).sin() * (1.0 + r)); grid.d];
        let load = constraint(&ws, &geo, None, &v, &grid.zeros());
        let op = PressureOperator::new(&ws, &geo, &vec![1.0; nr], cfg.params.mu);
        let sol = op.solve(&load, &SolveOptions::new(1e-10, 500, 1e-8), None)?;
        out.push(Check::new(
            S,
            format!("curved PCG iterations Nr {nr}"),
            sol.iterations as f64,
            Bound::AtMost(60.0),
        ));
    }
    Ok(out)
}

// -------------------------------------------------------------- identities

fn wavy_eta(grid: &Grid, amp: f64) -> Field {
    grid.sample(|x, r| amp * (PI * r).sin() * phase(grid, x[0]).cos())
}

/// `max |rho^-1 d^phi_r P_h + b - eps h b / J|` and the scale `max |rho b|`.
fn hydrostatic_residual(cfg: &RunConfig, nr: usize) -> Result<(f64, f64, f64)> {
    let grid = grid_at(cfg, cfg.grid.nx, nr)?;
    let ws = SpectralWorkspace::new(&grid);
    let params = SimParams {
        epsilon: 0.1,
        ..cfg.params.clone()
    };
    let profile = exp_profile(&grid, &params, ShearSpec::Zero)?;
    let mut state = FlowState::zeros(&grid);
    state.eta = wavy_eta(&grid, 0.5);
    let geo = Geometry::new(&ws, &state.eta, params.epsilon, params.h_star)?;
    let b = buoyancy(&grid, &state, &profile, &params)?;
    let (_, res) = hydrostatic_split(&ws, &geo, &profile, &b);
    let m = grid.plane();
    let scale = b
        .iter()
        .enumerate()
        .fold(0.0_f64, |a, (i, b)| a.max((profile.rho[i / m] * b).abs()));
    let max = res.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    Ok((max, scale, grid.dr()))
}

fn alinhac_residual(cfg: &RunConfig, nr: usize, amp: f64, op: OperatorLabel) -> Result<f64> {
    let grid = grid_at(cfg, cfg.grid.nx, nr)?;
    let ws = SpectralWorkspace::new(&grid);
    let params = SimParams {
        epsilon: 0.1,
        s_diag: 3,
        ..cfg.params.clone()
    };
    let mut state = FlowState::zeros(&grid);
    state.eta = wavy_eta(&grid, amp);
    let f = grid.sample(|x, r| (phase(&grid, x[0]) + r).sin() * r.exp());
    let res = alinhac_commutation_residual(&ws, &f, &state, &params, op)?;
    // relative to |L grad f| in flat geometry
    let flat = Geometry::flat(&grid, 0.0);
    let mut g = grad_phi_x(&ws, &flat, &f);
    g.push(calculus::dr_phi(&ws, &flat, &f));
    let size = g
        .iter()
        .map(|c| grid.norm(&apply_operator(&ws, c, 3, op)).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(res / size)
}

/// `<J g, div f> + <J f, grad g>` relative to the size of either term.
///
/// With `w` and `eta` vanishing on both boundaries the boundary flux is zero,
/// so the sum is pure discretization error.
fn duality_defect(cfg: &RunConfig, nr: usize) -> Result<f64> {
    let grid = grid_at(cfg, cfg.grid.nx, nr)?;
    let ws = SpectralWorkspace::new(&grid);
    let eta = wavy_eta(&grid, 0.5);
    let geo = Geometry::new(&ws, &eta, 0.2, 0.1)?;
    let v: Vec<Field> = (0..grid.d)
        .map(|_| grid.sample(|x, r| (phase(&grid, x[0]) + r).cos()))
        .collect();
    let w = grid.sample(|x, r| (PI * r).sin() * phase(&grid, x[0]).sin() * (1.0 + r));
    let g = grid.sample(|x, r| (2.0 * phase(&grid, x[0])).cos() * (1.0 + r * r));
    let div = div_phi_mu(&ws, &geo, &v, &w, 1.0);
    let gx = grad_phi_x(&ws, &geo, &g);
    let gr = calculus::dr_phi(&ws, &geo, &g);
    let jg: Field = g.iter().zip(&geo.jac).map(|(a, j)| a * j).collect();
    let first = grid.inner(&jg, &div);
    let mut second = 0.0;
    for a in 0..grid.d {
        second += grid.inner_weighted(&v[a], &gx[a], &geo.jac);
    }
    second += grid.inner_weighted(&w, &gr, &geo.jac);
    Ok((first + second).abs() / first.abs().max(second.abs()))
}

fn identities(cfg: &RunConfig) -> Result<Vec<Check>> {
    const S: &str = "identities";
    let tol = cfg.verify.slope_tol;
    let nr = cfg.grid.nr;
    let fine = refine(nr);
    let mut out = Vec::new();

    let (rc, scale, dr) = hydrostatic_residual(cfg, nr)?;
    let (rf, _, _) = hydrostatic_residual(cfg, fine)?;
    out.push(Check::new(
        S,
        format!("hydrostatic residual / (dr^2 scale) Nr {nr}"),
        rc / (dr * dr * scale),
        Bound::AtMost(5.0),
    ));
    out.push(Check::new(
        S,
        format!("hydrostatic slope Nr {nr}->{fine}"),
        (rc / rf).log2(),
        Bound::Near { target: 2.0, tol },
    ));

    for op in [OperatorLabel::LamDr(1), OperatorLabel::DsqLam] {
        let flat = alinhac_residual(cfg, nr, 0.0, op)?;
        out.push(Check::new(S, format!("Alinhac flat residual {op}"), flat, Bound::AtMost(1e-12)));
        let c = alinhac_residual(cfg, nr, 0.5, op)?;
        let f = alinhac_residual(cfg, fine, 0.5, op)?;
        out.push(Check::new(
            S,
            format!("Alinhac slope {op} Nr {nr}->{fine}"),
            (c / f).log2(),
            Bound::Near {
                target: 2.0,
                tol: tol.max(0.3),
            },
        ));
    }

    let dc = duality_defect(cfg, nr)?;
    let df = duality_defect(cfg, fine)?;
    out.push(Check::new(
        S,
        format!("duality defect slope Nr {nr}->{fine}"),
        (dc / df).log2(),
        Bound::AtLeast(2.0 - tol),
    ));
    Ok(out)
}

// ------------------------------------------------------------------- waves

/// Boussinesq profile with `N^2 = 1`, no shear.
fn wave_setup(grid: &Grid, mu: f64) -> Result<(SimParams, StratificationProfile)> {
    let params = SimParams {
        epsilon: 1e-6,
        mu,
        dt: 1e-3,
        t_end: 20.0,
        ..SimParams::default()
    };
    let profile = StratificationProfile::from_spec(
        &DensitySpec::Boussinesq { n2: 1.0 },
        &ShearSpec::Zero,
        grid,
        &params,
    )?;
    Ok((params, profile))
}

/// Angular frequency of the standing mode `(k, n)` measured from the
/// potential energy `|eta|^2`, which oscillates at twice the wave frequency.
pub fn measured_wave_frequency(grid: &Grid, mu: f64, k: u32, n: u32) -> Result<f64> {
    let (params, profile) = wave_setup(grid, mu)?;
    let ws = SpectralWorkspace::new(grid);
    let (v, w, eta) = raw_initial_data(
        grid,
        &InitConfig::Mode {
            field: super::config::ModeField::Eta,
            amplitude: 0.01,
            kx: k,
            n,
        },
        0,
    );
    let mut state = prepare_initial_data(&ws, &profile, &params, &v, &w, &eta)?;
    let model = Model::new(&ws, &profile, &params);
    let steps = (params.t_end / params.dt).round() as usize;
    let every = 20;
    let (mut t, mut y) = (Vec::new(), Vec::new());
    let mut warm = None;
    for step in 0..=steps {
        if step % every == 0 {
            t.push(step as f64 * params.dt);
            y.push(grid.inner(&state.eta, &state.eta));
        }
        if step < steps {
            state = model.step_warm(&state, &mut warm)?;
        }
    }
    Ok(0.5 * oscillation_frequency(&t, &y)?)
}

fn waves(cfg: &RunConfig) -> Result<Vec<Check>> {
    const S: &str = "waves";
    let grid = cfg.grid.build()?;
    let mut out = Vec::new();
    for mu in [1.0, 0.25] {
        for (k, n) in [(1u32, 1u32), (2, 1), (1, 2)] {
            let kk = 2.0 * PI * k as f64 / grid.length;
            let exact = (kk * kk / (mu * kk * kk + (n as f64 * PI).powi(2))).sqrt();
            let got = measured_wave_frequency(&grid, mu, k, n)?;
            out.push(Check::new(
                S,
                format!("frequency rel. error mu={mu} (k,n)=({k},{n})"),
                (got - exact).abs() / exact,
                Bound::AtMost(cfg.verify.freq_tol),
            ));
        }
    }
    Ok(out)
}

// -------------------------------------------------------------- divergence

/// Largest `div(t) / (div(0) + 1e-8)` over `t <= 1`.
fn divergence_growth(cfg: &RunConfig, nr: usize) -> Result<f64> {
    let grid = grid_at(cfg, cfg.grid.nx, nr)?;
    let ws = SpectralWorkspace::new(&grid);
    let params = SimParams {
        epsilon: 0.1,
        mu: 0.25,
        dt: 1e-3,
        ..cfg.params.clone()
    };
    let profile = exp_profile(&grid, &params, ShearSpec::Zero)?;
    let (v, w, eta) = raw_initial_data(
        &grid,
        &InitConfig::Random {
            amplitude: 0.1,
            modes: 3,
        },
        cfg.seed,
    );
    let mut state = prepare_initial_data(&ws, &profile, &params, &v, &w, &eta)?;
    let model = Model::new(&ws, &profile, &params);
    let residual = |s: &FlowState| -> Result<f64> {
        let geo = Geometry::new(&ws, &s.eta, params.epsilon, params.h_star)?;
        Ok(pressure::divergence_residual(&ws, &geo, None, &s.v, &s.w))
    };
    let d0 = residual(&state)?;
    let mut worst: f64 = 0.0;
    let mut warm = None;
    for step in 1..=1000 {
        state = model.step_warm(&state, &mut warm)?;
        if step % 50 == 0 {
            worst = worst.max(residual(&state)? / (d0 + 1e-8));
        }
    }
    Ok(worst)
}

fn divergence(cfg: &RunConfig) -> Result<Vec<Check>> {
    const S: &str = "divergence";
    let mut out = Vec::new();
    for nr in [cfg.grid.nr, refine(cfg.grid.nr)] {
        out.push(Check::new(
            S,
            format!("max div(t) / (div(0) + 1e-8), Nr {nr}"),
            divergence_growth(cfg, nr)?,
            Bound::AtMost(cfg.verify.div_factor),
        ));
    }
    Ok(out)
}

// ------------------------------------------------------------------ bridge

fn bridge_error(cfg: &RunConfig, nr: usize) -> Result<f64> {
    use crate::bridge::{from_eulerian, to_eulerian};
    let grid = grid_at(cfg, cfg.grid.nx, nr)?;
    let params = SimParams {
        epsilon: 0.1,
        ..cfg.params.clone()
    };
    let profile = exp_profile(&grid, &params, ShearSpec::Linear { rate: 0.5 })?;
    let mut s = FlowState::zeros(&grid);
    s.eta = wavy_eta(&grid, 0.5);
    s.w = grid.sample(|x, r| (PI * r).sin() * phase(&grid, x[0]).sin());
    for v in &mut s.v {
        *v = grid.sample(|x, r| (phase(&grid, x[0]) + r).cos());
    }
    let e = to_eulerian(&grid, &s, &profile, &params, nr)?;
    let back = from_eulerian(&e, &profile, &params, &grid)?;
    let (mut num, mut den) = (0.0, 0.0);
    for (a, b) in s.fields().zip(back.fields()) {
        let d = diff(a, b);
        num += grid.inner(&d, &d);
        den += grid.inner(a, a);
    }
    Ok((num / den).sqrt())
}

fn bridge(cfg: &RunConfig) -> Result<Vec<Check>> {
    const S: &str = "bridge";
    let nr = cfg.grid.nr;
    let coarse = (nr - 1) / 2 + 1;
    let e = bridge_error(cfg, nr)?;
    let ec = bridge_error(cfg, coarse)?;
    Ok(vec![
        Check::new(
            S,
            format!("round trip rel. L2 error Nr=Nz={nr}"),
            e,
            Bound::AtMost(cfg.verify.roundtrip_tol),
        ),
        Check::new(
            S,
            format!("contraction slope Nr {coarse}->{nr}"),
            (ec / e).log2(),
            Bound::AtLeast(2.5),
        ),
    ])
}

// ------------------------------------------------------------------ energy

/// A random admissible state: smooth modes, `eta` scaled so `J >= 0.5`.
pub fn random_state(grid: &Grid, rng: &mut ChaCha8Rng, eps: f64) -> FlowState {
    let (v, w, eta) = raw_initial_data(
        grid,
        &InitConfig::Random {
            amplitude: 1.0,
            modes: 3,
        },
        rng.gen(),
    );
    let mut s = FlowState { t: 0.0, v, w, eta };
    let h = calculus::dr(grid, &s.eta);
    let hmax = h.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if eps > 0.0 && eps * hmax > 0.5 {
        let k = 0.5 / (eps * hmax);
        s.eta.iter_mut().for_each(|e| *e *= k);
    }
    s
}

fn energy_suite(cfg: &RunConfig) -> Result<Vec<Check>> {
    const S: &str = "energy";
    let grid = cfg.grid.build()?;
    let ws = SpectralWorkspace::new(&grid);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut failures = 0;
    let mut worst: f64 = f64::INFINITY;
    for _ in 0..100 {
        let params = SimParams {
            epsilon: rng.gen_range(0.0..0.5),
            mu: rng.gen_range(0.05..1.0),
            s_diag: cfg.params.s_diag,
            ..SimParams::default()
        };
        let profile = exp_profile(&grid, &params, ShearSpec::Zero)?;
        let state = random_state(&grid, &mut rng, params.epsilon);
        match energy_equivalence_check(&ws, &state, &profile, &params) {
            Some(eq) if eq.holds() => {
                worst = worst.min((eq.ratio / eq.lower).min(eq.upper / eq.ratio));
            }
            _ => failures += 1,
        }
    }
    let mut out = vec![
        Check::new(S, "bracket failures in 100 states", failures as f64, Bound::AtMost(0.0)),
        Check::new(S, "smallest bracket margin", worst, Bound::AtLeast(1.0)),
    ];

    let mut drift: f64 = 0.0;
    for eps in [0.0, 0.1, 0.3] {
        for mu in [1.0, 0.25, 0.04] {
            let params = SimParams {
                epsilon: eps,
                mu,
                dt: 1e-3,
                ..cfg.params.clone()
            };
            let rate = 0.9 * mu.sqrt();
            let profile = exp_profile(&grid, &params, ShearSpec::Linear { rate })?;
            let model = Model::new(&ws, &profile, &params);
            let mut state = FlowState::zeros(&grid);
            let mut warm = None;
            for _ in 0..1000 {
                state = model.step_warm(&state, &mut warm)?;
            }
            drift = drift.max(state.max_abs());
            drift = drift.max(energy(&ws, &state, &profile, &params).e.sqrt());
        }
    }
    out.push(Check::new(
        S,
        "equilibrium drift after 1000 steps",
        drift,
        Bound::AtMost(1e-10),
    ));
    Ok(out)
}

// ------------------------------------------------------------------- sweep

/// Spearman rank correlation, ties given their average rank.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(x: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..x.len()).collect();
        idx.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
        let mut r = vec![0.0; x.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Initial data per sweep point; the point's rate is the largest over them.
///
/// The energy estimate bounds growth over all data, and the cubic energy
/// transfer of a single datum can have either sign, so the trend is read
/// off the worst case of a fixed ensemble.
pub const SWEEP_ENSEMBLE: u64 = 4;

/// Fitted growth rate of `E` for one point of the sweep.
pub fn sweep_rate(grid: &Grid, eps_ratio: f64, shear_ratio: f64, seed: u64) -> Result<f64> {
    let mu: f64 = 0.25;
    let params = SimParams {
        epsilon: eps_ratio * mu.sqrt(),
        mu,
        dt: 2e-3,
        ..SimParams::default()
    };
    let rate = shear_ratio * mu.sqrt();
    let profile = exp_profile(grid, &params, ShearSpec::Linear { rate })?;
    let ws = SpectralWorkspace::new(grid);
    let (v, w, eta) = raw_initial_data(
        grid,
        &InitConfig::Random {
            amplitude: 0.2,
            modes: 2,
        },
        seed,
    );
    let mut state = prepare_initial_data(&ws, &profile, &params, &v, &w, &eta)?;
    let model = Model::new(&ws, &profile, &params);
    let mut series = Vec::new();
    let mut warm = None;
    for step in 0..=500 {
        if step % 25 == 0 {
            series.push((state.t, energy(&ws, &state, &profile, &params).e));
        }
        if step < 500 {
            state = model.step_warm(&state, &mut warm)?;
        }
    }
    growth_rate_fit(&series)
}

fn sweep(cfg: &RunConfig) -> Result<Vec<Check>> {
    const S: &str = "sweep";
    let grid = cfg.grid.build()?;
    let axis = [0.0, 0.5, 1.0];
    let (mut rates, mut coord) = (Vec::new(), Vec::new());
    for &a in &axis {
        for &b in &axis {
            let mut worst = f64::NEG_INFINITY;
            for k in 0..SWEEP_ENSEMBLE {
                worst = worst.max(sweep_rate(&grid, a, b, cfg.seed + k)?);
            }
            rates.push(worst);
            coord.push(a + b);
        }
    }
    Ok(vec![Check::new(
        S,
        "Spearman(growth rate, eps/sqrt(mu) + |V'|/sqrt(mu))",
        spearman(&coord, &rates),
        Bound::AtLeast(0.8),
    )])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_examples() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&a, &[10.0, 20.0, 30.0, 40.0]) - 1.0).abs() < 1e-15);
        assert!((spearman(&a, &[4.0, 3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
        // ties share their average rank
        let r = spearman(&[0.0, 0.0, 1.0], &[1.0, 2.0, 3.0]);
        assert!((r - 0.866_025_403_784_438_6).abs() < 1e-12);
    }

    #[test]
    fn bounds() {
        assert!(Bound::Near { target: 2.0, tol: 0.2 }.admits(1.85));
        assert!(!Bound::AtMost(1.0).admits(f64::NAN));
        assert!(Bound::AtLeast(0.8).admits(0.8));
    }

    #[test]
    fn unknown_suite() {
        let e = run_suite("nope", &RunConfig::default()).unwrap_err();
        assert!(matches!(e, Error::Config { .. }));
    }
}
