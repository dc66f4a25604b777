//! The `run` driver: initial data, time loop, energy series and snapshots.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{InitConfig, ModeField, RunConfig};
use super::series::EnergyWriter;
use super::snapshot::{write_snapshot, Snapshot};
use crate::diagnostics::energy;
use crate::domain::{EnergyReport, Field, FlowState, Grid, SimParams, Status, StratificationProfile};
use crate::dynamics::{prepare_initial_data, Model};
use crate::error::{Error, Result};
use crate::spectral::SpectralWorkspace;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_BLOWUP: i32 = 3;
pub const EXIT_CHECK_FAILED: i32 = 4;

/// Exit code for a failed run.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. }
        | Error::InvalidGrid(_)
        | Error::InvalidParameter { .. }
        | Error::StabilityViolation { .. }
        | Error::CavitationViolation { .. }
        | Error::Io(_)
        | Error::FormatMismatch(_) => EXIT_CONFIG,
        Error::BlownUp { .. } | Error::JacobianDegenerate { .. } => EXIT_BLOWUP,
        _ => EXIT_SOLVER,
    }
}

/// Raw initial data before projection: `(V, w, eta)`.
pub fn raw_initial_data(grid: &Grid, init: &InitConfig, seed: u64) -> (Vec<Field>, Field, Field) {
    use std::f64::consts::PI;
    let mut v = vec![grid.zeros(); grid.d];
    let mut w = grid.zeros();
    let mut eta = grid.zeros();
    match *init {
        InitConfig::Equilibrium => {}
        InitConfig::Mode {
            field,
            amplitude,
            kx,
            n,
        } => {
            let (k, n) = (kx as f64, n as f64);
            let two_pi_over_l = 2.0 * PI / grid.length;
            match field {
                ModeField::Eta => {
                    eta = grid.sample(|x, r| {
                        amplitude * (k * two_pi_over_l * x[0]).cos() * (n * PI * r).sin()
                    })
                }
                ModeField::W => {
                    w = grid.sample(|x, r| {
                        amplitude * (k * two_pi_over_l * x[0]).cos() * (n * PI * r).sin()
                    })
                }
                ModeField::V => {
                    v[0] = grid.sample(|x, r| {
                        amplitude * (k * two_pi_over_l * x[0]).cos() * (n * PI * r).cos()
                    })
                }
            }
        }
        InitConfig::Random { amplitude, modes } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = modes as i64;
            let ky_range = if grid.d == 2 { -k..=k } else { 0..=0 };
            let mut terms = Vec::new();
            for kx in -k..=k {
                for ky in ky_range.clone() {
                    for n in 1..=modes {
                        // (field, kx, ky, n, cos coefficient, sin coefficient)
                        for f in 0..grid.d + 2 {
                            let decay = 1.0 + (kx * kx + ky * ky) as f64 + (n * n) as f64;
                            let a = rng.gen_range(-1.0..1.0) * amplitude / decay;
                            let b = rng.gen_range(-1.0..1.0) * amplitude / decay;
                            terms.push((f, kx as f64, ky as f64, n as f64, a, b));
                        }
                    }
                }
            }
            let s = 2.0 * PI / grid.length;
            for (f, kx, ky, n, a, b) in terms {
                let vertical_cos = f < grid.d;
                let add = grid.sample(|x, r| {
                    let phase = s * (kx * x[0] + ky * x[1]);
                    let vert = if vertical_cos {
                        (n * PI * r).cos()
                    } else {
                        (n * PI * r).sin()
                    };
                    (a * phase.cos() + b * phase.sin()) * vert
                });
                let target = if f < grid.d {
                    &mut v[f]
                } else if f == grid.d {
                    &mut w
                } else {
                    &mut eta
                };
                target.iter_mut().zip(add).for_each(|(t, a)| *t += a);
            }
        }
    }
    grid.zero_boundary_rows(&mut w);
    grid.zero_boundary_rows(&mut eta);
    (v, w, eta)
}

/// How a run ended.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub steps: usize,
    pub last: EnergyReport,
    /// Reason when the monitor or the stepper detected blow-up.
    pub blown_up: Option<String>,
    pub energy_csv: PathBuf,
}

impl RunSummary {
    pub fn exit_code(&self) -> i32 {
        if self.blown_up.is_some() {
            EXIT_BLOWUP
        } else {
            EXIT_OK
        }
    }
}

struct Outputs<'a> {
    dir: &'a Path,
    csv: EnergyWriter,
    grid: Grid,
    params: &'a SimParams,
}

impl Outputs<'_> {
    fn snapshot(&self, step: usize, state: &FlowState) -> Result<()> {
        let snap = Snapshot::from_state(&self.grid, state, self.params.epsilon, self.params.mu);
        write_snapshot(&self.dir.join(format!("snap_{step:06}.bin")), &snap)
    }
}

/// Runs a configuration, writing `energy.csv`, `config.txt` and snapshots
/// into `out_dir`. Progress and warnings go to `log`.
pub fn run(cfg: &RunConfig, out_dir: &Path, log: &mut dyn Write) -> Result<RunSummary> {
    cfg.validate()?;
    let grid = cfg.grid.build()?;
    let params = &cfg.params;
    let profile = cfg.profile.build(&grid, params)?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| Error::Io(format!("{}: {e}", out_dir.display())))?;
    std::fs::write(out_dir.join("config.txt"), cfg.to_text())
        .map_err(|e| Error::Io(format!("{}: {e}", out_dir.display())))?;
    for w in params.warnings(profile.max_shear(), grid.d) {
        let _ = writeln!(log, "warning: {w}");
    }

    let ws = SpectralWorkspace::new(&grid);
    let (v, w, eta) = raw_initial_data(&grid, &cfg.init, cfg.seed);
    let csv_path = out_dir.join("energy.csv");
    let mut out = Outputs {
        dir: out_dir,
        csv: EnergyWriter::create(&csv_path)?,
        grid,
        params,
    };
    let state = match prepare_initial_data(&ws, &profile, params, &v, &w, &eta) {
        Ok(s) => s,
        Err(Error::JacobianDegenerate { min_jacobian, .. }) => {
            let reason = format!("initial min jacobian {min_jacobian:.4e} below h_star");
            let raw = FlowState {
                t: 0.0,
                v,
                w,
                eta,
            };
            let last = final_report(&ws, &raw, &profile, params, &reason);
            out.csv.push(&last)?;
            out.snapshot(0, &raw)?;
            let _ = writeln!(log, "blow-up at t = 0: {reason}");
            return Ok(RunSummary {
                steps: 0,
                last,
                blown_up: Some(reason),
                energy_csv: csv_path,
            });
        }
        Err(e) => return Err(e),
    };
    drive(&ws, &profile, params, cfg, state, &mut out, log, csv_path)
}

fn final_report(
    ws: &SpectralWorkspace,
    state: &FlowState,
    profile: &StratificationProfile,
    params: &SimParams,
    reason: &str,
) -> EnergyReport {
    let mut r = energy(ws, state, profile, params);
    if !r.blown_up {
        r.blown_up = true;
        r.status = Status::BlownUp(reason.to_string());
    }
    r
}

#[allow(clippy::too_many_arguments)]
fn drive(
    ws: &SpectralWorkspace,
    profile: &StratificationProfile,
    params: &SimParams,
    cfg: &RunConfig,
    mut state: FlowState,
    out: &mut Outputs,
    log: &mut dyn Write,
    csv_path: PathBuf,
) -> Result<RunSummary> {
    let model = Model::new(ws, profile, params);
    let steps = (params.t_end / params.dt.abs()).round() as usize;
    let every = cfg.output.series_every;
    let snap_every = cfg.output.snapshot_every;
    let mut warm = None;
    let mut warned = false;
    out.snapshot(0, &state)?;
    let mut last = None;
    // A report is written once the following step succeeds, so that a step
    // failing with blow-up can relabel it instead of repeating the row.
    let mut pending: Option<EnergyReport> = None;
    for step in 0..=steps {
        if step % every == 0 || step == steps {
            let rep = energy(ws, &state, profile, params);
            if step == steps || matches!(rep.status, Status::BlownUp(_)) {
                out.csv.push(&rep)?;
            } else {
                pending = Some(rep.clone());
            }
            match &rep.status {
                Status::BlownUp(reason) => {
                    let reason = reason.clone();
                    out.snapshot(step, &state)?;
                    let _ = writeln!(log, "blow-up at t = {:.6}: {reason}", state.t);
                    return Ok(RunSummary {
                        steps: step,
                        last: rep,
                        blown_up: Some(reason),
                        energy_csv: csv_path,
                    });
                }
                Status::JacobianNearDegenerate(j) if !warned => {
                    warned = true;
                    let _ = writeln!(
                        log,
                        "warning: t = {:.6}: min jacobian {j:.4e} below 2 h_star",
                        state.t
                    );
                }
                _ => {}
            }
            last = Some(rep);
        }
        if step == steps {
            break;
        }
        state = match model.step_warm(&state, &mut warm) {
            Ok(mut next) => {
                if let Some(rep) = pending.take() {
                    out.csv.push(&rep)?;
                }
                // multiply rather than accumulate so the time column does not drift
                next.t = (step + 1) as f64 * params.dt;
                next
            }
            Err(Error::BlownUp { t, reason }) => {
                let rep = match pending.take() {
                    Some(mut r) => {
                        r.blown_up = true;
                        r.status = Status::BlownUp(reason.clone());
                        r
                    }
                    None => final_report(ws, &state, profile, params, &reason),
                };
                out.csv.push(&rep)?;
                out.snapshot(step, &state)?;
                let _ = writeln!(log, "blow-up at t = {t:.6}: {reason}");
                return Ok(RunSummary {
                    steps: step,
                    last: rep,
                    blown_up: Some(reason),
                    energy_csv: csv_path,
                });
            }
            Err(e) => {
                if let Some(rep) = pending.take() {
                    out.csv.push(&rep)?;
                }
                let _ = writeln!(log, "solver failure at t = {:.6}: {e}", state.t);
                return Err(e);
            }
        };
        if snap_every > 0 && (step + 1) % snap_every == 0 {
            out.snapshot(step + 1, &state)?;
        }
    }
    if snap_every == 0 || steps % snap_every != 0 {
        out.snapshot(steps, &state)?;
    }
    Ok(RunSummary {
        steps,
        last: last.expect("the final step always reports"),
        blown_up: None,
        energy_csv: csv_path,
    })
}
