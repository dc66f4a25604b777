use std::path::Path;
use std::process::{Command, Output};

use isopycnal::io::series::read_energy_csv;
use isopycnal::io::read_snapshot;

fn isopyc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isopyc"))
        .args(args)
        .env_remove("ISOPYC_THREADS")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const EQUILIBRIUM: &str = "\
grid.Nx = 16
grid.Nr = 17
profile.shear = linear
profile.shear_rate = 0.5
dynamics.t_end = 1
dynamics.dt = 0.01
";

// min(1+eps h) is driven below the h_star floor by a strong vertical-velocity mode.
const BLOW_UP: &str = "\
grid.Nx = 16
grid.Nr = 17
params.epsilon = 0.5
params.mu = 1
profile.density = exp
profile.n2 = 1
init.kind = mode
init.field = w
init.amplitude = 5.0
init.kx = 1
init.n = 1
dynamics.t_end = 10
dynamics.dt = 0.005
output.series_every = 1
";

#[test]
fn equilibrium_run_exits_cleanly_with_zero_energy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "eq.txt", EQUILIBRIUM);
    let out_dir = dir.path().join("out");
    let out = isopyc(&["run", "--config", &cfg, "--output", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_energy_csv(&out_dir.join("energy.csv")).unwrap();
    assert_eq!(rows.last().unwrap().t, 1.0);
    for r in &rows {
        assert!(r.e.abs() < 1e-20 && r.e0.abs() < 1e-20, "{r:?}");
        assert_eq!(r.status, "healthy");
    }
    assert!(out_dir.join("config.txt").exists());
    let snap = read_snapshot(&out_dir.join("snap_000100.bin")).unwrap();
    assert_eq!(snap.t, 1.0);
}

#[test]
fn thread_count_does_not_change_the_series() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "rand.txt",
        "grid.Nx = 16\ngrid.Nr = 17\nparams.epsilon = 0.1\ninit.kind = random\n\
         init.amplitude = 0.05\ninit.modes = 2\ndynamics.t_end = 0.1\ndynamics.dt = 0.01\n",
    );
    let mut series = Vec::new();
    for threads in ["1", "3"] {
        let out_dir = dir.path().join(format!("t{threads}"));
        let out = isopyc(&[
            "run",
            "--config",
            &cfg,
            "--threads",
            threads,
            "--seed",
            "5",
            "--output",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        series.push(std::fs::read(out_dir.join("energy.csv")).unwrap());
    }
    assert_eq!(series[0], series[1]);
}

#[test]
fn blow_up_exits_3_with_a_final_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "blow.txt", BLOW_UP);
    let out_dir = dir.path().join("out");
    let out = isopyc(&["run", "--config", &cfg, "--output", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("blow-up at t ="));
    let rows = read_energy_csv(&out_dir.join("energy.csv")).unwrap();
    let last = rows.last().unwrap();
    assert_eq!(last.status, "blown-up");
    assert!(last.t < 10.0);
    assert!(last.min_jacobian < 0.2, "{last:?}");
    assert!(rows.windows(2).all(|w| w[0].t < w[1].t));
}

#[test]
fn malformed_key_exits_1_naming_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.txt", "grid.Nx = 16\ngrid.Nq = 3\n");
    let out = isopyc(&["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid.Nq"));

    let cfg = write(dir.path(), "bad2.txt", "params.mu = lots\n");
    let out = isopyc(&["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("params.mu"));
}

#[test]
fn unknown_suite_exits_1() {
    let out = isopyc(&["verify", "vorticity"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("vorticity"));
}

#[test]
fn identities_pass_on_defaults() {
    let out = isopyc(&["verify", "identities"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert!(stdout.contains("PASS") && !stdout.contains("FAIL"));
}

#[test]
fn elliptic_reports_slopes_near_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "n16.txt", "grid.Nx = 16\n");
    let out = isopyc(&["verify", "elliptic", "--config", &cfg]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert!(stdout.lines().any(|l| l.contains("slope") && l.contains("PASS")));
}

#[test]
fn failed_check_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    // The round trip cannot beat rounding.
    let cfg = write(dir.path(), "strict.txt", "grid.Nx = 16\nverify.roundtrip_tol = 1e-30\n");
    let out = isopyc(&["verify", "bridge", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stdout));
}
