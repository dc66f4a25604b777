use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use isopycnal::bridge::{from_eulerian, to_eulerian};
use isopycnal::diagnostics::{energy, energy_equivalence_check};
use isopycnal::domain::{DensitySpec, FlowState, Grid, ShearSpec, SimParams, StratificationProfile};
use isopycnal::io::verify::random_state;
use isopycnal::io::{RunConfig, Snapshot};
use isopycnal::spectral::SpectralWorkspace;

fn exp_profile(grid: &Grid, params: &SimParams) -> StratificationProfile {
    StratificationProfile::from_spec(&DensitySpec::Exp { n2: 1.0 }, &ShearSpec::Zero, grid, params)
        .unwrap()
}

prop_compose! {
    fn config_text()(
        nx in (3u32..7).prop_map(|p| 1usize << p),
        nr in 5usize..70,
        eps in 0.0f64..0.5,
        mu in 0.01f64..1.0,
        dt in 1e-4f64..1e-2,
        n2 in 0.1f64..3.0,
        rate in 0.0f64..0.5,
        seed in any::<u64>(),
        every in 1usize..50,
    ) -> String {
        format!(
            "grid.Nx = {nx}\ngrid.Nr = {nr}\nparams.epsilon = {eps}\nparams.mu = {mu}\n\
             dynamics.dt = {dt}\nprofile.density = exp\nprofile.n2 = {n2}\n\
             profile.shear = linear\nprofile.shear_rate = {rate}\ninit.kind = random\n\
             init.amplitude = 0.1\ninit.modes = 2\ninit.seed = {seed}\n\
             output.series_every = {every}\n"
        )
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_text_round_trips(text in config_text()) {
        let cfg = RunConfig::parse(&text).unwrap();
        let again = RunConfig::parse(&cfg.to_text()).unwrap();
        prop_assert_eq!(&cfg, &again);
        prop_assert_eq!(cfg.to_text(), again.to_text());
    }

    #[test]
    fn snapshot_round_trip_is_bit_exact(
        nx in Just(8usize),
        nr in 5usize..10,
        t in -1e3f64..1e3,
        bits in proptest::collection::vec(any::<u64>(), 3 * 8 * 9),
    ) {
        let grid = Grid::line(nx, nr).unwrap();
        let n = grid.len();
        // arbitrary bit patterns, NaN payloads included
        let field = |o: usize| -> Vec<f64> { bits[o * n..(o + 1) * n].iter().map(|&b| f64::from_bits(b)).collect() };
        let state = FlowState { t, v: vec![field(0)], w: field(1), eta: field(2) };
        let snap = Snapshot::from_state(&grid, &state, 0.1, 0.5);
        let bytes = snap.encode().unwrap();
        let back = Snapshot::decode(&bytes).unwrap();
        prop_assert_eq!(back.encode().unwrap(), bytes);
        let s = back.to_state().unwrap();
        prop_assert_eq!(s.t.to_bits(), t.to_bits());
        for (a, b) in state.fields().zip(s.fields()) {
            prop_assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn flat_energy_is_quadratic(seed in any::<u64>(), scale in 0.1f64..3.0, mu in 0.05f64..1.0) {
        let grid = Grid::line(16, 17).unwrap();
        let ws = SpectralWorkspace::new(&grid);
        let params = SimParams { epsilon: 0.0, mu, ..SimParams::default() };
        let profile = exp_profile(&grid, &params);
        let s = random_state(&grid, &mut ChaCha8Rng::seed_from_u64(seed), 0.0);
        let mut scaled = s.clone();
        for f in scaled.fields_mut() {
            f.iter_mut().for_each(|v| *v *= scale);
        }
        let e = energy(&ws, &s, &profile, &params).e;
        let es = energy(&ws, &scaled, &profile, &params).e;
        prop_assert!(e > 0.0);
        prop_assert!((es - scale * scale * e).abs() <= 1e-10 * es.abs().max(e));
    }

    #[test]
    fn energy_stays_in_its_bracket(seed in any::<u64>(), eps in 0.0f64..0.5, mu in 0.05f64..1.0) {
        let grid = Grid::line(16, 17).unwrap();
        let ws = SpectralWorkspace::new(&grid);
        let params = SimParams { epsilon: eps, mu, ..SimParams::default() };
        let profile = exp_profile(&grid, &params);
        let s = random_state(&grid, &mut ChaCha8Rng::seed_from_u64(seed), eps);
        let eq = energy_equivalence_check(&ws, &s, &profile, &params).unwrap();
        prop_assert!(eq.holds(), "{:?}", eq);
    }

    #[test]
    fn eulerian_density_increases_with_depth(seed in any::<u64>(), eps in 0.01f64..0.3) {
        let grid = Grid::line(16, 33).unwrap();
        let params = SimParams { epsilon: eps, ..SimParams::default() };
        let profile = exp_profile(&grid, &params);
        let s = random_state(&grid, &mut ChaCha8Rng::seed_from_u64(seed), eps);
        let e = to_eulerian(&grid, &s, &profile, &params, 33).unwrap();
        let m = grid.plane();
        for k in 1..grid.nr {
            for j in 0..m {
                // rows run downward in z, so density must not decrease
                prop_assert!(e.rho[k * m + j] >= e.rho[(k - 1) * m + j]);
            }
        }
        let back = from_eulerian(&e, &profile, &params, &grid).unwrap();
        // interpolation error on 33 levels for modes up to n = 3, not rounding
        for (a, b) in s.fields().zip(back.fields()) {
            let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            let size: f64 = a.iter().fold(0.0, |m, v| m.max(v.abs()));
            prop_assert!(d <= 1e-2 * size.max(1.0), "{} vs {}", d, size);
        }
    }
}

#[test]
fn eulerian_snapshot_round_trips() {
    let grid = Grid::line(8, 9).unwrap();
    let params = SimParams { epsilon: 0.2, ..SimParams::default() };
    let profile = exp_profile(&grid, &params);
    let mut s = random_state(&grid, &mut ChaCha8Rng::seed_from_u64(3), 0.2);
    s.t = 1.25;
    let e = to_eulerian(&grid, &s, &profile, &params, 13).unwrap();
    let snap = Snapshot::from_eulerian(&e, params.mu);
    let back = Snapshot::decode(&snap.encode().unwrap()).unwrap();
    assert_eq!(back.to_eulerian().unwrap(), e);
    assert!(back.to_state().is_err());
}
