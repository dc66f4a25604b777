//! Run configuration in a flat `section.key = value` text format.
//!
//! Lines are `key = value`; `#` starts a comment. Every key is typed, unknown
//! keys and keys that do not apply to the chosen variant are rejected, and
//! [`RunConfig::to_text`] writes a form that parses back to the same value.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::domain::{DensitySpec, Grid, ShearSpec, SimParams, StratificationProfile};
use crate::error::{Error, Result};

/// Horizontal and vertical resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub d: usize,
    pub nx: usize,
    pub length: f64,
    pub nr: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            d: 1,
            nx: 64,
            length: 2.0 * std::f64::consts::PI,
            nr: 33,
        }
    }
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid> {
        Grid::new(self.d, self.nx, self.length, self.nr)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DensityConfig {
    Named(DensitySpec),
    /// CSV with header `r,rho[,vbar...]`; overrides the shear block.
    Table(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileConfig {
    pub density: DensityConfig,
    pub shear: ShearSpec,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            density: DensityConfig::Named(DensitySpec::Exp { n2: 1.0 }),
            shear: ShearSpec::Zero,
        }
    }
}

impl ProfileConfig {
    pub fn build(&self, grid: &Grid, params: &SimParams) -> Result<StratificationProfile> {
        match &self.density {
            DensityConfig::Named(spec) => {
                StratificationProfile::from_spec(spec, &self.shear, grid, params)
            }
            DensityConfig::Table(path) => {
                let (r, rho, vbar) = read_profile_table(path)?;
                StratificationProfile::from_table(&r, &rho, &vbar, grid, params)
            }
        }
    }
}

/// Reads the columns `r, rho, vbar...` of a profile table.
pub fn read_profile_table(path: &Path) -> Result<(Vec<f64>, Vec<f64>, Vec<Vec<f64>>)> {
    let key = "profile.table";
    let err = |reason: String| Error::Config {
        key: key.into(),
        reason: format!("{}: {reason}", path.display()),
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| err(e.to_string()))?;
    let width = reader.headers().map_err(|e| err(e.to_string()))?.len();
    if width < 2 {
        return Err(err("need at least the columns r, rho".into()));
    }
    let mut cols = vec![Vec::new(); width];
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| err(e.to_string()))?;
        for (c, cell) in rec.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| err(format!("row {}: `{cell}` is not a number", line + 2)))?;
            cols[c].push(v);
        }
    }
    let vbar = cols.split_off(2);
    let rho = cols.pop().unwrap_or_default();
    let r = cols.pop().unwrap_or_default();
    Ok((r, rho, vbar))
}

/// Which field an initial mode is placed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeField {
    Eta,
    W,
    V,
}

/// Initial data before projection onto the constraint.
#[derive(Debug, Clone, PartialEq)]
pub enum InitConfig {
    Equilibrium,
    /// `amplitude * cos(kx x) * sin(n pi r)` in one field (`cos n pi r` for `V`).
    Mode {
        field: ModeField,
        amplitude: f64,
        kx: u32,
        n: u32,
    },
    /// Random low modes in every field, `|k| <= modes`, vertical modes `1..=modes`.
    Random { amplitude: f64, modes: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Steps between snapshots; 0 writes only the initial and final states.
    pub snapshot_every: usize,
    /// Steps between energy rows.
    pub series_every: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            snapshot_every: 0,
            series_every: 10,
        }
    }
}

/// Suites run by `verify` and the tolerances they use.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub suites: Vec<String>,
    /// Allowed deviation of convergence slopes from 2.
    pub slope_tol: f64,
    /// Relative tolerance on wave frequencies.
    pub freq_tol: f64,
    /// Allowed growth factor of the divergence residual.
    pub div_factor: f64,
    /// Relative L2 tolerance of the bridge round trip.
    pub roundtrip_tol: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            suites: SUITES.iter().map(|s| s.to_string()).collect(),
            slope_tol: 0.2,
            freq_tol: 0.01,
            div_factor: 10.0,
            roundtrip_tol: 1e-6,
        }
    }
}

/// Names accepted by `verify`.
pub const SUITES: [&str; 7] = [
    "elliptic",
    "identities",
    "waves",
    "divergence",
    "bridge",
    "energy",
    "sweep",
];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub params: SimParams,
    pub profile: ProfileConfig,
    pub init: InitConfig,
    pub seed: u64,
    pub output: OutputConfig,
    pub verify: VerifyConfig,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig::Equilibrium
    }
}

fn config_err(key: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        reason: reason.into(),
    }
}

/// Key/value pairs still waiting to be consumed.
struct Entries(BTreeMap<String, (usize, String)>);

impl Entries {
    fn take<T: FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        match self.0.remove(key) {
            None => Ok(default),
            Some((line, raw)) => raw.parse().map_err(|_| {
                config_err(
                    key,
                    format!(
                        "line {line}: cannot parse `{raw}` as {}",
                        std::any::type_name::<T>()
                    ),
                )
            }),
        }
    }

    fn take_str(&mut self, key: &str, default: &str) -> String {
        self.0
            .remove(key)
            .map(|(_, v)| v)
            .unwrap_or_else(|| default.to_string())
    }

    fn finish(self) -> Result<()> {
        match self.0.into_iter().next() {
            None => Ok(()),
            Some((key, (line, _))) => Err(config_err(
                &key,
                format!("line {line}: unknown key, or not used by the selected variant"),
            )),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(config_err(line, format!("line {}: expected `key = value`", i + 1)));
            };
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || !k.contains('.') {
                return Err(config_err(k, format!("line {}: keys look like `section.name`", i + 1)));
            }
            if map.insert(k.to_string(), (i + 1, v.to_string())).is_some() {
                return Err(config_err(k, format!("line {}: duplicate key", i + 1)));
            }
        }
        let mut e = Entries(map);
        let cfg = Self::from_entries(&mut e)?;
        e.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn from_entries(e: &mut Entries) -> Result<Self> {
        let g0 = GridConfig::default();
        let grid = GridConfig {
            d: e.take("grid.d", g0.d)?,
            nx: e.take("grid.Nx", g0.nx)?,
            length: e.take("grid.L", g0.length)?,
            nr: e.take("grid.Nr", g0.nr)?,
        };

        let p0 = SimParams::default();
        let params = SimParams {
            epsilon: e.take("params.epsilon", p0.epsilon)?,
            mu: e.take("params.mu", p0.mu)?,
            h_star: e.take("params.h_star", p0.h_star)?,
            h_sup: e.take("params.h_sup", p0.h_sup)?,
            c_star: e.take("params.c_star", p0.c_star)?,
            rho_min: e.take("params.rho_min", p0.rho_min)?,
            rho_max: e.take("params.rho_max", p0.rho_max)?,
            s_diag: e.take("params.s_diag", p0.s_diag)?,
            k_diag: e.take("params.k_diag", p0.k_diag)?,
            norm_ceiling: e.take("params.norm_ceiling", p0.norm_ceiling)?,
            dt: e.take("dynamics.dt", p0.dt)?,
            t_end: e.take("dynamics.t_end", p0.t_end)?,
            cfl: e.take("dynamics.cfl", p0.cfl)?,
            delta: e.take("dynamics.delta", p0.delta)?,
            pressure_tol: e.take("pressure.tol", p0.pressure_tol)?,
            pressure_max_iter: e.take("pressure.max_iter", p0.pressure_max_iter)?,
            tol_compat: e.take("pressure.tol_compat", p0.tol_compat)?,
        };

        let density = match e.take_str("profile.density", "exp").as_str() {
            "exp" => DensityConfig::Named(DensitySpec::Exp {
                n2: e.take("profile.n2", 1.0)?,
            }),
            "linear" => DensityConfig::Named(DensitySpec::Linear {
                slope: e.take("profile.slope", 1.0)?,
            }),
            "tanh-pycnocline" => DensityConfig::Named(DensitySpec::TanhPycnocline {
                slope: e.take("profile.slope", 0.2)?,
                amplitude: e.take("profile.amplitude", 0.5)?,
                center: e.take("profile.center", 0.5)?,
                width: e.take("profile.width", 0.1)?,
            }),
            "boussinesq" => DensityConfig::Named(DensitySpec::Boussinesq {
                n2: e.take("profile.n2", 1.0)?,
            }),
            "table" => {
                let path = e.take_str("profile.table", "");
                if path.is_empty() {
                    return Err(config_err("profile.table", "required when profile.density = table"));
                }
                DensityConfig::Table(PathBuf::from(path))
            }
            other => {
                return Err(config_err(
                    "profile.density",
                    format!("`{other}`; expected exp, linear, tanh-pycnocline, boussinesq or table"),
                ))
            }
        };
        let shear = match e.take_str("profile.shear", "zero").as_str() {
            "zero" => ShearSpec::Zero,
            "linear" => ShearSpec::Linear {
                rate: e.take("profile.shear_rate", 0.0)?,
            },
            "tanh" => ShearSpec::Tanh {
                amplitude: e.take("profile.shear_amplitude", 0.0)?,
                center: e.take("profile.shear_center", 0.5)?,
                width: e.take("profile.shear_width", 0.1)?,
            },
            other => {
                return Err(config_err(
                    "profile.shear",
                    format!("`{other}`; expected zero, linear or tanh"),
                ))
            }
        };

        let init = match e.take_str("init.kind", "equilibrium").as_str() {
            "equilibrium" => InitConfig::Equilibrium,
            "mode" => InitConfig::Mode {
                field: match e.take_str("init.field", "eta").as_str() {
                    "eta" => ModeField::Eta,
                    "w" => ModeField::W,
                    "v" => ModeField::V,
                    other => {
                        return Err(config_err("init.field", format!("`{other}`; expected eta, w or v")))
                    }
                },
                amplitude: e.take("init.amplitude", 0.01)?,
                kx: e.take("init.kx", 1)?,
                n: e.take("init.n", 1)?,
            },
            "random" => InitConfig::Random {
                amplitude: e.take("init.amplitude", 0.01)?,
                modes: e.take("init.modes", 3)?,
            },
            other => {
                return Err(config_err(
                    "init.kind",
                    format!("`{other}`; expected equilibrium, mode or random"),
                ))
            }
        };
        let seed = e.take("init.seed", 0)?;

        let o0 = OutputConfig::default();
        let output = OutputConfig {
            dir: PathBuf::from(e.take_str("output.dir", &o0.dir.to_string_lossy())),
            snapshot_every: {
                // `dynamics.snapshot_every` is accepted as an alias.
                let alias = e.take("dynamics.snapshot_every", o0.snapshot_every)?;
                e.take("output.snapshot_every", alias)?
            },
            series_every: e.take("output.series_every", o0.series_every)?,
        };

        let v0 = VerifyConfig::default();
        let suites = e.take_str("verify.suites", &v0.suites.join(","));
        let verify = VerifyConfig {
            suites: suites
                .split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect(),
            slope_tol: e.take("verify.slope_tol", v0.slope_tol)?,
            freq_tol: e.take("verify.freq_tol", v0.freq_tol)?,
            div_factor: e.take("verify.div_factor", v0.div_factor)?,
            roundtrip_tol: e.take("verify.roundtrip_tol", v0.roundtrip_tol)?,
        };

        Ok(Self {
            grid,
            params,
            profile: ProfileConfig { density, shear },
            init,
            seed,
            output,
            verify,
        })
    }

    /// Checks ranges; errors name the offending key.
    pub fn validate(&self) -> Result<()> {
        let rekey = |prefix: &str, e: Error| match e {
            Error::InvalidParameter { key, reason } => {
                let section = match key.as_str() {
                    "dt" | "t_end" | "cfl" | "delta" => "dynamics",
                    "pressure.tol" => return config_err(&key, reason),
                    _ => prefix,
                };
                config_err(&format!("{section}.{key}"), reason)
            }
            Error::InvalidGrid(reason) => config_err("grid", reason),
            other => other,
        };
        self.grid.build().map_err(|e| rekey("grid", e))?;
        self.params.validate().map_err(|e| rekey("params", e))?;
        if !(self.params.t_end >= 0.0) {
            return Err(config_err("dynamics.t_end", "must be >= 0"));
        }
        if self.output.series_every == 0 {
            return Err(config_err("output.series_every", "must be >= 1"));
        }
        for s in &self.verify.suites {
            if !SUITES.contains(&s.as_str()) {
                return Err(config_err("verify.suites", format!("unknown suite `{s}`")));
            }
        }
        Ok(())
    }

    /// Canonical text form; `parse(to_text(c)) == c`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        let g = &self.grid;
        put("grid.d", g.d.to_string());
        put("grid.Nx", g.nx.to_string());
        put("grid.L", format!("{:?}", g.length));
        put("grid.Nr", g.nr.to_string());

        let p = &self.params;
        put("params.epsilon", format!("{:?}", p.epsilon));
        put("params.mu", format!("{:?}", p.mu));
        put("params.h_star", format!("{:?}", p.h_star));
        put("params.h_sup", format!("{:?}", p.h_sup));
        put("params.c_star", format!("{:?}", p.c_star));
        put("params.rho_min", format!("{:?}", p.rho_min));
        put("params.rho_max", format!("{:?}", p.rho_max));
        put("params.s_diag", p.s_diag.to_string());
        put("params.k_diag", p.k_diag.to_string());
        put("params.norm_ceiling", format!("{:?}", p.norm_ceiling));
        put("dynamics.dt", format!("{:?}", p.dt));
        put("dynamics.t_end", format!("{:?}", p.t_end));
        put("dynamics.cfl", format!("{:?}", p.cfl));
        put("dynamics.delta", format!("{:?}", p.delta));
        put("pressure.tol", format!("{:?}", p.pressure_tol));
        put("pressure.max_iter", p.pressure_max_iter.to_string());
        put("pressure.tol_compat", format!("{:?}", p.tol_compat));

        match &self.profile.density {
            DensityConfig::Named(DensitySpec::Exp { n2 }) => {
                put("profile.density", "exp".into());
                put("profile.n2", format!("{n2:?}"));
            }
            DensityConfig::Named(DensitySpec::Linear { slope }) => {
                put("profile.density", "linear".into());
                put("profile.slope", format!("{slope:?}"));
            }
            DensityConfig::Named(DensitySpec::TanhPycnocline {
                slope,
                amplitude,
                center,
                width,
            }) => {
                put("profile.density", "tanh-pycnocline".into());
                put("profile.slope", format!("{slope:?}"));
                put("profile.amplitude", format!("{amplitude:?}"));
                put("profile.center", format!("{center:?}"));
                put("profile.width", format!("{width:?}"));
            }
            DensityConfig::Named(DensitySpec::Boussinesq { n2 }) => {
                put("profile.density", "boussinesq".into());
                put("profile.n2", format!("{n2:?}"));
            }
            DensityConfig::Table(path) => {
                put("profile.density", "table".into());
                put("profile.table", path.to_string_lossy().into_owned());
            }
        }
        match &self.profile.shear {
            ShearSpec::Zero => put("profile.shear", "zero".into()),
            ShearSpec::Linear { rate } => {
                put("profile.shear", "linear".into());
                put("profile.shear_rate", format!("{rate:?}"));
            }
            ShearSpec::Tanh {
                amplitude,
                center,
                width,
            } => {
                put("profile.shear", "tanh".into());
                put("profile.shear_amplitude", format!("{amplitude:?}"));
                put("profile.shear_center", format!("{center:?}"));
                put("profile.shear_width", format!("{width:?}"));
            }
        }

        match &self.init {
            InitConfig::Equilibrium => put("init.kind", "equilibrium".into()),
            InitConfig::Mode {
                field,
                amplitude,
                kx,
                n,
            } => {
                put("init.kind", "mode".into());
                let f = match field {
                    ModeField::Eta => "eta",
                    ModeField::W => "w",
                    ModeField::V => "v",
                };
                put("init.field", f.into());
                put("init.amplitude", format!("{amplitude:?}"));
                put("init.kx", kx.to_string());
                put("init.n", n.to_string());
            }
            InitConfig::Random { amplitude, modes } => {
                put("init.kind", "random".into());
                put("init.amplitude", format!("{amplitude:?}"));
                put("init.modes", modes.to_string());
            }
        }
        put("init.seed", self.seed.to_string());

        let o = &self.output;
        put("output.dir", o.dir.to_string_lossy().into_owned());
        put("output.snapshot_every", o.snapshot_every.to_string());
        put("output.series_every", o.series_every.to_string());

        let v = &self.verify;
        put("verify.suites", v.suites.join(","));
        put("verify.slope_tol", format!("{:?}", v.slope_tol));
        put("verify.freq_tol", format!("{:?}", v.freq_tol));
        put("verify.div_factor", format!("{:?}", v.div_factor));
        put("verify.roundtrip_tol", format!("{:?}", v.roundtrip_tol));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let c = RunConfig::parse("# nothing\n\n").unwrap();
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn canonical_text_round_trips() {
        let text = "grid.Nx = 32\nparams.epsilon = 0.3\nprofile.density = tanh-pycnocline\n\
                    profile.shear = linear\nprofile.shear_rate = 0.25\ninit.kind = mode\n\
                    init.field = w\ninit.kx = 2\nverify.suites = bridge,waves\n";
        let c = RunConfig::parse(text).unwrap();
        assert_eq!(c.grid.nx, 32);
        assert_eq!(c.verify.suites, vec!["bridge", "waves"]);
        assert_eq!(RunConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::parse("grid.Nx = 32\ngrid.Nq = 4\n").unwrap_err();
        match err {
            Error::Config { key, .. } => assert_eq!(key, "grid.Nq"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn key_of_another_variant_is_rejected() {
        let err = RunConfig::parse("profile.density = exp\nprofile.width = 0.2\n").unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "profile.width"));
    }

    #[test]
    fn bad_values_name_the_key() {
        for (text, want) in [
            ("grid.Nx = lots", "grid.Nx"),
            ("params.mu = 0", "params.mu"),
            ("dynamics.dt = 0", "dynamics.dt"),
            ("grid.Nx = 12", "grid"),
            ("verify.suites = elliptic,nope", "verify.suites"),
            ("grid.Nx = 8\ngrid.Nx = 16", "grid.Nx"),
        ] {
            match RunConfig::parse(text) {
                Err(Error::Config { key, .. }) => assert_eq!(key, want, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn reads_profile_table() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let mut text = String::from("r,rho,vbar\n");
        for k in 0..=10 {
            let r = k as f64 / 10.0;
            text += &format!("{r},{},{}\n", 1.0 + r, 0.1 * r);
        }
        std::fs::write(&path, text).unwrap();
        let cfg = RunConfig::parse(&format!(
            "profile.density = table\nprofile.table = {}\n",
            path.display()
        ))
        .unwrap();
        let grid = cfg.grid.build().unwrap();
        let prof = cfg.profile.build(&grid, &cfg.params).unwrap();
        assert!((prof.rho[grid.nr - 1] - 2.0).abs() < 1e-12);
        assert!((prof.vbar_prime[0][5] - 0.1).abs() < 1e-10);
    }
}
