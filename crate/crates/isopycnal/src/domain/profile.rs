use std::fmt;
use std::sync::Arc;

use super::grid::Grid;
use super::params::SimParams;
use crate::error::{Error, Result};
use crate::interp::MonotoneCubic;

type Func = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A function of r with optional closed-form first and second derivatives.
///
/// Missing derivatives are filled in by fourth-order finite differences that
/// only sample inside `[0, 1]`.
#[derive(Clone)]
pub struct Closure {
    f: Func,
    df: Option<Func>,
    d2f: Option<Func>,
}

impl fmt::Debug for Closure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Closure")
            .field("df", &self.df.is_some())
            .field("d2f", &self.d2f.is_some())
            .finish()
    }
}

impl Closure {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            f: Arc::new(f),
            df: None,
            d2f: None,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_| c)
            .with_derivative(|_| 0.0)
            .with_second(|_| 0.0)
    }

    pub fn with_derivative(mut self, df: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.df = Some(Arc::new(df));
        self
    }

    pub fn with_second(mut self, d2f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.d2f = Some(Arc::new(d2f));
        self
    }

    pub fn eval(&self, r: f64) -> f64 {
        (self.f)(r)
    }

    pub fn deriv(&self, r: f64) -> f64 {
        match &self.df {
            Some(df) => df(r),
            None => first_difference(&*self.f, r, 2e-3),
        }
    }

    pub fn second(&self, r: f64) -> f64 {
        match (&self.d2f, &self.df) {
            (Some(d2f), _) => d2f(r),
            (None, Some(df)) => first_difference(&**df, r, 2e-3),
            (None, None) => second_difference(&*self.f, r, 1e-2),
        }
    }
}

fn first_difference(f: &dyn Fn(f64) -> f64, r: f64, h: f64) -> f64 {
    if r - 2.0 * h >= 0.0 && r + 2.0 * h <= 1.0 {
        (f(r - 2.0 * h) - 8.0 * f(r - h) + 8.0 * f(r + h) - f(r + 2.0 * h)) / (12.0 * h)
    } else {
        let h = if r + 2.0 * h > 1.0 { -h } else { h };
        let v: Vec<f64> = (0..5).map(|i| f(r + i as f64 * h)).collect();
        (-25.0 * v[0] + 48.0 * v[1] - 36.0 * v[2] + 16.0 * v[3] - 3.0 * v[4]) / (12.0 * h)
    }
}

fn second_difference(f: &dyn Fn(f64) -> f64, r: f64, h: f64) -> f64 {
    if r - 2.0 * h >= 0.0 && r + 2.0 * h <= 1.0 {
        (-f(r - 2.0 * h) + 16.0 * f(r - h) - 30.0 * f(r) + 16.0 * f(r + h) - f(r + 2.0 * h))
            / (12.0 * h * h)
    } else {
        let h = if r + 2.0 * h > 1.0 { -h } else { h };
        let v: Vec<f64> = (0..6).map(|i| f(r + i as f64 * h)).collect();
        (45.0 * v[0] - 154.0 * v[1] + 214.0 * v[2] - 156.0 * v[3] + 61.0 * v[4] - 10.0 * v[5])
            / (12.0 * h * h)
    }
}

/// How the buoyancy depends on the displacement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BuoyancyLaw {
    /// `b = (1 - rho(r - eps eta) / rho(r)) / eps`, the full nonlinear law.
    Full,
    /// `b = N^2 eta` with constant `N^2`, momentum density `rho0`.
    Linear { rho0: f64, n2: f64 },
}

/// Named density profiles.
#[derive(Debug, Clone, PartialEq)]
pub enum DensitySpec {
    /// `rho = exp(n2 r)`.
    Exp { n2: f64 },
    /// `rho = 1 + slope r`.
    Linear { slope: f64 },
    /// Linear background plus a tanh step, normalized so that `rho(0) = 1`.
    TanhPycnocline {
        slope: f64,
        amplitude: f64,
        center: f64,
        width: f64,
    },
    /// Constant momentum density 1 with linear buoyancy `b = n2 eta`.
    Boussinesq { n2: f64 },
}

/// Named background shears along the first horizontal axis.
#[derive(Debug, Clone, PartialEq)]
pub enum ShearSpec {
    Zero,
    /// `V = rate (r - 1/2)`.
    Linear {
        rate: f64,
    },
    /// `V = amplitude tanh((r - center) / width)`.
    Tanh {
        amplitude: f64,
        center: f64,
        width: f64,
    },
}

impl DensitySpec {
    pub fn closure(&self) -> Closure {
        match *self {
            DensitySpec::Exp { n2 } => Closure::new(move |r| (n2 * r).exp())
                .with_derivative(move |r| n2 * (n2 * r).exp())
                .with_second(move |r| n2 * n2 * (n2 * r).exp()),
            DensitySpec::Linear { slope } => Closure::new(move |r| 1.0 + slope * r)
                .with_derivative(move |_| slope)
                .with_second(|_| 0.0),
            DensitySpec::TanhPycnocline {
                slope,
                amplitude,
                center,
                width,
            } => {
                let t0 = (center / width).tanh();
                Closure::new(move |r| {
                    1.0 + slope * r + amplitude * (((r - center) / width).tanh() + t0)
                })
                .with_derivative(move |r| {
                    let t = ((r - center) / width).tanh();
                    slope + amplitude / width * (1.0 - t * t)
                })
                .with_second(move |r| {
                    let t = ((r - center) / width).tanh();
                    -2.0 * amplitude / (width * width) * t * (1.0 - t * t)
                })
            }
            DensitySpec::Boussinesq { .. } => Closure::constant(1.0),
        }
    }
}

impl ShearSpec {
    pub fn closure(&self) -> Closure {
        match *self {
            ShearSpec::Zero => Closure::constant(0.0),
            ShearSpec::Linear { rate } => Closure::new(move |r| rate * (r - 0.5))
                .with_derivative(move |_| rate)
                .with_second(|_| 0.0),
            ShearSpec::Tanh {
                amplitude,
                center,
                width,
            } => Closure::new(move |r| amplitude * ((r - center) / width).tanh())
                .with_derivative(move |r| {
                    let t = ((r - center) / width).tanh();
                    amplitude / width * (1.0 - t * t)
                })
                .with_second(move |r| {
                    let t = ((r - center) / width).tanh();
                    -2.0 * amplitude / (width * width) * t * (1.0 - t * t)
                }),
        }
    }
}

/// Equilibrium stratification `rho(r)` and background shear `V(r)`.
///
/// `rho_prime` is the stratification that enters the energy and the
/// stability check. In the Boussinesq variant the momentum density is the
/// constant `rho0` while `rho_prime = rho0 N^2`, so that `N^2 = rho'/rho` still holds.
#[derive(Debug, Clone)]
pub struct StratificationProfile {
    pub rho: Vec<f64>,
    pub rho_prime: Vec<f64>,
    pub rho_second: Vec<f64>,
    /// `vbar[c][k]`: component `c` at level `k`.
    pub vbar: Vec<Vec<f64>>,
    pub vbar_prime: Vec<Vec<f64>>,
    pub law: BuoyancyLaw,
    density: Closure,
    shear: Vec<Closure>,
    nr: usize,
}

impl StratificationProfile {
    /// Samples the closures on the grid and checks stability and non-cavitation.
    ///
    /// `shear` holds one closure per horizontal component; missing
    /// components are zero.
    pub fn build(
        density: Closure,
        shear: Vec<Closure>,
        grid: &Grid,
        params: &SimParams,
    ) -> Result<Self> {
        Self::assemble(density, shear, BuoyancyLaw::Full, grid, params)
    }

    pub fn from_spec(
        density: &DensitySpec,
        shear: &ShearSpec,
        grid: &Grid,
        params: &SimParams,
    ) -> Result<Self> {
        let law = match *density {
            DensitySpec::Boussinesq { n2 } => BuoyancyLaw::Linear { rho0: 1.0, n2 },
            _ => BuoyancyLaw::Full,
        };
        Self::assemble(density.closure(), vec![shear.closure()], law, grid, params)
    }

    /// Profile from sampled columns `r, rho, vbar...`.
    pub fn from_table(
        r: &[f64],
        rho: &[f64],
        vbar: &[Vec<f64>],
        grid: &Grid,
        params: &SimParams,
    ) -> Result<Self> {
        let table = |ys: &[f64]| -> Result<Closure> {
            let c = MonotoneCubic::new(r.to_vec(), ys.to_vec())?;
            let c2 = c.clone();
            Ok(
                Closure::new(move |t| c.eval(t.clamp(c.lo(), c.hi())).unwrap_or(f64::NAN))
                    .with_derivative(move |t| {
                        c2.deriv(t.clamp(c2.lo(), c2.hi())).unwrap_or(f64::NAN)
                    }),
            )
        };
        if r.first().copied() != Some(0.0) || r.last().copied() != Some(1.0) {
            return Err(Error::InvalidParameter {
                key: "profile.csv".into(),
                reason: "r column must run from 0 to 1".into(),
            });
        }
        let density = table(rho)?;
        let shear = vbar.iter().map(|v| table(v)).collect::<Result<Vec<_>>>()?;
        Self::assemble(density, shear, BuoyancyLaw::Full, grid, params)
    }

    fn assemble(
        density: Closure,
        mut shear: Vec<Closure>,
        law: BuoyancyLaw,
        grid: &Grid,
        params: &SimParams,
    ) -> Result<Self> {
        if shear.len() > grid.d {
            return Err(Error::InvalidParameter {
                key: "profile.shear".into(),
                reason: format!("{} components for d = {}", shear.len(), grid.d),
            });
        }
        while shear.len() < grid.d {
            shear.push(Closure::constant(0.0));
        }
        let rs: Vec<f64> = (0..grid.nr).map(|k| grid.r(k)).collect();
        let rho: Vec<f64> = rs.iter().map(|&r| density.eval(r)).collect();
        let (rho_prime, rho_second): (Vec<f64>, Vec<f64>) = match law {
            BuoyancyLaw::Full => (
                rs.iter().map(|&r| density.deriv(r)).collect(),
                rs.iter().map(|&r| density.second(r)).collect(),
            ),
            BuoyancyLaw::Linear { rho0, n2 } => (vec![rho0 * n2; grid.nr], vec![0.0; grid.nr]),
        };
        for (k, &v) in rho.iter().enumerate() {
            if !(v >= params.rho_min && v <= params.rho_max) {
                return Err(Error::CavitationViolation {
                    rho: v,
                    r: rs[k],
                    rho_min: params.rho_min,
                    rho_max: params.rho_max,
                });
            }
        }
        for (k, &v) in rho_prime.iter().enumerate() {
            if !(v >= params.c_star) {
                return Err(Error::StabilityViolation {
                    min_rho_prime: v,
                    c_star: params.c_star,
                    r: rs[k],
                });
            }
        }
        let vbar = shear
            .iter()
            .map(|c| rs.iter().map(|&r| c.eval(r)).collect())
            .collect();
        let vbar_prime = shear
            .iter()
            .map(|c| rs.iter().map(|&r| c.deriv(r)).collect())
            .collect();
        Ok(Self {
            rho,
            rho_prime,
            rho_second,
            vbar,
            vbar_prime,
            law,
            density,
            shear,
            nr: grid.nr,
        })
    }

    pub fn nr(&self) -> usize {
        self.nr
    }

    pub fn d(&self) -> usize {
        self.vbar.len()
    }

    pub fn is_boussinesq(&self) -> bool {
        matches!(self.law, BuoyancyLaw::Linear { .. })
    }

    /// Momentum density at an arbitrary level.
    pub fn rho_at(&self, r: f64) -> f64 {
        self.density.eval(r)
    }

    /// Density carried by the level `r` when the isopycnals are mapped to
    /// physical depth. Equals `rho_at` except in the Boussinesq variant,
    /// where it is the linear profile `rho0 (1 + N^2 r)`.
    pub fn label_density_at(&self, r: f64) -> f64 {
        match self.law {
            BuoyancyLaw::Full => self.density.eval(r),
            BuoyancyLaw::Linear { rho0, n2 } => rho0 * (1.0 + n2 * r),
        }
    }

    pub fn label_density_prime_at(&self, r: f64) -> f64 {
        match self.law {
            BuoyancyLaw::Full => self.density.deriv(r),
            BuoyancyLaw::Linear { rho0, n2 } => rho0 * n2,
        }
    }

    pub fn vbar_at(&self, c: usize, r: f64) -> f64 {
        self.shear[c].eval(r)
    }

    pub fn vbar_prime_at(&self, c: usize, r: f64) -> f64 {
        self.shear[c].deriv(r)
    }

    pub fn max_shear(&self) -> f64 {
        (0..self.nr)
            .map(|k| {
                self.vbar_prime
                    .iter()
                    .map(|v| v[k] * v[k])
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    pub fn has_shear(&self) -> bool {
        self.vbar.iter().flatten().any(|&v| v != 0.0)
    }
}

/// `N^2 = rho' / rho` on the r-grid.
pub fn brunt_vaisala(profile: &StratificationProfile) -> Vec<f64> {
    profile
        .rho_prime
        .iter()
        .zip(&profile.rho)
        .map(|(a, b)| a / b)
        .collect()
}

/// `inf g rho' / (rho |V'|^2) - 1/4`, or `+inf` when the shear vanishes.
pub fn miles_howard_margin(profile: &StratificationProfile, g: f64) -> f64 {
    let mut inf = f64::INFINITY;
    for k in 0..profile.nr {
        let s2: f64 = profile.vbar_prime.iter().map(|v| v[k] * v[k]).sum();
        if s2 > 0.0 {
            inf = inf.min(g * profile.rho_prime[k] / (profile.rho[k] * s2));
        }
    }
    inf - 0.25
}
