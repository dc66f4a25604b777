//! Grids, parameters, equilibrium profiles and state containers.

pub mod grid;
pub mod params;
pub mod profile;
pub mod report;
pub mod state;

pub use grid::{Field, Grid};
pub use params::SimParams;
pub use profile::{
    brunt_vaisala, miles_howard_margin, BuoyancyLaw, Closure, DensitySpec, ShearSpec,
    StratificationProfile,
};
pub use report::{EnergyReport, OperatorLabel, Status};
pub use state::FlowState;
