//! Positive radial critical points of the Moser–Trudinger functional on the
//! unit disk, computed by shooting, plus numerical checks of their blow-up
//! behaviour as the peak height grows.

pub mod asymptotics;
pub mod branch;
pub mod export;
pub mod ode;
pub mod par;

pub use branch::{BranchCurve, BranchPoint, FOUR_PI};
pub use ode::{integrate_profile, RadialProfile, ShootConfig, Tolerances};
pub use par::Execution;
