//! Optimal advertising for an age-structured goodwill model.
//!
//! Goodwill `G(t, a)` in the market segment with usage experience `a`
//! follows a Lotka-Sharpe-McKendrick transport equation whose inflow at
//! `a = 0` is fed by consumer recommendations and by the two advertising
//! controls. The crate provides
//!
//! - [`model`]: parameters, the stability check and derived quantities,
//! - [`characteristic`]: a state solver along characteristic lines built on
//!   the Volterra renewal equation, used as an oracle,
//! - [`mol`]: the method-of-lines state and costate solvers,
//! - [`objective`]: the discounted profit functional,
//! - [`sweep`]: the forward-backward sweep optimizer,
//! - [`scenario`]: scenario configs, the built-in presets and CSV output.

pub mod characteristic;
pub mod error;
pub mod grid;
pub mod model;
pub mod mol;
pub mod objective;
pub mod quadrature;
pub mod scenario;
pub mod sweep;

pub use error::{Error, Result};
pub use grid::{BoundarySeries, Field, Grid};
pub use model::{ModelParams, Profile};
pub use sweep::{ControlPair, SolveReport, SweepConfig};
