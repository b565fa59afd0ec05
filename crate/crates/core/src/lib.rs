//! Rate allocation on the Gaussian multiple access channel as a constrained
//! game.
//!
//! * [`capacity`]: the polymatroid capacity region, safe rates and the
//!   maximal face.
//! * [`game`]: payoffs, best replies, Nash / strong / Pareto checks, the
//!   potential and efficiency ratios.
//! * [`selection`]: normalized equilibrium and the Goodman certificate.
//! * [`evolution`]: symmetric equilibrium, ESS test, mixed region and the
//!   expected payoff kernel.
//! * [`dynamics`]: BNN, replicator and θ-Smith flows on a rate grid.
//!
//! Rates are in nats throughout.

pub mod capacity;
pub mod dynamics;
pub mod error;
pub mod evolution;
pub mod game;
pub mod rng;
pub mod selection;
pub mod utility;

pub use capacity::{CapacityRegionView, ChannelModel, RateProfile, UserSet};
pub use dynamics::{Dynamics, DynamicsRun, Protocol, ProtocolKind, Trace, TraceRecord};
pub use error::{Error, Result};
pub use evolution::{EssTestSpec, PayoffMethod, PopulationState};
pub use selection::NormalizedEqConfig;
pub use utility::Utility;

/// Absolute slack on every capacity constraint.
pub const FEAS_TOL: f64 = 1e-9;
/// Minimum payoff gain counted as a strict improvement in coalition and
/// Pareto searches.
pub const IMPROVE_MARGIN: f64 = 1e-9;
/// Strictness margin of the ESS payoff comparison.
pub const STRICT_MARGIN: f64 = 1e-12;
