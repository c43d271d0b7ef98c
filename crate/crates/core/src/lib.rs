//! Simulator for an entangled-state key distribution protocol in which Bob
//! secretly randomizes the sign of his Stern-Gerlach field, analysed under a
//! Bohmian hidden-variable model with an eavesdropper who knows the initial
//! particle positions exactly.
//!
//! * [`dynamics`]: velocity field, RK4 trajectories, outcome rules.
//! * [`sampling`]: equilibrium positions and counter-based random streams.
//! * [`protocol`]: session planning, key and test rounds, sifting, CHSH.
//! * [`adversary`]: eavesdropper strategies behind the [`Adversary`] trait.
//! * [`analysis`]: QBER, Wilson intervals, session reports.
//! * [`experiments`]: ensembles, |κ| sweeps, single-particle demo.

pub mod adversary;
pub mod analysis;
pub mod dynamics;
mod error;
pub mod experiments;
pub mod ode;
pub mod protocol;
pub mod sampling;

pub use adversary::{Adversary, AdversaryOptions, AdversaryRegistry};
pub use analysis::{summarize, SessionReport};
pub use dynamics::{HiddenState, IntegratorConfig, Kappa, PhysicalParams, Sign, Spin};
pub use error::{Error, Result};
pub use protocol::{run_session, Execution, SessionConfig};
