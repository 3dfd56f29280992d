//! Simulation and statistical verification of the local-time representation
//! of logistic branching populations.
//!
//! The crate provides, at desk scale:
//!
//! - exact event-driven simulation of the discrete mass process and of the
//!   exploration (contour) path of the associated random forest, together
//!   with its crossing-count local-time field ([`mass`], [`explore`],
//!   [`profile`]);
//! - closed-form Girsanov reweighting of paths simulated under the driftless
//!   null law, for importance-sampling estimation under drift and
//!   competition ([`girsanov`]);
//! - Euler schemes for the limiting diffusions: the logistic Feller SDE, the
//!   reflected local-time-drift SDE, and the Ornstein-Uhlenbeck time change
//!   ([`sde`]);
//! - the statistical machinery and the acceptance suite that checks the
//!   pathwise identities and distributional equalities connecting all of the
//!   above ([`stats`], [`acceptance`]).

pub mod acceptance;
pub mod cli;
pub mod explore;
pub mod girsanov;
pub mod mass;
pub mod params;
pub mod profile;
pub mod sde;
pub mod stats;
