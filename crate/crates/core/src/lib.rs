//! Model-predictive communication planning for a UAV that streams status
//! updates to ground base stations under a hard peak-AoI bound.
//!
//! The pipeline is layered:
//!
//! * [`scenario`] describes the trajectory, deployment and thresholds.
//! * [`channel`] turns a scenario into a predicted channel profile.
//! * [`matching`] and [`inner`] solve the per-interval energy problem
//!   (capped water-filling over a b-matching).
//! * [`timing`] picks sampling instants by shortest path over interval costs.
//! * [`pareto`] sweeps the RB load cap to trace the load/energy frontier.
//! * [`sim`] evaluates plans and baselines by Monte Carlo.
//! * [`oracle`] holds brute-force references used for validation.

pub mod bench;
pub mod channel;
pub mod error;
pub mod format;
pub mod inner;
pub mod matching;
pub mod oracle;
pub mod pareto;
pub mod planfile;
pub mod scenario;
pub mod sim;
pub mod timing;

pub use error::{Error, Result};
