//! Simulation and runtime-verification toolkit for a cooperative adaptive
//! cruise control (CACC) safety envelope under lossy, delayed inter-vehicle
//! communication.
//!
//! The crate is organized around one control cycle of the follower vehicle:
//!
//! * [`kinematics`] — closed-form double-integrator evolution with
//!   stop-at-rest semantics, exact gap minimization, and the bounding
//!   ("ghost") trajectories used by the monitors.
//! * [`envelope`] — the first-order state constraints that define the safe
//!   control envelope and the admissible acceleration set.
//! * [`network`] — the broadcast channel model: delivery outcomes, delay
//!   laws, staleness-clock bookkeeping and timing validation.
//! * [`executor`] — cycle-accurate execution of the control loop with
//!   pluggable follower policies and lead/channel adversaries.
//! * [`monitor`] — trace checks: continuous-time collision freedom, the
//!   per-cycle invariant, and the differential invariants along segments.
//! * [`oracle`] — independent brute-force validation of the safe-driving
//!   conditions and a falsifier that demonstrates their tightness.
//! * [`scenario`], [`output`], [`batch`] — config ingestion, CSV emission
//!   and seeded batch execution.

pub mod batch;
pub mod envelope;
pub mod executor;
pub mod kinematics;
pub mod monitor;
pub mod network;
pub mod oracle;
pub mod output;
pub mod policy;
pub mod rng;
pub mod scenario;
pub mod trace;

pub use envelope::{Params, WorldState};
pub use kinematics::{GhostState, PointState, VehicleState};
pub use trace::Trace;
