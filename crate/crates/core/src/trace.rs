//! Recorded runs.
//!
//! A trace stores, for every cycle, the state at the cycle boundary and a
//! descriptor of each constant-acceleration segment (start state plus
//! duration). Segment interiors are fully determined in closed form, so the
//! monitors can check properties in continuous time without re-simulating.

use crate::envelope::WorldState;
use crate::executor::{ControlMode, CycleTiming};
use crate::kinematics::GhostState;
use crate::network::ChannelOutcome;

/// Ghost data of one segment: the bounding pair at segment start and each
/// ghost's recorded stop event (time from segment start), if it stopped
/// strictly inside the segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GhostSeg {
    pub start: GhostState,
    pub follower_stop: Option<f64>,
    pub lead_stop: Option<f64>,
}

/// One constant-acceleration stretch of a cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    /// World at segment start, accelerations included.
    pub start: WorldState,
    pub duration: f64,
    pub ghost: Option<GhostSeg>,
}

/// One control cycle: follower control, pre-transmit dynamics, lead
/// control plus channel outcome, post-transmit dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleRecord {
    /// World at the cycle boundary, before the follower's control step.
    pub entry: WorldState,
    pub mode: ControlMode,
    pub timing: CycleTiming,
    pub outcome: ChannelOutcome,
    /// `[0]` runs from follower control to lead transmit, `[1]` from
    /// transmit to receipt.
    pub segments: [Segment; 2],
}

impl CycleRecord {
    pub fn total_duration(&self) -> f64 {
        self.timing.control_to_send + self.timing.send_to_receive
    }
}

/// A complete recorded run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub initial: WorldState,
    pub cycles: Vec<CycleRecord>,
    pub final_state: WorldState,
    pub ghosts_enabled: bool,
    /// Set when the run was cut short because the vehicles made contact
    /// within a cycle.
    pub aborted_on_contact: bool,
}

impl Trace {
    pub fn new(initial: WorldState, ghosts_enabled: bool) -> Self {
        Trace {
            initial,
            cycles: Vec::new(),
            final_state: initial,
            ghosts_enabled,
            aborted_on_contact: false,
        }
    }

    /// Simulated time covered by the recorded cycles.
    pub fn duration(&self) -> f64 {
        self.cycles.iter().map(|c| c.total_duration()).sum()
    }
}
