//! Cycle-accurate execution of the control loop.
//!
//! Each cycle runs, in order: the follower's control step, the dynamics
//! until the lead transmits, the lead's control step together with the
//! channel outcome, and the dynamics until the receive slot closes. All
//! nondeterminism is resolved by explicit, seeded strategy objects so that
//! any run replays bit-identically.

use thiserror::Error;

use crate::envelope::{
    admissible_accel_set, initial_violation, params_violation, Params, WorldState,
};
use crate::kinematics::{evolve_const_accel, ghost_trajectory, GhostState, KinematicsError,
    min_gap_on_segment, VehicleState};
use crate::network::{apply_outcome, timing_violation, Channel, ChannelDraw, ChannelOutcome,
    NetworkError};
use crate::policy::{FollowerPolicy, LeadStrategy};
use crate::rng::{seeded, Rng, SimRng};
use crate::scenario::Scenario;
use crate::trace::{CycleRecord, GhostSeg, Segment, Trace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RunError {
    /// The policy stepped outside the admissible set: the safety firewall.
    #[error("policy requested acceleration {requested} outside the admissible envelope (drive allowed: {drive_allowed})")]
    EnvelopeViolation { requested: f64, drive_allowed: bool },
    #[error("lead strategy broke its contract: acceleration {accel} outside [{min}, {max}]")]
    LeadContract { accel: f64, min: f64, max: f64 },
    #[error("invalid cycle timing: {0}")]
    BadTiming(&'static str),
    #[error("scenario rejected: {0}")]
    Rejected(&'static str),
    #[error("invalid scenario spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Channel(#[from] NetworkError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

/// The control branch taken by the follower, with its chosen acceleration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControlMode {
    /// Drive on fresh data; taking this branch resets the staleness clock.
    DriveDelay { accel: f64 },
    /// Drive through a detected loss.
    DriveDrop { accel: f64 },
    /// Hold at rest.
    Stopped,
    /// Compliant braking in `[-B, -b]`.
    Brake { accel: f64 },
}

impl ControlMode {
    pub fn accel(&self) -> f64 {
        match *self {
            ControlMode::DriveDelay { accel }
            | ControlMode::DriveDrop { accel }
            | ControlMode::Brake { accel } => accel,
            ControlMode::Stopped => 0.0,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ControlMode::DriveDelay { .. } => "drive_delay",
            ControlMode::DriveDrop { .. } => "drive_drop",
            ControlMode::Stopped => "stopped",
            ControlMode::Brake { .. } => "brake",
        }
    }

    /// Acceleration assigned to the bounding follower trajectory per mode.
    fn ghost_follower_accel(&self, p: &Params) -> f64 {
        match self {
            ControlMode::DriveDelay { .. } | ControlMode::DriveDrop { .. } => p.max_accel,
            ControlMode::Stopped => 0.0,
            ControlMode::Brake { .. } => -p.min_brake,
        }
    }
}

/// Durations of the two dynamics segments of a cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleTiming {
    /// From the follower's control step to the lead's transmit (s).
    pub control_to_send: f64,
    /// From transmit to the close of the receive slot: the in-flight time (s).
    pub send_to_receive: f64,
}

impl CycleTiming {
    pub fn total(&self) -> f64 {
        self.control_to_send + self.send_to_receive
    }

    pub fn violation(&self, p: &Params) -> Option<&'static str> {
        if !(self.control_to_send >= 0.0) {
            return Some("t >= 0");
        }
        if !(self.send_to_receive >= 0.0) {
            return Some("t_d >= 0");
        }
        if !(self.control_to_send <= p.max_recv_period) {
            return Some("t <= eps");
        }
        if !(self.send_to_receive <= p.max_delay) {
            return Some("t_d <= tau");
        }
        if !(self.total() <= p.max_recv_period) {
            return Some("t + t_d <= eps");
        }
        None
    }
}

/// What the executor does when the policy leaves the admissible set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuardMode {
    /// Abort the run with [`RunError::EnvelopeViolation`].
    Enforce,
    /// Project the request onto the admissible set.
    Clamp,
    /// Accept anything within the physical range `[-B, A]`. For falsification
    /// runs that deliberately leave the envelope.
    Trust,
}

/// How the cycle durations are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimingLaw {
    /// Receive slots close every `eps`: the pre-transmit segment fills
    /// whatever the drawn delay leaves.
    Nominal,
    /// Maximal cycle: pre-transmit `eps - tau`, in-flight `tau`.
    Worst,
    /// Slot may close early: in-flight from the drawn delay, pre-transmit
    /// uniform in what remains.
    Jittered,
}

impl TimingLaw {
    pub fn sample(&self, drawn_delay: f64, p: &Params, rng: &mut SimRng) -> CycleTiming {
        match self {
            TimingLaw::Nominal => CycleTiming {
                control_to_send: p.max_recv_period - drawn_delay,
                send_to_receive: drawn_delay,
            },
            TimingLaw::Worst => CycleTiming {
                control_to_send: p.max_recv_period - p.max_delay,
                send_to_receive: p.max_delay,
            },
            TimingLaw::Jittered => {
                let room = p.max_recv_period - drawn_delay;
                CycleTiming {
                    control_to_send: if room > 0.0 { rng.gen_range(0.0..=room) } else { 0.0 },
                    send_to_receive: drawn_delay,
                }
            }
        }
    }
}

/// Follower control step: ask the policy for an acceleration, fence it with
/// the guard, label the branch taken, and apply the branch's assignments
/// (acceleration, and the staleness reset when acting on fresh data).
pub fn select_mode(
    w: &mut WorldState,
    p: &Params,
    policy: &mut dyn FollowerPolicy,
    guard: GuardMode,
    rng: &mut SimRng,
) -> Result<ControlMode, RunError> {
    let admissible = admissible_accel_set(w, p);
    let mut accel = policy.choose_accel(w, p, &admissible, rng);
    match guard {
        GuardMode::Enforce => {
            if !admissible.contains(accel) {
                return Err(RunError::EnvelopeViolation {
                    requested: accel,
                    drive_allowed: admissible.drive.is_some(),
                });
            }
        }
        GuardMode::Clamp => accel = admissible.clamp(accel),
        GuardMode::Trust => {
            if !(-p.max_brake <= accel && accel <= p.max_accel) {
                return Err(RunError::EnvelopeViolation {
                    requested: accel,
                    drive_allowed: admissible.drive.is_some(),
                });
            }
        }
    }
    let mode = if admissible.brake.contains(accel) {
        ControlMode::Brake { accel }
    } else if accel == 0.0 && w.follower.vel == 0.0 && admissible.drive.is_none() {
        ControlMode::Stopped
    } else if w.packet_dropped {
        ControlMode::DriveDrop { accel }
    } else {
        ControlMode::DriveDelay { accel }
    };
    if matches!(mode, ControlMode::DriveDelay { .. }) {
        w.staleness = p.max_delay;
    }
    w.follower.accel = mode.accel();
    Ok(mode)
}

/// Lead control step. The channel outcome is resolved first, carrying the
/// lead velocity before the acceleration change; then the strategy picks the
/// new lead acceleration, checked against its contract.
pub fn lead_step(
    lead: &VehicleState,
    strat: &mut dyn LeadStrategy,
    draw: ChannelDraw,
    accel_cap: f64,
    p: &Params,
    rng: &mut SimRng,
) -> Result<(f64, ChannelOutcome), RunError> {
    let outcome = draw.resolve(lead.vel);
    let accel = strat.choose_accel(lead, rng);
    if !(accel >= -p.max_brake && accel <= accel_cap) {
        return Err(RunError::LeadContract { accel, min: -p.max_brake, max: accel_cap });
    }
    Ok((accel, outcome))
}

/// Evolve both vehicles (and the ghost pair, when present) for `dt`,
/// advancing the staleness clock with simulated time.
fn evolve_world(
    w: &WorldState,
    ghost: Option<GhostState>,
    dt: f64,
) -> Result<(WorldState, Segment, Option<GhostState>), KinematicsError> {
    let f = evolve_const_accel(w.follower.point(), w.follower.accel, dt)?;
    let l = evolve_const_accel(w.lead.point(), w.lead.accel, dt)?;
    let ghost_seg;
    let ghost_end;
    match ghost {
        Some(g) => {
            let ev = ghost_trajectory(g, dt)?;
            ghost_seg = Some(GhostSeg {
                start: g,
                follower_stop: ev.follower_stop,
                lead_stop: ev.lead_stop,
            });
            ghost_end = Some(ev.state);
        }
        None => {
            ghost_seg = None;
            ghost_end = None;
        }
    }
    let segment = Segment { start: *w, duration: dt, ghost: ghost_seg };
    let next = WorldState {
        follower: VehicleState { pos: f.state.pos, vel: f.state.vel, accel: w.follower.accel },
        lead: VehicleState { pos: l.state.pos, vel: l.state.vel, accel: w.lead.accel },
        delivered_lead_vel: w.delivered_lead_vel,
        packet_dropped: w.packet_dropped,
        staleness: w.staleness + dt,
    };
    Ok((next, segment, ghost_end))
}

/// Execute one full cycle from `w`.
///
/// `draw` is this cycle's channel realization; its payload is filled with
/// the lead velocity at transmit time. When `ghosts` is set, the bounding
/// pair is re-anchored to the world after the follower's control step, with
/// the follower bound accelerating per mode and the lead bound at `-B`.
#[allow(clippy::too_many_arguments)]
pub fn run_cycle(
    w: &WorldState,
    p: &Params,
    timing: CycleTiming,
    draw: ChannelDraw,
    policy: &mut dyn FollowerPolicy,
    lead_strat: &mut dyn LeadStrategy,
    guard: GuardMode,
    lead_accel_cap: f64,
    ghosts: bool,
    rng: &mut SimRng,
) -> Result<(WorldState, CycleRecord), RunError> {
    if let Some(c) = timing.violation(p) {
        return Err(RunError::BadTiming(c));
    }
    let entry = *w;
    let mut cur = *w;
    let mode = select_mode(&mut cur, p, policy, guard, rng)?;
    let ghost0 = ghosts.then(|| GhostState {
        follower: VehicleState {
            pos: cur.follower.pos,
            vel: cur.follower.vel,
            accel: mode.ghost_follower_accel(p),
        },
        lead: VehicleState { pos: cur.lead.pos, vel: cur.lead.vel, accel: -p.max_brake },
    });

    let (after_main, seg_main, ghost_mid) = evolve_world(&cur, ghost0, timing.control_to_send)?;

    let (lead_accel, outcome) =
        lead_step(&after_main.lead, lead_strat, draw, lead_accel_cap, p, rng)?;
    let mut mid = apply_outcome(&after_main, &outcome);
    mid.lead.accel = lead_accel;

    let (end, seg_tail, _) = evolve_world(&mid, ghost_mid, timing.send_to_receive)?;

    let record = CycleRecord { entry, mode, timing, outcome, segments: [seg_main, seg_tail] };
    Ok((end, record))
}

/// Continuous-time minimum gap within one recorded cycle.
pub fn cycle_min_gap(rec: &CycleRecord) -> f64 {
    let mut min = f64::INFINITY;
    for seg in &rec.segments {
        let m = min_gap_on_segment(
            seg.start.follower.point(),
            seg.start.follower.accel,
            seg.start.lead.point(),
            seg.start.lead.accel,
            seg.duration,
        )
        .expect("recorded durations are non-negative");
        min = min.min(m.gap);
    }
    min
}

/// Run a validated scenario to completion, or until the vehicles make
/// contact within a cycle.
pub fn run_scenario(sc: &Scenario) -> Result<Trace, RunError> {
    if let Some(c) = params_violation(&sc.params) {
        return Err(RunError::Rejected(c));
    }
    if let Some(c) = timing_violation(&sc.net_timing, &sc.params) {
        return Err(RunError::Rejected(c));
    }
    if let Some(c) = initial_violation(&sc.initial, &sc.params) {
        return Err(RunError::Rejected(c));
    }
    let mut rng = seeded(sc.seed);
    let mut policy = sc.policy.build(&sc.params).map_err(RunError::InvalidSpec)?;
    let mut lead = sc.lead.build(&sc.params, sc.lead_accel_cap).map_err(RunError::InvalidSpec)?;
    let mut channel = Channel::new(sc.channel.clone(), sc.params.max_delay)?;

    let mut trace = Trace::new(sc.initial, sc.ghosts);
    trace.cycles.reserve(sc.cycles as usize);
    let mut w = sc.initial;
    for _ in 0..sc.cycles {
        let draw = channel.draw(&mut rng);
        let timing = sc.timing_law.sample(draw.delay, &sc.params, &mut rng);
        let (next, record) = run_cycle(
            &w,
            &sc.params,
            timing,
            draw,
            policy.as_mut(),
            lead.as_mut(),
            sc.guard,
            sc.lead_accel_cap,
            sc.ghosts,
            &mut rng,
        )?;
        let contact = cycle_min_gap(&record) <= 0.0;
        trace.cycles.push(record);
        trace.final_state = next;
        w = next;
        if contact {
            trace.aborted_on_contact = true;
            break;
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{ChannelModel, DelayLaw};
    use crate::policy::{ConstantLead, MaxSpeedPolicy, ScriptedPolicy};
    use crate::scenario::{LeadSpec, PolicySpec};

    fn worked_params() -> Params {
        Params {
            max_accel: 2.0,
            max_brake: 4.0,
            min_brake: 2.0,
            max_recv_period: 0.2,
            max_delay: 0.05,
        }
    }

    fn world(v_f: f64, v_l: f64, gap: f64, a_l: f64, vld: f64, dropped: bool) -> WorldState {
        WorldState {
            follower: VehicleState { pos: 0.0, vel: v_f, accel: 0.0 },
            lead: VehicleState { pos: gap, vel: v_l, accel: a_l },
            delivered_lead_vel: vld,
            packet_dropped: dropped,
            staleness: 0.05,
        }
    }

    #[test]
    fn stopped_mode_from_rest() {
        let p = worked_params();
        let mut w = world(0.0, 0.0, 0.05, 0.0, 0.0, true);
        let mut pol = ScriptedPolicy::new(vec![0.0]);
        let mut rng = seeded(0);
        let mode = select_mode(&mut w, &p, &mut pol, GuardMode::Enforce, &mut rng).unwrap();
        assert_eq!(mode, ControlMode::Stopped);
        assert_eq!(w.follower.accel, 0.0);
    }

    #[test]
    fn drive_delay_resets_staleness() {
        let p = worked_params();
        let mut w = world(10.0, 8.0, 22.0, 0.0, 8.0, false);
        w.staleness = 0.19;
        let mut pol = MaxSpeedPolicy { speed_limit: 30.0 };
        let mut rng = seeded(0);
        let mode = select_mode(&mut w, &p, &mut pol, GuardMode::Enforce, &mut rng).unwrap();
        assert_eq!(mode, ControlMode::DriveDelay { accel: 2.0 });
        assert_eq!(w.staleness, p.max_delay);
    }

    #[test]
    fn envelope_violation_aborts() {
        let p = worked_params();
        // moving and unsafe: only braking is admissible
        let mut w = world(10.0, 8.0, 21.0, 0.0, 8.0, false);
        let mut pol = ScriptedPolicy::new(vec![2.0]);
        // ScriptedPolicy clamps, so use a raw requester to hit the firewall
        struct Want(f64);
        impl FollowerPolicy for Want {
            fn choose_accel(
                &mut self,
                _: &WorldState,
                _: &Params,
                _: &crate::envelope::AccelSet,
                _: &mut SimRng,
            ) -> f64 {
                self.0
            }
        }
        let mut rng = seeded(0);
        let got = select_mode(&mut w, &p, &mut Want(2.0), GuardMode::Enforce, &mut rng);
        assert!(matches!(got, Err(RunError::EnvelopeViolation { .. })));
        // the clamping guard projects instead
        let mode = select_mode(&mut w, &p, &mut pol, GuardMode::Clamp, &mut rng).unwrap();
        assert_eq!(mode, ControlMode::Brake { accel: -2.0 });
    }

    #[test]
    fn lead_step_orders_payload_before_accel_change() {
        let p = worked_params();
        let lead = VehicleState { pos: 10.0, vel: 7.5, accel: 0.0 };
        let mut strat = ConstantLead { accel: -4.0 };
        let mut rng = seeded(0);
        let draw = ChannelDraw { dropped: false, delay: 0.03 };
        let (a, out) = lead_step(&lead, &mut strat, draw, 5.0, &p, &mut rng).unwrap();
        assert_eq!(a, -4.0);
        assert_eq!(out, ChannelOutcome::Delivered { vel: 7.5, delay: 0.03 });

        struct Rogue;
        impl LeadStrategy for Rogue {
            fn choose_accel(&mut self, _: &VehicleState, _: &mut SimRng) -> f64 {
                -9.0
            }
        }
        let got = lead_step(&lead, &mut Rogue, draw, 5.0, &p, &mut rng);
        assert!(matches!(got, Err(RunError::LeadContract { .. })));
    }

    #[test]
    fn worked_cycle_stays_safe() {
        let p = worked_params();
        let w = world(10.0, 8.0, 22.0, -4.0, 8.0, false);
        let mut pol = MaxSpeedPolicy { speed_limit: 30.0 };
        let mut strat = ConstantLead { accel: -4.0 };
        let mut rng = seeded(0);
        let timing = CycleTiming { control_to_send: 0.15, send_to_receive: 0.05 };
        let draw = ChannelDraw { dropped: false, delay: 0.05 };
        let (end, rec) = run_cycle(
            &w, &p, timing, draw, &mut pol, &mut strat, GuardMode::Enforce, 5.0, true, &mut rng,
        )
        .unwrap();
        assert_eq!(rec.mode, ControlMode::DriveDelay { accel: 2.0 });
        // follower 2.04 m / 10.4 m/s; lead 23.52 m / 7.2 m/s; gap 21.48
        assert!((end.follower.pos - 2.04).abs() < 1e-9);
        assert!((end.follower.vel - 10.4).abs() < 1e-9);
        assert!((end.lead.pos - 23.52).abs() < 1e-9);
        assert!((end.gap() - 21.48).abs() < 1e-9);
        assert!((end.delivered_lead_vel - 7.4).abs() < 1e-9);
        assert!((end.staleness - 0.25).abs() < 1e-12);
        assert!(crate::envelope::check_loop_invariant(&end, &p));
        // ghost bounds hold at cycle end
        let g0 = rec.segments[0].ghost.unwrap().start;
        let g_end = ghost_trajectory(g0, 0.2).unwrap().state;
        assert!(g_end.follower.pos >= end.follower.pos - 1e-9);
        assert!(g_end.lead.pos <= end.lead.pos + 1e-9);
    }

    #[test]
    fn bad_timing_rejected() {
        let p = worked_params();
        let w = world(10.0, 8.0, 22.0, 0.0, 8.0, false);
        let mut pol = MaxSpeedPolicy { speed_limit: 30.0 };
        let mut strat = ConstantLead { accel: 0.0 };
        let mut rng = seeded(0);
        let timing = CycleTiming { control_to_send: 0.18, send_to_receive: 0.05 };
        let draw = ChannelDraw { dropped: true, delay: 0.0 };
        let got = run_cycle(
            &w, &p, timing, draw, &mut pol, &mut strat, GuardMode::Enforce, 5.0, false, &mut rng,
        );
        assert_eq!(got.unwrap_err(), RunError::BadTiming("t + t_d <= eps"));
    }

    fn benign_scenario(cycles: u32, seed: u64) -> Scenario {
        Scenario {
            params: worked_params(),
            net_timing: crate::network::NetworkTiming::nominal(&worked_params()),
            initial: world(10.0, 8.0, 30.0, 0.0, 8.0, false),
            policy: PolicySpec::MaxSpeed { speed_limit: 25.0 },
            lead: LeadSpec::Constant { accel: 0.0 },
            lead_accel_cap: 5.0,
            channel: ChannelModel::Random { drop_prob: 0.3, delay: DelayLaw::Uniform { max: 0.05 } },
            timing_law: TimingLaw::Nominal,
            cycles,
            seed,
            ghosts: true,
            guard: GuardMode::Enforce,
        }
    }

    #[test]
    fn zero_cycles_is_initial_only() {
        let tr = run_scenario(&benign_scenario(0, 1)).unwrap();
        assert!(tr.cycles.is_empty());
        assert_eq!(tr.final_state, tr.initial);
    }

    #[test]
    fn replay_is_bit_identical() {
        let a = run_scenario(&benign_scenario(100, 42)).unwrap();
        let b = run_scenario(&benign_scenario(100, 42)).unwrap();
        assert_eq!(a, b);
        let c = run_scenario(&benign_scenario(100, 43)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn staleness_accumulates_over_consecutive_drops() {
        let p = worked_params();
        let mut sc = benign_scenario(3, 7);
        sc.channel = ChannelModel::Scripted(vec![crate::network::ScheduleEntry::Drop]);
        sc.timing_law = TimingLaw::Worst;
        let tr = run_scenario(&sc).unwrap();
        // cycle 1 drives on the initial delivery and resets to tau, then two
        // dropped cycles each add a full eps
        assert!((tr.cycles[1].entry.staleness - (p.max_delay + p.max_recv_period)).abs() < 1e-12);
        assert!(
            (tr.cycles[2].entry.staleness - (p.max_delay + 2.0 * p.max_recv_period)).abs() < 1e-12
        );
        assert!(tr.cycles[2].entry.packet_dropped);
    }

    #[test]
    fn scenario_rejection_names_conjunct() {
        let mut sc = benign_scenario(1, 0);
        sc.initial.lead.pos = sc.initial.follower.pos;
        assert_eq!(run_scenario(&sc).unwrap_err(), RunError::Rejected("x_l - x_f > 0"));
    }
}
