//! The safe control envelope: first-order constraints over the world state.
//!
//! All inequalities are evaluated exactly as specified — strict where strict,
//! with no added slack. Callers that want robustness margins apply them on
//! top. Every predicate here is a pure function of its arguments.

use crate::kinematics::VehicleState;

/// The verified constants of the envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    /// Maximum follower acceleration (m/s^2). Config key `params.A`.
    pub max_accel: f64,
    /// Maximum braking deceleration of both vehicles (m/s^2). Key `params.B`.
    pub max_brake: f64,
    /// Minimum braking deceleration the follower can always realize (m/s^2).
    /// Key `params.b`.
    pub min_brake: f64,
    /// Maximum network receiving period (s). Key `params.eps`.
    pub max_recv_period: f64,
    /// Maximum communication delay (s). Key `params.tau`.
    pub max_delay: f64,
}

/// Full state of the two-vehicle world as seen by the simulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldState {
    pub follower: VehicleState,
    pub lead: VehicleState,
    /// Lead velocity as last delivered over the network (m/s).
    pub delivered_lead_vel: f64,
    /// Whether the most recent receive slot was a detected loss.
    pub packet_dropped: bool,
    /// Staleness clock: upper bound on the age of `delivered_lead_vel` (s).
    /// Reset to the maximum delay at each receipt the follower acts on.
    pub staleness: f64,
}

impl WorldState {
    /// Inter-vehicle gap `x_l - x_f` (m).
    pub fn gap(&self) -> f64 {
        self.lead.pos - self.follower.pos
    }
}

/// First violated parameter constraint, if any. Conjunct names use the
/// config-key vocabulary so scenario rejections can point at them.
pub fn params_violation(p: &Params) -> Option<&'static str> {
    if !(p.max_accel > 0.0) {
        return Some("A > 0");
    }
    if !(p.max_brake > 0.0) {
        return Some("B > 0");
    }
    if !(p.min_brake > 0.0) {
        return Some("b > 0");
    }
    if !(p.max_brake >= p.min_brake) {
        return Some("B >= b");
    }
    if !(p.max_recv_period > 0.0) {
        return Some("eps > 0");
    }
    if !(p.max_delay >= 0.0) {
        return Some("tau >= 0");
    }
    if !(p.max_recv_period >= p.max_delay) {
        return Some("eps >= tau");
    }
    None
}

/// Parameter constraint: all [`Params`] invariants hold.
pub fn check_params(p: &Params) -> bool {
    params_violation(p).is_none()
}

/// First violated conjunct of the initial-state constraint, if any.
pub fn initial_violation(w: &WorldState, p: &Params) -> Option<&'static str> {
    if !(w.lead.accel >= -p.max_brake) {
        return Some("a_l >= -B");
    }
    if !(w.follower.vel >= 0.0) {
        return Some("v_f >= 0");
    }
    if !(w.lead.vel >= 0.0) {
        return Some("v_l >= 0");
    }
    if !(w.staleness >= p.max_delay) {
        return Some("t_f >= tau");
    }
    if !(w.gap() > 0.0) {
        return Some("x_l - x_f > 0");
    }
    let brake_gap = w.follower.vel * w.follower.vel / (2.0 * p.min_brake);
    if w.packet_dropped {
        if w.delivered_lead_vel != 0.0 {
            return Some("v_ld = 0 under initial loss");
        }
        if !(w.gap() > brake_gap) {
            return Some("x_l - x_f > v_f^2/(2 b)");
        }
    } else {
        if !(w.delivered_lead_vel >= 0.0) {
            return Some("v_ld >= 0");
        }
        let slack = p.max_brake * p.max_delay;
        if !(w.delivered_lead_vel - slack <= w.lead.vel) {
            return Some("v_ld - B*tau <= v_l");
        }
        let bound = if w.delivered_lead_vel >= slack {
            let worst = w.delivered_lead_vel - slack;
            brake_gap - worst * worst / (2.0 * p.max_brake)
        } else {
            brake_gap
        };
        if !(w.gap() > bound) {
            return Some("initial gap bound");
        }
    }
    None
}

/// Initial-state constraint: the states the envelope may be entered from.
pub fn check_initial(w: &WorldState, p: &Params) -> bool {
    initial_violation(w, p).is_none()
}

/// First violated conjunct of the loop invariant, if any.
pub fn loop_violation(w: &WorldState, p: &Params) -> Option<&'static str> {
    if !(w.lead.accel >= -p.max_brake) {
        return Some("a_l >= -B");
    }
    if !(w.follower.vel >= 0.0) {
        return Some("v_f >= 0");
    }
    if !(w.lead.vel >= 0.0) {
        return Some("v_l >= 0");
    }
    if !(w.staleness >= p.max_delay) {
        return Some("t_f >= tau");
    }
    if !(w.delivered_lead_vel >= 0.0) {
        return Some("v_ld >= 0");
    }
    if !(w.gap() > 0.0) {
        return Some("x_l - x_f > 0");
    }
    let diff = w.follower.vel * w.follower.vel / (2.0 * p.min_brake)
        - w.lead.vel * w.lead.vel / (2.0 * p.max_brake);
    if !(w.gap() > diff) {
        return Some("x_l - x_f > v_f^2/(2 b) - v_l^2/(2 B)");
    }
    let age = if w.packet_dropped { w.staleness } else { p.max_delay };
    if !(w.delivered_lead_vel - p.max_brake * age <= w.lead.vel) {
        return Some(if w.packet_dropped {
            "v_ld - B*t_f <= v_l"
        } else {
            "v_ld - B*tau <= v_l"
        });
    }
    None
}

/// Loop invariant: preserved by every control cycle, implies controllability.
pub fn check_loop_invariant(w: &WorldState, p: &Params) -> bool {
    loop_violation(w, p).is_none()
}

/// Controllability: full braking alone keeps the gap positive from here.
pub fn check_controllability(w: &WorldState, p: &Params) -> bool {
    w.lead.accel >= -p.max_brake
        && w.follower.vel >= 0.0
        && w.lead.vel >= 0.0
        && w.gap() > 0.0
        && w.gap()
            > w.follower.vel * w.follower.vel / (2.0 * p.min_brake)
                - w.lead.vel * w.lead.vel / (2.0 * p.max_brake)
}

/// Extra gap consumed by one worst-case control cycle: accelerate at the
/// maximum for a full receiving period, then brake at the weakest compliant
/// rate: `(A/b + 1)(A eps^2/2 + eps v_f)`.
pub fn reactivity_margin(p: &Params, follower_vel: f64) -> f64 {
    let eps = p.max_recv_period;
    (p.max_accel / p.min_brake + 1.0) * (0.5 * p.max_accel * eps * eps + eps * follower_vel)
}

/// Gap strictly above which driving is safe, given that the delivered lead
/// velocity is at most `age` seconds old.
fn gap_threshold_for_age(p: &Params, follower_vel: f64, delivered: f64, age: f64) -> f64 {
    let brake_gap = follower_vel * follower_vel / (2.0 * p.min_brake);
    let margin = reactivity_margin(p, follower_vel);
    let slack = p.max_brake * age;
    if delivered >= slack {
        let worst_lead = delivered - slack;
        brake_gap - worst_lead * worst_lead / (2.0 * p.max_brake) + margin
    } else {
        brake_gap + margin
    }
}

/// Safe-driving gap threshold when packets are arriving (sample age <= tau).
pub fn delay_gap_threshold(p: &Params, follower_vel: f64, delivered: f64) -> f64 {
    gap_threshold_for_age(p, follower_vel, delivered, p.max_delay)
}

/// Safe-driving gap threshold under loss, with the live staleness clock.
pub fn drop_gap_threshold(p: &Params, follower_vel: f64, delivered: f64, staleness: f64) -> f64 {
    gap_threshold_for_age(p, follower_vel, delivered, staleness)
}

/// Safe to drive under communication delay.
pub fn safe_delay(w: &WorldState, p: &Params) -> bool {
    w.gap() > delay_gap_threshold(p, w.follower.vel, w.delivered_lead_vel)
}

/// Safe to drive under packet loss. Identical to [`safe_delay`] with the
/// maximum delay replaced by the live staleness clock.
pub fn safe_drop(w: &WorldState, p: &Params) -> bool {
    w.gap() > drop_gap_threshold(p, w.follower.vel, w.delivered_lead_vel, w.staleness)
}

/// Closed interval of accelerations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }
}

/// The set of accelerations the envelope admits in a given state: full drive
/// authority when the matching safe condition holds, compliant braking
/// always, and holding still when already stopped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccelSet {
    /// `[-B, A]`, present when the state is safe to drive.
    pub drive: Option<Interval>,
    /// `[-B, -b]`, always present: the follower can always brake.
    pub brake: Interval,
    /// `{0}`, present when the follower is at rest.
    pub hold: bool,
}

impl AccelSet {
    pub fn contains(&self, a: f64) -> bool {
        if let Some(d) = self.drive {
            if d.contains(a) {
                return true;
            }
        }
        if self.hold && a == 0.0 {
            return true;
        }
        self.brake.contains(a)
    }

    /// Nearest admissible acceleration to a request. With drive authority the
    /// request is clamped into the full range; otherwise a stopped vehicle
    /// holds and a moving one is clamped into the braking range.
    pub fn clamp(&self, a: f64) -> f64 {
        if let Some(d) = self.drive {
            return d.clamp(a);
        }
        if self.hold && a > self.brake.hi {
            return 0.0;
        }
        self.brake.clamp(a)
    }
}

/// The accelerations the follower's control may assign in state `w`.
pub fn admissible_accel_set(w: &WorldState, p: &Params) -> AccelSet {
    let drive_ok = if w.packet_dropped { safe_drop(w, p) } else { safe_delay(w, p) };
    AccelSet {
        drive: drive_ok.then_some(Interval { lo: -p.max_brake, hi: p.max_accel }),
        brake: Interval { lo: -p.max_brake, hi: -p.min_brake },
        hold: w.follower.vel == 0.0,
    }
}
