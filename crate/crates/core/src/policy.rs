//! Follower policies and lead strategies.
//!
//! Policies resolve the envelope's free acceleration choice; strategies
//! resolve the lead vehicle's. Both may consume seeded randomness so that
//! runs replay exactly.

use crate::envelope::{
    drop_gap_threshold, delay_gap_threshold, reactivity_margin, AccelSet, Params, WorldState,
};
use crate::kinematics::VehicleState;
use crate::rng::{Rng, SimRng};

/// Chooses the follower acceleration each cycle. Implementations are handed
/// the admissible set and are expected to stay inside it; the executor's
/// guard decides what happens if they do not.
pub trait FollowerPolicy {
    fn choose_accel(
        &mut self,
        w: &WorldState,
        p: &Params,
        admissible: &AccelSet,
        rng: &mut SimRng,
    ) -> f64;
}

/// Speed regulator: full acceleration below the road limit while driving is
/// allowed, hold at the limit, weakest compliant braking otherwise.
#[derive(Debug, Clone)]
pub struct MaxSpeedPolicy {
    pub speed_limit: f64,
}

impl FollowerPolicy for MaxSpeedPolicy {
    fn choose_accel(&mut self, w: &WorldState, p: &Params, adm: &AccelSet, _: &mut SimRng) -> f64 {
        if adm.drive.is_some() {
            if w.follower.vel < self.speed_limit {
                p.max_accel
            } else {
                0.0
            }
        } else {
            -p.min_brake
        }
    }
}

/// Replays a per-cycle acceleration request list (the last entry repeats),
/// clamping each request into the admissible set. This is the supervised
/// "manual input, automatic override" style of control: the request passes
/// through while driving is allowed and degrades to braking when not.
#[derive(Debug, Clone)]
pub struct ScriptedPolicy {
    schedule: Vec<f64>,
    cursor: usize,
}

impl ScriptedPolicy {
    pub fn new(schedule: Vec<f64>) -> Self {
        assert!(!schedule.is_empty(), "schedule must have at least one entry");
        ScriptedPolicy { schedule, cursor: 0 }
    }
}

impl FollowerPolicy for ScriptedPolicy {
    fn choose_accel(&mut self, _: &WorldState, _: &Params, adm: &AccelSet, _: &mut SimRng) -> f64 {
        let wanted = self.schedule[self.cursor.min(self.schedule.len() - 1)];
        self.cursor += 1;
        adm.clamp(wanted)
    }
}

/// Brakes every cycle at a fixed compliant rate.
#[derive(Debug, Clone)]
pub struct AlwaysBrakePolicy {
    pub accel: f64,
}

impl FollowerPolicy for AlwaysBrakePolicy {
    fn choose_accel(&mut self, _: &WorldState, _: &Params, _: &AccelSet, _: &mut SimRng) -> f64 {
        self.accel
    }
}

/// Draws uniformly from the admissible set each cycle.
#[derive(Debug, Clone)]
pub struct RandomAdmissiblePolicy;

impl FollowerPolicy for RandomAdmissiblePolicy {
    fn choose_accel(&mut self, _: &WorldState, _: &Params, adm: &AccelSet, rng: &mut SimRng) -> f64 {
        if let Some(d) = adm.drive {
            rng.gen_range(d.lo..=d.hi)
        } else if adm.hold && rng.gen_bool(0.5) {
            0.0
        } else {
            rng.gen_range(adm.brake.lo..=adm.brake.hi)
        }
    }
}

/// Drives on a weakened safe condition: the reactivity margin is multiplied
/// by `margin_scale` before the gap comparison. At scale 1 this is the real
/// condition; below 1 it is unsound by construction and exists to show that
/// removing the margin breaks safety. Run it with the guard disabled.
#[derive(Debug, Clone)]
pub struct MarginScaledPolicy {
    pub margin_scale: f64,
}

impl MarginScaledPolicy {
    fn weakened_safe(&self, w: &WorldState, p: &Params) -> bool {
        let full = if w.packet_dropped {
            drop_gap_threshold(p, w.follower.vel, w.delivered_lead_vel, w.staleness)
        } else {
            delay_gap_threshold(p, w.follower.vel, w.delivered_lead_vel)
        };
        let weakened = full - (1.0 - self.margin_scale) * reactivity_margin(p, w.follower.vel);
        w.gap() > weakened
    }
}

impl FollowerPolicy for MarginScaledPolicy {
    fn choose_accel(&mut self, w: &WorldState, p: &Params, _: &AccelSet, _: &mut SimRng) -> f64 {
        if self.weakened_safe(w, p) {
            p.max_accel
        } else {
            -p.min_brake
        }
    }
}

/// Chooses the lead acceleration each cycle. The contract is
/// `accel >= -B` and `accel <= cap`; the executor enforces it.
pub trait LeadStrategy {
    fn choose_accel(&mut self, lead: &VehicleState, rng: &mut SimRng) -> f64;
}

/// Constant lead acceleration; `ConstantLead { accel: -B }` is the
/// worst-case lead.
#[derive(Debug, Clone)]
pub struct ConstantLead {
    pub accel: f64,
}

impl LeadStrategy for ConstantLead {
    fn choose_accel(&mut self, _: &VehicleState, _: &mut SimRng) -> f64 {
        self.accel
    }
}

/// Alternates between two accelerations every `period` cycles.
#[derive(Debug, Clone)]
pub struct BangBangLead {
    pub high: f64,
    pub low: f64,
    pub period: u32,
    cycle: u32,
}

impl BangBangLead {
    pub fn new(high: f64, low: f64, period: u32) -> Self {
        BangBangLead { high, low, period: period.max(1), cycle: 0 }
    }
}

impl LeadStrategy for BangBangLead {
    fn choose_accel(&mut self, _: &VehicleState, _: &mut SimRng) -> f64 {
        let phase = (self.cycle / self.period) % 2;
        self.cycle += 1;
        if phase == 0 {
            self.high
        } else {
            self.low
        }
    }
}

/// Uniform random lead acceleration in `[min, max]`.
#[derive(Debug, Clone)]
pub struct RandomLead {
    pub min: f64,
    pub max: f64,
}

impl LeadStrategy for RandomLead {
    fn choose_accel(&mut self, _: &VehicleState, rng: &mut SimRng) -> f64 {
        rng.gen_range(self.min..=self.max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::Interval;
    use crate::rng::seeded;

    fn adm(drive: bool, hold: bool) -> AccelSet {
        AccelSet {
            drive: drive.then_some(Interval { lo: -4.0, hi: 2.0 }),
            brake: Interval { lo: -4.0, hi: -2.0 },
            hold,
        }
    }

    fn params() -> Params {
        Params {
            max_accel: 2.0,
            max_brake: 4.0,
            min_brake: 2.0,
            max_recv_period: 0.2,
            max_delay: 0.05,
        }
    }

    fn world(v_f: f64, gap: f64) -> WorldState {
        WorldState {
            follower: VehicleState { pos: 0.0, vel: v_f, accel: 0.0 },
            lead: VehicleState { pos: gap, vel: 8.0, accel: 0.0 },
            delivered_lead_vel: 8.0,
            packet_dropped: false,
            staleness: 0.05,
        }
    }

    #[test]
    fn max_speed_regulator_cases() {
        let mut pol = MaxSpeedPolicy { speed_limit: 30.0 };
        let mut rng = seeded(0);
        assert_eq!(pol.choose_accel(&world(10.0, 30.0), &params(), &adm(true, false), &mut rng), 2.0);
        assert_eq!(pol.choose_accel(&world(30.0, 30.0), &params(), &adm(true, false), &mut rng), 0.0);
        assert_eq!(pol.choose_accel(&world(10.0, 5.0), &params(), &adm(false, false), &mut rng), -2.0);
    }

    #[test]
    fn scripted_clamps_and_repeats() {
        let mut pol = ScriptedPolicy::new(vec![5.0, -10.0]);
        let mut rng = seeded(0);
        let w = world(10.0, 30.0);
        assert_eq!(pol.choose_accel(&w, &params(), &adm(true, false), &mut rng), 2.0);
        assert_eq!(pol.choose_accel(&w, &params(), &adm(true, false), &mut rng), -4.0);
        // schedule exhausted: last entry repeats; no drive authority: brakes
        assert_eq!(pol.choose_accel(&w, &params(), &adm(false, false), &mut rng), -4.0);
    }

    #[test]
    fn random_admissible_stays_admissible() {
        let mut pol = RandomAdmissiblePolicy;
        let mut rng = seeded(5);
        for drive in [false, true] {
            for hold in [false, true] {
                let set = adm(drive, hold);
                for _ in 0..200 {
                    let a = pol.choose_accel(&world(1.0, 30.0), &params(), &set, &mut rng);
                    assert!(set.contains(a), "{a} outside set");
                }
            }
        }
    }

    #[test]
    fn margin_scaled_at_one_matches_envelope() {
        let p = params();
        let mut pol = MarginScaledPolicy { margin_scale: 1.0 };
        let mut rng = seeded(0);
        // threshold 21.475: just above drives, just below brakes
        let a = pol.choose_accel(&world(10.0, 21.5), &p, &adm(true, false), &mut rng);
        assert_eq!(a, 2.0);
        let a = pol.choose_accel(&world(10.0, 21.4), &p, &adm(false, false), &mut rng);
        assert_eq!(a, -2.0);
    }

    #[test]
    fn bang_bang_alternates() {
        let mut lead = BangBangLead::new(1.0, -4.0, 2);
        let mut rng = seeded(0);
        let v = VehicleState { pos: 0.0, vel: 5.0, accel: 0.0 };
        let got: Vec<f64> = (0..6).map(|_| lead.choose_accel(&v, &mut rng)).collect();
        assert_eq!(got, vec![1.0, 1.0, -4.0, -4.0, 1.0, 1.0]);
    }
}
