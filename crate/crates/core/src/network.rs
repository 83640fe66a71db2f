//! The lossy, delayed broadcast channel between lead and follower.
//!
//! Delay is realized abstractly: the post-transmit dynamics segment of each
//! cycle plays the role of in-flight time, so the channel never queues more
//! than one packet (the transmit period is at most `eps - tau`, enforced by
//! [`validate_timing`]). A channel is owned by a single run.

use thiserror::Error;

use crate::envelope::{Params, WorldState};
use crate::rng::{Rng, SimRng};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("delay law reaches {law_max} beyond the maximum delay {max_delay}")]
    DelayBeyondBound { law_max: f64, max_delay: f64 },
    #[error("drop probability must be within [0, 1], got {0}")]
    BadDropProbability(f64),
    #[error("delay law parameter must be positive, got {0}")]
    BadLawParameter(f64),
    #[error("scripted channel schedule is empty")]
    EmptySchedule,
}

/// Timing figures of the sensing/communication chain, validated against the
/// envelope constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkTiming {
    /// Lead transmit period (s). Config key `timing.t_l`.
    pub send_period: f64,
    /// Distance-sensor delay (s). Key `timing.t_dx`.
    pub sensor_delay: f64,
    /// Follower control computation time (s). Key `timing.t_fcomp`.
    pub compute_time: f64,
    /// The channel's maximum delay (s); at most `Params::max_delay`.
    /// Key `timing.t_dv_max`.
    pub max_channel_delay: f64,
}

impl NetworkTiming {
    /// Defaults that are valid for any valid `Params`.
    pub fn nominal(p: &Params) -> Self {
        NetworkTiming {
            send_period: p.max_recv_period - p.max_delay,
            sensor_delay: 0.0,
            compute_time: 0.0,
            max_channel_delay: p.max_delay,
        }
    }
}

/// First violated timing constraint, if any.
pub fn timing_violation(nt: &NetworkTiming, p: &Params) -> Option<&'static str> {
    if !(nt.sensor_delay >= 0.0) {
        return Some("t_dx >= 0");
    }
    if !(nt.compute_time >= 0.0) {
        return Some("t_fcomp >= 0");
    }
    if !(nt.sensor_delay + nt.compute_time <= nt.send_period) {
        return Some("t_dx + t_fcomp <= t_l");
    }
    if !(nt.send_period <= p.max_recv_period - p.max_delay) {
        return Some("t_l <= eps - tau");
    }
    if !(nt.max_channel_delay <= p.max_delay) {
        return Some("t_dv_max <= tau");
    }
    if !(nt.sensor_delay <= nt.max_channel_delay) {
        return Some("t_dx <= t_dv_max");
    }
    None
}

/// Whether the timing chain is consistent with the envelope constants.
pub fn validate_timing(nt: &NetworkTiming, p: &Params) -> bool {
    timing_violation(nt, p).is_none()
}

/// Outcome of one transmit slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelOutcome {
    /// The packet arrived: the sampled lead velocity and its in-flight time.
    Delivered { vel: f64, delay: f64 },
    Dropped,
}

/// Distribution of the communication delay, supported on `[0, max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DelayLaw {
    /// Every packet takes exactly this long.
    Point(f64),
    /// Uniform on `[0, max]`.
    Uniform { max: f64 },
    /// Exponential with the given mean, truncated to `[0, max]`.
    TruncExp { mean: f64, max: f64 },
}

impl DelayLaw {
    pub fn max_value(&self) -> f64 {
        match *self {
            DelayLaw::Point(d) => d,
            DelayLaw::Uniform { max } | DelayLaw::TruncExp { max, .. } => max,
        }
    }

    fn sample(&self, rng: &mut SimRng) -> f64 {
        match *self {
            DelayLaw::Point(d) => d,
            DelayLaw::Uniform { max } => {
                if max == 0.0 {
                    0.0
                } else {
                    rng.gen_range(0.0..=max)
                }
            }
            DelayLaw::TruncExp { mean, max } => {
                // inverse CDF of the truncated exponential
                let u: f64 = rng.gen();
                let cap = 1.0 - (-max / mean).exp();
                (-mean * (1.0 - u * cap).ln()).min(max)
            }
        }
    }
}

/// One entry of a scripted channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleEntry {
    Drop,
    Deliver { delay: f64 },
}

/// How the channel resolves each transmit slot.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelModel {
    /// Independent losses with probability `drop_prob`; delays from the law.
    Random { drop_prob: f64, delay: DelayLaw },
    /// Explicit outcome schedule; the last entry repeats forever.
    Scripted(Vec<ScheduleEntry>),
}

/// Drop/delay realization for one slot, before the payload is known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelDraw {
    pub dropped: bool,
    pub delay: f64,
}

impl ChannelDraw {
    /// Attach the lead velocity sampled at transmit time.
    pub fn resolve(self, lead_vel: f64) -> ChannelOutcome {
        if self.dropped {
            ChannelOutcome::Dropped
        } else {
            ChannelOutcome::Delivered { vel: lead_vel, delay: self.delay }
        }
    }
}

/// The channel of one run. Construction validates the model against the
/// maximum delay; sampling cannot fail afterwards.
#[derive(Debug, Clone)]
pub struct Channel {
    model: ChannelModel,
    cursor: usize,
}

impl Channel {
    pub fn new(model: ChannelModel, max_delay: f64) -> Result<Self, NetworkError> {
        match &model {
            ChannelModel::Random { drop_prob, delay } => {
                if !(0.0..=1.0).contains(drop_prob) {
                    return Err(NetworkError::BadDropProbability(*drop_prob));
                }
                if let DelayLaw::TruncExp { mean, .. } = delay {
                    if !(*mean > 0.0) {
                        return Err(NetworkError::BadLawParameter(*mean));
                    }
                }
                let law_max = delay.max_value();
                if !(0.0..=max_delay).contains(&law_max) {
                    return Err(NetworkError::DelayBeyondBound { law_max, max_delay });
                }
            }
            ChannelModel::Scripted(entries) => {
                if entries.is_empty() {
                    return Err(NetworkError::EmptySchedule);
                }
                for e in entries {
                    if let ScheduleEntry::Deliver { delay } = e {
                        if !(0.0..=max_delay).contains(delay) {
                            return Err(NetworkError::DelayBeyondBound {
                                law_max: *delay,
                                max_delay,
                            });
                        }
                    }
                }
            }
        }
        Ok(Channel { model, cursor: 0 })
    }

    /// Draw the next slot's outcome shape. For random channels a (possibly
    /// phantom) delay is drawn even on a drop, keeping the stream layout
    /// independent of the loss pattern.
    pub fn draw(&mut self, rng: &mut SimRng) -> ChannelDraw {
        match &self.model {
            ChannelModel::Random { drop_prob, delay } => {
                let dropped = rng.gen::<f64>() < *drop_prob;
                let delay = delay.sample(rng);
                ChannelDraw { dropped, delay }
            }
            ChannelModel::Scripted(entries) => {
                let entry = entries[self.cursor.min(entries.len() - 1)];
                self.cursor += 1;
                match entry {
                    ScheduleEntry::Drop => ChannelDraw { dropped: true, delay: 0.0 },
                    ScheduleEntry::Deliver { delay } => ChannelDraw { dropped: false, delay },
                }
            }
        }
    }

    /// Draw a slot and resolve it with the lead velocity at transmit time.
    pub fn sample(&mut self, lead_vel: f64, rng: &mut SimRng) -> ChannelOutcome {
        self.draw(rng).resolve(lead_vel)
    }
}

/// Apply a slot outcome to the world state. A delivery updates the delivered
/// velocity and clears the loss flag; the staleness clock is only reset when
/// the follower's next control step acts on the fresh sample. A drop raises
/// the loss flag and leaves everything else running.
pub fn apply_outcome(w: &WorldState, o: &ChannelOutcome) -> WorldState {
    let mut next = *w;
    match *o {
        ChannelOutcome::Delivered { vel, .. } => {
            next.packet_dropped = false;
            next.delivered_lead_vel = vel;
        }
        ChannelOutcome::Dropped => {
            next.packet_dropped = true;
        }
    }
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::VehicleState;
    use crate::rng::seeded;

    fn worked_params() -> Params {
        Params {
            max_accel: 2.0,
            max_brake: 4.0,
            min_brake: 2.0,
            max_recv_period: 0.2,
            max_delay: 0.05,
        }
    }

    #[test]
    fn timing_validation() {
        let p = worked_params();
        let nt = NetworkTiming {
            send_period: 0.1,
            sensor_delay: 0.01,
            compute_time: 0.02,
            max_channel_delay: 0.05,
        };
        assert!(validate_timing(&nt, &p));
        assert_eq!(
            timing_violation(&NetworkTiming { send_period: 0.2, ..nt }, &p),
            Some("t_l <= eps - tau")
        );
        assert_eq!(
            timing_violation(&NetworkTiming { sensor_delay: 0.06, ..nt }, &p),
            Some("t_dx <= t_dv_max")
        );
        assert!(validate_timing(&NetworkTiming::nominal(&p), &p));
    }

    #[test]
    fn certain_loss_and_degenerate_delivery() {
        let mut rng = seeded(1);
        let mut ch = Channel::new(
            ChannelModel::Random { drop_prob: 1.0, delay: DelayLaw::Point(0.05) },
            0.05,
        )
        .unwrap();
        for _ in 0..32 {
            assert_eq!(ch.sample(8.0, &mut rng), ChannelOutcome::Dropped);
        }
        let mut ch = Channel::new(
            ChannelModel::Random { drop_prob: 0.0, delay: DelayLaw::Point(0.05) },
            0.05,
        )
        .unwrap();
        assert_eq!(
            ch.sample(8.0, &mut rng),
            ChannelOutcome::Delivered { vel: 8.0, delay: 0.05 }
        );
    }

    #[test]
    fn replay_is_deterministic() {
        let model = ChannelModel::Random { drop_prob: 0.5, delay: DelayLaw::Uniform { max: 0.05 } };
        let run = |seed| {
            let mut rng = seeded(seed);
            let mut ch = Channel::new(model.clone(), 0.05).unwrap();
            (0..64).map(|_| ch.sample(3.0, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(run(9), run(9));
        assert_ne!(run(9), run(10));
    }

    #[test]
    fn law_beyond_bound_rejected_at_construction() {
        let bad = Channel::new(
            ChannelModel::Random { drop_prob: 0.0, delay: DelayLaw::Point(0.06) },
            0.05,
        );
        assert!(matches!(bad, Err(NetworkError::DelayBeyondBound { .. })));
        let bad = Channel::new(
            ChannelModel::Scripted(vec![ScheduleEntry::Deliver { delay: 0.6 }]),
            0.05,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn scripted_schedule_repeats_last_entry() {
        let mut rng = seeded(3);
        let mut ch = Channel::new(
            ChannelModel::Scripted(vec![
                ScheduleEntry::Deliver { delay: 0.01 },
                ScheduleEntry::Drop,
            ]),
            0.05,
        )
        .unwrap();
        assert!(!ch.draw(&mut rng).dropped);
        assert!(ch.draw(&mut rng).dropped);
        assert!(ch.draw(&mut rng).dropped);
    }

    #[test]
    fn trunc_exp_stays_within_bound() {
        let mut rng = seeded(11);
        let law = DelayLaw::TruncExp { mean: 0.02, max: 0.05 };
        for _ in 0..10_000 {
            let d = law.sample(&mut rng);
            assert!((0.0..=0.05).contains(&d));
        }
    }

    #[test]
    fn outcomes_update_world() {
        let w = WorldState {
            follower: VehicleState { pos: 0.0, vel: 1.0, accel: 0.0 },
            lead: VehicleState { pos: 5.0, vel: 2.0, accel: 0.0 },
            delivered_lead_vel: 8.0,
            packet_dropped: false,
            staleness: 0.25,
        };
        let dropped = apply_outcome(&w, &ChannelOutcome::Dropped);
        assert!(dropped.packet_dropped);
        assert_eq!(dropped.delivered_lead_vel, 8.0);
        assert_eq!(dropped.staleness, 0.25);
        let got = apply_outcome(&w, &ChannelOutcome::Delivered { vel: 7.0, delay: 0.03 });
        assert!(!got.packet_dropped);
        assert_eq!(got.delivered_lead_vel, 7.0);
        assert_eq!(got.staleness, 0.25, "reset happens at the next control step");
    }
}
