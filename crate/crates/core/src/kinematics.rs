//! Closed-form longitudinal kinematics.
//!
//! Vehicles are points moving under piecewise-constant acceleration with the
//! evolution domain `v >= 0`: a braking vehicle that reaches zero velocity
//! stays at rest ("stop-and-hold"). Everything here is evaluated in closed
//! form — positions are piecewise quadratics in time — so gap minima and
//! crossing times carry no integration error into safety verdicts.

use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum KinematicsError {
    #[error("duration must be non-negative, got {0}")]
    NegativeDuration(f64),
    #[error("deceleration must be positive, got {0}")]
    NonPositiveDeceleration(f64),
}

/// Position (m) and velocity (m/s) of a point vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointState {
    pub pos: f64,
    pub vel: f64,
}

/// Position, velocity and commanded acceleration of one vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    pub pos: f64,
    pub vel: f64,
    pub accel: f64,
}

impl VehicleState {
    pub fn point(&self) -> PointState {
        PointState { pos: self.pos, vel: self.vel }
    }
}

/// Result of evolving a [`PointState`] for a fixed duration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evolution {
    pub state: PointState,
    /// Time at which the vehicle came to rest, if that happened within the
    /// window. The vehicle holds at rest for the remainder of the window.
    pub stop_time: Option<f64>,
}

impl Evolution {
    pub fn stopped(&self) -> bool {
        self.stop_time.is_some()
    }
}

/// Evolve `x' = v, v' = a` for `dt` seconds with stop-and-hold semantics.
///
/// Requires `s.vel >= 0`. If `a < 0` and the velocity would cross zero
/// within the window, the vehicle stops at `t_stop = v / (-a)` after
/// advancing `v^2 / (2 (-a))` and keeps `v = 0` from then on.
pub fn evolve_const_accel(s: PointState, accel: f64, dt: f64) -> Result<Evolution, KinematicsError> {
    if dt < 0.0 {
        return Err(KinematicsError::NegativeDuration(dt));
    }
    debug_assert!(s.vel >= 0.0, "velocity domain is v >= 0, got {}", s.vel);
    if accel < 0.0 && s.vel + accel * dt <= 0.0 {
        let t_stop = s.vel / -accel;
        let braking_dist = s.vel * s.vel / (2.0 * -accel);
        Ok(Evolution {
            state: PointState { pos: s.pos + braking_dist, vel: 0.0 },
            stop_time: Some(t_stop),
        })
    } else {
        Ok(Evolution {
            state: PointState {
                pos: s.pos + s.vel * dt + 0.5 * accel * dt * dt,
                vel: s.vel + accel * dt,
            },
            stop_time: None,
        })
    }
}

/// Distance covered when braking from `vel` to rest at constant `decel > 0`:
/// `vel^2 / (2 decel)`.
pub fn stopping_distance(vel: f64, decel: f64) -> Result<f64, KinematicsError> {
    if decel <= 0.0 {
        return Err(KinematicsError::NonPositiveDeceleration(decel));
    }
    debug_assert!(vel >= 0.0);
    Ok(vel * vel / (2.0 * decel))
}

/// Minimum of the inter-vehicle gap over a window, and where it occurs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapExtremum {
    pub gap: f64,
    pub at: f64,
}

/// Gap `lead(t).pos - follower(t).pos` at time `t` under stop-and-hold.
fn gap_at(
    follower: PointState,
    follower_accel: f64,
    lead: PointState,
    lead_accel: f64,
    t: f64,
) -> f64 {
    let f = evolve_const_accel(follower, follower_accel, t).expect("t >= 0");
    let l = evolve_const_accel(lead, lead_accel, t).expect("t >= 0");
    l.state.pos - f.state.pos
}

/// Interior times at which either vehicle comes to rest, plus the window
/// endpoints, in increasing order. At most four entries.
fn segment_cuts(
    follower: PointState,
    follower_accel: f64,
    lead: PointState,
    lead_accel: f64,
    dt: f64,
) -> ([f64; 4], usize) {
    let mut cuts = [0.0f64; 4];
    let mut n = 1;
    let mut push_stop = |s: PointState, a: f64, cuts: &mut [f64; 4], n: &mut usize| {
        if a < 0.0 && s.vel + a * dt < 0.0 {
            let t_stop = s.vel / -a;
            if t_stop > 0.0 && t_stop < dt {
                cuts[*n] = t_stop;
                *n += 1;
            }
        }
    };
    push_stop(follower, follower_accel, &mut cuts, &mut n);
    push_stop(lead, lead_accel, &mut cuts, &mut n);
    cuts[..n].sort_by(f64::total_cmp);
    cuts[n] = dt;
    n += 1;
    (cuts, n)
}

/// Exact minimum of the gap `x_l(t) - x_f(t)` over `[0, dt]`.
///
/// The window is split at each vehicle's stop time; on each piece the gap is
/// a quadratic, minimized at the piece ends or its interior stationary
/// point. Ties report the earliest time. No sampling is involved.
pub fn min_gap_on_segment(
    follower: PointState,
    follower_accel: f64,
    lead: PointState,
    lead_accel: f64,
    dt: f64,
) -> Result<GapExtremum, KinematicsError> {
    if dt < 0.0 {
        return Err(KinematicsError::NegativeDuration(dt));
    }
    let (cuts, n) = segment_cuts(follower, follower_accel, lead, lead_accel, dt);
    let mut best = GapExtremum { gap: f64::INFINITY, at: 0.0 };
    let mut consider = |t: f64, best: &mut GapExtremum| {
        let g = gap_at(follower, follower_accel, lead, lead_accel, t);
        if g < best.gap {
            *best = GapExtremum { gap: g, at: t };
        }
    };
    consider(0.0, &mut best);
    for w in 0..n - 1 {
        let (u, v) = (cuts[w], cuts[w + 1]);
        let f = evolve_const_accel(follower, follower_accel, u)?;
        let l = evolve_const_accel(lead, lead_accel, u)?;
        let fa = if f.stopped() { 0.0 } else { follower_accel };
        let la = if l.stopped() { 0.0 } else { lead_accel };
        let dvel = l.state.vel - f.state.vel;
        let dacc = la - fa;
        if dacc != 0.0 {
            let s = -dvel / dacc;
            if s > 0.0 && s < v - u {
                consider(u + s, &mut best);
            }
        }
        consider(v, &mut best);
    }
    Ok(best)
}

/// Earliest time in `[0, dt]` at which the gap reaches zero or below.
pub fn first_gap_crossing(
    follower: PointState,
    follower_accel: f64,
    lead: PointState,
    lead_accel: f64,
    dt: f64,
) -> Result<Option<f64>, KinematicsError> {
    if dt < 0.0 {
        return Err(KinematicsError::NegativeDuration(dt));
    }
    let (cuts, n) = segment_cuts(follower, follower_accel, lead, lead_accel, dt);
    for w in 0..n - 1 {
        let (u, v) = (cuts[w], cuts[w + 1]);
        let g0 = gap_at(follower, follower_accel, lead, lead_accel, u);
        if g0 <= 0.0 {
            return Ok(Some(u));
        }
        let f = evolve_const_accel(follower, follower_accel, u)?;
        let l = evolve_const_accel(lead, lead_accel, u)?;
        let fa = if f.stopped() { 0.0 } else { follower_accel };
        let la = if l.stopped() { 0.0 } else { lead_accel };
        let dvel = l.state.vel - f.state.vel;
        let dacc = la - fa;
        // Solve g0 + dvel s + dacc/2 s^2 = 0 for the smallest s in (0, v-u].
        if let Some(s) = smallest_positive_root(0.5 * dacc, dvel, g0, v - u) {
            return Ok(Some(u + s));
        }
    }
    if gap_at(follower, follower_accel, lead, lead_accel, dt) <= 0.0 {
        return Ok(Some(dt));
    }
    Ok(None)
}

/// Smallest root of `a s^2 + b s + c = 0` in `(0, hi]`, with `c > 0`.
fn smallest_positive_root(a: f64, b: f64, c: f64, hi: f64) -> Option<f64> {
    if a == 0.0 {
        if b < 0.0 {
            let s = -c / b;
            return (s > 0.0 && s <= hi).then_some(s);
        }
        return None;
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let sd = disc.sqrt();
    // Citardauq-stable pair of roots.
    let q = -0.5 * (b + b.signum() * sd);
    let mut roots = [q / a, if q != 0.0 { c / q } else { f64::NAN }];
    roots.sort_by(f64::total_cmp);
    roots
        .into_iter()
        .find(|&r| r.is_finite() && r > 0.0 && r <= hi)
}

/// Bounding pair used to dominate the real vehicles: an upper follower
/// trajectory and a lower lead trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GhostState {
    pub follower: VehicleState,
    pub lead: VehicleState,
}

/// Result of evolving a ghost pair, with each ghost's stop event if hit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GhostEvolution {
    pub state: GhostState,
    pub follower_stop: Option<f64>,
    pub lead_stop: Option<f64>,
}

/// Evolve the ghost pair for `dt` seconds.
///
/// Both ghosts follow stop-and-hold. A lead ghost that comes to rest keeps
/// driving with acceleration reassigned to zero, which is exactly holding at
/// rest; the follower ghost keeps its commanded acceleration and is held at
/// rest by the evolution domain alone.
pub fn ghost_trajectory(g: GhostState, dt: f64) -> Result<GhostEvolution, KinematicsError> {
    let f = evolve_const_accel(g.follower.point(), g.follower.accel, dt)?;
    let l = evolve_const_accel(g.lead.point(), g.lead.accel, dt)?;
    Ok(GhostEvolution {
        state: GhostState {
            follower: VehicleState {
                pos: f.state.pos,
                vel: f.state.vel,
                accel: g.follower.accel,
            },
            lead: VehicleState {
                pos: l.state.pos,
                vel: l.state.vel,
                accel: if l.stopped() { 0.0 } else { g.lead.accel },
            },
        },
        follower_stop: f.stop_time,
        lead_stop: l.stop_time,
    })
}
