//! Reference maneuvers and the path tracker that turns them into controls.
//!
//! A maneuver is a reference path, a lateral offset profile along it and a
//! longitudinal mode. The tracker closes the loop on lateral offset and
//! heading with a critically damped second-order law and converts the
//! commanded curvature into a steering angle.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geometry::{wrap_angle, Polyline};
use crate::sim::{ControlInput, ControlLimits, KinematicState};

/// Tunables for behavior execution, shared by object hypotheses and the
/// ego's behavior→control mapping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionModels {
    /// Time to move one lane over, s.
    pub lane_change_duration: f64,
    /// Deceleration of an object that stops, m/s².
    pub stop_decel: f64,
    /// Ego deceleration for `ReduceSpeed`, m/s².
    pub reduce_speed_decel: f64,
    /// Ego deceleration for `EmergencyStop`, m/s².
    pub emergency_decel: f64,
    pub lane_width: f64,
    /// Natural frequency of the lateral tracking loop, rad/s.
    pub tracking_frequency: f64,
}

impl Default for MotionModels {
    fn default() -> Self {
        Self {
            lane_change_duration: 3.0,
            stop_decel: 1.5,
            reduce_speed_decel: 2.0,
            emergency_decel: 4.0,
            lane_width: 3.5,
            tracking_frequency: 1.0,
        }
    }
}

/// Cosine blend of the lateral offset from `from` to `to`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LateralPlan {
    pub from: f64,
    pub to: f64,
    pub start: f64,
    pub duration: f64,
}

impl LateralPlan {
    pub fn hold(offset: f64) -> Self {
        Self {
            from: offset,
            to: offset,
            start: 0.0,
            duration: 1.0,
        }
    }

    /// Offset, rate and acceleration of the reference at time `t`.
    pub fn reference(&self, t: f64) -> (f64, f64, f64) {
        let progress = (t - self.start) / self.duration;
        if progress <= 0.0 {
            return (self.from, 0.0, 0.0);
        }
        if progress >= 1.0 {
            return (self.to, 0.0, 0.0);
        }
        let span = self.to - self.from;
        let w = PI / self.duration;
        let a = w * progress * self.duration;
        (
            self.from + span * 0.5 * (1.0 - a.cos()),
            span * 0.5 * w * a.sin(),
            span * 0.5 * w * w * a.cos(),
        )
    }

    pub fn finished(&self, t: f64) -> bool {
        t >= self.start + self.duration
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Longitudinal {
    Hold,
    /// Brake at this rate until stationary.
    Brake(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Maneuver {
    pub path: Polyline,
    pub lateral: LateralPlan,
    pub longitudinal: Longitudinal,
    pub tracking_frequency: f64,
}

impl Maneuver {
    pub fn control(&self, state: &KinematicState, t: f64, limits: &ControlLimits) -> ControlInput {
        let proj = self.path.project(state.position());
        let (e_ref, de_ref, dde_ref) = self.lateral.reference(t);
        let v = state.speed.max(1.0);
        let phi = wrap_angle(state.heading - proj.heading);
        let err = proj.offset - e_ref;
        let derr = v * phi.sin() - de_ref;
        let w = self.tracking_frequency;
        let curvature = (dde_ref - w * w * err - 2.0 * w * derr) / (v * v);
        let steering = (state.wheelbase * curvature).atan();
        let accel = match self.longitudinal {
            Longitudinal::Hold => 0.0,
            Longitudinal::Brake(d) if state.speed > 0.0 => -d,
            Longitudinal::Brake(_) => 0.0,
        };
        limits.clamp(ControlInput::new(steering, accel))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;
    use crate::sim::step_single_track;

    fn straight() -> Polyline {
        Polyline::new([Vec2::new(-100.0, 0.0), Vec2::new(5000.0, 0.0)]).unwrap()
    }

    #[test]
    fn on_centerline_steers_exactly_straight() {
        let m = Maneuver {
            path: straight(),
            lateral: LateralPlan::hold(0.0),
            longitudinal: Longitudinal::Hold,
            tracking_frequency: 1.0,
        };
        let s = KinematicState::new(3.0, 0.0, 0.0, 20.0, 2.7);
        let u = m.control(&s, 0.0, &ControlLimits::default());
        assert_eq!(u.steering, 0.0);
        assert_eq!(u.accel, 0.0);
    }

    #[test]
    fn lane_change_settles_on_target() {
        let m = Maneuver {
            path: straight(),
            lateral: LateralPlan {
                from: 0.0,
                to: 3.5,
                start: 0.0,
                duration: 3.0,
            },
            longitudinal: Longitudinal::Hold,
            tracking_frequency: 1.0,
        };
        let limits = ControlLimits::default();
        let mut s = KinematicState::new(0.0, 0.0, 0.0, 25.0, 2.7);
        for n in 0..100 {
            s = step_single_track(&s, m.control(&s, n as f64 * 0.1, &limits), 0.1).unwrap();
        }
        assert!((s.y - 3.5).abs() < 0.05, "y = {}", s.y);
        assert!(s.heading.abs() < 0.01);
    }

    #[test]
    fn brake_stops_and_holds() {
        let m = Maneuver {
            path: straight(),
            lateral: LateralPlan::hold(0.0),
            longitudinal: Longitudinal::Brake(2.0),
            tracking_frequency: 1.0,
        };
        let limits = ControlLimits::default();
        let mut s = KinematicState::new(0.0, 0.0, 0.0, 10.0, 2.7);
        for n in 0..100 {
            s = step_single_track(&s, m.control(&s, n as f64 * 0.1, &limits), 0.1).unwrap();
        }
        assert_eq!(s.speed, 0.0);
        assert!((s.x - 25.0).abs() < 1e-9);
    }

    #[test]
    fn lateral_reference_endpoints() {
        let p = LateralPlan {
            from: 1.0,
            to: -2.5,
            start: 2.0,
            duration: 3.0,
        };
        assert_eq!(p.reference(0.0), (1.0, 0.0, 0.0));
        assert_eq!(p.reference(5.0), (-2.5, 0.0, 0.0));
        let (mid, rate, acc) = p.reference(3.5);
        assert!((mid - (-0.75)).abs() < 1e-12);
        assert!(rate < 0.0);
        assert!(acc.abs() < 1e-12);
    }
}
