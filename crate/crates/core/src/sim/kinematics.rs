//! Single-track (bicycle) kinematics with an exact constant-control arc update.

use serde::{Deserialize, Serialize};

use crate::geometry::{wrap_angle, Vec2};

use super::SimError;

/// Below this `|tan δ|` the step is integrated as a straight line.
const STRAIGHT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KinematicState {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub wheelbase: f64,
}

impl KinematicState {
    pub fn new(x: f64, y: f64, heading: f64, speed: f64, wheelbase: f64) -> Self {
        Self {
            x,
            y,
            heading,
            speed,
            wheelbase,
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.wheelbase > 0.0) {
            return Err(SimError::InvalidState(format!(
                "wheelbase must be positive, got {}",
                self.wheelbase
            )));
        }
        if !(self.speed >= 0.0) {
            return Err(SimError::InvalidState(format!(
                "speed must be non-negative, got {}",
                self.speed
            )));
        }
        if ![self.x, self.y, self.heading].iter().all(|v| v.is_finite()) {
            return Err(SimError::InvalidState("non-finite pose".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlInput {
    /// Front wheel steering angle, rad.
    pub steering: f64,
    /// Longitudinal acceleration, m/s².
    pub accel: f64,
}

impl ControlInput {
    pub const ZERO: ControlInput = ControlInput {
        steering: 0.0,
        accel: 0.0,
    };

    pub fn new(steering: f64, accel: f64) -> Self {
        Self { steering, accel }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlLimits {
    pub max_steering: f64,
    pub max_accel: f64,
}

impl Default for ControlLimits {
    fn default() -> Self {
        Self {
            max_steering: 0.5,
            max_accel: 4.0,
        }
    }
}

impl ControlLimits {
    pub fn admits(&self, u: ControlInput) -> bool {
        u.steering.abs() <= self.max_steering && u.accel.abs() <= self.max_accel
    }

    pub fn clamp(&self, u: ControlInput) -> ControlInput {
        ControlInput {
            steering: u.steering.clamp(-self.max_steering, self.max_steering),
            accel: u.accel.clamp(-self.max_accel, self.max_accel),
        }
    }
}

/// Advances `s` by `dt` holding `u` constant.
///
/// Speed is clipped at zero. The distance travelled uses the mean of the old
/// and new speed, and the pose moves along the circular arc of radius
/// `L / tan δ` (or a straight line when the steering is negligible), so the
/// velocity stays parallel to the heading throughout the step.
pub fn step_single_track(s: &KinematicState, u: ControlInput, dt: f64) -> Result<KinematicState, SimError> {
    if !(dt > 0.0) {
        return Err(SimError::InvalidStep(dt));
    }
    let v_next = (s.speed + u.accel * dt).max(0.0);
    let distance = 0.5 * (s.speed + v_next) * dt;
    let tan_delta = u.steering.tan();

    let (x, y, heading) = if distance == 0.0 {
        (s.x, s.y, s.heading)
    } else if tan_delta.abs() < STRAIGHT_EPS {
        let (sin_h, cos_h) = s.heading.sin_cos();
        (s.x + distance * cos_h, s.y + distance * sin_h, s.heading)
    } else {
        let radius = s.wheelbase / tan_delta;
        let dh = distance / radius;
        let h1 = s.heading + dh;
        (
            s.x + radius * (h1.sin() - s.heading.sin()),
            s.y + radius * (s.heading.cos() - h1.cos()),
            h1,
        )
    };

    Ok(KinematicState {
        x,
        y,
        heading: wrap_angle(heading),
        speed: v_next,
        wheelbase: s.wheelbase,
    })
}

/// Turn radius for a steering angle; `None` when driving straight.
pub fn turn_radius(wheelbase: f64, steering: f64) -> Option<f64> {
    let t = steering.tan();
    (t.abs() >= STRAIGHT_EPS).then(|| wheelbase / t)
}
