//! Seeded control sampling for background traffic.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kinematics::{ControlInput, ControlLimits};

/// Counter-based generator: a seed plus an independent stream id.
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    /// Independent generator for sub-stream `stream` of the same seed.
    pub fn split(&self, stream: u64) -> RandomSource {
        RandomSource::with_stream(self.seed, self.stream.wrapping_add(stream.wrapping_add(1)))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub(crate) fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn is_valid(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        Uniform::new_inclusive(self.lo, self.hi).sample(rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlBounds {
    /// Steering-angle rate, rad/s.
    pub steering_rate: Interval,
    /// Target longitudinal speed, m/s.
    pub target_speed: Interval,
    /// Integration step the steering rate is applied over, s.
    pub dt: f64,
    /// Bound on the integrated steering angle, rad.
    pub max_steering: f64,
    /// Draw a fresh target speed every step instead of once per sequence.
    #[serde(default)]
    pub per_step_speed: bool,
}

impl ControlBounds {
    pub fn is_valid(&self) -> bool {
        self.steering_rate.is_valid()
            && self.target_speed.is_valid()
            && self.target_speed.lo >= 0.0
            && self.dt > 0.0
            && self.max_steering > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampledControl {
    pub steering_rate: f64,
    /// Integrated and clipped steering angle after this step's increment.
    pub steering: f64,
    pub target_speed: f64,
}

impl SampledControl {
    /// Proportional speed tracking toward the target, clamped to the limits.
    pub fn to_input(&self, current_speed: f64, speed_gain: f64, limits: &ControlLimits) -> ControlInput {
        limits.clamp(ControlInput::new(
            self.steering,
            speed_gain * (self.target_speed - current_speed),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlSequence {
    pub steps: Vec<SampledControl>,
}

impl ControlSequence {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&SampledControl> {
        self.steps.get(i)
    }
}

/// Draws `n` controls: i.i.d. uniform steering-rate increments per step and
/// uniform target speeds (one per sequence unless `per_step_speed`).
pub fn sample_controls(rng: &mut RandomSource, bounds: &ControlBounds, n: usize) -> ControlSequence {
    let r = rng.rng();
    let mut target = bounds.target_speed.sample(r);
    let mut steering = 0.0_f64;
    let mut steps = Vec::with_capacity(n);
    for i in 0..n {
        if bounds.per_step_speed && i > 0 {
            target = bounds.target_speed.sample(r);
        }
        let rate = bounds.steering_rate.sample(r);
        steering = (steering + rate * bounds.dt).clamp(-bounds.max_steering, bounds.max_steering);
        steps.push(SampledControl {
            steering_rate: rate,
            steering,
            target_speed: target,
        });
    }
    ControlSequence { steps }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bounds() -> ControlBounds {
        ControlBounds {
            steering_rate: Interval::new(-0.05, 0.05),
            target_speed: Interval::new(10.0, 20.0),
            dt: 0.1,
            max_steering: 0.5,
            per_step_speed: false,
        }
    }

    #[test]
    fn same_seed_same_sequence() {
        let a = sample_controls(&mut RandomSource::new(42), &bounds(), 100);
        let b = sample_controls(&mut RandomSource::new(42), &bounds(), 100);
        assert_eq!(a, b);
        let c = sample_controls(&mut RandomSource::new(43), &bounds(), 100);
        assert_ne!(a, c);
    }

    #[test]
    fn split_streams_differ() {
        let root = RandomSource::new(9);
        let a = sample_controls(&mut root.split(0), &bounds(), 20);
        let b = sample_controls(&mut root.split(1), &bounds(), 20);
        assert_ne!(a, b);
        assert_eq!(a, sample_controls(&mut root.split(0), &bounds(), 20));
    }

    #[test]
    fn samples_within_bounds_and_speed_per_episode() {
        let seq = sample_controls(&mut RandomSource::new(1), &bounds(), 500);
        let v0 = seq.steps[0].target_speed;
        for s in &seq.steps {
            assert!((-0.05..=0.05).contains(&s.steering_rate));
            assert!(s.steering.abs() <= 0.5);
            assert_eq!(s.target_speed, v0);
        }
    }

    #[test]
    fn zero_width_bounds_constant() {
        let b = ControlBounds {
            steering_rate: Interval::new(0.0, 0.0),
            target_speed: Interval::new(12.0, 12.0),
            ..bounds()
        };
        let seq = sample_controls(&mut RandomSource::new(5), &b, 50);
        assert!(seq.steps.iter().all(|s| *s == seq.steps[0]));
        assert_eq!(seq.steps[0].target_speed, 12.0);
    }

    #[test]
    fn integrated_steering_is_clipped() {
        let b = ControlBounds {
            steering_rate: Interval::new(1.0, 1.0),
            ..bounds()
        };
        let seq = sample_controls(&mut RandomSource::new(5), &b, 20);
        assert_eq!(seq.steps.last().unwrap().steering, 0.5);
    }
}
