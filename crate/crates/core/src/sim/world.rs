use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::{OrientedRect, Polyline, Vec2};
use crate::scene::{Extent, ObjectId};

use super::kinematics::{step_single_track, ControlInput, ControlLimits, KinematicState};
use super::random::ControlSequence;
use super::SimError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lane {
    /// 1 is the rightmost lane; indices grow to the left.
    pub index: u32,
    pub centerline: Vec<[f64; 2]>,
    pub width: f64,
}

impl Lane {
    pub fn polyline(&self) -> Option<Polyline> {
        Polyline::new(self.centerline.iter().map(|&p| Vec2::from(p)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Building {
    pub id: ObjectId,
    pub polygon: Vec<[f64; 2]>,
}

impl Building {
    pub fn vertices(&self) -> Vec<Vec2> {
        self.polygon.iter().map(|&p| Vec2::from(p)).collect()
    }

    pub fn centroid(&self) -> Vec2 {
        let n = self.polygon.len().max(1) as f64;
        let (sx, sy) = self
            .polygon
            .iter()
            .fold((0.0, 0.0), |(sx, sy), p| (sx + p[0], sy + p[1]));
        Vec2::new(sx / n, sy / n)
    }
}

/// Control source used when the caller supplies none for a vehicle.
#[derive(Debug, Clone, PartialEq)]
pub enum ScriptedControls {
    Pinned(Vec<ControlInput>),
    Sampled { sequence: ControlSequence, speed_gain: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle {
    pub id: ObjectId,
    pub kind: String,
    pub state: KinematicState,
    pub extent: Extent,
    pub script: Option<ScriptedControls>,
}

impl Vehicle {
    pub fn new(id: impl Into<ObjectId>, kind: impl Into<String>, state: KinematicState, extent: Extent) -> Self {
        Self {
            id: id.into(),
            kind: kind.into(),
            state,
            extent,
            script: None,
        }
    }

    pub fn footprint(&self) -> OrientedRect {
        footprint(&self.state, &self.extent)
    }

    fn scripted_input(&self, tick: u64, limits: &ControlLimits) -> ControlInput {
        match &self.script {
            None => ControlInput::ZERO,
            Some(ScriptedControls::Pinned(seq)) => seq
                .get(tick as usize)
                .or(seq.last())
                .copied()
                .unwrap_or(ControlInput::ZERO),
            Some(ScriptedControls::Sampled { sequence, speed_gain }) => sequence
                .get(tick as usize)
                .or(sequence.steps.last())
                .map(|c| c.to_input(self.state.speed, *speed_gain, limits))
                .unwrap_or(ControlInput::ZERO),
        }
    }
}

pub fn footprint(state: &KinematicState, extent: &Extent) -> OrientedRect {
    OrientedRect::new(state.position(), state.heading, extent.length, extent.width)
}

/// Simulator ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub ego: Vehicle,
    pub participants: Vec<Vehicle>,
    pub lanes: Vec<Lane>,
    pub buildings: Vec<Building>,
    pub clock: f64,
    pub tick: u64,
    pub limits: ControlLimits,
}

impl WorldState {
    pub fn new(ego: Vehicle) -> Self {
        Self {
            ego,
            participants: Vec::new(),
            lanes: Vec::new(),
            buildings: Vec::new(),
            clock: 0.0,
            tick: 0,
            limits: ControlLimits::default(),
        }
    }

    pub fn participant(&self, id: &ObjectId) -> Option<&Vehicle> {
        self.participants.iter().find(|p| &p.id == id)
    }

    pub fn lane(&self, index: u32) -> Option<&Lane> {
        self.lanes.iter().find(|l| l.index == index)
    }
}

/// Steps every vehicle by `dt`.
///
/// A vehicle takes its control from `controls` (keyed by id, the ego
/// included), otherwise from its script, otherwise coasts. Controls are
/// clamped to the world limits. Static geometry is untouched.
pub fn advance_world(
    world: &WorldState,
    controls: &BTreeMap<ObjectId, ControlInput>,
    dt: f64,
) -> Result<WorldState, SimError> {
    if !(dt > 0.0) {
        return Err(SimError::InvalidStep(dt));
    }
    let step = |v: &Vehicle| -> Result<Vehicle, SimError> {
        let u = controls
            .get(&v.id)
            .copied()
            .unwrap_or_else(|| v.scripted_input(world.tick, &world.limits));
        let state = step_single_track(&v.state, world.limits.clamp(u), dt)?;
        Ok(Vehicle { state, ..v.clone() })
    };
    Ok(WorldState {
        ego: step(&world.ego)?,
        participants: world.participants.iter().map(step).collect::<Result<_, _>>()?,
        lanes: world.lanes.clone(),
        buildings: world.buildings.clone(),
        clock: world.clock + dt,
        tick: world.tick + 1,
        limits: world.limits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn car(id: &str, x: f64, v: f64) -> Vehicle {
        Vehicle::new(
            id,
            "TrafficCar",
            KinematicState::new(x, 0.0, 0.0, v, 2.7),
            Extent::new(4.5, 1.8),
        )
    }

    #[test]
    fn stationary_world_only_advances_clock() {
        let mut w = WorldState::new(car("ego", 0.0, 0.0));
        w.participants.push(car("a", 10.0, 0.0));
        w.buildings.push(Building {
            id: "b".into(),
            polygon: vec![[0.0, 5.0], [1.0, 5.0], [1.0, 6.0]],
        });
        let n = advance_world(&w, &BTreeMap::new(), 0.1).unwrap();
        assert_eq!(n.ego, w.ego);
        assert_eq!(n.participants, w.participants);
        assert_eq!(n.buildings, w.buildings);
        assert_eq!(n.clock, 0.1);
    }

    #[test]
    fn straight_accumulation() {
        let mut w = WorldState::new(car("ego", 0.0, 10.0));
        for _ in 0..10 {
            w = advance_world(&w, &BTreeMap::new(), 0.1).unwrap();
        }
        assert!((w.ego.state.x - 10.0).abs() < 1e-12);
        assert_eq!(w.ego.state.y, 0.0);
        assert_eq!(w.tick, 10);
    }

    #[test]
    fn headings_stay_wrapped_under_random_controls() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut w = WorldState::new(car("ego", 0.0, 12.0));
        w.participants.push(car("a", 10.0, 5.0));
        w.participants.push(car("b", -10.0, 20.0));
        let ids: Vec<ObjectId> = ["ego", "a", "b"].iter().map(|s| ObjectId::from(*s)).collect();
        for _ in 0..100_000 {
            let controls = ids
                .iter()
                .map(|id| {
                    (
                        id.clone(),
                        ControlInput::new(rng.gen_range(-0.5..=0.5), rng.gen_range(-4.0..=4.0)),
                    )
                })
                .collect();
            w = advance_world(&w, &controls, rng.gen_range(0.01..0.5)).unwrap();
            for v in std::iter::once(&w.ego).chain(&w.participants) {
                assert!((-PI..PI).contains(&v.state.heading));
                assert!(v.state.speed >= 0.0);
            }
        }
    }

    #[test]
    fn pinned_script_replays() {
        let mut w = WorldState::new(car("ego", 0.0, 0.0));
        let mut a = car("a", 0.0, 0.0);
        a.script = Some(ScriptedControls::Pinned(vec![ControlInput::new(0.0, 1.0)]));
        w.participants.push(a);
        let n = advance_world(&w, &BTreeMap::new(), 1.0).unwrap();
        assert_eq!(n.participants[0].state.speed, 1.0);
        assert_eq!(n.participants[0].state.x, 0.5);
    }

    #[test]
    fn invalid_dt_rejected() {
        let w = WorldState::new(car("ego", 0.0, 0.0));
        assert!(advance_world(&w, &BTreeMap::new(), 0.0).is_err());
    }
}
