//! Episode execution: the per-tick arbitration pipeline and the closed-loop
//! runner around it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::arbiter::{arbitrate, ArbitrationResult, EgoBehavior};
use crate::geometry::{wrap_angle, Polyline, Vec2};
use crate::links::{generate_links, significant_objects, LinkSet};
use crate::motion::{LateralPlan, Longitudinal, Maneuver};
use crate::scene::{
    attach_measurements, generate_objects, Ego, EntityRecord, Extent, Measurement, MeasurementSet, ObjectId, ObjectSet,
    PerceivedScene, Pose, BUILDING, LANE, PEDESTRIAN, TRAFFIC_SIGN,
};
use crate::sim::{
    advance_world, sample_controls, KinematicState, Lane, RandomSource, ScriptedControls, Vehicle, WorldState,
};
use crate::threat::{simulate_threats, ObjectBehavior, SimulationVerifier, ThreatContext, ThreatMatrix, ThreatSource};

use super::format::{lane_object_id, Mode, MotionSpec, Scenario, EGO_ID};
use super::trace::{TickRecord, TraceHeader, TraceLog};
use super::{PipelineError, RunError};

/// Recorded state of one participant at a tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticipantState {
    pub id: ObjectId,
    pub lane: Option<u32>,
    pub state: KinematicState,
}

/// Everything the pipeline reads at one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct TickInputs {
    pub clock: f64,
    pub ego: KinematicState,
    /// Lateral offset from the task path the ego is holding.
    pub ego_offset: f64,
    pub participants: Vec<ParticipantState>,
}

#[derive(Debug, Clone)]
pub struct TickOutcome {
    pub ego_lane: Option<u32>,
    pub objects: ObjectSet,
    pub significant: ObjectSet,
    pub links: LinkSet,
    pub threats: ThreatMatrix,
    pub result: ArbitrationResult,
    pub context: ThreatContext,
}

/// Lane whose strip contains `p`, nearest centerline first.
pub fn lane_at(lanes: &[Lane], p: Vec2) -> Option<u32> {
    lanes
        .iter()
        .filter_map(|l| {
            let off = l.polyline()?.project(p).offset.abs();
            (off <= 0.5 * l.width).then_some((off, l.index))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, i)| i)
}

fn ego_lane(s: &Scenario, ego: &KinematicState) -> Option<u32> {
    if s.map.lanes.is_empty() {
        Some(s.ego.task.target_lane)
    } else {
        lane_at(&s.map.lanes, ego.position())
    }
}

fn perceive(s: &Scenario, inputs: &TickInputs) -> (PerceivedScene, MeasurementSet) {
    let mut entities = Vec::new();
    let mut measurements = MeasurementSet::default();
    let edges = (
        s.map.lanes.iter().map(|l| l.index).min(),
        s.map.lanes.iter().map(|l| l.index).max(),
    );

    for (spec, ps) in s.participants.iter().zip(&inputs.participants) {
        let mut annotations = spec.annotations.clone();
        annotations.insert("wheelbase".into(), ps.state.wheelbase.to_string());
        if let Some(lane) = ps.lane.filter(|_| spec.kind != PEDESTRIAN) {
            if edges.0 == Some(lane) {
                annotations.insert("lane_edge_right".into(), "true".into());
            }
            if edges.1 == Some(lane) {
                annotations.insert("lane_edge_left".into(), "true".into());
            }
        }
        entities.push(EntityRecord {
            id: ps.id.clone(),
            kind: spec.kind.clone(),
            pose: Pose {
                x: ps.state.x,
                y: ps.state.y,
                heading: ps.state.heading,
            },
            extent: spec.extent,
            annotations,
        });
        measurements.insert(
            ps.id.clone(),
            Measurement {
                speed: Some(ps.state.speed),
                lane: ps.lane,
                ..Measurement::default()
            },
        );
    }

    for lane in &s.map.lanes {
        let Some(path) = lane.polyline() else { continue };
        let proj = path.project(inputs.ego.position());
        let foot = path.point_at(proj.station.clamp(0.0, path.length()));
        entities.push(EntityRecord {
            id: lane_object_id(lane.index),
            kind: LANE.into(),
            pose: Pose {
                x: foot.x,
                y: foot.y,
                heading: wrap_angle(proj.heading),
            },
            extent: Extent::new(path.length(), lane.width),
            annotations: BTreeMap::from([("lane".to_owned(), lane.index.to_string())]),
        });
    }

    for b in &s.map.buildings {
        let c = b.centroid();
        let (lo, hi) = b
            .polygon
            .iter()
            .fold(([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]), |(lo, hi), p| {
                ([lo[0].min(p[0]), lo[1].min(p[1])], [hi[0].max(p[0]), hi[1].max(p[1])])
            });
        entities.push(EntityRecord {
            id: b.id.clone(),
            kind: BUILDING.into(),
            pose: Pose {
                x: c.x,
                y: c.y,
                heading: 0.0,
            },
            extent: Extent::new((hi[0] - lo[0]).max(0.1), (hi[1] - lo[1]).max(0.1)),
            annotations: BTreeMap::new(),
        });
    }

    for sign in &s.map.signs {
        entities.push(EntityRecord {
            id: sign.id.clone(),
            kind: TRAFFIC_SIGN.into(),
            pose: Pose {
                x: sign.position[0],
                y: sign.position[1],
                heading: 0.0,
            },
            extent: Extent::new(0.5, 0.5),
            annotations: sign.annotations.clone(),
        });
    }

    (PerceivedScene { entities }, measurements)
}

/// Runs objects → links → threats → arbitration for one tick.
pub fn arbitrate_tick(s: &Scenario, inputs: &TickInputs) -> Result<TickOutcome, PipelineError> {
    let (scene, measurements) = perceive(s, inputs);
    let raw = generate_objects(&scene, &s.registry())?;
    let ego = Ego {
        state: inputs.ego,
        extent: s.ego.extent,
        lane: ego_lane(s, &inputs.ego),
    };
    let objects = attach_measurements(&raw, &measurements, &ego, &s.scene)?;
    let links = generate_links(&objects, &s.ego.task, &s.rubric.rubric());
    let significant = significant_objects(&objects, &links, s.rubric.s_min);

    let context = ThreatContext::new(ego, &s.ego.task, inputs.ego_offset, &s.map.lanes, s.models, s.limits)?;
    let horizon = s.horizon.at(inputs.clock);
    let source = match s.mode {
        Mode::GoldenFixture => ThreatSource::Pinned(
            s.participants
                .iter()
                .filter_map(|p| p.pinned.clone().map(|row| (p.id.clone(), row)))
                .collect(),
        ),
        Mode::ClosedLoop => ThreatSource::Simulated,
    };
    let threats = simulate_threats(&significant, &links, &context, &horizon, &source)?;
    let verifier = SimulationVerifier {
        ctx: &context,
        objects: &significant,
        horizon,
    };
    let result = arbitrate(&links, &threats, &s.arbiter, &verifier);
    Ok(TickOutcome {
        ego_lane: ego.lane,
        objects,
        significant,
        links,
        threats,
        result,
        context,
    })
}

/// Behavior-driven participant: follows its lane, then switches to the
/// scripted behavior at its start time.
struct BehaviorDriver {
    behavior: ObjectBehavior,
    start: f64,
    maneuver: Maneuver,
    origin: f64,
    switched: bool,
}

/// Ego behavior → control mapping.
struct EgoDriver {
    path: Polyline,
    target: f64,
    plan: LateralPlan,
}

impl EgoDriver {
    fn control(
        &mut self,
        s: &Scenario,
        state: &KinematicState,
        clock: f64,
        b: EgoBehavior,
    ) -> crate::sim::ControlInput {
        let m = &s.models;
        let shift = match b {
            EgoBehavior::LaneChangeLeft => m.lane_width,
            EgoBehavior::LaneChangeRight => -m.lane_width,
            _ => 0.0,
        };
        if shift != 0.0 && self.plan.finished(clock) {
            let here = self.path.project(state.position()).offset;
            self.target += shift;
            self.plan = LateralPlan {
                from: here,
                to: self.target,
                start: clock,
                duration: m.lane_change_duration,
            };
        }
        let longitudinal = match b {
            EgoBehavior::ReduceSpeed => Longitudinal::Brake(m.reduce_speed_decel),
            EgoBehavior::EmergencyStop => Longitudinal::Brake(m.emergency_decel),
            _ => Longitudinal::Hold,
        };
        Maneuver {
            path: self.path.clone(),
            lateral: self.plan,
            longitudinal,
            tracking_frequency: m.tracking_frequency,
        }
        .control(state, clock, &s.limits)
    }
}

/// Runs a scenario to completion.
///
/// The episode ends after `ticks` ticks or once the ego passes the end of its
/// task path. Every tick is recorded before the world is advanced.
pub fn run_episode(s: &Scenario) -> Result<TraceLog, RunError> {
    s.validate()?;
    let dt = s.tick;
    let path = s.ego.task.path().expect("validated task");
    let initial_offset = path.project(s.ego.state.position()).offset;

    let mut world = WorldState::new(Vehicle::new(EGO_ID, "Ego", s.ego.state, s.ego.extent));
    world.lanes = s.map.lanes.clone();
    world.buildings = s.map.buildings.clone();
    world.limits = s.limits;
    let rng = RandomSource::new(s.seed);
    for (i, p) in s.participants.iter().enumerate() {
        let mut v = Vehicle::new(p.id.clone(), p.kind.clone(), p.state, p.extent);
        v.script = match &p.motion {
            MotionSpec::Sampled { bounds, speed_gain } => Some(ScriptedControls::Sampled {
                sequence: sample_controls(&mut rng.split(i as u64 + 1), bounds, s.ticks as usize),
                speed_gain: *speed_gain,
            }),
            MotionSpec::Scripted { controls } => Some(ScriptedControls::Pinned(controls.clone())),
            MotionSpec::Behavior { .. } => None,
        };
        world.participants.push(v);
    }

    let run_ctx = ThreatContext::new(
        crate::scene::Ego {
            state: s.ego.state,
            extent: s.ego.extent,
            lane: None,
        },
        &s.ego.task,
        initial_offset,
        &s.map.lanes,
        s.models,
        s.limits,
    )
    .map_err(|e| RunError::Tick {
        tick: 0,
        source: e.into(),
    })?;
    let mut drivers: BTreeMap<usize, BehaviorDriver> = s
        .participants
        .iter()
        .enumerate()
        .filter_map(|(i, p)| match p.motion {
            MotionSpec::Behavior { behavior, start } => Some((
                i,
                BehaviorDriver {
                    behavior,
                    start,
                    maneuver: run_ctx.maneuver_for(&p.kind, p.lane, &p.state, ObjectBehavior::LaneFollow),
                    origin: 0.0,
                    switched: behavior == ObjectBehavior::LaneFollow,
                },
            )),
            _ => None,
        })
        .collect();
    let mut ego_driver = EgoDriver {
        path: path.clone(),
        target: initial_offset,
        plan: LateralPlan::hold(initial_offset),
    };

    let mut records = Vec::with_capacity(s.ticks as usize);
    for n in 0..s.ticks as u64 {
        let clock = n as f64 * dt;
        let participants: Vec<ParticipantState> = world
            .participants
            .iter()
            .zip(&s.participants)
            .map(|(v, spec)| ParticipantState {
                id: v.id.clone(),
                lane: if s.map.lanes.is_empty() {
                    spec.lane
                } else {
                    lane_at(&s.map.lanes, v.state.position())
                },
                state: v.state,
            })
            .collect();
        let inputs = TickInputs {
            clock,
            ego: world.ego.state,
            ego_offset: ego_driver.target,
            participants,
        };
        let outcome = arbitrate_tick(s, &inputs).map_err(|source| RunError::Tick { tick: n, source })?;
        let selected = outcome.result.selected;
        records.push(TickRecord {
            tick: n,
            clock,
            ego: inputs.ego,
            ego_lane: outcome.ego_lane,
            ego_offset: inputs.ego_offset,
            participants: inputs.participants,
            threats: outcome.threats,
            description: outcome.result.description.render(),
            result: outcome.result,
        });

        if s.mode == Mode::GoldenFixture {
            continue;
        }
        let ego_state = world.ego.state;
        if path.project(ego_state.position()).station >= path.length() {
            break;
        }
        let mut controls = BTreeMap::new();
        controls.insert(world.ego.id.clone(), ego_driver.control(s, &ego_state, clock, selected));
        for (i, d) in drivers.iter_mut() {
            let v = &world.participants[*i];
            if !d.switched && clock + 1e-9 >= d.start {
                let spec = &s.participants[*i];
                let lane = spec.lane.or_else(|| lane_at(&s.map.lanes, v.state.position()));
                d.maneuver = run_ctx.maneuver_for(&spec.kind, lane, &v.state, d.behavior);
                d.origin = clock;
                d.switched = true;
            }
            controls.insert(v.id.clone(), d.maneuver.control(&v.state, clock - d.origin, &s.limits));
        }
        world = advance_world(&world, &controls, dt).map_err(|e| RunError::Tick {
            tick: n,
            source: e.into(),
        })?;
    }

    Ok(TraceLog {
        header: TraceHeader {
            name: s.name.clone(),
            config_hash: s.config_hash(),
            seed: s.seed,
            scenario: s.clone(),
        },
        ticks: records,
    })
}

/// Recorded inputs of a tick, for re-arbitration.
pub fn inputs_of(record: &TickRecord) -> TickInputs {
    TickInputs {
        clock: record.clock,
        ego: record.ego,
        ego_offset: record.ego_offset,
        participants: record.participants.clone(),
    }
}

/// Ground-truth world at a recorded tick, for rendering.
pub fn world_at(s: &Scenario, record: &TickRecord) -> WorldState {
    let mut world = WorldState::new(Vehicle::new(EGO_ID, "Ego", record.ego, s.ego.extent));
    world.lanes = s.map.lanes.clone();
    world.buildings = s.map.buildings.clone();
    world.limits = s.limits;
    world.clock = record.clock;
    world.tick = record.tick;
    world.participants = s
        .participants
        .iter()
        .zip(&record.participants)
        .map(|(spec, ps)| Vehicle::new(ps.id.clone(), spec.kind.clone(), ps.state, spec.extent))
        .collect();
    world
}
