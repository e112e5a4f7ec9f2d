//! Per-object behavior hypotheses, forward simulation of impact times and the
//! resulting threat matrix.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arbiter::{EgoBehavior, ThreatVerifier};
use crate::geometry::Polyline;
use crate::links::{LinkSet, TaskTrajectory};
use crate::motion::{LateralPlan, Longitudinal, Maneuver, MotionModels};
use crate::scene::{Ego, Extent, ObjectId, ObjectSet, RangeBand, Relation, SceneObject, PEDESTRIAN};
use crate::sim::{footprint, step_single_track, ControlLimits, KinematicState, Lane};

/// Probabilities must sum to one within this tolerance.
pub const DISTRIBUTION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ObjectBehavior {
    LaneFollow,
    LaneChangeRight,
    LaneChangeLeft,
    Stop,
}

impl ObjectBehavior {
    pub const ALL: [ObjectBehavior; 4] = [
        ObjectBehavior::LaneFollow,
        ObjectBehavior::LaneChangeRight,
        ObjectBehavior::LaneChangeLeft,
        ObjectBehavior::Stop,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ObjectBehavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeHorizon {
    /// Current time, s.
    pub current: f64,
    /// Look-ahead span, s.
    pub span: f64,
    /// Integration step, s.
    pub step: f64,
}

impl Default for TimeHorizon {
    fn default() -> Self {
        Self {
            current: 0.0,
            span: 40.0,
            step: 0.1,
        }
    }
}

impl TimeHorizon {
    pub fn validate(&self) -> Result<(), ThreatError> {
        if self.span > 0.0 && self.step > 0.0 && self.step <= self.span && self.current.is_finite() {
            Ok(())
        } else {
            Err(ThreatError::InvalidHorizon(*self))
        }
    }

    pub fn steps(&self) -> usize {
        (self.span / self.step + 1e-9).floor() as usize
    }

    pub fn at(&self, current: f64) -> Self {
        Self { current, ..*self }
    }
}

/// Earliest footprint contact, or none inside the horizon.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(from = "Option<f64>", into = "Option<f64>")]
pub enum ImpactTime {
    At(f64),
    Never,
}

impl From<Option<f64>> for ImpactTime {
    fn from(v: Option<f64>) -> Self {
        v.map_or(ImpactTime::Never, ImpactTime::At)
    }
}

impl From<ImpactTime> for Option<f64> {
    fn from(t: ImpactTime) -> Self {
        t.seconds()
    }
}

impl ImpactTime {
    pub fn seconds(self) -> Option<f64> {
        match self {
            ImpactTime::At(t) => Some(t),
            ImpactTime::Never => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ImpactTime::At(_))
    }

    /// Contact happens no later than `span`.
    pub fn within(self, span: f64) -> bool {
        matches!(self, ImpactTime::At(t) if t <= span)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BehaviorDistribution(pub [f64; 4]);

impl BehaviorDistribution {
    pub fn get(&self, k: ObjectBehavior) -> f64 {
        self.0[k.index()]
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn is_normalized(&self) -> bool {
        self.0.iter().all(|p| (0.0..=1.0).contains(p)) && (self.sum() - 1.0).abs() <= DISTRIBUTION_TOLERANCE
    }

    /// Zeroes the listed behaviors and rescales the rest to unit mass.
    pub fn without(&self, impossible: &[ObjectBehavior]) -> Self {
        let mut p = self.0;
        for k in impossible {
            p[k.index()] = 0.0;
        }
        let mass: f64 = p.iter().sum();
        if mass <= 0.0 {
            return BehaviorDistribution([1.0, 0.0, 0.0, 0.0]);
        }
        BehaviorDistribution(p.map(|v| v / mass))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreatEntry {
    pub object: ObjectId,
    pub behavior: ObjectBehavior,
    pub probability: f64,
    /// Significance of the ego→object link.
    pub significance: f64,
    pub impact: ImpactTime,
    pub threat: f64,
    pub counter: EgoBehavior,
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreatRow {
    pub object: ObjectId,
    pub relation: Relation,
    pub band: RangeBand,
    pub significance: f64,
    /// One entry per [`ObjectBehavior`], in declaration order.
    pub entries: Vec<ThreatEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreatMatrix {
    pub horizon: TimeHorizon,
    pub rows: Vec<ThreatRow>,
}

impl ThreatMatrix {
    pub fn empty(horizon: TimeHorizon) -> Self {
        Self {
            horizon,
            rows: Vec::new(),
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = &ThreatEntry> {
        self.rows.iter().flat_map(|r| r.entries.iter())
    }

    pub fn entry(&self, object: &ObjectId, behavior: ObjectBehavior) -> Option<&ThreatEntry> {
        self.row(object).map(|r| &r.entries[behavior.index()])
    }

    pub fn row(&self, object: &ObjectId) -> Option<&ThreatRow> {
        self.rows.iter().find(|r| &r.object == object)
    }

    pub fn len(&self) -> usize {
        self.rows.iter().map(|r| r.entries.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThreatError {
    #[error("behavior distributions are undefined for static object {0}")]
    StaticObject(ObjectId),
    #[error("significant object {0} has no internal link")]
    MissingLink(ObjectId),
    #[error("invalid time horizon {0:?}")]
    InvalidHorizon(TimeHorizon),
    #[error("invalid task trajectory: {0}")]
    InvalidTask(String),
}

/// Behavior priors keyed on what the object signals.
pub fn predict_behavior_distribution(obj: &SceneObject) -> Result<BehaviorDistribution, ThreatError> {
    if !obj.dynamic {
        return Err(ThreatError::StaticObject(obj.id.clone()));
    }
    let base = if obj.kind == PEDESTRIAN {
        if obj.flag("crossing_intent") {
            [0.7, 0.05, 0.05, 0.2]
        } else {
            [0.2, 0.05, 0.05, 0.7]
        }
    } else {
        match (obj.text("turn_signal"), obj.text("intent")) {
            (Some("right"), _) => [0.2, 0.59, 0.01, 0.2],
            (Some("left"), _) => [0.2, 0.01, 0.59, 0.2],
            (_, Some("stop")) => [0.2, 0.2, 0.1, 0.5],
            _ if obj.flag("brake_lights") => [0.2, 0.2, 0.1, 0.5],
            _ => [0.6, 0.1, 0.1, 0.2],
        }
    };
    let mut impossible = Vec::new();
    if obj.flag("lane_edge_left") {
        impossible.push(ObjectBehavior::LaneChangeLeft);
    }
    if obj.flag("lane_edge_right") {
        impossible.push(ObjectBehavior::LaneChangeRight);
    }
    let dist = BehaviorDistribution(base);
    Ok(if impossible.is_empty() {
        dist
    } else {
        dist.without(&impossible)
    })
}

/// Whether the ego can escape sideways.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EscapeLanes {
    pub left: bool,
    pub right: bool,
}

impl EscapeLanes {
    fn lateral(self) -> EgoBehavior {
        if self.right {
            EgoBehavior::LaneChangeRight
        } else if self.left {
            EgoBehavior::LaneChangeLeft
        } else {
            EgoBehavior::EmergencyStop
        }
    }
}

/// The ego behavior expected to eliminate the threat `(obj, k)`.
///
/// | relation         | LaneFollow   | ChangeRight  | ChangeLeft   | Stop        |
/// |------------------|--------------|--------------|--------------|-------------|
/// | SameLaneAhead    | ReduceSpeed  | ReduceSpeed  | ReduceSpeed  | ReduceSpeed |
/// | LeftAdjacent     | KeepLane     | ReduceSpeed  | KeepLane     | KeepLane    |
/// | RightAdjacent    | KeepLane     | KeepLane     | ReduceSpeed  | KeepLane    |
/// | SameLaneBehind   | lateral      | lateral      | lateral      | KeepLane    |
/// | Crossing         | ReduceSpeed  | ReduceSpeed  | ReduceSpeed  | ReduceSpeed |
/// | OffRoad          | KeepLane     | KeepLane     | KeepLane     | KeepLane    |
///
/// "lateral" is a lane change to a free neighbor lane, right first, and an
/// emergency stop when neither is free.
pub fn counter_behavior(obj: &SceneObject, k: ObjectBehavior, escape: EscapeLanes) -> EgoBehavior {
    use EgoBehavior::{KeepLane, ReduceSpeed};
    match (obj.relation, k) {
        (Some(Relation::SameLaneAhead), _) | (Some(Relation::Crossing), _) => ReduceSpeed,
        (Some(Relation::LeftAdjacent), ObjectBehavior::LaneChangeRight) => ReduceSpeed,
        (Some(Relation::RightAdjacent), ObjectBehavior::LaneChangeLeft) => ReduceSpeed,
        (Some(Relation::SameLaneBehind), ObjectBehavior::Stop) => KeepLane,
        (Some(Relation::SameLaneBehind), _) => escape.lateral(),
        _ => KeepLane,
    }
}

/// Pinned (probability, impact time) row, bypassing prediction and simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PinnedRow {
    pub probabilities: BehaviorDistribution,
    pub impact_times: [ImpactTime; 4],
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum ThreatSource {
    #[default]
    Simulated,
    Pinned(BTreeMap<ObjectId, PinnedRow>),
}

/// Everything forward simulation needs beyond the objects themselves.
#[derive(Debug, Clone)]
pub struct ThreatContext {
    pub ego: Ego,
    pub ego_path: Polyline,
    /// Lateral offset from the task path the ego is holding, m.
    pub ego_offset: f64,
    pub lanes: BTreeMap<u32, Polyline>,
    pub models: MotionModels,
    pub limits: ControlLimits,
}

impl ThreatContext {
    pub fn new(
        ego: Ego,
        task: &TaskTrajectory,
        ego_offset: f64,
        lanes: &[Lane],
        models: MotionModels,
        limits: ControlLimits,
    ) -> Result<Self, ThreatError> {
        task.validate().map_err(ThreatError::InvalidTask)?;
        let ego_path = task
            .path()
            .ok_or_else(|| ThreatError::InvalidTask("degenerate path".into()))?;
        let lanes = lanes
            .iter()
            .filter_map(|l| l.polyline().map(|p| (l.index, p)))
            .collect();
        Ok(Self {
            ego,
            ego_path,
            ego_offset,
            lanes,
            models,
            limits,
        })
    }

    /// Reference maneuver for the ego executing `behavior`.
    pub fn ego_maneuver(&self, behavior: EgoBehavior) -> Maneuver {
        let m = &self.models;
        let here = self.ego_path.project(self.ego.state.position()).offset;
        let target = match behavior {
            EgoBehavior::LaneChangeLeft => self.ego_offset + m.lane_width,
            EgoBehavior::LaneChangeRight => self.ego_offset - m.lane_width,
            _ => self.ego_offset,
        };
        let longitudinal = match behavior {
            EgoBehavior::ReduceSpeed => Longitudinal::Brake(m.reduce_speed_decel),
            EgoBehavior::EmergencyStop => Longitudinal::Brake(m.emergency_decel),
            _ => Longitudinal::Hold,
        };
        Maneuver {
            path: self.ego_path.clone(),
            lateral: LateralPlan {
                from: here,
                to: target,
                start: 0.0,
                duration: m.lane_change_duration,
            },
            longitudinal,
            tracking_frequency: m.tracking_frequency,
        }
    }

    /// Reference maneuver for `obj` under hypothesis `k`. Vehicles follow
    /// their lane centerline when the map has it; everything else moves
    /// along its current heading.
    pub fn object_maneuver(&self, obj: &SceneObject, k: ObjectBehavior) -> Maneuver {
        self.maneuver_for(&obj.kind, obj.lane, &obj.state, k)
    }

    /// Same as [`Self::object_maneuver`] from raw kind, lane and state.
    pub fn maneuver_for(&self, kind: &str, lane: Option<u32>, state: &KinematicState, k: ObjectBehavior) -> Maneuver {
        let m = &self.models;
        let lane_path = if kind == PEDESTRIAN {
            None
        } else {
            lane.and_then(|l| self.lanes.get(&l))
        };
        let path = lane_path
            .cloned()
            .unwrap_or_else(|| Polyline::ray(state.position(), state.heading, 50.0, 5000.0));
        let here = path.project(state.position()).offset;
        let (target, longitudinal) = match k {
            ObjectBehavior::LaneFollow => (0.0, Longitudinal::Hold),
            ObjectBehavior::LaneChangeLeft => (m.lane_width, Longitudinal::Hold),
            ObjectBehavior::LaneChangeRight => (-m.lane_width, Longitudinal::Hold),
            ObjectBehavior::Stop => (0.0, Longitudinal::Brake(m.stop_decel)),
        };
        Maneuver {
            path,
            lateral: LateralPlan {
                from: here,
                to: target,
                start: 0.0,
                duration: m.lane_change_duration,
            },
            longitudinal,
            tracking_frequency: m.tracking_frequency,
        }
    }

    /// Impact time with the ego continuing its task at the current speed.
    pub fn impact_time(&self, obj: &SceneObject, k: ObjectBehavior, h: &TimeHorizon) -> ImpactTime {
        self.impact_time_under(EgoBehavior::KeepLane, obj, k, h)
    }

    /// Impact time with the ego executing `ego_behavior`.
    pub fn impact_time_under(
        &self,
        ego_behavior: EgoBehavior,
        obj: &SceneObject,
        k: ObjectBehavior,
        h: &TimeHorizon,
    ) -> ImpactTime {
        first_contact(
            Agent {
                state: self.ego.state,
                extent: self.ego.extent,
                maneuver: &self.ego_maneuver(ego_behavior),
            },
            Agent {
                state: obj.state,
                extent: obj.extent,
                maneuver: &self.object_maneuver(obj, k),
            },
            h,
            &self.limits,
        )
    }

    /// Neighbor lanes the ego could move into.
    pub fn escape_lanes(&self, important: &ObjectSet) -> EscapeLanes {
        let (left_exists, right_exists) = match self.ego.lane {
            Some(lane) if !self.lanes.is_empty() => (
                self.lanes.contains_key(&(lane + 1)),
                lane > 1 && self.lanes.contains_key(&(lane - 1)),
            ),
            _ => (true, true),
        };
        let blocked = |rel: Relation| {
            important
                .iter()
                .any(|o| o.dynamic && o.relation == Some(rel) && o.band == Some(RangeBand::Near))
        };
        EscapeLanes {
            left: left_exists && !blocked(Relation::LeftAdjacent),
            right: right_exists && !blocked(Relation::RightAdjacent),
        }
    }
}

struct Agent<'a> {
    state: KinematicState,
    extent: Extent,
    maneuver: &'a Maneuver,
}

/// Steps both agents in lockstep and reports the first step at which their
/// footprints touch.
fn first_contact(ego: Agent<'_>, other: Agent<'_>, h: &TimeHorizon, limits: &ControlLimits) -> ImpactTime {
    let reach =
        footprint(&ego.state, &ego.extent).bounding_radius() + footprint(&other.state, &other.extent).bounding_radius();
    let mut a = ego.state;
    let mut b = other.state;
    for n in 1..=h.steps() {
        let t = (n - 1) as f64 * h.step;
        let ua = ego.maneuver.control(&a, t, limits);
        let ub = other.maneuver.control(&b, t, limits);
        a = step_single_track(&a, ua, h.step).expect("positive step");
        b = step_single_track(&b, ub, h.step).expect("positive step");
        if (a.position() - b.position()).norm() > reach {
            continue;
        }
        if footprint(&a, &ego.extent).overlaps(&footprint(&b, &other.extent)) {
            return ImpactTime::At(n as f64 * h.step);
        }
    }
    ImpactTime::Never
}

/// Builds the threat matrix for the significant objects.
///
/// Static objects carry no behaviors and get no row. For every dynamic
/// object and behavior: probability from the prior (or pinned row), impact
/// time from forward simulation (or pinned row), threat level
/// `significance × probability` when contact falls inside the horizon and
/// zero otherwise.
pub fn simulate_threats(
    important: &ObjectSet,
    links: &LinkSet,
    ctx: &ThreatContext,
    h: &TimeHorizon,
    source: &ThreatSource,
) -> Result<ThreatMatrix, ThreatError> {
    h.validate()?;
    let escape = ctx.escape_lanes(important);
    let mut rows = Vec::new();
    for obj in important.iter().filter(|o| o.dynamic) {
        let significance = links
            .internal(&obj.id)
            .ok_or_else(|| ThreatError::MissingLink(obj.id.clone()))?
            .significance;
        let pinned = match source {
            ThreatSource::Pinned(rows) => rows.get(&obj.id),
            ThreatSource::Simulated => None,
        };
        let distribution = match pinned {
            Some(p) => p.probabilities,
            None => predict_behavior_distribution(obj)?,
        };
        let entries = ObjectBehavior::ALL
            .iter()
            .map(|&k| {
                let impact = match pinned {
                    Some(p) => p.impact_times[k.index()],
                    None => ctx.impact_time(obj, k, h),
                };
                let probability = distribution.get(k);
                let active = impact.within(h.span);
                ThreatEntry {
                    object: obj.id.clone(),
                    behavior: k,
                    probability,
                    significance,
                    impact,
                    threat: if active { significance * probability } else { 0.0 },
                    counter: counter_behavior(obj, k, escape),
                    active,
                }
            })
            .collect();
        rows.push(ThreatRow {
            object: obj.id.clone(),
            relation: obj.relation.unwrap_or(Relation::OffRoad),
            band: obj.band.unwrap_or(RangeBand::Far),
            significance,
            entries,
        });
    }
    Ok(ThreatMatrix { horizon: *h, rows })
}

/// Re-simulates threats with the ego following a candidate behavior.
pub struct SimulationVerifier<'a> {
    pub ctx: &'a ThreatContext,
    pub objects: &'a ObjectSet,
    pub horizon: TimeHorizon,
}

impl ThreatVerifier for SimulationVerifier<'_> {
    fn impact_under(&self, candidate: EgoBehavior, object: &ObjectId, behavior: ObjectBehavior) -> ImpactTime {
        match self.objects.get(object) {
            Some(obj) => self.ctx.impact_time_under(candidate, obj, behavior, &self.horizon),
            None => ImpactTime::Never,
        }
    }
}

/// Straight ego task along +x at the origin, used by examples and tests.
pub fn straight_task(target_lane: u32, desired_speed: f64) -> TaskTrajectory {
    TaskTrajectory {
        waypoints: vec![[-100.0, 0.0], [5000.0, 0.0]],
        target_lane,
        destination: "straight".into(),
        desired_speed,
        comfort_accel: 2.0,
    }
}

/// Centerline of a straight lane along +x at lateral position `y`.
pub fn straight_lane(index: u32, y: f64, width: f64) -> Lane {
    Lane {
        index,
        centerline: vec![[-1000.0, y], [6000.0, y]],
        width,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{PropertyValue, TRAFFIC_CAR};

    fn car(id: &str, x: f64, y: f64, v: f64, lane: u32, relation: Relation, band: RangeBand) -> SceneObject {
        SceneObject {
            id: id.into(),
            kind: TRAFFIC_CAR.into(),
            dynamic: true,
            state: KinematicState::new(x, y, 0.0, v, 2.7),
            extent: Extent::new(4.5, 1.8),
            lane: Some(lane),
            properties: Default::default(),
            relation: Some(relation),
            band: Some(band),
            range: Some(x.hypot(y)),
        }
    }

    fn ego(v: f64) -> Ego {
        Ego {
            state: KinematicState::new(0.0, 0.0, 0.0, v, 2.7),
            extent: Extent::new(4.5, 1.8),
            lane: Some(2),
        }
    }

    fn ctx(v: f64) -> ThreatContext {
        ThreatContext::new(
            ego(v),
            &straight_task(2, v),
            0.0,
            &[
                straight_lane(1, -3.5, 3.5),
                straight_lane(2, 0.0, 3.5),
                straight_lane(3, 3.5, 3.5),
            ],
            MotionModels::default(),
            ControlLimits::default(),
        )
        .unwrap()
    }

    #[test]
    fn table_rows_from_annotations() {
        let mut c1 = car("Car1", 24.5, 3.5, 24.0, 3, Relation::LeftAdjacent, RangeBand::Near);
        c1.properties
            .insert("turn_signal".into(), PropertyValue::Text("right".into()));
        assert_eq!(predict_behavior_distribution(&c1).unwrap().0, [0.2, 0.59, 0.01, 0.2]);
        let c2 = car("Car2", 129.5, 0.0, 20.0, 2, Relation::SameLaneAhead, RangeBand::Far);
        assert_eq!(predict_behavior_distribution(&c2).unwrap().0, [0.6, 0.1, 0.1, 0.2]);
        let mut c3 = car("Car3", 19.5, -3.5, 24.5, 1, Relation::RightAdjacent, RangeBand::Near);
        c3.properties
            .insert("intent".into(), PropertyValue::Text("stop".into()));
        assert_eq!(predict_behavior_distribution(&c3).unwrap().0, [0.2, 0.2, 0.1, 0.5]);
        for d in [&c1, &c2, &c3].map(|c| predict_behavior_distribution(c).unwrap()) {
            assert!(d.is_normalized());
        }
    }

    #[test]
    fn leftmost_lane_renormalizes() {
        let mut c = car("a", 10.0, 3.5, 20.0, 3, Relation::LeftAdjacent, RangeBand::Near);
        c.properties.insert("lane_edge_left".into(), PropertyValue::Flag(true));
        let d = predict_behavior_distribution(&c).unwrap();
        // Oracle: drop LaneChangeLeft (0.1) and divide the rest by 0.9.
        let expected = [0.6 / 0.9, 0.1 / 0.9, 0.0, 0.2 / 0.9];
        for (a, b) in d.0.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(d.is_normalized());
    }

    #[test]
    fn static_object_has_no_distribution() {
        let mut c = car("Lane1", 0.0, 0.0, 0.0, 1, Relation::RightAdjacent, RangeBand::Near);
        c.dynamic = false;
        assert_eq!(
            predict_behavior_distribution(&c),
            Err(ThreatError::StaticObject("Lane1".into()))
        );
    }

    #[test]
    fn closing_gap_matches_closed_form() {
        // 50 m bumper gap, 2 m/s closing speed.
        let c = car("a", 54.5, 0.0, 18.0, 2, Relation::SameLaneAhead, RangeBand::Far);
        let t = ctx(20.0).impact_time(&c, ObjectBehavior::LaneFollow, &TimeHorizon::default());
        let t = t.seconds().unwrap();
        assert!((t - 25.0).abs() <= 0.1 + 1e-9, "{t}");
    }

    #[test]
    fn receding_is_never() {
        let c = car("a", 20.0, 0.0, 25.0, 2, Relation::SameLaneAhead, RangeBand::Near);
        assert_eq!(
            ctx(20.0).impact_time(&c, ObjectBehavior::LaneFollow, &TimeHorizon::default()),
            ImpactTime::Never
        );
    }

    #[test]
    fn counter_behavior_table() {
        let esc = EscapeLanes {
            left: true,
            right: false,
        };
        let ahead = car("a", 50.0, 0.0, 10.0, 2, Relation::SameLaneAhead, RangeBand::Far);
        let left = car("b", 10.0, 3.5, 10.0, 3, Relation::LeftAdjacent, RangeBand::Near);
        let right = car("c", 10.0, -3.5, 10.0, 1, Relation::RightAdjacent, RangeBand::Near);
        let behind = car("d", -10.0, 0.0, 30.0, 2, Relation::SameLaneBehind, RangeBand::Near);
        assert_eq!(
            counter_behavior(&ahead, ObjectBehavior::LaneFollow, esc),
            EgoBehavior::ReduceSpeed
        );
        assert_eq!(
            counter_behavior(&left, ObjectBehavior::LaneChangeRight, esc),
            EgoBehavior::ReduceSpeed
        );
        assert_eq!(
            counter_behavior(&right, ObjectBehavior::Stop, esc),
            EgoBehavior::KeepLane
        );
        assert_eq!(
            counter_behavior(&behind, ObjectBehavior::LaneFollow, esc),
            EgoBehavior::LaneChangeLeft
        );
        assert_eq!(
            counter_behavior(&behind, ObjectBehavior::LaneFollow, EscapeLanes::default()),
            EgoBehavior::EmergencyStop
        );
    }

    #[test]
    fn empty_important_set_gives_empty_matrix() {
        let m = simulate_threats(
            &ObjectSet::new(),
            &LinkSet::default(),
            &ctx(20.0),
            &TimeHorizon::default(),
            &ThreatSource::Simulated,
        )
        .unwrap();
        assert!(m.is_empty());
    }

    #[test]
    fn missing_link_reported() {
        let set: ObjectSet = [car("a", 50.0, 0.0, 10.0, 2, Relation::SameLaneAhead, RangeBand::Far)]
            .into_iter()
            .collect();
        assert_eq!(
            simulate_threats(
                &set,
                &LinkSet::default(),
                &ctx(20.0),
                &TimeHorizon::default(),
                &ThreatSource::Simulated
            ),
            Err(ThreatError::MissingLink("a".into()))
        );
    }

    #[test]
    fn horizon_validation() {
        assert!(TimeHorizon::default().validate().is_ok());
        assert_eq!(TimeHorizon::default().steps(), 400);
        let bad = TimeHorizon {
            step: 50.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn impact_time_serializes_as_nullable_number() {
        let v = serde_json::to_string(&[ImpactTime::Never, ImpactTime::At(2.5)]).unwrap();
        assert_eq!(v, "[null,2.5]");
        let back: [ImpactTime; 2] = serde_json::from_str(&v).unwrap();
        assert_eq!(back, [ImpactTime::Never, ImpactTime::At(2.5)]);
    }
}
