//! The scenario file: one strict JSON document that fully determines an
//! episode.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::arbiter::ArbiterConfig;
use crate::links::{RubricRule, SignificanceRubric, TaskTrajectory};
use crate::motion::MotionModels;
use crate::scene::{Extent, KindRegistry, KindSpec, ObjectId, SceneConfig};
use crate::sim::{Building, ControlBounds, ControlInput, ControlLimits, GridSpec, KinematicState, Lane};
use crate::threat::{ObjectBehavior, PinnedRow, TimeHorizon, DISTRIBUTION_TOLERANCE};

pub const SCHEMA_VERSION: u32 = 1;

/// Id reserved for the ego vehicle.
pub const EGO_ID: &str = "ego";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Threat tables come from the file; the world is not advanced.
    GoldenFixture,
    /// Threats are simulated and the ego executes the selected behavior.
    ClosedLoop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    /// Free-form notes, e.g. where fixture values come from.
    #[serde(default)]
    pub notes: Vec<String>,
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    /// Number of arbitration ticks.
    pub ticks: u32,
    /// Arbitration period and simulation step, s.
    #[serde(default = "default_tick")]
    pub tick: f64,
    #[serde(default)]
    pub map: MapSpec,
    pub ego: EgoSpec,
    #[serde(default)]
    pub participants: Vec<ParticipantSpec>,
    /// Extra object kinds on top of the built-in ones.
    #[serde(default)]
    pub kinds: BTreeMap<String, KindSpec>,
    #[serde(default)]
    pub rubric: RubricSpec,
    #[serde(default)]
    pub scene: SceneConfig,
    #[serde(default)]
    pub arbiter: ArbiterConfig,
    #[serde(default)]
    pub horizon: TimeHorizon,
    #[serde(default)]
    pub models: MotionModels,
    #[serde(default)]
    pub limits: ControlLimits,
    #[serde(default)]
    pub grid: GridSpec,
}

fn default_tick() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    #[serde(default)]
    pub lanes: Vec<Lane>,
    #[serde(default)]
    pub buildings: Vec<Building>,
    #[serde(default)]
    pub signs: Vec<SignSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignSpec {
    pub id: ObjectId,
    pub position: [f64; 2],
    #[serde(default)]
    pub annotations: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EgoSpec {
    pub state: KinematicState,
    pub extent: Extent,
    pub task: TaskTrajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticipantSpec {
    pub id: ObjectId,
    pub kind: String,
    pub state: KinematicState,
    pub extent: Extent,
    #[serde(default)]
    pub lane: Option<u32>,
    #[serde(default)]
    pub annotations: BTreeMap<String, String>,
    /// Probabilities and impact times used instead of prediction and
    /// simulation.
    #[serde(default)]
    pub pinned: Option<PinnedRow>,
    #[serde(default)]
    pub motion: MotionSpec,
}

/// How a participant moves in closed loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", deny_unknown_fields)]
pub enum MotionSpec {
    /// Follows its lane and switches to `behavior` at time `start`.
    Behavior { behavior: ObjectBehavior, start: f64 },
    /// Random controls drawn from the episode seed.
    Sampled { bounds: ControlBounds, speed_gain: f64 },
    /// Fixed per-tick controls; the last one repeats.
    Scripted { controls: Vec<ControlInput> },
}

impl Default for MotionSpec {
    fn default() -> Self {
        MotionSpec::Behavior {
            behavior: ObjectBehavior::LaneFollow,
            start: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RubricSpec {
    /// Rules consulted before the built-in ones.
    pub overrides: Vec<RubricRule>,
    /// Minimum significance for an object to be considered.
    pub s_min: f64,
    pub object_mesh: bool,
}

impl Default for RubricSpec {
    fn default() -> Self {
        Self {
            overrides: Vec::new(),
            s_min: 0.05,
            object_mesh: false,
        }
    }
}

impl RubricSpec {
    pub fn rubric(&self) -> SignificanceRubric {
        SignificanceRubric {
            object_mesh: self.object_mesh,
            ..SignificanceRubric::default()
        }
        .with_overrides(&self.overrides)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("schema error at {path} (line {line}, column {column}): {reason}")]
    Schema {
        path: String,
        line: usize,
        column: usize,
        reason: String,
    },
    #[error("semantic error at {path}: {reason}")]
    Semantic { path: String, reason: String },
}

impl ScenarioError {
    fn semantic(path: impl Into<String>, reason: impl Into<String>) -> Self {
        ScenarioError::Semantic {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub fn path(&self) -> &str {
        match self {
            ScenarioError::Schema { path, .. } | ScenarioError::Semantic { path, .. } => path,
        }
    }
}

/// Parses and validates a scenario.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        ScenarioError::Schema {
            path,
            line: inner.line(),
            column: inner.column(),
            reason: inner.to_string(),
        }
    })?;
    scenario.validate()?;
    Ok(scenario)
}

impl Scenario {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// SHA-256 of the compact serialization, hex encoded.
    pub fn config_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("scenario serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn registry(&self) -> KindRegistry {
        let mut r = KindRegistry::default();
        for (name, spec) in &self.kinds {
            r.insert(name, spec.dynamic, spec.default_properties.clone());
        }
        r
    }

    /// Checks everything the schema alone cannot.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        use ScenarioError as E;
        if self.schema_version != SCHEMA_VERSION {
            return Err(E::semantic(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        if self.name.is_empty() {
            return Err(E::semantic("name", "must not be empty"));
        }
        if !(self.tick > 0.0 && self.tick.is_finite()) {
            return Err(E::semantic("tick", "must be positive"));
        }
        self.horizon
            .validate()
            .map_err(|e| E::semantic("horizon", e.to_string()))?;
        self.arbiter.validate().map_err(|e| E::semantic("arbiter", e))?;
        if !(0.0..=1.0).contains(&self.rubric.s_min) {
            return Err(E::semantic("rubric.s_min", "must lie in [0, 1]"));
        }
        for (i, r) in self.rubric.overrides.iter().enumerate() {
            if !(0.0..=1.0).contains(&r.significance) {
                return Err(E::semantic(
                    format!("rubric.overrides[{i}].significance"),
                    "must lie in [0, 1]",
                ));
            }
        }
        let m = &self.models;
        for (field, v) in [
            ("lane_change_duration", m.lane_change_duration),
            ("stop_decel", m.stop_decel),
            ("reduce_speed_decel", m.reduce_speed_decel),
            ("emergency_decel", m.emergency_decel),
            ("lane_width", m.lane_width),
            ("tracking_frequency", m.tracking_frequency),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(E::semantic(format!("models.{field}"), "must be positive"));
            }
        }
        if !(self.limits.max_steering > 0.0 && self.limits.max_accel > 0.0) {
            return Err(E::semantic("limits", "limits must be positive"));
        }
        let g = &self.grid;
        if g.width == 0 || g.height == 0 || !(g.resolution > 0.0) {
            return Err(E::semantic("grid", "grid dimensions must be positive"));
        }

        let mut lanes = BTreeSet::new();
        for (i, lane) in self.map.lanes.iter().enumerate() {
            let path = format!("map.lanes[{i}]");
            if lane.index == 0 {
                return Err(E::semantic(format!("{path}.index"), "lane indices start at 1"));
            }
            if !lanes.insert(lane.index) {
                return Err(E::semantic(
                    format!("{path}.index"),
                    format!("duplicate lane {}", lane.index),
                ));
            }
            if !(lane.width > 0.0) {
                return Err(E::semantic(format!("{path}.width"), "must be positive"));
            }
            if lane.polyline().is_none() {
                return Err(E::semantic(format!("{path}.centerline"), "needs two distinct points"));
            }
        }
        let lane_exists = |lane: u32| lanes.is_empty() || lanes.contains(&lane);

        let mut ids = BTreeSet::from([EGO_ID.to_owned()]);
        ids.extend(lanes.iter().map(|i| lane_object_id(*i).0));
        for (i, b) in self.map.buildings.iter().enumerate() {
            if b.polygon.len() < 3 {
                return Err(E::semantic(
                    format!("map.buildings[{i}].polygon"),
                    "needs three vertices",
                ));
            }
            if !ids.insert(b.id.0.clone()) {
                return Err(E::semantic(
                    format!("map.buildings[{i}].id"),
                    format!("duplicate id {}", b.id),
                ));
            }
        }
        for (i, s) in self.map.signs.iter().enumerate() {
            if !ids.insert(s.id.0.clone()) {
                return Err(E::semantic(
                    format!("map.signs[{i}].id"),
                    format!("duplicate id {}", s.id),
                ));
            }
        }

        check_state("ego.state", &self.ego.state)?;
        check_extent("ego.extent", &self.ego.extent)?;
        self.ego.task.validate().map_err(|e| E::semantic("ego.task", e))?;
        if !lane_exists(self.ego.task.target_lane) {
            return Err(E::semantic(
                "ego.task.target_lane",
                format!("lane {} is not in the map", self.ego.task.target_lane),
            ));
        }

        let registry = self.registry();
        for (i, p) in self.participants.iter().enumerate() {
            let path = format!("participants[{i}]");
            if !ids.insert(p.id.0.clone()) {
                return Err(E::semantic(format!("{path}.id"), format!("duplicate id {}", p.id)));
            }
            if !registry.contains(&p.kind) {
                return Err(E::semantic(format!("{path}.kind"), format!("unknown kind {}", p.kind)));
            }
            check_state(&format!("{path}.state"), &p.state)?;
            check_extent(&format!("{path}.extent"), &p.extent)?;
            if let Some(lane) = p.lane {
                if !lane_exists(lane) {
                    return Err(E::semantic(
                        format!("{path}.lane"),
                        format!("lane {lane} is not in the map"),
                    ));
                }
            }
            if let Some(pinned) = &p.pinned {
                let probs = &pinned.probabilities;
                if probs.0.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    return Err(E::semantic(
                        format!("{path}.pinned.probabilities"),
                        "probabilities must lie in [0, 1]",
                    ));
                }
                if (probs.sum() - 1.0).abs() > DISTRIBUTION_TOLERANCE {
                    return Err(E::semantic(
                        format!("{path}.pinned.probabilities"),
                        format!("probabilities sum to {:.2}", probs.sum()),
                    ));
                }
                if pinned
                    .impact_times
                    .iter()
                    .any(|t| t.seconds().is_some_and(|s| !(s >= 0.0)))
                {
                    return Err(E::semantic(
                        format!("{path}.pinned.impact_times"),
                        "impact times must be non-negative",
                    ));
                }
            } else if self.mode == Mode::GoldenFixture {
                return Err(E::semantic(
                    format!("{path}.pinned"),
                    "GoldenFixture mode requires a pinned table for every participant",
                ));
            }
            match &p.motion {
                MotionSpec::Behavior { start, .. } if !(*start >= 0.0) => {
                    return Err(E::semantic(format!("{path}.motion.start"), "must be non-negative"));
                }
                MotionSpec::Sampled { bounds, speed_gain } if (!bounds.is_valid() || !(*speed_gain >= 0.0)) => {
                    return Err(E::semantic(format!("{path}.motion"), "invalid sampling bounds"));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Object id given to map lane `index`.
pub fn lane_object_id(index: u32) -> ObjectId {
    ObjectId(format!("Lane{index}"))
}

fn check_state(path: &str, s: &KinematicState) -> Result<(), ScenarioError> {
    s.validate().map_err(|e| ScenarioError::semantic(path, e.to_string()))?;
    if !(-PI..PI).contains(&s.heading) {
        return Err(ScenarioError::semantic(
            format!("{path}.heading"),
            "must lie in [-pi, pi)",
        ));
    }
    Ok(())
}

fn check_extent(path: &str, e: &Extent) -> Result<(), ScenarioError> {
    if e.length > 0.0 && e.width > 0.0 {
        Ok(())
    } else {
        Err(ScenarioError::semantic(path, "extent must be positive"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema_version": 1,
        "name": "minimal",
        "mode": "ClosedLoop",
        "ticks": 3,
        "ego": {
            "state": {"x": 0, "y": 0, "heading": 0, "speed": 10, "wheelbase": 2.7},
            "extent": {"length": 4.5, "width": 1.8},
            "task": {"waypoints": [[0, 0], [500, 0]], "target_lane": 1,
                     "destination": "east", "desired_speed": 10, "comfort_accel": 2}
        }
    }"#;

    #[test]
    fn minimal_ego_only_is_valid() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert!(s.participants.is_empty());
        assert_eq!(s.tick, 0.1);
        assert_eq!(s.horizon.span, 40.0);
    }

    #[test]
    fn unknown_field_is_schema_error_with_location() {
        let text = MINIMAL.replace("\"ticks\": 3", "\"ticks\": 3, \"tiks\": 4");
        match parse_scenario(&text) {
            Err(ScenarioError::Schema { line, reason, .. }) => {
                assert_eq!(line, 5);
                assert!(reason.contains("tiks"), "{reason}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nested_unknown_field_reports_path() {
        let text = MINIMAL.replace("\"speed\": 10,", "\"speed\": 10, \"sped\": 1,");
        let err = parse_scenario(&text).unwrap_err();
        assert!(matches!(err, ScenarioError::Schema { .. }));
        assert!(err.path().starts_with("ego.state"), "{}", err.path());
    }

    #[test]
    fn round_trip() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(parse_scenario(&s.to_json()).unwrap(), s);
    }

    #[test]
    fn hash_changes_with_seed() {
        let mut s = parse_scenario(MINIMAL).unwrap();
        let h = s.config_hash();
        assert_eq!(h.len(), 64);
        s.seed = 7;
        assert_ne!(h, s.config_hash());
    }

    #[test]
    fn golden_mode_requires_pins() {
        let text = MINIMAL.replace("\"ClosedLoop\"", "\"GoldenFixture\"").replace(
            "\"ticks\": 3,",
            r#""ticks": 1, "participants": [{"id": "a", "kind": "TrafficCar",
                "state": {"x": 20, "y": 0, "heading": 0, "speed": 5, "wheelbase": 2.7},
                "extent": {"length": 4.5, "width": 1.8}}],"#,
        );
        let err = parse_scenario(&text).unwrap_err();
        assert!(matches!(err, ScenarioError::Semantic { ref path, .. } if path == "participants[0].pinned"));
    }

    #[test]
    fn dangling_lane_rejected() {
        let text = MINIMAL.replace(
            "\"ticks\": 3,",
            r#""ticks": 3, "map": {"lanes": [{"index": 1, "centerline": [[0, 0], [100, 0]], "width": 3.5}]},
               "participants": [{"id": "a", "kind": "TrafficCar", "lane": 4,
                "state": {"x": 20, "y": 0, "heading": 0, "speed": 5, "wheelbase": 2.7},
                "extent": {"length": 4.5, "width": 1.8}}],"#,
        );
        let err = parse_scenario(&text).unwrap_err();
        assert_eq!(
            err.to_string(),
            "semantic error at participants[0].lane: lane 4 is not in the map"
        );
    }

    #[test]
    fn duplicate_ids_rejected() {
        let p = r#"{"id": "ego", "kind": "TrafficCar",
                "state": {"x": 20, "y": 0, "heading": 0, "speed": 5, "wheelbase": 2.7},
                "extent": {"length": 4.5, "width": 1.8}}"#;
        let text = MINIMAL.replace("\"ticks\": 3,", &format!("\"ticks\": 3, \"participants\": [{p}],"));
        assert!(matches!(parse_scenario(&text), Err(ScenarioError::Semantic { .. })));
    }
}
