//! Turning a perceived scene plus measurements into typed scene objects.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{FRAC_PI_4, PI};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec2;
use crate::sim::KinematicState;

pub const TRAFFIC_CAR: &str = "TrafficCar";
pub const PEDESTRIAN: &str = "Pedestrian";
pub const LANE: &str = "Lane";
pub const TRAFFIC_SIGN: &str = "TrafficSign";
pub const BUILDING: &str = "Building";

/// Wheelbase given to objects that do not declare one, m.
pub const DEFAULT_WHEELBASE: f64 = 2.7;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub String);

impl ObjectId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ObjectId {
    fn from(s: &str) -> Self {
        ObjectId(s.to_owned())
    }
}

impl From<String> for ObjectId {
    fn from(s: String) -> Self {
        ObjectId(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Extent {
    pub length: f64,
    pub width: f64,
}

impl Extent {
    pub fn new(length: f64, width: f64) -> Self {
        Self { length, width }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PropertyValue {
    Flag(bool),
    Number(f64),
    Text(String),
}

impl PropertyValue {
    /// Annotations arrive as text; numbers and booleans are recovered.
    pub fn parse(raw: &str) -> Self {
        match raw {
            "true" => PropertyValue::Flag(true),
            "false" => PropertyValue::Flag(false),
            _ => raw
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(PropertyValue::Number)
                .unwrap_or_else(|| PropertyValue::Text(raw.to_owned())),
        }
    }

    pub fn as_flag(&self) -> Option<bool> {
        match self {
            PropertyValue::Flag(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            PropertyValue::Number(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            PropertyValue::Text(s) => Some(s),
            _ => None,
        }
    }
}

pub type Properties = BTreeMap<String, PropertyValue>;

/// A raw, pre-detected entity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntityRecord {
    pub id: ObjectId,
    pub kind: String,
    pub pose: Pose,
    pub extent: Extent,
    #[serde(default)]
    pub annotations: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PerceivedScene {
    pub entities: Vec<EntityRecord>,
}

impl PerceivedScene {
    pub fn validate(&self) -> Result<(), SceneError> {
        let mut seen = BTreeSet::new();
        for e in &self.entities {
            if !seen.insert(&e.id) {
                return Err(SceneError::DuplicateId(e.id.clone()));
            }
            if !(e.extent.length > 0.0 && e.extent.width > 0.0) {
                return Err(SceneError::InvalidEntity(
                    e.id.clone(),
                    "extent must be strictly positive".into(),
                ));
            }
            if !(-PI..PI).contains(&e.pose.heading) {
                return Err(SceneError::InvalidEntity(
                    e.id.clone(),
                    "heading outside [-pi, pi)".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KindSpec {
    pub dynamic: bool,
    #[serde(default)]
    pub default_properties: Properties,
}

/// The a-priori set of object classes. Extensible: roads differ around the
/// world, so this is data rather than an enum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KindRegistry {
    kinds: BTreeMap<String, KindSpec>,
}

impl Default for KindRegistry {
    fn default() -> Self {
        let mut r = KindRegistry { kinds: BTreeMap::new() };
        r.insert(TRAFFIC_CAR, true, Properties::new());
        r.insert(
            PEDESTRIAN,
            true,
            [("crossing_intent".to_owned(), PropertyValue::Flag(false))].into(),
        );
        r.insert(LANE, false, Properties::new());
        r.insert(TRAFFIC_SIGN, false, Properties::new());
        r.insert(BUILDING, false, Properties::new());
        r
    }
}

impl KindRegistry {
    pub fn insert(&mut self, name: &str, dynamic: bool, default_properties: Properties) {
        self.kinds.insert(
            name.to_owned(),
            KindSpec {
                dynamic,
                default_properties,
            },
        );
    }

    pub fn get(&self, name: &str) -> Option<&KindSpec> {
        self.kinds.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.kinds.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Measurement {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bearing: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lane: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MeasurementSet {
    pub by_id: BTreeMap<ObjectId, Measurement>,
}

impl MeasurementSet {
    pub fn insert(&mut self, id: impl Into<ObjectId>, m: Measurement) {
        self.by_id.insert(id.into(), m);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Relation {
    SameLaneAhead,
    SameLaneBehind,
    LeftAdjacent,
    RightAdjacent,
    Crossing,
    OffRoad,
}

impl Relation {
    pub const ALL: [Relation; 6] = [
        Relation::SameLaneAhead,
        Relation::SameLaneBehind,
        Relation::LeftAdjacent,
        Relation::RightAdjacent,
        Relation::Crossing,
        Relation::OffRoad,
    ];

    /// Short word used in explanations.
    pub fn label(self) -> &'static str {
        match self {
            Relation::SameLaneAhead => "ahead",
            Relation::SameLaneBehind => "behind",
            Relation::LeftAdjacent => "left",
            Relation::RightAdjacent => "right",
            Relation::Crossing => "crossing",
            Relation::OffRoad => "off-road",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RangeBand {
    Near,
    Far,
}

impl RangeBand {
    pub fn label(self) -> &'static str {
        match self {
            RangeBand::Near => "near",
            RangeBand::Far => "far",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: ObjectId,
    pub kind: String,
    pub dynamic: bool,
    pub state: KinematicState,
    pub extent: Extent,
    pub lane: Option<u32>,
    pub properties: Properties,
    pub relation: Option<Relation>,
    pub band: Option<RangeBand>,
    pub range: Option<f64>,
}

impl SceneObject {
    pub fn property(&self, key: &str) -> Option<&PropertyValue> {
        self.properties.get(key)
    }

    pub fn flag(&self, key: &str) -> bool {
        self.property(key).and_then(PropertyValue::as_flag).unwrap_or(false)
    }

    pub fn text(&self, key: &str) -> Option<&str> {
        self.property(key).and_then(PropertyValue::as_text)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectSet {
    objects: BTreeMap<ObjectId, SceneObject>,
}

impl ObjectSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, obj: SceneObject) -> Option<SceneObject> {
        self.objects.insert(obj.id.clone(), obj)
    }

    pub fn get(&self, id: &ObjectId) -> Option<&SceneObject> {
        self.objects.get(id)
    }

    pub fn contains(&self, id: &ObjectId) -> bool {
        self.objects.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    /// Objects in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = &SceneObject> {
        self.objects.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = &ObjectId> {
        self.objects.keys()
    }
}

impl FromIterator<SceneObject> for ObjectSet {
    fn from_iter<I: IntoIterator<Item = SceneObject>>(iter: I) -> Self {
        let mut set = ObjectSet::new();
        for o in iter {
            set.insert(o);
        }
        set
    }
}

/// The observer: its state, footprint and lane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ego {
    pub state: KinematicState,
    pub extent: Extent,
    pub lane: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    /// Objects at or inside this range are `Near`, m.
    pub near_threshold: f64,
    /// Lane width used when lane indices are unknown, m.
    pub lane_width: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            near_threshold: 30.0,
            lane_width: 3.5,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("entity {0}: unknown kind {1:?}")]
    UnknownKind(ObjectId, String),
    #[error("measurement references absent object {0}")]
    DanglingMeasurement(ObjectId),
    #[error("duplicate entity id {0}")]
    DuplicateId(ObjectId),
    #[error("entity {0}: {1}")]
    InvalidEntity(ObjectId, String),
}

/// One object per entity, kinds resolved through the registry.
///
/// Relation, band and range stay unset until measurements are attached. An
/// integer `lane` annotation seeds the lane index.
pub fn generate_objects(scene: &PerceivedScene, registry: &KindRegistry) -> Result<ObjectSet, SceneError> {
    scene.validate()?;
    let mut set = ObjectSet::new();
    for e in &scene.entities {
        let spec = registry
            .get(&e.kind)
            .ok_or_else(|| SceneError::UnknownKind(e.id.clone(), e.kind.clone()))?;
        let mut properties = spec.default_properties.clone();
        for (k, v) in &e.annotations {
            properties.insert(k.clone(), PropertyValue::parse(v));
        }
        let lane = properties
            .get("lane")
            .and_then(PropertyValue::as_number)
            .filter(|v| *v >= 1.0 && v.fract() == 0.0)
            .map(|v| v as u32);
        let wheelbase = properties
            .get("wheelbase")
            .and_then(PropertyValue::as_number)
            .filter(|v| *v > 0.0)
            .unwrap_or(DEFAULT_WHEELBASE);
        set.insert(SceneObject {
            id: e.id.clone(),
            kind: e.kind.clone(),
            dynamic: spec.dynamic,
            state: KinematicState::new(e.pose.x, e.pose.y, e.pose.heading, 0.0, wheelbase),
            extent: e.extent,
            lane,
            properties,
            relation: None,
            band: None,
            range: None,
        });
    }
    Ok(set)
}

/// Position of `p` in the ego frame: (longitudinal, lateral-left).
pub fn ego_frame(ego: &KinematicState, p: Vec2) -> (f64, f64) {
    let (s, c) = ego.heading.sin_cos();
    let d = p - ego.position();
    (c * d.x + s * d.y, -s * d.x + c * d.y)
}

/// Classifies an object's position relative to the ego.
pub fn relation_to_ego(obj: &SceneObject, ego: &Ego, cfg: &SceneConfig) -> Relation {
    let (dx, dy) = ego_frame(&ego.state, obj.state.position());

    if obj.kind == LANE {
        if let (Some(lane), Some(ego_lane)) = (obj.lane, ego.lane) {
            return match lane.cmp(&ego_lane) {
                std::cmp::Ordering::Equal => Relation::SameLaneAhead,
                std::cmp::Ordering::Greater => Relation::LeftAdjacent,
                std::cmp::Ordering::Less => Relation::RightAdjacent,
            };
        }
    }

    if obj.dynamic && dx > 0.0 {
        let relative = crate::geometry::wrap_angle(obj.state.heading - ego.state.heading).abs();
        let crosswise = relative > FRAC_PI_4 && relative < 3.0 * FRAC_PI_4;
        if obj.flag("crossing_intent") || crosswise {
            return Relation::Crossing;
        }
    }

    if let (Some(lane), Some(ego_lane)) = (obj.lane, ego.lane) {
        return match lane.cmp(&ego_lane) {
            std::cmp::Ordering::Equal if dx >= 0.0 => Relation::SameLaneAhead,
            std::cmp::Ordering::Equal => Relation::SameLaneBehind,
            std::cmp::Ordering::Greater => Relation::LeftAdjacent,
            std::cmp::Ordering::Less => Relation::RightAdjacent,
        };
    }

    let half = cfg.lane_width / 2.0;
    if dy.abs() <= half {
        if dx >= 0.0 {
            Relation::SameLaneAhead
        } else {
            Relation::SameLaneBehind
        }
    } else if dy > half && dy <= 3.0 * half {
        Relation::LeftAdjacent
    } else if dy < -half && dy >= -3.0 * half {
        Relation::RightAdjacent
    } else {
        Relation::OffRoad
    }
}

/// Populates speed, lane, relation, range and band from the measurements.
///
/// Objects without a measurement keep speed 0 and get range and relation
/// from their pose. Applying the same measurements twice is a no-op.
pub fn attach_measurements(
    objects: &ObjectSet,
    measurements: &MeasurementSet,
    ego: &Ego,
    cfg: &SceneConfig,
) -> Result<ObjectSet, SceneError> {
    if let Some(id) = measurements.by_id.keys().find(|id| !objects.contains(id)) {
        return Err(SceneError::DanglingMeasurement(id.clone()));
    }
    let mut out = ObjectSet::new();
    for obj in objects.iter() {
        let mut o = obj.clone();
        let m = measurements.by_id.get(&o.id).copied().unwrap_or_default();
        if let Some(v) = m.speed {
            o.state.speed = v.max(0.0);
        }
        if let Some(lane) = m.lane {
            o.lane = Some(lane);
        }
        if let Some(size) = m.size {
            o.properties.insert("size".into(), PropertyValue::Number(size));
        }
        if let Some(b) = m.bearing {
            o.properties.insert("bearing".into(), PropertyValue::Number(b));
        }
        let range = m
            .range
            .unwrap_or_else(|| (o.state.position() - ego.state.position()).norm());
        o.range = Some(range);
        o.band = Some(if range <= cfg.near_threshold {
            RangeBand::Near
        } else {
            RangeBand::Far
        });
        o.relation = Some(relation_to_ego(&o, ego, cfg));
        out.insert(o);
    }
    Ok(out)
}

/// Splits into (static, dynamic) by the registry flag carried on each object.
pub fn partition_static_dynamic(objects: &ObjectSet) -> (ObjectSet, ObjectSet) {
    let (dynamic, stat): (Vec<_>, Vec<_>) = objects.iter().cloned().partition(|o| o.dynamic);
    (stat.into_iter().collect(), dynamic.into_iter().collect())
}
