//! The scene network: significance-weighted links from the ego to scene
//! objects (internal) and between objects (external).

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::{Polyline, Vec2};
use crate::scene::{ObjectId, ObjectSet, RangeBand, Relation, SceneObject, LANE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskTrajectory {
    pub waypoints: Vec<[f64; 2]>,
    pub target_lane: u32,
    pub destination: String,
    /// m/s
    pub desired_speed: f64,
    /// Largest acceptable |acceleration|, m/s².
    pub comfort_accel: f64,
}

impl TaskTrajectory {
    pub fn validate(&self) -> Result<(), String> {
        if self.waypoints.len() < 2 {
            return Err("task trajectory needs at least two waypoints".into());
        }
        if !(self.desired_speed > 0.0) {
            return Err("desired speed must be positive".into());
        }
        if self.path().is_none() {
            return Err("task waypoints are degenerate".into());
        }
        Ok(())
    }

    pub fn path(&self) -> Option<Polyline> {
        Polyline::new(self.waypoints.iter().map(|&p| Vec2::from(p)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LinkSource {
    Ego,
    Object(ObjectId),
}

impl fmt::Display for LinkSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinkSource::Ego => f.write_str("ego"),
            LinkSource::Object(id) => write!(f, "{id}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LinkClass {
    Internal,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub source: LinkSource,
    pub target: ObjectId,
    pub class: LinkClass,
    pub significance: f64,
    /// Which rubric rule produced the significance.
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "Vec<Link>", into = "Vec<Link>")]
pub struct LinkSet {
    links: BTreeMap<(LinkSource, ObjectId), Link>,
}

impl From<Vec<Link>> for LinkSet {
    fn from(links: Vec<Link>) -> Self {
        let mut set = LinkSet::default();
        for l in links {
            set.insert(l);
        }
        set
    }
}

impl From<LinkSet> for Vec<Link> {
    fn from(set: LinkSet) -> Self {
        set.links.into_values().collect()
    }
}

impl LinkSet {
    pub fn insert(&mut self, link: Link) {
        self.links.insert((link.source.clone(), link.target.clone()), link);
    }

    pub fn get(&self, source: &LinkSource, target: &ObjectId) -> Option<&Link> {
        self.links.get(&(source.clone(), target.clone()))
    }

    /// The ego→object link.
    pub fn internal(&self, target: &ObjectId) -> Option<&Link> {
        self.get(&LinkSource::Ego, target)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Link> {
        self.links.values()
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }
}

/// One row of the significance table. `None` matches anything.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RubricRule {
    #[serde(default)]
    pub relation: Option<Relation>,
    #[serde(default)]
    pub band: Option<RangeBand>,
    #[serde(default)]
    pub kind: Option<String>,
    pub significance: f64,
}

impl RubricRule {
    fn new(relation: Option<Relation>, band: Option<RangeBand>, kind: Option<&str>, significance: f64) -> Self {
        Self {
            relation,
            band,
            kind: kind.map(str::to_owned),
            significance,
        }
    }

    fn matches(&self, relation: Relation, band: RangeBand, kind: &str) -> bool {
        self.relation.is_none_or(|r| r == relation)
            && self.band.is_none_or(|b| b == band)
            && self.kind.as_deref().is_none_or(|k| k == kind)
    }

    /// Kind outranks relation outranks band.
    fn specificity(&self) -> u8 {
        4 * self.kind.is_some() as u8 + 2 * self.relation.is_some() as u8 + self.band.is_some() as u8
    }

    fn tag(&self) -> String {
        fn part<T: fmt::Debug>(v: &Option<T>) -> String {
            v.as_ref().map_or_else(|| "*".to_owned(), |x| format!("{x:?}"))
        }
        format!(
            "{}/{}/{}",
            part(&self.relation),
            part(&self.band),
            self.kind.as_deref().unwrap_or("*")
        )
    }
}

/// Traffic-rule significance table keyed by (relation, band, kind).
///
/// The most specific matching rule wins; among equally specific rules the
/// earlier one wins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignificanceRubric {
    pub rules: Vec<RubricRule>,
    /// Used when no rule matches.
    #[serde(default)]
    pub fallback: f64,
    /// Significance of object→occupied-lane links.
    pub lane_occupancy: f64,
    /// Static non-lane objects within this distance of the task path are linked, m.
    pub adjacency_distance: f64,
    /// Also link every pair of dynamic objects.
    #[serde(default)]
    pub object_mesh: bool,
}

impl Default for SignificanceRubric {
    fn default() -> Self {
        use RangeBand::*;
        use Relation::*;
        let rules = vec![
            RubricRule::new(Some(Crossing), Some(Near), Some(crate::scene::PEDESTRIAN), 0.95),
            RubricRule::new(Some(Crossing), Some(Far), Some(crate::scene::PEDESTRIAN), 0.5),
            RubricRule::new(None, None, Some(LANE), 0.02),
            RubricRule::new(None, None, Some(crate::scene::BUILDING), 0.01),
            RubricRule::new(None, None, Some(crate::scene::TRAFFIC_SIGN), 0.03),
            RubricRule::new(Some(SameLaneAhead), Some(Near), None, 0.9),
            RubricRule::new(Some(SameLaneAhead), Some(Far), None, 0.6),
            RubricRule::new(Some(LeftAdjacent), Some(Near), None, 0.3),
            RubricRule::new(Some(LeftAdjacent), Some(Far), None, 0.15),
            RubricRule::new(Some(RightAdjacent), Some(Near), None, 0.1),
            RubricRule::new(Some(RightAdjacent), Some(Far), None, 0.05),
            RubricRule::new(Some(SameLaneBehind), None, None, 0.05),
            RubricRule::new(Some(Crossing), Some(Near), None, 0.8),
            RubricRule::new(Some(Crossing), Some(Far), None, 0.4),
            RubricRule::new(Some(OffRoad), None, None, 0.02),
        ];
        Self {
            rules,
            fallback: 0.0,
            lane_occupancy: 0.5,
            adjacency_distance: 7.0,
            object_mesh: false,
        }
    }
}

impl SignificanceRubric {
    /// Rules in `overrides` take precedence over equally specific defaults.
    pub fn with_overrides(mut self, overrides: &[RubricRule]) -> Self {
        let mut rules = overrides.to_vec();
        rules.append(&mut self.rules);
        self.rules = rules;
        self
    }

    /// Significance and rationale tag for an object with the given class.
    pub fn score(&self, relation: Relation, band: RangeBand, kind: &str) -> (f64, String) {
        let mut best: Option<&RubricRule> = None;
        for rule in self.rules.iter().filter(|r| r.matches(relation, band, kind)) {
            if best.is_none_or(|b| rule.specificity() > b.specificity()) {
                best = Some(rule);
            }
        }
        match best {
            Some(r) => (r.significance.clamp(0.0, 1.0), r.tag()),
            None => (self.fallback.clamp(0.0, 1.0), "fallback".to_owned()),
        }
    }

    fn score_object(&self, obj: &SceneObject) -> (f64, String) {
        self.score(
            obj.relation.unwrap_or(Relation::OffRoad),
            obj.band.unwrap_or(RangeBand::Far),
            &obj.kind,
        )
    }
}

fn near_task(obj: &SceneObject, task: &TaskTrajectory, path: Option<&Polyline>, rubric: &SignificanceRubric) -> bool {
    if obj.kind == LANE {
        if let Some(lane) = obj.lane {
            return lane.abs_diff(task.target_lane) <= 1;
        }
    }
    path.is_some_and(|p| p.distance_to(obj.state.position()) <= rubric.adjacency_distance)
}

/// Builds the scene network for one instant.
///
/// Internal links go to every dynamic object and to every static object on
/// or adjacent to the task trajectory. External links join each dynamic
/// object to the lane object it occupies, and optionally every pair of
/// dynamic objects.
pub fn generate_links(objects: &ObjectSet, task: &TaskTrajectory, rubric: &SignificanceRubric) -> LinkSet {
    let mut links = LinkSet::default();
    let path = task.path();

    for obj in objects.iter() {
        if obj.dynamic || near_task(obj, task, path.as_ref(), rubric) {
            let (significance, rationale) = rubric.score_object(obj);
            links.insert(Link {
                source: LinkSource::Ego,
                target: obj.id.clone(),
                class: LinkClass::Internal,
                significance,
                rationale,
            });
        }
    }

    let lanes: BTreeMap<u32, &ObjectId> = objects
        .iter()
        .filter(|o| o.kind == LANE)
        .filter_map(|o| o.lane.map(|l| (l, &o.id)))
        .collect();
    for obj in objects.iter().filter(|o| o.dynamic) {
        if let Some(lane_id) = obj.lane.and_then(|l| lanes.get(&l)) {
            links.insert(Link {
                source: LinkSource::Object(obj.id.clone()),
                target: (*lane_id).clone(),
                class: LinkClass::External,
                significance: rubric.lane_occupancy.clamp(0.0, 1.0),
                rationale: "occupies-lane".into(),
            });
        }
    }

    if rubric.object_mesh {
        let dynamic: Vec<&SceneObject> = objects.iter().filter(|o| o.dynamic).collect();
        for a in &dynamic {
            for b in &dynamic {
                if a.id == b.id {
                    continue;
                }
                let sa = links.internal(&a.id).map_or(0.0, |l| l.significance);
                let sb = links.internal(&b.id).map_or(0.0, |l| l.significance);
                links.insert(Link {
                    source: LinkSource::Object(a.id.clone()),
                    target: b.id.clone(),
                    class: LinkClass::External,
                    significance: sa.min(sb),
                    rationale: "mesh".into(),
                });
            }
        }
    }
    links
}

/// Objects whose strongest incoming internal link reaches `s_min`.
pub fn significant_objects(objects: &ObjectSet, links: &LinkSet, s_min: f64) -> ObjectSet {
    objects
        .iter()
        .filter(|o| {
            links
                .iter()
                .filter(|l| l.class == LinkClass::Internal && l.target == o.id)
                .any(|l| l.significance >= s_min)
        })
        .cloned()
        .collect()
}
