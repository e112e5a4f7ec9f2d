//! Picks the ego behavior that resolves the dominant threat, verifies it
//! against the other unacceptable threats and explains the outcome.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::links::LinkSet;
use crate::scene::{ObjectId, RangeBand, Relation};
use crate::threat::{ImpactTime, ObjectBehavior, ThreatEntry, ThreatMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EgoBehavior {
    KeepLane,
    ReduceSpeed,
    LaneChangeLeft,
    LaneChangeRight,
    EmergencyStop,
}

impl EgoBehavior {
    pub const ALL: [EgoBehavior; 5] = [
        EgoBehavior::KeepLane,
        EgoBehavior::ReduceSpeed,
        EgoBehavior::LaneChangeLeft,
        EgoBehavior::LaneChangeRight,
        EgoBehavior::EmergencyStop,
    ];
}

impl fmt::Display for EgoBehavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArbiterConfig {
    /// Threat levels at or below this are accepted.
    pub accept_threshold: f64,
    /// Preference among counter-behaviors when threat and significance tie;
    /// earlier wins. Must list every behavior exactly once.
    pub tie_break: Vec<EgoBehavior>,
}

impl Default for ArbiterConfig {
    fn default() -> Self {
        Self {
            accept_threshold: 0.05,
            tie_break: vec![
                EgoBehavior::ReduceSpeed,
                EgoBehavior::KeepLane,
                EgoBehavior::LaneChangeRight,
                EgoBehavior::LaneChangeLeft,
                EgoBehavior::EmergencyStop,
            ],
        }
    }
}

impl ArbiterConfig {
    pub fn validate(&self) -> Result<(), String> {
        let set: BTreeSet<_> = self.tie_break.iter().collect();
        if set.len() != EgoBehavior::ALL.len() || self.tie_break.len() != EgoBehavior::ALL.len() {
            return Err("tie_break must list every ego behavior exactly once".into());
        }
        if !(self.accept_threshold >= 0.0) {
            return Err("accept_threshold must be non-negative".into());
        }
        Ok(())
    }

    fn rank(&self, b: EgoBehavior) -> usize {
        self.tie_break.iter().position(|&x| x == b).unwrap_or(usize::MAX)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ThreatKey {
    pub object: ObjectId,
    pub behavior: ObjectBehavior,
}

impl ThreatKey {
    fn of(e: &ThreatEntry) -> Self {
        Self {
            object: e.object.clone(),
            behavior: e.behavior,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxThreat {
    pub object: ObjectId,
    pub behavior: ObjectBehavior,
    pub threat: f64,
}

/// Outcome of the selection step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub selected: EgoBehavior,
    pub max_threat: Option<MaxThreat>,
    pub resolved: BTreeSet<ThreatKey>,
    pub unresolved: BTreeSet<ThreatKey>,
    pub candidates_tried: Vec<EgoBehavior>,
    /// Number of threats above the accepted level.
    pub above_threshold: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArbitrationResult {
    pub selected: EgoBehavior,
    pub max_threat: Option<MaxThreat>,
    pub resolved: BTreeSet<ThreatKey>,
    pub unresolved: BTreeSet<ThreatKey>,
    pub candidates_tried: Vec<EgoBehavior>,
    pub above_threshold: usize,
    pub description: Description,
}

impl ArbitrationResult {
    pub fn selection(&self) -> Selection {
        Selection {
            selected: self.selected,
            max_threat: self.max_threat.clone(),
            resolved: self.resolved.clone(),
            unresolved: self.unresolved.clone(),
            candidates_tried: self.candidates_tried.clone(),
            above_threshold: self.above_threshold,
        }
    }
}

/// Source of re-simulated impact times with the ego following a candidate.
pub trait ThreatVerifier {
    fn impact_under(&self, candidate: EgoBehavior, object: &ObjectId, behavior: ObjectBehavior) -> ImpactTime;
}

/// Verifier backed by a precomputed table; missing cells never collide.
#[derive(Debug, Clone, Default)]
pub struct TableVerifier {
    pub table: BTreeMap<(EgoBehavior, ObjectId, ObjectBehavior), ImpactTime>,
}

impl TableVerifier {
    pub fn set(
        &mut self,
        candidate: EgoBehavior,
        object: impl Into<ObjectId>,
        behavior: ObjectBehavior,
        t: ImpactTime,
    ) {
        self.table.insert((candidate, object.into(), behavior), t);
    }
}

impl ThreatVerifier for TableVerifier {
    fn impact_under(&self, candidate: EgoBehavior, object: &ObjectId, behavior: ObjectBehavior) -> ImpactTime {
        self.table
            .get(&(candidate, object.clone(), behavior))
            .copied()
            .unwrap_or(ImpactTime::Never)
    }
}

/// Total order of threats, most severe first: threat level, then link
/// significance, then counter-behavior preference, then object id, then
/// object behavior.
fn severity_order(cfg: &ArbiterConfig, a: &ThreatEntry, b: &ThreatEntry) -> Ordering {
    b.threat
        .total_cmp(&a.threat)
        .then_with(|| b.significance.total_cmp(&a.significance))
        .then_with(|| cfg.rank(a.counter).cmp(&cfg.rank(b.counter)))
        .then_with(|| a.object.cmp(&b.object))
        .then_with(|| a.behavior.cmp(&b.behavior))
}

/// Chooses the ego behavior.
///
/// Threats above the accepted level form the set to resolve. The most
/// severe one proposes its counter-behavior, which is re-simulated against
/// every threat in the set. If it leaves any unresolved, the remaining
/// counter-behaviors are tried in order of the most severe threat each one
/// counters, followed by the behaviors no threat proposed. When none resolves
/// everything, the candidate with the smallest sum of unresolved threat
/// levels wins.
pub fn select_optimal(threats: &ThreatMatrix, cfg: &ArbiterConfig, verifier: &dyn ThreatVerifier) -> Selection {
    let mut above: Vec<&ThreatEntry> = threats.entries().filter(|e| e.threat > cfg.accept_threshold).collect();
    if above.is_empty() {
        return Selection {
            selected: EgoBehavior::KeepLane,
            max_threat: None,
            resolved: BTreeSet::new(),
            unresolved: BTreeSet::new(),
            candidates_tried: Vec::new(),
            above_threshold: 0,
        };
    }
    above.sort_by(|a, b| severity_order(cfg, a, b));
    let top = above[0];

    let mut candidates: Vec<EgoBehavior> = Vec::new();
    for e in &above {
        if !candidates.contains(&e.counter) {
            candidates.push(e.counter);
        }
    }
    // Behaviors nobody proposed come last, in preference order.
    for &b in &cfg.tie_break {
        if !candidates.contains(&b) {
            candidates.push(b);
        }
    }

    let span = threats.horizon.span;
    let mut tried = Vec::new();
    let mut best: Option<(f64, EgoBehavior, BTreeSet<ThreatKey>, BTreeSet<ThreatKey>)> = None;
    for candidate in candidates {
        tried.push(candidate);
        let mut resolved = BTreeSet::new();
        let mut unresolved = BTreeSet::new();
        let mut residual = 0.0;
        for e in &above {
            let t = verifier.impact_under(candidate, &e.object, e.behavior);
            if t.within(span) {
                unresolved.insert(ThreatKey::of(e));
                residual += e.threat;
            } else {
                resolved.insert(ThreatKey::of(e));
            }
        }
        let done = unresolved.is_empty();
        // Relative margin keeps the choice independent of the threat scale.
        if best.as_ref().is_none_or(|(r, ..)| residual < *r * (1.0 - 1e-12)) {
            best = Some((residual, candidate, resolved, unresolved));
        }
        if done {
            break;
        }
    }
    let (_, selected, resolved, unresolved) = best.expect("at least one candidate");
    Selection {
        selected,
        max_threat: Some(MaxThreat {
            object: top.object.clone(),
            behavior: top.behavior,
            threat: top.threat,
        }),
        resolved,
        unresolved,
        candidates_tried: tried,
        above_threshold: above.len(),
    }
}

/// Explanation of one significant object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub object: ObjectId,
    pub relation: Relation,
    pub band: RangeBand,
    pub significance: f64,
    pub behavior: ObjectBehavior,
    pub probability: f64,
    pub impact: ImpactTime,
    /// Present when the dominant behavior is an active threat.
    pub mitigation: Option<EgoBehavior>,
}

impl fmt::Display for Explanation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} ({}, {}; significance {:.2}): {} p={:.2}, impact ",
            self.object,
            self.relation.label(),
            self.band.label(),
            self.significance,
            self.behavior,
            self.probability
        )?;
        match self.impact {
            ImpactTime::At(t) => write!(f, "{t:.1} s")?,
            ImpactTime::Never => f.write_str("never")?,
        }
        if let Some(m) = self.mitigation {
            write!(f, "; mitigated by {m}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Description {
    pub records: Vec<Explanation>,
    pub summary: String,
    pub significant_count: usize,
}

impl Description {
    /// One line per record followed by the summary line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&r.to_string());
            out.push('\n');
        }
        out.push_str(&self.summary);
        out
    }
}

impl fmt::Display for Description {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Fixed-template explanation of a selection.
///
/// Each object's record reports its most threatening active behavior, or its
/// most probable behavior when none is active.
pub fn describe(links: &LinkSet, selection: &Selection, threats: &ThreatMatrix) -> Description {
    let records: Vec<Explanation> = threats
        .rows
        .iter()
        .map(|row| {
            let dominant = row
                .entries
                .iter()
                .filter(|e| e.active)
                .fold(None::<&ThreatEntry>, |best, e| match best {
                    Some(b) if b.threat >= e.threat => Some(b),
                    _ => Some(e),
                });
            let (entry, mitigation) = match dominant {
                Some(e) => (e, Some(e.counter)),
                None => (
                    row.entries
                        .iter()
                        .fold(None::<&ThreatEntry>, |best, e| match best {
                            Some(b) if b.probability >= e.probability => Some(b),
                            _ => Some(e),
                        })
                        .expect("rows have four entries"),
                    None,
                ),
            };
            Explanation {
                object: row.object.clone(),
                relation: row.relation,
                band: row.band,
                significance: links.internal(&row.object).map_or(row.significance, |l| l.significance),
                behavior: entry.behavior,
                probability: entry.probability,
                impact: entry.impact,
                mitigation,
            }
        })
        .collect();
    let summary = match &selection.max_threat {
        None => format!("No active threats; {}", selection.selected),
        Some(m) => format!(
            "Selected {}: resolves {} of {} active threats; dominant threat {}/{} (\u{398}={:.2})",
            selection.selected,
            selection.resolved.len(),
            selection.above_threshold,
            m.object,
            m.behavior,
            m.threat
        ),
    };
    Description {
        significant_count: records.len(),
        records,
        summary,
    }
}

/// Selection plus description.
pub fn arbitrate(
    links: &LinkSet,
    threats: &ThreatMatrix,
    cfg: &ArbiterConfig,
    verifier: &dyn ThreatVerifier,
) -> ArbitrationResult {
    let selection = select_optimal(threats, cfg, verifier);
    let description = describe(links, &selection, threats);
    ArbitrationResult {
        selected: selection.selected,
        max_threat: selection.max_threat,
        resolved: selection.resolved,
        unresolved: selection.unresolved,
        candidates_tried: selection.candidates_tried,
        above_threshold: selection.above_threshold,
        description,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::threat::{ThreatRow, TimeHorizon};

    fn entry(
        object: &str,
        k: ObjectBehavior,
        lambda: f64,
        p: f64,
        tau: Option<f64>,
        counter: EgoBehavior,
    ) -> ThreatEntry {
        let impact = ImpactTime::from(tau);
        let active = impact.within(40.0);
        ThreatEntry {
            object: object.into(),
            behavior: k,
            probability: p,
            significance: lambda,
            impact,
            threat: if active { lambda * p } else { 0.0 },
            counter,
            active,
        }
    }

    fn row(
        object: &str,
        relation: Relation,
        band: RangeBand,
        lambda: f64,
        cells: [(f64, Option<f64>, EgoBehavior); 4],
    ) -> ThreatRow {
        ThreatRow {
            object: object.into(),
            relation,
            band,
            significance: lambda,
            entries: ObjectBehavior::ALL
                .iter()
                .zip(cells)
                .map(|(&k, (p, tau, c))| entry(object, k, lambda, p, tau, c))
                .collect(),
        }
    }

    /// The three-car matrix with its pinned probabilities and impact times.
    pub(crate) fn three_car_matrix() -> ThreatMatrix {
        use EgoBehavior::*;
        ThreatMatrix {
            horizon: TimeHorizon::default(),
            rows: vec![
                row(
                    "Car1",
                    Relation::LeftAdjacent,
                    RangeBand::Near,
                    0.3,
                    [
                        (0.2, None, KeepLane),
                        (0.59, Some(20.0), ReduceSpeed),
                        (0.01, None, KeepLane),
                        (0.2, None, KeepLane),
                    ],
                ),
                row(
                    "Car2",
                    Relation::SameLaneAhead,
                    RangeBand::Far,
                    0.6,
                    [
                        (0.6, Some(25.0), ReduceSpeed),
                        (0.1, None, ReduceSpeed),
                        (0.1, None, ReduceSpeed),
                        (0.2, Some(10.0), ReduceSpeed),
                    ],
                ),
                row(
                    "Car3",
                    Relation::RightAdjacent,
                    RangeBand::Near,
                    0.1,
                    [
                        (0.2, None, KeepLane),
                        (0.2, None, KeepLane),
                        (0.1, Some(30.0), ReduceSpeed),
                        (0.5, None, KeepLane),
                    ],
                ),
            ],
        }
    }

    fn keep_lane_fails(m: &ThreatMatrix) -> TableVerifier {
        let mut v = TableVerifier::default();
        for e in m.entries() {
            v.set(EgoBehavior::KeepLane, e.object.clone(), e.behavior, e.impact);
        }
        v
    }

    #[test]
    fn three_car_selects_reduce_speed() {
        let m = three_car_matrix();
        let s = select_optimal(&m, &ArbiterConfig::default(), &keep_lane_fails(&m));
        assert_eq!(s.selected, EgoBehavior::ReduceSpeed);
        let top = s.max_threat.clone().unwrap();
        assert_eq!(
            (top.object.as_str(), top.behavior),
            ("Car2", ObjectBehavior::LaneFollow)
        );
        assert!((top.threat - 0.36).abs() < 1e-15);
        assert_eq!(s.candidates_tried, vec![EgoBehavior::ReduceSpeed]);
        assert_eq!(s.resolved.len(), 3);
        assert!(s.unresolved.is_empty());
    }

    #[test]
    fn quiet_matrix_keeps_lane() {
        let mut m = three_car_matrix();
        for r in &mut m.rows {
            for e in &mut r.entries {
                e.threat = 0.0;
                e.active = false;
            }
        }
        let s = select_optimal(&m, &ArbiterConfig::default(), &TableVerifier::default());
        assert_eq!(s.selected, EgoBehavior::KeepLane);
        assert!(s.resolved.is_empty() && s.unresolved.is_empty() && s.max_threat.is_none());
        let d = describe(&LinkSet::default(), &s, &m);
        assert_eq!(d.summary, "No active threats; KeepLane");
        assert!(d.records.iter().all(|r| r.mitigation.is_none()));
    }

    #[test]
    fn equal_threat_higher_significance_wins() {
        use EgoBehavior::*;
        // 0.5 * 0.4 == 0.4 * 0.5 exactly in binary floating point.
        let m = ThreatMatrix {
            horizon: TimeHorizon::default(),
            rows: vec![
                row(
                    "A",
                    Relation::SameLaneAhead,
                    RangeBand::Far,
                    0.4,
                    [
                        (0.5, Some(5.0), ReduceSpeed),
                        (0.5, None, KeepLane),
                        (0.0, None, KeepLane),
                        (0.0, None, KeepLane),
                    ],
                ),
                row(
                    "B",
                    Relation::LeftAdjacent,
                    RangeBand::Near,
                    0.5,
                    [
                        (0.0, None, KeepLane),
                        (0.4, Some(5.0), EmergencyStop),
                        (0.6, None, KeepLane),
                        (0.0, None, KeepLane),
                    ],
                ),
            ],
        };
        assert_eq!(m.rows[0].entries[0].threat, m.rows[1].entries[1].threat);
        let s = select_optimal(&m, &ArbiterConfig::default(), &TableVerifier::default());
        assert_eq!(s.max_threat.unwrap().object.as_str(), "B");
        assert_eq!(s.selected, EgoBehavior::EmergencyStop);
    }

    #[test]
    fn falls_back_to_smallest_residual() {
        use EgoBehavior::*;
        let m = three_car_matrix();
        let mut v = TableVerifier::default();
        for b in EgoBehavior::ALL {
            for (id, k) in [
                ("Car1", ObjectBehavior::LaneChangeRight),
                ("Car2", ObjectBehavior::LaneFollow),
                ("Car2", ObjectBehavior::Stop),
            ] {
                v.set(b, id, k, ImpactTime::At(5.0));
            }
        }
        // Nothing resolves Car2 stopping; moving left resolves the rest.
        v.set(ReduceSpeed, "Car2", ObjectBehavior::LaneFollow, ImpactTime::Never);
        v.set(LaneChangeLeft, "Car2", ObjectBehavior::LaneFollow, ImpactTime::Never);
        v.set(
            LaneChangeLeft,
            "Car1",
            ObjectBehavior::LaneChangeRight,
            ImpactTime::Never,
        );
        let s = select_optimal(&m, &ArbiterConfig::default(), &v);
        assert_eq!(s.selected, LaneChangeLeft);
        assert_eq!(s.unresolved.len(), 1);
        assert_eq!(
            s.candidates_tried,
            vec![ReduceSpeed, KeepLane, LaneChangeRight, LaneChangeLeft, EmergencyStop]
        );
    }

    #[test]
    fn escalates_past_proposed_counters() {
        use EgoBehavior::*;
        let m = three_car_matrix();
        let mut v = TableVerifier::default();
        for b in [ReduceSpeed, KeepLane, LaneChangeRight, LaneChangeLeft] {
            v.set(b, "Car2", ObjectBehavior::Stop, ImpactTime::At(5.0));
        }
        let s = select_optimal(&m, &ArbiterConfig::default(), &v);
        assert_eq!(s.selected, EmergencyStop);
        assert!(s.unresolved.is_empty());
        assert_eq!(s.candidates_tried.len(), 5);
    }

    #[test]
    fn golden_description_lines() {
        let m = three_car_matrix();
        let s = select_optimal(&m, &ArbiterConfig::default(), &keep_lane_fails(&m));
        let d = describe(&LinkSet::default(), &s, &m);
        assert_eq!(d.significant_count, 3);
        assert_eq!(
            d.render(),
            "Car1 (left, near; significance 0.30): LaneChangeRight p=0.59, impact 20.0 s; mitigated by ReduceSpeed\n\
             Car2 (ahead, far; significance 0.60): LaneFollow p=0.60, impact 25.0 s; mitigated by ReduceSpeed\n\
             Car3 (right, near; significance 0.10): LaneChangeLeft p=0.10, impact 30.0 s; mitigated by ReduceSpeed\n\
             Selected ReduceSpeed: resolves 3 of 3 active threats; dominant threat Car2/LaneFollow (\u{398}=0.36)"
        );
    }

    #[test]
    fn config_validation() {
        assert!(ArbiterConfig::default().validate().is_ok());
        let mut c = ArbiterConfig::default();
        c.tie_break.pop();
        assert!(c.validate().is_err());
    }
}
