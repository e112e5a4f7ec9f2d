//! Builds a scene network from raw entities and measurements and shows how
//! the rubric weighs each object.
//!
//! cargo run --example link_significance

use std::collections::BTreeMap;

use scene_arbiter::links::{generate_links, significant_objects, SignificanceRubric};
use scene_arbiter::scene::{
    attach_measurements, generate_objects, Ego, EntityRecord, Extent, KindRegistry, Measurement, MeasurementSet,
    PerceivedScene, Pose, SceneConfig,
};
use scene_arbiter::sim::KinematicState;
use scene_arbiter::threat::straight_task;

fn car(id: &str, x: f64, y: f64, lane: u32, speed: f64, m: &mut MeasurementSet) -> EntityRecord {
    m.insert(
        id,
        Measurement {
            speed: Some(speed),
            lane: Some(lane),
            ..Measurement::default()
        },
    );
    EntityRecord {
        id: id.into(),
        kind: "TrafficCar".into(),
        pose: Pose { x, y, heading: 0.0 },
        extent: Extent::new(4.5, 1.8),
        annotations: BTreeMap::new(),
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut m = MeasurementSet::default();
    let mut entities = vec![
        car("Car1", 24.5, 3.5, 3, 24.0, &mut m),
        car("Car2", 129.5, 0.0, 2, 20.0, &mut m),
        car("Car3", 19.5, -3.5, 1, 24.5, &mut m),
        car("Tailgater", -12.0, 0.0, 2, 27.0, &mut m),
    ];
    entities.push(EntityRecord {
        id: "Walker".into(),
        kind: "Pedestrian".into(),
        pose: Pose {
            x: 18.0,
            y: -6.0,
            heading: 1.5,
        },
        extent: Extent::new(0.5, 0.5),
        annotations: BTreeMap::from([("crossing_intent".into(), "true".into())]),
    });

    let ego = Ego {
        state: KinematicState::new(0.0, 0.0, 0.0, 25.0, 2.7),
        extent: Extent::new(4.5, 1.8),
        lane: Some(2),
    };
    let objects = generate_objects(&PerceivedScene { entities }, &KindRegistry::default())?;
    let objects = attach_measurements(&objects, &m, &ego, &SceneConfig::default())?;
    let links = generate_links(&objects, &straight_task(2, 25.0), &SignificanceRubric::default());

    for link in links.iter() {
        println!(
            "{} -> {:<10} {:.2}  ({})",
            link.source,
            link.target.as_str(),
            link.significance,
            link.rationale
        );
    }
    for s_min in [0.05, 0.3, 0.7] {
        let ids: Vec<_> = significant_objects(&objects, &links, s_min)
            .ids()
            .map(|i| i.to_string())
            .collect();
        println!("s_min {s_min:.2}: {ids:?}");
    }
    Ok(())
}
