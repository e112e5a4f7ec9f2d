//! Renders the ego-centric occupancy grid for a small street scene, writes
//! it as a PGM image and prints a coarse text preview.
//!
//! cargo run --example occupancy_grid [-- out.pgm]

use scene_arbiter::scene::Extent;
use scene_arbiter::sim::{render_grid, Building, Cell, GridSpec, KinematicState, Vehicle, WorldState};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let car = |id: &str, x: f64, y: f64, h: f64| {
        Vehicle::new(
            id,
            "TrafficCar",
            KinematicState::new(x, y, h, 0.0, 2.7),
            Extent::new(4.5, 1.8),
        )
    };
    let mut world = WorldState::new(car("ego", 0.0, 0.0, 0.0));
    world.participants = vec![
        car("lead", 15.0, 0.0, 0.0),
        car("oncoming", 30.0, 3.5, 3.1),
        car("parked", 8.0, -3.6, 0.05),
    ];
    world.buildings.push(Building {
        id: "block".into(),
        polygon: vec![[20.0, -18.0], [40.0, -18.0], [40.0, -7.0], [20.0, -7.0]],
    });

    let spec = GridSpec::default();
    let grid = render_grid(&world, &spec);
    let counts = grid.counts();
    println!(
        "free {} occupied {} unknown {}",
        counts.free, counts.occupied, counts.unknown
    );

    let path = std::env::args().nth(1).unwrap_or_else(|| "occupancy.pgm".into());
    std::fs::write(&path, grid.to_pgm())?;
    println!("wrote {path}");

    for row in (0..spec.height).step_by(4) {
        let line: String = (0..spec.width)
            .step_by(2)
            .map(|col| match grid.get(row, col) {
                Cell::Free => '.',
                Cell::Occupied => '#',
                Cell::Unknown => ' ',
            })
            .collect();
        println!("{line}");
    }
    Ok(())
}
