//! Ego-centric bird's-eye occupancy grids from a simulated sector sensor.

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::geometry::{polygon_contains, OrientedRect, Vec2};

use super::world::WorldState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    /// Columns, spanning the lateral axis (leftmost first).
    pub width: usize,
    /// Rows, spanning the longitudinal axis (farthest first).
    pub height: usize,
    /// Meters per cell.
    pub resolution: f64,
    /// How far the bottom edge of the grid sits behind the ego, m.
    pub behind: f64,
    pub fov_range: f64,
    /// Half opening angle of the sensor sector around the ego heading, rad.
    pub fov_half_angle: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            width: 100,
            height: 100,
            resolution: 0.5,
            behind: 5.0,
            fov_range: 50.0,
            fov_half_angle: FRAC_PI_2,
        }
    }
}

impl GridSpec {
    /// Ego-frame `(forward, left)` coordinates of a cell center.
    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        let forward = -self.behind + (self.height - row) as f64 * self.resolution - 0.5 * self.resolution;
        let left = (self.width as f64 / 2.0 - col as f64 - 0.5) * self.resolution;
        (forward, left)
    }

    pub fn in_fov(&self, forward: f64, left: f64) -> bool {
        forward.hypot(left) <= self.fov_range && left.atan2(forward).abs() <= self.fov_half_angle
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cell {
    Free,
    Occupied,
    Unknown,
}

impl Cell {
    pub fn grey_level(self) -> u8 {
        match self {
            Cell::Free => 255,
            Cell::Occupied => 0,
            Cell::Unknown => 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub spec: GridSpec,
    /// Ego pose the grid is anchored to: x, y, heading.
    pub origin: (f64, f64, f64),
    /// Row-major, row 0 farthest ahead.
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CellCounts {
    pub free: usize,
    pub occupied: usize,
    pub unknown: usize,
}

impl CellCounts {
    pub fn total(&self) -> usize {
        self.free + self.occupied + self.unknown
    }
}

impl OccupancyGrid {
    pub fn width(&self) -> usize {
        self.spec.width
    }

    pub fn height(&self) -> usize {
        self.spec.height
    }

    pub fn get(&self, row: usize, col: usize) -> Cell {
        self.cells[row * self.spec.width + col]
    }

    pub fn counts(&self) -> CellCounts {
        self.cells.iter().fold(CellCounts::default(), |mut c, cell| {
            match cell {
                Cell::Free => c.free += 1,
                Cell::Occupied => c.occupied += 1,
                Cell::Unknown => c.unknown += 1,
            }
            c
        })
    }

    /// Binary portable grey map (P5).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.spec.width, self.spec.height).into_bytes();
        out.extend(self.cells.iter().map(|c| c.grey_level()));
        out
    }
}

/// Rasterizes the world around the ego.
///
/// A cell is `Occupied` when its center falls inside a participant footprint
/// or a building polygon and lies inside the sensor sector, `Free` when it
/// lies inside the sector otherwise, and `Unknown` outside the sector.
pub fn render_grid(world: &WorldState, spec: &GridSpec) -> OccupancyGrid {
    let ego = &world.ego.state;
    let (sin_h, cos_h) = ego.heading.sin_cos();

    let rects: Vec<OrientedRect> = world.participants.iter().map(|p| p.footprint()).collect();
    let polygons: Vec<Vec<Vec2>> = world.buildings.iter().map(|b| b.vertices()).collect();
    // Bounding boxes let most cells skip the exact tests.
    let rect_bounds: Vec<(Vec2, f64)> = rects.iter().map(|r| (r.center, r.bounding_radius())).collect();
    let poly_bounds: Vec<[f64; 4]> = polygons
        .iter()
        .map(|poly| {
            poly.iter().fold(
                [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY],
                |b, p| [b[0].min(p.x), b[1].min(p.y), b[2].max(p.x), b[3].max(p.y)],
            )
        })
        .collect();

    let mut cells = Vec::with_capacity(spec.width * spec.height);
    for row in 0..spec.height {
        for col in 0..spec.width {
            let (forward, left) = spec.cell_center(row, col);
            if !spec.in_fov(forward, left) {
                cells.push(Cell::Unknown);
                continue;
            }
            let p = Vec2::new(
                ego.x + forward * cos_h - left * sin_h,
                ego.y + forward * sin_h + left * cos_h,
            );
            let hit_vehicle = rects
                .iter()
                .zip(&rect_bounds)
                .any(|(r, (c, rad))| (p - *c).norm() <= *rad + 1e-9 && r.contains(p));
            let hit = hit_vehicle
                || polygons.iter().zip(&poly_bounds).any(|(poly, b)| {
                    p.x >= b[0] && p.y >= b[1] && p.x <= b[2] && p.y <= b[3] && polygon_contains(poly, p)
                });
            cells.push(if hit { Cell::Occupied } else { Cell::Free });
        }
    }
    OccupancyGrid {
        spec: *spec,
        origin: (ego.x, ego.y, ego.heading),
        cells,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Extent;
    use crate::sim::kinematics::KinematicState;
    use crate::sim::world::Vehicle;

    fn ego_world() -> WorldState {
        WorldState::new(Vehicle::new(
            "ego",
            "TrafficCar",
            KinematicState::new(0.0, 0.0, 0.0, 0.0, 2.7),
            Extent::new(4.5, 1.8),
        ))
    }

    #[test]
    fn empty_world_all_fov_free() {
        let spec = GridSpec::default();
        let g = render_grid(&ego_world(), &spec);
        for row in 0..spec.height {
            for col in 0..spec.width {
                let (f, l) = spec.cell_center(row, col);
                let expected = if spec.in_fov(f, l) { Cell::Free } else { Cell::Unknown };
                assert_eq!(g.get(row, col), expected);
            }
        }
        assert_eq!(g.counts().occupied, 0);
        assert_eq!(g.counts().total(), 10_000);
    }

    #[test]
    fn car_ten_meters_ahead_is_8_by_4_block() {
        let mut w = ego_world();
        w.participants.push(Vehicle::new(
            "a",
            "TrafficCar",
            KinematicState::new(10.0, 0.0, 0.0, 0.0, 2.7),
            Extent::new(4.0, 2.0),
        ));
        let spec = GridSpec::default();
        let g = render_grid(&w, &spec);
        let occupied: Vec<(usize, usize)> = (0..spec.height)
            .flat_map(|r| (0..spec.width).map(move |c| (r, c)))
            .filter(|&(r, c)| g.get(r, c) == Cell::Occupied)
            .collect();
        assert_eq!(occupied.len(), 32);
        let rows: std::collections::BTreeSet<_> = occupied.iter().map(|p| p.0).collect();
        let cols: std::collections::BTreeSet<_> = occupied.iter().map(|p| p.1).collect();
        assert_eq!(rows.len(), 8);
        assert_eq!(cols.len(), 4);
        // Forward 8..12 m maps to rows 66..=73, lateral -1..1 m to cols 48..=51.
        assert_eq!(rows.iter().next(), Some(&66));
        assert_eq!(cols.iter().next(), Some(&48));
    }

    #[test]
    fn participant_beyond_range_not_rendered() {
        let mut w = ego_world();
        let spec = GridSpec {
            height: 140,
            ..GridSpec::default()
        };
        // Near edge sits just past the sensor range.
        w.participants.push(Vehicle::new(
            "far",
            "TrafficCar",
            KinematicState::new(spec.fov_range + 1e-6 + 2.0, 0.0, 0.0, 0.0, 2.7),
            Extent::new(4.0, 2.0),
        ));
        let g = render_grid(&w, &spec);
        assert_eq!(g.counts().occupied, 0);
    }

    #[test]
    fn pgm_header_and_levels() {
        let g = render_grid(&ego_world(), &GridSpec::default());
        let pgm = g.to_pgm();
        assert!(pgm.starts_with(b"P5\n100 100\n255\n"));
        assert_eq!(pgm.len(), b"P5\n100 100\n255\n".len() + 10_000);
        assert!(pgm.ends_with(&[128]));
    }
}
