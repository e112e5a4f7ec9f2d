//! Bird's-eye micro-simulator: single-track kinematics, sampled background
//! traffic, occupancy grids and world stepping.

pub mod grid;
pub mod kinematics;
pub mod random;
pub mod world;

use thiserror::Error;

pub use grid::{render_grid, Cell, CellCounts, GridSpec, OccupancyGrid};
pub use kinematics::{step_single_track, turn_radius, ControlInput, ControlLimits, KinematicState};
pub use random::{sample_controls, ControlBounds, ControlSequence, Interval, RandomSource, SampledControl};
pub use world::{advance_world, footprint, Building, Lane, ScriptedControls, Vehicle, WorldState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid integration step dt = {0}")]
    InvalidStep(f64),
    #[error("invalid kinematic state: {0}")]
    InvalidState(String),
}
