//! Behavior arbitration for an ego vehicle.
//!
//! A traffic scene becomes a set of typed objects ([`scene`]), joined to the
//! ego by significance-weighted links ([`links`]). Each significant object's
//! plausible behaviors are forward-simulated to find impact times and threat
//! levels ([`threat`]); the [`arbiter`] picks the ego behavior that resolves
//! the dominant threat and explains the choice in a fixed text template.
//! [`sim`] is the bird's-eye single-track micro-simulator used both for
//! forward simulation and for closed-loop episodes, and [`scenario`] reads
//! scenario files, runs episodes and writes traces, grid images and plot
//! tables.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arbiter;
pub mod geometry;
pub mod links;
pub mod motion;
pub mod scenario;
pub mod scene;
pub mod sim;
pub mod threat;

pub use arbiter::{arbitrate, describe, select_optimal, ArbiterConfig, ArbitrationResult, Description, EgoBehavior};
pub use links::{generate_links, significant_objects, LinkSet, SignificanceRubric, TaskTrajectory};
pub use scene::{attach_measurements, generate_objects, partition_static_dynamic, ObjectId, ObjectSet, SceneObject};
pub use threat::{simulate_threats, ImpactTime, ObjectBehavior, ThreatMatrix, TimeHorizon};
