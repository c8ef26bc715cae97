//! Affordance-foresight planning: recognize action opportunities on images,
//! predict their effects with a differential forward model, and search action
//! sequences that reach or avoid image-specified goals.

pub mod affordance;
pub mod datagen;
pub mod error;
pub mod forward_model;
pub mod geometry;
pub mod microworld;
pub mod nn;
pub mod planner;
pub mod raster;
pub mod recognition;
pub mod tasks;

pub use affordance::{AffordanceKind, Detection, ParametrizedAffordance, Point3, TurnDirection};
pub use error::{Error, Result};
pub use raster::{DiffDescriptor, GoalSpec, Polarity, RasterState};
