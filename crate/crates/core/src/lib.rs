//! Two-level planetary rover navigation.
//!
//! The efficient level watches a fixed camera region in front of the wheels, repairs
//! the global path around detected hazards and follows it. The full level adds a
//! rolling elevation map with particle-filter localization and occasional absolute
//! correction against an orbital map. [`mission`] runs both against the simulator.

pub mod control;
pub mod error;
pub mod geometry;
pub mod global;
pub mod hazard;
pub mod mission;
pub mod repair;
pub mod sim;
pub mod slam;
pub mod terrain;

pub use error::{NavError, Result};
pub use geometry::Point2;
