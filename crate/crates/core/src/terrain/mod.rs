//! Ground-truth terrain, orbital maps and the grid primitives shared by the stack.

mod asc;
mod generate;
mod grid;

pub use asc::{parse_asc, read_asc, to_asc_string, write_asc, DEFAULT_NODATA};
pub use generate::{derive_orbital_map, generate_terrain, integer_ratio, place_obstacles, ObstacleSpec, TerrainSpec};
pub use grid::ElevationGrid;
pub(crate) use grid::SampleFail;
