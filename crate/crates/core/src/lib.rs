pub mod bmo;
pub mod covering;
pub mod delta;
pub mod error;
pub mod geometry;
pub mod lattice;
pub mod measure;
pub mod onethird;
pub mod spatial;

pub use error::{Error, Result};
pub use geometry::{Ball, Cube, DyadicSystem, DyadicTag, Point, Region, Shape};
pub use measure::{Generator, GrowthReport, PointMeasure};
pub use onethird::{Cover, SystemFamily};
pub use covering::{vitali_preseeded, largest_doubling_ball, Candidate, CoverResult, DoublingBall, Origin};
pub use lattice::{Atom, AtomId, Filtration, FiltrationFamily, LatticeParams, Level, Lookup, Regime};
pub use delta::{delta_balls, delta_cubes, delta_dm, DeltaValue};
pub use bmo::{avg, CubeFamily, NormKind, NormParams, NormReport, TestFunction, Witness};
