//! Finite metric measure space laboratory: discretized examples, optimal
//! transport, contraction checks, isometry groups and regularity scans.

pub mod contraction;
pub mod error;
pub mod generators;
pub mod geodesic;
pub mod io;
pub mod measure;
pub mod regularity;
pub mod space;
pub mod symmetry;
pub mod transport;

pub use error::{Error, Result};
pub use geodesic::{DiscreteGeodesic, GeodesicFinder, GeodesicOptions};
pub use measure::{Atom, Measure};
pub use space::{BallKind, FiniteMMS, Meta, Point};
