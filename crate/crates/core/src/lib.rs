//! Quantitative rectifiability diagnostics for finitely supported measures in
//! R^d.
//!
//! The crate computes L² and sup beta numbers over a multiresolution family of
//! balls, Jones-type square functions and their bounded/divergent
//! classification, traveling-salesman curves through multiscale net
//! hierarchies (with a full length ledger), ball trees with good/bad
//! partitions, and cone-density tests for Lipschitz-graph rectifiability.

pub mod beta;
pub mod cones;
pub mod curve;
pub mod error;
pub mod geometry;
pub mod index;
pub mod io;
pub mod jones;
pub mod measures;
pub mod nets;
pub mod trees;

pub use error::{Error, Result};
pub use geometry::{Ball, Line, MPlane, Point};
pub use measures::{DiscreteMeasure, MeasureSpec};
pub use nets::{BallId, MultiresolutionFamily, NetLevel};
