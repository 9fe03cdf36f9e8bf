//! Two-dimensional (bearing, range) Cramér-Rao bounds for planar sensor
//! arrays observing near-field narrowband emitters, and single-element
//! repositioning driven by a Hadamard determinant bound.
//!
//! The numeric core is generic over [`Real`] (`f32`, `f64`). The aliases at
//! the crate root fix the scalar to `f64`, which is what the CLI and the
//! scenario files use.
//!
//! ```
//! use nalgebra::{Complex, Vector2};
//! use nearfield_crb::fim_crb::assess;
//! use nearfield_crb::geometry::{SensorGeom, SourceGeom};
//! use nearfield_crb::{Scenario, SourceSignal};
//!
//! let sensors = [(0.0, 0.0), (12.0, 1.0), (-9.0, 3.0)]
//!     .map(|(x, y)| SensorGeom::from_cartesian(Vector2::new(x, y)).unwrap())
//!     .to_vec();
//! let source = SourceGeom::from_cartesian(Vector2::new(10.0, 70.0)).unwrap();
//! let signal = SourceSignal::new(1.2e6, Complex::new(1.0, 2.0)).unwrap();
//! let scenario = Scenario::new(vec![source], sensors, 3e8, vec![signal], 1.0, 1).unwrap();
//!
//! let bounds = assess(&scenario).unwrap();
//! assert!(bounds.det_rx > 0.0);
//! assert!(bounds.crb.crb_theta_total > 0.0);
//! ```

// `!(x > 0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fim_crb;
pub mod geometry;
pub mod io;
pub mod optimizer;
pub mod reposition;
pub mod scalar;
pub mod signal_model;
pub mod validation;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Scenario = geometry::Scenario<f64>;
pub type Constellation = geometry::Constellation<f64>;
pub type PairwiseGeometry = geometry::PairwiseGeometry<f64>;
pub type SourceSignal = signal_model::SourceSignal<f64>;
pub type SteeringMatrix = signal_model::SteeringMatrix<f64>;
pub type CovarianceSet = signal_model::CovarianceSet<f64>;
pub type FimMatrix = fim_crb::FimMatrix<f64>;
pub type CrbReport = fim_crb::CrbReport<f64>;
pub type Bounds = fim_crb::Bounds<f64>;
pub type RepositionPlan = reposition::RepositionPlan<f64>;
pub type SweepRow = optimizer::SweepRow<f64>;

pub type Scenario32 = geometry::Scenario<f32>;
pub type Constellation32 = geometry::Constellation<f32>;
