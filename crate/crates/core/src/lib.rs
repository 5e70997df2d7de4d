//! Harmonic maps, harmonic symmetric tensors and `L²`-orthogonal decompositions on flat tori
//! with arbitrary smooth periodic metrics, computed with Fourier-pseudospectral calculus.

pub mod config;
pub mod decompositions;
pub mod error;
pub mod expr;
pub mod fixtures;
pub mod geometry;
pub mod grid_field;
pub mod harmonic_classes;
pub mod linalg;
pub mod maps;
pub mod operators;
pub mod report;
pub mod scalar;
pub mod suite;
pub mod variations;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision tensor field.
pub type Field = grid_field::TensorField<f64>;
/// Double-precision metric.
pub type Metric = geometry::MetricField<f64>;
/// Single-precision tensor field.
pub type Field32 = grid_field::TensorField<f32>;
/// Single-precision metric.
pub type Metric32 = geometry::MetricField<f32>;
