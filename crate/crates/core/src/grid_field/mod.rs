//! Periodic grids, tensor fields and their pseudospectral calculus.

mod grid;
mod inner;
mod spectral;
mod tensor;

pub use grid::Grid;
pub use inner::{contract_full, l2_inner_product, l2_norm};
pub use spectral::{
    gradient, integrate, integrate_flat, partial_derivative, spectral_diagnostics,
    SpectralDiagnostics, TrigInterpolant,
};
pub use tensor::{MultiIndex, Slot, Symmetry, TensorField};
pub(crate) use spectral::derivative_component;
