use super::spectral::integrate;
use super::tensor::TensorField;
use crate::error::{Error, Result};
use crate::geometry::{lower_all, raise_all, MetricField};
use crate::scalar::Real;

/// Pointwise full metric contraction `g(φ, ψ)` of two fields with the same slot layout.
pub fn contract_full<T: Real>(
    phi: &TensorField<T>,
    psi: &TensorField<T>,
    g: &MetricField<T>,
) -> Result<TensorField<T>> {
    phi.check_same_shape(psi)?;
    if phi.grid() != g.grid() {
        return Err(Error::ShapeMismatch("field and metric live on different grids".into()));
    }
    let a = lower_all(phi, g);
    let b = raise_all(psi, g);
    let m = phi.nodes();
    let mut out = vec![T::zero(); m];
    for c in 0..a.n_components() {
        for ((o, x), y) in out.iter_mut().zip(a.component(c)).zip(b.component(c)) {
            *o += *x * *y;
        }
    }
    TensorField::scalar(phi.grid(), out)
}

/// `⟨φ, ψ⟩ = ∫ g(φ, ψ) dv_g`.
pub fn l2_inner_product<T: Real>(
    phi: &TensorField<T>,
    psi: &TensorField<T>,
    g: &MetricField<T>,
) -> Result<T> {
    let c = contract_full(phi, psi, g)?;
    integrate(&c, g.sqrt_det())
}

pub fn l2_norm<T: Real>(phi: &TensorField<T>, g: &MetricField<T>) -> T {
    l2_inner_product(phi, phi, g)
        .map(|v| v.max(T::zero()).sqrt())
        .unwrap_or_else(|_| T::nan())
}
