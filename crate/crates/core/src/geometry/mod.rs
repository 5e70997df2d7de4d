//! Metrics, the Levi-Civita connection, curvature, and the special curvature tensors.

mod cross;
mod curvature;
mod index;
mod metric;

pub use cross::{cross_curvature, CrossCurvature};
pub use curvature::CurvatureBundle;
pub use index::{
    covariant_derivative, covariant_derivative_transpose, lower_all, raise_all, raise_lower, scalar_times_metric, trace, IndexMove,
};
pub use metric::MetricField;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_field::{l2_norm, TensorField};
use crate::linalg;
use crate::operators::{divergence, exterior_derivative};
use crate::scalar::Real;

/// Sectional curvature of the coordinate plane spanned by `∂_i, ∂_j`.
pub fn sectional_curvature<T: Real>(g: &MetricField<T>, i: usize, j: usize) -> Result<TensorField<T>> {
    let n = g.dim();
    if i == j {
        return Err(Error::InvalidArgument("sectional curvature needs i != j".into()));
    }
    if i >= n || j >= n {
        return Err(Error::AxisOutOfRange { axis: i.max(j), dim: n });
    }
    let curv = g.curvature();
    let m = g.grid().len();
    let mut out = vec![T::zero(); m];
    for (node, o) in out.iter_mut().enumerate() {
        // Rm(∂_i, ∂_j, ∂_j, ∂_i) = g_{li} R^l_{ijj}
        let mut num = T::zero();
        for l in 0..n {
            num += g.g().get(&[l, i], node) * curv.riemann.get(&[l, i, j, j], node);
        }
        let gii = g.g().get(&[i, i], node);
        let gjj = g.g().get(&[j, j], node);
        let gij = g.g().get(&[i, j], node);
        *o = num / (gii * gjj - gij * gij);
    }
    TensorField::scalar(g.grid(), out)
}

/// Outcome of a nodewise positive-definiteness test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefinitenessReport {
    pub positive_definite: bool,
    /// First node where the Cholesky factorization fails.
    pub first_failure: Option<usize>,
    /// Smallest eigenvalue at that node (or the global minimum when definite).
    pub min_eigenvalue: f64,
    /// Node attaining the global minimum eigenvalue.
    pub worst_node: usize,
}

pub fn positive_definite_check<T: Real>(phi: &TensorField<T>) -> DefinitenessReport {
    let n = phi.dim();
    let mut first_failure = None;
    let mut worst = (0usize, f64::INFINITY);
    for node in 0..phi.nodes() {
        let a = phi.matrix_at(node);
        let ev = linalg::sym_eigenvalues(&a, n)[0].as_f64();
        if ev < worst.1 {
            worst = (node, ev);
        }
        if first_failure.is_none() && linalg::cholesky(&a, n).is_none() {
            first_failure = Some(node);
        }
    }
    let min_eigenvalue = match first_failure {
        Some(node) => linalg::sym_eigenvalues(&phi.matrix_at(node), n)[0].as_f64(),
        None => worst.1,
    };
    DefinitenessReport {
        positive_definite: first_failure.is_none(),
        first_failure,
        min_eigenvalue,
        worst_node: worst.0,
    }
}

/// `‖δRic + ½ ds‖_{L²}`, which vanishes for every metric.
pub fn bianchi_residual<T: Real>(g: &MetricField<T>) -> T {
    let (res, _) = bianchi_residual_with_scale(g);
    res
}

/// Residual together with `‖Ric‖_{L²}` for relative comparisons.
pub fn bianchi_residual_with_scale<T: Real>(g: &MetricField<T>) -> (T, T) {
    let curv = g.curvature();
    let mut r = divergence(&curv.ricci, g).expect("rank-2 input");
    r.axpy(T::lit(0.5), &exterior_derivative(&curv.scalar));
    (l2_norm(&r, g), l2_norm(&curv.ricci, g))
}
