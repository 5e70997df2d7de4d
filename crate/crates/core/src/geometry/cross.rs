use crate::error::{Error, Result};
use crate::geometry::{covariant_derivative, MetricField};
use crate::grid_field::{l2_norm, Slot, Symmetry, TensorField};
use crate::linalg;
use crate::scalar::Real;

/// Cross curvature of a 3-metric together with the divergence-identity residual.
#[derive(Clone, Debug)]
pub struct CrossCurvature<T: Real> {
    /// `Cr_ij = det(g⁻¹E) · g_ia (E⁻¹)^{ab} g_bj`.
    pub cr: TensorField<T>,
    /// `(Cr⁻¹)^{ij} ∇_i Cr_jk − ½ (Cr⁻¹)^{ij} ∇_k Cr_ij`.
    pub identity: TensorField<T>,
    pub residual: T,
    /// `‖(Cr⁻¹)^{ij} ∇_i Cr_jk‖ + ½‖(Cr⁻¹)^{ij} ∇_k Cr_ij‖`.
    pub scale: T,
    /// Smallest `|det(g⁻¹E)| / s³` over the grid, with `s` the largest nodal norm of `g⁻¹E`.
    pub min_relative_det: T,
}

impl<T: Real> CrossCurvature<T> {
    pub fn relative_residual(&self) -> T {
        if self.scale > T::zero() {
            self.residual / self.scale
        } else {
            self.residual
        }
    }
}

const DET_GATE: f64 = 1e-10;

pub fn cross_curvature<T: Real>(g: &MetricField<T>) -> Result<CrossCurvature<T>> {
    let n = g.dim();
    if n != 3 {
        return Err(Error::UnsupportedDimension {
            dim: n,
            reason: "cross curvature is defined in dimension 3".into(),
        });
    }
    let e = &g.curvature().einstein;
    let m = g.grid().len();
    let mut mixed = Vec::with_capacity(m);
    let mut scale = T::zero();
    for node in 0..m {
        let a = linalg::matmul(&g.g_inv().matrix_at(node), &e.matrix_at(node), n);
        let norm = a.iter().flatten().map(|v| *v * *v).sum::<T>().sqrt();
        scale = scale.max(norm);
        mixed.push(a);
    }
    if scale < T::lit(DET_GATE) {
        return Err(Error::Singular {
            node: 0,
            determinant: 0.0,
        });
    }
    let cube = scale * scale * scale;
    let mut cr = TensorField::covariant(g.grid(), 2);
    let mut cr_inv = TensorField::zeros(g.grid(), &[Slot::Upper, Slot::Upper]);
    let mut min_rel = T::infinity();
    for node in 0..m {
        let d = linalg::det(&mixed[node], n);
        min_rel = min_rel.min(d.abs() / cube);
        if d.abs() <= T::lit(DET_GATE) * cube {
            return Err(Error::Singular {
                node,
                determinant: d.as_f64(),
            });
        }
        let gm = g.g().matrix_at(node);
        let gi = g.g_inv().matrix_at(node);
        let einv = linalg::inverse(&e.matrix_at(node), n).expect("checked determinant");
        let mut c = linalg::matmul(&linalg::matmul(&gm, &einv, n), &gm, n);
        let mut ci = linalg::matmul(&linalg::matmul(&gi, &e.matrix_at(node), n), &gi, n);
        for i in 0..n {
            for j in 0..n {
                c[i][j] *= d;
                ci[i][j] /= d;
            }
        }
        cr.set_matrix_at(node, &c);
        cr_inv.set_matrix_at(node, &ci);
    }
    let cr = cr.with_symmetry(Symmetry::All);
    let cr_inv = cr_inv.with_symmetry(Symmetry::All);

    // (∇Cr)_{a i j}
    let dcr = covariant_derivative(&cr, g)?;
    let mut lhs = TensorField::covariant(g.grid(), 1);
    let mut rhs = TensorField::covariant(g.grid(), 1);
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let a = cr_inv.comp(&[i, j]);
                let d1 = dcr.comp(&[i, j, k]);
                let d2 = dcr.comp(&[k, i, j]);
                let mut l = vec![T::zero(); m];
                let mut r = vec![T::zero(); m];
                for p in 0..m {
                    l[p] = a[p] * d1[p];
                    r[p] = T::lit(0.5) * a[p] * d2[p];
                }
                for (o, v) in lhs.comp_mut(&[k]).iter_mut().zip(&l) {
                    *o += *v;
                }
                for (o, v) in rhs.comp_mut(&[k]).iter_mut().zip(&r) {
                    *o += *v;
                }
            }
        }
    }
    let mut identity = lhs.clone();
    identity -= &rhs;
    Ok(CrossCurvature {
        residual: l2_norm(&identity, g),
        scale: l2_norm(&lhs, g) + l2_norm(&rhs, g),
        cr,
        identity,
        min_relative_det: min_rel,
    })
}
