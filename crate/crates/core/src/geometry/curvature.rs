use crate::geometry::index::trace;
use crate::geometry::MetricField;
use crate::grid_field::{gradient, Slot, Symmetry, TensorField};
use crate::scalar::Real;

/// Curvature of a metric under the conventions
/// `R^l_{ijk} = ∂_iΓ^l_{jk} − ∂_jΓ^l_{ik} + Γ^l_{im}Γ^m_{jk} − Γ^l_{jm}Γ^m_{ik}`,
/// `Ric_{jk} = R^i_{ijk}`, `s = g^{jk}Ric_{jk}`, `E = Ric − (s/2)g`.
#[derive(Clone, Debug)]
pub struct CurvatureBundle<T: Real> {
    /// `R^l_{ijk}` with slots (Upper, Lower, Lower, Lower), component order `[l][i][j][k]`.
    pub riemann: TensorField<T>,
    pub ricci: TensorField<T>,
    pub scalar: TensorField<T>,
    pub einstein: TensorField<T>,
}

impl<T: Real> CurvatureBundle<T> {
    pub fn compute(g: &MetricField<T>) -> Self {
        let grid = g.grid();
        let n = grid.dim();
        let m = grid.len();
        let gamma = g.christoffel();
        let dgamma = gradient(gamma); // [a][l][j][k] = ∂_a Γ^l_jk
        let mut riemann = TensorField::zeros(grid, &[Slot::Upper, Slot::Lower, Slot::Lower, Slot::Lower]);
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut acc: Vec<T> = dgamma.comp(&[i, l, j, k]).to_vec();
                        let b = dgamma.comp(&[j, l, i, k]);
                        for (x, y) in acc.iter_mut().zip(b) {
                            *x -= *y;
                        }
                        for mm in 0..n {
                            let g1 = gamma.comp(&[l, i, mm]);
                            let g2 = gamma.comp(&[mm, j, k]);
                            let g3 = gamma.comp(&[l, j, mm]);
                            let g4 = gamma.comp(&[mm, i, k]);
                            for node in 0..m {
                                acc[node] += g1[node] * g2[node] - g3[node] * g4[node];
                            }
                        }
                        riemann.comp_mut(&[l, i, j, k]).copy_from_slice(&acc);
                    }
                }
            }
        }
        let mut ricci = TensorField::covariant(grid, 2);
        for j in 0..n {
            for k in 0..n {
                let mut acc = vec![T::zero(); m];
                for i in 0..n {
                    for (x, y) in acc.iter_mut().zip(riemann.comp(&[i, i, j, k])) {
                        *x += *y;
                    }
                }
                ricci.comp_mut(&[j, k]).copy_from_slice(&acc);
            }
        }
        let ricci = ricci.with_symmetry(Symmetry::All);
        let scalar = trace(&ricci, g);
        let mut einstein = ricci.clone();
        einstein.axpy(-T::lit(0.5), &g.g().times_scalar(&scalar));
        let einstein = einstein.with_symmetry(Symmetry::All);
        Self {
            riemann,
            ricci,
            scalar,
            einstein,
        }
    }

    /// `R_{ijkl} = g_{lm} R^m_{ijk}` (all covariant), so that `Rm(X,Y,Z,W) = g(R(X,Y)Z, W)`.
    pub fn riemann_lowered(&self, g: &MetricField<T>) -> TensorField<T> {
        let n = g.dim();
        let m = g.grid().len();
        let mut out = TensorField::covariant(g.grid(), 4);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut acc = vec![T::zero(); m];
                        for mm in 0..n {
                            let gl = g.g().comp(&[l, mm]);
                            let r = self.riemann.comp(&[mm, i, j, k]);
                            for node in 0..m {
                                acc[node] += gl[node] * r[node];
                            }
                        }
                        out.comp_mut(&[i, j, k, l]).copy_from_slice(&acc);
                    }
                }
            }
        }
        out
    }
}
