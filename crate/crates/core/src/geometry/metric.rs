use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::geometry::curvature::CurvatureBundle;
use crate::grid_field::{gradient, Grid, Slot, Symmetry, TensorField};
use crate::linalg::{self, Mat3};
use crate::scalar::Real;

/// A Riemannian metric sampled on the grid, with its inverse, volume element and
/// Christoffel symbols. The full curvature bundle is computed on first use and cached.
#[derive(Clone, Debug)]
pub struct MetricField<T: Real> {
    g: TensorField<T>,
    g_inv: TensorField<T>,
    sqrt_det: TensorField<T>,
    christoffel: TensorField<T>,
    curvature: OnceLock<CurvatureBundle<T>>,
}

impl<T: Real> MetricField<T> {
    /// Validates symmetry and positive definiteness at every node.
    pub fn new(g: TensorField<T>) -> Result<Self> {
        if g.rank() != 2 || !g.is_covariant() {
            return Err(Error::ShapeMismatch(
                "metric must be a covariant 2-tensor".into(),
            ));
        }
        let asym = g.max_asymmetry(0, 1);
        if asym > T::lit(1e-12) * g.max_abs().max(T::one()) {
            return Err(Error::NotSymmetric(asym.as_f64()));
        }
        let g = g.with_symmetry(Symmetry::All);
        let grid = g.grid().clone();
        let n = grid.dim();
        let m = grid.len();
        let mut g_inv = TensorField::zeros(&grid, &[Slot::Upper, Slot::Upper]);
        let mut sqrt_det = vec![T::zero(); m];
        for node in 0..m {
            let a = g.matrix_at(node);
            if linalg::cholesky(&a, n).is_none() {
                return Err(Error::NotPositiveDefinite {
                    node,
                    min_eigenvalue: linalg::sym_eigenvalues(&a, n)[0].as_f64(),
                });
            }
            let inv = linalg::inverse(&a, n).expect("positive definite matrix is invertible");
            g_inv.set_matrix_at(node, &symmetric_part(&inv, n));
            sqrt_det[node] = linalg::det(&a, n).sqrt();
        }
        let christoffel = christoffel_symbols(&g, &g_inv);
        Ok(Self {
            sqrt_det: TensorField::scalar(&grid, sqrt_det)?,
            g_inv: g_inv.with_symmetry(Symmetry::All),
            g,
            christoffel,
            curvature: OnceLock::new(),
        })
    }

    /// Euclidean metric `δ_ij`.
    pub fn flat(grid: &Grid) -> Self {
        Self::constant(grid, &linalg::identity(grid.dim())).expect("identity is a metric")
    }

    pub fn constant(grid: &Grid, m: &Mat3<T>) -> Result<Self> {
        Self::new(TensorField::from_constant_matrix(grid, m))
    }

    /// `e^{2u} δ_ij` for a scalar field `u`.
    pub fn conformally_flat(u: &TensorField<T>) -> Result<Self> {
        let grid = u.grid();
        let two = T::lit(2.0);
        let g = TensorField::from_fn(grid, &[Slot::Lower, Slot::Lower], |_, _| T::zero());
        let mut g = g;
        for i in 0..grid.dim() {
            let c = g.comp_index(&[i, i]);
            for (v, w) in g.component_mut(c).iter_mut().zip(u.data()) {
                *v = (two * *w).exp();
            }
        }
        Self::new(g)
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        self.g.grid()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    #[inline]
    pub fn g(&self) -> &TensorField<T> {
        &self.g
    }

    #[inline]
    pub fn g_inv(&self) -> &TensorField<T> {
        &self.g_inv
    }

    #[inline]
    pub fn sqrt_det(&self) -> &TensorField<T> {
        &self.sqrt_det
    }

    /// `Γ^k_ij`, stored with slots (Upper, Lower, Lower) and component order `[k][i][j]`.
    #[inline]
    pub fn christoffel(&self) -> &TensorField<T> {
        &self.christoffel
    }

    pub fn curvature(&self) -> &CurvatureBundle<T> {
        self.curvature.get_or_init(|| CurvatureBundle::compute(self))
    }

    /// `Vol(M, g) = ∫ dv_g`.
    pub fn volume(&self) -> T {
        let s: T = self.sqrt_det.data().iter().copied().sum();
        s * self.grid().cell_volume::<T>()
    }

    /// Largest nodewise deviation of `g·g⁻¹` from the identity.
    pub fn inverse_defect(&self) -> T {
        let n = self.dim();
        let mut worst = T::zero();
        for node in 0..self.grid().len() {
            let p = linalg::matmul(&self.g.matrix_at(node), &self.g_inv.matrix_at(node), n);
            for i in 0..n {
                for j in 0..n {
                    let want = if i == j { T::one() } else { T::zero() };
                    worst = worst.max((p[i][j] - want).abs());
                }
            }
        }
        worst
    }

    /// Smallest eigenvalue of `g` over all nodes.
    pub fn min_eigenvalue(&self) -> T {
        let n = self.dim();
        (0..self.grid().len())
            .map(|k| linalg::sym_eigenvalues(&self.g.matrix_at(k), n)[0])
            .fold(T::infinity(), T::min)
    }

    /// Converts the scalar type of every cached quantity by rebuilding from `g`.
    pub fn cast<U: Real>(&self) -> Result<MetricField<U>> {
        MetricField::new(self.g.cast())
    }
}

fn symmetric_part<T: Real>(a: &Mat3<T>, n: usize) -> Mat3<T> {
    let mut out = *a;
    let half = T::lit(0.5);
    for i in 0..n {
        for j in 0..n {
            out[i][j] = (a[i][j] + a[j][i]) * half;
        }
    }
    out
}

/// `Γ^k_ij = ½ g^{kl}(∂_i g_jl + ∂_j g_il − ∂_l g_ij)`.
fn christoffel_symbols<T: Real>(g: &TensorField<T>, g_inv: &TensorField<T>) -> TensorField<T> {
    let grid = g.grid();
    let n = grid.dim();
    let m = grid.len();
    let dg = gradient(g); // [a][i][j] = ∂_a g_ij
    let half = T::lit(0.5);
    let mut first = TensorField::covariant(grid, 3); // Γ_{l i j}
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                let a = dg.comp(&[i, j, l]).to_vec();
                let b = dg.comp(&[j, i, l]);
                let c = dg.comp(&[l, i, j]);
                let out = first.comp_mut(&[l, i, j]);
                for k in 0..m {
                    out[k] = half * (a[k] + b[k] - c[k]);
                }
            }
        }
    }
    let mut gamma = TensorField::zeros(grid, &[Slot::Upper, Slot::Lower, Slot::Lower]);
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut acc = vec![T::zero(); m];
                for l in 0..n {
                    let gi = g_inv.comp(&[k, l]);
                    let f = first.comp(&[l, i, j]);
                    for node in 0..m {
                        acc[node] += gi[node] * f[node];
                    }
                }
                gamma.comp_mut(&[k, i, j]).copy_from_slice(&acc);
            }
        }
    }
    gamma
}
