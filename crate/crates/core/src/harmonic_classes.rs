//! Harmonic tensors, infinitesimal harmonic transformations and the pointwise splitting of
//! `∇φ̄` into the three irreducible pieces `𝔎₁ ⊕ 𝔎₂ ⊕ 𝔎₃`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decompositions::{alpha_split, DecomposeOptions};
use crate::error::{Error, Result};
use crate::geometry::{covariant_derivative, lower_all, trace, MetricField};
use crate::grid_field::{integrate, l2_norm, Symmetry, TensorField};
use crate::linalg::{cholesky, inverse, transpose};
use crate::operators::{alpha_g_adjoint, d_sym2, divergence, exterior_derivative, killing_operator, sampson_1form, sym3_derivative};
use crate::report::{CheckReport, Tolerances};
use crate::scalar::Real;
use std::sync::Arc;

/// Relative component norm above which a class is reported present.
pub const LABEL_THRESHOLD: f64 = 1e-6;

/// `‖α_g* φ‖` together with the scale `‖∇φ‖` it is judged against.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarmonicResidual {
    pub value: f64,
    pub scale: f64,
}

impl HarmonicResidual {
    pub fn relative(&self, floor: f64) -> f64 {
        self.value / self.scale.max(floor)
    }

    /// Membership in `ℋ_g` at relative tolerance `tol`.
    pub fn is_harmonic(&self, tol: f64, floor: f64) -> bool {
        self.value <= tol * self.scale + floor
    }
}

/// Defect of `δφ = −½ d(trace_g φ)`.
pub fn harmonic_tensor_residual<T: Real>(phi: &TensorField<T>, g: &MetricField<T>) -> Result<HarmonicResidual> {
    if phi.rank() != 2 {
        return Err(Error::ShapeMismatch("harmonic tensors are symmetric 2-tensors".into()));
    }
    let phi = lower_all(phi, g);
    let value = l2_norm(&alpha_g_adjoint(&phi, g), g).as_f64();
    let scale = l2_norm(&covariant_derivative(&phi, g)?, g).as_f64();
    Ok(HarmonicResidual { value, scale })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IhtResidual {
    /// `‖Δ_S θ‖`, zero exactly for infinitesimal harmonic transformations
    pub sampson: f64,
    /// `‖δ*θ‖`, zero for Killing fields
    pub killing: f64,
    pub norm: f64,
}

pub fn iht_residual<T: Real>(theta: &TensorField<T>, g: &MetricField<T>) -> IhtResidual {
    IhtResidual {
        sampson: l2_norm(&sampson_1form(theta, g), g).as_f64(),
        killing: l2_norm(&killing_operator(theta, g), g).as_f64(),
        norm: l2_norm(theta, g).as_f64(),
    }
}

/// `φ̄ = φ − ½(trace_g φ) g`.
pub fn bar<T: Real>(phi: &TensorField<T>, g: &MetricField<T>) -> TensorField<T> {
    let phi = lower_all(phi, g);
    let mut out = phi.clone();
    out.axpy(-T::lit(0.5), &g.g().times_scalar(&trace(&phi, g)));
    out.with_symmetry(Symmetry::All)
}

/// `φ = φ̄ − (1/(n−2))(trace_g φ̄) g`, the inverse of [`bar`] for `n ≠ 2`.
pub fn bar_inverse<T: Real>(phibar: &TensorField<T>, g: &MetricField<T>) -> Result<TensorField<T>> {
    let n = g.dim();
    if n == 2 {
        return Err(Error::UnsupportedDimension {
            dim: 2,
            reason: "φ ↦ φ̄ is not invertible in dimension 2".into(),
        });
    }
    let phibar = lower_all(phibar, g);
    let mut out = phibar.clone();
    let c = T::one() / T::from_usize_lossy(n - 2);
    out.axpy(-c, &g.g().times_scalar(&trace(&phibar, g)));
    Ok(out.with_symmetry(Symmetry::All))
}

/// Frame-component bases of `W = {K : K_ijk = K_ikj, Σ_i K_iik = 0}` and its three pieces.
///
/// Vectors live in `ℝ^{n³}` with index `i n² + j n + k` for `K(e_i, e_j, e_k)`; every basis is
/// orthonormal in the Euclidean product.
#[derive(Clone, Debug)]
pub struct KSpaceBasis {
    pub n: usize,
    pub w: DMatrix<f64>,
    pub k1: DMatrix<f64>,
    pub k2: DMatrix<f64>,
    pub k3: DMatrix<f64>,
}

impl KSpaceBasis {
    /// `(dim W, dim 𝔎₁, dim 𝔎₂, dim 𝔎₃)`
    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.w.ncols(), self.k1.ncols(), self.k2.ncols(), self.k3.ncols())
    }

    pub fn class(&self, alpha: usize) -> &DMatrix<f64> {
        match alpha {
            1 => &self.k1,
            2 => &self.k2,
            3 => &self.k3,
            _ => panic!("classes are numbered 1..=3"),
        }
    }
}

fn idx3(n: usize, i: usize, j: usize, k: usize) -> usize {
    (i * n + j) * n + k
}

/// Rows of the constraints defining `W`.
fn w_constraints(n: usize) -> Vec<Vec<f64>> {
    let len = n * n * n;
    let mut rows = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in j + 1..n {
                let mut r = vec![0.0; len];
                r[idx3(n, i, j, k)] = 1.0;
                r[idx3(n, i, k, j)] = -1.0;
                rows.push(r);
            }
        }
    }
    for k in 0..n {
        let mut r = vec![0.0; len];
        for i in 0..n {
            r[idx3(n, i, i, k)] += 1.0;
        }
        rows.push(r);
    }
    rows
}

fn k23_constraints(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|z| {
            let mut r = vec![0.0; n * n * n];
            for k in 0..n {
                r[idx3(n, z, k, k)] += 1.0;
            }
            r
        })
        .collect()
}

/// Orthonormal basis of the null space of the stacked rows.
fn null_space(rows: &[Vec<f64>], len: usize) -> DMatrix<f64> {
    if rows.is_empty() {
        return DMatrix::identity(len, len);
    }
    let c = DMatrix::from_fn(rows.len(), len, |r, col| rows[r][col]);
    let gram = c.transpose() * &c;
    let eig = SymmetricEigen::new(gram);
    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let cols: Vec<DVector<f64>> = (0..len)
        .filter(|&i| eig.eigenvalues[i].abs() <= 1e-10 * scale)
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect();
    orthonormalize(&cols, len)
}

/// Orthonormal basis of the span of `cols`.
fn orthonormalize(cols: &[DVector<f64>], len: usize) -> DMatrix<f64> {
    if cols.is_empty() {
        return DMatrix::zeros(len, 0);
    }
    let a = DMatrix::from_columns(cols);
    let svd = a.svd(true, false);
    let u = svd.u.expect("requested");
    let smax = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > 1e-10 * smax.max(1.0))
        .collect();
    DMatrix::from_fn(len, keep.len(), |r, c| u[(r, keep[c])])
}

/// The trace ansatz `(n+1) a(X) g(Y,Z) − a(Y) g(X,Z) − a(Z) g(X,Y)` (unnormalized) for `a = e_m`.
fn k3_generator(n: usize, m: usize) -> DVector<f64> {
    let mut v = DVector::zeros(n * n * n);
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let a = |i: usize| d(i, m);
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                v[idx3(n, x, y, z)] = (n as f64 + 1.0) * a(x) * d(y, z) - a(y) * d(x, z) - a(z) * d(x, y);
            }
        }
    }
    v
}

/// Builds the bases and checks `dim 𝔎₁ + dim 𝔎₂ + dim 𝔎₃ = dim W` with mutually orthogonal pieces.
pub fn build_k_basis(n: usize) -> Result<KSpaceBasis> {
    if !(2..=3).contains(&n) {
        return Err(Error::UnsupportedDimension {
            dim: n,
            reason: "K-space bases are built for n ∈ {2, 3}".into(),
        });
    }
    let len = n * n * n;
    let base = w_constraints(n);
    let w = null_space(&base, len);

    let mut rows2 = base.clone();
    for x in 0..n {
        for y in x + 1..n {
            for z in 0..n {
                let mut r = vec![0.0; len];
                r[idx3(n, x, y, z)] = 1.0;
                r[idx3(n, y, x, z)] = -1.0;
                rows2.push(r);
            }
        }
    }
    rows2.extend(k23_constraints(n));
    let k2 = null_space(&rows2, len);

    let mut rows1 = base.clone();
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                let mut r = vec![0.0; len];
                r[idx3(n, x, y, z)] += 1.0;
                r[idx3(n, y, z, x)] += 1.0;
                r[idx3(n, z, x, y)] += 1.0;
                rows1.push(r);
            }
        }
    }
    rows1.extend(k23_constraints(n));
    let k1 = null_space(&rows1, len);

    let gens: Vec<DVector<f64>> = (0..n).map(|m| k3_generator(n, m)).collect();
    let k3 = orthonormalize(&gens, len);

    let basis = KSpaceBasis { n, w, k1, k2, k3 };
    let (dw, d1, d2, d3) = basis.dims();
    if d1 + d2 + d3 != dw {
        return Err(Error::Precondition(format!(
            "K-space pieces have dimensions {d1} + {d2} + {d3} ≠ {dw}"
        )));
    }
    let all = DMatrix::from_columns(
        &[&basis.k1, &basis.k2, &basis.k3]
            .iter()
            .flat_map(|m| m.column_iter().map(|c| c.into_owned()).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
    );
    let gram = all.transpose() * &all;
    let defect = (gram - DMatrix::identity(dw, dw)).abs().max();
    let in_w = (&basis.w * (basis.w.transpose() * &all) - &all).abs().max();
    if defect > 1e-10 || in_w > 1e-10 {
        return Err(Error::Precondition(format!(
            "K-space pieces not an orthogonal splitting of W (gram defect {defect:e}, W defect {in_w:e})"
        )));
    }
    Ok(basis)
}

/// Frame components of a single `K ∈ T*⊗S²` given as a vector in `ℝ^{n³}`.
pub mod frame {
    use super::idx3;

    /// `K(X,Y,Z) + K(Y,Z,X) + K(Z,X,Y)`
    pub fn cyclic_sum(k: &[f64], n: usize) -> Vec<f64> {
        let mut out = vec![0.0; k.len()];
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    out[idx3(n, x, y, z)] = k[idx3(n, x, y, z)] + k[idx3(n, y, z, x)] + k[idx3(n, z, x, y)];
                }
            }
        }
        out
    }

    /// `K(X,Y,Z) − K(Y,X,Z)`
    pub fn first_pair_antisym(k: &[f64], n: usize) -> Vec<f64> {
        let mut out = vec![0.0; k.len()];
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    out[idx3(n, x, y, z)] = k[idx3(n, x, y, z)] - k[idx3(n, y, x, z)];
                }
            }
        }
        out
    }

    /// `K_12(Z) = Σ_k K(e_k, e_k, Z)`
    pub fn trace12(k: &[f64], n: usize) -> Vec<f64> {
        (0..n).map(|z| (0..n).map(|i| k[idx3(n, i, i, z)]).sum()).collect()
    }

    /// `K_23(Z) = Σ_k K(Z, e_k, e_k)`
    pub fn trace23(k: &[f64], n: usize) -> Vec<f64> {
        (0..n).map(|z| (0..n).map(|i| k[idx3(n, z, i, i)]).sum()).collect()
    }

    /// `K − (1/(n²+n−2))[(n+1)K_23(X)g(Y,Z) − K_23(Y)g(X,Z) − K_23(Z)g(X,Y)]`
    pub fn ansatz_defect(k: &[f64], n: usize) -> Vec<f64> {
        let a = trace23(k, n);
        let c = 1.0 / (n * n + n - 2) as f64;
        let d = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
        let mut out = k.to_vec();
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    out[idx3(n, x, y, z)] -= c * ((n as f64 + 1.0) * a[x] * d(y, z) - a[y] * d(x, z) - a[z] * d(x, y));
                }
            }
        }
        out
    }
}

/// Structure residuals of `φ̄`: Killing (`𝔎₁`), Codazzi (`𝔎₂`) and Sinyukov (`𝔎₃`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureResiduals {
    /// `‖δ*₃ φ̄‖`
    pub killing: f64,
    /// `‖d φ̄‖`
    pub codazzi: f64,
    /// defect of the Sinyukov system for `ω = φ̄ − (n/(n²+n−2))(trace φ̄) g`
    pub sinyukov: f64,
    /// `‖∇φ̄‖`, the common scale
    pub scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    /// `L²` norms of the projections onto `𝔎₁, 𝔎₂, 𝔎₃`
    pub component_norms: [f64; 3],
    /// `‖∇φ̄‖`
    pub total_norm: f64,
    /// norm of the part of `∇φ̄` outside `W` (nonzero only through discretization error)
    pub off_w_norm: f64,
    /// `|‖P_W K‖² − Σ‖K_α‖²| / ‖P_W K‖²`
    pub pythagoras_defect: f64,
    /// defining-condition residuals of the projected pieces, relative to `‖K‖`:
    /// cyclic sum of `K₁`, first-pair antisymmetrization of `K₂`, ansatz defect of `K₃`
    pub constraint_residuals: [f64; 3],
    /// classes whose relative norm exceeds [`LABEL_THRESHOLD`] and whose norm stands above
    /// `10‖α*φ‖`, e.g. `["K1", "K3"]`
    pub class_label: Vec<String>,
    pub structure_residuals: StructureResiduals,
    pub harmonic_residual: HarmonicResidual,
    /// which map produced `φ̄`
    pub bar_convention: String,
}

/// Frame vector `e_a^i` columns: `E = L⁻ᵀ` with `g = L Lᵀ`.
fn frame_at<T: Real>(g: &MetricField<T>, node: usize) -> Result<[[f64; 3]; 3]> {
    let n = g.dim();
    let m = g.g().matrix_at(node);
    let mut a = [[0.0f64; 3]; 3];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = m[i][j].as_f64();
        }
    }
    let l = cholesky(&a, n).ok_or(Error::NotPositiveDefinite {
        node,
        min_eigenvalue: f64::NAN,
    })?;
    inverse(&transpose(&l), n).ok_or(Error::Singular { node, determinant: 0.0 })
}

/// Sinyukov defect `2∇_kω_ij − ∇_i(tr ω) g_kj − ∇_j(tr ω) g_ik` as a rank-3 field (slot order `k i j`).
pub fn sinyukov_defect<T: Real>(omega: &TensorField<T>, g: &MetricField<T>) -> Result<TensorField<T>> {
    let omega = lower_all(omega, g);
    let mut out = covariant_derivative(&omega, g)?.scaled(T::lit(2.0));
    let dt = exterior_derivative(&trace(&omega, g));
    let n = g.dim();
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let a = dt.comp(&[i]).to_vec();
                let b = dt.comp(&[j]).to_vec();
                let gkj = g.g().comp(&[k, j]).to_vec();
                let gik = g.g().comp(&[i, k]).to_vec();
                for (p, o) in out.comp_mut(&[k, i, j]).iter_mut().enumerate() {
                    *o -= a[p] * gkj[p] + b[p] * gik[p];
                }
            }
        }
    }
    Ok(out)
}

pub fn sinyukov_residual<T: Real>(omega: &TensorField<T>, g: &MetricField<T>) -> Result<T> {
    Ok(l2_norm(&sinyukov_defect(omega, g)?, g))
}

/// `ω = φ̄ − (n/(n²+n−2))(trace_g φ̄) g`.
pub fn sinyukov_omega<T: Real>(phibar: &TensorField<T>, g: &MetricField<T>) -> TensorField<T> {
    let n = g.dim();
    let c = T::from_usize_lossy(n) / T::from_usize_lossy(n * n + n - 2);
    let phibar = lower_all(phibar, g);
    let mut out = phibar.clone();
    out.axpy(-c, &g.g().times_scalar(&trace(&phibar, g)));
    out
}

pub fn structure_residuals<T: Real>(phibar: &TensorField<T>, g: &MetricField<T>) -> Result<StructureResiduals> {
    let phibar = lower_all(phibar, g).with_symmetry(Symmetry::All);
    Ok(StructureResiduals {
        killing: l2_norm(&sym3_derivative(&phibar, g)?, g).as_f64(),
        codazzi: l2_norm(&d_sym2(&phibar, g)?, g).as_f64(),
        sinyukov: sinyukov_residual(&sinyukov_omega(&phibar, g), g)?.as_f64(),
        scale: l2_norm(&covariant_derivative(&phibar, g)?, g).as_f64(),
    })
}

/// Projects `K = ∇φ̄` onto `𝔎₁ ⊕ 𝔎₂ ⊕ 𝔎₃` node by node in an orthonormal frame.
///
/// `harmonic_tol` gates the input: `‖α_g*φ‖ ≤ harmonic_tol·‖∇φ‖ + floor` is required.
pub fn classify<T: Real>(phi: &TensorField<T>, g: &MetricField<T>, harmonic_tol: f64, floor: f64) -> Result<ClassReport> {
    let n = g.dim();
    let h = harmonic_tensor_residual(phi, g)?;
    if !h.is_harmonic(harmonic_tol, floor) {
        return Err(Error::Precondition(format!(
            "tensor is not harmonic: ‖α*φ‖ = {:e} against ‖∇φ‖ = {:e}",
            h.value, h.scale
        )));
    }
    let basis = build_k_basis(n)?;
    let phibar = bar(phi, g);
    let k = covariant_derivative(&phibar, g)?;
    let grid = g.grid();
    let len = n * n * n;
    let cell = grid.cell_volume::<f64>();
    let projectors: Vec<DMatrix<f64>> = (1..=3).map(|a| basis.class(a) * basis.class(a).transpose()).collect();
    let pw = &basis.w * basis.w.transpose();
    // per node: [|K|², |K1|², |K2|², |K3|², |K − P_W K|², c1², c2², c3²]
    let sums = (0..grid.len())
        .into_par_iter()
        .map(|p| -> Result<[f64; 8]> {
            let e = frame_at(g, p)?;
            let mut kh = DVector::zeros(len);
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        let mut s = 0.0;
                        for i in 0..n {
                            for j in 0..n {
                                for l in 0..n {
                                    s += k.get(&[i, j, l], p).as_f64() * e[i][a] * e[j][b] * e[l][c];
                                }
                            }
                        }
                        kh[idx3(n, a, b, c)] = s;
                    }
                }
            }
            let w = g.sqrt_det().at(p).as_f64() * cell;
            let parts: Vec<DVector<f64>> = projectors.iter().map(|pr| pr * &kh).collect();
            let off = &kh - &pw * &kh;
            let c1 = frame::cyclic_sum(parts[0].as_slice(), n);
            let c2 = frame::first_pair_antisym(parts[1].as_slice(), n);
            let c3 = frame::ansatz_defect(parts[2].as_slice(), n);
            let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>() * w;
            Ok([
                kh.norm_squared() * w,
                parts[0].norm_squared() * w,
                parts[1].norm_squared() * w,
                parts[2].norm_squared() * w,
                off.norm_squared() * w,
                sq(&c1),
                sq(&c2),
                sq(&c3),
            ])
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold([0.0f64; 8], |mut acc, v| {
            for (a, b) in acc.iter_mut().zip(v) {
                *a += b;
            }
            acc
        });
    let total = sums[0].sqrt();
    let norms = [sums[1].sqrt(), sums[2].sqrt(), sums[3].sqrt()];
    let rel = |v: f64| if total > floor { v / total } else { v };
    // ‖P_W K‖²; the part of K outside W is reported separately as off_w_norm
    let in_w = (sums[0] - sums[4]).max(0.0);
    let pythagoras_defect = if in_w > floor * floor {
        (in_w - sums[1] - sums[2] - sums[3]).abs() / in_w
    } else {
        (in_w - sums[1] - sums[2] - sums[3]).abs()
    };
    // components at the level of ‖α*φ‖ are indistinguishable from the off-W error
    let noise = 10.0 * h.value + floor;
    let class_label = (0..3)
        .filter(|&a| norms[a] > noise && norms[a] > LABEL_THRESHOLD * total)
        .map(|a| format!("K{}", a + 1))
        .collect();
    Ok(ClassReport {
        component_norms: norms,
        total_norm: total,
        off_w_norm: sums[4].sqrt(),
        pythagoras_defect,
        constraint_residuals: [rel(sums[5].sqrt()), rel(sums[6].sqrt()), rel(sums[7].sqrt())],
        class_label,
        structure_residuals: structure_residuals(&phibar, g)?,
        harmonic_residual: h,
        bar_convention: "phi - (1/2) trace_g(phi) g".into(),
    })
}

/// Constants of the local closed form `φ̄_ij = e^{2f}(A_ijkl x^k x^l + B_ijk x^k + C_ij)` of a
/// Killing tensor on a constant-curvature metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatKillingData {
    pub n: usize,
    /// `A_ijkl` flattened row-major
    pub a: Vec<f64>,
    /// `B_ijk` flattened row-major
    pub b: Vec<f64>,
    pub c: [[f64; 3]; 3],
}

impl FlatKillingData {
    /// Only `C` nonzero; the periodic case.
    pub fn constant(n: usize, c: [[f64; 3]; 3]) -> Self {
        Self {
            n,
            a: vec![0.0; n.pow(4)],
            b: vec![0.0; n.pow(3)],
            c,
        }
    }

    /// Largest violation of the symmetry and trace identities of `A`, `B`, `C` (flat `g = δ`).
    pub fn identity_defect(&self) -> f64 {
        let n = self.n;
        let a = |i: usize, j: usize, k: usize, l: usize| self.a[((i * n + j) * n + k) * n + l];
        let b = |i: usize, j: usize, k: usize| self.b[(i * n + j) * n + k];
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self.c[i][j] - self.c[j][i]).abs());
                for k in 0..n {
                    worst = worst.max((b(i, j, k) - b(j, i, k)).abs());
                    worst = worst.max((b(i, j, k) + b(i, k, j)).abs());
                    for l in 0..n {
                        worst = worst.max((a(i, j, k, l) - a(j, i, k, l)).abs());
                        worst = worst.max((a(i, j, k, l) - a(i, j, l, k)).abs());
                        worst = worst.max((a(i, j, k, l) + a(i, k, j, l)).abs());
                    }
                }
            }
        }
        for k in 0..n {
            worst = worst.max((0..n).map(|i| b(i, i, k)).sum::<f64>().abs());
            for l in 0..n {
                worst = worst.max((0..n).map(|i| a(i, i, k, l)).sum::<f64>().abs());
            }
        }
        worst
    }
}

/// `f = (1/(2(n+1))) ln det g`.
pub fn conformal_exponent<T: Real>(g: &MetricField<T>) -> TensorField<T> {
    let c = T::one() / T::from_usize_lossy(2 * (g.dim() + 1));
    g.sqrt_det().map(|w| c * (w * w).ln())
}

#[derive(Clone, Debug)]
pub struct FlatKillingForm<T: Real> {
    pub phibar: TensorField<T>,
    /// `φ̄ − (1/(n−2))(trace φ̄) g`; absent for `n = 2`
    pub phi: Option<TensorField<T>>,
    /// `‖δ*₃ φ̄‖`
    pub killing_residual: T,
}

fn flat_check<T: Real>(g: &MetricField<T>) -> Result<()> {
    let n = g.dim();
    for i in 0..n {
        for j in 0..n {
            let want = if i == j { T::one() } else { T::zero() };
            if g.g().comp(&[i, j]).iter().any(|&v| (v - want).abs() > T::lit(1e-12)) {
                return Err(Error::Precondition("closed forms here require the flat metric g = δ".into()));
            }
        }
    }
    Ok(())
}

/// Evaluates the closed form on the flat torus, where periodicity forces `A = B = 0`.
pub fn flat_killing_closed_form<T: Real>(data: &FlatKillingData, g: &MetricField<T>) -> Result<FlatKillingForm<T>> {
    let n = g.dim();
    if data.n != n || data.a.len() != n.pow(4) || data.b.len() != n.pow(3) {
        return Err(Error::ShapeMismatch("closed-form constants do not match the dimension".into()));
    }
    flat_check(g)?;
    let defect = data.identity_defect();
    if defect > 1e-12 {
        return Err(Error::InvalidArgument(format!("constants violate the required identities by {defect:e}")));
    }
    if data.a.iter().chain(&data.b).any(|&v| v != 0.0) {
        return Err(Error::InvalidArgument(
            "non-periodic closed form: nonzero A or B terms grow linearly or quadratically in x and do not live on the torus".into(),
        ));
    }
    let mut c = [[T::zero(); 3]; 3];
    for i in 0..n {
        for j in 0..n {
            c[i][j] = T::lit(data.c[i][j]);
        }
    }
    // f = 0 because det g = 1
    let phibar = TensorField::from_constant_matrix(g.grid(), &c).with_symmetry(Symmetry::All);
    let killing_residual = l2_norm(&sym3_derivative(&phibar, g)?, g);
    let phi = if n == 2 { None } else { Some(bar_inverse(&phibar, g)?) };
    Ok(FlatKillingForm {
        phibar,
        phi,
        killing_residual,
    })
}

#[derive(Clone, Debug)]
pub struct CodazziPotential<T: Real> {
    /// `∇dF`
    pub hessian: TensorField<T>,
    /// `‖d(∇dF)‖`
    pub codazzi_residual: T,
    /// standard deviation of `trace ∇dF = ΔF`
    pub trace_spread: T,
    /// whether `ΔF` is constant, the extra condition for membership in the class `𝔎₂`
    pub constant_trace: bool,
    pub note: String,
}

/// Flat branch `C = 0` of the Codazzi closed form `φ̄ = ∇dF + C F g`.
///
/// On the torus a constant `ΔF` integrates to zero, so the class condition forces `F` harmonic
/// and hence constant: every non-constant potential gives a Codazzi tensor outside the class.
pub fn flat_codazzi_from_potential<T: Real>(f: &TensorField<T>, g: &MetricField<T>) -> Result<CodazziPotential<T>> {
    if f.rank() != 0 {
        return Err(Error::ShapeMismatch("potential must be a scalar field".into()));
    }
    flat_check(g)?;
    let hessian = crate::operators::hessian(f, g);
    let codazzi_residual = l2_norm(&d_sym2(&hessian, g)?, g);
    let lap = trace(&hessian, g);
    let trace_spread = lap.std_dev();
    let scale = l2_norm(&hessian, g).max(T::one());
    let constant_trace = trace_spread <= T::lit(1e-9) * scale;
    let note = if constant_trace {
        "trace ΔF is constant; on the torus this forces ΔF = 0 and F constant".into()
    } else {
        "Codazzi tensor with non-constant trace ΔF: not a member of the class K2".into()
    };
    Ok(CodazziPotential {
        hessian,
        codazzi_residual,
        trace_spread,
        constant_trace,
        note,
    })
}

/// Checks the trace relations of a conservative tensor (`δφ = 0`) split as `φ = α_g θ + φ_h`.
///
/// The exact relation is `trace_g φ − ((n−2)/2) δθ = trace_g φ_h`, together with
/// `Δ_S θ = d(trace_g φ_h)`. The opposite-sign variant `trace_g φ + ((n−2)/2) δθ` is reported
/// as a value for comparison.
pub fn conservative_check<T: Real>(phi: &TensorField<T>, g: &Arc<MetricField<T>>, tol: &Tolerances) -> Result<CheckReport> {
    let phi = lower_all(phi, g);
    let grad = l2_norm(&covariant_derivative(&phi, g)?, g).as_f64();
    let div = l2_norm(&divergence(&phi, g)?, g).as_f64();
    let size = grad.max(l2_norm(&phi, g).as_f64());
    if div > tol.bound(tol.rel(1e-6), size) {
        return Err(Error::Precondition(format!(
            "tensor is not conservative: ‖δφ‖ = {div:e} against max(‖∇φ‖, ‖φ‖) = {size:e}"
        )));
    }
    let n = g.dim();
    let split = alpha_split(&phi, g, &DecomposeOptions { floor: tol.floor, ..Default::default() })?;
    let theta = &split.theta;
    let h = &split.residual_part;
    let tr_h = trace(h, g);
    let tr = trace(&phi, g);
    let dtheta = divergence(theta, g)?;
    let half = T::from_usize_lossy(n) / T::lit(2.0) - T::one();

    let mut rep = CheckReport::new("conservative").with_metadata(g.grid().resolution(), 0);
    let ds = sampson_1form(theta, g);
    let dtr = exterior_derivative(&tr_h);
    let scale = l2_norm(&ds, g).as_f64() + l2_norm(&dtr, g).as_f64();
    rep.residual(
        "sampson(theta) - d trace(phi_h)",
        l2_norm(&(&ds - &dtr), g).as_f64(),
        tol.bound(tol.rel(1e-6), scale.max(size)),
    );
    let tr_scale = tr.max_abs().as_f64().max(tol.floor);
    let spread_h = tr_h.std_dev().as_f64();
    rep.value("trace(phi_h) spread", spread_h);
    if spread_h <= tol.rel(1e-6) * tr_scale {
        let mut derived = tr.clone();
        derived.axpy(-half, &dtheta);
        let mut stated = tr.clone();
        stated.axpy(half, &dtheta);
        rep.residual("trace(phi) - ((n-2)/2) div(theta) spread", derived.std_dev().as_f64() / tr_scale, tol.rel(1e-6));
        rep.value("trace(phi) + ((n-2)/2) div(theta) spread", stated.std_dev().as_f64() / tr_scale);
        let c = derived.mean().as_f64();
        let vol = g.volume().as_f64();
        let integral = integrate(&tr, g.sqrt_det())?.as_f64();
        rep.value("C", c);
        rep.residual("integral trace(phi) - C vol", tol.relative((integral - c * vol).abs(), integral.abs().max(c.abs() * vol)), tol.rel(1e-7));
    } else {
        rep.skip_leg("trace(phi_h) not constant: constancy relations not applicable");
    }
    Ok(rep)
}
