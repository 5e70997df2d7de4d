//! Linear differential operators on forms and symmetric tensors.
//!
//! The divergence is `δ = −trace ∘ ∇` on every rank, contracting the differentiation slot
//! with the first tensor slot.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{covariant_derivative, covariant_derivative_transpose, lower_all, trace, MetricField};
use crate::grid_field::{gradient, l2_inner_product, l2_norm, Slot, Symmetry, TensorField};
use crate::scalar::Real;

fn ensure_symmetric<T: Real>(w: &TensorField<T>, what: &str) -> Result<()> {
    if w.rank() != 2 {
        return Err(Error::ShapeMismatch(format!("{what} expects a symmetric 2-tensor")));
    }
    let asym = w.max_asymmetry(0, 1);
    if asym > T::lit(1e-10) * w.max_abs().max(T::one()) {
        return Err(Error::NotSymmetric(asym.as_f64()));
    }
    Ok(())
}

/// `δT = −g^{ij} (∇_i T)(e_j, …)` for a tensor of rank ≥ 1 (contravariant slots are lowered first).
pub fn divergence<T: Real>(t: &TensorField<T>, g: &MetricField<T>) -> Result<TensorField<T>> {
    let rank = t.rank();
    if rank == 0 {
        return Err(Error::InvalidArgument("divergence of a scalar field".into()));
    }
    if t.grid() != g.grid() {
        return Err(Error::ShapeMismatch("field and metric live on different grids".into()));
    }
    let n = g.dim();
    let m = g.grid().len();
    let d = covariant_derivative(&lower_all(t, g), g)?;
    let out = TensorField::<T>::covariant(g.grid(), rank - 1);
    let comps: Vec<Vec<T>> = (0..out.n_components())
        .into_par_iter()
        .map(|c| {
            let kidx = out.multi_index(c);
            let mut idx = vec![0usize; rank + 1];
            idx[2..].copy_from_slice(&kidx[..rank - 1]);
            let mut acc = vec![T::zero(); m];
            for i in 0..n {
                for j in 0..n {
                    idx[0] = i;
                    idx[1] = j;
                    let gi = g.g_inv().comp(&[i, j]);
                    let dv = d.comp(&idx);
                    for p in 0..m {
                        acc[p] -= gi[p] * dv[p];
                    }
                }
            }
            acc
        })
        .collect();
    let mut out = out;
    for (c, v) in comps.into_iter().enumerate() {
        out.component_mut(c).copy_from_slice(&v);
    }
    Ok(out)
}

/// `df` of a scalar field.
pub fn exterior_derivative<T: Real>(f: &TensorField<T>) -> TensorField<T> {
    assert_eq!(f.rank(), 0, "exterior_derivative expects a scalar field");
    gradient(f)
}

/// Hessian `∇df`.
pub fn hessian<T: Real>(f: &TensorField<T>, g: &MetricField<T>) -> TensorField<T> {
    covariant_derivative(&exterior_derivative(f), g)
        .expect("covariant input")
        .with_symmetry(Symmetry::All)
}

/// `δ*θ = Sym ∇θ = ½ L_{θ^#} g`.
pub fn killing_operator<T: Real>(theta: &TensorField<T>, g: &MetricField<T>) -> TensorField<T> {
    assert_eq!(theta.rank(), 1, "killing_operator expects a 1-form");
    let theta = lower_all(theta, g);
    covariant_derivative(&theta, g)
        .expect("covariant input")
        .with_symmetry(Symmetry::All)
}

/// Cyclic sum `(∇_Xω)(Y,Z) + (∇_Yω)(Z,X) + (∇_Zω)(X,Y)`.
pub fn sym3_derivative<T: Real>(omega: &TensorField<T>, g: &MetricField<T>) -> Result<TensorField<T>> {
    ensure_symmetric(omega, "sym3_derivative")?;
    let dw = covariant_derivative(&lower_all(omega, g), g)?;
    let mut out = dw.clone();
    out += &dw.permute(&[1, 2, 0]);
    out += &dw.permute(&[2, 0, 1]);
    Ok(out.with_symmetry(Symmetry::All))
}

/// `(dω)(X,Y,Z) = (∇_Xω)(Y,Z) − (∇_Yω)(X,Z)`.
pub fn d_sym2<T: Real>(omega: &TensorField<T>, g: &MetricField<T>) -> Result<TensorField<T>> {
    ensure_symmetric(omega, "d_sym2")?;
    let dw = covariant_derivative(&lower_all(omega, g), g)?;
    let sw = dw.swap_slots(0, 1);
    Ok(&dw - &sw)
}

/// `Δ_S θ = 2δδ*θ − dδθ` on 1-forms.
pub fn sampson_1form<T: Real>(theta: &TensorField<T>, g: &MetricField<T>) -> TensorField<T> {
    let k = killing_operator(theta, g);
    let mut out = divergence(&k, g).expect("rank 2").scaled(T::lit(2.0));
    let dt = divergence(&lower_all(theta, g), g).expect("rank 1");
    out -= &exterior_derivative(&dt);
    out
}

/// Rough Laplacian `Δφ = div grad φ = −δ∇φ`.
pub fn rough_laplacian<T: Real>(phi: &TensorField<T>, g: &MetricField<T>) -> TensorField<T> {
    let d = covariant_derivative(&lower_all(phi, g), g).expect("covariant input");
    -&divergence(&d, g).expect("rank ≥ 1")
}

/// `Δφ_ij + 2g^{kl}R^m_{kij}φ_{ml} − Ric_i^k φ_{jk} − Ric_j^k φ_{ik}`.
pub fn lichnerowicz_sym2<T: Real>(phi: &TensorField<T>, g: &MetricField<T>) -> Result<TensorField<T>> {
    ensure_symmetric(phi, "lichnerowicz_sym2")?;
    let phi = lower_all(phi, g);
    let n = g.dim();
    let m = g.grid().len();
    let curv = g.curvature();
    let mut out = rough_laplacian(&phi, g);
    // φ_m^l = g^{lk} φ_{mk}, Ric_i^k = g^{kl} Ric_{il}
    let phi_mixed = crate::geometry::raise_lower(&phi, g, 1, crate::geometry::IndexMove::Up)?;
    let ric_mixed = crate::geometry::raise_lower(&curv.ricci, g, 1, crate::geometry::IndexMove::Up)?;
    for i in 0..n {
        for j in 0..n {
            let mut acc = vec![T::zero(); m];
            for k in 0..n {
                for mm in 0..n {
                    // Σ_l g^{kl} φ_{ml} = φ_m^k
                    let r = curv.riemann.comp(&[mm, k, i, j]);
                    let p = phi_mixed.comp(&[mm, k]);
                    for q in 0..m {
                        acc[q] += T::lit(2.0) * r[q] * p[q];
                    }
                }
                let r1 = ric_mixed.comp(&[i, k]);
                let p1 = phi.comp(&[j, k]);
                let r2 = ric_mixed.comp(&[j, k]);
                let p2 = phi.comp(&[i, k]);
                for q in 0..m {
                    acc[q] -= r1[q] * p1[q] + r2[q] * p2[q];
                }
            }
            for (o, a) in out.comp_mut(&[i, j]).iter_mut().zip(&acc) {
                *o += *a;
            }
        }
    }
    Ok(out.with_symmetry(Symmetry::All))
}

/// `Δ_S φ = δ*δφ + δ δ*₃φ` on symmetric 2-tensors, with `δ*₃` the cyclic symmetric derivative.
pub fn sampson_sym2<T: Real>(phi: &TensorField<T>, g: &MetricField<T>) -> Result<TensorField<T>> {
    let mut out = killing_operator(&divergence(&lower_all(phi, g), g)?, g);
    out += &divergence(&sym3_derivative(phi, g)?, g)?;
    Ok(out.with_symmetry(Symmetry::All))
}

/// `Δ_B ω = δ*δω + Sym δ(dω)`.
pub fn bourguignon_sym2<T: Real>(omega: &TensorField<T>, g: &MetricField<T>) -> Result<TensorField<T>> {
    let mut out = killing_operator(&divergence(&lower_all(omega, g), g)?, g);
    out += &divergence(&d_sym2(omega, g)?, g)?;
    Ok(out.with_symmetry(Symmetry::All))
}

/// `α_g θ = δ*θ + ½(δθ) g`.
pub fn alpha_g<T: Real>(theta: &TensorField<T>, g: &MetricField<T>) -> TensorField<T> {
    killing_plus_divergence(theta, g, T::lit(0.5))
}

/// `α_g* φ = δφ + ½ d(trace_g φ)`.
pub fn alpha_g_adjoint<T: Real>(phi: &TensorField<T>, g: &MetricField<T>) -> TensorField<T> {
    let phi = lower_all(phi, g);
    let mut out = divergence(&phi, g).expect("rank 2");
    out.axpy(T::lit(0.5), &exterior_derivative(&trace(&phi, g)));
    out
}

/// Conformal Killing operator `δ*θ + (1/n)(δθ) g`; its kernel is the conformal Killing fields.
pub fn conformal_killing_operator<T: Real>(theta: &TensorField<T>, g: &MetricField<T>) -> TensorField<T> {
    killing_plus_divergence(theta, g, T::one() / T::from_usize_lossy(g.dim()))
}

/// `δ*θ + c(δθ)g` from a single covariant derivative, using `δθ = −trace_g ∇θ`.
fn killing_plus_divergence<T: Real>(theta: &TensorField<T>, g: &MetricField<T>, c: T) -> TensorField<T> {
    assert_eq!(theta.rank(), 1, "expects a 1-form");
    let d = covariant_derivative(&lower_all(theta, g), g).expect("covariant input");
    let tr = trace(&d, g);
    let mut out = d.with_symmetry(Symmetry::All);
    out.axpy(-c, &g.g().times_scalar(&tr));
    out.with_symmetry(Symmetry::All)
}

/// Adjoint of [`conformal_killing_operator`]: `δφ + (1/n) d(trace_g φ)`.
pub fn conformal_killing_adjoint<T: Real>(phi: &TensorField<T>, g: &MetricField<T>) -> TensorField<T> {
    let phi = lower_all(phi, g);
    let mut out = divergence(&phi, g).expect("rank 2");
    let inv_n = T::one() / T::from_usize_lossy(g.dim());
    out.axpy(inv_n, &exterior_derivative(&trace(&phi, g)));
    out
}

pub fn conformal_killing_residual<T: Real>(theta: &TensorField<T>, g: &MetricField<T>) -> T {
    l2_norm(&conformal_killing_operator(theta, g), g)
}

/// `φ − c (trace_g φ) g`, self-adjoint in the pointwise metric product.
fn remove_trace<T: Real>(phi: &TensorField<T>, g: &MetricField<T>, c: T) -> TensorField<T> {
    let phi = lower_all(phi, g).with_symmetry(Symmetry::All);
    let mut out = phi.clone();
    out.axpy(-c, &g.g().times_scalar(&trace(&phi, g)));
    out
}

fn transpose<T: Real>(s: &TensorField<T>, g: &MetricField<T>) -> TensorField<T> {
    covariant_derivative_transpose(s, g).expect("covariant input")
}

type LinearMap<T> = Arc<dyn Fn(&TensorField<T>) -> TensorField<T> + Send + Sync>;

/// A linear operator bundled with its `L²` adjoint for a fixed metric.
///
/// The built-in handles use the exact transpose in the grid quadrature, so `⟨Ax, y⟩ = ⟨x, A*y⟩`
/// holds to roundoff for arbitrary grid data, not only for resolved fields.
#[derive(Clone)]
pub struct OperatorHandle<T: Real> {
    pub name: String,
    pub domain: Vec<Slot>,
    pub codomain: Vec<Slot>,
    /// Whether codomain fields are symmetric 2-tensors.
    pub symmetric_codomain: bool,
    pub metric: Arc<MetricField<T>>,
    apply: LinearMap<T>,
    adjoint: LinearMap<T>,
}

impl<T: Real> fmt::Debug for OperatorHandle<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OperatorHandle")
            .field("name", &self.name)
            .field("domain_rank", &self.domain.len())
            .field("codomain_rank", &self.codomain.len())
            .finish()
    }
}

impl<T: Real> OperatorHandle<T> {
    pub fn new(
        name: impl Into<String>,
        metric: Arc<MetricField<T>>,
        domain: Vec<Slot>,
        codomain: Vec<Slot>,
        apply: impl Fn(&TensorField<T>) -> TensorField<T> + Send + Sync + 'static,
        adjoint: impl Fn(&TensorField<T>) -> TensorField<T> + Send + Sync + 'static,
    ) -> Self {
        let symmetric_codomain = codomain.len() == 2;
        Self {
            name: name.into(),
            domain,
            codomain,
            symmetric_codomain,
            metric,
            apply: Arc::new(apply),
            adjoint: Arc::new(adjoint),
        }
    }

    pub fn domain_rank(&self) -> usize {
        self.domain.len()
    }

    pub fn codomain_rank(&self) -> usize {
        self.codomain.len()
    }

    pub fn apply(&self, x: &TensorField<T>) -> TensorField<T> {
        (self.apply)(x)
    }

    pub fn adjoint(&self, y: &TensorField<T>) -> TensorField<T> {
        (self.adjoint)(y)
    }

    /// `(⟨Ax, y⟩, ⟨x, A*y⟩)`.
    pub fn adjoint_pair(&self, x: &TensorField<T>, y: &TensorField<T>) -> Result<(T, T)> {
        let g = &*self.metric;
        let lhs = l2_inner_product(&self.apply(x), y, g)?;
        let rhs = l2_inner_product(x, &self.adjoint(y), g)?;
        Ok((lhs, rhs))
    }

    /// `|⟨Ax, y⟩ − ⟨x, A*y⟩| / (‖Ax‖‖y‖ + ‖x‖‖A*y‖)`.
    pub fn adjoint_defect(&self, x: &TensorField<T>, y: &TensorField<T>) -> Result<T> {
        let g = &*self.metric;
        let ax = self.apply(x);
        let ay = self.adjoint(y);
        let lhs = l2_inner_product(&ax, y, g)?;
        let rhs = l2_inner_product(x, &ay, g)?;
        let scale = l2_norm(&ax, g) * l2_norm(y, g) + l2_norm(x, g) * l2_norm(&ay, g);
        Ok(if scale > T::zero() {
            (lhs - rhs).abs() / scale
        } else {
            (lhs - rhs).abs()
        })
    }

    /// `θ ↦ δ*θ` with adjoint `δ` on symmetric 2-tensors.
    pub fn killing(g: Arc<MetricField<T>>) -> Self {
        let (a, b) = (g.clone(), g.clone());
        Self::new(
            "killing",
            g,
            vec![Slot::Lower],
            vec![Slot::Lower; 2],
            move |x| killing_operator(x, &a),
            move |y| transpose(&lower_all(y, &b).with_symmetry(Symmetry::All), &b),
        )
    }

    /// `θ ↦ α_g θ` with adjoint `α_g*`.
    pub fn alpha(g: Arc<MetricField<T>>) -> Self {
        let (a, b) = (g.clone(), g.clone());
        Self::new(
            "alpha",
            g,
            vec![Slot::Lower],
            vec![Slot::Lower; 2],
            move |x| alpha_g(x, &a),
            move |y| transpose(&remove_trace(y, &b, T::lit(0.5)), &b),
        )
    }

    /// `θ ↦ δ*θ + (1/n)(δθ)g`, the trace-free part of the Killing operator.
    pub fn conformal_killing(g: Arc<MetricField<T>>) -> Self {
        let (a, b) = (g.clone(), g.clone());
        Self::new(
            "conformal-killing",
            g,
            vec![Slot::Lower],
            vec![Slot::Lower; 2],
            move |x| conformal_killing_operator(x, &a),
            move |y| {
                let inv_n = T::one() / T::from_usize_lossy(b.dim());
                transpose(&remove_trace(y, &b, inv_n), &b)
            },
        )
    }

    /// `f ↦ df` with adjoint `δ` on 1-forms.
    pub fn gradient(g: Arc<MetricField<T>>) -> Self {
        let b = g.clone();
        Self::new(
            "gradient",
            g,
            vec![],
            vec![Slot::Lower],
            exterior_derivative,
            move |y| transpose(&lower_all(y, &b), &b),
        )
    }

    /// `ω ↦ δ*₃ω` (cyclic symmetric derivative) with adjoint `δ` on 3-tensors, restricted to symmetric ω.
    pub fn sym3(g: Arc<MetricField<T>>) -> Self {
        let (a, b) = (g.clone(), g.clone());
        Self::new(
            "sym3",
            g,
            vec![Slot::Lower; 2],
            vec![Slot::Lower; 3],
            move |x| sym3_derivative(x, &a).expect("symmetric input"),
            move |y| {
                transpose(&lower_all(y, &b).symmetrize_all(), &b)
                    .scaled(T::lit(3.0))
                    .with_symmetry(Symmetry::All)
            },
        )
    }
}
