use crate::error::{Error, Result};
use crate::geometry::MetricField;
use crate::grid_field::{derivative_component, gradient, Slot, TensorField};
use crate::scalar::Real;

/// Direction of an index operation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IndexMove {
    Up,
    Down,
}

/// Contracts slot `slot` of `t` with the rank-2 field `m`: `out[..i..] = Σ_j m_ij t[..j..]`.
fn apply_on_slot<T: Real>(t: &TensorField<T>, m: &TensorField<T>, slot: usize, new: Slot) -> TensorField<T> {
    let n = t.dim();
    let nodes = t.nodes();
    let mut slots = t.slots().to_vec();
    slots[slot] = new;
    let mut out = TensorField::zeros(t.grid(), &slots);
    let rank = t.rank();
    for c in 0..t.n_components() {
        let idx = t.multi_index(c);
        let i = idx[slot];
        let mut src = idx;
        let dst = out.component_mut(c);
        for j in 0..n {
            src[slot] = j;
            let cs = t.comp_index(&src[..rank]);
            let mij = m.comp(&[i, j]);
            let tv = t.component(cs);
            for k in 0..nodes {
                dst[k] += mij[k] * tv[k];
            }
        }
    }
    out
}

/// Raises or lowers one slot with `g⁻¹` / `g`.
pub fn raise_lower<T: Real>(
    t: &TensorField<T>,
    g: &MetricField<T>,
    slot: usize,
    direction: IndexMove,
) -> Result<TensorField<T>> {
    if slot >= t.rank() {
        return Err(Error::SlotOutOfRange {
            slot,
            rank: t.rank(),
        });
    }
    if t.grid() != g.grid() {
        return Err(Error::ShapeMismatch("field and metric live on different grids".into()));
    }
    let current = t.slots()[slot];
    Ok(match (direction, current) {
        (IndexMove::Up, Slot::Lower) => apply_on_slot(t, g.g_inv(), slot, Slot::Upper),
        (IndexMove::Down, Slot::Upper) => apply_on_slot(t, g.g(), slot, Slot::Lower),
        _ => t.clone(),
    })
}

/// Every slot raised.
pub fn raise_all<T: Real>(t: &TensorField<T>, g: &MetricField<T>) -> TensorField<T> {
    let mut out = t.clone();
    for s in 0..t.rank() {
        out = raise_lower(&out, g, s, IndexMove::Up).expect("slot in range");
    }
    out
}

/// Every slot lowered.
pub fn lower_all<T: Real>(t: &TensorField<T>, g: &MetricField<T>) -> TensorField<T> {
    let mut out = t.clone();
    for s in 0..t.rank() {
        out = raise_lower(&out, g, s, IndexMove::Down).expect("slot in range");
    }
    out
}

/// `trace_g φ = g^{ij} φ_ij` of a covariant 2-tensor.
pub fn trace<T: Real>(phi: &TensorField<T>, g: &MetricField<T>) -> TensorField<T> {
    assert_eq!(phi.rank(), 2);
    let n = phi.dim();
    let m = phi.nodes();
    let mut out = vec![T::zero(); m];
    for i in 0..n {
        for j in 0..n {
            let gi = g.g_inv().comp(&[i, j]);
            let p = phi.comp(&[i, j]);
            for k in 0..m {
                out[k] += gi[k] * p[k];
            }
        }
    }
    TensorField::scalar(phi.grid(), out).expect("grid sized")
}

/// `λ g` for a scalar field `λ`.
pub fn scalar_times_metric<T: Real>(lambda: &TensorField<T>, g: &MetricField<T>) -> TensorField<T> {
    g.g().times_scalar(lambda)
}

/// Leading-slot Levi-Civita derivative of a covariant tensor:
/// `(∇T)_{a J} = ∂_a T_J − Σ_s Γ^m_{a j_s} T_{j_1..m..j_p}`.
pub fn covariant_derivative<T: Real>(t: &TensorField<T>, g: &MetricField<T>) -> Result<TensorField<T>> {
    if t.grid() != g.grid() {
        return Err(Error::ShapeMismatch("field and metric live on different grids".into()));
    }
    if !t.is_covariant() {
        return Err(Error::InvalidArgument(
            "covariant_derivative expects a covariant tensor; lower indices first".into(),
        ));
    }
    let mut out = gradient(t);
    let n = t.dim();
    let rank = t.rank();
    let nodes = t.nodes();
    let gamma = g.christoffel();
    for c in 0..out.n_components() {
        let idx = out.multi_index(c);
        let a = idx[0];
        let dst_idx: Vec<usize> = idx[1..=rank].to_vec();
        let mut corr = vec![T::zero(); nodes];
        for s in 0..rank {
            let js = dst_idx[s];
            let mut src = dst_idx.clone();
            for mm in 0..n {
                src[s] = mm;
                let gm = gamma.comp(&[mm, a, js]);
                let tv = t.comp(&src);
                for k in 0..nodes {
                    corr[k] += gm[k] * tv[k];
                }
            }
        }
        for (d, x) in out.component_mut(c).iter_mut().zip(&corr) {
            *d -= *x;
        }
    }
    Ok(out)
}

/// Exact transpose of [`covariant_derivative`] in the discrete `L²` inner product.
///
/// For a covariant field `S` of rank `p + 1` returns the rank-`p` field `X` with
/// `⟨∇T, S⟩ = ⟨T, X⟩` for every `T`, evaluated with the grid quadrature. It agrees with the
/// divergence of `S` on band-limited data but, unlike the pointwise form, also on aliased data.
pub fn covariant_derivative_transpose<T: Real>(s: &TensorField<T>, g: &MetricField<T>) -> Result<TensorField<T>> {
    if s.grid() != g.grid() {
        return Err(Error::ShapeMismatch("field and metric live on different grids".into()));
    }
    if s.rank() == 0 || !s.is_covariant() {
        return Err(Error::InvalidArgument("transpose expects a covariant field of rank ≥ 1".into()));
    }
    let n = s.dim();
    let rank = s.rank() - 1;
    let nodes = s.nodes();
    let w = g.sqrt_det().data();
    let mut hat = raise_all(s, g);
    let nc = hat.n_components();
    for c in 0..nc {
        for (v, wk) in hat.component_mut(c).iter_mut().zip(w) {
            *v *= *wk;
        }
    }
    let gamma = g.christoffel();
    let mut dbuf = vec![T::zero(); nodes];
    let mut y = TensorField::zeros(g.grid(), &vec![Slot::Upper; rank]);
    for c in 0..y.n_components() {
        let kidx = y.multi_index(c);
        let mut acc = vec![T::zero(); nodes];
        let mut src = vec![0usize; rank + 1];
        src[1..].copy_from_slice(&kidx[..rank]);
        for i in 0..n {
            src[0] = i;
            derivative_component(hat.comp(&src), g.grid(), i, &mut dbuf);
            for (a, v) in acc.iter_mut().zip(&dbuf) {
                *a -= *v;
            }
        }
        src[1..].copy_from_slice(&kidx[..rank]);
        for sl in 0..rank {
            let ks = kidx[sl];
            for i in 0..n {
                src[0] = i;
                for j in 0..n {
                    src[sl + 1] = j;
                    let gm = gamma.comp(&[ks, i, j]);
                    let hv = hat.comp(&src);
                    for k in 0..nodes {
                        acc[k] -= gm[k] * hv[k];
                    }
                }
                src[sl + 1] = ks;
            }
        }
        for (k, v) in acc.iter_mut().enumerate() {
            *v /= w[k];
        }
        y.component_mut(c).copy_from_slice(&acc);
    }
    Ok(lower_all(&y, g))
}
