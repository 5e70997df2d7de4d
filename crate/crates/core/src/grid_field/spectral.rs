//! Fourier-pseudospectral calculus on the periodic grid.

use std::any::{Any, TypeId};
use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::grid::Grid;
use super::tensor::{Slot, TensorField};
use crate::error::{Error, Result};
use crate::scalar::Real;

struct AxisPlan<T: Real> {
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Real> AxisPlan<T> {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    /// Per-thread cached plan for length `n`.
    fn cached(n: usize) -> Arc<Self> {
        thread_local! {
            static PLANS: RefCell<HashMap<(TypeId, usize), Arc<dyn Any + Send + Sync>>> = RefCell::new(HashMap::new());
        }
        PLANS.with(|cell| {
            let mut map = cell.borrow_mut();
            let entry = map
                .entry((TypeId::of::<T>(), n))
                .or_insert_with(|| Arc::new(Self::new(n)) as Arc<dyn Any + Send + Sync>);
            entry.clone().downcast::<Self>().expect("plan type matches its key")
        })
    }
}

/// Indices of the nodes whose coordinate along `axis` is zero (one per grid line).
fn line_starts(grid: &Grid, axis: usize) -> Vec<usize> {
    let stride = grid.stride(axis);
    let n = grid.resolution()[axis];
    let block = stride * n;
    (0..grid.len() / block)
        .flat_map(|b| (0..stride).map(move |k| b * block + k))
        .collect()
}

/// Spectral first derivative of one sampled component along `axis`.
///
/// The Nyquist mode is dropped so the discrete operator is real and exactly skew-symmetric.
pub(crate) fn derivative_component<T: Real>(src: &[T], grid: &Grid, axis: usize, dst: &mut [T]) {
    let n = grid.resolution()[axis];
    let stride = grid.stride(axis);
    let plan = AxisPlan::<T>::cached(n);
    let starts = line_starts(grid, axis);
    let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
    let mut scratch = vec![
        Complex::new(T::zero(), T::zero());
        plan.forward
            .get_inplace_scratch_len()
            .max(plan.inverse.get_inplace_scratch_len())
    ];
    let scale = T::one() / T::from_usize_lossy(n);
    // two real lines per complex transform
    for pair in starts.chunks(2) {
        let b1 = pair[0];
        let b2 = pair.get(1).copied();
        for (j, z) in buf.iter_mut().enumerate() {
            let re = src[b1 + j * stride];
            let im = b2.map_or(T::zero(), |b| src[b + j * stride]);
            *z = Complex::new(re, im);
        }
        plan.forward.process_with_scratch(&mut buf, &mut scratch);
        for (j, z) in buf.iter_mut().enumerate() {
            let k = Grid::wavenumber(j, n);
            if 2 * k.unsigned_abs() == n {
                *z = Complex::new(T::zero(), T::zero());
            } else {
                let kk = T::lit(k as f64) * scale;
                *z = Complex::new(-z.im * kk, z.re * kk);
            }
        }
        plan.inverse.process_with_scratch(&mut buf, &mut scratch);
        for (j, z) in buf.iter().enumerate() {
            dst[b1 + j * stride] = z.re;
            if let Some(b) = b2 {
                dst[b + j * stride] = z.im;
            }
        }
    }
}

/// Componentwise pseudospectral derivative `∂_axis f`.
pub fn partial_derivative<T: Real>(f: &TensorField<T>, axis: usize) -> Result<TensorField<T>> {
    let grid = f.grid().clone();
    if axis >= grid.dim() {
        return Err(Error::AxisOutOfRange {
            axis,
            dim: grid.dim(),
        });
    }
    let mut out = TensorField::zeros(&grid, f.slots());
    let m = grid.len();
    out.data_mut()
        .par_chunks_mut(m)
        .zip(f.data().par_chunks(m))
        .for_each(|(dst, src)| derivative_component(src, &grid, axis, dst));
    Ok(out)
}

/// All partial derivatives, prepended as a new leading covariant slot: `out[a, I] = ∂_a f[I]`.
pub fn gradient<T: Real>(f: &TensorField<T>) -> TensorField<T> {
    let grid = f.grid().clone();
    let n = grid.dim();
    let m = grid.len();
    let mut slots = vec![Slot::Lower];
    slots.extend_from_slice(f.slots());
    let mut out = TensorField::zeros(&grid, &slots);
    let nc = f.n_components();
    out.data_mut()
        .par_chunks_mut(m)
        .enumerate()
        .for_each(|(c, dst)| {
            let axis = c / nc;
            let src = &f.data()[(c % nc) * m..(c % nc + 1) * m];
            derivative_component(src, &grid, axis, dst);
        });
    debug_assert_eq!(out.n_components(), n * nc);
    out
}

/// Quadrature `Π_a(2π/N_a) Σ f·vol`; spectrally exact for band-limited integrands.
pub fn integrate<T: Real>(f: &TensorField<T>, vol: &TensorField<T>) -> Result<T> {
    if f.rank() != 0 || vol.rank() != 0 {
        return Err(Error::ShapeMismatch("integrate expects scalar fields".into()));
    }
    if f.grid() != vol.grid() {
        return Err(Error::ShapeMismatch("fields live on different grids".into()));
    }
    if let Some((node, v)) = vol
        .data()
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v > T::zero()))
    {
        return Err(Error::NonPositiveVolume {
            node,
            value: v.as_f64(),
        });
    }
    let s: T = f.data().iter().zip(vol.data()).map(|(a, b)| *a * *b).sum();
    Ok(s * f.grid().cell_volume::<T>())
}

/// Integral against the coordinate volume element (`vol = 1`).
pub fn integrate_flat<T: Real>(f: &TensorField<T>) -> T {
    let s: T = f.data().iter().copied().sum();
    s * f.grid().cell_volume::<T>()
}

/// Resolution-adequacy summary of a field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralDiagnostics {
    /// Largest (over axes) fraction of L² energy carried by modes with `|k_a| > N_a/3`.
    pub tail_fraction: f64,
}

impl SpectralDiagnostics {
    pub const WARN_THRESHOLD: f64 = 1e-8;

    pub fn is_resolved(&self) -> bool {
        self.tail_fraction <= Self::WARN_THRESHOLD
    }
}

pub fn spectral_diagnostics<T: Real>(f: &TensorField<T>) -> SpectralDiagnostics {
    let grid = f.grid();
    let m = grid.len();
    let mut worst = 0.0f64;
    for axis in 0..grid.dim() {
        let n = grid.resolution()[axis];
        let stride = grid.stride(axis);
        let plan = AxisPlan::<T>::new(n);
        let starts = line_starts(grid, axis);
        let cutoff = n as f64 / 3.0;
        let (mut tail, mut total) = (0.0f64, 0.0f64);
        let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
        for c in 0..f.n_components() {
            let src = &f.data()[c * m..(c + 1) * m];
            for &b in &starts {
                for (j, z) in buf.iter_mut().enumerate() {
                    *z = Complex::new(src[b + j * stride], T::zero());
                }
                plan.forward.process(&mut buf);
                for (j, z) in buf.iter().enumerate() {
                    let e = z.norm_sqr().as_f64();
                    total += e;
                    if (Grid::wavenumber(j, n).unsigned_abs() as f64) > cutoff {
                        tail += e;
                    }
                }
            }
        }
        if total > 0.0 {
            worst = worst.max(tail / total);
        }
    }
    SpectralDiagnostics {
        tail_fraction: worst.clamp(0.0, 1.0),
    }
}

/// Band-limited trigonometric interpolant of one sampled scalar component.
pub struct TrigInterpolant<T: Real> {
    resolution: Vec<usize>,
    coeffs: Vec<Complex<T>>,
}

impl<T: Real> TrigInterpolant<T> {
    pub fn new(grid: &Grid, values: &[T]) -> Self {
        let m = grid.len();
        assert_eq!(values.len(), m);
        let mut data: Vec<Complex<T>> = values.iter().map(|v| Complex::new(*v, T::zero())).collect();
        for axis in 0..grid.dim() {
            let n = grid.resolution()[axis];
            let stride = grid.stride(axis);
            let plan = AxisPlan::<T>::new(n);
            let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
            for b in line_starts(grid, axis) {
                for j in 0..n {
                    buf[j] = data[b + j * stride];
                }
                plan.forward.process(&mut buf);
                for j in 0..n {
                    data[b + j * stride] = buf[j];
                }
            }
        }
        let inv_m = T::one() / T::from_usize_lossy(m);
        data.iter_mut().for_each(|z| *z = *z * inv_m);
        Self {
            resolution: grid.resolution().to_vec(),
            coeffs: data,
        }
    }

    /// Real part of the Fourier series at an arbitrary point.
    pub fn eval(&self, y: &[T]) -> T {
        let dim = self.resolution.len();
        let phases: Vec<Vec<Complex<T>>> = (0..dim)
            .map(|a| {
                let n = self.resolution[a];
                (0..n)
                    .map(|j| {
                        let k = T::lit(Grid::wavenumber(j, n) as f64);
                        Complex::from_polar(T::one(), k * y[a])
                    })
                    .collect()
            })
            .collect();
        let mut acc = Complex::new(T::zero(), T::zero());
        match dim {
            2 => {
                let n1 = self.resolution[1];
                for (i, p0) in phases[0].iter().enumerate() {
                    let mut row = Complex::new(T::zero(), T::zero());
                    for (j, p1) in phases[1].iter().enumerate() {
                        row = row + self.coeffs[i * n1 + j] * p1;
                    }
                    acc = acc + row * p0;
                }
            }
            _ => {
                let (n1, n2) = (self.resolution[1], self.resolution[2]);
                for (i, p0) in phases[0].iter().enumerate() {
                    let mut plane = Complex::new(T::zero(), T::zero());
                    for (j, p1) in phases[1].iter().enumerate() {
                        let mut row = Complex::new(T::zero(), T::zero());
                        for (k, p2) in phases[2].iter().enumerate() {
                            row = row + self.coeffs[(i * n1 + j) * n2 + k] * p2;
                        }
                        plane = plane + row * p1;
                    }
                    acc = acc + plane * p0;
                }
            }
        }
        acc.re
    }
}
