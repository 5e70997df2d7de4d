use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Uniform periodic grid on the flat torus `[0, 2π)^n`, `n ∈ {2, 3}`.
///
/// Nodes are stored row-major with the last axis fastest.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    resolution: Vec<usize>,
}

impl Grid {
    pub fn new(resolution: &[usize]) -> Result<Self> {
        let dim = resolution.len();
        if !(2..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 2 or 3, got {dim}"
            )));
        }
        for (axis, &n) in resolution.iter().enumerate() {
            if n < 8 || n % 2 != 0 {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis}: resolution {n} must be even and >= 8"
                )));
            }
        }
        Ok(Self {
            dim,
            resolution: resolution.to_vec(),
        })
    }

    /// Same resolution along every axis.
    pub fn uniform(dim: usize, n: usize) -> Result<Self> {
        Self::new(&vec![n; dim])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.resolution.iter().product()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Distance between consecutive nodes along `axis`.
    pub fn spacing<T: Real>(&self, axis: usize) -> T {
        T::lit(2.0 * PI / self.resolution[axis] as f64)
    }

    /// Quadrature weight of a single node, `Π_a 2π/N_a`.
    pub fn cell_volume<T: Real>(&self) -> T {
        T::lit(
            self.resolution
                .iter()
                .map(|&n| 2.0 * PI / n as f64)
                .product(),
        )
    }

    /// Coordinate volume `(2π)^n`.
    pub fn volume<T: Real>(&self) -> T {
        T::lit((2.0 * PI).powi(self.dim as i32))
    }

    /// Stride of `axis` in the flat node index.
    pub fn stride(&self, axis: usize) -> usize {
        self.resolution[axis + 1..].iter().product()
    }

    pub fn multi_index(&self, mut node: usize) -> [usize; 3] {
        let mut out = [0; 3];
        for axis in (0..self.dim).rev() {
            let n = self.resolution[axis];
            out[axis] = node % n;
            node /= n;
        }
        out
    }

    pub fn node_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.resolution)
            .fold(0, |acc, (&i, &n)| acc * n + (i % n))
    }

    /// Coordinates `x_a = 2πk_a/N_a` of a node; unused axes are zero.
    pub fn coords<T: Real>(&self, node: usize) -> [T; 3] {
        let idx = self.multi_index(node);
        let mut x = [T::zero(); 3];
        for axis in 0..self.dim {
            x[axis] = T::lit(2.0 * PI * idx[axis] as f64 / self.resolution[axis] as f64);
        }
        x
    }

    /// Coordinates of every node, in node order.
    pub fn all_coords<T: Real>(&self) -> Vec<[T; 3]> {
        (0..self.len()).map(|k| self.coords(k)).collect()
    }

    /// Signed wavenumber of the `j`-th FFT bin along an axis with `n` points.
    #[inline]
    pub fn wavenumber(j: usize, n: usize) -> isize {
        if j <= n / 2 {
            j as isize
        } else {
            j as isize - n as isize
        }
    }

    /// Node index of a point if it coincides with a grid node to within `tol` (in index units).
    pub fn node_at<T: Real>(&self, point: &[T], tol: f64) -> Option<usize> {
        let mut idx = [0usize; 3];
        for axis in 0..self.dim {
            let n = self.resolution[axis] as f64;
            let s = point[axis].as_f64() * n / (2.0 * PI);
            let r = s.round();
            if (s - r).abs() > tol {
                return None;
            }
            idx[axis] = (r as i64).rem_euclid(n as i64) as usize;
        }
        Some(self.node_index(&idx[..self.dim]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_odd_or_small_resolution() {
        assert!(Grid::new(&[7, 8]).is_err());
        assert!(Grid::new(&[6, 6]).is_err());
        assert!(Grid::new(&[8]).is_err());
        assert!(Grid::new(&[8, 8, 8, 8]).is_err());
        assert!(Grid::new(&[8, 10, 12]).is_ok());
    }

    #[test]
    fn nodes_lie_in_half_open_period() {
        let g = Grid::new(&[8, 10, 12]).unwrap();
        for k in 0..g.len() {
            let x: [f64; 3] = g.coords(k);
            for a in 0..3 {
                assert!(x[a] >= 0.0 && x[a] < 2.0 * PI);
            }
            assert_eq!(g.node_index(&g.multi_index(k)[..3]), k);
            assert_eq!(g.node_at(&x, 1e-9), Some(k));
        }
    }

    #[test]
    fn wavenumbers_are_signed() {
        assert_eq!(Grid::wavenumber(0, 8), 0);
        assert_eq!(Grid::wavenumber(3, 8), 3);
        assert_eq!(Grid::wavenumber(4, 8), 4);
        assert_eq!(Grid::wavenumber(5, 8), -3);
    }
}
