use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use super::grid::Grid;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Variance of one tensor slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Slot {
    /// covariant index
    Lower,
    /// contravariant index
    Upper,
}

/// Declared index symmetry of a field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Symmetry {
    None,
    /// symmetric in the last two slots
    LastTwo,
    /// totally symmetric
    All,
}

/// Multi-index of one tensor component; only the first `rank` entries are meaningful.
pub type MultiIndex = [usize; 6];

/// A real rank-(p, q) tensor field sampled on a periodic grid.
///
/// Components are stored densely (`n^rank` of them), component-major:
/// `data[c * nodes + node]` with `c = Σ_s i_s n^(rank-1-s)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorField<T> {
    grid: Grid,
    slots: Vec<Slot>,
    symmetry: Symmetry,
    data: Vec<T>,
}

impl<T: Real> TensorField<T> {
    pub fn zeros(grid: &Grid, slots: &[Slot]) -> Self {
        assert!(slots.len() <= 6, "rank above 6 unsupported");
        let n = grid.dim().pow(slots.len() as u32) * grid.len();
        Self {
            grid: grid.clone(),
            slots: slots.to_vec(),
            symmetry: Symmetry::None,
            data: vec![T::zero(); n],
        }
    }

    /// All-covariant zero field of the given rank.
    pub fn covariant(grid: &Grid, rank: usize) -> Self {
        Self::zeros(grid, &vec![Slot::Lower; rank])
    }

    pub fn scalar(grid: &Grid, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            slots: Vec::new(),
            symmetry: Symmetry::None,
            data: values,
        })
    }

    pub fn constant(grid: &Grid, value: T) -> Self {
        let mut f = Self::zeros(grid, &[]);
        f.data.fill(value);
        f
    }

    pub fn scalar_from_fn(grid: &Grid, f: impl Fn([T; 3]) -> T) -> Self {
        let data = (0..grid.len()).map(|k| f(grid.coords(k))).collect();
        Self {
            grid: grid.clone(),
            slots: Vec::new(),
            symmetry: Symmetry::None,
            data,
        }
    }

    /// Builds a field from a function of (component multi-index, node coordinates).
    pub fn from_fn(grid: &Grid, slots: &[Slot], f: impl Fn(&[usize], [T; 3]) -> T) -> Self {
        let mut out = Self::zeros(grid, slots);
        let nodes = grid.len();
        let coords: Vec<[T; 3]> = grid.all_coords();
        for c in 0..out.n_components() {
            let idx = out.multi_index(c);
            let rank = out.rank();
            let comp = &mut out.data[c * nodes..(c + 1) * nodes];
            for (v, x) in comp.iter_mut().zip(&coords) {
                *v = f(&idx[..rank], *x);
            }
        }
        out
    }

    /// Scalar multiple of a constant symmetric matrix, e.g. the flat metric.
    pub fn from_constant_matrix(grid: &Grid, m: &[[T; 3]; 3]) -> Self {
        let mut f = Self::from_fn(grid, &[Slot::Lower, Slot::Lower], |ij, _| m[ij[0]][ij[1]]);
        f.symmetry = Symmetry::All;
        f
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    #[inline]
    pub fn rank(&self) -> usize {
        self.slots.len()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// (covariant count p, contravariant count q)
    pub fn variance(&self) -> (usize, usize) {
        let p = self.slots.iter().filter(|s| **s == Slot::Lower).count();
        (p, self.rank() - p)
    }

    pub fn is_covariant(&self) -> bool {
        self.slots.iter().all(|s| *s == Slot::Lower)
    }

    #[inline]
    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    #[inline]
    pub fn n_components(&self) -> usize {
        self.dim().pow(self.rank() as u32)
    }

    #[inline]
    pub fn nodes(&self) -> usize {
        self.grid.len()
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn comp_index(&self, idx: &[usize]) -> usize {
        let n = self.dim();
        idx.iter().fold(0, |acc, &i| acc * n + i)
    }

    pub fn multi_index(&self, mut c: usize) -> MultiIndex {
        let n = self.dim();
        let mut out = [0; 6];
        for s in (0..self.rank()).rev() {
            out[s] = c % n;
            c /= n;
        }
        out
    }

    #[inline]
    pub fn component(&self, c: usize) -> &[T] {
        let m = self.nodes();
        &self.data[c * m..(c + 1) * m]
    }

    #[inline]
    pub fn component_mut(&mut self, c: usize) -> &mut [T] {
        let m = self.nodes();
        &mut self.data[c * m..(c + 1) * m]
    }

    /// Component by multi-index.
    #[inline]
    pub fn comp(&self, idx: &[usize]) -> &[T] {
        self.component(self.comp_index(idx))
    }

    #[inline]
    pub fn comp_mut(&mut self, idx: &[usize]) -> &mut [T] {
        let c = self.comp_index(idx);
        self.component_mut(c)
    }

    /// Scalar value at a node (rank-0 fields only).
    #[inline]
    pub fn at(&self, node: usize) -> T {
        self.data[node]
    }

    #[inline]
    pub fn get(&self, idx: &[usize], node: usize) -> T {
        self.comp(idx)[node]
    }

    /// Per-node n×n matrix of a rank-2 field (unused entries zero).
    pub fn matrix_at(&self, node: usize) -> [[T; 3]; 3] {
        debug_assert_eq!(self.rank(), 2);
        let n = self.dim();
        let m = self.nodes();
        let mut out = [[T::zero(); 3]; 3];
        for i in 0..n {
            for j in 0..n {
                out[i][j] = self.data[(i * n + j) * m + node];
            }
        }
        out
    }

    pub fn set_matrix_at(&mut self, node: usize, a: &[[T; 3]; 3]) {
        let n = self.dim();
        let m = self.nodes();
        for i in 0..n {
            for j in 0..n {
                self.data[(i * n + j) * m + node] = a[i][j];
            }
        }
    }

    /// Per-node vector of a rank-1 field.
    pub fn vector_at(&self, node: usize) -> [T; 3] {
        let n = self.dim();
        let m = self.nodes();
        let mut out = [T::zero(); 3];
        for i in 0..n {
            out[i] = self.data[i * m + node];
        }
        out
    }

    pub fn with_slots(mut self, slots: &[Slot]) -> Self {
        assert_eq!(slots.len(), self.rank());
        self.slots = slots.to_vec();
        self
    }

    /// Declares a symmetry after enforcing it by averaging.
    pub fn with_symmetry(mut self, symmetry: Symmetry) -> Self {
        match symmetry {
            Symmetry::None => {}
            Symmetry::LastTwo => {
                let r = self.rank();
                assert!(r >= 2);
                self = self.symmetrize_pair(r - 2, r - 1);
            }
            Symmetry::All => self = self.symmetrize_all(),
        }
        self.symmetry = symmetry;
        self
    }

    /// Average over the transposition of slots `a` and `b`.
    pub fn symmetrize_pair(&self, a: usize, b: usize) -> Self {
        let sw = self.swap_slots(a, b);
        let mut out = self.clone();
        let half = T::lit(0.5);
        for (o, s) in out.data.iter_mut().zip(&sw.data) {
            *o = (*o + *s) * half;
        }
        out.symmetry = Symmetry::None;
        out
    }

    /// Average over all permutations of the slots.
    pub fn symmetrize_all(&self) -> Self {
        let r = self.rank();
        if r < 2 {
            return self.clone();
        }
        let perms = permutations(r);
        let mut out = Self::zeros(&self.grid, &self.slots);
        let w = T::one() / T::from_usize_lossy(perms.len());
        for p in &perms {
            let permuted = self.permute(p);
            out.axpy(w, &permuted);
        }
        out.symmetry = Symmetry::All;
        out
    }

    /// Exchanges slots `a` and `b`: `out[.. i_a .. i_b ..] = self[.. i_b .. i_a ..]`.
    pub fn swap_slots(&self, a: usize, b: usize) -> Self {
        let mut p: Vec<usize> = (0..self.rank()).collect();
        p.swap(a, b);
        self.permute(&p)
    }

    /// `out[i_0..i_r] = self[i_{p(0)}..i_{p(r)}]` for a slot permutation `p`.
    pub fn permute(&self, p: &[usize]) -> Self {
        let r = self.rank();
        assert_eq!(p.len(), r);
        let slots: Vec<Slot> = p.iter().map(|&k| self.slots[k]).collect();
        let mut out = Self::zeros(&self.grid, &slots);
        for c in 0..self.n_components() {
            let idx = self.multi_index(c);
            let mut src = [0usize; 6];
            for s in 0..r {
                src[s] = idx[p[s]];
            }
            let cs = self.comp_index(&src[..r]);
            out.component_mut(c).copy_from_slice(self.component(cs));
        }
        out
    }

    /// Largest |T[..i_a..i_b..] − T[..i_b..i_a..]| over nodes and components.
    pub fn max_asymmetry(&self, a: usize, b: usize) -> T {
        let sw = self.swap_slots(a, b);
        self.data
            .iter()
            .zip(&sw.data)
            .fold(T::zero(), |m, (x, y)| m.max((*x - *y).abs()))
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.grid == other.grid && self.slots == other.slots
    }

    pub fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::ShapeMismatch("fields live on different grids".into()));
        }
        if self.slots != other.slots {
            return Err(Error::ShapeMismatch(format!(
                "slot layouts differ: {:?} vs {:?}",
                self.slots, other.slots
            )));
        }
        Ok(())
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: T, other: &Self) {
        assert!(self.same_shape(other), "axpy shape mismatch");
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += a * *y;
        }
    }

    pub fn scaled(&self, a: T) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|x| *x *= a);
        out
    }

    /// Pointwise product with a scalar field.
    pub fn times_scalar(&self, s: &TensorField<T>) -> Self {
        assert_eq!(s.rank(), 0);
        assert_eq!(&self.grid, s.grid());
        let mut out = self.clone();
        let m = self.nodes();
        for c in 0..self.n_components() {
            for (x, w) in out.data[c * m..(c + 1) * m].iter_mut().zip(&s.data) {
                *x *= *w;
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|x| *x = f(*x));
        out
    }

    /// Discrete mean of a scalar field over nodes.
    pub fn mean(&self) -> T {
        let s: T = self.data.iter().copied().sum();
        s / T::from_usize_lossy(self.data.len().max(1))
    }

    /// Standard deviation of a scalar field over nodes.
    pub fn std_dev(&self) -> T {
        let mu = self.mean();
        let s: T = self.data.iter().map(|x| (*x - mu) * (*x - mu)).sum();
        (s / T::from_usize_lossy(self.data.len().max(1))).sqrt()
    }

    /// Converts between scalar types (e.g. f64 fixtures to f32 fields).
    pub fn cast<U: Real>(&self) -> TensorField<U> {
        TensorField {
            grid: self.grid.clone(),
            slots: self.slots.clone(),
            symmetry: self.symmetry,
            data: self.data.iter().map(|x| U::lit(x.as_f64())).collect(),
        }
    }
}

fn permutations(r: usize) -> Vec<Vec<usize>> {
    if r == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(r - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, r - 1);
            out.push(q);
        }
    }
    out
}

impl<T: Real> AddAssign<&TensorField<T>> for TensorField<T> {
    fn add_assign(&mut self, rhs: &TensorField<T>) {
        self.axpy(T::one(), rhs);
    }
}

impl<T: Real> SubAssign<&TensorField<T>> for TensorField<T> {
    fn sub_assign(&mut self, rhs: &TensorField<T>) {
        self.axpy(-T::one(), rhs);
    }
}

impl<T: Real> Add for &TensorField<T> {
    type Output = TensorField<T>;
    fn add(self, rhs: Self) -> TensorField<T> {
        let mut out = self.clone();
        out += rhs;
        out.symmetry = if self.symmetry == rhs.symmetry {
            self.symmetry
        } else {
            Symmetry::None
        };
        out
    }
}

impl<T: Real> Sub for &TensorField<T> {
    type Output = TensorField<T>;
    fn sub(self, rhs: Self) -> TensorField<T> {
        let mut out = self.clone();
        out -= rhs;
        out.symmetry = if self.symmetry == rhs.symmetry {
            self.symmetry
        } else {
            Symmetry::None
        };
        out
    }
}

impl<T: Real> Mul<T> for &TensorField<T> {
    type Output = TensorField<T>;
    fn mul(self, a: T) -> TensorField<T> {
        self.scaled(a)
    }
}

impl<T: Real> Neg for &TensorField<T> {
    type Output = TensorField<T>;
    fn neg(self) -> TensorField<T> {
        self.scaled(-T::one())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn component_count_and_indexing() {
        let g = Grid::uniform(3, 8).unwrap();
        let t = TensorField::<f64>::covariant(&g, 3);
        assert_eq!(t.n_components(), 27);
        for c in 0..27 {
            let idx = t.multi_index(c);
            assert_eq!(t.comp_index(&idx[..3]), c);
        }
    }

    #[test]
    fn symmetrize_all_is_totally_symmetric() {
        let g = Grid::uniform(2, 8).unwrap();
        let t = TensorField::<f64>::from_fn(&g, &[Slot::Lower; 3], |ijk, x| {
            (ijk[0] as f64 + 1.0) * x[0].sin() + (ijk[1] as f64) * 2.0 - ijk[2] as f64 * x[1].cos()
        });
        let s = t.symmetrize_all();
        assert!(s.max_asymmetry(0, 1) < 1e-15);
        assert!(s.max_asymmetry(1, 2) < 1e-15);
        assert!(s.max_asymmetry(0, 2) < 1e-15);
        assert_eq!(s.symmetry(), Symmetry::All);
    }

    #[test]
    fn permute_round_trip() {
        let g = Grid::uniform(3, 8).unwrap();
        let t = TensorField::<f64>::from_fn(&g, &[Slot::Lower; 3], |ijk, x| {
            (ijk[0] * 9 + ijk[1] * 3 + ijk[2]) as f64 + x[2]
        });
        let p = t.permute(&[1, 2, 0]);
        assert_eq!(p.get(&[0, 1, 2], 5), t.get(&[1, 2, 0], 5));
        assert_eq!(p.permute(&[2, 0, 1]), t);
    }
}
