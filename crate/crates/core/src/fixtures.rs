//! Seeded band-limited test fields and the standard metric fixtures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;

use crate::geometry::MetricField;
use crate::grid_field::{Grid, Slot, Symmetry, TensorField};
use crate::scalar::Real;

/// Default resolution for a given dimension.
pub fn default_resolution(dim: usize) -> usize {
    if dim == 2 {
        32
    } else {
        24
    }
}

/// Random trigonometric polynomial with wavenumbers `|k_a| ≤ kmax`, scaled to max-norm 1.
fn trig_poly(grid: &Grid, rng: &mut ChaCha8Rng, kmax: usize) -> Vec<f64> {
    let n = grid.dim();
    let km = kmax as isize;
    let res = grid.resolution();
    // per-axis tables e^{i k x}
    let tables: Vec<Vec<Vec<Complex<f64>>>> = (0..n)
        .map(|a| {
            (-km..=km)
                .map(|k| {
                    (0..res[a])
                        .map(|j| {
                            let x = 2.0 * std::f64::consts::PI * j as f64 / res[a] as f64;
                            Complex::from_polar(1.0, k as f64 * x)
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let width = 2 * kmax + 1;
    let modes = width.pow(n as u32);
    let mut coeffs = Vec::with_capacity(modes);
    for mode in 0..modes {
        let mut k2 = 0isize;
        let mut rem = mode;
        for _ in 0..n {
            let k = (rem % width) as isize - km;
            k2 += k * k;
            rem /= width;
        }
        let w = 1.0 / (1.0 + k2 as f64);
        let a: f64 = rng.gen_range(-1.0..1.0);
        let b: f64 = rng.gen_range(-1.0..1.0);
        coeffs.push(Complex::new(a * w, b * w));
    }
    let mut out = vec![0.0; grid.len()];
    for (node, o) in out.iter_mut().enumerate() {
        let idx = grid.multi_index(node);
        let mut acc = 0.0;
        for (mode, c) in coeffs.iter().enumerate() {
            let mut e = Complex::new(1.0, 0.0);
            let mut rem = mode;
            for (a, table) in tables.iter().enumerate() {
                e *= table[rem % width][idx[a]];
                rem /= width;
            }
            acc += (c * e).re;
        }
        *o = acc;
    }
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        out.iter_mut().for_each(|v| *v /= peak);
    }
    out
}

/// Random field with the given slots; totally symmetrized when `symmetric`.
pub fn random_field<T: Real>(grid: &Grid, slots: &[Slot], symmetric: bool, seed: u64, kmax: usize) -> TensorField<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = TensorField::<T>::zeros(grid, slots);
    for c in 0..f.n_components() {
        let v = trig_poly(grid, &mut rng, kmax);
        for (d, s) in f.component_mut(c).iter_mut().zip(v) {
            *d = T::lit(s);
        }
    }
    if symmetric && slots.len() >= 2 {
        f.with_symmetry(Symmetry::All)
    } else {
        f
    }
}

pub fn random_scalar<T: Real>(grid: &Grid, seed: u64, kmax: usize) -> TensorField<T> {
    random_field(grid, &[], false, seed, kmax)
}

pub fn random_one_form<T: Real>(grid: &Grid, seed: u64, kmax: usize) -> TensorField<T> {
    random_field(grid, &[Slot::Lower], false, seed, kmax)
}

pub fn random_sym2<T: Real>(grid: &Grid, seed: u64, kmax: usize) -> TensorField<T> {
    random_field(grid, &[Slot::Lower, Slot::Lower], true, seed, kmax)
}

pub fn flat<T: Real>(dim: usize, n: usize) -> MetricField<T> {
    MetricField::flat(&Grid::uniform(dim, n).expect("valid resolution"))
}

/// `g = e^{2u} δ` on T² with `u = 0.1 sin x¹`.
pub fn conformal_t2<T: Real>(n: usize) -> MetricField<T> {
    let grid = Grid::uniform(2, n).expect("valid resolution");
    let u = TensorField::scalar_from_fn(&grid, |x: [T; 3]| T::lit(0.1) * x[0].sin());
    MetricField::conformally_flat(&u).expect("conformal metric is definite")
}

/// `g = δ + 0.1 h` on T³ with `h` a seeded symmetric trigonometric polynomial of wavenumber ≤ 2 and `|h_ij| ≤ 1`.
pub fn bump_t3<T: Real>(n: usize, seed: u64) -> MetricField<T> {
    let grid = Grid::uniform(3, n).expect("valid resolution");
    bump_metric(&grid, seed, 0.1)
}

/// `δ + amplitude·h` on any grid.
pub fn bump_metric<T: Real>(grid: &Grid, seed: u64, amplitude: f64) -> MetricField<T> {
    let mut h = random_sym2::<f64>(grid, seed.wrapping_add(0x5eed_0000), 2);
    let peak = h.max_abs();
    if peak > 0.0 {
        h = h.scaled(1.0 / peak);
    }
    let mut g = MetricField::<f64>::flat(grid).g().clone();
    g.axpy(amplitude, &h);
    MetricField::new(g.cast()).expect("small perturbation of the identity is definite")
}

/// Named metric fixtures accepted by the suite.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricFixture {
    Flat2,
    Flat3,
    Conformal2,
    Bump3 { seed: u64 },
}

impl MetricFixture {
    pub fn name(&self) -> String {
        match self {
            Self::Flat2 => "flat-T2".into(),
            Self::Flat3 => "flat-T3".into(),
            Self::Conformal2 => "conformal-T2".into(),
            Self::Bump3 { seed } => format!("bump-T3-seed{seed}"),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Flat2 | Self::Conformal2 => 2,
            _ => 3,
        }
    }

    pub fn build<T: Real>(&self, n: usize) -> MetricField<T> {
        match *self {
            Self::Flat2 => flat(2, n),
            Self::Flat3 => flat(3, n),
            Self::Conformal2 => conformal_t2(n),
            Self::Bump3 { seed } => bump_t3(n, seed),
        }
    }

    /// The default fixture list: flat T², flat T³, conformal T², bump T³ for seeds 1, 2, 3.
    pub fn standard() -> Vec<Self> {
        vec![
            Self::Flat2,
            Self::Flat3,
            Self::Conformal2,
            Self::Bump3 { seed: 1 },
            Self::Bump3 { seed: 2 },
            Self::Bump3 { seed: 3 },
        ]
    }
}
