//! Smooth maps between flat tori: pullback metric, energy, second fundamental form, tension,
//! and the pullback-divergence identity behind the harmonicity criterion.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{trace, MetricField};
use crate::grid_field::{
    gradient, integrate, l2_norm, spectral_diagnostics, Symmetry, TensorField, TrigInterpolant,
};
use crate::linalg::{self, Mat3};
use crate::operators::{divergence, exterior_derivative, hessian};
use crate::scalar::Real;

/// Christoffel symbols `Γ̄^a_{bc}` at one point, indexed `[a][b][c]`.
pub type Christoffel3 = [[[f64; 3]; 3]; 3];

/// A target metric `ḡ` that can be evaluated at arbitrary points of the codomain torus.
pub trait Codomain: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn metric_at(&self, y: &[f64]) -> Result<Mat3<f64>>;
    fn christoffel_at(&self, y: &[f64]) -> Result<Christoffel3>;
}

/// `ḡ` with constant components (flat).
#[derive(Clone, Debug)]
pub struct ConstantCodomain {
    dim: usize,
    metric: Mat3<f64>,
}

impl ConstantCodomain {
    pub fn new(dim: usize, metric: Mat3<f64>) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension {
                dim,
                reason: "codomain tori have dimension 2 or 3".into(),
            });
        }
        if linalg::cholesky(&metric, dim).is_none() {
            return Err(Error::Codomain("constant codomain metric is not positive definite".into()));
        }
        Ok(Self { dim, metric })
    }

    pub fn euclidean(dim: usize) -> Self {
        Self::new(dim, linalg::identity(dim)).expect("identity is definite")
    }
}

impl Codomain for ConstantCodomain {
    fn dim(&self) -> usize {
        self.dim
    }

    fn metric_at(&self, _: &[f64]) -> Result<Mat3<f64>> {
        Ok(self.metric)
    }

    fn christoffel_at(&self, _: &[f64]) -> Result<Christoffel3> {
        Ok([[[0.0; 3]; 3]; 3])
    }
}

/// `ḡ_ab` given by expressions in `x1..x3`, with exact symbolic derivatives.
#[derive(Clone, Debug)]
pub struct ExprCodomain {
    dim: usize,
    entries: Vec<Vec<Expr>>,
    derivs: Vec<Vec<Vec<Expr>>>,
}

impl ExprCodomain {
    /// `entries[a][b]` for `a ≤ b` is used; the lower triangle is mirrored.
    pub fn new(dim: usize, upper: Vec<Vec<Expr>>) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension {
                dim,
                reason: "codomain tori have dimension 2 or 3".into(),
            });
        }
        let mut entries = vec![vec![Expr::Num(0.0); dim]; dim];
        for a in 0..dim {
            for b in a..dim {
                let e = upper
                    .get(a)
                    .and_then(|r| r.get(b))
                    .cloned()
                    .ok_or_else(|| Error::Codomain(format!("missing component g{}{}", a + 1, b + 1)))?;
                e.check_periodic(dim)
                    .map_err(|err| Error::Codomain(format!("g{}{}: {err}", a + 1, b + 1)))?;
                entries[a][b] = e.clone();
                entries[b][a] = e;
            }
        }
        let derivs = entries
            .iter()
            .map(|row| row.iter().map(|e| (0..dim).map(|v| e.diff(v)).collect()).collect())
            .collect();
        Ok(Self { dim, entries, derivs })
    }

    pub fn entries(&self) -> &[Vec<Expr>] {
        &self.entries
    }
}

impl Codomain for ExprCodomain {
    fn dim(&self) -> usize {
        self.dim
    }

    fn metric_at(&self, y: &[f64]) -> Result<Mat3<f64>> {
        let mut m = linalg::zero();
        for a in 0..self.dim {
            for b in 0..self.dim {
                m[a][b] = self.entries[a][b].eval(y)?;
            }
        }
        if linalg::cholesky(&m, self.dim).is_none() {
            return Err(Error::Codomain(format!("target metric not positive definite at {y:?}")));
        }
        Ok(m)
    }

    fn christoffel_at(&self, y: &[f64]) -> Result<Christoffel3> {
        let n = self.dim;
        let g = self.metric_at(y)?;
        let gi = linalg::inverse(&g, n).ok_or_else(|| Error::Codomain("singular target metric".into()))?;
        // dg[d][a][b] = ∂_d ḡ_ab
        let mut dg = [[[0.0; 3]; 3]; 3];
        for a in 0..n {
            for b in 0..n {
                for d in 0..n {
                    dg[d][a][b] = self.derivs[a][b][d].eval(y)?;
                }
            }
        }
        Ok(christoffel_from(&gi, &dg, n))
    }
}

fn christoffel_from(gi: &Mat3<f64>, dg: &[[[f64; 3]; 3]; 3], n: usize) -> Christoffel3 {
    let mut out = [[[0.0; 3]; 3]; 3];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let mut s = 0.0;
                for d in 0..n {
                    s += gi[a][d] * (dg[b][c][d] + dg[c][b][d] - dg[d][b][c]);
                }
                out[a][b][c] = 0.5 * s;
            }
        }
    }
    out
}

/// A grid-sampled target metric. Points that coincide with grid nodes read the samples
/// directly; other points use trigonometric interpolation of `ḡ` and `Γ̄`.
#[derive(Clone)]
pub struct SampledCodomain {
    metric: Arc<MetricField<f64>>,
    interp: Arc<std::sync::OnceLock<(Vec<TrigInterpolant<f64>>, Vec<TrigInterpolant<f64>>)>>,
    /// Spectral tail fraction of the sampled metric.
    pub tail_fraction: f64,
}

impl fmt::Debug for SampledCodomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SampledCodomain")
            .field("grid", self.metric.grid())
            .field("tail_fraction", &self.tail_fraction)
            .finish()
    }
}

impl SampledCodomain {
    pub fn new<T: Real>(metric: &MetricField<T>) -> Result<Self> {
        let metric = Arc::new(metric.cast::<f64>()?);
        let tail_fraction = spectral_diagnostics(metric.g()).tail_fraction;
        Ok(Self {
            metric,
            interp: Arc::new(std::sync::OnceLock::new()),
            tail_fraction,
        })
    }

    pub fn metric(&self) -> &MetricField<f64> {
        &self.metric
    }

    fn interpolants(&self) -> &(Vec<TrigInterpolant<f64>>, Vec<TrigInterpolant<f64>>) {
        self.interp.get_or_init(|| {
            let grid = self.metric.grid();
            let g = self.metric.g();
            let gamma = self.metric.christoffel();
            (
                (0..g.n_components()).map(|c| TrigInterpolant::new(grid, g.component(c))).collect(),
                (0..gamma.n_components())
                    .map(|c| TrigInterpolant::new(grid, gamma.component(c)))
                    .collect(),
            )
        })
    }
}

impl Codomain for SampledCodomain {
    fn dim(&self) -> usize {
        self.metric.dim()
    }

    fn metric_at(&self, y: &[f64]) -> Result<Mat3<f64>> {
        if let Some(node) = self.metric.grid().node_at(y, 1e-12) {
            return Ok(self.metric.g().matrix_at(node));
        }
        let n = self.dim();
        let (gi, _) = self.interpolants();
        let mut m = linalg::zero();
        for a in 0..n {
            for b in 0..n {
                m[a][b] = gi[a * n + b].eval(y);
            }
        }
        Ok(m)
    }

    fn christoffel_at(&self, y: &[f64]) -> Result<Christoffel3> {
        let n = self.dim();
        let mut out = [[[0.0; 3]; 3]; 3];
        let gamma = self.metric.christoffel();
        if let Some(node) = self.metric.grid().node_at(y, 1e-12) {
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        out[a][b][c] = gamma.get(&[a, b, c], node);
                    }
                }
            }
            return Ok(out);
        }
        let (_, ci) = self.interpolants();
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    out[a][b][c] = ci[(a * n + b) * n + c].eval(y);
                }
            }
        }
        Ok(out)
    }
}

/// `f^a(x) = Σ_b W^a_b x^b + u^a(x)` from `(Tⁿ, g)` to `(Tᵐ, ḡ)`.
#[derive(Clone, Debug)]
pub struct TorusMap<T: Real> {
    domain: Arc<MetricField<T>>,
    codomain: Arc<dyn Codomain>,
    winding: Vec<Vec<i64>>,
    displacement: Vec<TensorField<T>>,
    warnings: Vec<String>,
}

/// Differential `J^a_i = W^a_i + ∂_i u^a` at every node.
#[derive(Clone, Debug)]
pub struct MapJacobian<T: Real> {
    pub m: usize,
    pub n: usize,
    /// `j[node][a][i]`
    pub j: Vec<Mat3<T>>,
    /// Singular values per node, ascending.
    pub singular_values: Vec<Vec<T>>,
}

/// Residuals of the pullback-divergence identities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Report {
    /// `‖δg* + ½de‖`
    pub r1: f64,
    /// `‖δg* + ½de + ḡ(τ, f_*·)‖`
    pub r2: f64,
    /// `‖δg*‖ + ½‖de‖ + ‖ḡ(τ, f_*·)‖`, the natural size of the terms.
    pub scale: f64,
    /// `‖τ‖` measured with `ḡ` at the image points.
    pub tension_norm: f64,
    pub converse: ConverseReport,
}

impl Theorem1Report {
    pub fn r1_relative(&self, floor: f64) -> f64 {
        self.r1 / self.scale.max(floor)
    }

    pub fn r2_relative(&self, floor: f64) -> f64 {
        self.r2 / self.scale.max(floor)
    }
}

/// Rank certificate for the converse direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConverseReport {
    /// Smallest ratio `σ_min(J) / ‖J‖` over the nodes.
    pub min_singular_ratio: f64,
    pub rank_certified: bool,
    /// For `n = m`: whether `det J` keeps one sign.
    pub orientation_constant: Option<bool>,
}

const RANK_TOL: f64 = 1e-6;

impl<T: Real> TorusMap<T> {
    pub fn new(
        domain: Arc<MetricField<T>>,
        codomain: Arc<dyn Codomain>,
        winding: Vec<Vec<i64>>,
        displacement: Vec<TensorField<T>>,
    ) -> Result<Self> {
        let n = domain.dim();
        let m = codomain.dim();
        if winding.len() != m || winding.iter().any(|r| r.len() != n) {
            return Err(Error::ShapeMismatch(format!("winding matrix must be {m}x{n}")));
        }
        if displacement.len() != m {
            return Err(Error::ShapeMismatch(format!("expected {m} displacement fields")));
        }
        let mut warnings = Vec::new();
        for (a, u) in displacement.iter().enumerate() {
            if u.rank() != 0 || u.grid() != domain.grid() {
                return Err(Error::ShapeMismatch("displacements must be scalar fields on the domain grid".into()));
            }
            let tail = spectral_diagnostics(u).tail_fraction;
            if tail > 1e-8 {
                warnings.push(format!("displacement u{} is under-resolved (tail fraction {tail:e})", a + 1));
            }
        }
        Ok(Self {
            domain,
            codomain,
            winding,
            displacement,
            warnings,
        })
    }

    /// `id: (M, g) → (M, ḡ)`.
    pub fn identity(domain: Arc<MetricField<T>>, codomain: Arc<dyn Codomain>) -> Result<Self> {
        let n = domain.dim();
        let winding = (0..n).map(|a| (0..n).map(|b| i64::from(a == b)).collect()).collect();
        let zero = vec![TensorField::constant(domain.grid(), T::zero()); codomain.dim()];
        Self::new(domain, codomain, winding, zero)
    }

    /// `id: (M, g) → (M, h)` for a metric `h` sampled on the same grid.
    pub fn identity_to(domain: Arc<MetricField<T>>, target: &MetricField<T>) -> Result<Self> {
        let codomain: Arc<dyn Codomain> = Arc::new(SampledCodomain::new(target)?);
        Self::identity(domain, codomain)
    }

    pub fn domain_shared(&self) -> Arc<MetricField<T>> {
        self.domain.clone()
    }

    pub fn domain(&self) -> &MetricField<T> {
        &self.domain
    }

    pub fn codomain(&self) -> &dyn Codomain {
        &*self.codomain
    }

    pub fn winding(&self) -> &[Vec<i64>] {
        &self.winding
    }

    pub fn displacement(&self) -> &[TensorField<T>] {
        &self.displacement
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// `f(x)` at every node, as codomain coordinates (not reduced mod 2π).
    pub fn image_points(&self) -> Vec<[f64; 3]> {
        let grid = self.domain.grid();
        let m = self.codomain.dim();
        (0..grid.len())
            .map(|node| {
                let x: [f64; 3] = grid.coords(node);
                let mut y = [0.0; 3];
                for (a, ya) in y.iter_mut().enumerate().take(m) {
                    let lin: f64 = self.winding[a].iter().zip(&x).map(|(w, xi)| *w as f64 * xi).sum();
                    *ya = lin + self.displacement[a].at(node).as_f64();
                }
                y
            })
            .collect()
    }

    pub fn jacobian(&self) -> MapJacobian<T> {
        let n = self.domain.dim();
        let m = self.codomain.dim();
        let grads: Vec<TensorField<T>> = self.displacement.iter().map(gradient).collect();
        let nodes = self.domain.grid().len();
        let mut j = vec![linalg::zero::<T>(); nodes];
        let mut singular_values = Vec::with_capacity(nodes);
        for (node, jn) in j.iter_mut().enumerate() {
            for a in 0..m {
                for i in 0..n {
                    jn[a][i] = T::lit(self.winding[a][i] as f64) + grads[a].get(&[i], node);
                }
            }
            singular_values.push(linalg::singular_values(jn, m, n));
        }
        MapJacobian { m, n, j, singular_values }
    }

    fn codomain_samples(&self) -> Result<(Vec<Mat3<f64>>, Vec<Christoffel3>)> {
        let pts = self.image_points();
        let mut gs = Vec::with_capacity(pts.len());
        let mut cs = Vec::with_capacity(pts.len());
        for y in &pts {
            gs.push(self.codomain.metric_at(y)?);
            cs.push(self.codomain.christoffel_at(y)?);
        }
        Ok((gs, cs))
    }

    /// `g*_ij = ḡ_ab(f) J^a_i J^b_j`.
    pub fn pullback_metric(&self) -> Result<TensorField<T>> {
        let (gs, _) = self.codomain_samples()?;
        Ok(self.pullback_with(&self.jacobian(), &gs))
    }

    fn pullback_with(&self, jac: &MapJacobian<T>, gs: &[Mat3<f64>]) -> TensorField<T> {
        let n = jac.n;
        let m = jac.m;
        let mut out = TensorField::covariant(self.domain.grid(), 2);
        for (node, gb) in gs.iter().enumerate() {
            let j = &jac.j[node];
            let mut p = linalg::zero::<T>();
            for i in 0..n {
                for k in 0..n {
                    let mut s = T::zero();
                    for a in 0..m {
                        for b in 0..m {
                            s += T::lit(gb[a][b]) * j[a][i] * j[b][k];
                        }
                    }
                    p[i][k] = s;
                }
            }
            out.set_matrix_at(node, &p);
        }
        out.with_symmetry(Symmetry::All)
    }

    /// Energy density `e = trace_g g*` and energy `E = ½∫e dv_g`.
    pub fn energy(&self) -> Result<Energy<T>> {
        let gstar = self.pullback_metric()?;
        let e = trace(&gstar, &self.domain);
        let total = T::lit(0.5) * integrate(&e, self.domain.sqrt_det())?;
        let constant_map = e.max_abs() <= T::noise_floor();
        Ok(Energy {
            density: e,
            energy: total,
            constant_map,
        })
    }

    /// `(Df_*)^a_ij = ∂_i∂_j f^a − Γ^k_ij ∂_k f^a + Γ̄^a_bc(f) ∂_i f^b ∂_j f^c`, one field per `a`.
    pub fn second_fundamental_form(&self) -> Result<Vec<TensorField<T>>> {
        let (_, cs) = self.codomain_samples()?;
        Ok(self.second_fundamental_form_with(&self.jacobian(), &cs))
    }

    fn second_fundamental_form_with(&self, jac: &MapJacobian<T>, cs: &[Christoffel3]) -> Vec<TensorField<T>> {
        let g = &*self.domain;
        let n = jac.n;
        let m = jac.m;
        let gamma = g.christoffel();
        (0..m)
            .map(|a| {
                let mut h = hessian(&self.displacement[a], g);
                for i in 0..n {
                    for j in 0..n {
                        let comp = h.comp_mut(&[i, j]);
                        for (node, v) in comp.iter_mut().enumerate() {
                            let jm = &jac.j[node];
                            let mut s = T::zero();
                            for k in 0..n {
                                s -= gamma.get(&[k, i, j], node) * T::lit(self.winding[a][k] as f64);
                            }
                            let cb = &cs[node][a];
                            for b in 0..m {
                                for c in 0..m {
                                    s += T::lit(cb[b][c]) * jm[b][i] * jm[c][j];
                                }
                            }
                            *v += s;
                        }
                    }
                }
                h.with_symmetry(Symmetry::All)
            })
            .collect()
    }

    /// Tension field `τ^a = g^{ij}(Df_*)^a_ij`.
    pub fn tension(&self) -> Result<Vec<TensorField<T>>> {
        let sff = self.second_fundamental_form()?;
        Ok(sff.iter().map(|d| trace(d, &self.domain)).collect())
    }

    /// `(∫ ḡ_ab(f) τ^a τ^b dv_g)^{1/2}`.
    pub fn tension_norm(&self) -> Result<T> {
        let (gs, _) = self.codomain_samples()?;
        let tau = self.tension()?;
        self.tension_norm_with(&tau, &gs)
    }

    fn tension_norm_with(&self, tau: &[TensorField<T>], gs: &[Mat3<f64>]) -> Result<T> {
        let m = tau.len();
        let vals: Vec<T> = (0..gs.len())
            .map(|node| {
                let mut s = T::zero();
                for a in 0..m {
                    for b in 0..m {
                        s += T::lit(gs[node][a][b]) * tau[a].at(node) * tau[b].at(node);
                    }
                }
                s
            })
            .collect();
        let f = TensorField::scalar(self.domain.grid(), vals)?;
        Ok(integrate(&f, self.domain.sqrt_det())?.max(T::zero()).sqrt())
    }

    /// `r1 = ‖δg* + ½de‖` and `r2 = ‖δg* + ½de + ḡ(τ, f_*·)‖`; the second vanishes for every map.
    pub fn theorem1_residual(&self) -> Result<Theorem1Report> {
        let g = &*self.domain;
        let n = g.dim();
        let m = self.codomain.dim();
        let (gs, cs) = self.codomain_samples()?;
        let jac = self.jacobian();
        let gstar = self.pullback_with(&jac, &gs);
        let e = trace(&gstar, g);
        let dg = divergence(&gstar, g)?;
        let de = exterior_derivative(&e);
        let mut lhs = dg.clone();
        lhs.axpy(T::lit(0.5), &de);
        let tau: Vec<TensorField<T>> = self
            .second_fundamental_form_with(&jac, &cs)
            .iter()
            .map(|d| trace(d, g))
            .collect();
        let mut coupling = TensorField::covariant(g.grid(), 1);
        for k in 0..n {
            let comp = coupling.comp_mut(&[k]);
            for (node, v) in comp.iter_mut().enumerate() {
                let mut s = T::zero();
                for a in 0..m {
                    for b in 0..m {
                        s += T::lit(gs[node][a][b]) * tau[a].at(node) * jac.j[node][b][k];
                    }
                }
                *v = s;
            }
        }
        let mut full = lhs.clone();
        full += &coupling;
        let scale = l2_norm(&dg, g) + T::lit(0.5) * l2_norm(&de, g) + l2_norm(&coupling, g);
        Ok(Theorem1Report {
            r1: l2_norm(&lhs, g).as_f64(),
            r2: l2_norm(&full, g).as_f64(),
            scale: scale.as_f64(),
            tension_norm: self.tension_norm_with(&tau, &gs)?.as_f64(),
            converse: converse_report(&jac),
        })
    }
}

fn converse_report<T: Real>(jac: &MapJacobian<T>) -> ConverseReport {
    let mut min_ratio = f64::INFINITY;
    let mut signs = (false, false);
    for (node, sv) in jac.singular_values.iter().enumerate() {
        let norm = sv.iter().map(|s| s.as_f64() * s.as_f64()).sum::<f64>().sqrt();
        let smin = sv.first().map_or(0.0, |s| s.as_f64());
        let ratio = if norm > 0.0 { smin / norm } else { 0.0 };
        min_ratio = min_ratio.min(ratio);
        if jac.m == jac.n {
            let d = linalg::det(&jac.j[node], jac.n).as_f64();
            if d > 0.0 {
                signs.0 = true;
            } else {
                signs.1 = true;
            }
        }
    }
    let orientation_constant = (jac.m == jac.n).then_some(!(signs.0 && signs.1));
    ConverseReport {
        min_singular_ratio: min_ratio,
        rank_certified: jac.n >= jac.m && min_ratio >= RANK_TOL && orientation_constant != Some(false),
        orientation_constant,
    }
}

#[derive(Clone, Debug)]
pub struct Energy<T: Real> {
    pub density: TensorField<T>,
    pub energy: T,
    /// Set when the energy density vanishes identically.
    pub constant_map: bool,
}

/// Samples an expression in `x1..xn` at the grid nodes.
pub fn sample_expression<T: Real>(grid: &crate::grid_field::Grid, e: &Expr) -> Result<TensorField<T>> {
    let mut vals = Vec::with_capacity(grid.len());
    for node in 0..grid.len() {
        let x: [f64; 3] = grid.coords(node);
        vals.push(T::lit(e.eval(&x[..grid.dim()])?));
    }
    TensorField::scalar(grid, vals)
}
