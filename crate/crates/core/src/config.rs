//! JSON run configurations: manifold, metrics given by expressions or named fixtures, an
//! optional map, and the ordered task list.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{parse_expression, Expr};
use crate::fixtures;
use crate::geometry::{positive_definite_check, MetricField};
use crate::grid_field::{Grid, Slot, TensorField};
use crate::maps::{sample_expression, Codomain, ExprCodomain, SampledCodomain, TorusMap};
use crate::report::Tolerances;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifold {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
}

/// A metric given by name (`"flat"`, `"conformal-T2"`, `"bump-T3"`) or by the upper triangle of
/// its component matrix, row `a` listing `g_ab` for `b ≥ a`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetricSpec {
    Named(String),
    Components { upper: Vec<Vec<String>> },
}

/// A symmetric 2-tensor for the decomposition and classification tasks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TensorSpec {
    /// `"random"` (seeded, wavenumber ≤ 2), `"ricci"` or `"metric"`.
    Named(String),
    Components { upper: Vec<Vec<String>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    /// `m × n` integer matrix `W`.
    pub winding: Vec<Vec<i64>>,
    /// One periodic expression per codomain coordinate.
    pub displacement: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub manifold: Manifold,
    #[serde(default = "default_metric")]
    pub metric: MetricSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub codomain: Option<MetricSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<MapSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tensor: Option<TensorSpec>,
    #[serde(default)]
    pub tasks: Vec<String>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_metric() -> MetricSpec {
    MetricSpec::Named("flat".into())
}

fn default_seed() -> u64 {
    1
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Everything a task needs, built from a validated configuration.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub grid: Grid,
    pub metric: Arc<MetricField<f64>>,
    pub map: TorusMap<f64>,
    pub tensor: TensorField<f64>,
    pub tolerances: Tolerances,
    pub seed: u64,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| cfg_err(format!("malformed configuration: {e}")))
    }

    pub fn resolution(&self) -> usize {
        self.manifold
            .resolution
            .unwrap_or_else(|| fixtures::default_resolution(self.manifold.dim))
    }

    /// Parses every expression, checks periodicity, samples the metrics and checks positive
    /// definiteness at the grid nodes.
    pub fn resolve(&self) -> Result<Resolved> {
        let n = self.manifold.dim;
        if !(2..=3).contains(&n) {
            return Err(cfg_err(format!("manifold.dim must be 2 or 3, got {n}")));
        }
        let grid = Grid::uniform(n, self.resolution()).map_err(|e| cfg_err(e.to_string()))?;
        let metric = Arc::new(self.build_metric(&self.metric, &grid, "metric")?);

        let codomain: Arc<dyn Codomain> = match &self.codomain {
            Some(MetricSpec::Components { upper }) => {
                let m = upper.len();
                let exprs = parse_upper(upper, m, "codomain")?;
                let cod = ExprCodomain::new(m, exprs).map_err(|e| cfg_err(format!("codomain: {e}")))?;
                if m == n {
                    let cg = Grid::uniform(m, self.resolution()).map_err(|e| cfg_err(e.to_string()))?;
                    self.build_metric(self.codomain.as_ref().expect("present"), &cg, "codomain")?;
                }
                Arc::new(cod)
            }
            Some(spec @ MetricSpec::Named(_)) => {
                Arc::new(SampledCodomain::new(&self.build_metric(spec, &grid, "codomain")?).map_err(|e| cfg_err(e.to_string()))?)
            }
            None => match &self.metric {
                MetricSpec::Components { upper } => {
                    Arc::new(ExprCodomain::new(n, parse_upper(upper, n, "metric")?).map_err(|e| cfg_err(e.to_string()))?)
                }
                MetricSpec::Named(_) => Arc::new(SampledCodomain::new(&metric).map_err(|e| cfg_err(e.to_string()))?),
            },
        };

        let map = match &self.map {
            None => {
                if codomain.dim() != n {
                    return Err(cfg_err("a codomain of different dimension needs an explicit map"));
                }
                TorusMap::identity(metric.clone(), codomain)
            }
            Some(spec) => {
                let m = codomain.dim();
                if spec.winding.len() != m || spec.winding.iter().any(|r| r.len() != n) {
                    return Err(cfg_err(format!("map.winding must be a {m}x{n} integer matrix")));
                }
                if spec.displacement.len() != m {
                    return Err(cfg_err(format!("map.displacement needs {m} expressions")));
                }
                let mut u = Vec::with_capacity(m);
                for (a, text) in spec.displacement.iter().enumerate() {
                    let e = parse_checked(text, n, &format!("map.displacement[{a}]"))?;
                    u.push(sample_expression(&grid, &e)?);
                }
                TorusMap::new(metric.clone(), codomain, spec.winding.clone(), u)
            }
        }
        .map_err(|e| cfg_err(format!("map: {e}")))?;

        let tensor = match &self.tensor {
            None => fixtures::random_sym2(&grid, self.seed, 2),
            Some(TensorSpec::Named(name)) => match name.as_str() {
                "random" => fixtures::random_sym2(&grid, self.seed, 2),
                "ricci" => metric.curvature().ricci.clone(),
                "metric" => metric.g().clone(),
                other => return Err(cfg_err(format!("unknown tensor {other:?} (expected random, ricci or metric)"))),
            },
            Some(TensorSpec::Components { upper }) => sample_upper(&grid, &parse_upper(upper, n, "tensor")?)?,
        };

        Ok(Resolved {
            grid,
            metric,
            map,
            tensor,
            tolerances: self.tolerances,
            seed: self.seed,
        })
    }

    fn build_metric(&self, spec: &MetricSpec, grid: &Grid, what: &str) -> Result<MetricField<f64>> {
        let n = grid.dim();
        match spec {
            MetricSpec::Named(name) => match name.as_str() {
                "flat" => Ok(MetricField::flat(grid)),
                "conformal-T2" if n == 2 => Ok(fixtures::conformal_t2(grid.resolution()[0])),
                "bump-T3" if n == 3 => Ok(fixtures::bump_metric(grid, self.seed, 0.1)),
                "conformal-T2" | "bump-T3" => Err(cfg_err(format!("{what}: fixture {name:?} does not exist in dimension {n}"))),
                other => Err(cfg_err(format!("{what}: unknown metric {other:?}"))),
            },
            MetricSpec::Components { upper } => {
                let g = sample_upper(grid, &parse_upper(upper, n, what)?)?;
                let def = positive_definite_check(&g);
                if !def.positive_definite {
                    let x: [f64; 3] = grid.coords(def.worst_node);
                    return Err(cfg_err(format!(
                        "{what} is not positive definite: smallest eigenvalue {:e} at node {} (x = {:?})",
                        def.min_eigenvalue,
                        def.worst_node,
                        &x[..n]
                    )));
                }
                MetricField::new(g).map_err(|e| cfg_err(format!("{what}: {e}")))
            }
        }
    }
}

fn parse_checked(text: &str, dim: usize, what: &str) -> Result<Expr> {
    let e = parse_expression(text).map_err(|e| cfg_err(format!("{what}: {e}")))?;
    e.check_periodic(dim).map_err(|e| cfg_err(format!("{what}: {e}")))?;
    Ok(e)
}

/// Parses an upper-triangular component list into a full `n × n` expression matrix.
fn parse_upper(upper: &[Vec<String>], n: usize, what: &str) -> Result<Vec<Vec<Expr>>> {
    if upper.len() != n {
        return Err(cfg_err(format!("{what}: expected {n} rows of the upper triangle")));
    }
    let mut out = vec![vec![Expr::Num(0.0); n]; n];
    for (a, row) in upper.iter().enumerate() {
        if row.len() != n - a {
            return Err(cfg_err(format!(
                "{what}: row {} of the upper triangle must have {} entries (g{}{}..g{}{})",
                a + 1,
                n - a,
                a + 1,
                a + 1,
                a + 1,
                n
            )));
        }
        for (k, text) in row.iter().enumerate() {
            let b = a + k;
            let e = parse_checked(text, n, &format!("{what} g{}{}", a + 1, b + 1))?;
            out[a][b] = e.clone();
            out[b][a] = e;
        }
    }
    Ok(out)
}

fn sample_upper(grid: &Grid, m: &[Vec<Expr>]) -> Result<TensorField<f64>> {
    let n = grid.dim();
    let mut t = TensorField::zeros(grid, &[Slot::Lower, Slot::Lower]);
    for a in 0..n {
        for b in a..n {
            let s = sample_expression::<f64>(grid, &m[a][b])?;
            t.comp_mut(&[a, b]).copy_from_slice(s.data());
            if a != b {
                t.comp_mut(&[b, a]).copy_from_slice(s.data());
            }
        }
    }
    Ok(t.with_symmetry(crate::grid_field::Symmetry::All))
}

/// Reads and validates a configuration file.
pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| cfg_err(format!("{}: {e}", path.display())))?;
    let cfg = RunConfig::from_json(&text)?;
    cfg.resolve()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> Result<Resolved> {
        RunConfig::from_json(text)?.resolve()
    }

    #[test]
    fn flat_config_is_valid() {
        let r = cfg(r#"{"manifold": {"dim": 2, "resolution": 8}, "metric": "flat"}"#).unwrap();
        assert_eq!(r.grid.resolution(), &[8, 8]);
        assert_eq!(r.metric.curvature().scalar.max_abs(), 0.0);
        assert_eq!(r.seed, 1);
    }

    #[test]
    fn indefinite_metric_rejected() {
        let err = cfg(r#"{"manifold": {"dim": 2, "resolution": 8},
            "metric": {"upper": [["1 + 2*sin(x1)", "0"], ["1"]]}}"#)
        .unwrap_err();
        assert!(err.to_string().contains("not positive definite"), "{err}");
    }

    #[test]
    fn non_periodic_displacement_rejected() {
        let err = cfg(r#"{"manifold": {"dim": 2, "resolution": 8},
            "map": {"winding": [[1, 0], [0, 1]], "displacement": ["x1", "0"]}}"#)
        .unwrap_err();
        assert!(err.to_string().contains("not 2π-periodic"), "{err}");
    }

    #[test]
    fn lower_triangle_rejected() {
        let err = cfg(r#"{"manifold": {"dim": 2}, "metric": {"upper": [["1", "0"], ["0", "1"]]}}"#).unwrap_err();
        assert!(err.to_string().contains("upper triangle"), "{err}");
        assert!(cfg(r#"{"manifold": {"dim": 4}}"#).is_err());
        assert!(cfg(r#"{"manifold": {"dim": 2}, "bogus": 1}"#).is_err());
    }

    #[test]
    fn expression_metric_matches_components() {
        let r = cfg(r#"{"manifold": {"dim": 2, "resolution": 8},
            "metric": {"upper": [["2", "0.1*sin(x2)"], ["1"]]}}"#)
        .unwrap();
        let m = r.metric.g().matrix_at(3);
        let x: [f64; 3] = r.grid.coords(3);
        assert_eq!(m[0][0], 2.0);
        assert_eq!(m[0][1], 0.1 * x[1].sin());
        assert_eq!(m[1][0], m[0][1]);
    }
}
