//! Machine-readable check reports.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// One named residual with its tolerance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub resolution: Vec<usize>,
    pub seed: u64,
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<f64>,
}

/// Outcome of one named check.
///
/// `status` is `pass` exactly when every residual is within tolerance and the check was not
/// skipped. Informational values in `values` are never asserted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check_id: String,
    pub status: Status,
    pub residuals: Vec<Residual>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub values: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped_legs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub metadata: Metadata,
}

fn finite(v: f64) -> f64 {
    if v.is_nan() {
        f64::MAX
    } else {
        v.clamp(-f64::MAX, f64::MAX)
    }
}

impl CheckReport {
    pub fn new(check_id: impl Into<String>) -> Self {
        Self {
            check_id: check_id.into(),
            status: Status::Pass,
            residuals: Vec::new(),
            values: BTreeMap::new(),
            skipped_legs: Vec::new(),
            reason: None,
            metadata: Metadata::default(),
        }
    }

    /// Adds `value ≤ tolerance` as an asserted residual.
    pub fn residual(&mut self, name: impl Into<String>, value: f64, tolerance: f64) -> &mut Self {
        let name = name.into();
        if !value.is_finite() {
            self.metadata.warnings.push(format!("{name}: non-finite value {value}"));
        }
        let pass = value.is_finite() && value <= tolerance;
        self.residuals.push(Residual {
            name,
            value: finite(value),
            tolerance,
            pass,
        });
        self.refresh();
        self
    }

    /// Adds an asserted lower bound `value > threshold`, stored as the residual `threshold / value`
    /// against tolerance 1.
    pub fn exceeds(&mut self, name: impl Into<String>, value: f64, threshold: f64) -> &mut Self {
        let name = name.into();
        self.values.insert(name.clone(), finite(value));
        let ratio = if value > 0.0 { threshold / value } else { f64::INFINITY };
        self.residual(format!("{name} (threshold/value)"), ratio, 1.0);
        if ratio == 1.0 {
            // value == threshold is not strictly above
            if let Some(r) = self.residuals.last_mut() {
                r.pass = false;
            }
            self.refresh();
        }
        self
    }

    pub fn value(&mut self, name: impl Into<String>, v: f64) -> &mut Self {
        self.values.insert(name.into(), finite(v));
        self
    }

    pub fn warn(&mut self, msg: impl Into<String>) -> &mut Self {
        self.metadata.warnings.push(msg.into());
        self
    }

    /// Records a leg that could not run; it never counts as a pass.
    pub fn skip_leg(&mut self, what: impl Into<String>) -> &mut Self {
        self.skipped_legs.push(what.into());
        self
    }

    /// Marks the whole check as skipped.
    pub fn skip(&mut self, reason: impl Into<String>) -> &mut Self {
        self.reason = Some(reason.into());
        self.status = Status::Skipped;
        self
    }

    /// Marks the check failed for a reason other than a residual (e.g. an error).
    pub fn fail(&mut self, reason: impl Into<String>) -> &mut Self {
        self.reason = Some(reason.into());
        self.status = Status::Fail;
        self
    }

    pub fn with_metadata(mut self, resolution: &[usize], seed: u64) -> Self {
        self.metadata.resolution = resolution.to_vec();
        self.metadata.seed = seed;
        self
    }

    fn refresh(&mut self) {
        if self.status == Status::Skipped || (self.status == Status::Fail && self.reason.is_some()) {
            return;
        }
        self.status = if self.residuals.iter().all(|r| r.pass) {
            Status::Pass
        } else {
            Status::Fail
        };
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn residual_named(&self, name: &str) -> Option<&Residual> {
        self.residuals.iter().find(|r| r.name == name)
    }
}

/// Tolerance settings shared by the checks.
///
/// Each check has its own default relative tolerance; `rel_tol`, when set, replaces all of them.
/// `floor` is the absolute scale below which quantities are treated as zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    #[serde(default)]
    pub rel_tol: Option<f64>,
    #[serde(default = "default_floor")]
    pub floor: f64,
}

fn default_floor() -> f64 {
    1e-12
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rel_tol: None,
            floor: default_floor(),
        }
    }
}

impl Tolerances {
    pub fn rel(&self, default: f64) -> f64 {
        self.rel_tol.unwrap_or(default)
    }

    /// Absolute bound `rel · scale + floor` for quantities whose natural scale may vanish.
    pub fn bound(&self, rel: f64, scale: f64) -> f64 {
        rel * scale + self.floor
    }

    /// `value / max(scale, floor)`.
    pub fn relative(&self, value: f64, scale: f64) -> f64 {
        value / scale.max(self.floor)
    }
}

/// Shortest-round-trip JSON for a list of reports.
pub fn to_json(reports: &[CheckReport]) -> String {
    serde_json::to_string_pretty(reports).expect("reports serialize")
}

pub fn from_json(text: &str) -> serde_json::Result<Vec<CheckReport>> {
    serde_json::from_str(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_follows_residuals() {
        let mut r = CheckReport::new("x");
        r.residual("a", 1e-9, 1e-8);
        assert!(r.passed());
        r.residual("b", 2.0, 1.0);
        assert_eq!(r.status, Status::Fail);
        let mut s = CheckReport::new("y");
        s.skip("precondition unmet");
        assert!(!s.passed());
        let mut e = CheckReport::new("z");
        e.exceeds("gap", 0.5, 1e-3);
        assert!(e.passed());
        e.exceeds("tiny", 1e-9, 1e-3);
        assert!(!e.passed());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut r = CheckReport::new("rt").with_metadata(&[32, 32], 7);
        r.residual("a", 0.1 + 0.2, 1e-6).value("third", 1.0 / 3.0).warn("w");
        r.residual("nan", f64::NAN, 1.0);
        let text = to_json(&[r.clone()]);
        let back = from_json(&text).unwrap();
        assert_eq!(back, vec![r]);
        assert_eq!(back[0].residuals[0].value.to_bits(), (0.1f64 + 0.2).to_bits());
    }
}
