//! Structured check records shared by every verification routine.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::noise::NoiseParam;

/// Absolute tolerance on margins of log-scale quantities.
pub const LOG_TOL: f64 = 1e-9;
/// Absolute tolerance on margins of linear-scale quantities.
pub const LINEAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub log: f64,
    pub linear: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            log: LOG_TOL,
            linear: LINEAR_TOL,
        }
    }
}

impl Tolerances {
    pub fn for_scale(&self, scale: Scale) -> f64 {
        match scale {
            Scale::Log => self.log,
            Scale::Linear => self.linear,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Log,
    Linear,
}

/// An inequality `lhs <= rhs` passes when `margin >= -tol`; an identity
/// `lhs = rhs` passes when `|margin| <= tol`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckKind {
    Inequality,
    Identity,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub digests: Vec<String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub labels: BTreeMap<String, String>,
}

impl ReportParams {
    pub fn for_param(n: usize, p: NoiseParam) -> Self {
        Self {
            n: Some(n),
            r: Some(p.r()),
            s: Some(p.s()),
            ..Self::default()
        }
    }

    pub fn for_delta(delta: f64) -> Self {
        Self {
            delta: Some(delta),
            ..Self::default()
        }
    }

    pub fn with_digest(mut self, digest: String) -> Self {
        self.digests.push(digest);
        self
    }

    pub fn with_label(mut self, key: &str, value: impl ToString) -> Self {
        self.labels.insert(key.to_string(), value.to_string());
        self
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check_name: String,
    pub params: ReportParams,
    pub kind: CheckKind,
    pub scale: Scale,
    #[serde(with = "float_repr")]
    pub lhs: f64,
    #[serde(with = "float_repr")]
    pub rhs: f64,
    #[serde(with = "float_repr")]
    pub margin: f64,
    pub pass: bool,
    /// Outcome of the exact or compensated recomputation run on a failing
    /// margin; absent when none was needed.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub exact_recheck: Option<bool>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default, with = "float_map")]
    pub extras: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
}

impl CheckReport {
    /// `lhs <= rhs`, judged at the tolerance for `scale`.
    pub fn inequality(
        name: &str,
        params: ReportParams,
        scale: Scale,
        lhs: f64,
        rhs: f64,
        tol: &Tolerances,
    ) -> Self {
        Self::build(name, params, CheckKind::Inequality, scale, lhs, rhs, tol)
    }

    /// `lhs = rhs`, judged at the tolerance for `scale`.
    pub fn identity(
        name: &str,
        params: ReportParams,
        scale: Scale,
        lhs: f64,
        rhs: f64,
        tol: &Tolerances,
    ) -> Self {
        Self::build(name, params, CheckKind::Identity, scale, lhs, rhs, tol)
    }

    fn build(
        name: &str,
        params: ReportParams,
        kind: CheckKind,
        scale: Scale,
        lhs: f64,
        rhs: f64,
        tol: &Tolerances,
    ) -> Self {
        let margin = if lhs == rhs { 0.0 } else { rhs - lhs };
        let t = tol.for_scale(scale);
        let pass = match kind {
            CheckKind::Inequality => margin >= -t,
            CheckKind::Identity => margin.abs() <= t,
        };
        Self {
            check_name: name.to_string(),
            params,
            kind,
            scale,
            lhs,
            rhs,
            margin,
            pass,
            exact_recheck: None,
            extras: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn with_extra(mut self, key: &str, value: f64) -> Self {
        self.extras.insert(key.to_string(), value);
        self
    }

    pub fn with_note(mut self, note: &str) -> Self {
        self.notes.push(note.to_string());
        self
    }

    /// Fails the report (with a note) unless `cond` holds.
    pub fn require(mut self, cond: bool, note: &str) -> Self {
        if !cond {
            self.pass = false;
            self.notes.push(note.to_string());
        }
        self
    }

    /// Runs `recheck` only when the floating-point margin failed; a `Some`
    /// verdict from it replaces the floating-point one.
    pub fn with_recheck(mut self, recheck: impl FnOnce() -> Option<bool>) -> Self {
        if !self.pass && self.notes.is_empty() {
            if let Some(verdict) = recheck() {
                self.exact_recheck = Some(verdict);
                self.pass = verdict;
            }
        }
        self
    }

    /// Margin with identities folded to `-|margin|`, so smaller is worse for
    /// both kinds.
    pub fn signed_slack(&self) -> f64 {
        match self.kind {
            CheckKind::Inequality => self.margin,
            CheckKind::Identity => -self.margin.abs(),
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Aggregate over a batch of reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    #[serde(with = "float_repr")]
    pub worst_margin: f64,
    pub worst_check: Option<String>,
}

impl Summary {
    pub fn from_reports<'a>(reports: impl IntoIterator<Item = &'a CheckReport>) -> Self {
        let mut s = Summary {
            total: 0,
            passed: 0,
            failed: 0,
            worst_margin: f64::INFINITY,
            worst_check: None,
        };
        for r in reports {
            s.push(r);
        }
        s
    }

    pub fn push(&mut self, r: &CheckReport) {
        self.total += 1;
        if r.pass {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
        let slack = r.signed_slack();
        if slack < self.worst_margin || (slack.is_nan() && !self.worst_margin.is_nan()) {
            self.worst_margin = slack;
            self.worst_check = Some(r.check_name.clone());
        }
    }

    pub fn merge(&mut self, other: &Summary) {
        self.total += other.total;
        self.passed += other.passed;
        self.failed += other.failed;
        if other.worst_margin < self.worst_margin {
            self.worst_margin = other.worst_margin;
            self.worst_check = other.worst_check.clone();
        }
    }

    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }
}

/// Finite floats as JSON numbers; infinities and NaN as strings, which plain
/// JSON cannot carry.
mod float_repr {
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("bad float {other:?}"))),
            },
        }
    }

    pub(super) fn to_value(v: f64) -> serde_json::Value {
        if v.is_finite() {
            serde_json::json!(v)
        } else if v.is_nan() {
            serde_json::json!("nan")
        } else if v > 0.0 {
            serde_json::json!("inf")
        } else {
            serde_json::json!("-inf")
        }
    }
}

mod float_map {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
        let converted: BTreeMap<&String, serde_json::Value> =
            m.iter().map(|(k, v)| (k, super::float_repr::to_value(*v))).collect();
        converted.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
        let raw = BTreeMap::<String, serde_json::Value>::deserialize(d)?;
        raw.into_iter()
            .map(|(k, v)| {
                let f = match &v {
                    serde_json::Value::Number(n) => n.as_f64(),
                    serde_json::Value::String(t) => match t.as_str() {
                        "inf" => Some(f64::INFINITY),
                        "-inf" => Some(f64::NEG_INFINITY),
                        "nan" => Some(f64::NAN),
                        _ => None,
                    },
                    _ => None,
                };
                f.map(|f| (k, f))
                    .ok_or_else(|| serde::de::Error::custom("bad float in extras"))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inequality_judgement() {
        let tol = Tolerances::default();
        let ok = CheckReport::inequality("t", ReportParams::default(), Scale::Log, 1.0, 1.0 - 5e-10, &tol);
        assert!(ok.pass);
        let bad = CheckReport::inequality("t", ReportParams::default(), Scale::Log, 1.0, 1.0 - 2e-9, &tol);
        assert!(!bad.pass);
        let lin = CheckReport::inequality("t", ReportParams::default(), Scale::Linear, 1.0, 1.0 - 5e-10, &tol);
        assert!(!lin.pass);
        let nan = CheckReport::inequality("t", ReportParams::default(), Scale::Log, f64::NAN, 1.0, &tol);
        assert!(!nan.pass);
        let inf = CheckReport::inequality("t", ReportParams::default(), Scale::Log, f64::NEG_INFINITY, 1.0, &tol);
        assert!(inf.pass);
        assert_eq!(inf.margin, f64::INFINITY);
    }

    #[test]
    fn identity_judgement_is_two_sided() {
        let tol = Tolerances::default();
        let r = CheckReport::identity("t", ReportParams::default(), Scale::Log, 1.0, 1.0 + 2e-9, &tol);
        assert!(!r.pass);
        assert_eq!(r.signed_slack(), -r.margin.abs());
    }

    #[test]
    fn recheck_only_runs_on_failure() {
        let tol = Tolerances::default();
        let good = CheckReport::inequality("t", ReportParams::default(), Scale::Log, 0.0, 1.0, &tol)
            .with_recheck(|| panic!("must not run"));
        assert_eq!(good.exact_recheck, None);
        let rescued = CheckReport::inequality("t", ReportParams::default(), Scale::Log, 1.0, 0.0, &tol)
            .with_recheck(|| Some(true));
        assert!(rescued.pass);
        assert_eq!(rescued.exact_recheck, Some(true));
    }

    #[test]
    fn json_round_trip_with_infinities() {
        let tol = Tolerances::default();
        let r = CheckReport::inequality(
            "eq3",
            ReportParams::for_param(2, NoiseParam::new(1, 0).unwrap()).with_label("pair", 3),
            Scale::Log,
            f64::NEG_INFINITY,
            2.0,
            &tol,
        )
        .with_extra("gap", f64::INFINITY);
        let line = r.to_json_line();
        assert!(line.contains("\"lhs\":\"-inf\""));
        let back: CheckReport = serde_json::from_str(&line).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn summary_tracks_worst() {
        let tol = Tolerances::default();
        let a = CheckReport::inequality("a", ReportParams::default(), Scale::Log, 0.0, 1.0, &tol);
        let b = CheckReport::inequality("b", ReportParams::default(), Scale::Log, 0.0, 0.25, &tol);
        let c = CheckReport::inequality("c", ReportParams::default(), Scale::Log, 1.0, 0.0, &tol);
        let s = Summary::from_reports([&a, &b, &c]);
        assert_eq!((s.total, s.passed, s.failed), (3, 2, 1));
        assert_eq!(s.worst_margin, -1.0);
        assert_eq!(s.worst_check.as_deref(), Some("c"));
        assert!(!s.all_passed());
    }
}
