//! Machine-readable run reports (JSON and CSV).

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Identity,
    Inequality,
    EqualityCase,
}

impl CheckKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckKind::Identity => "identity",
            CheckKind::Inequality => "inequality",
            CheckKind::EqualityCase => "equality-case",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub kind: CheckKind,
    pub lhs: f64,
    pub rhs: f64,
    /// Residual for identities, slack for inequalities.
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub notes: String,
}

impl CheckReport {
    pub fn new(
        name: &str,
        kind: CheckKind,
        lhs: f64,
        rhs: f64,
        residual: f64,
        tolerance: f64,
        pass: bool,
    ) -> Self {
        CheckReport {
            name: name.to_string(),
            kind,
            lhs,
            rhs,
            residual,
            tolerance,
            pass,
            notes: String::new(),
        }
    }

    /// Passes when `residual ≤ tolerance`.
    pub fn identity(name: &str, lhs: f64, rhs: f64, residual: f64, tolerance: f64) -> Self {
        let pass = residual <= tolerance;
        CheckReport::new(
            name,
            CheckKind::Identity,
            lhs,
            rhs,
            residual,
            tolerance,
            pass,
        )
    }

    /// A check that could not run; reported as passing with the reason.
    pub fn skipped(name: &str, kind: CheckKind, tolerance: f64, reason: &str) -> Self {
        CheckReport::new(name, kind, 0.0, 0.0, 0.0, tolerance, true)
            .with_note(&format!("skipped: {reason}"))
    }

    pub fn with_note(mut self, note: &str) -> Self {
        if !self.notes.is_empty() {
            self.notes.push_str("; ");
        }
        self.notes.push_str(note);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub version: String,
    pub timestamp: String,
    pub config: serde_json::Value,
    pub checks: Vec<CheckReport>,
    pub pass: bool,
}

impl RunReport {
    pub fn new(
        timestamp: String,
        config: serde_json::Value,
        checks: Vec<CheckReport>,
    ) -> RunReport {
        let pass = checks.iter().all(|c| c.pass);
        RunReport {
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp,
            config,
            checks,
            pass,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "name",
            "kind",
            "lhs",
            "rhs",
            "residual",
            "tolerance",
            "pass",
        ])
        .expect("in-memory write");
        for c in &self.checks {
            w.write_record([
                c.name.clone(),
                c.kind.as_str().to_string(),
                fmt_float(c.lhs),
                fmt_float(c.rhs),
                fmt_float(c.residual),
                fmt_float(c.tolerance),
                c.pass.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

/// Shortest representation that round-trips (`NaN`/`inf` spelled out).
pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        serde_json::to_string(&x).expect("finite float serializes")
    } else {
        format!("{x}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunReport {
        let checks = vec![
            CheckReport::identity("gauss", 0.1, 0.1, 1.2345678901234567e-9, 1e-8),
            CheckReport::new(
                "main_inequality",
                CheckKind::Inequality,
                -1.0,
                0.0,
                1.0,
                1e-5,
                true,
            ),
            CheckReport::skipped(
                "prop3_inequality",
                CheckKind::Inequality,
                1e-6,
                "not certified",
            ),
        ];
        RunReport::new(
            "2020-01-01T00:00:00Z".into(),
            serde_json::json!({"surface": "x"}),
            checks,
        )
    }

    #[test]
    fn json_schema_and_round_trip() {
        let r = sample();
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        for key in ["version", "timestamp", "config", "checks", "pass"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        let c = &v["checks"][0];
        assert_eq!(c["kind"], "identity");
        assert_eq!(c["residual"].as_f64().unwrap(), 1.2345678901234567e-9);
        assert_eq!(v["checks"][1]["lhs"].as_f64().unwrap(), -1.0);
        assert_eq!(v["checks"][2]["notes"], "skipped: not certified");
        assert_eq!(v["pass"], true);
    }

    #[test]
    fn overall_pass_is_conjunction() {
        let mut r = sample();
        r.checks
            .push(CheckReport::identity("bad", 1.0, 0.0, 1.0, 1e-3));
        let r = RunReport::new(r.timestamp, r.config, r.checks);
        assert!(!r.pass);
    }

    #[test]
    fn csv_layout() {
        let csv = sample().to_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "name,kind,lhs,rhs,residual,tolerance,pass"
        );
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[..4], ["gauss", "identity", "0.1", "0.1"]);
        assert_eq!(row[4].parse::<f64>().unwrap(), 1.2345678901234567e-9);
        assert_eq!(row[5..], ["1e-8", "true"]);
        assert_eq!(fmt_float(0.1 + 0.2), "0.30000000000000004");
    }
}
