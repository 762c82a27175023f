use serde::Serialize;
use serde_json::Value;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub summary: String,
    /// Locates a failure: a point, a cell or stratum id, or an ε.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Value>,
    pub details: Value,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, summary: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            summary: summary.into(),
            witness: None,
            details: Value::Null,
        }
    }

    pub fn witness(mut self, w: Value) -> Self {
        if !self.pass {
            self.witness = Some(w);
        }
        self
    }

    pub fn details(mut self, d: impl Serialize) -> Self {
        self.details = serde_json::to_value(d).unwrap_or(Value::Null);
        self
    }

    /// A failed check carrying the error as its witness.
    pub fn error(name: impl Into<String>, err: &strataforms::Error) -> Self {
        let msg = err.to_string();
        Check::new(name, false, msg.clone()).witness(error_witness(err))
    }
}

pub fn error_witness(err: &strataforms::Error) -> Value {
    use strataforms::Error;
    match err {
        Error::NotConeInvariant { stratum, witness } => {
            serde_json::json!({ "stratum": stratum, "point": witness })
        }
        Error::DelimiterCrossing(p) => serde_json::json!({ "point": p }),
        Error::DecayAuditFailed {
            point,
            value,
            bound,
        } => {
            serde_json::json!({ "point": point, "value": value, "bound": bound })
        }
        Error::RadiusTooLarge { radius, side } => {
            serde_json::json!({ "eps": radius, "side": side })
        }
        Error::StratumStraddle(c) | Error::UnknownCell(c) | Error::MissingFace(c) => {
            serde_json::json!({ "cell": c })
        }
        e => serde_json::json!({ "error": e.to_string() }),
    }
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub tool: String,
    pub command: String,
    pub project: String,
    pub seed: u64,
    pub tol: f64,
    pub pass: bool,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let tag = if c.pass { "PASS" } else { "FAIL" };
            out.push_str(&format!("{tag} {}: {}", c.name, c.summary));
            if let Some(w) = &c.witness {
                out.push_str(&format!(" [witness {w}]"));
            }
            out.push('\n');
        }
        let passed = self.checks.iter().filter(|c| c.pass).count();
        out.push_str(&format!(
            "{} {passed}/{} checks passed\n",
            self.command,
            self.checks.len()
        ));
        out
    }
}
