use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;
use serde_json::Value;

use super::plan::ExperimentKind;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub experiment: String,
    pub kind: ExperimentKind,
    pub estimate: f64,
    pub stderr: Option<f64>,
    pub oracle: Option<f64>,
    /// `(estimate - oracle) / stderr`.
    pub z: Option<f64>,
    pub replicas: usize,
    /// Replicas that contributed (not censored).
    pub used: usize,
    pub censoring_rate: f64,
    pub params: Value,
    pub diagnostics: BTreeMap<String, Value>,
    pub warnings: Vec<String>,
}

impl EstimateReport {
    pub fn new(experiment: &str, kind: ExperimentKind, params: Value) -> Self {
        Self {
            experiment: experiment.to_string(),
            kind,
            estimate: f64::NAN,
            stderr: None,
            oracle: None,
            z: None,
            replicas: 0,
            used: 0,
            censoring_rate: 0.0,
            params,
            diagnostics: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    pub fn set_estimate(&mut self, estimate: f64, stderr: Option<f64>, oracle: Option<f64>) {
        self.estimate = estimate;
        self.stderr = stderr.filter(|s| s.is_finite());
        self.oracle = oracle;
        self.z = match (self.stderr, oracle) {
            (Some(s), Some(o)) if s > 0.0 => Some((estimate - o) / s),
            _ => None,
        };
    }

    pub fn set_counts(&mut self, replicas: usize, used: usize) {
        self.replicas = replicas;
        self.used = used;
        self.censoring_rate = if replicas == 0 {
            0.0
        } else {
            (replicas - used) as f64 / replicas as f64
        };
    }

    pub fn diag(&mut self, key: &str, value: impl Serialize) {
        self.diagnostics
            .insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    pub fn diag_f64(&self, key: &str) -> Option<f64> {
        self.diagnostics.get(key).and_then(Value::as_f64)
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        self.warnings.push(msg.into());
    }

    /// One-line human summary.
    pub fn summary_line(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("NA".to_string(), |x| format!("{x:.6}"));
        format!(
            "{} [{}]: estimate={:.6} stderr={} oracle={} z={} censoring={:.4}",
            self.experiment,
            self.kind.name(),
            self.estimate,
            opt(self.stderr),
            opt(self.oracle),
            self.z.map_or("NA".to_string(), |x| format!("{x:.3}")),
            self.censoring_rate
        )
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).unwrap_or(Value::Null)
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}

/// Numeric table written as CSV with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(&self.columns)?;
        for r in &self.rows {
            // `{}` on f64 is the shortest round-tripping form
            wr.write_record(r.iter().map(|v| format!("{v}")))?;
        }
        wr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub report: EstimateReport,
    pub tables: Vec<Table>,
}

impl ExperimentOutput {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn z_score_and_censoring() {
        let mut r = EstimateReport::new("x", ExperimentKind::Lln, Value::Null);
        r.set_estimate(1.2, Some(0.1), Some(1.0));
        assert!((r.z.unwrap() - 2.0).abs() < 1e-12);
        r.set_counts(10, 9);
        assert!((r.censoring_rate - 0.1).abs() < 1e-15);
        r.set_estimate(1.0, Some(0.0), Some(1.0));
        assert_eq!(r.z, None);
    }

    #[test]
    fn table_csv() {
        let mut t = Table::new("t", &["a", "b"]);
        t.push(vec![1.0, 0.5]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "a,b\n1,0.5\n");
    }

    #[test]
    fn json_summary_has_contract_fields() {
        let r = EstimateReport::new("x", ExperimentKind::Clt, serde_json::json!({"n": 1}));
        let v = r.to_json();
        for k in ["estimate", "stderr", "oracle", "z", "censoring_rate", "params"] {
            assert!(v.get(k).is_some(), "{k}");
        }
    }
}
