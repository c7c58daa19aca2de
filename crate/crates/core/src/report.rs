//! Run reports: JSON with a hashed deterministic section, and a flat CSV.
//!
//! Every float is written with 17 significant digits. The hash covers the
//! command, configuration, results, rows, verdicts, version and seed; the
//! timestamp sits outside it. Non-finite floats serialize as `null`.

use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{Map, Number, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Version tag of the CSV column layout.
pub const CSV_SCHEMA: &str = "ehrhard-report/1";
pub const CSV_HEADER: [&str; 7] = [
    "schema",
    "experiment",
    "parameters",
    "quantity",
    "value",
    "uncertainty",
    "uncertainty_kind",
];

/// What the `uncertainty` column of a row means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Uncertainty {
    /// Monte Carlo standard error.
    StdErr,
    /// Difference to the next coarser quadrature rule.
    Quadrature,
    /// Quadrature order used; no error estimate.
    Order,
    /// Closed form or exact arithmetic.
    Exact,
}

#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub experiment: String,
    /// `key=value` pairs joined by `;`.
    pub parameters: String,
    pub quantity: String,
    pub value: f64,
    pub uncertainty: f64,
    pub uncertainty_kind: Uncertainty,
}

impl Row {
    pub fn new(experiment: &str, parameters: &[(&str, f64)], quantity: &str, value: f64) -> Self {
        let parameters = parameters
            .iter()
            .map(|(k, v)| format!("{k}={}", fmt17(*v)))
            .collect::<Vec<_>>()
            .join(";");
        Self {
            experiment: experiment.into(),
            parameters,
            quantity: quantity.into(),
            value,
            uncertainty: 0.0,
            uncertainty_kind: Uncertainty::Exact,
        }
    }

    pub fn with_uncertainty(mut self, u: f64, kind: Uncertainty) -> Self {
        self.uncertainty = u;
        self.uncertainty_kind = kind;
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NamedVerdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub command: Vec<String>,
    pub config: Map<String, Value>,
    pub results: Map<String, Value>,
    pub rows: Vec<Row>,
    pub verdicts: Vec<NamedVerdict>,
    pub seed: Option<u64>,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

/// Shortest-free 17-significant-digit rendering, e.g. `2.9999999999999999e-1`.
pub fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map(normalize).map_err(|e| Error::Precondition(format!("report value: {e}")))
}

/// Rewrites every float in `v` at 17 significant digits.
fn normalize(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("finite float");
            serde_json::from_str::<Number>(&fmt17(x)).map(Value::Number).unwrap_or(Value::Null)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(normalize).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, normalize(v))).collect()),
        other => other,
    }
}

impl RunReport {
    pub fn new<S: AsRef<str>>(command: &[S]) -> Self {
        let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        Self {
            command: command.iter().map(|s| s.as_ref().to_string()).collect(),
            config: Map::new(),
            results: Map::new(),
            rows: Vec::new(),
            verdicts: Vec::new(),
            seed: None,
            timestamp,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn config<T: Serialize>(&mut self, key: &str, value: &T) -> Result<&mut Self> {
        self.config.insert(key.into(), to_value(value)?);
        Ok(self)
    }

    pub fn result<T: Serialize>(&mut self, key: &str, value: &T) -> Result<&mut Self> {
        self.results.insert(key.into(), to_value(value)?);
        Ok(self)
    }

    pub fn row(&mut self, row: Row) -> &mut Self {
        self.rows.push(row);
        self
    }

    pub fn verdict(&mut self, name: &str, pass: bool, detail: impl Into<String>) -> &mut Self {
        self.verdicts.push(NamedVerdict {
            name: name.into(),
            pass,
            detail: detail.into(),
        });
        self
    }

    /// True when every recorded verdict passed.
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    fn hashed(&self) -> Value {
        let mut m = Map::new();
        m.insert("command".into(), Value::from(self.command.clone()));
        m.insert("version".into(), Value::from(env!("CARGO_PKG_VERSION")));
        m.insert("seed".into(), self.seed.map_or(Value::Null, Value::from));
        m.insert("config".into(), Value::Object(self.config.clone()));
        m.insert("results".into(), Value::Object(self.results.clone()));
        m.insert("rows".into(), to_value(&self.rows).unwrap_or(Value::Null));
        m.insert("verdicts".into(), to_value(&self.verdicts).unwrap_or(Value::Null));
        Value::Object(m)
    }

    /// Compact JSON of the deterministic section.
    pub fn hashed_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(&self.hashed()).expect("values serialize")
    }

    /// Lowercase hex SHA-256 of [`RunReport::hashed_bytes`].
    pub fn hash(&self) -> String {
        Sha256::digest(self.hashed_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_json(&self) -> String {
        let mut m = Map::new();
        m.insert("report".into(), self.hashed());
        m.insert("sha256".into(), Value::from(self.hash()));
        m.insert("timestamp".into(), Value::from(self.timestamp));
        m.insert("passed".into(), Value::from(self.passed()));
        let mut s = serde_json::to_string_pretty(&Value::Object(m)).expect("values serialize");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Precondition(format!("csv: {e}"));
        w.write_record(CSV_HEADER).map_err(io)?;
        for r in &self.rows {
            let kind = match r.uncertainty_kind {
                Uncertainty::StdErr => "std_err",
                Uncertainty::Quadrature => "quadrature",
                Uncertainty::Order => "order",
                Uncertainty::Exact => "exact",
            };
            w.write_record([
                CSV_SCHEMA,
                &r.experiment,
                &r.parameters,
                &r.quantity,
                &fmt17(r.value),
                &fmt17(r.uncertainty),
                kind,
            ])
            .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Precondition(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv writes utf-8"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(timestamp: u64) -> RunReport {
        let mut r = RunReport::new(&["limits", "--x", "0.5"]).with_seed(7);
        r.timestamp = timestamp;
        r.config("x", &0.5).unwrap();
        r.result("values", &vec![0.1, 1.0 / 3.0, f64::INFINITY]).unwrap();
        r.row(Row::new("limits", &[("c", 1e-4)], "ratio", 0.3).with_uncertainty(1e-16, Uncertainty::Quadrature));
        r.verdict("monotone", true, "");
        r
    }

    #[test]
    fn floats_carry_seventeen_digits() {
        assert_eq!(fmt17(0.3), "2.9999999999999999e-1");
        assert_eq!(fmt17(0.3).parse::<f64>().unwrap(), 0.3);
        let json = sample(0).to_json();
        assert!(json.contains("3.3333333333333331e-1"), "{json}");
        assert!(json.contains("null"));
    }

    #[test]
    fn hash_ignores_the_timestamp() {
        let (a, b) = (sample(1), sample(2));
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.to_json(), b.to_json());
        let mut c = sample(1);
        c.verdict("extra", false, "x");
        assert_ne!(a.hash(), c.hash());
        assert!(!c.passed());
    }

    #[test]
    fn csv_has_a_versioned_header() {
        let csv = sample(0).to_csv().unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
        assert_eq!(
            lines.next().unwrap(),
            "ehrhard-report/1,limits,c=1.0000000000000000e-4,ratio,2.9999999999999999e-1,9.9999999999999998e-17,quadrature"
        );
    }
}
