//! Report assembly and deterministic serialization.

use std::collections::BTreeMap;
use std::time::Instant;

use condmeas_core::{MeasureResult, Tolerances, VerificationReport};
use serde_json::{Map, Number, Value};
use sha2::{Digest, Sha256};

/// Reports are JSON objects with sorted keys; floats carry 17 significant
/// digits so every double round-trips.
pub struct ReportDocument {
    pub command: &'static str,
    pub input: Value,
    pub tolerances: Tolerances,
    pub seed: Option<u64>,
    pub measures: Vec<MeasureResult>,
    pub verifications: Vec<VerificationReport>,
    pub warnings: Vec<String>,
    pub result: Map<String, Value>,
    pub timings: Option<BTreeMap<String, f64>>,
}

impl ReportDocument {
    pub fn new(command: &'static str, path: &str, bytes: &[u8], a: &condmeas_core::Matrix, tol: Tolerances) -> Self {
        let digest = Sha256::digest(bytes);
        let sha256: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        let input = serde_json::json!({
            "path": path,
            "m": a.rows(),
            "n": a.cols(),
            "sha256": sha256,
            "rows": a.to_rows(),
        });
        Self {
            command,
            input,
            tolerances: tol,
            seed: None,
            measures: Vec::new(),
            verifications: Vec::new(),
            warnings: Vec::new(),
            result: Map::new(),
            timings: None,
        }
    }

    pub fn all_pass(&self) -> bool {
        self.verifications.iter().all(|r| r.pass)
    }

    pub fn warn(&mut self, w: impl Into<String>) {
        let w = w.into();
        if !self.warnings.contains(&w) {
            self.warnings.push(w);
        }
    }

    pub fn to_value(&self) -> Value {
        let mut doc = Map::new();
        doc.insert("command".into(), self.command.into());
        doc.insert("input".into(), self.input.clone());
        doc.insert("tolerances".into(), to_value(&self.tolerances));
        doc.insert("seed".into(), self.seed.map_or(Value::Null, Value::from));
        doc.insert("measures".into(), to_value(&self.measures));
        doc.insert("verifications".into(), to_value(&self.verifications));
        doc.insert("warnings".into(), to_value(&self.warnings));
        doc.insert("result".into(), Value::Object(self.result.clone()));
        doc.insert(
            "status".into(),
            if self.all_pass() { "pass" } else { "fail" }.into(),
        );
        if let Some(t) = &self.timings {
            doc.insert("timings_ms".into(), to_value(t));
        }
        canonical(Value::Object(doc))
    }

    pub fn render(&self, pretty: bool) -> String {
        let v = self.to_value();
        let mut s = if pretty {
            serde_json::to_string_pretty(&v)
        } else {
            serde_json::to_string(&v)
        }
        .expect("JSON values always serialize");
        s.push('\n');
        s
    }
}

pub fn to_value<T: serde::Serialize + ?Sized>(x: &T) -> Value {
    serde_json::to_value(x).expect("report types serialize to JSON")
}

/// Rewrites every floating-point number with 17 significant digits in
/// scientific notation.
pub fn canonical(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("finite float");
            let text = format!("{x:.16e}");
            Value::Number(text.parse::<Number>().expect("scientific notation is valid JSON"))
        }
        Value::Array(a) => Value::Array(a.into_iter().map(canonical).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, canonical(v))).collect()),
        other => other,
    }
}

/// Wall-clock phase timer; only consulted when timings are requested.
pub struct Phases {
    enabled: bool,
    start: Instant,
    done: BTreeMap<String, f64>,
}

impl Phases {
    pub fn new(enabled: bool) -> Self {
        Self {
            enabled,
            start: Instant::now(),
            done: BTreeMap::new(),
        }
    }

    pub fn mark(&mut self, name: &str) {
        if self.enabled {
            let now = Instant::now();
            self.done
                .insert(name.into(), (now - self.start).as_secs_f64() * 1e3);
            self.start = now;
        }
    }

    pub fn finish(self) -> Option<BTreeMap<String, f64>> {
        self.enabled.then_some(self.done)
    }
}
