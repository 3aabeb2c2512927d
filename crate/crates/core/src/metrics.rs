//! JSON-lines metrics: one object per logging step, fields in insertion
//! order, a strictly increasing `step` field first, and no timestamps — so
//! two identical runs emit byte-identical files.

use std::path::Path;

use crate::checkpoint::atomic_write_bytes;
use crate::{Error, Result};

/// A scalar metric value.
#[derive(Clone, Debug)]
pub enum MetricValue {
    Int(u64),
    Float(f64),
    Text(String),
}

impl From<u64> for MetricValue {
    fn from(v: u64) -> Self {
        MetricValue::Int(v)
    }
}

impl From<usize> for MetricValue {
    fn from(v: usize) -> Self {
        MetricValue::Int(v as u64)
    }
}

impl From<f64> for MetricValue {
    fn from(v: f64) -> Self {
        MetricValue::Float(v)
    }
}

impl From<&str> for MetricValue {
    fn from(v: &str) -> Self {
        MetricValue::Text(v.to_string())
    }
}

fn encode(v: &MetricValue) -> Result<String> {
    Ok(match v {
        MetricValue::Int(i) => i.to_string(),
        MetricValue::Float(f) => {
            let n = serde_json::Number::from_f64(*f)
                .ok_or_else(|| Error::Numeric(format!("non-finite metric value {f}")))?;
            n.to_string()
        }
        MetricValue::Text(s) => serde_json::to_string(s).expect("string encodes"),
    })
}

/// Accumulates metric records and writes them as one atomic file.
#[derive(Default)]
pub struct MetricsFile {
    lines: Vec<String>,
    last_step: Option<u64>,
}

impl MetricsFile {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append one record. Steps must strictly increase.
    pub fn record(&mut self, step: u64, fields: &[(&str, MetricValue)]) -> Result<()> {
        if let Some(last) = self.last_step {
            if step <= last {
                return Err(Error::Contract(format!(
                    "metrics steps must increase: {step} after {last}"
                )));
            }
        }
        let mut line = format!("{{\"step\":{step}");
        for (name, value) in fields {
            line.push(',');
            line.push_str(&serde_json::to_string(name).expect("key encodes"));
            line.push(':');
            line.push_str(&encode(value)?);
        }
        line.push('}');
        self.lines.push(line);
        self.last_step = Some(step);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut s = self.lines.join("\n");
        if !s.is_empty() {
            s.push('\n');
        }
        s
    }

    /// Write all records atomically.
    pub fn write(&self, path: &Path) -> Result<()> {
        atomic_write_bytes(path, self.to_text().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lines_keep_field_order_and_step_first() {
        let mut m = MetricsFile::new();
        m.record(1, &[("main", 0.5.into()), ("rank", 3usize.into())]).unwrap();
        m.record(100, &[("main", 0.25.into()), ("note", "ok".into())]).unwrap();
        let text = m.to_text();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], r#"{"step":1,"main":0.5,"rank":3}"#);
        assert_eq!(lines[1], r#"{"step":100,"main":0.25,"note":"ok"}"#);
        // Each line is valid JSON.
        for l in lines {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            assert!(v.get("step").is_some());
        }
    }

    #[test]
    fn steps_must_increase() {
        let mut m = MetricsFile::new();
        m.record(5, &[]).unwrap();
        assert!(m.record(5, &[]).is_err());
        assert!(m.record(4, &[]).is_err());
        m.record(6, &[]).unwrap();
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let mut m = MetricsFile::new();
        assert!(m.record(1, &[("x", f64::NAN.into())]).is_err());
    }

    #[test]
    fn file_writes_are_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.jsonl");
        let p2 = dir.path().join("b.jsonl");
        for p in [&p1, &p2] {
            let mut m = MetricsFile::new();
            m.record(1, &[("loss", 0.125.into())]).unwrap();
            m.record(2, &[("loss", 0.0625.into())]).unwrap();
            m.write(p).unwrap();
        }
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }
}
