//! Rectangular numeric tables with provenance metadata.

use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Result, VoiError};

/// Provenance carried by every table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMeta {
    pub spec: Value,
    pub spec_hash: String,
    pub seed: u64,
    pub units: String,
    /// Free-form extras such as summary statistics.
    #[serde(default, skip_serializing_if = "Map::is_empty")]
    pub extra: Map<String, Value>,
}

impl TableMeta {
    /// Metadata for an ad-hoc table described by `spec`, in nats.
    pub fn for_spec(spec: Value, seed: u64) -> Self {
        let bytes = serde_json::to_vec(&spec).expect("json value serializes");
        Self {
            spec_hash: hex::encode(Sha256::digest(bytes)),
            spec,
            seed,
            units: "nats".into(),
            extra: Map::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataTable {
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
    pub meta: TableMeta,
}

impl DataTable {
    pub fn new(columns: Vec<String>, rows: Vec<Vec<f64>>, meta: TableMeta) -> Result<Self> {
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != columns.len()) {
            return Err(VoiError::DimensionMismatch(format!(
                "row {i} has {} values for {} columns",
                r.len(),
                columns.len()
            )));
        }
        Ok(Self { columns, rows, meta })
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Values of the named column, or `None` if absent.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    /// Header plus one record per row. Non-finite values are written empty.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| if v.is_finite() { format!("{v}") } else { String::new() }))?;
        }
        w.flush()
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    /// `{"meta": {...}, "rows": [{column: value, ...}, ...]}`; NaN becomes null.
    pub fn to_json(&self) -> Value {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let rec: Map<String, Value> = self
                    .columns
                    .iter()
                    .zip(r)
                    .map(|(c, v)| (c.clone(), serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number)))
                    .collect();
                Value::Object(rec)
            })
            .collect();
        serde_json::json!({
            "meta": serde_json::to_value(&self.meta).expect("metadata serializes"),
            "rows": Value::Array(rows),
        })
    }
}
