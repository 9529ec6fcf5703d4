//! Verification reports: named rows with a value, a bound and a verdict,
//! emitted as CSV or versioned JSON.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Non-finite values are written as the strings `inf`, `-inf`, `nan`.
pub fn serialize_real<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
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

/// Serde adapter for `f64` fields that may hold `±∞`: writes as
/// [`serialize_real`], reads numbers or the strings `inf`, `-inf`, `nan`.
pub mod real {
    use serde::de::{self, Deserializer, Visitor};
    use serde::Serializer;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        super::serialize_real(v, s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        struct Real;
        impl Visitor<'_> for Real {
            type Value = f64;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a number or one of \"inf\", \"-inf\", \"nan\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
                Ok(v)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
                Ok(v as f64)
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
                Ok(v as f64)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
                match v {
                    "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
                    "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
                    "nan" => Ok(f64::NAN),
                    _ => v.parse().map_err(|_| E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }
        d.deserialize_any(Real)
    }
}

/// One checked quantity. `pass` means `value ≤ bound·(1 + tolerance)`
/// unless the row was built with an explicit verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub name: String,
    pub params: String,
    #[serde(serialize_with = "serialize_real")]
    pub value: f64,
    #[serde(serialize_with = "serialize_real")]
    pub bound: f64,
    #[serde(serialize_with = "serialize_real")]
    pub tolerance: f64,
    pub pass: bool,
    pub witness: String,
}

impl ReportRow {
    /// Row asserting `value ≤ bound·(1 + tolerance)`. NaN never passes.
    pub fn at_most(name: impl Into<String>, params: impl Into<String>, value: f64, bound: f64, tolerance: f64) -> ReportRow {
        let pass = value <= bound * (1.0 + tolerance) || (value == bound);
        ReportRow {
            name: name.into(),
            params: params.into(),
            value,
            bound,
            tolerance,
            pass,
            witness: String::new(),
        }
    }

    /// Informational or externally decided row.
    pub fn verdict(name: impl Into<String>, params: impl Into<String>, value: f64, pass: bool) -> ReportRow {
        ReportRow {
            name: name.into(),
            params: params.into(),
            value,
            bound: f64::NAN,
            tolerance: 0.0,
            pass,
            witness: String::new(),
        }
    }

    pub fn with_witness(mut self, witness: impl Into<String>) -> ReportRow {
        self.witness = witness.into();
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Report {
    pub schema: u32,
    pub title: String,
    pub meta: BTreeMap<String, String>,
    pub rows: Vec<ReportRow>,
}

impl Report {
    pub fn new(title: impl Into<String>) -> Report {
        Report {
            schema: SCHEMA_VERSION,
            title: title.into(),
            meta: BTreeMap::new(),
            rows: Vec::new(),
        }
    }

    pub fn set_meta(&mut self, key: impl Into<String>, value: impl ToString) {
        self.meta.insert(key.into(), value.to_string());
    }

    pub fn push(&mut self, row: ReportRow) {
        self.rows.push(row);
    }

    pub fn extend(&mut self, other: Report) {
        self.rows.extend(other.rows);
    }

    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| !r.pass)
    }

    /// Rows whose name starts with `prefix`.
    pub fn rows_named<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a ReportRow> + 'a {
        self.rows.iter().filter(move |r| r.name.starts_with(prefix))
    }

    /// Largest finite `value` among rows named with `prefix`.
    pub fn max_value(&self, prefix: &str) -> Option<f64> {
        self.rows_named(prefix).map(|r| r.value).fold(None, |m, v| match m {
            None => Some(v),
            Some(m) => Some(if v > m || v.is_nan() { v } else { m }),
        })
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row)?;
        }
        if self.rows.is_empty() {
            w.write_record(["name", "params", "value", "bound", "tolerance", "pass", "witness"])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::param(format!("csv flush: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv_path = dir.join(format!("{stem}.csv"));
        let json_path = dir.join(format!("{stem}.json"));
        fs::write(&csv_path, self.to_csv()?).map_err(|e| Error::io(&csv_path, e))?;
        fs::write(&json_path, self.to_json()?).map_err(|e| Error::io(&json_path, e))?;
        Ok((csv_path, json_path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(serde::Serialize, serde::Deserialize)]
    struct Wrap(#[serde(with = "real")] f64);

    #[test]
    fn real_adapter_round_trips() {
        for v in [0.1, -3.0, f64::INFINITY, f64::NEG_INFINITY, 1.8527683955273517] {
            let text = serde_json::to_string(&Wrap(v)).unwrap();
            assert_eq!(serde_json::from_str::<Wrap>(&text).unwrap().0, v);
        }
        assert!(serde_json::from_str::<Wrap>("\"nan\"").unwrap().0.is_nan());
        assert_eq!(serde_json::from_str::<Wrap>("2").unwrap().0, 2.0);
        assert!(serde_json::from_str::<Wrap>("\"lots\"").is_err());
    }

    #[test]
    fn infinite_values_serialize_as_strings() {
        let mut r = Report::new("t");
        r.push(ReportRow::at_most("a", "p=1", f64::INFINITY, 1.0, 0.0));
        r.push(ReportRow::at_most("b", "", 0.5, 1.0, 0.0));
        let json = r.to_json().unwrap();
        assert!(json.contains("\"value\": \"inf\""));
        assert!(json.contains("\"schema\": 1"));
        let csv = r.to_csv().unwrap();
        assert!(csv.lines().next().unwrap().starts_with("name,params,value"));
        assert!(csv.contains("a,p=1,inf,1.0,0.0,false"));
        assert!(!r.all_pass());
        assert_eq!(r.failures().count(), 1);
        assert_eq!(r.max_value("b"), Some(0.5));
    }

    #[test]
    fn nan_never_passes() {
        assert!(!ReportRow::at_most("x", "", f64::NAN, 1.0, 0.1).pass);
        assert!(ReportRow::at_most("x", "", f64::INFINITY, f64::INFINITY, 0.0).pass);
    }
}
