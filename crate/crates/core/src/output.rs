//! Output formatting shared by every artifact: round-trippable floats,
//! `inf`/`-inf` sentinels and NaN rejection.

use std::fmt::Write as _;

use serde::ser::Error as _;
use serde::{Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OutputError {
    #[error("NaN in column {column}")]
    NaN { column: String },
    #[error("row has {found} cells, header has {expected}")]
    RaggedRow { expected: usize, found: usize },
}

/// Formats a float with 17 significant digits; infinities become
/// `inf`/`-inf`. NaN is rejected.
pub fn format_f64(x: f64) -> Option<String> {
    if x.is_nan() {
        None
    } else if x == f64::INFINITY {
        Some("inf".to_string())
    } else if x == f64::NEG_INFINITY {
        Some("-inf".to_string())
    } else {
        Some(format!("{x:.16e}"))
    }
}

/// Serde adapter: finite floats stay numbers, infinities become the
/// strings `"inf"`/`"-inf"`, NaN fails serialization.
pub mod ext_f64 {
    use super::*;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_nan() {
            Err(S::Error::custom("NaN is not a valid output value"))
        } else if x.is_infinite() {
            s.serialize_str(if *x > 0.0 { "inf" } else { "-inf" })
        } else {
            s.serialize_f64(*x)
        }
    }
}

/// [`ext_f64`] for `Vec<f64>`.
pub mod ext_f64_vec {
    use super::*;
    use serde::ser::SerializeSeq;

    pub fn serialize<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(xs.len()))?;
        for x in xs {
            seq.serialize_element(&Ext(*x))?;
        }
        seq.end()
    }
}

/// [`ext_f64`] for `Option<f64>`.
pub mod ext_f64_opt {
    use super::*;

    pub fn serialize<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match x {
            Some(v) => s.serialize_some(&Ext(*v)),
            None => s.serialize_none(),
        }
    }
}

/// A float serialized through [`ext_f64`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ext(pub f64);

impl Serialize for Ext {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ext_f64::serialize(&self.0, s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::Int(x)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Text(if x { "true" } else { "false" }.to_string())
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

/// A CSV table with a fixed header. Cells never contain commas.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<(), OutputError> {
        if row.len() != self.header.len() {
            return Err(OutputError::RaggedRow {
                expected: self.header.len(),
                found: row.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String, OutputError> {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                match cell {
                    Cell::Float(x) => {
                        let s = format_f64(*x).ok_or_else(|| OutputError::NaN {
                            column: self.header[i].clone(),
                        })?;
                        out.push_str(&s);
                    }
                    Cell::Int(v) => {
                        let _ = write!(out, "{v}");
                    }
                    Cell::Text(s) => out.push_str(&s.replace(',', ";")),
                }
            }
            out.push('\n');
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            let s = format_f64(x).unwrap();
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(format_f64(f64::INFINITY).unwrap(), "inf");
        assert_eq!(format_f64(f64::NEG_INFINITY).unwrap(), "-inf");
        assert_eq!(format_f64(f64::NAN), None);
    }

    #[test]
    fn json_sentinels() {
        #[derive(Serialize)]
        struct S {
            #[serde(with = "ext_f64")]
            a: f64,
            #[serde(with = "ext_f64_vec")]
            b: Vec<f64>,
        }
        let s = S { a: f64::NEG_INFINITY, b: vec![1.5, f64::INFINITY] };
        assert_eq!(serde_json::to_string(&s).unwrap(), r#"{"a":"-inf","b":[1.5,"inf"]}"#);
        let bad = S { a: f64::NAN, b: vec![] };
        assert!(serde_json::to_string(&bad).is_err());
    }

    #[test]
    fn csv_rendering() {
        let mut t = Table::new(["n", "x", "label"]);
        t.push(vec![3usize.into(), 0.5.into(), "a,b".into()]).unwrap();
        assert_eq!(t.to_csv().unwrap(), "n,x,label\n3,5.0000000000000000e-1,a;b\n");
        assert!(t.push(vec![1usize.into()]).is_err());
        t.push(vec![1usize.into(), f64::NAN.into(), "c".into()]).unwrap();
        assert_eq!(t.to_csv(), Err(OutputError::NaN { column: "x".into() }));
    }
}
