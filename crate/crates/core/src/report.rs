//! Report serialization and baseline ingestion.
//!
//! Every float is written with 17 significant digits in scientific notation
//! (`{:.16e}`), which round-trips any `f64` and keeps output byte-stable.

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use std::io::{self, Write};
use std::path::Path;
use thiserror::Error;

use crate::dist::{AtomList, DiscreteDistribution, DistError};
use crate::scenario::ScenarioSet;
use crate::solver::SweepRow;

#[derive(Debug, Error)]
pub enum InputError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("unsupported input extension for {0} (expected .csv or .json)")]
    UnknownFormat(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("csv header has no `value` column")]
    MissingValueColumn,
    #[error(transparent)]
    Dist(#[from] DistError),
}

/// Formats a float the way every report does.
pub fn format_f64(value: f64) -> String {
    format!("{value:.16e}")
}

/// Pretty JSON with fixed 17-significant-digit floats.
struct ReportFormatter<'a> {
    inner: PrettyFormatter<'a>,
}

impl Formatter for ReportFormatter<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            writer.write_all(format_f64(value).as_bytes())
        } else {
            writer.write_all(b"null")
        }
    }

    fn begin_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_array(writer)
    }

    fn end_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object(writer)
    }

    fn end_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object_value(writer)
    }
}

/// Serializes `value` as a pretty JSON document terminated by a newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let formatter = ReportFormatter {
        inner: PrettyFormatter::new(),
    };
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, formatter);
    value.serialize(&mut ser).expect("report types serialize infallibly");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

fn csv_string(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8")
}

/// `lambda,a_star,phi_star,kl`
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    csv_string(
        &["lambda", "a_star", "phi_star", "kl"],
        rows.iter().map(|r| {
            [r.lambda, r.a_star, r.phi_star, r.kl]
                .map(format_f64)
                .to_vec()
        }),
    )
}

/// Single `scenario` column.
pub fn scenarios_csv(set: &ScenarioSet) -> String {
    csv_string(&["scenario"], set.draws.iter().map(|&d| vec![format_f64(d)]))
}

/// `value,weight`
pub fn weights_csv(values: &[f64], weights: &[f64]) -> String {
    csv_string(
        &["value", "weight"],
        values
            .iter()
            .zip(weights)
            .map(|(&v, &w)| vec![format_f64(v), format_f64(w)]),
    )
}

/// Reads a baseline from `.csv` or `.json`, returning it with the raw bytes.
pub fn read_distribution(path: &Path) -> Result<(DiscreteDistribution, Vec<u8>), InputError> {
    let bytes = std::fs::read(path).map_err(|source| InputError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    let dist = match ext.as_deref() {
        Some("csv") => parse_csv(&bytes)?,
        Some("json") => parse_json(&bytes)?,
        _ => return Err(InputError::UnknownFormat(path.display().to_string())),
    };
    Ok((dist, bytes))
}

/// JSON `{"values": [...], "probs": [...]}`.
pub fn parse_json(bytes: &[u8]) -> Result<DiscreteDistribution, InputError> {
    let list: AtomList = serde_json::from_slice(bytes)?;
    Ok(DiscreteDistribution::try_from(list)?)
}

/// CSV with a `value` column and optional `weight` column. The header row is
/// optional; without one, column 1 is the value and column 2 the weight.
pub fn parse_csv(bytes: &[u8]) -> Result<DiscreteDistribution, InputError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut records = reader.records().peekable();

    let mut value_col = 0;
    let mut weight_col = None;
    let mut first_line = 1;
    if let Some(Ok(first)) = records.peek() {
        let is_header = first.get(0).is_some_and(|f| f.parse::<f64>().is_err());
        if is_header {
            let names: Vec<String> = first.iter().map(str::to_ascii_lowercase).collect();
            value_col = names
                .iter()
                .position(|n| n == "value")
                .ok_or(InputError::MissingValueColumn)?;
            weight_col = names.iter().position(|n| n == "weight");
            records.next();
            first_line = 2;
        } else if first.len() >= 2 {
            weight_col = Some(1);
        }
    }

    let field = |record: &csv::StringRecord, col: usize, line: usize, name: &str| {
        record
            .get(col)
            .ok_or_else(|| InputError::Parse {
                line,
                message: format!("missing {name}"),
            })?
            .parse::<f64>()
            .map_err(|e| InputError::Parse {
                line,
                message: format!("{name}: {e}"),
            })
    };
    let mut values = Vec::new();
    let mut weights = Vec::new();
    for (k, record) in records.enumerate() {
        let record = record?;
        let line = first_line + k;
        if record.iter().all(str::is_empty) {
            continue;
        }
        values.push(field(&record, value_col, line, "value")?);
        if let Some(col) = weight_col {
            weights.push(field(&record, col, line, "weight")?);
        }
    }
    let weights = weight_col.map(|_| weights.as_slice());
    Ok(DiscreteDistribution::from_samples(&values, weights)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_use_seventeen_digits() {
        assert_eq!(format_f64(0.5), "5.0000000000000000e-1");
        let third = 1.0f64 / 3.0;
        assert_eq!(format_f64(third).parse::<f64>().unwrap(), third);
        #[derive(Serialize)]
        struct S {
            x: f64,
            n: u64,
        }
        let json = to_json(&S { x: 0.25, n: 3 });
        assert!(json.contains("\"x\": 2.5000000000000000e-1"));
        assert!(json.contains("\"n\": 3"));
        let back: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(back["x"].as_f64(), Some(0.25));
    }

    #[test]
    fn csv_with_and_without_header() {
        let d = parse_csv(b"value,weight\n0,1\n1,3\n").unwrap();
        assert_eq!(d.probs(), &[0.25, 0.75]);
        let d = parse_csv(b"weight,value\n1,0\n3,1\n").unwrap();
        assert_eq!(d.probs(), &[0.25, 0.75]);
        let d = parse_csv(b"3\n1\n2\n1\n").unwrap();
        assert_eq!(d.values(), &[1.0, 2.0, 3.0]);
        assert_eq!(d.probs(), &[0.5, 0.25, 0.25]);
        let d = parse_csv(b"0, 1\n1, 3\n").unwrap();
        assert_eq!(d.probs(), &[0.25, 0.75]);
    }

    #[test]
    fn csv_errors() {
        assert!(matches!(parse_csv(b"x,y\n1,2\n"), Err(InputError::MissingValueColumn)));
        assert!(matches!(
            parse_csv(b"value\n1\nabc\n"),
            Err(InputError::Parse { line: 3, .. })
        ));
        assert!(matches!(parse_csv(b"value\n"), Err(InputError::Dist(DistError::Empty))));
    }

    #[test]
    fn json_input() {
        let d = parse_json(br#"{"values": [1, 0], "probs": [0.75, 0.25]}"#).unwrap();
        assert_eq!(d.values(), &[0.0, 1.0]);
        assert_eq!(d.probs(), &[0.25, 0.75]);
        assert!(parse_json(b"{\"values\": [1]}").is_err());
    }

    #[test]
    fn sweep_csv_header() {
        let rows = [SweepRow {
            lambda: 1.0,
            a_star: 2.0,
            phi_star: 0.25,
            kl: 0.125,
        }];
        let text = sweep_csv(&rows);
        assert!(text.starts_with("lambda,a_star,phi_star,kl\n"));
        assert_eq!(text.lines().count(), 2);
    }
}
