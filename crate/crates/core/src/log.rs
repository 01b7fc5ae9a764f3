//! Per-example indicator logs: parsing, validation and serialization.
//!
//! Two line-oriented formats are accepted:
//!
//! * CSV with header `example_id,<name>,...` and cells exactly `0` or `1`.
//! * JSONL with one `{"id": "...", "indicators": {"<name>": 0|1, ...}}` per line.
//!
//! Missing cells are rejected: a missing indicator cannot be assumed to be
//! a non-failure.

use std::io::{BufRead, Read, Write};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::bounds::TrialSummary;
use crate::error::{CertError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum LogFormat {
    Csv,
    Jsonl,
}

impl LogFormat {
    /// Guess from a file extension.
    pub fn from_path(path: &std::path::Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "csv" => Some(LogFormat::Csv),
            "jsonl" | "ndjson" => Some(LogFormat::Jsonl),
            _ => None,
        }
    }
}

/// `m` examples, each with `T` binary failure indicators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndicatorLog {
    names: Vec<String>,
    ids: Vec<String>,
    rows: Vec<Vec<bool>>,
}

impl IndicatorLog {
    pub fn new(names: Vec<String>, ids: Vec<String>, rows: Vec<Vec<bool>>) -> Result<Self> {
        if names.is_empty() {
            return Err(CertError::validation(
                "log must have at least one indicator",
            ));
        }
        let mut seen = std::collections::HashSet::new();
        for n in &names {
            if n.is_empty() || !seen.insert(n.as_str()) {
                return Err(CertError::validation(format!(
                    "indicator name {n:?} is empty or duplicated"
                )));
            }
        }
        if rows.is_empty() {
            return Err(CertError::validation(
                "log must contain at least one example",
            ));
        }
        if ids.len() != rows.len() {
            return Err(CertError::validation("one id per row required"));
        }
        if let Some(i) = rows.iter().position(|r| r.len() != names.len()) {
            return Err(CertError::validation(format!(
                "row {i} has {} entries, expected {}",
                rows[i].len(),
                names.len()
            )));
        }
        Ok(IndicatorLog { names, ids, rows })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn rows(&self) -> &[Vec<bool>] {
        &self.rows
    }

    pub fn indicator_count(&self) -> usize {
        self.names.len()
    }

    pub fn example_count(&self) -> usize {
        self.rows.len()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Number of examples on which each indicator fired.
    pub fn failure_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.names.len()];
        for row in &self.rows {
            for (c, &bit) in counts.iter_mut().zip(row) {
                *c += u64::from(bit);
            }
        }
        counts
    }

    pub fn summaries(&self) -> Vec<TrialSummary> {
        let m = self.rows.len() as u64;
        self.failure_counts()
            .into_iter()
            .map(|k| TrialSummary::new(k, m).expect("counts never exceed row count"))
            .collect()
    }

    pub fn write<W: Write>(&self, out: W, format: LogFormat) -> Result<()> {
        match format {
            LogFormat::Csv => self.write_csv(out),
            LogFormat::Jsonl => self.write_jsonl(out),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let header = std::iter::once("example_id").chain(self.names.iter().map(String::as_str));
        w.write_record(header).map_err(csv_io)?;
        for (id, row) in self.ids.iter().zip(&self.rows) {
            let cells =
                std::iter::once(id.as_str()).chain(row.iter().map(|&b| if b { "1" } else { "0" }));
            w.write_record(cells).map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for (id, row) in self.ids.iter().zip(&self.rows) {
            let indicators: IndexMap<&str, u8> = self
                .names
                .iter()
                .map(String::as_str)
                .zip(row.iter().map(|&b| u8::from(b)))
                .collect();
            let line = serde_json::to_string(&JsonlRowOut { id, indicators })
                .map_err(|e| CertError::validation(e.to_string()))?;
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> CertError {
    CertError::Io(std::io::Error::other(e.to_string()))
}

#[derive(Serialize)]
struct JsonlRowOut<'a> {
    id: &'a str,
    indicators: IndexMap<&'a str, u8>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonlRow {
    id: String,
    indicators: IndexMap<String, u8>,
}

/// Parse and validate a log; errors carry the 1-based line number.
pub fn ingest_log<R: Read>(source: R, format: LogFormat) -> Result<IndicatorLog> {
    match format {
        LogFormat::Csv => ingest_csv(source),
        LogFormat::Jsonl => ingest_jsonl(std::io::BufReader::new(source)),
    }
}

fn parse_bit(cell: &str, line: usize, name: &str) -> Result<bool> {
    match cell {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(CertError::parse(
            line,
            format!("indicator {name:?} has value {other:?}; expected 0 or 1"),
        )),
    }
}

fn ingest_csv<R: Read>(source: R) -> Result<IndicatorLog> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(source);
    let mut records = reader.records();

    let header = match records.next() {
        None => return Err(CertError::parse(1, "empty log")),
        Some(r) => r.map_err(|e| csv_parse(&e))?,
    };
    if header.get(0) != Some("example_id") {
        return Err(CertError::parse(1, "header must start with example_id"));
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    if names.is_empty() {
        return Err(CertError::parse(1, "header names no indicators"));
    }

    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for record in records {
        let record = record.map_err(|e| csv_parse(&e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != names.len() + 1 {
            return Err(CertError::parse(
                line,
                format!("expected {} cells, found {}", names.len() + 1, record.len()),
            ));
        }
        let row = record
            .iter()
            .skip(1)
            .zip(&names)
            .map(|(cell, name)| parse_bit(cell, line, name))
            .collect::<Result<Vec<_>>>()?;
        ids.push(record[0].to_owned());
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CertError::parse(2, "log has a header but no examples"));
    }
    IndicatorLog::new(names, ids, rows).map_err(|e| CertError::parse(1, e.to_string()))
}

fn csv_parse(e: &csv::Error) -> CertError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    CertError::parse(line, e.to_string())
}

fn ingest_jsonl<R: BufRead>(source: R) -> Result<IndicatorLog> {
    let mut names: Option<Vec<String>> = None;
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: JsonlRow =
            serde_json::from_str(&line).map_err(|e| CertError::parse(lineno, e.to_string()))?;
        let names = names.get_or_insert_with(|| parsed.indicators.keys().cloned().collect());
        if parsed.indicators.len() != names.len() {
            return Err(CertError::parse(
                lineno,
                format!(
                    "expected {} indicators, found {}",
                    names.len(),
                    parsed.indicators.len()
                ),
            ));
        }
        let row = names
            .iter()
            .map(|n| match parsed.indicators.get(n) {
                Some(0) => Ok(false),
                Some(1) => Ok(true),
                Some(v) => Err(CertError::parse(
                    lineno,
                    format!("indicator {n:?} has value {v}; expected 0 or 1"),
                )),
                None => Err(CertError::parse(lineno, format!("indicator {n:?} missing"))),
            })
            .collect::<Result<Vec<_>>>()?;
        ids.push(parsed.id);
        rows.push(row);
    }
    let Some(names) = names else {
        return Err(CertError::parse(1, "empty log"));
    };
    if names.is_empty() {
        return Err(CertError::parse(1, "log names no indicators"));
    }
    IndicatorLog::new(names, ids, rows).map_err(|e| CertError::parse(1, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv(s: &str) -> Result<IndicatorLog> {
        ingest_log(s.as_bytes(), LogFormat::Csv)
    }

    fn jsonl(s: &str) -> Result<IndicatorLog> {
        ingest_log(s.as_bytes(), LogFormat::Jsonl)
    }

    fn parse_line(r: Result<IndicatorLog>) -> usize {
        match r {
            Err(CertError::Parse { line, .. }) => line,
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn csv_basic() {
        let log = csv("example_id,z1,z2\na,0,1\nb,0,0").unwrap();
        assert_eq!(log.example_count(), 2);
        assert_eq!(log.indicator_count(), 2);
        assert_eq!(log.failure_counts(), vec![0, 1]);
        assert_eq!(log.ids(), ["a", "b"]);
    }

    #[test]
    fn csv_quoted_ids_and_trailing_newline() {
        let log = csv("example_id,z\n\"frame, 1\",1\n").unwrap();
        assert_eq!(log.ids(), ["frame, 1"]);
        assert_eq!(log.failure_counts(), vec![1]);
    }

    #[test]
    fn csv_rejects_non_binary() {
        assert_eq!(parse_line(csv("example_id,z1\na,0\nb,2\n")), 3);
        assert_eq!(parse_line(csv("example_id,z1\na, 1\n")), 2);
        assert_eq!(parse_line(csv("example_id,z1\na,\n")), 2);
    }

    #[test]
    fn csv_rejects_bad_shape() {
        assert_eq!(parse_line(csv("")), 1);
        assert_eq!(parse_line(csv("id,z1\na,0\n")), 1);
        assert_eq!(parse_line(csv("example_id\na\n")), 1);
        assert_eq!(parse_line(csv("example_id,z1\n")), 2);
        assert_eq!(parse_line(csv("example_id,z1,z2\na,0,1\nb,0\n")), 3);
        assert!(csv("example_id,z1,z1\na,0,1\n").is_err());
    }

    #[test]
    fn jsonl_basic() {
        let log = jsonl(r#"{"id":"a","indicators":{"z1":1}}"#).unwrap();
        assert_eq!(log.example_count(), 1);
        assert_eq!(log.failure_counts(), vec![1]);
    }

    #[test]
    fn jsonl_key_order_follows_first_line() {
        let src = "{\"id\":\"a\",\"indicators\":{\"zb\":1,\"za\":0}}\n\n{\"id\":\"b\",\"indicators\":{\"za\":1,\"zb\":1}}\n";
        let log = jsonl(src).unwrap();
        assert_eq!(log.names(), ["zb", "za"]);
        assert_eq!(log.failure_counts(), vec![2, 1]);
    }

    #[test]
    fn jsonl_errors() {
        assert_eq!(parse_line(jsonl("")), 1);
        assert_eq!(
            parse_line(jsonl(
                "{\"id\":\"a\",\"indicators\":{\"z\":0}}\n{\"id\":\"b\",\"indicators\":{\"z\":2}}"
            )),
            2
        );
        assert_eq!(
            parse_line(jsonl(
                "{\"id\":\"a\",\"indicators\":{\"z\":0}}\n{\"id\":\"b\",\"indicators\":{\"y\":0}}"
            )),
            2
        );
        assert_eq!(
            parse_line(jsonl("{\"id\":\"a\",\"indicators\":{\"z\":\"1\"}}")),
            1
        );
        assert_eq!(
            parse_line(jsonl("{\"id\":\"a\",\"indicators\":{\"z\":1},\"x\":0}")),
            1
        );
        assert_eq!(parse_line(jsonl("not json")), 1);
    }

    #[test]
    fn writers_are_ingestible() {
        let log = csv("example_id,z1,z2\na,0,1\nb,1,1\nc,0,0").unwrap();
        for format in [LogFormat::Csv, LogFormat::Jsonl] {
            let mut buf = Vec::new();
            log.write(&mut buf, format).unwrap();
            assert_eq!(ingest_log(buf.as_slice(), format).unwrap(), log);
        }
    }
}
