//! CSV ingestion of 2×2 study counts.
//!
//! Header `study,TP,FP,FN,TN` with an optional trailing `test` column.
//! Lines starting with `#` are ignored and study order is preserved.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use dtaboot_core::data::{Dataset, Study2x2};

const COLUMNS: [&str; 5] = ["study", "TP", "FP", "FN", "TN"];

#[derive(Debug, thiserror::Error)]
pub enum ParseError {
    #[error("empty file")]
    Empty,
    #[error("bad header at line {line}: expected study,TP,FP,FN,TN[,test]")]
    Header { line: u64 },
    #[error("malformed row at line {line}: {reason}")]
    Malformed { line: u64, reason: String },
    #[error("negative count at line {line}")]
    Negative { line: u64 },
    #[error("non-integer count '{value}' at line {line}")]
    NotInteger { line: u64, value: String },
    #[error("duplicate study label '{label}' at line {line}")]
    Duplicate { line: u64, label: String },
    #[error("{reason} at line {line}")]
    Invalid { line: u64, reason: String },
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn parse_count(field: &str, line: u64) -> Result<u64, ParseError> {
    let f = field.trim();
    if f.starts_with('-') && f[1..].parse::<f64>().is_ok() {
        return Err(ParseError::Negative { line });
    }
    f.parse::<u64>().map_err(|_| ParseError::NotInteger { line, value: f.to_string() })
}

/// Parses a dataset from CSV text.
pub fn parse_dataset<R: Read>(reader: R, name: &str) -> Result<Dataset, ParseError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();

    let header = match records.next() {
        None => return Err(ParseError::Empty),
        Some(r) => r.map_err(|e| malformed(&e))?,
    };
    let header_line = line_of(&header);
    let with_test = match header.len() {
        5 => false,
        6 if header[5].eq_ignore_ascii_case("test") => true,
        _ => return Err(ParseError::Header { line: header_line }),
    };
    if !COLUMNS.iter().zip(header.iter()).all(|(want, got)| want.eq_ignore_ascii_case(got)) {
        return Err(ParseError::Header { line: header_line });
    }

    let mut studies: Vec<Study2x2> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for rec in records {
        let rec = rec.map_err(|e| malformed(&e))?;
        let line = line_of(&rec);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if rec.len() != header.len() {
            return Err(ParseError::Malformed {
                line,
                reason: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        let label = rec[0].to_string();
        if label.is_empty() {
            return Err(ParseError::Malformed { line, reason: "empty study label".into() });
        }
        let c: Vec<u64> = (1..5).map(|k| parse_count(&rec[k], line)).collect::<Result<_, _>>()?;
        if c[0] + c[2] == 0 || c[1] + c[3] == 0 {
            return Err(ParseError::Invalid { line, reason: format!("study '{label}' has an empty arm") });
        }
        if !seen.insert(label.clone()) {
            return Err(ParseError::Duplicate { line, label });
        }
        let mut study = Study2x2::new(label, c[0], c[1], c[2], c[3]);
        if with_test && !rec[5].is_empty() {
            study = study.with_group(&rec[5]);
        }
        studies.push(study);
    }
    Dataset::new(name, studies).map_err(|e| ParseError::Invalid { line: header_line, reason: e.to_string() })
}

/// Reads and parses a CSV file; the dataset is named after the file stem.
pub fn read_dataset(path: &Path) -> Result<Dataset, ParseError> {
    let io = |source| ParseError::Io { path: path.display().to_string(), source };
    let file = File::open(path).map_err(io)?;
    let name = path.file_stem().map_or_else(|| "data".to_string(), |s| s.to_string_lossy().into_owned());
    parse_dataset(file, &name)
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

fn malformed(e: &csv::Error) -> ParseError {
    let line = e.position().map_or(0, |p| p.line());
    ParseError::Malformed { line, reason: e.to_string() }
}
