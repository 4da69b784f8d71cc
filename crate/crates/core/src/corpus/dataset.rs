//! Delimited task files with `Index`, `Text`, `Cause` and `Effect` columns.

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{CorpusError, RawExample};

pub const DEFAULT_DELIMITER: u8 = b';';

fn column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers
        .iter()
        .position(|h| h.trim().trim_start_matches('\u{feff}').eq_ignore_ascii_case(name))
}

/// Parses a task file. `Cause`/`Effect` columns may be absent (test data).
///
/// A zero-length input yields no examples.
pub fn parse_dataset(mut source: impl Read, delimiter: u8) -> Result<Vec<RawExample>, CorpusError> {
    let mut buf = String::new();
    source.read_to_string(&mut buf)?;
    if buf.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .from_reader(buf.as_bytes());
    let headers = reader.headers()?.clone();
    let index = column(&headers, "Index").ok_or(CorpusError::MissingColumn("Index"))?;
    let text = column(&headers, "Text").ok_or(CorpusError::MissingColumn("Text"))?;
    let cause = column(&headers, "Cause");
    let effect = column(&headers, "Effect");

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| CorpusError::MalformedRow {
            row,
            message: e.to_string(),
        })?;
        let field = |col: Option<usize>| -> Result<String, CorpusError> {
            match col {
                None => Ok(String::new()),
                Some(c) => record.get(c).map(|s| s.trim().to_owned()).ok_or_else(|| {
                    CorpusError::MalformedRow {
                        row,
                        message: format!("missing field {}", c + 1),
                    }
                }),
            }
        };
        let id = field(Some(index))?;
        if id.is_empty() {
            return Err(CorpusError::MalformedRow {
                row,
                message: "empty Index".into(),
            });
        }
        if !seen.insert(id.clone()) {
            return Err(CorpusError::DuplicateId(id));
        }
        out.push(RawExample {
            id,
            text: field(Some(text))?,
            cause: field(cause)?,
            effect: field(effect)?,
        });
    }
    Ok(out)
}

pub fn read_dataset_file(path: &Path, delimiter: u8) -> Result<Vec<RawExample>, CorpusError> {
    parse_dataset(File::open(path)?, delimiter)
}

/// Writes examples with an `Index;Text;Cause;Effect` header. No examples
/// produce no output at all.
pub fn write_dataset(
    sink: impl Write,
    examples: &[RawExample],
    delimiter: u8,
) -> Result<(), CorpusError> {
    if examples.is_empty() {
        return Ok(());
    }
    let mut writer = csv::WriterBuilder::new().delimiter(delimiter).from_writer(sink);
    writer.write_record(["Index", "Text", "Cause", "Effect"])?;
    for ex in examples {
        writer.write_record([&ex.id, &ex.text, &ex.cause, &ex.effect])?;
    }
    writer.flush()?;
    Ok(())
}
