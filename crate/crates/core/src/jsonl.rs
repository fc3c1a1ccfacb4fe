//! Line-delimited JSON helpers shared by every on-disk record format.

use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum JsonlError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("serializing record {index}: {source}")]
    Serialize {
        index: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Write one compact JSON object per line.
pub fn write_records<T: Serialize, W: Write>(records: &[T], mut out: W) -> Result<(), JsonlError> {
    for (index, record) in records.iter().enumerate() {
        serde_json::to_writer(&mut out, record)
            .map_err(|source| JsonlError::Serialize { index, source })?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Serialize records into an in-memory JSONL buffer.
pub fn to_bytes<T: Serialize>(records: &[T]) -> Result<Vec<u8>, JsonlError> {
    let mut buf = Vec::new();
    write_records(records, &mut buf)?;
    Ok(buf)
}

/// Read one JSON object per line. Blank lines are skipped; line numbers in
/// errors are 1-based.
pub fn read_records<T: DeserializeOwned, R: BufRead>(input: R) -> Result<Vec<T>, JsonlError> {
    read_with(input, |value| {
        serde_json::from_value(value).map_err(|e| e.to_string())
    })
}

/// Read JSONL with a custom conversion from each parsed object.
pub fn read_with<T, R, F>(input: R, mut convert: F) -> Result<Vec<T>, JsonlError>
where
    R: BufRead,
    F: FnMut(serde_json::Value) -> Result<T, String>,
{
    let mut out = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let number = idx + 1;
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| JsonlError::Parse {
                line: number,
                message: e.to_string(),
            })?;
        if !value.is_object() {
            return Err(JsonlError::Parse {
                line: number,
                message: "expected a JSON object".into(),
            });
        }
        out.push(convert(value).map_err(|message| JsonlError::Parse {
            line: number,
            message,
        })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Rec {
        a: u32,
    }

    #[test]
    fn truncated_line_reports_line_number() {
        let err = read_records::<Rec, _>("{\"a\": 1\n".as_bytes()).unwrap_err();
        assert!(err.to_string().starts_with("line 1:"), "{err}");
    }

    #[test]
    fn non_object_rejected() {
        let err = read_records::<Rec, _>("{\"a\":1}\n[1]\n".as_bytes()).unwrap_err();
        assert!(err.to_string().starts_with("line 2:"), "{err}");
    }

    #[test]
    fn blank_lines_skipped() {
        let recs: Vec<Rec> = read_records("{\"a\":1}\n\n{\"a\":2}\n".as_bytes()).unwrap();
        assert_eq!(recs, vec![Rec { a: 1 }, Rec { a: 2 }]);
    }
}
