use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{TrialError, TrialRecord};

fn io(e: impl std::fmt::Display) -> TrialError {
    TrialError::Io(e.to_string())
}

/// One JSON document per line, no trailing spaces.
pub fn record_to_line(record: &TrialRecord) -> Result<String, TrialError> {
    serde_json::to_string(record).map_err(io)
}

/// Appends records to a JSONL file, one trial per line.
pub struct RecordWriter<W: Write> {
    out: W,
}

impl RecordWriter<BufWriter<File>> {
    /// Truncates `path`.
    pub fn create(path: &Path) -> Result<Self, TrialError> {
        Ok(Self::new(BufWriter::new(File::create(path).map_err(io)?)))
    }
}

impl<W: Write> RecordWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn append(&mut self, record: &TrialRecord) -> Result<(), TrialError> {
        let line = record_to_line(record)?;
        self.out.write_all(line.as_bytes()).map_err(io)?;
        self.out.write_all(b"\n").map_err(io)?;
        self.out.flush().map_err(io)
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

pub fn write_records(path: &Path, records: &[TrialRecord]) -> Result<(), TrialError> {
    let mut writer = RecordWriter::create(path)?;
    for record in records {
        writer.append(record)?;
    }
    Ok(())
}

pub fn parse_records(reader: impl BufRead) -> Result<Vec<TrialRecord>, TrialError> {
    let mut records = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line)
            .map_err(|e| TrialError::Io(format!("line {}: {e}", n + 1)))?;
        records.push(record);
    }
    Ok(records)
}

pub fn read_records(path: &Path) -> Result<Vec<TrialRecord>, TrialError> {
    parse_records(BufReader::new(File::open(path).map_err(io)?))
}
